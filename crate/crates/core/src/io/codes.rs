use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::{read_array, read_full, read_u32, read_u64};
use crate::baselines::BinaryCodes;
use crate::error::{Error, Result};
use crate::pq::{CodeSet, Codebook, MAX_CODEWORDS};

pub const CODE_MAGIC: [u8; 4] = *b"PQKC";
pub const CODEBOOK_MAGIC: [u8; 4] = *b"PQCB";
pub const BINARY_MAGIC: [u8; 4] = *b"PQKB";
pub const FORMAT_VERSION: u32 = 1;

fn expect_magic<R: Read>(r: &mut R, expected: [u8; 4]) -> Result<()> {
    let found = read_array::<4, _>(r)?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

fn expect_version<R: Read>(r: &mut R) -> Result<()> {
    let v = read_u32(r)?;
    if v != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(v));
    }
    Ok(())
}

fn header_u32(value: usize, what: &str) -> Result<[u8; 4]> {
    u32::try_from(value)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::InvalidArgument(format!("{what} {value} does not fit the header")))
}

/// Streaming reader for PQKC files:
/// `"PQKC" | version u32 | N u64 | M u32 | L u32 | N*M subindex bytes`.
pub struct CodeReader<R> {
    inner: R,
    n: usize,
    m: usize,
    l: usize,
    read: usize,
}

impl CodeReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> CodeReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        expect_magic(&mut inner, CODE_MAGIC)?;
        expect_version(&mut inner)?;
        let n = read_u64(&mut inner)? as usize;
        let m = read_u32(&mut inner)? as usize;
        let l = read_u32(&mut inner)? as usize;
        if m == 0 || !(1..=MAX_CODEWORDS).contains(&l) {
            return Err(Error::InvalidArgument(format!(
                "invalid code header M={m}, L={l}"
            )));
        }
        Ok(Self {
            inner,
            n,
            m,
            l,
            read: 0,
        })
    }

    /// Number of codes declared in the header.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn num_subspaces(&self) -> usize {
        self.m
    }

    pub fn num_codewords(&self) -> usize {
        self.l
    }

    /// Up to `max` codes; `None` after the last one. Fails if the payload is
    /// shorter or longer than the header declares.
    pub fn next_chunk(&mut self, max: usize) -> Result<Option<CodeSet>> {
        let want = max.min(self.n - self.read);
        if want == 0 {
            let mut probe = [0u8; 1];
            if read_full(&mut self.inner, &mut probe)? != 0 {
                return Err(Error::LengthMismatch {
                    expected: self.n * self.m,
                    found: self.n * self.m + 1,
                });
            }
            return Ok(None);
        }
        let mut buf = vec![0u8; want * self.m];
        let got = read_full(&mut self.inner, &mut buf)?;
        if got != buf.len() {
            return Err(Error::LengthMismatch {
                expected: self.n * self.m,
                found: self.read * self.m + got,
            });
        }
        self.read += want;
        CodeSet::new(self.m, self.l, buf).map(Some)
    }

    pub fn read_all(mut self) -> Result<CodeSet> {
        let mut out = CodeSet::with_capacity(self.m, self.l, self.n);
        while let Some(chunk) = self.next_chunk(1 << 16)? {
            out.extend(&chunk)?;
        }
        Ok(out)
    }
}

pub fn read_codes(path: impl AsRef<Path>) -> Result<CodeSet> {
    CodeReader::open(path)?.read_all()
}

/// Streaming PQKC writer; the code count is patched into the header on
/// [`CodeWriter::finish`].
pub struct CodeWriter<W: Write + Seek> {
    inner: W,
    m: usize,
    l: usize,
    n: u64,
}

impl CodeWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, m: usize, l: usize) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), m, l)
    }
}

impl<W: Write + Seek> CodeWriter<W> {
    pub fn new(mut inner: W, m: usize, l: usize) -> Result<Self> {
        if m == 0 || !(1..=MAX_CODEWORDS).contains(&l) {
            return Err(Error::InvalidArgument(format!(
                "invalid code shape M={m}, L={l}"
            )));
        }
        inner.write_all(&CODE_MAGIC)?;
        inner.write_all(&FORMAT_VERSION.to_le_bytes())?;
        inner.write_all(&0u64.to_le_bytes())?;
        inner.write_all(&header_u32(m, "M")?)?;
        inner.write_all(&header_u32(l, "L")?)?;
        Ok(Self { inner, m, l, n: 0 })
    }

    pub fn write(&mut self, codes: &CodeSet) -> Result<()> {
        if codes.num_subspaces() != self.m || codes.num_codewords() != self.l {
            return Err(Error::ShapeMismatch(format!(
                "codes (M={}, L={}) do not match file (M={}, L={})",
                codes.num_subspaces(),
                codes.num_codewords(),
                self.m,
                self.l
            )));
        }
        self.inner.write_all(codes.as_bytes())?;
        self.n += codes.len() as u64;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.seek(SeekFrom::Start(8))?;
        self.inner.write_all(&self.n.to_le_bytes())?;
        self.inner.seek(SeekFrom::End(0))?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub fn write_codes(path: impl AsRef<Path>, codes: &CodeSet) -> Result<()> {
    let mut w = CodeWriter::create(path, codes.num_subspaces(), codes.num_codewords())?;
    w.write(codes)?;
    w.finish()?;
    Ok(())
}

/// `"PQCB" | version u32 | D u32 | M u32 | L u32 | D*L f32`, codewords
/// subspace-major, codeword-major, dimension-minor.
pub fn write_codebook(path: impl AsRef<Path>, codebook: &Codebook) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&CODEBOOK_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&header_u32(codebook.dim(), "D")?)?;
    w.write_all(&header_u32(codebook.num_subspaces(), "M")?)?;
    w.write_all(&header_u32(codebook.num_codewords(), "L")?)?;
    for v in codebook.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    let mut r = BufReader::new(File::open(path)?);
    expect_magic(&mut r, CODEBOOK_MAGIC)?;
    expect_version(&mut r)?;
    let dim = read_u32(&mut r)? as usize;
    let m = read_u32(&mut r)? as usize;
    let l = read_u32(&mut r)? as usize;
    crate::pq::check_layout(dim, m, l)?;
    let mut raw = vec![0u8; dim * l * 4];
    let got = read_full(&mut r, &mut raw)?;
    if got != raw.len() || read_full(&mut r, &mut [0u8; 1])? != 0 {
        return Err(Error::LengthMismatch {
            expected: raw.len(),
            found: got,
        });
    }
    let words = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Codebook::new(dim, m, l, words)
}

/// `"PQKB" | B u32 | N u64 | N*B/8 bytes`, each code little-endian with bit
/// `b` at byte `b / 8`, position `b % 8`.
pub fn write_binary_codes(path: impl AsRef<Path>, codes: &BinaryCodes) -> Result<()> {
    if !codes.bits().is_multiple_of(8) {
        return Err(Error::InvalidArgument(format!(
            "binary code length {} is not a multiple of 8",
            codes.bits()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&BINARY_MAGIC)?;
    w.write_all(&header_u32(codes.bits(), "B")?)?;
    w.write_all(&(codes.len() as u64).to_le_bytes())?;
    for i in 0..codes.len() {
        w.write_all(&codes.code_bytes(i))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary_codes(path: impl AsRef<Path>) -> Result<BinaryCodes> {
    let mut r = BufReader::new(File::open(path)?);
    expect_magic(&mut r, BINARY_MAGIC)?;
    let bits = read_u32(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    if bits == 0 || !bits.is_multiple_of(8) {
        return Err(Error::InvalidArgument(format!(
            "invalid binary code length {bits}"
        )));
    }
    let mut codes = BinaryCodes::new(bits)?;
    let mut buf = vec![0u8; bits / 8];
    for i in 0..n {
        if read_full(&mut r, &mut buf)? != buf.len() {
            return Err(Error::LengthMismatch {
                expected: n,
                found: i,
            });
        }
        codes.push_bytes(&buf)?;
    }
    if read_full(&mut r, &mut [0u8; 1])? != 0 {
        return Err(Error::LengthMismatch {
            expected: n,
            found: n + 1,
        });
    }
    Ok(codes)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[u32]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in labels {
        w.write_all(&l.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u32>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Io(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("label file length {} is not a multiple of 4", bytes.len()),
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn pqkc(n: u64, m: u32, l: u32, payload: &[u8]) -> Vec<u8> {
        let mut v = b"PQKC".to_vec();
        v.extend(1u32.to_le_bytes());
        v.extend(n.to_le_bytes());
        v.extend(m.to_le_bytes());
        v.extend(l.to_le_bytes());
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn header_layout() {
        let codes = CodeSet::new(2, 16, vec![1, 2, 3, 4]).unwrap();
        let mut w = CodeWriter::new(Cursor::new(Vec::new()), 2, 16).unwrap();
        w.write(&codes).unwrap();
        let bytes = w.finish().unwrap().into_inner();
        assert_eq!(bytes, pqkc(2, 2, 16, &[1, 2, 3, 4]));
    }

    #[test]
    fn out_of_range_byte() {
        let err = CodeReader::new(Cursor::new(pqkc(2, 2, 16, &[1, 2, 16, 0])))
            .unwrap()
            .read_all()
            .unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidCode {
                index: 16,
                l: 16,
                ..
            }
        ));
    }

    #[test]
    fn short_and_long_payloads() {
        let err = CodeReader::new(Cursor::new(pqkc(3, 1, 4, &[0, 1])))
            .unwrap()
            .read_all()
            .unwrap_err();
        assert!(matches!(
            err,
            Error::LengthMismatch {
                expected: 3,
                found: 2
            }
        ));
        let err = CodeReader::new(Cursor::new(pqkc(1, 1, 4, &[0, 1])))
            .unwrap()
            .read_all()
            .unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = pqkc(0, 1, 4, &[]);
        bytes[0] = b'X';
        assert!(matches!(
            CodeReader::new(Cursor::new(bytes)),
            Err(Error::BadMagic { .. })
        ));
        let mut bytes = pqkc(0, 1, 4, &[]);
        bytes[4] = 9;
        assert!(matches!(
            CodeReader::new(Cursor::new(bytes)),
            Err(Error::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn streamed_chunks_equal_whole_read() {
        let payload: Vec<u8> = (0..300u32).map(|i| (i * 7 % 256) as u8).collect();
        let bytes = pqkc(100, 3, 256, &payload);
        let whole = CodeReader::new(Cursor::new(bytes.clone()))
            .unwrap()
            .read_all()
            .unwrap();
        let mut r = CodeReader::new(Cursor::new(bytes)).unwrap();
        let mut streamed = CodeSet::with_capacity(3, 256, 100);
        while let Some(c) = r.next_chunk(7).unwrap() {
            assert!(c.len() <= 7);
            streamed.extend(&c).unwrap();
        }
        assert_eq!(whole, streamed);
        assert_eq!(whole.as_bytes(), &payload[..]);
    }

    #[test]
    fn codebook_round_trip_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cb.pqcb");
        let cb = Codebook::new(4, 2, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        write_codebook(&p, &cb).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"PQCB");
        assert_eq!(bytes.len(), 20 + 8 * 4);
        assert_eq!(&bytes[20..24], &0.0f32.to_le_bytes());
        assert_eq!(&bytes[48..52], &7.0f32.to_le_bytes());
        assert_eq!(read_codebook(&p).unwrap(), cb);
    }

    #[test]
    fn binary_codes_reject_partial_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let codes = BinaryCodes::new(12).unwrap();
        assert!(write_binary_codes(dir.path().join("x"), &codes).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.u32");
        write_labels(&p, &[0, 7, u32::MAX]).unwrap();
        assert_eq!(std::fs::read(&p).unwrap().len(), 12);
        assert_eq!(read_labels(&p).unwrap(), vec![0, 7, u32::MAX]);
        std::fs::write(&p, [1, 2, 3]).unwrap();
        assert!(read_labels(&p).is_err());
    }
}
