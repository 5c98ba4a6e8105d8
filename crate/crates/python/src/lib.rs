//! Python bindings: codebook training and encoding, PQk-means, the two
//! baselines, evaluation metrics and dataset I/O.
//!
//! Vectors cross the boundary as sequences of float rows (lists or 2-D NumPy
//! arrays); labels as integer sequences; PQ codes as [`Codes`] objects.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pqkmeans::clustering::{IterationRecord, MemoryEstimate};
use pqkmeans::{io, CodeSet, Dataset, UpdateMethod};

fn to_py(err: pqkmeans::Error) -> PyErr {
    match err {
        pqkmeans::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn dataset(rows: Vec<Vec<f32>>) -> PyResult<Dataset> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("expected at least one vector"));
    }
    Dataset::from_rows(&rows).map_err(to_py)
}

fn rows(data: &Dataset) -> Vec<Vec<f32>> {
    data.rows().map(<[f32]>::to_vec).collect()
}

fn trace<'py>(py: Python<'py>, records: &[IterationRecord]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("iteration", r.iteration)?;
            d.set_item("objective", r.objective)?;
            d.set_item("objective_sq", r.objective_sq)?;
            d.set_item("assign_ms", r.assign_ms)?;
            d.set_item("update_ms", r.update_ms)?;
            d.set_item("repaired", r.repaired)?;
            d.set_item("mean_nnz", r.mean_nnz)?;
            Ok(d)
        })
        .collect()
}

fn summary<'py>(
    py: Python<'py>,
    labels: Vec<u32>,
    records: &[IterationRecord],
    iterations_run: usize,
    converged: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("labels", labels)?;
    d.set_item("objective", records.last().map(|r| r.objective))?;
    d.set_item("trace", trace(py, records)?)?;
    d.set_item("iterations_run", iterations_run)?;
    d.set_item("converged", converged)?;
    Ok(d)
}

/// PQ codes: `len(codes)` codes of `m` subindices below `l`.
#[pyclass(module = "pqkmeans", frozen)]
pub struct Codes {
    inner: CodeSet,
}

#[pymethods]
impl Codes {
    #[new]
    fn new(codes: Vec<Vec<u8>>, l: usize) -> PyResult<Self> {
        let m = codes.first().map_or(0, Vec::len);
        let inner = CodeSet::from_codes(m, l, &codes).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.num_subspaces()
    }

    #[getter]
    fn l(&self) -> usize {
        self.inner.num_codewords()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Codes(n={}, m={}, l={})",
            self.inner.len(),
            self.m(),
            self.l()
        )
    }

    fn to_list(&self) -> Vec<Vec<u8>> {
        self.inner.iter().map(<[u8]>::to_vec).collect()
    }

    /// Writes a PQKC file.
    fn save(&self, path: &str) -> PyResult<()> {
        io::write_codes(path, &self.inner).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::read_codes(path).map_err(to_py)?,
        })
    }
}

#[pyclass(module = "pqkmeans", frozen)]
pub struct Codebook {
    inner: pqkmeans::Codebook,
}

#[pymethods]
impl Codebook {
    /// Learns `l` codewords for each of `m` subspaces by k-means.
    #[staticmethod]
    #[pyo3(signature = (vectors, m, l = 256, iterations = 20, seed = 0))]
    fn train(
        py: Python<'_>,
        vectors: Vec<Vec<f32>>,
        m: usize,
        l: usize,
        iterations: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let data = dataset(vectors)?;
        let inner = py
            .detach(|| pqkmeans::train_codebook(&data, m, l, iterations, seed))
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.num_subspaces()
    }

    #[getter]
    fn l(&self) -> usize {
        self.inner.num_codewords()
    }

    fn __repr__(&self) -> String {
        format!(
            "Codebook(dim={}, m={}, l={})",
            self.dim(),
            self.m(),
            self.l()
        )
    }

    fn encode(&self, py: Python<'_>, vectors: Vec<Vec<f32>>) -> PyResult<Codes> {
        let data = dataset(vectors)?;
        let inner = py
            .detach(|| pqkmeans::encode_all(&self.inner, &data))
            .map_err(to_py)?;
        Ok(Codes { inner })
    }

    fn decode(&self, codes: &Codes) -> PyResult<Vec<Vec<f32>>> {
        codes
            .inner
            .iter()
            .map(|c| pqkmeans::decode(&self.inner, c))
            .collect::<Result<_, _>>()
            .map_err(to_py)
    }

    /// Squared symmetric distance between two codes.
    fn distance(&self, a: Vec<u8>, b: Vec<u8>) -> PyResult<f64> {
        let tables = pqkmeans::build_distance_tables(&self.inner);
        pqkmeans::symmetric_distance_sq(&tables, &a, &b).map_err(to_py)
    }

    /// Writes a PQCB file.
    fn save(&self, path: &str) -> PyResult<()> {
        io::write_codebook(path, &self.inner).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::read_codebook(path).map_err(to_py)?,
        })
    }
}

/// PQk-means over `codes` using the distance tables of `codebook`.
#[pyfunction]
#[pyo3(signature = (codes, codebook, k, max_iterations = 20, seed = 0, update = "sparse"))]
fn fit<'py>(
    py: Python<'py>,
    codes: &Codes,
    codebook: &Codebook,
    k: usize,
    max_iterations: usize,
    seed: u64,
    update: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let update = match update {
        "sparse" => UpdateMethod::SparseVoting,
        "naive" => UpdateMethod::Naive,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown update {other:?}: use 'sparse' or 'naive'"
            )))
        }
    };
    let tables = pqkmeans::build_distance_tables(&codebook.inner);
    let result = py
        .detach(|| {
            pqkmeans::PqKMeans::new(k)
                .max_iterations(max_iterations)
                .seed(seed)
                .update(update)
                .fit(&codes.inner, &tables)
        })
        .map_err(to_py)?;
    let d = summary(
        py,
        result.labels,
        &result.trace,
        result.iterations_run,
        result.converged,
    )?;
    d.set_item(
        "centers",
        Codes {
            inner: result.centers,
        },
    )?;
    d.set_item("strategy", result.strategy)?;
    Ok(d)
}

/// Exact Lloyd k-means on raw vectors.
#[pyfunction]
#[pyo3(signature = (vectors, k, max_iterations = 20, seed = 0))]
fn kmeans_fit<'py>(
    py: Python<'py>,
    vectors: Vec<Vec<f32>>,
    k: usize,
    max_iterations: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let data = dataset(vectors)?;
    let result = py
        .detach(|| pqkmeans::kmeans_fit(&data, k, max_iterations, seed))
        .map_err(to_py)?;
    let d = summary(
        py,
        result.labels,
        &result.trace,
        result.iterations_run,
        result.converged,
    )?;
    d.set_item("centers", rows(&result.centers))?;
    Ok(d)
}

/// Binary k-means: binarize with a random rotation to `bits` bits, then
/// cluster under Hamming distance.
#[pyfunction]
#[pyo3(signature = (vectors, bits, k, max_iterations = 20, seed = 0))]
fn bkmeans<'py>(
    py: Python<'py>,
    vectors: Vec<Vec<f32>>,
    bits: usize,
    k: usize,
    max_iterations: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let data = dataset(vectors)?;
    let result = py
        .detach(|| {
            let binarizer = pqkmeans::Binarizer::random(data.dim(), bits, seed)?;
            let codes = binarizer.binarize_all(&data)?;
            pqkmeans::bkmeans_fit(&codes, k, max_iterations, seed)
        })
        .map_err(to_py)?;
    summary(
        py,
        result.labels,
        &result.trace,
        result.iterations_run,
        result.converged,
    )
}

#[pyfunction]
fn rand_index(a: Vec<u32>, b: Vec<u32>) -> PyResult<f64> {
    pqkmeans::rand_index(&a, &b).map_err(to_py)
}

/// Mean Euclidean distance of each vector to its cluster's mean.
#[pyfunction]
fn original_space_error(vectors: Vec<Vec<f32>>, labels: Vec<u32>) -> PyResult<f64> {
    pqkmeans::original_space_error(&dataset(vectors)?, &labels).map_err(to_py)
}

/// Memory of a PQk-means run in bytes, broken down by component.
#[pyfunction]
fn estimate_memory(py: Python<'_>, n: u64, k: u64, m: u64, l: u64) -> PyResult<Bound<'_, PyDict>> {
    let MemoryEstimate {
        codes_and_centers,
        tables,
        assignment,
        total,
    } = pqkmeans::estimate_memory(n, k, m, l);
    let d = PyDict::new(py);
    d.set_item("codes_and_centers", codes_and_centers)?;
    d.set_item("tables", tables)?;
    d.set_item("assignment", assignment)?;
    d.set_item("total", total)?;
    Ok(d)
}

/// Gaussian mixture; returns `(vectors, labels)`.
#[pyfunction]
#[pyo3(signature = (n, d, clusters, spread, seed = 0))]
fn generate_synthetic(
    n: usize,
    d: usize,
    clusters: usize,
    spread: f32,
    seed: u64,
) -> PyResult<(Vec<Vec<f32>>, Vec<u32>)> {
    let (data, labels) = io::generate_synthetic(n, d, clusters, spread, seed).map_err(to_py)?;
    Ok((rows(&data), labels))
}

#[pyfunction]
fn read_fvecs(path: &str) -> PyResult<Vec<Vec<f32>>> {
    Ok(rows(&io::read_fvecs(path).map_err(to_py)?))
}

#[pyfunction]
fn write_fvecs(path: &str, vectors: Vec<Vec<f32>>) -> PyResult<()> {
    io::write_fvecs(path, &dataset(vectors)?).map_err(to_py)
}

#[pyfunction]
fn read_bvecs(path: &str) -> PyResult<Vec<Vec<f32>>> {
    Ok(rows(&io::read_bvecs(path).map_err(to_py)?))
}

#[pymodule]
#[pyo3(name = "pqkmeans")]
fn pqkmeans_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Codebook>()?;
    m.add_class::<Codes>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans_fit, m)?)?;
    m.add_function(wrap_pyfunction!(bkmeans, m)?)?;
    m.add_function(wrap_pyfunction!(rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(original_space_error, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_memory, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(read_fvecs, m)?)?;
    m.add_function(wrap_pyfunction!(write_fvecs, m)?)?;
    m.add_function(wrap_pyfunction!(read_bvecs, m)?)?;
    Ok(())
}
