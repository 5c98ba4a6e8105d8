//! Acceptance suite. Each criterion runs in isolation and prints one
//! PASS/FAIL line; the process exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p pqkmeans --test acceptance`.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use pqkmeans::io::{
    read_binary_codes, read_bvecs, read_codes, read_fvecs, write_binary_codes, write_bvecs,
    write_codes, write_fvecs,
};
use pqkmeans::seed::{self, derive_seed};
use pqkmeans::{
    assign, bkmeans_fit, build_distance_tables, build_histogram, decode, encode_all,
    estimate_memory, io::generate_synthetic, majority_center, original_space_error, rand_index,
    symmetric_distance_sq, train_codebook, update_center_naive, update_center_sparse, Binarizer,
    BinaryCodes, CodeSet, Codebook, Dataset, DistanceTables, PqKMeans, UpdateMethod,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_codebook(dim: usize, m: usize, l: usize, rng: &mut impl Rng) -> Codebook {
    let words = (0..dim * l)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    Codebook::new(dim, m, l, words).unwrap()
}

fn random_codes(n: usize, m: usize, l: usize, rng: &mut impl Rng) -> CodeSet {
    CodeSet::new(
        m,
        l,
        (0..n * m).map(|_| rng.random_range(0..l) as u8).collect(),
    )
    .unwrap()
}

/// Trains a codebook on (a prefix of) the data and encodes everything.
fn quantize(
    data: &Dataset,
    m: usize,
    l: usize,
    train_n: usize,
    seed: u64,
) -> (Codebook, DistanceTables, CodeSet) {
    let train = data.select(&(0..train_n.min(data.len())).collect::<Vec<_>>());
    let cb = train_codebook(&train, m, l, 20, seed).unwrap();
    let tables = build_distance_tables(&cb);
    let codes = encode_all(&cb, data).unwrap();
    (cb, tables, codes)
}

fn c1_sparse_voting_exact() -> Outcome {
    let mut rng = seed::rng(1);
    let ls = [4usize, 16, 64, 256];
    let ms = [1usize, 2, 4, 8];
    let tables: Vec<Vec<DistanceTables>> = ms
        .iter()
        .map(|&m| {
            ls.iter()
                .map(|&l| build_distance_tables(&random_codebook(2 * m, m, l, &mut rng)))
                .collect()
        })
        .collect();
    let cases = 1000;
    let mut mismatches = 0;
    for case in 0..cases {
        let (mi, li) = (case % 4, (case / 4) % 4);
        let (m, l) = (ms[mi], ls[li]);
        let t = &tables[mi][li];
        let nk = rng.random_range(1..=1000);
        // Half the clusters draw from a narrow band of subindices.
        let width = if case % 2 == 0 {
            l
        } else {
            rng.random_range(1..=l.min(8))
        };
        let base: Vec<usize> = (0..m).map(|_| rng.random_range(0..=l - width)).collect();
        let data: Vec<u8> = (0..nk * m)
            .map(|i| (base[i % m] + rng.random_range(0..width)) as u8)
            .collect();
        let members = CodeSet::new(m, l, data).unwrap();
        let naive = update_center_naive(&members, t).unwrap();
        let hists: Vec<_> = (0..m)
            .map(|s| build_histogram(&members.iter().map(|c| c[s]).collect::<Vec<_>>(), l).unwrap())
            .collect();
        if update_center_sparse(&hists, t).unwrap() != naive {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches}/{cases} clusters differ"),
    )?;
    Ok(format!("{cases}/{cases} clusters index-identical"))
}

fn c2_sparse_voting_speedup() -> Outcome {
    let start = Instant::now();
    let (data, _) = generate_synthetic(100_000, 16, 100, 0.1, 2).unwrap();
    let (_, tables, codes) = quantize(&data, 4, 256, 20_000, 2);
    let sparse = PqKMeans::new(100).seed(3).fit(&codes, &tables).unwrap();
    let naive = PqKMeans::new(100)
        .seed(3)
        .update(UpdateMethod::Naive)
        .fit(&codes, &tables)
        .unwrap();
    check(
        sparse.labels == naive.labels && sparse.centers == naive.centers,
        "naive and sparse runs diverged",
    )?;
    let (ts, tn) = (sparse.total_update_ms(), naive.total_update_ms());
    let nnz = sparse.mean_nnz().unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let summary = format!(
        "sparse {ts:.1} ms vs naive {tn:.1} ms ({:.1}x), mean nnz {nnz:.1}, {} iterations, {elapsed:.1} s",
        tn / ts,
        sparse.iterations_run
    );
    check(ts <= 0.5 * tn, summary.clone())?;
    check(nnz <= 256.0, summary.clone())?;
    check(elapsed < 60.0, summary.clone())?;
    Ok(summary)
}

fn c3_objective_monotone() -> Outcome {
    let mut rng = seed::rng(3);
    let mut violations = 0;
    let mut plain_violations = 0;
    let mut iterations = 0;
    for run in 0..100u64 {
        let n = rng.random_range(50..=10_000);
        let k = rng.random_range(2..=50.min(n));
        let m = [2usize, 4][run as usize % 2];
        let l = [16usize, 64, 256][run as usize % 3];
        let t = build_distance_tables(&random_codebook(2 * m, m, l, &mut rng));
        let codes = random_codes(n, m, l, &mut rng);
        let res = PqKMeans::new(k)
            .seed(run)
            .max_iterations(30)
            .fit(&codes, &t)
            .unwrap();
        iterations += res.iterations_run;
        for w in res.trace.windows(2) {
            if w[1].objective_sq > w[0].objective_sq {
                violations += 1;
            }
            if w[1].objective > w[0].objective {
                plain_violations += 1;
            }
        }
    }
    check(
        violations == 0,
        format!("{violations} increases of the squared objective"),
    )?;
    Ok(format!(
        "0 increases over {iterations} iterations in 100 runs (non-squared mean distance rose {plain_violations} times)"
    ))
}

fn c4_assignment_oracle() -> Outcome {
    let mut rng = seed::rng(4);
    let mut ties = 0usize;
    for inst in 0..200 {
        let n = rng.random_range(1..=500);
        let k = rng.random_range(1..=20);
        let m = rng.random_range(1..=4);
        let l = [4usize, 8, 16][inst % 3];
        // Integer codewords on a small grid make exact ties common.
        let words = (0..m * l).map(|_| rng.random_range(0..3) as f32).collect();
        let t = build_distance_tables(&Codebook::new(m, m, l, words).unwrap());
        let codes = random_codes(n, m, l, &mut rng);
        let centers = random_codes(k, m, l, &mut rng);
        let labels = assign(&codes, &centers, &t).unwrap();
        for (i, c) in codes.iter().enumerate() {
            let d: Vec<f64> = centers
                .iter()
                .map(|z| symmetric_distance_sq(&t, c, z).unwrap())
                .collect();
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            let want = d.iter().position(|&x| x == min).unwrap();
            if d.iter().filter(|&&x| x == min).count() > 1 {
                ties += 1;
            }
            check(
                labels[i] as usize == want,
                format!("instance {inst} point {i}: got {} want {want}", labels[i]),
            )?;
        }
    }
    Ok(format!(
        "200 instances exact, {ties} tied points resolved to lowest index"
    ))
}

fn c5_sdc_fidelity() -> Outcome {
    let mut rng = seed::rng(5);
    let cb = random_codebook(64, 8, 256, &mut rng);
    let t = build_distance_tables(&cb);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let a: Vec<u8> = (0..8).map(|_| rng.random()).collect();
        let b: Vec<u8> = (0..8).map(|_| rng.random()).collect();
        let sd = symmetric_distance_sq(&t, &a, &b).unwrap();
        let (x, y) = (decode(&cb, &a).unwrap(), decode(&cb, &b).unwrap());
        let exact: f64 = x
            .iter()
            .zip(&y)
            .map(|(p, q)| (*p as f64 - *q as f64).powi(2))
            .sum();
        if exact > 0.0 {
            worst = worst.max((sd - exact).abs() / exact);
        } else {
            check(sd == 0.0, "nonzero SD between identical decodings")?;
        }
    }
    check(worst <= 1e-9, format!("worst relative error {worst:e}"))?;
    Ok(format!("worst relative error {worst:.2e} over 10^4 pairs"))
}

fn c6_memory_arithmetic() -> Outcome {
    let est = estimate_memory(1_281_167, 0, 4, 256);
    let mb = format!("{:.2}", est.codes_megabytes());
    check(
        est.codes_and_centers == 5_124_668,
        format!("codes {} bytes", est.codes_and_centers),
    )?;
    check(mb == "5.12", format!("displayed {mb} MB"))?;
    let big = estimate_memory(1_000_000_000, 100_000, 4, 256);
    check(
        big.total < 32_000_000_000,
        format!("billion-scale total {} bytes", big.total),
    )?;
    Ok(format!(
        "{mb} MB for 1,281,167 32-bit codes; 10^9 points total {:.2} GB < 32 GB",
        big.total as f64 / 1e9
    ))
}

/// Dataset shared by criteria 7 and 12: overlapping components (spread 0.5
/// against means spread over [-1, 1]^32), so the error reflects encoding
/// fidelity rather than which components a random start happens to merge.
fn directional_dataset(seed: u64) -> Dataset {
    generate_synthetic(100_000, 32, 50, 0.5, derive_seed(seed, 70))
        .unwrap()
        .0
}

struct DirectionalRun {
    pq_error: f64,
    bk_error: f64,
    pq_converged_within_20: bool,
    pq_iterations: usize,
}

fn directional_run(seed: u64) -> DirectionalRun {
    let data = directional_dataset(seed);
    let (_, tables, codes) = quantize(&data, 4, 256, 10_000, derive_seed(seed, 71));
    let pq = PqKMeans::new(50)
        .seed(derive_seed(seed, 72))
        .max_iterations(20)
        .fit(&codes, &tables)
        .unwrap();
    let binarizer = Binarizer::random(32, 32, derive_seed(seed, 73)).unwrap();
    let bcodes = binarizer.binarize_all(&data).unwrap();
    let bk = bkmeans_fit(&bcodes, 50, 20, derive_seed(seed, 72)).unwrap();
    DirectionalRun {
        pq_error: original_space_error(&data, &pq.labels).unwrap(),
        bk_error: original_space_error(&data, &bk.labels).unwrap(),
        pq_converged_within_20: pq.converged,
        pq_iterations: pq.iterations_run,
    }
}

fn c7_and_c12() -> (Outcome, Outcome) {
    let start = Instant::now();
    let runs: Vec<DirectionalRun> = (0..5).map(directional_run).collect();
    let elapsed = start.elapsed().as_secs_f64();
    let wins = runs.iter().filter(|r| r.pq_error <= r.bk_error).count();
    let detail: Vec<String> = runs
        .iter()
        .map(|r| format!("{:.4}/{:.4}", r.pq_error, r.bk_error))
        .collect();
    let c7 = if wins >= 4 && elapsed < 600.0 {
        Ok(format!(
            "PQ <= Bk error in {wins}/5 seeds (pq/bk: {}), {elapsed:.0} s",
            detail.join(" ")
        ))
    } else {
        Err(format!(
            "PQ <= Bk error in {wins}/5 seeds (pq/bk: {}), {elapsed:.0} s",
            detail.join(" ")
        ))
    };
    let conv = runs.iter().filter(|r| r.pq_converged_within_20).count();
    let iters: Vec<usize> = runs.iter().map(|r| r.pq_iterations).collect();
    let msg = format!("converged within 20 iterations in {conv}/5 seeds (iterations {iters:?})");
    let c12 = if conv >= 4 { Ok(msg) } else { Err(msg) };
    (c7, c12)
}

fn c8_recovery() -> Outcome {
    let mut scores = Vec::new();
    for s in 0..5u64 {
        // Spread is 0.01x the hypercube side of 2.
        let (data, truth) = generate_synthetic(20_000, 32, 100, 0.02, derive_seed(s, 80)).unwrap();
        let (_, tables, codes) = quantize(&data, 4, 256, 20_000, derive_seed(s, 81));
        let res = PqKMeans::new(100)
            .seed(derive_seed(s, 82))
            .fit(&codes, &tables)
            .unwrap();
        scores.push(rand_index(&res.labels, &truth).unwrap());
    }
    let good = scores.iter().filter(|&&r| r >= 0.95).count();
    let msg = format!("Rand index >= 0.95 in {good}/5 seeds ({scores:.4?})");
    if good >= 4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c9_determinism() -> Outcome {
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let eight = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .unwrap();
    for trial in 0..20u64 {
        let (data, _) = generate_synthetic(5_000, 16, 20, 0.1, derive_seed(trial, 90)).unwrap();
        let (_, tables, codes) = quantize(&data, 4, 64, 5_000, trial);
        let cfg = PqKMeans::new(20).seed(trial);
        let a = one.install(|| cfg.fit(&codes, &tables).unwrap());
        let b = eight.install(|| cfg.fit(&codes, &tables).unwrap());
        let objs = |r: &pqkmeans::ClusteringResult| {
            r.trace
                .iter()
                .map(|x| x.objective.to_bits())
                .collect::<Vec<_>>()
        };
        check(
            a.labels == b.labels
                && a.centers.as_bytes() == b.centers.as_bytes()
                && objs(&a) == objs(&b),
            format!("trial {trial} differs between 1 and 8 threads"),
        )?;
    }
    Ok("20/20 trials byte-identical across 1 and 8 threads".into())
}

fn c10_round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = seed::rng(10);
    let cases = 1000;
    for case in 0..cases {
        let n = rng.random_range(1..20);
        let d = rng.random_range(1..10);
        // Arbitrary bit patterns, excluding NaN which has no equality.
        let vals: Vec<f32> = (0..n * d)
            .map(|_| loop {
                let v = f32::from_bits(rng.random());
                if !v.is_nan() {
                    break v;
                }
            })
            .collect();
        let ds = Dataset::new(d, vals).unwrap();
        let p = dir.path().join("x.fvecs");
        write_fvecs(&p, &ds).unwrap();
        let back = read_fvecs(&p).unwrap();
        let bits = |x: &Dataset| x.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        check(
            bits(&back) == bits(&ds) && back.dim() == d,
            format!("fvecs case {case}"),
        )?;

        let bytes: Vec<f32> = (0..n * d)
            .map(|_| rng.random_range(0..=255u8) as f32)
            .collect();
        let ds = Dataset::new(d, bytes).unwrap();
        let p = dir.path().join("x.bvecs");
        write_bvecs(&p, &ds).unwrap();
        check(read_bvecs(&p).unwrap() == ds, format!("bvecs case {case}"))?;

        let m = rng.random_range(1..9);
        let l = rng.random_range(1..=256);
        let codes = random_codes(rng.random_range(0..50), m, l, &mut rng);
        let p = dir.path().join("x.pqkc");
        write_codes(&p, &codes).unwrap();
        check(
            read_codes(&p).unwrap() == codes,
            format!("PQKC case {case}"),
        )?;

        let bits_len = [8usize, 16, 32, 64, 128][rng.random_range(0..5)];
        let mut bcodes = BinaryCodes::new(bits_len).unwrap();
        for _ in 0..rng.random_range(0..30) {
            let bytes: Vec<u8> = (0..bits_len / 8).map(|_| rng.random()).collect();
            bcodes.push_bytes(&bytes).unwrap();
        }
        let p = dir.path().join("x.pqkb");
        write_binary_codes(&p, &bcodes).unwrap();
        check(
            read_binary_codes(&p).unwrap() == bcodes,
            format!("PQKB case {case}"),
        )?;
    }
    Ok(format!("{cases} cases each for fvecs, bvecs, PQKC, PQKB"))
}

fn c11_binary_optimality() -> Outcome {
    let mut rng = seed::rng(11);
    let cases = 1000;
    for case in 0..cases {
        let bits = rng.random_range(1..=12);
        let mask = (1u64 << bits) - 1;
        let n = rng.random_range(1..60);
        let mut codes = BinaryCodes::new(bits).unwrap();
        let members: Vec<u64> = (0..n).map(|_| rng.random::<u64>() & mask).collect();
        for &v in &members {
            codes.push(&[v]).unwrap();
        }
        let center = majority_center(&codes).unwrap()[0];
        let cost = |x: u64| members.iter().map(|&v| (v ^ x).count_ones()).sum::<u32>();
        let best = (0..=mask).map(cost).min().unwrap();
        check(
            cost(center) <= best,
            format!("case {case}: majority {} > exhaustive {best}", cost(center)),
        )?;
    }
    Ok(format!("{cases} clusters, majority never beaten"))
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    report(name, outcome, start)
}

fn report(name: &str, outcome: Outcome, start: Instant) -> bool {
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(msg) => {
            println!("PASS  {name}: {msg} [{secs:.1}s]");
            true
        }
        Err(msg) => {
            println!("FAIL  {name}: {msg} [{secs:.1}s]");
            false
        }
    }
}

type Criterion = fn() -> Outcome;

fn main() {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let wanted = |id: &str| filter.is_empty() || filter.iter().any(|f| id.contains(f.as_str()));
    let mut ok = true;
    let criteria: [(&str, Criterion); 9] = [
        ("c01 sparse voting exactness", c1_sparse_voting_exact),
        ("c02 sparse voting speedup", c2_sparse_voting_speedup),
        ("c03 objective monotonicity", c3_objective_monotone),
        ("c04 assignment optimality", c4_assignment_oracle),
        ("c05 symmetric distance fidelity", c5_sdc_fidelity),
        ("c06 memory arithmetic", c6_memory_arithmetic),
        ("c08 recovery sanity", c8_recovery),
        ("c09 thread determinism", c9_determinism),
        ("c10 format round-trips", c10_round_trips),
    ];
    for (name, f) in criteria {
        if wanted(name) {
            ok &= run(name, f);
        }
    }
    if wanted("c11 binary majority optimality") {
        ok &= run("c11 binary majority optimality", c11_binary_optimality);
    }
    if wanted("c07 directional accuracy") || wanted("c12 convergence") {
        let start = Instant::now();
        match panic::catch_unwind(c7_and_c12) {
            Ok((c7, c12)) => {
                ok &= report("c07 directional accuracy vs binary k-means", c7, start);
                ok &= report("c12 convergence within 20 iterations", c12, start);
            }
            Err(_) => {
                ok &= report("c07/c12", Err("panicked".into()), start);
            }
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
