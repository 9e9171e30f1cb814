//! Random stochastic matrices with independent uniform rows, and the Monte
//! Carlo experiment on how often such chains are nonresonant and pass a
//! first-digit fit.
//!
//! Sample `k` of a run with seed `s` draws from ChaCha8 seeded with
//! `seed_from_u64(s)` on stream `k`. Records therefore do not depend on how
//! the samples are split across threads or runs.

use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chains::{classify, StochasticMatrix};
use crate::resonance::{verdict_from_eigen, Certificate, ResonanceStatus, SearchBounds};
use crate::sequences::{all_component_series, SeriesKind};
use crate::significand::{chi_squared, CHI2_CRIT_01};
use crate::spectral::eigen_decompose;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "BENFORD_CHAIN_THREADS";

/// Generator for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A point uniform on the probability simplex in `d` coordinates.
pub fn sample_simplex_row<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    assert!(d >= 2, "simplex needs at least 2 coordinates");
    loop {
        let e: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = e.iter().sum();
        if s > 0.0 {
            return e.into_iter().map(|x: f64| x / s).collect();
        }
    }
}

/// `d` independent uniform rows.
pub fn sample_chain<R: Rng + ?Sized>(d: usize, rng: &mut R) -> StochasticMatrix {
    let rows: Vec<Vec<f64>> = (0..d).map(|_| sample_simplex_row(d, rng)).collect();
    StochasticMatrix::new(&rows).expect("normalized exponential rows are stochastic")
}

/// `(1/40)[[X+4, X, 36−2X], [Y, Y+4, 36−2Y], [Z+2, Z+2, 36−2Z]]` with
/// `X, Y, Z` uniform on `[0, 1]`; it always has eigenvalue 0.1.
pub fn counterexample_chain<R: Rng + ?Sized>(rng: &mut R) -> StochasticMatrix {
    let x: f64 = rng.gen();
    let y: f64 = rng.gen();
    let z: f64 = rng.gen();
    let rows = vec![
        vec![(x + 4.0) / 40.0, x / 40.0, (36.0 - 2.0 * x) / 40.0],
        vec![y / 40.0, (y + 4.0) / 40.0, (36.0 - 2.0 * y) / 40.0],
        vec![(z + 2.0) / 40.0, (z + 2.0) / 40.0, (36.0 - 2.0 * z) / 40.0],
    ];
    StochasticMatrix::new(&rows).expect("entries are a probability vector")
}

/// A trajectory of `len` states (zero-based), started from state 0.
pub fn sample_path(p: &StochasticMatrix, len: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = p.dim();
    let mut state = 0usize;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(state);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = d - 1;
        for j in 0..d {
            acc += p.get(state, j);
            if u < acc {
                next = j;
                break;
            }
        }
        state = next;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub index: u64,
    /// `None` when the analysis failed; see `error`.
    pub status: Option<ResonanceStatus>,
    /// χ² per component, row-major.
    pub chi_squared: Vec<f64>,
    /// Every component at or below the α = 0.01 critical value.
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSampleReport {
    pub d: usize,
    pub count: u64,
    pub seed: u64,
    pub n: u64,
    pub bounds: SearchBounds,
    pub samples: Vec<SampleRecord>,
    pub fraction_nonresonant: f64,
    pub fraction_all_pass: f64,
    /// Among nonresonant samples; NaN serializes as null when there are none.
    pub fraction_all_pass_given_nonresonant: f64,
}

impl ChainSampleReport {
    pub fn from_samples(d: usize, seed: u64, n: u64, bounds: SearchBounds, samples: Vec<SampleRecord>) -> Self {
        let count = samples.len() as u64;
        let frac = |k: usize, of: usize| if of == 0 { f64::NAN } else { k as f64 / of as f64 };
        let nonres: Vec<&SampleRecord> = samples
            .iter()
            .filter(|s| s.status == Some(ResonanceStatus::Nonresonant))
            .collect();
        Self {
            d,
            count,
            seed,
            n,
            bounds,
            fraction_nonresonant: frac(nonres.len(), samples.len()),
            fraction_all_pass: frac(samples.iter().filter(|s| s.passed).count(), samples.len()),
            fraction_all_pass_given_nonresonant: frac(nonres.iter().filter(|s| s.passed).count(), nonres.len()),
            samples,
        }
    }
}

/// Analyzes one sampled chain.
pub fn analyze_sample(index: u64, p: &StochasticMatrix, n: u64, bounds: SearchBounds) -> SampleRecord {
    let fail = |e: String| SampleRecord {
        index,
        status: None,
        chi_squared: Vec::new(),
        passed: false,
        error: Some(e),
    };
    if let Err(e) = classify(p).require_ergodic() {
        return fail(e.to_string());
    }
    let status = match eigen_decompose(p).map_err(|e| e.to_string()).and_then(|eig| {
        verdict_from_eigen(&eig, bounds).map_err(|e| e.to_string())
    }) {
        Ok(v) => v.status,
        Err(e) => return fail(e),
    };
    let series = match all_component_series(p, SeriesKind::PnMinusPstar, n) {
        Ok(s) => s,
        Err(e) => {
            let mut r = fail(e.to_string());
            r.status = Some(status);
            return r;
        }
    };
    let chi: Vec<f64> = series
        .iter()
        .map(|s| chi_squared(&s.digit_table()).unwrap_or(f64::INFINITY))
        .collect();
    SampleRecord {
        index,
        status: Some(status),
        passed: chi.iter().all(|&c| c <= CHI2_CRIT_01),
        chi_squared: chi,
        error: None,
    }
}

/// Records for sample indices in `range`, in index order.
pub fn run_samples(d: usize, range: Range<u64>, n: u64, seed: u64, bounds: SearchBounds) -> Vec<SampleRecord> {
    with_thread_cap(|| {
        range
            .into_par_iter()
            .map(|k| {
                let p = sample_chain(d, &mut sample_rng(seed, k));
                analyze_sample(k, &p, n, bounds)
            })
            .collect()
    })
}

pub fn random_chain_experiment(d: usize, count: u64, n: u64, seed: u64, bounds: SearchBounds) -> ChainSampleReport {
    let samples = run_samples(d, 0..count, n, seed, bounds);
    ChainSampleReport::from_samples(d, seed, n, bounds, samples)
}

/// Per-sample resonance certificates for the fixed counterexample family.
pub fn counterexample_certificates(count: u64, seed: u64, bounds: SearchBounds) -> Vec<Option<Certificate>> {
    with_thread_cap(|| {
        (0..count)
            .into_par_iter()
            .map(|k| {
                let p = counterexample_chain(&mut sample_rng(seed, k));
                eigen_decompose(&p)
                    .ok()
                    .and_then(|eig| verdict_from_eigen(&eig, bounds).ok())
                    .map(|v| v.certificate)
            })
            .collect()
    })
}

/// Runs `f` on a pool limited by [`THREADS_ENV`] when it is set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k > 0);
    match cap.and_then(|k| rayon::ThreadPoolBuilder::new().num_threads(k).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::spectral::eigen_decompose;

    #[test]
    fn rows_are_probability_vectors() {
        let mut rng = sample_rng(1, 0);
        for d in 2..=6 {
            for _ in 0..200 {
                let r = sample_simplex_row(d, &mut rng);
                assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
                assert!(r.iter().all(|&x| x > 0.0));
            }
        }
    }

    #[test]
    fn dirichlet_moments() {
        let d = 3;
        let n = 100_000;
        let mut rng = sample_rng(7, 0);
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        for _ in 0..n {
            let r = sample_simplex_row(d, &mut rng);
            for k in 0..d {
                sum[k] += r[k];
                sq[k] += r[k] * r[k];
            }
        }
        let df = d as f64;
        let var = (df - 1.0) / (df * df * (df + 1.0));
        // Fourth central moment of a Beta(1, d−1) coordinate, for the variance test.
        let (a, b) = (1.0, df - 1.0);
        let mu4 = 3.0 * a * b * (a * b * (a + b - 2.0) + 2.0 * (a + b).powi(2))
            / ((a + b).powi(4) * (a + b + 1.0) * (a + b + 2.0) * (a + b + 3.0));
        for k in 0..d {
            let mean = sum[k] / n as f64;
            assert!((mean - 1.0 / df).abs() <= 3.0 * (var / n as f64).sqrt());
            let v = sq[k] / n as f64 - mean * mean;
            assert!((v - var).abs() <= 3.0 * ((mu4 - var * var) / n as f64).sqrt());
        }
    }

    #[test]
    fn sampled_chains_are_generic() {
        let mut simple = 0;
        for k in 0..1000 {
            let p = sample_chain(3, &mut sample_rng(3, k));
            let c = classify(&p);
            assert!(c.irreducible && c.period == 1);
            let det = p.to_dmatrix().determinant();
            assert!(det.abs() > 1e-12);
            if eigen_decompose(&p).unwrap().all_simple() {
                simple += 1;
            }
        }
        assert!(simple >= 999);
    }

    #[test]
    fn two_state_logs_are_never_rational() {
        let bounds = SearchBounds::default();
        for k in 0..1000 {
            let p = sample_chain(2, &mut sample_rng(11, k));
            let z = 1.0 - p.get(0, 1) - p.get(1, 0);
            assert!(crate::resonance::detect_rational(z.abs().log10(), bounds.qmax, bounds.eps).is_none());
        }
    }

    #[test]
    fn counterexample_has_eigenvalue_one_tenth() {
        for k in 0..200 {
            let p = counterexample_chain(&mut sample_rng(5, k));
            let eig = eigen_decompose(&p).unwrap();
            assert!(eig.eigenvalues.iter().any(|z| (z - crate::Complex::new(0.1, 0.0)).norm() < 1e-12));
        }
    }

    #[test]
    fn splitting_is_invariant() {
        let b = SearchBounds::default();
        let whole = run_samples(3, 0..12, 200, 9, b);
        let mut parts = run_samples(3, 0..5, 200, 9, b);
        parts.extend(run_samples(3, 5..12, 200, 9, b));
        assert_eq!(whole, parts);
        assert_eq!(random_chain_experiment(3, 12, 200, 9, b).samples, whole);
    }

    #[test]
    fn aggregates_recompute() {
        let r = random_chain_experiment(3, 20, 500, 4, SearchBounds::default());
        let nonres = r.samples.iter().filter(|s| s.status == Some(ResonanceStatus::Nonresonant)).count();
        assert_eq!(r.fraction_nonresonant, nonres as f64 / 20.0);
        let again = ChainSampleReport::from_samples(3, 4, 500, SearchBounds::default(), r.samples.clone());
        assert_eq!(again, r);
    }

    #[test]
    fn path_follows_transition_probabilities() {
        let p = StochasticMatrix::new(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let path = sample_path(&p, 100_000, 1);
        let from0 = path.windows(2).filter(|w| w[0] == 0).count() as f64;
        let to1 = path.windows(2).filter(|w| w[0] == 0 && w[1] == 1).count() as f64;
        assert!((to1 / from0 - 0.3).abs() < 0.01);
    }

    #[test]
    fn stream_vectors_are_stable() {
        let x: f64 = sample_rng(42, 0).gen();
        assert_eq!(format!("{x:.17e}"), "6.81896192306671423e-1");
        let p = sample_chain(3, &mut sample_rng(42, 0));
        assert_eq!(format!("{:.17e}", p.get(0, 0)), "2.89885184093212456e-1");
        assert_eq!(format!("{:.17e}", p.get(2, 2)), "7.20839208804426534e-1");
        let q = sample_chain(3, &mut sample_rng(42, 1));
        assert_eq!(format!("{:.17e}", q.get(0, 0)), "5.41782694309014268e-1");
    }
}
