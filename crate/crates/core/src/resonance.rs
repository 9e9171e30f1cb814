//! Nonresonance of a spectrum, decided up to explicit search bounds.
//!
//! The dominated eigenvalues in the closed upper half plane are grouped by
//! modulus. A class is resonant if it holds two real eigenvalues, or if
//! `{1, log₁₀ L₀} ∪ {arg λ / 2π}` satisfies a small integer relation. Only
//! maximal classes are checked; [`verdict_all_subsets`] checks every subset
//! and is used in tests to confirm the two agree.

use serde::Serialize;
use thiserror::Error;

use crate::chains::{classify, ChainError, StochasticMatrix};
use crate::spectral::{eigen_decompose, EigenStructure, SpectralError};
use crate::Complex;

/// Eigenvalues with imaginary part at least this are in the upper half plane.
pub const UPPER_HALF_TOL: f64 = -1e-12;
/// Eigenvalues closer than this are the same element of the spectrum.
pub const DISTINCT_TOL: f64 = 1e-8;
/// Moduli closer than this belong to one class.
pub const MODULUS_TOL: f64 = 1e-9;
/// A member with `|Im λ|` at most this counts as real.
pub const REAL_TOL: f64 = 1e-9;
/// Reduced arguments within this of 0 or 1/2 are dropped; within this of a
/// small rational they are replaced by it.
pub const ARG_SNAP_TOL: f64 = 1e-12;
/// Eigenvalues below this modulus make `P` singular.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-12;
/// Largest vector length for [`integer_relation`].
pub const MAX_RELATION_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResonanceError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("integer relation search supports 2..={MAX_RELATION_DIM} values, got {0}")]
    DimensionTooLarge(usize),
    #[error("relation search over {0} half-vectors exceeds the memory budget")]
    SearchTooLarge(u64),
}

/// Bounds `(Qmax, ε)` for rationality and relation searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchBounds {
    pub qmax: i64,
    pub eps: f64,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            qmax: 100,
            eps: 1e-10,
        }
    }
}

/// Eigenvalues of one modulus in the closed upper half plane, excluding 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusClass {
    pub l0: f64,
    pub members: Vec<Complex>,
    /// `arg λ / 2π` of the members, with 0 and 1/2 removed.
    pub reduced_args: Vec<f64>,
}

impl ModulusClass {
    pub fn real_members(&self) -> Vec<Complex> {
        self.members.iter().copied().filter(|z| z.im.abs() <= REAL_TOL).collect()
    }

    /// `{1, log₁₀ L₀} ∪ reduced_args`, with arguments snapped to nearby
    /// rationals of denominator at most `qmax`.
    pub fn relation_values(&self, qmax: i64) -> Vec<f64> {
        let mut xs = vec![1.0, self.l0.log10()];
        xs.extend(self.reduced_args.iter().map(|&a| snap_rational(a, qmax)));
        xs
    }
}

fn snap_rational(x: f64, qmax: i64) -> f64 {
    match detect_rational(x, qmax, ARG_SNAP_TOL) {
        Some((p, q)) => p as f64 / q as f64,
        None => x,
    }
}

/// Groups `σ(P)⁺ \ {λ₁}` by modulus, largest modulus first.
pub fn modulus_classes(eig: &EigenStructure, tol: f64) -> Vec<ModulusClass> {
    let mut distinct: Vec<Complex> = Vec::new();
    for &z in eig.eigenvalues.iter().skip(1) {
        if z.im < UPPER_HALF_TOL {
            continue;
        }
        if distinct.iter().all(|w| (w - z).norm() > DISTINCT_TOL) {
            distinct.push(z);
        }
    }
    distinct.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let mut classes: Vec<Vec<Complex>> = Vec::new();
    for z in distinct {
        match classes.last_mut() {
            Some(c) if (c[c.len() - 1].norm() - z.norm()).abs() <= tol => c.push(z),
            _ => classes.push(vec![z]),
        }
    }
    classes
        .into_iter()
        .map(|members| {
            let l0 = members.iter().map(|z| z.norm()).sum::<f64>() / members.len() as f64;
            let reduced_args = members
                .iter()
                .filter_map(|z| {
                    // Nearly real members have argument 0 or 1/2 exactly.
                    if z.im.abs() <= ARG_SNAP_TOL {
                        return None;
                    }
                    let a = z.im.atan2(z.re) / std::f64::consts::TAU;
                    if a.abs() <= ARG_SNAP_TOL || (a - 0.5).abs() <= ARG_SNAP_TOL {
                        None
                    } else {
                        Some(a)
                    }
                })
                .collect();
            ModulusClass {
                l0,
                members,
                reduced_args,
            }
        })
        .collect()
}

/// First continued-fraction convergent `p/q` of `x` with `q ≤ qmax` and
/// `|x − p/q| ≤ eps`.
pub fn detect_rational(x: f64, qmax: i64, eps: f64) -> Option<(i64, i64)> {
    if !x.is_finite() || qmax < 1 {
        return None;
    }
    let (mut p_prev, mut q_prev) = (1i128, 0i128);
    let a0 = x.floor();
    let (mut p, mut q) = (a0 as i128, 1i128);
    let mut r = x - a0;
    loop {
        if q > qmax as i128 {
            return None;
        }
        if (x - p as f64 / q as f64).abs() <= eps {
            return Some((p as i64, q as i64));
        }
        if r <= 0.0 {
            return None;
        }
        let inv = 1.0 / r;
        let a = inv.floor();
        if a > 1e15 {
            return None;
        }
        r = inv - a;
        let a = a as i128;
        let (pn, qn) = (a * p + p_prev, a * q + q_prev);
        p_prev = p;
        q_prev = q;
        p = pn;
        q = qn;
    }
}

// Mixed-radix decoding of a half-vector in [−Q, Q]^len.
fn decode(mut idx: u64, len: usize, q: i64, out: &mut [i64]) {
    let base = (2 * q + 1) as u64;
    for slot in out.iter_mut().take(len) {
        *slot = (idx % base) as i64 - q;
        idx /= base;
    }
}

const MAX_HALF_VECTORS: u64 = 1 << 27;

/// Exhaustive search for integers `|q_j| ≤ qmax`, not all zero, with
/// `|Σ q_j x_j| ≤ eps`. Returns the relation smallest in (max |q_j|, Σ|q_j|,
/// lexicographic order), signed so its first nonzero entry is negative.
pub fn integer_relation(xs: &[f64], qmax: i64, eps: f64) -> Result<Option<Vec<i64>>, ResonanceError> {
    let k = xs.len();
    if !(2..=MAX_RELATION_DIM).contains(&k) {
        return Err(ResonanceError::DimensionTooLarge(k));
    }
    let ka = k.div_ceil(2);
    let kb = k - ka;
    let base = (2 * qmax + 1) as u64;
    let na = base.pow(ka as u32);
    let nb = base.pow(kb as u32);
    if na > MAX_HALF_VECTORS {
        return Err(ResonanceError::SearchTooLarge(na));
    }

    let mut coeffs = vec![0i64; k];
    let mut side_b: Vec<(f64, u32)> = Vec::with_capacity(nb as usize);
    for idx in 0..nb {
        decode(idx, kb, qmax, &mut coeffs[ka..]);
        let s: f64 = coeffs[ka..].iter().zip(&xs[ka..]).map(|(&c, &x)| c as f64 * x).sum();
        side_b.push((s, idx as u32));
    }
    side_b.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let key = |v: &[i64]| {
        let max = v.iter().map(|c| c.abs()).max().unwrap_or(0);
        let l1: i64 = v.iter().map(|c| c.abs()).sum();
        (max, l1, v.to_vec())
    };
    let mut best: Option<(i64, i64, Vec<i64>)> = None;
    let mut full = vec![0i64; k];
    for ia in 0..na {
        decode(ia, ka, qmax, &mut full[..ka]);
        let sa: f64 = full[..ka].iter().zip(&xs[..ka]).map(|(&c, &x)| c as f64 * x).sum();
        // Slack covers the rounding in the two partial sums.
        let slack = eps + 1e-14 * (sa.abs() + 1.0);
        let lo = side_b.partition_point(|&(s, _)| s < -sa - slack);
        for &(_, ib) in side_b[lo..].iter().take_while(|&&(s, _)| s <= -sa + slack) {
            decode(u64::from(ib), kb, qmax, &mut full[ka..]);
            if full.iter().all(|&c| c == 0) {
                continue;
            }
            if relation_residual(xs, &full) > eps {
                continue;
            }
            let mut v = full.clone();
            if let Some(&first) = v.iter().find(|&&c| c != 0) {
                if first > 0 {
                    v.iter_mut().for_each(|c| *c = -*c);
                }
            }
            let kv = key(&v);
            if best.as_ref().is_none_or(|b| kv < *b) {
                best = Some(kv);
            }
        }
    }
    Ok(best.map(|(_, _, v)| v))
}

/// `|Σ q_j x_j|` with compensated accumulation.
pub fn relation_residual(xs: &[f64], q: &[i64]) -> f64 {
    let mut s = crate::numerics::CompensatedSum::default();
    for (&c, &x) in q.iter().zip(xs) {
        let p = c as f64 * x;
        s.add(p);
        s.add((c as f64).mul_add(x, -p));
    }
    let (hi, lo) = s.hi_lo();
    (hi + lo).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceStatus {
    Nonresonant,
    Resonant,
    Undecided,
}

/// Evidence backing a [`ResonanceVerdict`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// Two real eigenvalues of equal modulus.
    RealPair { class_index: usize, members: Vec<Complex> },
    /// `log₁₀ L₀ = p/q` up to `error`.
    RationalLog {
        class_index: usize,
        l0: f64,
        log_l0: f64,
        p: i64,
        q: i64,
        error: f64,
    },
    /// `Σ coefficients_j · values_j ≈ 0`.
    IntegerRelation {
        class_index: usize,
        values: Vec<f64>,
        coefficients: Vec<i64>,
        residual: f64,
    },
    /// `P` is singular.
    ZeroEigenvalue { index: usize, modulus: f64 },
    /// No witness within the bounds.
    SearchExhausted { qmax: i64, eps: f64 },
    /// A class was too large for the relation search.
    TooManyArguments { class_index: usize, values: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceVerdict {
    pub status: ResonanceStatus,
    pub certificate: Certificate,
    pub bounds: SearchBounds,
    pub classes: Vec<ModulusClass>,
    pub notes: Vec<String>,
}

impl ResonanceVerdict {
    pub fn is_nonresonant(&self) -> bool {
        self.status == ResonanceStatus::Nonresonant
    }

    /// Recomputes the witness from `eig` and checks it still holds.
    pub fn verify(&self, eig: &EigenStructure) -> bool {
        let classes = modulus_classes(eig, MODULUS_TOL);
        match &self.certificate {
            Certificate::RealPair { class_index, members } => {
                members.len() >= 2
                    && members.iter().all(|z| z.im.abs() <= REAL_TOL)
                    && members.windows(2).all(|w| (w[0].norm() - w[1].norm()).abs() <= MODULUS_TOL)
                    && classes.get(*class_index).is_some_and(|c| c.real_members().len() >= 2)
            }
            Certificate::RationalLog { class_index, p, q, .. } => classes
                .get(*class_index)
                .is_some_and(|c| (c.l0.log10() - *p as f64 / *q as f64).abs() <= self.bounds.eps),
            Certificate::IntegerRelation {
                class_index,
                coefficients,
                ..
            } => classes.get(*class_index).is_some_and(|c| {
                let xs = c.relation_values(self.bounds.qmax);
                xs.len() == coefficients.len() && relation_residual(&xs, coefficients) <= self.bounds.eps
            }),
            Certificate::ZeroEigenvalue { index, .. } => eig
                .eigenvalues
                .get(*index)
                .is_some_and(|z| z.norm() <= ZERO_EIGENVALUE_TOL),
            Certificate::SearchExhausted { .. } | Certificate::TooManyArguments { .. } => {
                self.status != ResonanceStatus::Resonant
            }
        }
    }
}

/// Full decision for a chain with a unique aperiodic recurrent class.
pub fn nonresonance_verdict(p: &StochasticMatrix, bounds: SearchBounds) -> Result<ResonanceVerdict, ResonanceError> {
    classify(p).require_ergodic()?;
    let eig = eigen_decompose(p)?;
    verdict_from_eigen(&eig, bounds)
}

/// Decision from precomputed eigenvalues.
pub fn verdict_from_eigen(eig: &EigenStructure, bounds: SearchBounds) -> Result<ResonanceVerdict, ResonanceError> {
    let classes = modulus_classes(eig, MODULUS_TOL);
    let mut notes = Vec::new();
    for w in classes.windows(2) {
        let gap = w[0].l0 - w[1].l0;
        if gap <= 10.0 * MODULUS_TOL {
            notes.push(format!(
                "moduli {:.17e} and {:.17e} differ by {gap:.3e}, within 10x the grouping tolerance",
                w[0].l0, w[1].l0
            ));
        }
    }
    let resonant = |certificate, classes: Vec<ModulusClass>, notes| ResonanceVerdict {
        status: ResonanceStatus::Resonant,
        certificate,
        bounds,
        classes,
        notes,
    };

    let mut too_large: Option<Certificate> = None;
    for (ci, class) in classes.iter().enumerate() {
        if class.l0 <= ZERO_EIGENVALUE_TOL {
            continue;
        }
        let reals = class.real_members();
        if reals.len() >= 2 {
            let cert = Certificate::RealPair {
                class_index: ci,
                members: reals,
            };
            return Ok(resonant(cert, classes, notes));
        }
        let log_l0 = class.l0.log10();
        if let Some((p, q)) = detect_rational(log_l0, bounds.qmax, bounds.eps) {
            let cert = Certificate::RationalLog {
                class_index: ci,
                l0: class.l0,
                log_l0,
                p,
                q,
                error: (log_l0 - p as f64 / q as f64).abs(),
            };
            return Ok(resonant(cert, classes, notes));
        }
        let xs = class.relation_values(bounds.qmax);
        if xs.len() > MAX_RELATION_DIM {
            too_large.get_or_insert(Certificate::TooManyArguments {
                class_index: ci,
                values: xs.len(),
            });
            continue;
        }
        if let Some(q) = integer_relation(&xs, bounds.qmax, bounds.eps)? {
            let cert = Certificate::IntegerRelation {
                class_index: ci,
                residual: relation_residual(&xs, &q),
                values: xs,
                coefficients: q,
            };
            return Ok(resonant(cert, classes, notes));
        }
    }
    if let Some(index) = eig.eigenvalues.iter().position(|z| z.norm() <= ZERO_EIGENVALUE_TOL) {
        let cert = Certificate::ZeroEigenvalue {
            index,
            modulus: eig.eigenvalues[index].norm(),
        };
        return Ok(resonant(cert, classes, notes));
    }
    if let Some(cert) = too_large {
        return Ok(ResonanceVerdict {
            status: ResonanceStatus::Undecided,
            certificate: cert,
            bounds,
            classes,
            notes,
        });
    }
    Ok(ResonanceVerdict {
        status: ResonanceStatus::Nonresonant,
        certificate: Certificate::SearchExhausted {
            qmax: bounds.qmax,
            eps: bounds.eps,
        },
        bounds,
        classes,
        notes,
    })
}

/// Checks the resonance conditions on every nonempty equal-modulus subset of
/// `σ(P)⁺ \ {1}` rather than on maximal classes only. Returns `None` when a
/// subset is too large to search; supports at most 5 states.
pub fn verdict_all_subsets(eig: &EigenStructure, bounds: SearchBounds) -> Option<bool> {
    assert!(eig.len() <= 5, "subset check is limited to 5 states");
    if eig.eigenvalues.iter().any(|z| z.norm() <= ZERO_EIGENVALUE_TOL) {
        return Some(true);
    }
    let pool: Vec<Complex> = modulus_classes(eig, MODULUS_TOL)
        .into_iter()
        .flat_map(|c| c.members)
        .collect();
    let n = pool.len();
    for mask in 1u32..(1 << n) {
        let subset: Vec<Complex> = (0..n).filter(|&k| mask >> k & 1 == 1).map(|k| pool[k]).collect();
        let l0 = subset[0].norm();
        if subset.iter().any(|z| (z.norm() - l0).abs() > MODULUS_TOL) {
            continue;
        }
        if subset.iter().filter(|z| z.im.abs() <= REAL_TOL).count() >= 2 {
            return Some(true);
        }
        let mut xs = vec![1.0, l0.log10()];
        for z in &subset {
            if z.im.abs() <= ARG_SNAP_TOL {
                continue;
            }
            let a = z.im.atan2(z.re) / std::f64::consts::TAU;
            if a.abs() > ARG_SNAP_TOL && (a - 0.5).abs() > ARG_SNAP_TOL {
                xs.push(snap_rational(a, bounds.qmax));
            }
        }
        if xs.len() > MAX_RELATION_DIM {
            return None;
        }
        if integer_relation(&xs, bounds.qmax, bounds.eps).ok()?.is_some() {
            return Some(true);
        }
    }
    Some(false)
}
