//! `log₁₀|xₙ|` for the components of `Pⁿ − P*` and `Pⁿ⁺¹ − Pⁿ`, computed
//! without underflow, plus the classic sequences `2ⁿ`, `n!` and `Fₙ`.
//!
//! With a simple spectrum every component is `Σ_{ℓ≥2} c_ℓ λ_ℓⁿ`. Factoring
//! out `Lⁿ`, where `L` is the modulus of the first eigenvalue with a nonzero
//! coefficient, leaves a bounded sum `ξₙ` whose terms are evaluated from
//! their logarithms, so nothing is ever raised to a power that underflows.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chains::{classify, ChainError, StochasticMatrix};
use crate::extprec::{ExtFloat, ExtMatrix};
use crate::numerics::{split_sum, CompensatedSum, DoubleDouble};
use crate::resonance::{detect_rational, ResonanceStatus, ResonanceVerdict, MODULUS_TOL};
use crate::significand::{DigitFrequencyTable, LogValue};
use crate::spectral::{eigen_decompose, projectors_of_matrix, SpectralDecomposition, SpectralError};
use crate::Complex;

/// Coefficients and `|ξₙ|` at or below this are exact zeros.
pub const ZERO_THRESHOLD: f64 = 1e-12;
/// Largest `N` for the spectral path.
pub const MAX_N: u64 = 1_000_000;
/// Largest `N` for the extended-precision path.
pub const MAX_FALLBACK_N: u64 = 20_000;
/// Terms scaled below `10^-320` relative to the dominant one are dropped.
pub const DROP_EXPONENT: f64 = -320.0;
/// Upper limit on the working precision of the extended-precision path.
pub const MAX_FALLBACK_BITS: usize = 1 << 21;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("component ({i},{j}) outside a {d}-state chain")]
    IndexOutOfRange { i: usize, j: usize, d: usize },
    #[error("N = {n} exceeds the limit {max}")]
    NTooLarge { n: u64, max: u64 },
    #[error("extended-precision path would need {bits} bits")]
    PrecisionBudgetExceeded { bits: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// `(Pⁿ − P*)^(i,j)`
    PnMinusPstar,
    /// `(Pⁿ⁺¹ − Pⁿ)^(i,j)`
    SuccessiveDiff,
}

impl SeriesKind {
    pub const BOTH: [SeriesKind; 2] = [SeriesKind::PnMinusPstar, SeriesKind::SuccessiveDiff];

    pub fn as_str(self) -> &'static str {
        match self {
            SeriesKind::PnMinusPstar => "pn_minus_pstar",
            SeriesKind::SuccessiveDiff => "successive_diff",
        }
    }
}

/// One term; `log10_abs` is `None` exactly when the term is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesEntry {
    pub n: u64,
    pub log10_abs: Option<LogValue>,
}

impl SeriesEntry {
    pub fn is_zero(&self) -> bool {
        self.log10_abs.is_none()
    }

    /// Leading digit, 0 for a zero term.
    pub fn first_digit(&self) -> u8 {
        self.log10_abs.map_or(0, |l| l.first_digit())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogSignificandSeries {
    /// Zero-based `(i, j)`.
    pub component: (usize, usize),
    pub kind: SeriesKind,
    pub entries: Vec<SeriesEntry>,
}

impl LogSignificandSeries {
    /// Leading-digit counts over all `N` terms; zero terms are not counted,
    /// so `total` can be below `N`.
    pub fn digit_table(&self) -> DigitFrequencyTable {
        DigitFrequencyTable::from_digits(self.entries.iter().map(SeriesEntry::first_digit))
    }

    /// Counts relative to the series length, zero terms included in the denominator.
    pub fn digit_frequencies(&self) -> [f64; 9] {
        let t = self.digit_table();
        let n = self.entries.len().max(1) as f64;
        t.counts.map(|c| c as f64 / n)
    }

    pub fn mantissas(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.log10_abs.map(|l| l.mantissa()))
            .collect()
    }

    pub fn zero_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_zero()).count()
    }
}

fn check_component(d: usize, i: usize, j: usize) -> Result<(), SeriesError> {
    if i >= d || j >= d {
        return Err(SeriesError::IndexOutOfRange { i, j, d });
    }
    Ok(())
}

/// `c_ℓ` for `ℓ ≥ 2` (zero-based `1..d`); sub-threshold values become 0.
pub fn component_coefficients(dec: &SpectralDecomposition, i: usize, j: usize, kind: SeriesKind) -> Vec<Complex> {
    (1..dec.dim())
        .map(|l| {
            let b = dec.coefficient(l, i, j);
            let c = match kind {
                SeriesKind::PnMinusPstar => b,
                SeriesKind::SuccessiveDiff => b * (dec.eigen.eigenvalues[l] - 1.0),
            };
            if c.norm() > ZERO_THRESHOLD {
                c
            } else {
                Complex::new(0.0, 0.0)
            }
        })
        .collect()
}

struct Term {
    abs_c: f64,
    arg_c: f64,
    /// `log₁₀(|λ|/L)`, zero within the dominant modulus.
    log_ratio: f64,
    /// `arg λ / 2π` as a double-double.
    turn: DoubleDouble,
}

/// The spectral-path series for one component, `n = 1..=n_max`.
pub fn component_log_series(
    dec: &SpectralDecomposition,
    i: usize,
    j: usize,
    kind: SeriesKind,
    n_max: u64,
) -> Result<LogSignificandSeries, SeriesError> {
    check_component(dec.dim(), i, j)?;
    if n_max > MAX_N {
        return Err(SeriesError::NTooLarge { n: n_max, max: MAX_N });
    }
    let coeffs = component_coefficients(dec, i, j, kind);
    let eigen = &dec.eigen.eigenvalues[1..];
    let dominant = coeffs.iter().position(|c| c.norm() > 0.0);
    let entries = match dominant {
        None => (1..=n_max).map(|n| SeriesEntry { n, log10_abs: None }).collect(),
        Some(s) => {
            let l_mod = eigen[s].norm();
            let log_l = DoubleDouble::from_f64(l_mod.log10());
            let terms: Vec<Term> = coeffs
                .iter()
                .zip(eigen)
                .filter(|(c, _)| c.norm() > 0.0)
                .map(|(c, lam)| Term {
                    abs_c: c.norm(),
                    arg_c: c.arg(),
                    log_ratio: if (lam.norm() - l_mod).abs() == 0.0 {
                        0.0
                    } else {
                        lam.norm().log10() - l_mod.log10()
                    },
                    turn: DoubleDouble::from_f64(lam.im.atan2(lam.re) / TAU),
                })
                .collect();
            (1..=n_max)
                .map(|n| {
                    let xi = xi(&terms, n);
                    let log10_abs = if xi.abs() <= ZERO_THRESHOLD {
                        None
                    } else {
                        let (k, f) = log_l.split_scaled(n);
                        Some(LogValue::from_parts(k, f + xi.abs().log10()))
                    };
                    SeriesEntry { n, log10_abs }
                })
                .collect()
        }
    };
    Ok(LogSignificandSeries {
        component: (i, j),
        kind,
        entries,
    })
}

// ξₙ = Re Σ |c| · 10^{n·log_ratio} · exp(i(arg c + 2π·frac(n·turn))).
fn xi(terms: &[Term], n: u64) -> f64 {
    let mut sum = CompensatedSum::default();
    for t in terms {
        let e = n as f64 * t.log_ratio;
        if e < DROP_EXPONENT {
            continue;
        }
        let (_, f) = t.turn.split_scaled(n);
        let mag = t.abs_c * 10f64.powf(e);
        sum.add(mag * (t.arg_c + TAU * f).cos());
    }
    let (hi, lo) = sum.hi_lo();
    hi + lo
}

/// Working precision for [`fallback_log_series`] at length `n_max`.
pub fn fallback_precision_bits(p: &StochasticMatrix, n_max: u64) -> Result<usize, SeriesError> {
    let eig = eigen_decompose(p)?;
    let min_log2 = eig
        .eigenvalues
        .iter()
        .map(|z| z.norm())
        .filter(|&r| r > crate::resonance::ZERO_EIGENVALUE_TOL)
        .map(|r| r.log2().abs())
        .fold(0.0, f64::max);
    // Power of the largest transient Jordan block adds at most log2(n)·d bits.
    let d = p.dim() as f64;
    let bits = (n_max as f64 * min_log2 + d * (n_max.max(2) as f64).log2()).ceil() as usize + 192;
    if bits > MAX_FALLBACK_BITS {
        return Err(SeriesError::PrecisionBudgetExceeded { bits });
    }
    Ok(bits.max(128))
}

/// `P*` by repeated squaring of `P` in extended precision.
pub fn limit_by_squaring(p: &ExtMatrix) -> ExtMatrix {
    let target = -(p.precision() as i64) + 16;
    let mut cur = p.clone();
    for _ in 0..128 {
        let next = cur.mul(&cur);
        let diff = next.max_diff_exponent(&cur);
        cur = next;
        if diff.is_none_or(|e| e < target) {
            break;
        }
    }
    cur
}

/// The same series as [`component_log_series`], from `Pⁿ` in extended
/// precision. Works for defective spectra; `N ≤ 2·10⁴`.
pub fn fallback_log_series(
    p: &StochasticMatrix,
    i: usize,
    j: usize,
    kind: SeriesKind,
    n_max: u64,
) -> Result<LogSignificandSeries, SeriesError> {
    Ok(fallback_all_components(p, &[(i, j)], kind, n_max)?.remove(0))
}

/// Several components from one extended-precision power sequence.
pub fn fallback_all_components(
    p: &StochasticMatrix,
    components: &[(usize, usize)],
    kind: SeriesKind,
    n_max: u64,
) -> Result<Vec<LogSignificandSeries>, SeriesError> {
    let d = p.dim();
    for &(i, j) in components {
        check_component(d, i, j)?;
    }
    if n_max > MAX_FALLBACK_N {
        return Err(SeriesError::NTooLarge {
            n: n_max,
            max: MAX_FALLBACK_N,
        });
    }
    classify(p).require_ergodic()?;
    let bits = fallback_precision_bits(p, n_max)?;
    let pm = ExtMatrix::from_stochastic(p, bits);
    let pstar = limit_by_squaring(&pm);
    // Anything within this of zero is rounding noise from the power sequence.
    let noise_exp = -(bits as i64) + 96;

    let mut out: Vec<LogSignificandSeries> = components
        .iter()
        .map(|&c| LogSignificandSeries {
            component: c,
            kind,
            entries: Vec::with_capacity(n_max as usize),
        })
        .collect();
    let mut pn = pm.clone();
    for n in 1..=n_max {
        let next = pn.mul(&pm);
        for (series, &(i, j)) in out.iter_mut().zip(components) {
            let x = match kind {
                SeriesKind::PnMinusPstar => pn.get(i, j).sub(pstar.get(i, j)),
                SeriesKind::SuccessiveDiff => next.get(i, j).sub(pn.get(i, j)),
            };
            let log10_abs = match x.exponent() {
                Some(e) if e > noise_exp => x.log10_abs(),
                _ => None,
            };
            series.entries.push(SeriesEntry { n, log10_abs });
        }
        pn = next;
    }
    Ok(out)
}

/// Series for one component, choosing the spectral path when the spectrum is
/// simple and the extended-precision path otherwise.
pub fn series_for_matrix(
    p: &StochasticMatrix,
    i: usize,
    j: usize,
    kind: SeriesKind,
    n_max: u64,
) -> Result<LogSignificandSeries, SeriesError> {
    Ok(all_component_series(p, kind, n_max)?.remove(i * p.dim() + j))
}

/// All `d²` components, row-major.
pub fn all_component_series(
    p: &StochasticMatrix,
    kind: SeriesKind,
    n_max: u64,
) -> Result<Vec<LogSignificandSeries>, SeriesError> {
    classify(p).require_ergodic()?;
    let d = p.dim();
    let eig = eigen_decompose(p)?;
    let comps: Vec<(usize, usize)> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).collect();
    match projectors_of_matrix(&p.to_dmatrix(), &eig) {
        Ok(dec) => comps
            .par_iter()
            .map(|&(i, j)| component_log_series(&dec, i, j, kind, n_max))
            .collect(),
        Err(SpectralError::MultipleEigenvalue { .. }) => fallback_all_components(p, &comps, kind, n_max),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentVerdict {
    BenfordPredicted,
    EventuallyZero,
    NonBenfordRationalLog,
    NonBenfordResonant,
    Undetermined,
}

/// Classifies one component from its spectral coefficients.
pub fn component_verdict(
    dec: &SpectralDecomposition,
    resonance: &ResonanceVerdict,
    i: usize,
    j: usize,
    kind: SeriesKind,
) -> ComponentVerdict {
    let coeffs = component_coefficients(dec, i, j, kind);
    let eigen = &dec.eigen.eigenvalues[1..];
    let Some(s) = coeffs.iter().position(|c| c.norm() > 0.0) else {
        return ComponentVerdict::EventuallyZero;
    };
    if resonance.status == ResonanceStatus::Nonresonant {
        return ComponentVerdict::BenfordPredicted;
    }
    let bounds = resonance.bounds;
    let l_mod = eigen[s].norm();
    let group: Vec<usize> = (0..coeffs.len())
        .filter(|&l| coeffs[l].norm() > 0.0 && (eigen[l].norm() - l_mod).abs() <= MODULUS_TOL)
        .collect();
    let support = coeffs.iter().filter(|c| c.norm() > 0.0).count();

    if support == group.len() {
        if let Some(period) = common_period(group.iter().map(|&l| eigen[l]), bounds.qmax) {
            let vanishes = (0..period).any(|r| {
                let g: f64 = group
                    .iter()
                    .map(|&l| (coeffs[l] * Complex::from_polar(1.0, eigen[l].arg() * r as f64)).re)
                    .sum();
                g.abs() <= ZERO_THRESHOLD
            });
            if vanishes {
                return ComponentVerdict::NonBenfordResonant;
            }
        }
    }
    if detect_rational(l_mod.log10(), bounds.qmax, bounds.eps).is_some() {
        return ComponentVerdict::NonBenfordRationalLog;
    }
    if group.len() == 1 && eigen[group[0]].im.abs() <= crate::resonance::REAL_TOL {
        return ComponentVerdict::BenfordPredicted;
    }
    ComponentVerdict::Undetermined
}

// Least common multiple of the denominators of arg λ / 2π when all are rational.
fn common_period(eigen: impl Iterator<Item = Complex>, qmax: i64) -> Option<u64> {
    let mut period: u64 = 1;
    for z in eigen {
        let turn = z.im.atan2(z.re) / TAU;
        let (_, q) = detect_rational(turn, qmax, 1e-12)?;
        period = num_integer::lcm(period, q as u64);
    }
    Some(period)
}

/// Per-component verdicts for one kind, row-major.
pub fn all_component_verdicts(
    dec: &SpectralDecomposition,
    resonance: &ResonanceVerdict,
    kind: SeriesKind,
) -> Vec<ComponentVerdict> {
    let d = dec.dim();
    (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| component_verdict(dec, resonance, i, j, kind))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicSequence {
    Pow2,
    Factorial,
    Fibonacci,
}

impl ClassicSequence {
    pub const ALL: [ClassicSequence; 3] = [ClassicSequence::Pow2, ClassicSequence::Factorial, ClassicSequence::Fibonacci];

    pub fn name(self) -> &'static str {
        match self {
            ClassicSequence::Pow2 => "pow2",
            ClassicSequence::Factorial => "factorial",
            ClassicSequence::Fibonacci => "fibonacci",
        }
    }
}

struct ClassicConstants {
    log10_2: DoubleDouble,
    log10_phi: DoubleDouble,
    log10_sqrt5: DoubleDouble,
}

fn classic_constants() -> &'static ClassicConstants {
    static C: OnceLock<ClassicConstants> = OnceLock::new();
    C.get_or_init(|| {
        let prec = 192;
        let dd = |x: ExtFloat| {
            let hi = x.to_f64();
            let lo = x.sub(&ExtFloat::from_f64(hi, prec)).to_f64();
            DoubleDouble::new(hi, lo)
        };
        let int = |k| ExtFloat::from_i64(k, prec);
        let sqrt5 = int(5).sqrt();
        let phi = int(1).add(&sqrt5).div(&int(2));
        ClassicConstants {
            log10_2: dd(int(2).log10()),
            log10_phi: dd(phi.log10()),
            log10_sqrt5: dd(sqrt5.log10()),
        }
    })
}

/// `log₁₀` of the first `N` terms (`n = 1..=N`).
pub fn classic_sequence_logs(kind: ClassicSequence, n_max: u64) -> Result<Vec<LogValue>, SeriesError> {
    if n_max > MAX_N {
        return Err(SeriesError::NTooLarge { n: n_max, max: MAX_N });
    }
    let c = classic_constants();
    let out = match kind {
        ClassicSequence::Pow2 => (1..=n_max)
            .map(|n| {
                let (k, f) = c.log10_2.split_scaled(n);
                LogValue::from_parts(k, f)
            })
            .collect(),
        ClassicSequence::Factorial => {
            let mut acc = CompensatedSum::default();
            (1..=n_max)
                .map(|n| {
                    acc.add((n as f64).log10());
                    let (hi, lo) = acc.hi_lo();
                    let (k, f) = split_sum(hi, lo);
                    LogValue::from_parts(k, f)
                })
                .collect()
        }
        ClassicSequence::Fibonacci => {
            let (mut a, mut b) = (0u64, 1u64);
            (1..=n_max)
                .map(|n| {
                    if n <= 90 {
                        // a = F_{n−1}, b = F_n after the swap.
                        if n > 1 {
                            let t = a + b;
                            a = b;
                            b = t;
                        }
                        LogValue::from_log10((b as f64).log10())
                    } else {
                        let (k, f) = c.log10_phi.split_scaled(n);
                        LogValue::from_parts(k, f - c.log10_sqrt5.hi - c.log10_sqrt5.lo)
                    }
                })
                .collect()
        }
    };
    Ok(out)
}

pub fn classic_digit_table(kind: ClassicSequence, n_max: u64) -> Result<DigitFrequencyTable, SeriesError> {
    Ok(DigitFrequencyTable::from_digits(
        classic_sequence_logs(kind, n_max)?.iter().map(LogValue::first_digit),
    ))
}
