//! Eigenvalues, rank-one spectral projectors, and a polynomial detector for
//! repeated roots of the characteristic polynomial.

use nalgebra::{DMatrix, Schur};
use num_traits::{FromPrimitive, Num};
use serde::Serialize;
use thiserror::Error;

use crate::chains::StochasticMatrix;
use crate::Complex;

/// Minimum gap between eigenvalues for them to count as simple.
pub const SIMPLE_GAP: f64 = 1e-8;
/// Moduli closer than this are ordered by argument instead.
pub const MODULUS_TIE: f64 = 1e-12;
/// Relative backward-error bound per eigenpair.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Largest degree supported by [`multiple_root_indicator`].
pub const MAX_INDICATOR_DEGREE: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,
    #[error("eigenpair {index} has backward error {residual:e}")]
    ResidualTooLarge { index: usize, residual: f64 },
    #[error("eigenvalue {index} is not simple (gap {gap:e})")]
    MultipleEigenvalue { index: usize, gap: f64 },
    #[error("indicator implemented for degree 2..={MAX_INDICATOR_DEGREE}, got {0}")]
    UnsupportedDegree(usize),
}

/// Eigenvalues in the canonical order: modulus descending, then argument
/// descending among equal moduli.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenStructure {
    pub eigenvalues: Vec<Complex>,
    pub simple: Vec<bool>,
    /// Smallest singular value of `P − λI`.
    pub residuals: Vec<f64>,
}

impl EigenStructure {
    pub fn all_simple(&self) -> bool {
        self.simple.iter().all(|&s| s)
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Index of the eigenvalue equal to `conj(λ_ℓ)`, if it is a different entry.
    pub fn conjugate_partner(&self, l: usize) -> Option<usize> {
        let target = self.eigenvalues[l].conj();
        if self.eigenvalues[l].im == 0.0 {
            return None;
        }
        self.eigenvalues.iter().position(|&z| z == target)
    }

    /// Minimum distance from `λ_ℓ` to any other eigenvalue.
    pub fn gap(&self, l: usize) -> f64 {
        min_gap(&self.eigenvalues, l)
    }
}

fn min_gap(ev: &[Complex], l: usize) -> f64 {
    ev.iter()
        .enumerate()
        .filter(|&(m, _)| m != l)
        .map(|(_, z)| (z - ev[l]).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Sorts by modulus descending; runs of moduli within [`MODULUS_TIE`] are
/// ordered by argument in `(−π, π]` descending.
pub fn sort_eigenvalues(ev: &mut [Complex]) {
    for z in ev.iter_mut() {
        if z.im == 0.0 {
            z.im = 0.0;
        }
    }
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let mut start = 0;
    while start < ev.len() {
        let mut end = start + 1;
        while end < ev.len() && (ev[end - 1].norm() - ev[end].norm()).abs() <= MODULUS_TIE {
            end += 1;
        }
        ev[start..end].sort_by(|a, b| b.arg().total_cmp(&a.arg()));
        start = end;
    }
}

// Replaces each numerically conjugate pair by an exact conjugate pair.
fn symmetrize_conjugates(ev: &mut [Complex]) {
    let n = ev.len();
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] || ev[i].im == 0.0 {
            continue;
        }
        let target = ev[i].conj();
        let partner = (0..n)
            .filter(|&j| j != i && !done[j] && ev[j].im * ev[i].im < 0.0)
            .min_by(|&a, &b| (ev[a] - target).norm().total_cmp(&(ev[b] - target).norm()));
        if let Some(j) = partner {
            let re = 0.5 * (ev[i].re + ev[j].re);
            let im = 0.5 * (ev[i].im.abs() + ev[j].im.abs());
            let (pi, pj) = if ev[i].im > 0.0 { (im, -im) } else { (-im, im) };
            ev[i] = Complex::new(re, pi);
            ev[j] = Complex::new(re, pj);
            done[j] = true;
        }
        done[i] = true;
    }
}

fn complexify(a: &DMatrix<f64>) -> DMatrix<Complex> {
    a.map(|x| Complex::new(x, 0.0))
}

fn shifted(p: &DMatrix<f64>, lambda: Complex) -> DMatrix<Complex> {
    let d = p.nrows();
    let mut a = complexify(p);
    for k in 0..d {
        a[(k, k)] -= lambda;
    }
    a
}

fn min_singular_value(a: DMatrix<Complex>) -> f64 {
    a.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn eigen_decompose(p: &StochasticMatrix) -> Result<EigenStructure, SpectralError> {
    eigen_decompose_matrix(&p.to_dmatrix())
}

/// Eigen-decomposition of an arbitrary real square matrix.
pub fn eigen_decompose_matrix(m: &DMatrix<f64>) -> Result<EigenStructure, SpectralError> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or(SpectralError::ConvergenceFailure)?;
    let mut ev: Vec<Complex> = schur.complex_eigenvalues().iter().copied().collect();
    symmetrize_conjugates(&mut ev);
    sort_eigenvalues(&mut ev);

    let norm = m.abs().row_sum().iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut residuals = Vec::with_capacity(ev.len());
    for (index, &lambda) in ev.iter().enumerate() {
        let residual = min_singular_value(shifted(m, lambda));
        if residual > RESIDUAL_TOL * norm {
            return Err(SpectralError::ResidualTooLarge { index, residual });
        }
        residuals.push(residual);
    }
    let simple = (0..ev.len()).map(|l| min_gap(&ev, l) > SIMPLE_GAP).collect();
    Ok(EigenStructure {
        eigenvalues: ev,
        simple,
        residuals,
    })
}

/// Eigenvalues together with their projectors `B_ℓ = v uᵀ / (uᵀ v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigen: EigenStructure,
    pub projectors: Vec<DMatrix<Complex>>,
}

/// Largest violations of the decomposition identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionErrors {
    /// `‖Σ B_ℓ − I‖_max`
    pub resolution: f64,
    /// `max ‖B_ℓ B_m − δ_ℓm B_ℓ‖_max`
    pub orthogonality: f64,
    /// `‖Σ λ_ℓ B_ℓ − P‖_max`
    pub reconstruction: f64,
}

impl DecompositionErrors {
    pub fn max(&self) -> f64 {
        self.resolution.max(self.orthogonality).max(self.reconstruction)
    }
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigen.len()
    }

    /// `B_ℓ^(i,j)` with `ℓ` zero-based.
    pub fn coefficient(&self, l: usize, i: usize, j: usize) -> Complex {
        self.projectors[l][(i, j)]
    }

    /// `Σ_{ℓ≥2} λ_ℓⁿ B_ℓ`, the direct evaluation of `Pⁿ − P*`.
    pub fn power_minus_limit(&self, n: u64) -> DMatrix<Complex> {
        let d = self.dim();
        let mut out = DMatrix::<Complex>::zeros(d, d);
        for l in 1..d {
            out += &self.projectors[l] * self.eigen.eigenvalues[l].powu(n as u32);
        }
        out
    }

    pub fn errors(&self, p: &DMatrix<f64>) -> DecompositionErrors {
        let d = self.dim();
        let max_abs = |m: &DMatrix<Complex>| m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut sum = DMatrix::<Complex>::zeros(d, d);
        let mut recon = DMatrix::<Complex>::zeros(d, d);
        for (b, &lambda) in self.projectors.iter().zip(&self.eigen.eigenvalues) {
            sum += b;
            recon += b * lambda;
        }
        let resolution = max_abs(&(sum - DMatrix::<Complex>::identity(d, d)));
        let reconstruction = max_abs(&(recon - complexify(p)));
        let mut orthogonality: f64 = 0.0;
        for (l, bl) in self.projectors.iter().enumerate() {
            for (m, bm) in self.projectors.iter().enumerate() {
                let mut prod = bl * bm;
                if l == m {
                    prod -= bl;
                }
                orthogonality = orthogonality.max(max_abs(&prod));
            }
        }
        DecompositionErrors {
            resolution,
            orthogonality,
            reconstruction,
        }
    }
}

pub fn spectral_projectors(
    p: &StochasticMatrix,
    eig: &EigenStructure,
) -> Result<SpectralDecomposition, SpectralError> {
    projectors_of_matrix(&p.to_dmatrix(), eig)
}

pub fn spectral_decomposition(p: &StochasticMatrix) -> Result<SpectralDecomposition, SpectralError> {
    let eig = eigen_decompose(p)?;
    spectral_projectors(p, &eig)
}

pub fn projectors_of_matrix(
    m: &DMatrix<f64>,
    eig: &EigenStructure,
) -> Result<SpectralDecomposition, SpectralError> {
    if let Some(index) = eig.simple.iter().position(|&s| !s) {
        return Err(SpectralError::MultipleEigenvalue {
            index,
            gap: eig.gap(index),
        });
    }
    let d = eig.len();
    let mut projectors: Vec<Option<DMatrix<Complex>>> = vec![None; d];
    for l in 0..d {
        if projectors[l].is_some() {
            continue;
        }
        let lambda = eig.eigenvalues[l];
        let b = if lambda.im == 0.0 {
            real_projector(m, lambda.re)
        } else {
            complex_projector(m, lambda)
        }
        .ok_or(SpectralError::MultipleEigenvalue {
            index: l,
            gap: eig.gap(l),
        })?;
        if let Some(c) = eig.conjugate_partner(l) {
            projectors[c] = Some(b.map(|z| z.conj()));
        }
        projectors[l] = Some(b);
    }
    Ok(SpectralDecomposition {
        eigen: eig.clone(),
        projectors: projectors.into_iter().map(Option::unwrap).collect(),
    })
}

// Right singular vector for the smallest singular value of `a`.
fn null_vector_real(a: DMatrix<f64>) -> nalgebra::DVector<f64> {
    let svd = a.svd(false, true);
    let k = argmin(svd.singular_values.as_slice());
    svd.v_t.expect("requested").row(k).transpose()
}

fn null_vector_complex(a: DMatrix<Complex>) -> nalgebra::DVector<Complex> {
    let svd = a.svd(false, true);
    let k = argmin(svd.singular_values.as_slice());
    svd.v_t.expect("requested").row(k).adjoint()
}

fn argmin(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0)
}

const BIORTHO_FLOOR: f64 = 1e-14;

fn real_projector(m: &DMatrix<f64>, lambda: f64) -> Option<DMatrix<Complex>> {
    let d = m.nrows();
    let a = m - DMatrix::<f64>::identity(d, d) * lambda;
    let v = null_vector_real(a.clone());
    let u = null_vector_real(a.transpose());
    let s = u.dot(&v);
    if s.abs() < BIORTHO_FLOOR {
        return None;
    }
    Some(complexify(&(&v * u.transpose() / s)))
}

fn complex_projector(m: &DMatrix<f64>, lambda: Complex) -> Option<DMatrix<Complex>> {
    let a = shifted(m, lambda);
    let v = null_vector_complex(a.clone());
    let u = null_vector_complex(a.transpose());
    // Plain transpose: the left eigenvector satisfies uᵀ P = λ uᵀ.
    let s: Complex = u.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
    if s.norm() < BIORTHO_FLOOR {
        return None;
    }
    Some(&v * u.transpose() / s)
}

/// Non-leading coefficients `a₁..a_d` of `det(zI − M) = z^d + a₁ z^{d−1} + … + a_d`
/// (Faddeev–LeVerrier).
pub fn characteristic_coefficients(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut coeffs = Vec::with_capacity(d);
    let mut mk = DMatrix::<f64>::zeros(d, d);
    let mut c_prev = 1.0;
    for k in 1..=d {
        mk = m * &mk + DMatrix::<f64>::identity(d, d) * c_prev;
        let c = -(m * &mk).trace() / k as f64;
        coeffs.push(c);
        c_prev = c;
    }
    coeffs
}

/// Total degree of the indicator polynomial for degree-`d` input.
pub fn indicator_degree(d: usize) -> Option<u32> {
    match d {
        2..=MAX_INDICATOR_DEGREE => Some((1u32 << d) - 2),
        _ => None,
    }
}

/// Evaluates the common-root polynomial `Q_m(a, b)` for monic `p_a` of degree
/// `m = a.len()` and `p_b` of degree `m − 1`; vanishes when they share a root.
///
/// Works over any field so the tests can evaluate it in exact arithmetic.
pub fn common_root_indicator<T: Num + Clone>(a: &[T], b: &[T]) -> T {
    let m = a.len();
    assert!(m >= 2 && b.len() == m - 1, "shape mismatch");
    if m == 2 {
        return a[0].clone() * b[0].clone() - a[1].clone() - b[0].clone() * b[0].clone();
    }
    // Remainder of p_a after division by p_b is ρ z^{m−2} + (lower terms).
    let e = a[0].clone() - b[0].clone();
    let rho = a[1].clone() - b[1].clone() - e.clone() * b[0].clone();
    let mut c = Vec::with_capacity(m - 2);
    for j in 2..m - 1 {
        c.push(a[j].clone() - b[j].clone() - e.clone() * b[j - 1].clone());
    }
    c.push(a[m - 1].clone() - e * b[m - 2].clone());
    let inner_deg = (1usize << (m - 1)) - 2;
    let scaled = if rho.is_zero() {
        return T::zero();
    } else {
        c.into_iter().map(|x| x / rho.clone()).collect::<Vec<_>>()
    };
    num_traits::pow(rho, 1 + inner_deg) * common_root_indicator(b, &scaled)
}

/// `Q_d*(a)`: zero exactly when `z^d + a₁z^{d−1} + … + a_d` has a repeated root.
pub fn multiple_root_indicator(a: &[Complex]) -> Result<Complex, SpectralError> {
    multiple_root_indicator_generic(a)
}

pub fn multiple_root_indicator_generic<T: Num + Clone + FromPrimitive>(
    a: &[T],
) -> Result<T, SpectralError> {
    let d = a.len();
    if !(2..=MAX_INDICATOR_DEGREE).contains(&d) {
        return Err(SpectralError::UnsupportedDegree(d));
    }
    let int = |k: usize| T::from_usize(k).expect("small integers are representable");
    let dd = int(d);
    let b: Vec<T> = (1..d)
        .map(|k| int(d - k) * a[k - 1].clone() / dd.clone())
        .collect();
    Ok(common_root_indicator(a, &b))
}
