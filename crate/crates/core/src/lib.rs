//! Significant-digit behaviour of finite-state Markov chains.
//!
//! A row-stochastic matrix `P` that is irreducible and aperiodic converges to
//! a limiting matrix `P*`. This crate studies the first significant digits of
//! the components of `Pⁿ − P*` and `Pⁿ⁺¹ − Pⁿ`:
//!
//! * [`chains`] validates matrices, classifies the transition graph and
//!   computes the stationary distribution, plus an extended-precision
//!   matrix-power oracle.
//! * [`spectral`] computes eigenvalues and rank-one spectral projectors.
//! * [`resonance`] decides the nonresonance condition on the spectrum at a
//!   stated search bound and returns a checkable certificate.
//! * [`sequences`] evaluates `log₁₀|xₙ|` for every component without
//!   underflow, for `n` up to a million, and assigns per-component verdicts.
//! * [`significand`] holds digit primitives, Benford probabilities and
//!   goodness-of-fit statistics.
//! * [`contfrac`] expands reals into certified continued fractions.
//! * [`randomchain`] samples uniformly random chains for Monte Carlo runs.
//! * [`report`] builds the versioned JSON report and the CSV tables.

pub mod chains;
pub mod contfrac;
pub mod error;
pub mod extprec;
pub mod io;
mod numerics;
pub mod randomchain;
pub mod report;
pub mod resonance;
pub mod sequences;
pub mod significand;
pub mod spectral;

pub use chains::{ChainClassification, StationaryDistribution, StochasticMatrix};
pub use contfrac::{ContinuedFraction, Convergent};
pub use error::Error;
pub use resonance::{ResonanceStatus, ResonanceVerdict, SearchBounds};
pub use sequences::{ComponentVerdict, LogSignificandSeries, SeriesKind};
pub use significand::{BenfordGofResult, DigitFrequencyTable, LogValue};
pub use spectral::{EigenStructure, SpectralDecomposition};

/// Complex scalar used throughout the spectral code.
pub type Complex = num_complex::Complex64;
