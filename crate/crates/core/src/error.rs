use thiserror::Error;

use crate::chains::ChainError;
use crate::contfrac::ContFracError;
use crate::io::InputError;
use crate::resonance::ResonanceError;
use crate::sequences::SeriesError;
use crate::significand::SignificandError;
use crate::spectral::SpectralError;

/// Union of the module errors, for pipeline-level entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Significand(#[from] SignificandError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Resonance(#[from] ResonanceError),
    #[error(transparent)]
    ContFrac(#[from] ContFracError),
    #[error(transparent)]
    Input(#[from] InputError),
}

impl Error {
    /// True when the error means the chain is outside the irreducible,
    /// aperiodic class the analysis is defined for.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            Error::Chain(ChainError::NotIrreducible { .. })
                | Error::Chain(ChainError::NotAperiodic { .. })
                | Error::Series(SeriesError::Chain(ChainError::NotIrreducible { .. }))
                | Error::Series(SeriesError::Chain(ChainError::NotAperiodic { .. }))
                | Error::Resonance(ResonanceError::Chain(ChainError::NotIrreducible { .. }))
                | Error::Resonance(ResonanceError::Chain(ChainError::NotAperiodic { .. }))
        )
    }
}
