use crate::harness::HarnessError;
use crate::network::NetworkError;
use crate::scoring::ScoringError;
use crate::spec::SpecError;
use crate::verifier::VerifyError;

/// Crate-level error, one variant per subsystem.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}
