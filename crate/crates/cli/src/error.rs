use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {source}")]
    Core {
        stage: &'static str,
        #[source]
        source: psi_spectral::Error,
    },

    #[error("{0}")]
    Input(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for malformed input, 3 for violated preconditions, 4 for numerical
    /// failure, 1 for I/O.
    pub fn exit_code(&self) -> u8 {
        use psi_spectral::Error as E;
        match self {
            CliError::Input(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core { source, .. } => match source {
                E::Parse { .. } | E::Invalid(_) | E::InvalidOperator(_) => 2,
                E::LevelMismatch { .. }
                | E::Truncation { .. }
                | E::BandViolation { .. }
                | E::Domain(_) => 3,
                E::Solver(_) | E::Alignment(_) => 4,
            },
        }
    }
}

/// Attaches a pipeline stage to core errors.
pub(crate) trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> Stage<T> for psi_spectral::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { stage, source })
    }
}
