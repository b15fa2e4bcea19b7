use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Core(#[from] wmse_core::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("QPSK needs an even number of bits, got {0}")]
    OddBitCount(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SimError {
    pub fn is_config(&self) -> bool {
        matches!(self, SimError::Config(_) | SimError::ConfigSyntax { .. })
    }
}
