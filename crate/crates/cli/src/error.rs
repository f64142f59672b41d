use reasonconf_core::PipelineError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("input: {0}")]
    Input(String),
    #[error("gateway: {0}")]
    Gateway(String),
    #[error("invariant: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Gateway(_) => 4,
            CliError::Invariant(_) => 5,
        }
    }

    /// Wraps a pipeline error, prefixing `context` (usually a file name).
    pub fn pipeline(context: &str, e: PipelineError) -> Self {
        match e {
            PipelineError::Malformed { .. } | PipelineError::Question(_) => {
                CliError::Input(format!("{context}: {e}"))
            }
            PipelineError::Gateway { .. } => CliError::Gateway(e.to_string()),
            PipelineError::Invariant { .. } => CliError::Invariant(e.to_string()),
        }
    }
}
