use thiserror::Error;

/// One Newton iterate, kept for non-convergence diagnostics.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
    pub step: f64,
}

#[derive(Debug, Error)]
pub enum CrrrError {
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("threshold saturated: every positive-weight indicator is {}", if *.all_ones { 1 } else { 0 })]
    SaturatedThreshold { all_ones: bool },

    #[error("Newton iterations did not converge after {} steps (last gradient norm {:.3e})", .trace.len(), .trace.last().map_or(f64::NAN, |r| r.gradient_norm))]
    NonConvergence { trace: Vec<IterationRecord> },

    #[error("threshold {index} (r = {point}): {source}")]
    AtThreshold {
        index: usize,
        point: f64,
        #[source]
        source: Box<CrrrError>,
    },

    #[error("insufficient tail data: {0}")]
    TailData(String),

    #[error("tail fit failed: {0}")]
    TailFit(String),

    #[error("input mismatch: {0}")]
    InputMismatch(String),

    #[error("group {label:?} has {size} observations, fewer than the required {min}")]
    GroupTooSmall { label: String, size: usize, min: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bootstrap draws are degenerate: {0}")]
    DegenerateDraws(String),

    #[error("{failed} of {total} bootstrap replicates failed (limit 2%); first failure: {first}")]
    BootstrapFailure {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("argument outside domain: {0}")]
    Domain(String),
}

impl CrrrError {
    /// Strips threshold context to reach the underlying failure.
    pub fn root(&self) -> &CrrrError {
        match self {
            CrrrError::AtThreshold { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_convergence(&self) -> bool {
        matches!(self.root(), CrrrError::NonConvergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, CrrrError>;
