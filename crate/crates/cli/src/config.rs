use crate::error::{CliError, Result};
use crate::ingest::ColumnRoles;
use crrr::bootstrap::{BootstrapConfig, WeightScheme};
use crrr::dr::GridSpec;
use crrr::pipeline::PipelineConfig;
use crrr::{Link, Method};
use serde::Serialize;
use std::path::PathBuf;

pub const DEFAULT_TAIL_M: usize = 30;
pub const DEFAULT_BOOTSTRAP_REPS: usize = 500;
pub const DEFAULT_TRANSITION_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapOptions {
    pub scheme: WeightScheme,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: Option<u64>,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            scheme: WeightScheme::default(),
            replicates: DEFAULT_BOOTSTRAP_REPS,
            alpha: 0.05,
            seed: None,
        }
    }
}

/// Settings for one `estimate`-style run; echoed verbatim in the output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub columns: ColumnRoles,
    pub link: Link,
    pub grid: GridSpec,
    pub tails: bool,
    pub tail_m: usize,
    pub methods: Vec<Method>,
    pub y_covariates: Option<Vec<String>>,
    pub w_covariates: Option<Vec<String>>,
    /// `None` skips the bootstrap.
    pub bootstrap: Option<BootstrapOptions>,
    pub subgroups: bool,
    /// Bins per side of the transition matrices; `None` skips them.
    pub transition_bins: Option<usize>,
}

impl RunConfig {
    pub fn new(input: PathBuf, columns: ColumnRoles) -> Self {
        RunConfig {
            input,
            columns,
            link: Link::Logistic,
            grid: GridSpec::default(),
            tails: false,
            tail_m: DEFAULT_TAIL_M,
            methods: Method::DEFAULT.to_vec(),
            y_covariates: None,
            w_covariates: None,
            bootstrap: None,
            subgroups: false,
            transition_bins: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cols = &self.columns;
        if cols.y == cols.w {
            return Err(CliError::Config(format!("y and w are both column {:?}", cols.y)));
        }
        for name in &cols.covariates {
            if *name == cols.y || *name == cols.w {
                return Err(CliError::Config(format!("{name:?} is both an outcome and a covariate")));
            }
        }
        for set in [&self.y_covariates, &self.w_covariates].into_iter().flatten() {
            if let Some(name) = set.iter().find(|n| !cols.covariates.contains(n)) {
                return Err(CliError::Config(format!(
                    "{name:?} is not among the declared covariates"
                )));
            }
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("no methods requested".into()));
        }
        if self.subgroups && cols.group.is_none() {
            return Err(CliError::Config("subgroup estimates need a group column".into()));
        }
        if let GridSpec::Quantiles {
            n_points,
            lo_order,
            hi_order,
        } = self.grid
        {
            if n_points < 2 || !(0.0 < lo_order && lo_order < hi_order && hi_order < 1.0) {
                return Err(CliError::Config(format!(
                    "grid needs at least 2 points and 0 < lo < hi < 1, got {n_points} points on [{lo_order}, {hi_order}]"
                )));
            }
        }
        if let Some(k) = self.transition_bins {
            if k < 2 {
                return Err(CliError::Config(format!("transition matrices need at least 2 bins, got {k}")));
            }
        }
        if let Some(b) = &self.bootstrap {
            b.resolve()?;
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            grid: self.grid,
            link: self.link,
            tail_m: self.tails.then_some(self.tail_m),
            y_covariates: self.y_covariates.clone(),
            w_covariates: self.w_covariates.clone(),
        }
    }

    /// Whether the run needs DR fits.
    pub fn conditional(&self) -> bool {
        self.methods.iter().any(|m| m.is_conditional()) || self.transition_bins.is_some()
    }
}

impl BootstrapOptions {
    pub fn resolve(&self) -> Result<BootstrapConfig> {
        let seed = self
            .seed
            .ok_or_else(|| CliError::Config("the bootstrap needs an explicit --seed".into()))?;
        if self.replicates == 0 {
            return Err(CliError::Config("bootstrap replicates must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(BootstrapConfig {
            scheme: self.scheme,
            replicates: self.replicates,
            alpha: self.alpha,
            seed,
        })
    }
}
