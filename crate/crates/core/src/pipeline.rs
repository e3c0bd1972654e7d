//! End-to-end rank computation: grids → DR fits (with optional tails) →
//! marginal and conditional ranks. The same pipeline object refits under
//! bootstrap weights, reusing the grids and tail pivots chosen on the
//! original sample.

use crate::data::{Dataset, Design, Variable};
use crate::dr::{fit_dr, fit_tail, fit_tail_at_pivot, DrFit, GridSpec, TailSide, ThresholdGrid};
use crate::error::{CrrrError, Result};
use crate::estimators::EstimatorInputs;
use crate::link::Link;
use crate::ranks::{conditional_ranks, weighted_marginal_ranks};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub grid: GridSpec,
    pub link: Link,
    /// Minimum tail cell size; `None` disables the restricted tails.
    pub tail_m: Option<usize>,
    /// Covariates for the DR model of Y; `None` means all of them.
    pub y_covariates: Option<Vec<String>>,
    /// Covariates for the DR model of W; `None` means all of them.
    pub w_covariates: Option<Vec<String>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            grid: GridSpec::default(),
            link: Link::Logistic,
            tail_m: None,
            y_covariates: None,
            w_covariates: None,
        }
    }
}

/// Tail pivots chosen on the original sample for one variable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TailPivots {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone)]
struct VariableModel {
    variable: Variable,
    data: Dataset,
    grid: ThresholdGrid,
    pivots: TailPivots,
}

/// Result of the unweighted run.
#[derive(Debug, Clone)]
pub struct PointFit {
    pub inputs: EstimatorInputs,
    pub fit_y: Option<DrFit>,
    pub fit_w: Option<DrFit>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    n: usize,
    data: Dataset,
    models: Option<[VariableModel; 2]>,
    covariates: Design,
}

impl Pipeline {
    /// Runs the pipeline on the original sample. Conditional ranks (and
    /// therefore DR fits) are only produced when `conditional` is set.
    pub fn fit(data: &Dataset, config: &PipelineConfig, conditional: bool) -> Result<(Pipeline, PointFit)> {
        let n = data.len();
        let covariates = data
            .design()
            .select_columns(&(1..data.dx()).collect::<Vec<_>>());
        let mut pipeline = Pipeline {
            config: config.clone(),
            n,
            data: data.clone(),
            models: None,
            covariates,
        };
        let mut warnings = Vec::new();
        let ones = vec![1.0; n];
        let (fit_y, fit_w) = if conditional {
            let mut models = [
                pipeline.model(data, Variable::Y, config.y_covariates.as_deref())?,
                pipeline.model(data, Variable::W, config.w_covariates.as_deref())?,
            ];
            let mut fits = Vec::with_capacity(2);
            for model in models.iter_mut() {
                let fit = fit_dr(&model.data, model.variable, &model.grid, config.link, &ones)?;
                let fit = match config.tail_m {
                    Some(m) => select_tails(fit, model, m, &ones, &mut warnings),
                    None => fit,
                };
                let separated = fit.separated_thresholds();
                if separated > 0 {
                    warnings.push(format!(
                        "{:?}: {separated} threshold(s) flagged for separation",
                        model.variable
                    ));
                }
                fits.push(fit);
            }
            pipeline.models = Some(models);
            let fit_w = fits.pop();
            (fits.pop(), fit_w)
        } else {
            (None, None)
        };
        let inputs = pipeline.assemble(&ones, fit_y.as_ref(), fit_w.as_ref())?;
        Ok((
            pipeline,
            PointFit {
                inputs,
                fit_y,
                fit_w,
                warnings,
            },
        ))
    }

    fn model(&self, data: &Dataset, variable: Variable, covariates: Option<&[String]>) -> Result<VariableModel> {
        let data = match covariates {
            Some(names) => data.with_covariates(names)?,
            None => data.clone(),
        };
        let grid = self.config.grid.build(data.values(variable))?;
        Ok(VariableModel {
            variable,
            data,
            grid,
            pivots: TailPivots::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn grid(&self, variable: Variable) -> Option<&ThresholdGrid> {
        self.models.as_ref().map(|m| match variable {
            Variable::Y => &m[0].grid,
            Variable::W => &m[1].grid,
        })
    }

    pub fn pivots(&self, variable: Variable) -> Option<TailPivots> {
        self.models.as_ref().map(|m| match variable {
            Variable::Y => m[0].pivots,
            Variable::W => m[1].pivots,
        })
    }

    /// Weighted refit on the original grids and pivots; returns the
    /// weighted ranks.
    pub fn refit(&self, weights: &[f64]) -> Result<EstimatorInputs> {
        if weights.len() != self.n {
            return Err(CrrrError::InputMismatch(format!(
                "{} weights for {} observations",
                weights.len(),
                self.n
            )));
        }
        let (fit_y, fit_w) = match &self.models {
            Some(models) => {
                let mut fits = Vec::with_capacity(2);
                for model in models {
                    let fit = fit_dr(&model.data, model.variable, &model.grid, self.config.link, weights)?;
                    let lower = model
                        .pivots
                        .lower
                        .map(|p| fit_tail_at_pivot(&fit, &model.data, TailSide::Lower, p, weights))
                        .transpose()?;
                    let upper = model
                        .pivots
                        .upper
                        .map(|p| fit_tail_at_pivot(&fit, &model.data, TailSide::Upper, p, weights))
                        .transpose()?;
                    fits.push(fit.with_tails(lower, upper));
                }
                let fit_w = fits.pop();
                (fits.pop(), fit_w)
            }
            None => (None, None),
        };
        self.assemble(weights, fit_y.as_ref(), fit_w.as_ref())
    }

    fn assemble(&self, weights: &[f64], fit_y: Option<&DrFit>, fit_w: Option<&DrFit>) -> Result<EstimatorInputs> {
        let (u_cond, v_cond) = match (&self.models, fit_y, fit_w) {
            (Some(models), Some(fy), Some(fw)) => (
                Some(conditional_ranks(fy, &models[0].data)?),
                Some(conditional_ranks(fw, &models[1].data)?),
            ),
            _ => (None, None),
        };
        Ok(EstimatorInputs {
            u_marg: weighted_marginal_ranks(self.data.y(), weights, Variable::Y),
            v_marg: weighted_marginal_ranks(self.data.w(), weights, Variable::W),
            u_cond,
            v_cond,
            covariates: self.covariates.clone(),
        })
    }
}

/// Fits both tails, recording the pivots. A side that cannot be fitted falls
/// back to the unrestricted (clamped) extrapolation with a warning.
fn select_tails(fit: DrFit, model: &mut VariableModel, m: usize, weights: &[f64], warnings: &mut Vec<String>) -> DrFit {
    let mut fitted = [None, None];
    for (slot, side) in [TailSide::Lower, TailSide::Upper].into_iter().enumerate() {
        match fit_tail(&fit, &model.data, side, m, weights) {
            Ok(tail) => fitted[slot] = Some(tail),
            Err(e) => warnings.push(format!(
                "{:?} {side:?} tail not restricted: {e}",
                model.variable
            )),
        }
    }
    model.pivots = TailPivots {
        lower: fitted[0].map(|t| t.pivot),
        upper: fitted[1].map(|t| t.pivot),
    };
    fit.with_tails(fitted[0], fitted[1])
}
