//! Distribution regression: threshold grids, the per-threshold binary MLE,
//! restricted tails, and the fitted conditional CDF.

mod fit;
mod grid;
mod mle;

pub use fit::{
    fit_dr, fit_dr_with, fit_tail, fit_tail_at_pivot, DrFit, TailFit, TailSide, ThresholdCoef,
    ThresholdDiagnostics,
};
pub use grid::{build_grid, GridSpec, ThresholdGrid};
pub use mle::{binary_mle, binary_mle_with, log_likelihood, MleFit, MleOptions};
