//! Conditional rank-rank regression.
//!
//! Conditional ranks `F(Y | X)` and `F(W | X)` are estimated by distribution
//! regression (a binary link model at every point of a threshold grid);
//! their correlation measures average rank persistence within covariate
//! cells. The crate also covers the classical marginal rank-rank slopes,
//! subgroup estimates, transition matrices, exchangeable bootstrap
//! inference, and a Monte Carlo harness on two synthetic designs.

pub mod bootstrap;
pub mod data;
pub mod dr;
pub mod error;
pub mod estimators;
pub mod link;
pub mod pipeline;
pub mod ranks;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod transition;

pub use data::{Dataset, Design, Variable};
pub use error::{CrrrError, Result};
pub use estimators::{Method, SlopeEstimate};
pub use link::Link;
pub use ranks::{RankKind, RankVector};
