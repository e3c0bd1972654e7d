//! Synthetic designs with known conditional and marginal CDFs, the bivariate
//! normal rank correlation, and the Monte Carlo harness.
//!
//! Two designs are available:
//!
//! * `Conceptual`: X ∈ {0, 1} with equal probability and
//!   (Y, W) | X = x ~ N₂((165, 180 − δx), 4²·[[1, .6], [.6, 1]]).
//! * `BivariateMc`: X ~ N(0, 1) and (Y, W) | X = x ~ N₂((x, x), [[1, c], [c, 1]]).
//!
//! Normals are drawn by inverse CDF from the uniform stream, in the fixed
//! order (X, Z₁, Z₂) per row, so a port using the same generator reproduces
//! the data exactly.

use crate::bootstrap::{run_bootstrap, BootstrapConfig, Statistic, WeightScheme};
use crate::data::{Dataset, Variable};
use crate::error::{CrrrError, Result};
use crate::estimators::Method;
use crate::link::normal_cdf;
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::ranks::{RankKind, RankVector};
use crate::rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Smallest accepted number of Monte Carlo (and, when used, bootstrap)
/// replicates.
pub const MIN_MC_REPS: usize = 50;

const CONCEPTUAL_Y_MEAN: f64 = 165.0;
const CONCEPTUAL_W_MEAN: f64 = 180.0;
const CONCEPTUAL_SD: f64 = 4.0;
const CONCEPTUAL_CORR: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpKind {
    Conceptual { delta: f64 },
    BivariateMc { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub n: usize,
    pub seed: u64,
}

impl DgpSpec {
    pub fn conceptual(delta: f64, n: usize, seed: u64) -> Self {
        DgpSpec {
            kind: DgpKind::Conceptual { delta },
            n,
            seed,
        }
    }

    pub fn bivariate(c: f64, n: usize, seed: u64) -> Self {
        DgpSpec {
            kind: DgpKind::BivariateMc { c },
            n,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(CrrrError::Config(format!("n = {} is too small", self.n)));
        }
        match self.kind {
            DgpKind::BivariateMc { c } if !(c > -1.0 && c < 1.0) => {
                Err(CrrrError::Domain(format!("correlation c = {c} outside (-1, 1)")))
            }
            DgpKind::Conceptual { delta } if !delta.is_finite() => {
                Err(CrrrError::Domain(format!("delta = {delta} is not finite")))
            }
            _ => Ok(()),
        }
    }
}

/// Draws the data set described by `spec`.
pub fn gen_data(spec: &DgpSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, &[]);
    let n = spec.n;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for _ in 0..n {
        match spec.kind {
            DgpKind::Conceptual { delta } => {
                let xi = if rng::open_unit(&mut rng) < 0.5 { 0.0 } else { 1.0 };
                let z1 = rng::standard_normal(&mut rng);
                let z2 = rng::standard_normal(&mut rng);
                let rho = CONCEPTUAL_CORR;
                x.push(xi);
                y.push(CONCEPTUAL_Y_MEAN + CONCEPTUAL_SD * z1);
                w.push(
                    CONCEPTUAL_W_MEAN - delta * xi
                        + CONCEPTUAL_SD * (rho * z1 + (1.0 - rho * rho).sqrt() * z2),
                );
            }
            DgpKind::BivariateMc { c } => {
                let xi = rng::standard_normal(&mut rng);
                let z1 = rng::standard_normal(&mut rng);
                let z2 = rng::standard_normal(&mut rng);
                x.push(xi);
                y.push(xi + z1);
                w.push(xi + c * z1 + (1.0 - c * c).sqrt() * z2);
            }
        }
    }
    Dataset::new(y, w, vec![("x".to_string(), x)], None)
}

/// True marginal CDF of W in the conceptual design: an equal mixture of
/// N(180, 4²) and N(180 − δ, 4²).
pub fn conceptual_w_marginal_cdf(w: f64, delta: f64) -> f64 {
    0.5 * normal_cdf((w - CONCEPTUAL_W_MEAN) / CONCEPTUAL_SD)
        + 0.5 * normal_cdf((w - CONCEPTUAL_W_MEAN + delta) / CONCEPTUAL_SD)
}

/// Ranks computed from the true distributions of the design.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRanks {
    pub u: RankVector,
    pub v: RankVector,
    pub u_marg: RankVector,
    pub v_marg: RankVector,
}

pub fn oracle_ranks(spec: &DgpSpec, data: &Dataset) -> Result<OracleRanks> {
    if data.len() != spec.n {
        return Err(CrrrError::InputMismatch(format!(
            "spec has n = {} but data has {} rows",
            spec.n,
            data.len()
        )));
    }
    let x = data
        .covariate("x")
        .ok_or_else(|| CrrrError::InputMismatch("data has no covariate \"x\"".into()))?;
    let (y, w) = (data.y(), data.w());
    let n = data.len();
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut um = Vec::with_capacity(n);
    let mut vm = Vec::with_capacity(n);
    match spec.kind {
        DgpKind::Conceptual { delta } => {
            if x.iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(CrrrError::InputMismatch(
                    "conceptual design needs a binary covariate".into(),
                ));
            }
            for i in 0..n {
                let uy = normal_cdf((y[i] - CONCEPTUAL_Y_MEAN) / CONCEPTUAL_SD);
                u.push(uy);
                um.push(uy);
                v.push(normal_cdf((w[i] - CONCEPTUAL_W_MEAN + delta * x[i]) / CONCEPTUAL_SD));
                vm.push(conceptual_w_marginal_cdf(w[i], delta));
            }
        }
        DgpKind::BivariateMc { .. } => {
            let s = std::f64::consts::SQRT_2;
            for i in 0..n {
                u.push(normal_cdf(y[i] - x[i]));
                v.push(normal_cdf(w[i] - x[i]));
                um.push(normal_cdf(y[i] / s));
                vm.push(normal_cdf(w[i] / s));
            }
        }
    }
    let cov = vec!["x".to_string()];
    Ok(OracleRanks {
        u: RankVector::new(u, RankKind::Conditional, Variable::Y, cov.clone()),
        v: RankVector::new(v, RankKind::Conditional, Variable::W, cov),
        u_marg: RankVector::new(um, RankKind::Marginal, Variable::Y, vec![]),
        v_marg: RankVector::new(vm, RankKind::Marginal, Variable::W, vec![]),
    })
}

/// Spearman's rank correlation of a bivariate normal with correlation `c`:
/// `6·asin(c/2)/π`.
pub fn bvn_spearman(c: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&c) {
        return Err(CrrrError::Domain(format!("|c| must be at most 1, got {c}")));
    }
    Ok(6.0 * (c / 2.0).asin() / std::f64::consts::PI)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub pipeline: PipelineConfig,
    pub method: Method,
    /// Bootstrap replicates per Monte Carlo replicate; 0 skips the intervals.
    pub boot_reps: usize,
    pub scheme: WeightScheme,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub c: f64,
    pub n: usize,
    pub truth: f64,
    pub rmse: f64,
    pub bias: f64,
    pub sd: f64,
    pub coverage: Option<f64>,
    pub mean_ci_length: Option<f64>,
    pub reps: usize,
    pub failed_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub method: Method,
    pub reps: usize,
    pub boot_reps: usize,
    pub seed: u64,
    pub generator: String,
    pub cells: Vec<McCell>,
}

struct RepOutcome {
    estimate: f64,
    interval: Option<(f64, f64)>,
}

fn mc_replicate(c: f64, n: usize, cell: usize, rep: usize, config: &McConfig) -> Result<RepOutcome> {
    let spec = DgpSpec::bivariate(c, n, rng::derive(config.seed, &[cell as u64, rep as u64, 0]));
    let data = gen_data(&spec)?;
    let (pipeline, point) = Pipeline::fit(&data, &config.pipeline, config.method.is_conditional())?;
    let estimate = config.method.evaluate(&point.inputs, None)?;
    let interval = if config.boot_reps > 0 {
        let boot = BootstrapConfig {
            scheme: config.scheme,
            replicates: config.boot_reps,
            alpha: config.alpha,
            seed: rng::derive(config.seed, &[cell as u64, rep as u64, 1]),
        };
        let reports = run_bootstrap(
            &pipeline,
            &[Statistic::Pooled { method: config.method }],
            &[estimate],
            None,
            &boot,
        )?;
        Some((reports[0].ci[0], reports[0].ci[1]))
    } else {
        None
    };
    Ok(RepOutcome { estimate, interval })
}

/// Full-pipeline Monte Carlo on the bivariate design for each `(c, n)` cell.
pub fn run_monte_carlo(cells: &[(f64, usize)], reps: usize, config: &McConfig) -> Result<McReport> {
    if reps < MIN_MC_REPS {
        return Err(CrrrError::Config(format!(
            "need at least {MIN_MC_REPS} Monte Carlo replicates, got {reps}"
        )));
    }
    if config.boot_reps > 0 && config.boot_reps < MIN_MC_REPS {
        return Err(CrrrError::Config(format!(
            "boot_reps must be 0 or at least {MIN_MC_REPS}, got {}",
            config.boot_reps
        )));
    }
    let mut out = Vec::with_capacity(cells.len());
    for (cell, &(c, n)) in cells.iter().enumerate() {
        let truth = bvn_spearman(c)?;
        let outcomes: Vec<Result<RepOutcome>> = (0..reps)
            .into_par_iter()
            .map(|rep| mc_replicate(c, n, cell, rep, config))
            .collect();
        let failed = outcomes.iter().filter(|o| o.is_err()).count();
        if failed as f64 > crate::bootstrap::MAX_FAILURE_SHARE * reps as f64 {
            let first = outcomes.into_iter().find_map(|o| o.err()).unwrap();
            return Err(CrrrError::BootstrapFailure {
                failed,
                total: reps,
                first: format!("Monte Carlo cell (c = {c}, n = {n}): {first}"),
            });
        }
        let ok: Vec<RepOutcome> = outcomes.into_iter().filter_map(|o| o.ok()).collect();
        let m = ok.len() as f64;
        let errors: Vec<f64> = ok.iter().map(|o| o.estimate - truth).collect();
        let bias = errors.iter().sum::<f64>() / m;
        let sd = (errors.iter().map(|e| (e - bias).powi(2)).sum::<f64>() / m).sqrt();
        let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / m).sqrt();
        let (coverage, mean_ci_length) = if config.boot_reps > 0 {
            let covered = ok
                .iter()
                .filter(|o| o.interval.map_or(false, |(lo, hi)| lo <= truth && truth <= hi))
                .count();
            let length = ok
                .iter()
                .filter_map(|o| o.interval.map(|(lo, hi)| hi - lo))
                .sum::<f64>()
                / m;
            (Some(covered as f64 / m), Some(length))
        } else {
            (None, None)
        };
        out.push(McCell {
            c,
            n,
            truth,
            rmse,
            bias,
            sd,
            coverage,
            mean_ci_length,
            reps: ok.len(),
            failed_reps: failed,
        });
    }
    Ok(McReport {
        method: config.method,
        reps,
        boot_reps: config.boot_reps,
        seed: config.seed,
        generator: rng::GENERATOR.to_string(),
        cells: out,
    })
}

impl McReport {
    /// One line per cell with the columns c, n, RMSE, Bias, SD, Cover.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,n,rmse,bias,sd,cover\n");
        for cell in &self.cells {
            let cover = cell.coverage.map_or(String::new(), |c| format!("{c}"));
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                cell.c, cell.n, cell.rmse, cell.bias, cell.sd, cover
            ));
        }
        out
    }
}
