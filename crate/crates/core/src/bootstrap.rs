//! Exchangeable bootstrap: weight laws, weighted pipeline refits, and
//! IQR-based standard errors with symmetric-t confidence intervals.

use crate::error::{CrrrError, Result};
use crate::estimators::{group_rows, subgroup_value, EstimatorInputs, Method};
use crate::link::normal_quantile;
use crate::pipeline::Pipeline;
use crate::rng;
use crate::stats::sorted_quantile;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Replicates may fail (non-convergence, degenerate reweighting) up to this
/// share of B before the whole run is rejected.
pub const MAX_FAILURE_SHARE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Multinomial(n; 1/n, …, 1/n) counts.
    Empirical,
    /// I.i.d. standard exponential.
    WeightedExponential,
    /// I.i.d. `max(0, 1 + (Z² − 1)/√2)`, Z standard normal: mean 1, variance 1.
    Wild,
    /// `√(n/m)` times multinomial(m; 1/n, …, 1/n) counts.
    MOfN,
    /// `n / √((n − m) m)` at m random positions, zero elsewhere.
    Subsampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightScheme {
    pub kind: SchemeKind,
    pub m: Option<usize>,
}

impl Default for WeightScheme {
    fn default() -> Self {
        WeightScheme {
            kind: SchemeKind::Empirical,
            m: None,
        }
    }
}

impl WeightScheme {
    pub fn new(kind: SchemeKind, m: Option<usize>) -> Self {
        WeightScheme { kind, m }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match (self.kind, self.m) {
            (SchemeKind::MOfN, Some(m)) if m >= 1 && m <= n => Ok(()),
            (SchemeKind::Subsampling, Some(m)) if m >= 1 && m < n => Ok(()),
            (SchemeKind::MOfN | SchemeKind::Subsampling, m) => Err(CrrrError::Config(format!(
                "{:?} bootstrap needs 1 ≤ m {} n = {n}, got m = {m:?}",
                self.kind,
                if self.kind == SchemeKind::MOfN { "≤" } else { "<" }
            ))),
            (_, _) => Ok(()),
        }
    }

    /// Mean of the raw (unnormalized) weights. Draws computed with mean-one
    /// weights are multiplied by this so `√n(ρ* − ρ̂)` keeps the scale of the
    /// raw variance-one law.
    pub fn draw_scale(&self, n: usize) -> f64 {
        match (self.kind, self.m) {
            (SchemeKind::MOfN, Some(m)) => (m as f64 / n as f64).sqrt(),
            (SchemeKind::Subsampling, Some(m)) => (m as f64 / (n - m) as f64).sqrt(),
            _ => 1.0,
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "empirical" => Ok(SchemeKind::Empirical),
            "weighted_exponential" | "exponential" | "weighted" => Ok(SchemeKind::WeightedExponential),
            "wild" => Ok(SchemeKind::Wild),
            "m_of_n" | "mofn" => Ok(SchemeKind::MOfN),
            "subsampling" => Ok(SchemeKind::Subsampling),
            other => Err(format!("unknown bootstrap scheme {other:?}")),
        }
    }
}

fn multinomial_counts<R: RngCore + ?Sized>(rng: &mut R, n: usize, draws: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n];
    for _ in 0..draws {
        counts[rng::index(rng, n)] += 1.0;
    }
    counts
}

/// Raw weights under `scheme`, before normalization.
pub fn raw_weights<R: RngCore + ?Sized>(scheme: &WeightScheme, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    scheme.validate(n)?;
    Ok(match scheme.kind {
        SchemeKind::Empirical => multinomial_counts(rng, n, n),
        SchemeKind::WeightedExponential => (0..n).map(|_| -rng::open_unit(rng).ln()).collect(),
        SchemeKind::Wild => (0..n)
            .map(|_| {
                let z = rng::standard_normal(rng);
                (1.0 + (z * z - 1.0) / std::f64::consts::SQRT_2).max(0.0)
            })
            .collect(),
        SchemeKind::MOfN => {
            let m = scheme.m.unwrap_or(n);
            let factor = (n as f64 / m as f64).sqrt();
            multinomial_counts(rng, n, m).into_iter().map(|c| factor * c).collect()
        }
        SchemeKind::Subsampling => {
            let m = scheme.m.unwrap_or(n);
            let value = n as f64 / (((n - m) as f64).sqrt() * (m as f64).sqrt());
            // partial Fisher–Yates picks m distinct positions
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..m {
                let j = i + rng::index(rng, n - i);
                idx.swap(i, j);
            }
            let mut w = vec![0.0; n];
            for &i in &idx[..m] {
                w[i] = value;
            }
            w
        }
    })
}

/// Weights under `scheme`, rescaled to mean one (sum n).
pub fn gen_weights<R: RngCore + ?Sized>(scheme: &WeightScheme, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let mut w = raw_weights(scheme, n, rng)?;
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(CrrrError::DegenerateData("bootstrap weights sum to zero".into()));
    }
    if total != n as f64 {
        let factor = n as f64 / total;
        w.iter_mut().for_each(|v| *v *= factor);
    }
    Ok(w)
}

/// One quantity to bootstrap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    Pooled { method: Method },
    Subgroup { method: Method, label: String },
}

impl Statistic {
    pub fn method(&self) -> Method {
        match self {
            Statistic::Pooled { method } | Statistic::Subgroup { method, .. } => *method,
        }
    }

    pub fn group(&self) -> Option<&str> {
        match self {
            Statistic::Pooled { .. } => None,
            Statistic::Subgroup { label, .. } => Some(label),
        }
    }

    /// Value on `inputs` under optional weights. Subgroup statistics need the
    /// group labels of every row.
    pub fn evaluate(&self, inputs: &EstimatorInputs, weights: Option<&[f64]>, groups: Option<&[String]>) -> Result<f64> {
        match self {
            Statistic::Pooled { method } => method.evaluate(inputs, weights),
            Statistic::Subgroup { method, label } => {
                let groups = groups.ok_or_else(|| CrrrError::Config("subgroup statistic without group labels".into()))?;
                let rows = group_rows(groups).remove(label.as_str()).ok_or_else(|| {
                    CrrrError::Config(format!("unknown group label {label:?}"))
                })?;
                let (u, v) = if method.is_conditional() {
                    let (u, v) = inputs.conditional()?;
                    (&u.values, &v.values)
                } else {
                    (&inputs.u_marg.values, &inputs.v_marg.values)
                };
                let pick = |x: &[f64]| rows.iter().map(|&i| x[i]).collect::<Vec<f64>>();
                let w = weights.map(|w| pick(w));
                subgroup_value(*method, &pick(u), &pick(v), w.as_deref())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub scheme: WeightScheme,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(seed: u64) -> Self {
        BootstrapConfig {
            scheme: WeightScheme::default(),
            replicates: 500,
            alpha: 0.05,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub method: Method,
    pub group: Option<String>,
    pub estimate: f64,
    pub se: f64,
    pub ci: [f64; 2],
    pub alpha: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub scheme: WeightScheme,
    pub seed: u64,
    pub failed_replicates: usize,
    pub generator: String,
    /// Centered, scaled draws `√n·(ρ*_b − ρ̂)` of the successful replicates.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub draws: Vec<f64>,
}

/// Difference of the standard normal quartiles, `z₀.₇₅ − z₀.₂₅`.
pub fn normal_iqr() -> f64 {
    2.0 * normal_quantile(0.75)
}

fn sorted(draws: &[f64]) -> Vec<f64> {
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Normal-rescaled interquartile range of the scaled draws.
fn sigma_hat(sorted_draws: &[f64]) -> Result<f64> {
    if sorted_draws.len() < 20 {
        return Err(CrrrError::InsufficientData(format!(
            "{} bootstrap draws; at least 20 are needed",
            sorted_draws.len()
        )));
    }
    let iqr = sorted_quantile(sorted_draws, 0.75) - sorted_quantile(sorted_draws, 0.25);
    if !(iqr > 0.0) {
        let spread = if sorted_draws.first() == sorted_draws.last() {
            "all draws are identical"
        } else {
            "interquartile range is zero"
        };
        return Err(CrrrError::DegenerateDraws(spread.into()));
    }
    Ok(iqr / normal_iqr())
}

/// Standard error of the estimator from draws `Zᵦ = √n(ρ*ᵦ − ρ̂)`:
/// `(q₀.₇₅ − q₀.₂₅) / (z₀.₇₅ − z₀.₂₅) / √n`.
pub fn bootstrap_se(draws: &[f64], n: usize) -> Result<f64> {
    Ok(sigma_hat(&sorted(draws))? / (n as f64).sqrt())
}

/// Symmetric interval `ρ̂ ± t̂·σ̂/√n`, with `t̂` the (1 − α) quantile of
/// `|Zᵦ|/σ̂`.
pub fn bootstrap_ci(point: f64, draws: &[f64], alpha: f64, n: usize) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CrrrError::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if (draws.len() as f64) * alpha < 2.5 {
        return Err(CrrrError::InsufficientData(format!(
            "{} draws are too few for a {}% interval",
            draws.len(),
            100.0 * (1.0 - alpha)
        )));
    }
    let sigma = sigma_hat(&sorted(draws))?;
    let t_stats = sorted(&draws.iter().map(|z| z.abs() / sigma).collect::<Vec<_>>());
    let t_hat = sorted_quantile(&t_stats, 1.0 - alpha);
    let half = t_hat * sigma / (n as f64).sqrt();
    Ok((point - half, point + half))
}

/// Weighted refit followed by the weighted estimator.
pub fn bootstrap_draw(pipeline: &Pipeline, weights: &[f64], method: Method) -> Result<f64> {
    let inputs = pipeline.refit(weights)?;
    method.evaluate(&inputs, Some(weights))
}

/// Runs `config.replicates` weighted refits and reports every statistic.
///
/// Replicate `b` draws its weights from stream `(seed, b)`, and the draws are
/// assembled by replicate index, so the result does not depend on how rayon
/// schedules the replicates.
pub fn run_bootstrap(
    pipeline: &Pipeline,
    statistics: &[Statistic],
    estimates: &[f64],
    groups: Option<&[String]>,
    config: &BootstrapConfig,
) -> Result<Vec<BootstrapReport>> {
    if statistics.len() != estimates.len() {
        return Err(CrrrError::InputMismatch(
            "one point estimate is needed per statistic".into(),
        ));
    }
    let n = pipeline.len();
    config.scheme.validate(n)?;
    let replicates: Vec<std::result::Result<Vec<f64>, String>> = (0..config.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(config.seed, &[b as u64]);
            let weights = gen_weights(&config.scheme, n, &mut rng).map_err(|e| e.to_string())?;
            let inputs = pipeline.refit(&weights).map_err(|e| format!("replicate {b}: {e}"))?;
            statistics
                .iter()
                .map(|s| s.evaluate(&inputs, Some(&weights), groups))
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| format!("replicate {b}: {e}"))
        })
        .collect();

    let failures: Vec<&String> = replicates.iter().filter_map(|r| r.as_ref().err()).collect();
    if failures.len() as f64 > MAX_FAILURE_SHARE * config.replicates as f64 {
        return Err(CrrrError::BootstrapFailure {
            failed: failures.len(),
            total: config.replicates,
            first: failures[0].clone(),
        });
    }
    for f in &failures {
        log::warn!("dropping bootstrap {f}");
    }
    let scale = (n as f64).sqrt() * config.scheme.draw_scale(n);
    statistics
        .iter()
        .zip(estimates)
        .enumerate()
        .map(|(k, (stat, &estimate))| {
            let draws: Vec<f64> = replicates
                .iter()
                .filter_map(|r| r.as_ref().ok())
                .map(|values| scale * (values[k] - estimate))
                .collect();
            let se = bootstrap_se(&draws, n)?;
            let (lo, hi) = bootstrap_ci(estimate, &draws, config.alpha, n)?;
            Ok(BootstrapReport {
                method: stat.method(),
                group: stat.group().map(str::to_string),
                estimate,
                se,
                ci: [lo, hi],
                alpha: config.alpha,
                b: config.replicates,
                scheme: config.scheme,
                seed: config.seed,
                failed_replicates: failures.len(),
                generator: rng::GENERATOR.to_string(),
                draws,
            })
        })
        .collect()
}
