//! Weighted binary-response maximum likelihood by Newton–Raphson with
//! step halving.
//!
//! Non-intercept columns are centered and scaled internally; coefficients are
//! mapped back to the caller's scale on return. All sums are divided by the
//! total weight, so tolerances do not depend on `n` or on the weight scale.

use crate::data::Design;
use crate::error::{CrrrError, IterationRecord, Result};
use crate::link::Link;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleOptions {
    /// Max-norm bound on the mean score at convergence.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// A standardized coefficient beyond this magnitude is treated as
    /// (quasi-)separation: iteration stops and the fit is flagged.
    pub separation_bound: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            tolerance: 1e-8,
            max_iterations: 100,
            separation_bound: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleFit {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub separated: bool,
    pub gradient_norm: f64,
}

/// Newton steps below this max-norm count as settled once the score is small.
const STEP_TOLERANCE: f64 = 1e-4;
/// Newton decrement below which a small score counts as settled even while
/// the step is still long (slow drift along a near-flat probit direction).
const DECREMENT_TOLERANCE: f64 = 1e-20;
const MAX_HALVINGS: usize = 50;
/// Once the score max-norm falls below this multiple of the tolerance the
/// full Newton step is returned without another evaluation; quadratic
/// convergence puts the score after it well under the tolerance.
const FINISH_SCORE_FACTOR: f64 = 1e2;
/// Separated problems keep taking long steps; the shortcut only applies to
/// short ones.
const FINISH_STEP: f64 = 1e-3;
const SEPARATED_SCORE_FACTOR: f64 = 1e-3;
const SEPARATED_HARD_FACTOR: f64 = 100.0;

/// Positive-weight rows of a design, standardized, with a fixed row order.
///
/// The response for a given problem is "row index < cut", so callers order
/// the rows so that every indicator of interest is a prefix.
#[derive(Debug, Clone)]
pub(crate) struct Standardized {
    z: Vec<f64>,
    w: Vec<f64>,
    n: usize,
    d: usize,
    center: Vec<f64>,
    scale: Vec<f64>,
    intercept: bool,
}

impl Standardized {
    /// `rows` lists the design rows to include, in the desired order; rows
    /// with zero weight must already be excluded.
    pub(crate) fn new(design: &Design, rows: &[usize], weights: &[f64]) -> Result<Self> {
        let n = rows.len();
        let d = design.ncols();
        let intercept = rows.iter().all(|&i| design.row(i)[0] == 1.0);
        let mut center = vec![0.0; d];
        let mut scale = vec![1.0; d];
        let first = if intercept { 1 } else { 0 };
        for j in first..d {
            let mean = rows.iter().map(|&i| design.row(i)[j]).sum::<f64>() / n as f64;
            let var = rows
                .iter()
                .map(|&i| (design.row(i)[j] - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            if !(var > 0.0) {
                return Err(CrrrError::DegenerateData(format!(
                    "design column {j} is constant on the positive-weight rows"
                )));
            }
            if intercept {
                center[j] = mean;
                scale[j] = var.sqrt();
            }
        }
        let mut z = Vec::with_capacity(n * d);
        for &i in rows {
            let row = design.row(i);
            z.extend((0..d).map(|j| (row[j] - center[j]) / scale[j]));
        }
        let w_sum: f64 = rows.iter().map(|&i| weights[i]).sum();
        let w = rows.iter().map(|&i| weights[i] / w_sum).collect();
        Ok(Standardized {
            z,
            w,
            n,
            d,
            center,
            scale,
            intercept,
        })
    }

    pub(crate) fn nrows(&self) -> usize {
        self.n
    }

    /// Total (normalized) weight of the first `cut` rows.
    pub(crate) fn prefix_weight(&self, cut: usize) -> f64 {
        self.w[..cut].iter().sum()
    }

    pub(crate) fn to_original(&self, b: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = b.iter().zip(&self.scale).map(|(bj, s)| bj / s).collect();
        if self.intercept {
            out[0] = b[0]
                - (1..self.d)
                    .map(|j| b[j] * self.center[j] / self.scale[j])
                    .sum::<f64>();
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn to_standardized(&self, b: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = b.iter().zip(&self.scale).map(|(bj, s)| bj * s).collect();
        if self.intercept {
            out[0] = b[0] + (1..self.d).map(|j| b[j] * self.center[j]).sum::<f64>();
        }
        out
    }

    /// Mean log-likelihood, score and negated Hessian at `b`.
    fn evaluate(&self, cut: usize, link: Link, b: &[f64]) -> Evaluation {
        let d = self.d;
        let mut ll = 0.0;
        let mut grad = vec![0.0; d];
        let mut info = vec![0.0; d * d];
        for i in 0..self.n {
            let zi = &self.z[i * d..(i + 1) * d];
            let eta: f64 = zi.iter().zip(b).map(|(z, b)| z * b).sum();
            let (t, sign) = if i < cut { (eta, 1.0) } else { (-eta, -1.0) };
            let terms = link.log_cdf_terms(t);
            let wi = self.w[i];
            ll += wi * terms.value;
            let g = wi * sign * terms.d1;
            let h = -wi * terms.d2;
            for a in 0..d {
                grad[a] += g * zi[a];
                let hza = h * zi[a];
                for c in a..d {
                    info[a * d + c] += hza * zi[c];
                }
            }
        }
        for a in 0..d {
            for c in 0..a {
                info[a * d + c] = info[c * d + a];
            }
        }
        Evaluation { ll, grad, info }
    }

    /// Starting value: intercept at the link quantile of the response share.
    pub(crate) fn initial(&self, cut: usize, link: Link) -> Vec<f64> {
        let share = self.prefix_weight(cut).clamp(1e-12, 1.0 - 1e-12);
        let mut b = vec![0.0; self.d];
        if self.intercept {
            b[0] = link.quantile(share);
        }
        b
    }

    /// Solves the problem "row < cut" from `start` (standardized scale).
    pub(crate) fn solve(
        &self,
        cut: usize,
        link: Link,
        start: &[f64],
        options: &MleOptions,
    ) -> Result<StandardizedFit> {
        if cut == 0 || cut == self.n {
            return Err(CrrrError::SaturatedThreshold {
                all_ones: cut == self.n,
            });
        }
        let mut b = start.to_vec();
        let mut current = self.evaluate(cut, link, &b);
        let mut trace = Vec::new();
        for iteration in 0..=options.max_iterations {
            let gnorm = max_abs(&current.grad);
            let delta = match newton_direction(&current, self.d) {
                Some(delta) => delta,
                None => {
                    trace.push(IterationRecord {
                        iteration,
                        log_likelihood: current.ll,
                        gradient_norm: gnorm,
                        step: 0.0,
                    });
                    return Err(CrrrError::NonConvergence { trace });
                }
            };
            let decrement: f64 = delta.iter().zip(&current.grad).map(|(a, g)| a * g).sum();
            if gnorm <= options.tolerance
                && (max_abs(&delta) <= STEP_TOLERANCE
                    || decrement <= DECREMENT_TOLERANCE
                    || gnorm <= SEPARATED_SCORE_FACTOR * options.tolerance)
            {
                return Ok(StandardizedFit {
                    separated: max_abs(&b) > options.separation_bound,
                    coefficients: b,
                    iterations: iteration,
                    gradient_norm: gnorm,
                });
            }
            if iteration == options.max_iterations {
                break;
            }
            if gnorm <= FINISH_SCORE_FACTOR * options.tolerance && max_abs(&delta) <= FINISH_STEP {
                let finished: Vec<f64> = b.iter().zip(&delta).map(|(b, s)| b + s).collect();
                if max_abs(&finished) <= options.separation_bound {
                    return Ok(StandardizedFit {
                        coefficients: finished,
                        iterations: iteration + 1,
                        separated: false,
                        gradient_norm: gnorm,
                    });
                }
            }
            let slack = 1e-13 * current.ll.abs().max(1.0);
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let trial: Vec<f64> = b.iter().zip(&delta).map(|(b, s)| b + step * s).collect();
                let eval = self.evaluate(cut, link, &trial);
                if eval.ll.is_finite() && eval.ll >= current.ll - slack {
                    accepted = Some((trial, eval));
                    break;
                }
                step *= 0.5;
            }
            trace.push(IterationRecord {
                iteration,
                log_likelihood: current.ll,
                gradient_norm: gnorm,
                step,
            });
            let Some((trial, eval)) = accepted else {
                if gnorm <= 100.0 * options.tolerance {
                    // stalled at floating-point resolution
                    return Ok(StandardizedFit {
                        separated: max_abs(&b) > options.separation_bound,
                        coefficients: b,
                        iterations: iteration,
                        gradient_norm: gnorm,
                    });
                }
                return Err(CrrrError::NonConvergence { trace });
            };
            b = trial;
            current = eval;
            // Past the bound the separated part of the index keeps growing
            // while the rest settles; stop once the score is negligible.
            let size = max_abs(&b);
            if size > options.separation_bound
                && (max_abs(&current.grad) <= SEPARATED_SCORE_FACTOR * options.tolerance
                    || size > SEPARATED_HARD_FACTOR * options.separation_bound)
            {
                return Ok(StandardizedFit {
                    coefficients: b,
                    iterations: iteration + 1,
                    separated: true,
                    gradient_norm: max_abs(&current.grad),
                });
            }
        }
        Err(CrrrError::NonConvergence { trace })
    }
}

pub(crate) struct StandardizedFit {
    pub(crate) coefficients: Vec<f64>,
    pub(crate) iterations: usize,
    pub(crate) separated: bool,
    pub(crate) gradient_norm: f64,
}

struct Evaluation {
    ll: f64,
    grad: Vec<f64>,
    info: Vec<f64>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn newton_direction(eval: &Evaluation, d: usize) -> Option<Vec<f64>> {
    let grad = DVector::from_column_slice(&eval.grad);
    let info = DMatrix::from_row_slice(d, d, &eval.info);
    if let Some(chol) = info.clone().cholesky() {
        return Some(chol.solve(&grad).iter().copied().collect());
    }
    let ridge = 1e-12 * info.trace().max(f64::MIN_POSITIVE);
    let jittered = info + DMatrix::identity(d, d) * ridge;
    jittered
        .cholesky()
        .map(|chol| chol.solve(&grad).iter().copied().collect())
}

/// Maximizes `Σ ωᵢ [1ᵢ log F(xᵢ'b) + (1 − 1ᵢ) log F(−xᵢ'b)]` over `b`.
///
/// Rows with zero weight are ignored. An indicator that is constant over the
/// positive-weight rows yields [`CrrrError::SaturatedThreshold`].
pub fn binary_mle(
    design: &Design,
    indicator: &[bool],
    link: Link,
    weights: &[f64],
) -> Result<MleFit> {
    binary_mle_with(design, indicator, link, weights, &MleOptions::default())
}

pub fn binary_mle_with(
    design: &Design,
    indicator: &[bool],
    link: Link,
    weights: &[f64],
    options: &MleOptions,
) -> Result<MleFit> {
    let n = design.nrows();
    if indicator.len() != n || weights.len() != n {
        return Err(CrrrError::InputMismatch(format!(
            "design has {n} rows, indicator {} and weights {}",
            indicator.len(),
            weights.len()
        )));
    }
    if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(CrrrError::Config(format!("weight {i} is negative or not finite")));
    }
    let mut rows: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0 && indicator[i]).collect();
    let cut = rows.len();
    rows.extend((0..n).filter(|&i| weights[i] > 0.0 && !indicator[i]));
    if cut == 0 || cut == rows.len() {
        return Err(CrrrError::SaturatedThreshold {
            all_ones: cut > 0,
        });
    }
    let problem = Standardized::new(design, &rows, weights)?;
    let start = problem.initial(cut, link);
    let fit = problem.solve(cut, link, &start, options)?;
    Ok(MleFit {
        coefficients: problem.to_original(&fit.coefficients),
        iterations: fit.iterations,
        separated: fit.separated,
        gradient_norm: fit.gradient_norm,
    })
}

/// Mean weighted log-likelihood and score at `b` on the caller's scale.
/// Used for diagnostics and tests.
pub fn log_likelihood(
    design: &Design,
    indicator: &[bool],
    link: Link,
    weights: &[f64],
    b: &[f64],
) -> (f64, Vec<f64>) {
    let d = design.ncols();
    let total: f64 = weights.iter().sum();
    let mut ll = 0.0;
    let mut grad = vec![0.0; d];
    for i in 0..design.nrows() {
        if weights[i] == 0.0 {
            continue;
        }
        let x = design.row(i);
        let eta: f64 = x.iter().zip(b).map(|(x, b)| x * b).sum();
        let (t, sign) = if indicator[i] { (eta, 1.0) } else { (-eta, -1.0) };
        let terms = link.log_cdf_terms(t);
        let w = weights[i] / total;
        ll += w * terms.value;
        for (g, xj) in grad.iter_mut().zip(x) {
            *g += w * sign * terms.d1 * xj;
        }
    }
    (ll, grad)
}
