use super::grid::ThresholdGrid;
use super::mle::{MleOptions, Standardized};
use crate::data::{Dataset, Variable};
use crate::error::{CrrrError, Result};
use crate::link::Link;
use serde::{Deserialize, Serialize};

/// Coefficients at one threshold. A threshold where every positive-weight
/// observation falls on the same side has a degenerate MLE; its CDF is 0 or
/// 1 for every covariate value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdCoef {
    Fitted { coefficients: Vec<f64> },
    Saturated { cdf: f64 },
}

impl ThresholdCoef {
    /// Linear index, with saturated thresholds mapped to ±∞.
    #[inline]
    fn index(&self, x: &[f64]) -> f64 {
        match self {
            ThresholdCoef::Fitted { coefficients } => {
                x.iter().zip(coefficients).map(|(x, b)| x * b).sum()
            }
            ThresholdCoef::Saturated { cdf } if *cdf > 0.5 => f64::INFINITY,
            ThresholdCoef::Saturated { .. } => f64::NEG_INFINITY,
        }
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        match self {
            ThresholdCoef::Fitted { coefficients } => Some(coefficients),
            ThresholdCoef::Saturated { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    Lower,
    Upper,
}

/// Restricted tail beyond a grid endpoint: the intercept moves linearly in
/// `r` with slope `scale` while the other coefficients stay at their values
/// at `anchor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub side: TailSide,
    pub anchor: f64,
    pub pivot: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDiagnostics {
    pub index: usize,
    pub point: f64,
    pub iterations: usize,
    pub separated: bool,
    pub saturated: bool,
}

/// Fitted conditional CDF model for one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrFit {
    pub variable: Variable,
    pub grid: ThresholdGrid,
    pub coefs: Vec<ThresholdCoef>,
    pub link: Link,
    pub lower_tail: Option<TailFit>,
    pub upper_tail: Option<TailFit>,
    pub diagnostics: Vec<ThresholdDiagnostics>,
}

/// Fits the binary model `1(R ≤ r)` on the covariates at every grid point.
///
/// Thresholds are solved in increasing order, each warm-started from the
/// previous solution, so the result is a deterministic function of the inputs.
pub fn fit_dr(
    data: &Dataset,
    variable: Variable,
    grid: &ThresholdGrid,
    link: Link,
    weights: &[f64],
) -> Result<DrFit> {
    fit_dr_with(data, variable, grid, link, weights, &MleOptions::default())
}

pub fn fit_dr_with(
    data: &Dataset,
    variable: Variable,
    grid: &ThresholdGrid,
    link: Link,
    weights: &[f64],
    options: &MleOptions,
) -> Result<DrFit> {
    let values = data.values(variable);
    let n = values.len();
    if weights.len() != n {
        return Err(CrrrError::InputMismatch(format!(
            "{} weights for {n} observations",
            weights.len()
        )));
    }
    if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(CrrrError::Config(format!("weight {i} is negative or not finite")));
    }
    let mut rows: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    if rows.is_empty() {
        return Err(CrrrError::DegenerateData("all weights are zero".into()));
    }
    rows.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = rows.iter().map(|&i| values[i]).collect();
    let problem = Standardized::new(data.design(), &rows, weights)?;

    let mut coefs = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::with_capacity(grid.len());
    // last two non-separated solutions as (cut, response quantile, coefficients)
    let mut history: Vec<(usize, f64, Vec<f64>)> = Vec::with_capacity(2);
    for (index, &point) in grid.points().iter().enumerate() {
        let cut = sorted.partition_point(|&v| v <= point);
        if cut == 0 || cut == problem.nrows() {
            let cdf = if cut == 0 { 0.0 } else { 1.0 };
            coefs.push(ThresholdCoef::Saturated { cdf });
            diagnostics.push(ThresholdDiagnostics {
                index,
                point,
                iterations: 0,
                separated: false,
                saturated: true,
            });
            history.clear();
            continue;
        }
        let level = link.quantile(problem.prefix_weight(cut).clamp(1e-12, 1.0 - 1e-12));
        let warm = match history.as_slice() {
            [.., (last_cut, _, b)] if *last_cut == cut => Some(b.clone()),
            [(_, q0, b0), (_, q1, b1)] if q1 > q0 => {
                let ratio = ((level - q1) / (q1 - q0)).clamp(0.0, 2.0);
                Some(b1.iter().zip(b0).map(|(b1, b0)| b1 + ratio * (b1 - b0)).collect())
            }
            [.., (_, _, b)] => Some(b.clone()),
            [] => None,
        };
        let cold = problem.initial(cut, link);
        let attempt = match &warm {
            Some(start) => problem
                .solve(cut, link, start, options)
                .or_else(|_| problem.solve(cut, link, &cold, options)),
            None => problem.solve(cut, link, &cold, options),
        };
        let fit = attempt.map_err(|e| CrrrError::AtThreshold {
            index,
            point,
            source: Box::new(e),
        })?;
        if fit.separated {
            history.clear();
        } else if history.last().map_or(true, |h| h.0 != cut) {
            if history.len() == 2 {
                history.remove(0);
            }
            history.push((cut, level, fit.coefficients.clone()));
        }
        coefs.push(ThresholdCoef::Fitted {
            coefficients: problem.to_original(&fit.coefficients),
        });
        diagnostics.push(ThresholdDiagnostics {
            index,
            point,
            iterations: fit.iterations,
            separated: fit.separated,
            saturated: false,
        });
    }
    Ok(DrFit {
        variable,
        grid: grid.clone(),
        coefs,
        link,
        lower_tail: None,
        upper_tail: None,
        diagnostics,
    })
}

/// At most this many admissible pivots are tried before giving up on a tail.
const PIVOT_ATTEMPTS: usize = 5;

/// Chooses a pivot beyond the grid endpoint on `side` and estimates the tail
/// scale there, holding the endpoint coefficients fixed.
///
/// The first admissible pivot has exactly `m_min` observations strictly
/// between it and the endpoint; if its scale estimate is not positive the
/// pivot moves outward one observed value at a time.
pub fn fit_tail(
    fit: &DrFit,
    data: &Dataset,
    side: TailSide,
    m_min: usize,
    weights: &[f64],
) -> Result<TailFit> {
    let anchor = anchor_point(fit, side);
    let values = data.values(fit.variable);
    let mut beyond: Vec<f64> = values
        .iter()
        .copied()
        .filter(|&v| match side {
            TailSide::Upper => v > anchor,
            TailSide::Lower => v < anchor,
        })
        .collect();
    if beyond.len() < 2 * m_min {
        return Err(CrrrError::TailData(format!(
            "{} observations beyond the {side:?} grid endpoint {anchor}; need at least {}",
            beyond.len(),
            2 * m_min
        )));
    }
    // order outward from the anchor
    beyond.sort_by(f64::total_cmp);
    if side == TailSide::Lower {
        beyond.reverse();
    }
    let total = beyond.len();
    let mut attempts = 0;
    let mut last_scale = f64::NAN;
    let mut k = 0;
    while k < total && attempts < PIVOT_ATTEMPTS {
        let pivot = beyond[k];
        let between = beyond.iter().take_while(|&&v| v != pivot).count();
        let past = total - beyond.iter().rposition(|&v| v == pivot).unwrap() - 1;
        let next = k + beyond[k..].iter().take_while(|&&v| v == pivot).count();
        if between >= m_min {
            if past < m_min {
                break;
            }
            attempts += 1;
            let scale = tail_scale(fit, data, side, pivot, weights)?;
            if scale > 0.0 {
                return Ok(TailFit {
                    side,
                    anchor,
                    pivot,
                    scale,
                });
            }
            last_scale = scale;
        }
        k = next;
    }
    if attempts == 0 {
        return Err(CrrrError::TailData(format!(
            "no pivot beyond {anchor} leaves {m_min} observations on both sides"
        )));
    }
    Err(CrrrError::TailFit(format!(
        "{side:?} tail scale not positive after {attempts} pivot(s) (last estimate {last_scale})"
    )))
}

/// Re-estimates the tail scale at a previously selected pivot.
pub fn fit_tail_at_pivot(
    fit: &DrFit,
    data: &Dataset,
    side: TailSide,
    pivot: f64,
    weights: &[f64],
) -> Result<TailFit> {
    let anchor = anchor_point(fit, side);
    let scale = tail_scale(fit, data, side, pivot, weights)?;
    if !(scale > 0.0) {
        return Err(CrrrError::TailFit(format!(
            "{side:?} tail scale {scale} at pivot {pivot} is not positive"
        )));
    }
    Ok(TailFit {
        side,
        anchor,
        pivot,
        scale,
    })
}

fn anchor_point(fit: &DrFit, side: TailSide) -> f64 {
    match side {
        TailSide::Lower => fit.grid.lower(),
        TailSide::Upper => fit.grid.upper(),
    }
}

fn anchor_coefficients(fit: &DrFit, side: TailSide) -> Result<&[f64]> {
    let coef = match side {
        TailSide::Lower => &fit.coefs[0],
        TailSide::Upper => &fit.coefs[fit.coefs.len() - 1],
    };
    coef.coefficients().ok_or_else(|| {
        CrrrError::TailFit(format!("{side:?} grid endpoint is saturated; no anchor coefficients"))
    })
}

/// One-parameter weighted MLE of the tail scale `a` in
/// `F(r0 | x) = Λ((r0 − r̄)·a + x'β(r̄))`.
fn tail_scale(
    fit: &DrFit,
    data: &Dataset,
    side: TailSide,
    pivot: f64,
    weights: &[f64],
) -> Result<f64> {
    let anchor = anchor_point(fit, side);
    let beta = anchor_coefficients(fit, side)?;
    let shift = pivot - anchor;
    let values = data.values(fit.variable);
    let design = data.design();
    let link = fit.link;
    let total: f64 = weights.iter().sum();
    let rows: Vec<(f64, bool, f64)> = (0..values.len())
        .filter(|&i| weights[i] > 0.0)
        .map(|i| {
            let eta: f64 = design.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
            (eta, values[i] <= pivot, weights[i] / total)
        })
        .collect();
    let ones = rows.iter().filter(|r| r.1).count();
    if ones == 0 || ones == rows.len() {
        return Err(CrrrError::TailFit(format!(
            "indicator at pivot {pivot} is constant over positive-weight rows"
        )));
    }
    let evaluate = |a: f64| {
        let mut ll = 0.0;
        let mut score = 0.0;
        let mut info = 0.0;
        for &(eta, below, w) in &rows {
            let idx = shift * a + eta;
            let (t, sign) = if below { (idx, 1.0) } else { (-idx, -1.0) };
            let terms = link.log_cdf_terms(t);
            ll += w * terms.value;
            score += w * sign * terms.d1 * shift;
            info -= w * terms.d2 * shift * shift;
        }
        (ll, score, info)
    };
    let mut a = 0.0;
    let (mut ll, mut score, mut info) = evaluate(a);
    for _ in 0..200 {
        if score.abs() <= 1e-12 {
            return Ok(a);
        }
        if !(info > 0.0) {
            break;
        }
        let delta = score / info;
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..50 {
            let trial = a + step * delta;
            let (tl, ts, ti) = evaluate(trial);
            if tl.is_finite() && tl >= ll - 1e-14 {
                a = trial;
                ll = tl;
                score = ts;
                info = ti;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved || a.abs() > 1e8 {
            break;
        }
    }
    if score.abs() <= 1e-8 {
        return Ok(a);
    }
    Err(CrrrError::TailFit(format!(
        "scale MLE at pivot {pivot} did not converge (score {score:.3e})"
    )))
}

impl DrFit {
    pub fn with_tails(mut self, lower: Option<TailFit>, upper: Option<TailFit>) -> Self {
        self.lower_tail = lower;
        self.upper_tail = upper;
        self
    }

    pub fn separated_thresholds(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.separated).count()
    }

    /// Fitted conditional CDF at `(r, x)`.
    ///
    /// The per-`x` sequence over the grid is rearranged into increasing order
    /// before use, then interpolated linearly in `r`. Beyond the grid the
    /// fitted tail is used when present, otherwise the endpoint value.
    pub fn predict_cdf(&self, x: &[f64], r: f64) -> f64 {
        let mut eta: Vec<f64> = self.coefs.iter().map(|c| c.index(x)).collect();
        if eta.windows(2).any(|p| p[0] > p[1]) {
            eta.sort_by(f64::total_cmp);
        }
        let link = self.link;
        let points = self.grid.points();
        let last = points.len() - 1;
        if r < points[0] {
            let edge = link.cdf(eta[0]);
            return match (&self.lower_tail, self.coefs[0].coefficients()) {
                (Some(tail), Some(beta)) => edge.min(tail_cdf(link, tail, beta, x, r)),
                _ => edge,
            };
        }
        if r > points[last] {
            let edge = link.cdf(eta[last]);
            return match (&self.upper_tail, self.coefs[last].coefficients()) {
                (Some(tail), Some(beta)) => edge.max(tail_cdf(link, tail, beta, x, r)),
                _ => edge,
            };
        }
        let j = points.partition_point(|&p| p <= r) - 1;
        if points[j] == r || j == last {
            return link.cdf(eta[j]);
        }
        let lambda = (r - points[j]) / (points[j + 1] - points[j]);
        (1.0 - lambda) * link.cdf(eta[j]) + lambda * link.cdf(eta[j + 1])
    }
}

fn tail_cdf(link: Link, tail: &TailFit, beta: &[f64], x: &[f64], r: f64) -> f64 {
    let eta: f64 = x.iter().zip(beta).map(|(x, b)| x * b).sum();
    link.cdf(eta + (r - tail.anchor) * tail.scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dr::grid::build_grid;
    use crate::dr::mle::binary_mle;
    use crate::data::Design;
    use crate::rng;

    fn logistic_draw(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
        let u = rng::open_unit(rng);
        (u / (1.0 - u)).ln()
    }

    /// Y = x + L with L standard logistic, so F(r | x) = Λ(r − x).
    fn logistic_location(n: usize, seed: u64) -> Dataset {
        let mut rng = rng::stream(seed, &[]);
        let x: Vec<f64> = (0..n).map(|_| rng::standard_normal(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|x| x + logistic_draw(&mut rng)).collect();
        let w = y.clone();
        Dataset::new(y, w, vec![("x".into(), x)], None).unwrap()
    }

    #[test]
    fn intercept_only_matches_ecdf() {
        let y = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.5];
        let n = y.len();
        let data = Dataset::new(y.clone(), y.clone(), vec![], None).unwrap();
        let grid = ThresholdGrid::all_observed(&y).unwrap();
        let fit = fit_dr(&data, Variable::Y, &grid, Link::Logistic, &vec![1.0; n]).unwrap();
        for &r in &y {
            let ecdf = y.iter().filter(|&&v| v <= r).count() as f64 / n as f64;
            assert!((fit.predict_cdf(&[1.0], r) - ecdf).abs() < 1e-10, "r={r}");
        }
    }

    #[test]
    fn saturated_groups_match_within_group_ecdf() {
        let y = vec![1.0, 2.5, 2.0, 7.0, 3.0, 0.5, 4.0, 6.0, 5.5, 8.0, 2.2, 9.0];
        let x = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let n = y.len();
        let data = Dataset::new(y.clone(), y.clone(), vec![("g".into(), x.clone())], None).unwrap();
        let grid = ThresholdGrid::all_observed(&y).unwrap();
        for link in [Link::Logistic, Link::Gaussian] {
            let fit = fit_dr(&data, Variable::Y, &grid, link, &vec![1.0; n]).unwrap();
            for i in 0..n {
                let same: Vec<usize> = (0..n).filter(|&j| x[j] == x[i]).collect();
                let count = same.iter().filter(|&&j| y[j] <= y[i]).count();
                let expected = count as f64 / same.len() as f64;
                let got = fit.predict_cdf(&[1.0, x[i]], y[i]);
                assert!((got - expected).abs() < 1e-8, "{link:?} i={i} {got} vs {expected}");
            }
        }
    }

    #[test]
    fn predictions_are_monotone_probabilities() {
        let data = logistic_location(400, 11);
        let grid = build_grid(data.y(), 40, 0.02, 0.98).unwrap();
        let fit = fit_dr(&data, Variable::Y, &grid, Link::Gaussian, &vec![1.0; 400]).unwrap();
        for &x in &[-3.0, -0.4, 0.0, 1.2, 4.0] {
            let mut prev = 0.0;
            for k in 0..=200 {
                let r = -8.0 + 0.08 * k as f64;
                let p = fit.predict_cdf(&[1.0, x], r);
                assert!((0.0..=1.0).contains(&p));
                assert!(p >= prev - 1e-15, "x={x} r={r}");
                prev = p;
            }
        }
    }

    #[test]
    fn logit_and_probit_agree() {
        let data = logistic_location(2000, 5);
        let grid = GridSpecDefault::grid(&data);
        let w = vec![1.0; 2000];
        let logit = fit_dr(&data, Variable::Y, &grid, Link::Logistic, &w).unwrap();
        let probit = fit_dr(&data, Variable::Y, &grid, Link::Gaussian, &w).unwrap();
        let design = data.design();
        let gap = (0..data.len())
            .map(|i| {
                let x = design.row(i);
                (logit.predict_cdf(x, data.y()[i]) - probit.predict_cdf(x, data.y()[i])).abs()
            })
            .sum::<f64>()
            / data.len() as f64;
        assert!(gap < 0.01, "mean gap {gap}");
    }

    struct GridSpecDefault;
    impl GridSpecDefault {
        fn grid(data: &Dataset) -> ThresholdGrid {
            crate::dr::GridSpec::default().build(data.y()).unwrap()
        }
    }

    #[test]
    fn logistic_coefficients_recovered() {
        // P(Y ≤ 0 | x) = Λ(0.5 − x)
        let n = 200;
        let mut rng = rng::stream(2024, &[]);
        let x: Vec<f64> = (0..n).map(|_| rng::standard_normal(&mut rng)).collect();
        let ind: Vec<bool> = x
            .iter()
            .map(|x| x - 0.5 + logistic_draw(&mut rng) <= 0.0)
            .collect();
        let design = Design::with_intercept(n, &[x.clone()]).unwrap();
        let fit = binary_mle(&design, &ind, Link::Logistic, &vec![1.0; n]).unwrap();
        let b = &fit.coefficients;
        // inverse Fisher information at the estimate
        let (mut i00, mut i01, mut i11) = (0.0, 0.0, 0.0);
        for &xi in &x {
            let p = 1.0 / (1.0 + (-(b[0] + b[1] * xi)).exp());
            let v = p * (1.0 - p);
            i00 += v;
            i01 += v * xi;
            i11 += v * xi * xi;
        }
        let det = i00 * i11 - i01 * i01;
        let se = [(i11 / det).sqrt(), (i00 / det).sqrt()];
        assert!((b[0] - 0.5).abs() < 3.0 * se[0], "{b:?} {se:?}");
        assert!((b[1] + 1.0).abs() < 3.0 * se[1], "{b:?} {se:?}");
    }

    #[test]
    fn tail_needs_enough_data() {
        let data = logistic_location(300, 1);
        let grid = build_grid(data.y(), 20, 0.05, 0.95).unwrap();
        let fit = fit_dr(&data, Variable::Y, &grid, Link::Logistic, &vec![1.0; 300]).unwrap();
        // 15 observations lie above the 95% point
        let err = fit_tail(&fit, &data, TailSide::Upper, 10, &vec![1.0; 300]).unwrap_err();
        assert!(matches!(err, CrrrError::TailData(_)), "{err}");
    }

    #[test]
    fn logistic_tail_scale_is_recovered() {
        let n = 5000;
        let data = logistic_location(n, 77);
        let grid = build_grid(data.y(), 50, 0.05, 0.95).unwrap();
        let w = vec![1.0; n];
        let fit = fit_dr(&data, Variable::Y, &grid, Link::Logistic, &w).unwrap();
        let tail = fit_tail(&fit, &data, TailSide::Upper, 50, &w).unwrap();
        assert!(tail.pivot > tail.anchor);

        // brute-force profile of the one-parameter log-likelihood
        let beta = fit.coefs.last().unwrap().coefficients().unwrap().to_vec();
        let shift = tail.pivot - tail.anchor;
        let rows: Vec<(f64, bool)> = (0..n)
            .map(|i| (beta[0] + beta[1] * data.design().row(i)[1], data.y()[i] <= tail.pivot))
            .collect();
        let ll = |a: f64| -> f64 {
            rows.iter()
                .map(|&(eta, below)| {
                    let p = 1.0 / (1.0 + (-(eta + shift * a)).exp());
                    if below { p.ln() } else { (1.0 - p).ln() }
                })
                .sum()
        };
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 0..=40_000 {
            let a = 0.0 + k as f64 * 1e-4;
            let v = ll(a);
            if v > best.0 {
                best = (v, a);
            }
        }
        assert!((tail.scale - best.1).abs() < 2e-4, "{} vs {}", tail.scale, best.1);

        let info: f64 = rows
            .iter()
            .map(|&(eta, _)| {
                let p = 1.0 / (1.0 + (-(eta + shift * tail.scale)).exp());
                p * (1.0 - p) * shift * shift
            })
            .sum();
        let se = 1.0 / info.sqrt();
        assert!((tail.scale - 1.0).abs() < 3.0 * se, "scale {} se {se}", tail.scale);
    }
}
