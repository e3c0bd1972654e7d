//! Slope estimators on precomputed rank vectors.
//!
//! Every estimator has a weighted kernel over plain slices; the unweighted
//! public functions call the same kernels with `None`, so bootstrap draws with
//! unit weights reproduce point estimates bit for bit.

use crate::data::Design;
use crate::error::{CrrrError, Result};
use crate::ranks::{RankKind, RankVector};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Minimum group size for subgroup estimates.
pub const MIN_GROUP_SIZE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rrr,
    RrrxAdditive,
    RrrxInteracted,
    CrrrCorr,
    CrrrRestrictedCorr,
    CrrrFullyRestricted,
    CrrrRegression,
    CrrrRegressionRestricted,
    CrrrReverseRestricted,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Rrr,
        Method::RrrxAdditive,
        Method::RrrxInteracted,
        Method::CrrrCorr,
        Method::CrrrRestrictedCorr,
        Method::CrrrFullyRestricted,
        Method::CrrrRegression,
        Method::CrrrRegressionRestricted,
        Method::CrrrReverseRestricted,
    ];

    /// The four CRRR estimators plus RRR and RRRX-A.
    pub const DEFAULT: [Method; 6] = [
        Method::CrrrCorr,
        Method::CrrrFullyRestricted,
        Method::CrrrRegression,
        Method::CrrrRegressionRestricted,
        Method::Rrr,
        Method::RrrxAdditive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rrr => "rrr",
            Method::RrrxAdditive => "rrrx_additive",
            Method::RrrxInteracted => "rrrx_interacted",
            Method::CrrrCorr => "crrr_corr",
            Method::CrrrRestrictedCorr => "crrr_restricted_corr",
            Method::CrrrFullyRestricted => "crrr_fully_restricted",
            Method::CrrrRegression => "crrr_regression",
            Method::CrrrRegressionRestricted => "crrr_regression_restricted",
            Method::CrrrReverseRestricted => "crrr_reverse_restricted",
        }
    }

    /// Whether the method needs conditional ranks (and hence DR fits).
    pub fn is_conditional(self) -> bool {
        !matches!(self, Method::Rrr | Method::RrrxAdditive | Method::RrrxInteracted)
    }

    pub fn supports_subgroups(self) -> bool {
        !matches!(self, Method::RrrxAdditive | Method::RrrxInteracted)
    }

    /// Estimate from `inputs`, optionally weighted.
    pub fn evaluate(self, inputs: &EstimatorInputs, weights: Option<&[f64]>) -> Result<f64> {
        match self {
            Method::Rrr => corr(&inputs.u_marg.values, &inputs.v_marg.values, weights),
            Method::RrrxAdditive => rrrx_kernel(
                &inputs.u_marg.values,
                &inputs.v_marg.values,
                &inputs.covariates,
                false,
                weights,
            ),
            Method::RrrxInteracted => rrrx_kernel(
                &inputs.u_marg.values,
                &inputs.v_marg.values,
                &inputs.covariates,
                true,
                weights,
            ),
            conditional => {
                let (u, v) = inputs.conditional()?;
                pair_kernel(conditional, &u.values, &v.values, weights)
            }
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .or(match key.as_str() {
                "rrrx_a" => Some(Method::RrrxAdditive),
                "rrrx_i" => Some(Method::RrrxInteracted),
                "crrr" => Some(Method::CrrrCorr),
                _ => None,
            })
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub method: Method,
    pub value: f64,
    pub n: usize,
    pub group: Option<String>,
}

impl SlopeEstimate {
    fn pooled(method: Method, value: f64, n: usize) -> Self {
        SlopeEstimate {
            method,
            value,
            n,
            group: None,
        }
    }
}

/// Everything the estimators consume: marginal ranks, conditional ranks when
/// DR was run, and the non-intercept covariates for the RRRX regressions.
#[derive(Debug, Clone)]
pub struct EstimatorInputs {
    pub u_marg: RankVector,
    pub v_marg: RankVector,
    pub u_cond: Option<RankVector>,
    pub v_cond: Option<RankVector>,
    pub covariates: Design,
}

impl EstimatorInputs {
    pub fn len(&self) -> usize {
        self.u_marg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_marg.is_empty()
    }

    pub fn conditional(&self) -> Result<(&RankVector, &RankVector)> {
        match (&self.u_cond, &self.v_cond) {
            (Some(u), Some(v)) => Ok((u, v)),
            _ => Err(CrrrError::Config(
                "conditional ranks were not computed for this run".into(),
            )),
        }
    }
}

fn check_pair(u: &[f64], v: &[f64], weights: Option<&[f64]>) -> Result<()> {
    if u.len() != v.len() {
        return Err(CrrrError::InputMismatch(format!(
            "rank vectors have lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != u.len() {
            return Err(CrrrError::InputMismatch(format!(
                "{} weights for {} observations",
                w.len(),
                u.len()
            )));
        }
    }
    Ok(())
}

#[inline]
fn weight(weights: Option<&[f64]>, i: usize) -> f64 {
    weights.map_or(1.0, |w| w[i])
}

fn weighted_mean(x: &[f64], weights: Option<&[f64]>) -> f64 {
    let (sum, total) = x.iter().enumerate().fold((0.0, 0.0), |(s, t), (i, v)| {
        let w = weight(weights, i);
        (s + w * v, t + w)
    });
    sum / total
}

/// Cross-products of deviations from `(cu, cv)`: `(Σω du dv, Σω du², Σω dv²)`.
fn cross_moments(u: &[f64], v: &[f64], cu: f64, cv: f64, weights: Option<&[f64]>) -> (f64, f64, f64) {
    let mut suv = 0.0;
    let mut suu = 0.0;
    let mut svv = 0.0;
    for i in 0..u.len() {
        let w = weight(weights, i);
        let du = u[i] - cu;
        let dv = v[i] - cv;
        suv += w * du * dv;
        suu += w * du * du;
        svv += w * dv * dv;
    }
    (suv, suu, svv)
}

fn corr(u: &[f64], v: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    check_pair(u, v, weights)?;
    if u.len() < 3 {
        return Err(CrrrError::InsufficientData(format!(
            "correlation needs at least 3 observations, got {}",
            u.len()
        )));
    }
    let (suv, suu, svv) = cross_moments(u, v, weighted_mean(u, weights), weighted_mean(v, weights), weights);
    if !(suu > 0.0 && svv > 0.0) {
        return Err(CrrrError::DegenerateData("rank vector has zero variance".into()));
    }
    Ok((suv / (suu.sqrt() * svv.sqrt())).clamp(-1.0, 1.0))
}

fn fully_restricted_kernel(u: &[f64], v: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    check_pair(u, v, weights)?;
    if u.is_empty() {
        return Err(CrrrError::InsufficientData("empty rank vectors".into()));
    }
    let total = weights.map_or(u.len() as f64, |w| w.iter().sum());
    let (suv, _, _) = cross_moments(u, v, 0.5, 0.5, weights);
    Ok(12.0 * suv / total)
}

fn restricted_corr_kernel(u: &[f64], v: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    check_pair(u, v, weights)?;
    let (suv, suu, svv) = cross_moments(u, v, 0.5, 0.5, weights);
    if !(suu > 0.0 && svv > 0.0) {
        return Err(CrrrError::DegenerateData("ranks are all exactly 0.5".into()));
    }
    Ok(suv / (suu.sqrt() * svv.sqrt()))
}

fn regression_kernel(u: &[f64], v: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    check_pair(u, v, weights)?;
    let vbar = weighted_mean(v, weights);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..u.len() {
        let w = weight(weights, i);
        let dv = v[i] - vbar;
        num += w * u[i] * dv;
        den += w * dv * dv;
    }
    if !(den > 0.0) {
        return Err(CrrrError::DegenerateData("regressor has zero variance".into()));
    }
    Ok(num / den)
}

fn restricted_regression_kernel(u: &[f64], v: &[f64], weights: Option<&[f64]>, reverse: bool) -> Result<f64> {
    check_pair(u, v, weights)?;
    let (suv, suu, svv) = cross_moments(u, v, 0.5, 0.5, weights);
    let den = if reverse { suu } else { svv };
    if !(den > 0.0) {
        return Err(CrrrError::DegenerateData("regressor is identically 0.5".into()));
    }
    Ok(suv / den)
}

/// The pairwise (u, v) estimators. `Rrr` here is the correlation of the
/// supplied pair.
fn pair_kernel(method: Method, u: &[f64], v: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    match method {
        Method::Rrr | Method::CrrrCorr => corr(u, v, weights),
        Method::CrrrRestrictedCorr => restricted_corr_kernel(u, v, weights),
        Method::CrrrFullyRestricted => fully_restricted_kernel(u, v, weights),
        Method::CrrrRegression => regression_kernel(u, v, weights),
        Method::CrrrRegressionRestricted => restricted_regression_kernel(u, v, weights, false),
        Method::CrrrReverseRestricted => restricted_regression_kernel(u, v, weights, true),
        Method::RrrxAdditive | Method::RrrxInteracted => Err(CrrrError::Config(format!(
            "{method} is not a pairwise estimator"
        ))),
    }
}

/// Weighted least squares; returns all coefficients.
fn least_squares(columns: &[Vec<f64>], response: &[f64], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let k = columns.len();
    let n = response.len();
    let mut xtx = DMatrix::<f64>::zeros(k, k);
    let mut xty = DVector::<f64>::zeros(k);
    for i in 0..n {
        let w = weight(weights, i);
        if w == 0.0 {
            continue;
        }
        for a in 0..k {
            let wa = w * columns[a][i];
            xty[a] += wa * response[i];
            for c in a..k {
                xtx[(a, c)] += wa * columns[c][i];
            }
        }
    }
    for a in 0..k {
        for c in 0..a {
            xtx[(a, c)] = xtx[(c, a)];
        }
    }
    // scale to unit diagonal before judging rank
    let diag: Vec<f64> = (0..k).map(|a| xtx[(a, a)].sqrt()).collect();
    if diag.iter().any(|d| !(*d > 0.0)) {
        return Err(CrrrError::DegenerateData("regression design has a zero column".into()));
    }
    let scaled = DMatrix::from_fn(k, k, |a, c| xtx[(a, c)] / (diag[a] * diag[c]));
    let singular = scaled.clone().svd(false, false).singular_values;
    let (smin, smax) = singular
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(*s), hi.max(*s)));
    if !(smin > 1e-10 * smax) {
        return Err(CrrrError::DegenerateData("regression design is rank deficient".into()));
    }
    let rhs = DVector::from_fn(k, |a, _| xty[a] / diag[a]);
    let chol = scaled
        .cholesky()
        .ok_or_else(|| CrrrError::DegenerateData("regression design is rank deficient".into()))?;
    let sol = chol.solve(&rhs);
    Ok((0..k).map(|a| sol[a] / diag[a]).collect())
}

fn rrrx_kernel(
    u: &[f64],
    v: &[f64],
    covariates: &Design,
    interacted: bool,
    weights: Option<&[f64]>,
) -> Result<f64> {
    check_pair(u, v, weights)?;
    if covariates.nrows() != u.len() {
        return Err(CrrrError::InputMismatch(format!(
            "covariate matrix has {} rows, ranks have {}",
            covariates.nrows(),
            u.len()
        )));
    }
    let n = u.len();
    let mut columns = vec![vec![1.0; n], v.to_vec()];
    for j in 0..covariates.ncols() {
        let x = covariates.column(j);
        if interacted {
            let center = weighted_mean(&x, weights);
            let centered: Vec<f64> = x.iter().map(|x| x - center).collect();
            columns.push(centered.iter().zip(v).map(|(c, v)| c * v).collect());
            columns.push(centered);
        } else {
            columns.push(x);
        }
    }
    Ok(least_squares(&columns, u, weights)?[1])
}

/// Sample correlation of the two rank vectors. On marginal ranks this is
/// the RRR slope (Spearman's rho); on conditional ranks the correlation-based
/// CRRR estimator.
pub fn pearson_slope_corr(u: &RankVector, v: &RankVector) -> Result<SlopeEstimate> {
    let method = match (u.kind, v.kind) {
        (RankKind::Marginal, RankKind::Marginal) => Method::Rrr,
        _ => Method::CrrrCorr,
    };
    let value = corr(&u.values, &v.values, None)?;
    Ok(SlopeEstimate::pooled(method, value, u.len()))
}

/// `12 · mean((u − ½)(v − ½))`. Not confined to [−1, 1].
pub fn fully_restricted(u: &RankVector, v: &RankVector) -> Result<SlopeEstimate> {
    let value = fully_restricted_kernel(&u.values, &v.values, None)?;
    Ok(SlopeEstimate::pooled(Method::CrrrFullyRestricted, value, u.len()))
}

/// Correlation with both means fixed at ½.
pub fn restricted_corr(u: &RankVector, v: &RankVector) -> Result<SlopeEstimate> {
    let value = restricted_corr_kernel(&u.values, &v.values, None)?;
    Ok(SlopeEstimate::pooled(Method::CrrrRestrictedCorr, value, u.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionSlopes {
    pub unrestricted: SlopeEstimate,
    pub restricted: SlopeEstimate,
    pub reverse_restricted: SlopeEstimate,
}

/// OLS slope of u on v, the same slope with both means fixed at ½, and the
/// restricted slope of v on u.
pub fn regression_slopes(u: &RankVector, v: &RankVector) -> Result<RegressionSlopes> {
    let n = u.len();
    Ok(RegressionSlopes {
        unrestricted: SlopeEstimate::pooled(
            Method::CrrrRegression,
            regression_kernel(&u.values, &v.values, None)?,
            n,
        ),
        restricted: SlopeEstimate::pooled(
            Method::CrrrRegressionRestricted,
            restricted_regression_kernel(&u.values, &v.values, None, false)?,
            n,
        ),
        reverse_restricted: SlopeEstimate::pooled(
            Method::CrrrReverseRestricted,
            restricted_regression_kernel(&u.values, &v.values, None, true)?,
            n,
        ),
    })
}

/// Coefficient on ṽ in the OLS regression of ũ on (1, ṽ, X). `covariates`
/// excludes the intercept.
pub fn rrrx_additive(u_marg: &RankVector, v_marg: &RankVector, covariates: &Design) -> Result<SlopeEstimate> {
    let value = rrrx_kernel(&u_marg.values, &v_marg.values, covariates, false, None)?;
    Ok(SlopeEstimate::pooled(Method::RrrxAdditive, value, u_marg.len()))
}

/// Coefficient on ṽ in the OLS regression of ũ on
/// (1, ṽ, X − X̄, (X − X̄)·ṽ), with each covariate centered at its sample mean.
pub fn rrrx_interacted(u_marg: &RankVector, v_marg: &RankVector, covariates: &Design) -> Result<SlopeEstimate> {
    let value = rrrx_kernel(&u_marg.values, &v_marg.values, covariates, true, None)?;
    Ok(SlopeEstimate::pooled(Method::RrrxInteracted, value, u_marg.len()))
}

/// Row indices of each group, keyed by label in sorted order.
pub fn group_rows(groups: &[String]) -> BTreeMap<&str, Vec<usize>> {
    let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        map.entry(g.as_str()).or_default().push(i);
    }
    map
}

/// Value of `method` within one subgroup. For `Rrr` this is the regression
/// slope of ũ on ṽ within the group: pooled marginal ranks are not uniform
/// inside a group, so slope and correlation differ there.
pub fn subgroup_value(
    method: Method,
    u: &[f64],
    v: &[f64],
    weights: Option<&[f64]>,
) -> Result<f64> {
    match method {
        Method::Rrr => regression_kernel(u, v, weights),
        Method::RrrxAdditive | Method::RrrxInteracted => Err(CrrrError::Config(format!(
            "{method} is not available by subgroup"
        ))),
        other => pair_kernel(other, u, v, weights),
    }
}

/// Applies `method` separately within each group label.
pub fn subgroup_crrr(
    u: &RankVector,
    v: &RankVector,
    groups: &[String],
    method: Method,
) -> Result<Vec<SlopeEstimate>> {
    if groups.len() != u.len() || v.len() != u.len() {
        return Err(CrrrError::InputMismatch(format!(
            "{} group labels for rank vectors of length {} and {}",
            groups.len(),
            u.len(),
            v.len()
        )));
    }
    if !method.supports_subgroups() {
        return Err(CrrrError::Config(format!("{method} is not available by subgroup")));
    }
    let mut out = Vec::new();
    for (label, rows) in group_rows(groups) {
        if rows.len() < MIN_GROUP_SIZE {
            return Err(CrrrError::GroupTooSmall {
                label: label.to_string(),
                size: rows.len(),
                min: MIN_GROUP_SIZE,
            });
        }
        let us: Vec<f64> = rows.iter().map(|&i| u.values[i]).collect();
        let vs: Vec<f64> = rows.iter().map(|&i| v.values[i]).collect();
        out.push(SlopeEstimate {
            method,
            value: subgroup_value(method, &us, &vs, None)?,
            n: rows.len(),
            group: Some(label.to_string()),
        });
    }
    Ok(out)
}

/// Between-group persistence: RRR minus CRRR.
pub fn between_group(rrr: &SlopeEstimate, crrr: &SlopeEstimate) -> Result<f64> {
    if rrr.n != crrr.n {
        return Err(CrrrError::InputMismatch(format!(
            "estimates come from samples of size {} and {}",
            rrr.n, crrr.n
        )));
    }
    Ok(rrr.value - crrr.value)
}
