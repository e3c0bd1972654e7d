use crate::error::{CrrrError, Result};
use crate::stats::quantile_index;
use serde::{Deserialize, Serialize};

/// How the threshold grid is laid out over a variable's observed values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    /// Empirical quantiles at `n_points` equally spaced orders in `[lo_order, hi_order]`.
    Quantiles {
        n_points: usize,
        lo_order: f64,
        hi_order: f64,
    },
    /// Every distinct observed value is a threshold.
    AllObserved,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Quantiles {
            n_points: 200,
            lo_order: 0.01,
            hi_order: 0.99,
        }
    }
}

impl GridSpec {
    pub fn build(&self, values: &[f64]) -> Result<ThresholdGrid> {
        match *self {
            GridSpec::Quantiles {
                n_points,
                lo_order,
                hi_order,
            } => build_grid(values, n_points, lo_order, hi_order),
            GridSpec::AllObserved => ThresholdGrid::all_observed(values),
        }
    }
}

/// Strictly increasing cut points together with the quantile order each one
/// was taken at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    points: Vec<f64>,
    orders: Vec<f64>,
}

impl ThresholdGrid {
    pub fn new(points: Vec<f64>, orders: Vec<f64>) -> Result<Self> {
        if points.len() != orders.len() {
            return Err(CrrrError::InputMismatch(
                "grid points and orders differ in length".into(),
            ));
        }
        if points.len() < 2 {
            return Err(CrrrError::DegenerateData(format!(
                "threshold grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.windows(2).any(|p| p[0] >= p[1]) {
            return Err(CrrrError::DegenerateData(
                "grid points must be strictly increasing".into(),
            ));
        }
        Ok(ThresholdGrid { points, orders })
    }

    /// Grid made of every distinct value; orders are the ECDF at each value.
    pub fn all_observed(values: &[f64]) -> Result<Self> {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut points = Vec::new();
        let mut orders = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            if sorted.get(i + 1) != Some(&v) {
                points.push(v);
                orders.push((i + 1) as f64 / n);
            }
        }
        ThresholdGrid::new(points, orders)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.points[0]
    }

    pub fn upper(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

/// Empirical quantiles of `values` at `n_points` equally spaced orders from
/// `lo_order` to `hi_order`, using the `ceil(order · n)`-th order statistic.
/// Repeated quantiles are collapsed to one point.
pub fn build_grid(
    values: &[f64],
    n_points: usize,
    lo_order: f64,
    hi_order: f64,
) -> Result<ThresholdGrid> {
    if !(0.0 < lo_order && lo_order < hi_order && hi_order < 1.0) {
        return Err(CrrrError::Config(format!(
            "grid orders must satisfy 0 < lo < hi < 1, got [{lo_order}, {hi_order}]"
        )));
    }
    if n_points < 2 {
        return Err(CrrrError::Config(format!(
            "grid needs at least 2 points, got {n_points}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let distinct = 1 + sorted.windows(2).filter(|p| p[0] != p[1]).count();
    if values.is_empty() || distinct < n_points {
        return Err(CrrrError::DegenerateData(format!(
            "{distinct} distinct values cannot support a {n_points}-point grid"
        )));
    }
    let step = (hi_order - lo_order) / (n_points - 1) as f64;
    let mut points: Vec<f64> = Vec::with_capacity(n_points);
    let mut orders = Vec::with_capacity(n_points);
    for j in 0..n_points {
        let order = if j + 1 == n_points {
            hi_order
        } else {
            lo_order + step * j as f64
        };
        let point = sorted[quantile_index(order, sorted.len()) - 1];
        if points.last() != Some(&point) {
            points.push(point);
            orders.push(order);
        }
    }
    ThresholdGrid::new(points, orders)
}
