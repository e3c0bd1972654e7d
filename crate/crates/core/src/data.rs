//! Columnar dataset: outcome `y`, conditioning variable `w`, covariates with
//! a leading intercept, and optional string group labels.

use crate::error::{CrrrError, Result};
use serde::{Deserialize, Serialize};

/// Which of the two ranked variables a fit or rank vector refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Y,
    W,
}

/// Row-major `n × d` covariate matrix whose first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl Design {
    /// Builds a design from covariate columns, prepending a column of ones.
    pub fn with_intercept(n: usize, columns: &[Vec<f64>]) -> Result<Self> {
        if let Some(bad) = columns.iter().position(|c| c.len() != n) {
            return Err(CrrrError::InputMismatch(format!(
                "covariate column {bad} has {} rows, expected {n}",
                columns[bad].len()
            )));
        }
        let d = columns.len() + 1;
        let mut values = Vec::with_capacity(n * d);
        for i in 0..n {
            values.push(1.0);
            values.extend(columns.iter().map(|c| c[i]));
        }
        Ok(Design { n, d, values })
    }

    /// Wraps an arbitrary row-major matrix; no intercept is implied.
    pub fn from_row_major(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * d {
            return Err(CrrrError::InputMismatch(format!(
                "{} values cannot form a {n}×{d} matrix",
                values.len()
            )));
        }
        Ok(Design { n, d, values })
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.values[i * self.d + j]).collect()
    }

    pub fn has_intercept(&self) -> bool {
        self.d > 0 && (0..self.n).all(|i| self.values[i * self.d] == 1.0)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Design {
        let mut values = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        Design {
            n: rows.len(),
            d: self.d,
            values,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Design {
        let mut values = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            let row = self.row(i);
            values.extend(cols.iter().map(|&j| row[j]));
        }
        Design {
            n: self.n,
            d: cols.len(),
            values,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<f64>,
    w: Vec<f64>,
    design: Design,
    covariate_names: Vec<String>,
    groups: Option<Vec<String>>,
}

impl Dataset {
    /// Validates and assembles a dataset. `covariates` are the non-intercept
    /// columns; the intercept is added here.
    pub fn new(
        y: Vec<f64>,
        w: Vec<f64>,
        covariates: Vec<(String, Vec<f64>)>,
        groups: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = y.len();
        if w.len() != n {
            return Err(CrrrError::InputMismatch(format!(
                "y has {n} rows but w has {}",
                w.len()
            )));
        }
        if n < 2 {
            return Err(CrrrError::InsufficientData(format!("{n} observations")));
        }
        if let Some(g) = &groups {
            if g.len() != n {
                return Err(CrrrError::InputMismatch(format!(
                    "group column has {} rows, expected {n}",
                    g.len()
                )));
            }
        }
        for (label, col) in [("y", &y), ("w", &w)] {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(CrrrError::DegenerateData(format!("{label}[{i}] is not finite")));
            }
        }
        for (name, col) in &covariates {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(CrrrError::DegenerateData(format!("{name}[{i}] is not finite")));
            }
            if col.len() == n && col.iter().all(|&v| v == col[0]) {
                return Err(CrrrError::DegenerateData(format!(
                    "covariate {name:?} has zero variance"
                )));
            }
        }
        let (covariate_names, columns): (Vec<_>, Vec<_>) = covariates.into_iter().unzip();
        let design = Design::with_intercept(n, &columns)?;
        Ok(Dataset {
            y,
            w,
            design,
            covariate_names,
            groups,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn values(&self, variable: Variable) -> &[f64] {
        match variable {
            Variable::Y => &self.y,
            Variable::W => &self.w,
        }
    }

    /// Covariate matrix including the leading intercept column.
    pub fn design(&self) -> &Design {
        &self.design
    }

    /// Number of design columns, intercept included.
    pub fn dx(&self) -> usize {
        self.design.ncols()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn covariate(&self, name: &str) -> Option<Vec<f64>> {
        self.covariate_names
            .iter()
            .position(|c| c == name)
            .map(|j| self.design.column(j + 1))
    }

    /// Same rows, restricted to the named covariates (intercept kept).
    pub fn with_covariates(&self, names: &[String]) -> Result<Dataset> {
        let mut cols = vec![0];
        for name in names {
            let j = self
                .covariate_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| CrrrError::Config(format!("unknown covariate {name:?}")))?;
            cols.push(j + 1);
        }
        Ok(Dataset {
            y: self.y.clone(),
            w: self.w.clone(),
            design: self.design.select_columns(&cols),
            covariate_names: names.to_vec(),
            groups: self.groups.clone(),
        })
    }

    pub fn has_ties(&self, variable: Variable) -> bool {
        let mut v = self.values(variable).to_vec();
        v.sort_by(f64::total_cmp);
        v.windows(2).any(|p| p[0] == p[1])
    }
}
