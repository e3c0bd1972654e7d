//! Marginal (empirical CDF) and conditional (fitted CDF) ranks.

use crate::data::{Dataset, Variable};
use crate::dr::DrFit;
use crate::error::{CrrrError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankKind {
    Marginal,
    Conditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankVector {
    pub values: Vec<f64>,
    pub kind: RankKind,
    pub source: Variable,
    /// Covariates the conditional CDF was fit on; empty for marginal ranks.
    pub covariates: Vec<String>,
}

impl RankVector {
    pub fn new(values: Vec<f64>, kind: RankKind, source: Variable, covariates: Vec<String>) -> Self {
        RankVector {
            values,
            kind,
            source,
            covariates,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Order-independent FNV-1a hash of the covariate set, as hex. Empty for
    /// marginal ranks.
    pub fn covariate_signature(&self) -> String {
        covariate_signature(&self.covariates)
    }

    pub fn select(&self, rows: &[usize]) -> RankVector {
        RankVector {
            values: rows.iter().map(|&i| self.values[i]).collect(),
            kind: self.kind,
            source: self.source,
            covariates: self.covariates.clone(),
        }
    }
}

pub fn covariate_signature(names: &[String]) -> String {
    if names.is_empty() {
        return String::new();
    }
    let mut sorted: Vec<&str> = names.iter().map(String::as_str).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for name in sorted {
        for byte in name.bytes().chain(std::iter::once(0u8)) {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{hash:016x}")
}

/// Right-continuous empirical CDF at each observation: `#{j : vⱼ ≤ vᵢ} / n`.
/// Tied values all receive the largest rank of their block.
pub fn marginal_ranks(values: &[f64], source: Variable) -> RankVector {
    let ones = vec![1.0; values.len()];
    weighted_marginal_ranks(values, &ones, source)
}

/// Weighted empirical CDF at each observation: `Σⱼ ωⱼ 1(vⱼ ≤ vᵢ) / Σ ω`.
pub fn weighted_marginal_ranks(values: &[f64], weights: &[f64], source: Variable) -> RankVector {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    let mut cumulative = 0.0;
    while start < n {
        let v = values[order[start]];
        let mut end = start;
        while end < n && values[order[end]] == v {
            cumulative += weights[order[end]];
            end += 1;
        }
        let rank = cumulative / total;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    // the last block is exactly 1 regardless of summation order
    if let Some(&top) = order.last() {
        let v = values[top];
        for &i in order.iter().rev().take_while(|&&i| values[i] == v) {
            ranks[i] = 1.0;
        }
    }
    RankVector::new(ranks, RankKind::Marginal, source, Vec::new())
}

/// Plug-in conditional ranks `F̂(Rᵢ | Xᵢ)` for every observation.
pub fn conditional_ranks(fit: &DrFit, data: &Dataset) -> Result<RankVector> {
    if fit
        .coefs
        .iter()
        .filter_map(|c| c.coefficients())
        .any(|b| b.len() != data.dx())
    {
        return Err(CrrrError::InputMismatch(format!(
            "fit coefficients do not match the {} design columns",
            data.dx()
        )));
    }
    let values = data.values(fit.variable);
    let design = data.design();
    let ranks = (0..data.len())
        .map(|i| fit.predict_cdf(design.row(i), values[i]))
        .collect();
    Ok(RankVector::new(
        ranks,
        RankKind::Conditional,
        fit.variable,
        data.covariate_names().to_vec(),
    ))
}
