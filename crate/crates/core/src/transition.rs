//! K×K transition matrices of rank pairs, reported as percentage-point
//! deviations from the independence share 1/K².

use crate::error::{CrrrError, Result};
use crate::ranks::{RankKind, RankVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub k: usize,
    pub kind: RankKind,
    pub n: usize,
    /// `counts[row][col]`: rows index the bin of `v` (origin), columns the bin of `u`.
    pub counts: Vec<Vec<u64>>,
    /// `100 · (counts[row][col] / n − 1/k²)`.
    pub deviations: Vec<Vec<f64>>,
    pub row_shares: Vec<f64>,
    pub col_shares: Vec<f64>,
}

/// Bin in `0..k` for a rank: `⌈k·rank⌉ − 1` clamped to range, so a rank on
/// a bin edge falls in the lower bin.
pub fn rank_bin(rank: f64, k: usize) -> usize {
    let raw = (k as f64 * rank - 1e-12).ceil();
    (raw.max(1.0) as usize).min(k) - 1
}

pub fn transition_matrix(u: &RankVector, v: &RankVector, k: usize) -> Result<TransitionMatrix> {
    if u.len() != v.len() {
        return Err(CrrrError::InputMismatch(format!(
            "rank vectors have lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    if k < 2 {
        return Err(CrrrError::Config(format!("need at least 2 bins, got {k}")));
    }
    let n = u.len();
    if n < k * k {
        return Err(CrrrError::InsufficientData(format!(
            "{n} observations for a {k}×{k} matrix (need {})",
            k * k
        )));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&ru, &rv) in u.values.iter().zip(&v.values) {
        counts[rank_bin(rv, k)][rank_bin(ru, k)] += 1;
    }
    let nf = n as f64;
    let cells = (k * k) as f64;
    // 100·(c/n − 1/k²) written over a common denominator; the numerator is an
    // exact integer for any realistic n
    let deviations = counts
        .iter()
        .map(|row| {
            row.iter()
                .map(|&c| 100.0 * (c as f64 * cells - nf) / (nf * cells))
                .collect()
        })
        .collect();
    let row_shares = counts.iter().map(|row| row.iter().sum::<u64>() as f64 / nf).collect();
    let col_shares = (0..k)
        .map(|j| counts.iter().map(|row| row[j]).sum::<u64>() as f64 / nf)
        .collect();
    let kind = if u.kind == RankKind::Marginal && v.kind == RankKind::Marginal {
        RankKind::Marginal
    } else {
        RankKind::Conditional
    };
    Ok(TransitionMatrix {
        k,
        kind,
        n,
        counts,
        deviations,
        row_shares,
        col_shares,
    })
}

impl TransitionMatrix {
    /// Deviations as CSV: a header of column bins, then one line per row bin.
    pub fn deviations_csv(&self) -> String {
        let mut out = String::from("bin");
        for j in 1..=self.k {
            out.push_str(&format!(",u{j}"));
        }
        out.push('\n');
        for (i, row) in self.deviations.iter().enumerate() {
            out.push_str(&format!("v{}", i + 1));
            for d in row {
                out.push_str(&format!(",{d}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Variable;

    fn ranks(values: Vec<f64>) -> RankVector {
        RankVector::new(values, RankKind::Marginal, Variable::Y, vec![])
    }

    #[test]
    fn edges_go_to_lower_bin() {
        assert_eq!(rank_bin(0.1, 10), 0);
        assert_eq!(rank_bin(0.1000001, 10), 1);
        assert_eq!(rank_bin(1.0, 10), 9);
        assert_eq!(rank_bin(0.0, 10), 0);
        assert_eq!(rank_bin(0.3, 10), 2);
    }

    #[test]
    fn perfect_persistence() {
        let n = 1000;
        let r: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let m = transition_matrix(&ranks(r.clone()), &ranks(r), 10).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let expected = if i == j { 9.0 } else { -1.0 };
                assert_eq!(m.deviations[i][j], expected);
            }
        }
        assert!(m.row_shares.iter().all(|s| (s - 0.1).abs() < 1e-15));
        assert!(m.deviations_csv().starts_with("bin,u1,"));
    }

    #[test]
    fn too_few_observations() {
        let r = ranks(vec![0.5; 50]);
        assert!(matches!(
            transition_matrix(&r, &r, 10),
            Err(CrrrError::InsufficientData(_))
        ));
    }
}
