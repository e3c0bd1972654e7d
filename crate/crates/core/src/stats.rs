//! Small numeric helpers shared across modules.

/// Slack when turning `order · n` into an index, so orders generated by
/// repeated addition (e.g. 0.25 → 25.000000000000004) land on the intended
/// order statistic.
const ORDER_SLACK: f64 = 1e-9;

/// 1-based index of the order statistic used as the `order` quantile of `n`
/// sorted values: `ceil(order · n)`, clamped to `[1, n]`.
pub fn quantile_index(order: f64, n: usize) -> usize {
    let k = (order * n as f64 - ORDER_SLACK).ceil();
    (k.max(1.0) as usize).min(n)
}

/// Empirical quantile of already sorted data (inverse of the right-continuous ECDF).
pub fn sorted_quantile(sorted: &[f64], order: f64) -> f64 {
    sorted[quantile_index(order, sorted.len()) - 1]
}

/// Empirical quantile; sorts a copy.
pub fn quantile(values: &[f64], order: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted_quantile(&sorted, order)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divides by n).
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_rule_on_integers() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(sorted_quantile(&v, 0.25), 25.0);
        assert_eq!(sorted_quantile(&v, 0.251), 26.0);
        assert_eq!(sorted_quantile(&v, 0.0), 1.0);
        assert_eq!(sorted_quantile(&v, 1.0), 100.0);
        assert_eq!(sorted_quantile(&v, 0.01 + 0.24), 25.0);
    }
}
