//! Link functions for binary-response distribution regression.
//!
//! Besides the CDF and density, each link exposes the first two derivatives
//! of `t ↦ log F(t)`, which is all the Newton solver needs. These are computed
//! in closed form so the log-likelihood stays finite far into the tails.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Below this argument the normal CDF is evaluated through its asymptotic
/// expansion instead of `erfc`.
const NORMAL_TAIL_CUTOFF: f64 = -30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    /// Standard logistic distribution (logit).
    Logistic,
    /// Standard normal distribution (probit).
    Gaussian,
}

/// `log F(t)` together with its first and second derivatives in `t`.
#[derive(Debug, Clone, Copy)]
pub struct LogCdfTerms {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Link {
    pub fn name(self) -> &'static str {
        match self {
            Link::Logistic => "logit",
            Link::Gaussian => "probit",
        }
    }

    pub fn cdf(self, t: f64) -> f64 {
        match self {
            Link::Logistic => logistic(t),
            Link::Gaussian => normal_cdf(t),
        }
    }

    pub fn pdf(self, t: f64) -> f64 {
        match self {
            Link::Logistic => {
                let p = logistic(t);
                p * logistic(-t)
            }
            Link::Gaussian => normal_pdf(t),
        }
    }

    pub fn log_cdf(self, t: f64) -> f64 {
        self.log_cdf_terms(t).value
    }

    pub fn log_cdf_terms(self, t: f64) -> LogCdfTerms {
        match self {
            Link::Logistic => {
                // log Λ(t) = -log(1 + e^{-t}); d/dt = Λ(-t); d²/dt² = -Λ(t)Λ(-t)
                let (value, p, q) = if t >= 0.0 {
                    let e = (-t).exp();
                    (-e.ln_1p(), 1.0 / (1.0 + e), e / (1.0 + e))
                } else {
                    let e = t.exp();
                    (t - e.ln_1p(), e / (1.0 + e), 1.0 / (1.0 + e))
                };
                LogCdfTerms {
                    value,
                    d1: q,
                    d2: -p * q,
                }
            }
            Link::Gaussian => {
                let (value, mills) = if t > NORMAL_TAIL_CUTOFF {
                    let cdf = normal_cdf(t);
                    (cdf.ln(), normal_pdf(t) / cdf)
                } else {
                    // Φ(t) ≈ φ(t)/(-t) · s(t) with s the asymptotic series.
                    let t2 = t * t;
                    let series = 1.0 - 1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2);
                    let value = -0.5 * t2 - LN_SQRT_2PI - (-t).ln() + series.ln();
                    (value, -t / series)
                };
                LogCdfTerms {
                    value,
                    d1: mills,
                    d2: -mills * (mills + t),
                }
            }
        }
    }

    pub fn quantile(self, p: f64) -> f64 {
        match self {
            Link::Logistic => (p / (1.0 - p)).ln(),
            Link::Gaussian => normal_quantile(p),
        }
    }
}

impl std::str::FromStr for Link {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "logit" | "logistic" => Ok(Link::Logistic),
            "probit" | "gaussian" | "normal" => Ok(Link::Gaussian),
            other => Err(format!("unknown link {other:?} (expected logit or probit)")),
        }
    }
}

pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t * FRAC_1_SQRT_2)
}

pub fn normal_pdf(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

/// Inverse of the standard normal CDF on (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    // one Newton step polishes the inverse to near machine precision
    let d = normal_pdf(x);
    if d > 0.0 {
        x - (normal_cdf(x) - p) / d
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINKS: [Link; 2] = [Link::Logistic, Link::Gaussian];

    #[test]
    fn pdf_matches_cdf_finite_differences() {
        let h = 1e-5;
        for link in LINKS {
            for &t in &[-8.0, -2.5, -0.3, 0.0, 0.7, 3.0, 9.0] {
                let fd = (link.cdf(t + h) - link.cdf(t - h)) / (2.0 * h);
                let pdf = link.pdf(t);
                assert!((fd - pdf).abs() <= 1e-7 * pdf.max(1e-3), "{link:?} t={t}");
            }
        }
    }

    #[test]
    fn cdf_is_strictly_increasing_in_unit_interval() {
        for link in LINKS {
            let mut prev = 0.0;
            // Φ rounds to 1 in double precision just above t = 8
            for i in -300..=160 {
                let t = i as f64 * 0.05;
                let p = link.cdf(t);
                assert!(p > prev && p < 1.0, "{link:?} t={t}");
                prev = p;
            }
        }
    }

    #[test]
    fn log_cdf_derivatives_match_finite_differences() {
        let h = 1e-5;
        for link in LINKS {
            for &t in &[-45.0, -31.0, -29.0, -6.0, -1.0, 0.0, 1.5, 7.0, 20.0] {
                let terms = link.log_cdf_terms(t);
                let lo = link.log_cdf_terms(t - h);
                let hi = link.log_cdf_terms(t + h);
                let d1 = (hi.value - lo.value) / (2.0 * h);
                let d2 = (hi.d1 - lo.d1) / (2.0 * h);
                assert!((d1 - terms.d1).abs() <= 1e-5 * terms.d1.abs().max(1e-6), "{link:?} d1 t={t}");
                assert!((d2 - terms.d2).abs() <= 1e-4 * terms.d2.abs().max(1e-6), "{link:?} d2 t={t}");
            }
        }
    }

    #[test]
    fn normal_tail_expansion_is_continuous_at_cutoff() {
        let below = Link::Gaussian.log_cdf_terms(NORMAL_TAIL_CUTOFF - 1e-9);
        let above = Link::Gaussian.log_cdf_terms(NORMAL_TAIL_CUTOFF + 1e-9);
        assert!((below.value - above.value).abs() < 1e-8 * above.value.abs());
        assert!((below.d1 - above.d1).abs() < 1e-8 * above.d1);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for link in LINKS {
            for &p in &[1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
                let err = (link.cdf(link.quantile(p)) - p).abs();
                assert!(err < 1e-12 * p.max(1e-3), "{link:?} p={p} err={err:e}");
            }
        }
    }
}
