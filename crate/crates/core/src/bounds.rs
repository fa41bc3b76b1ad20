//! Explicit constants and total-variation error bounds for the fitted laws.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::chain::ChainParams;
use crate::error::{Error, Result};
use crate::fit::{classify_regime, BinFit, Regime};

/// Every constant entering the error bounds, as functions of `(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    /// Mean number of revisits of 0 before the chain moves to 1.
    pub mu1: f64,
    /// Mean number of revisits of 1 before the chain moves to 0.
    pub mu2: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub k1: f64,
    pub k2: f64,
}

pub fn bound_constants(params: &ChainParams) -> BoundConstants {
    let (alpha, beta) = (params.alpha(), params.beta());
    let top = params.max_param();
    let p = params.stationary().p;
    let mu1 = (1.0 - alpha) / alpha;
    let mu2 = beta / (1.0 - beta);
    let sigma1_sq = (1.0 - alpha) / (alpha * alpha);
    let sigma2_sq = beta / ((1.0 - beta) * (1.0 - beta));
    let block = mu1 + mu2 + 2.0;
    let spare = (1.0 - top) * (1.0 - top);
    BoundConstants {
        mu1,
        mu2,
        sigma1_sq,
        sigma2_sq,
        c0: (beta - alpha).abs() * (5.0 + 43.0 * top) / spare,
        c1: 10.0 * top / (1.0 - top),
        c2: (1.0 - p) * (5.0 + 23.0 * top) / spare,
        k1: 5f64.sqrt() * (block / (1.0 - alpha).min(beta).min(0.5)).sqrt(),
        k2: 90.0 * (sigma1_sq + sigma2_sq) / block,
    }
}

impl BoundConstants {
    /// Smoothness bound `K1 / sqrt(x) + K2 / x` for `x > 0`.
    pub fn gamma(&self, x: f64) -> Result<f64> {
        gamma_fn(self, x)
    }

    /// `[2 K1 / sqrt(n), 4 K2 / n, base^⌊n/4⌋]`.
    pub fn bracket_terms(&self, n: usize, base: f64) -> [f64; 3] {
        let nf = n as f64;
        [
            2.0 * self.k1 / nf.sqrt(),
            4.0 * self.k2 / nf,
            base.powf((n / 4) as f64),
        ]
    }
}

pub fn gamma_fn(consts: &BoundConstants, x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "x",
            value: x,
            reason: "smoothness bound needs x > 0",
        });
    }
    Ok(consts.k1 / x.sqrt() + consts.k2 / x)
}

/// Evaluated right-hand side of one of the approximation bounds.
///
/// `bound_value = prefactor * (k1_term + k2_term + geometric_term) + epsilon_term`;
/// all five entries are recorded in `terms`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub regime: Regime,
    pub bound_value: f64,
    pub clipped_value: f64,
    pub terms: BTreeMap<String, f64>,
}

impl BoundReport {
    fn assemble(regime: Regime, prefactor: f64, bracket: [f64; 3], epsilon_term: f64) -> Self {
        let terms: BTreeMap<String, f64> = [
            ("prefactor", prefactor),
            ("k1_term", bracket[0]),
            ("k2_term", bracket[1]),
            ("geometric_term", bracket[2]),
            ("epsilon_term", epsilon_term),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let mut report = Self {
            regime,
            bound_value: 0.0,
            clipped_value: 0.0,
            terms,
        };
        report.bound_value = report.recompute();
        report.clipped_value = report.bound_value.min(1.0);
        report
    }

    pub fn term(&self, name: &str) -> f64 {
        self.terms.get(name).copied().unwrap_or(0.0)
    }

    /// Re-evaluates the bound from the recorded terms.
    pub fn recompute(&self) -> f64 {
        let bracket = self.term("k1_term") + self.term("k2_term") + self.term("geometric_term");
        self.term("prefactor") * bracket + self.term("epsilon_term")
    }
}

/// The negative-binomial bound `C0 [2K1/sqrt(n) + 4K2/n + beta^⌊n/4⌋]`,
/// evaluated regardless of the regime.
pub fn nb_bound_formula(params: &ChainParams, n: usize) -> Result<BoundReport> {
    let regime = classify_regime(params, n)?;
    let consts = bound_constants(params);
    Ok(BoundReport::assemble(
        regime,
        consts.c0,
        consts.bracket_terms(n, params.beta()),
        0.0,
    ))
}

/// Bound on `d_TV(L(S), NB(r, q))` for over- or equidispersed sums.
pub fn bound_nb(params: &ChainParams, n: usize) -> Result<BoundReport> {
    let report = nb_bound_formula(params, n)?;
    if report.regime == Regime::Underdispersed {
        return Err(Error::WrongRegime {
            operation: "negative-binomial bound",
            expected: "overdispersed or equidispersed",
            found: report.regime,
        });
    }
    Ok(report)
}

/// Bound on `d_TV(L(S), Bi(m, theta))` for under-dispersed sums.
pub fn bound_binomial(params: &ChainParams, n: usize, fit: &BinFit) -> Result<BoundReport> {
    let regime = classify_regime(params, n)?;
    if regime != Regime::Underdispersed {
        return Err(Error::WrongRegime {
            operation: "binomial bound",
            expected: "underdispersed",
            found: regime,
        });
    }
    let p = params.stationary().p;
    let np = n as f64 * p;
    let theta = fit.theta;
    if (fit.m as f64 * theta - np).abs() > 1e-9 * np || !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: theta,
            reason: "fit is inconsistent with the chain (m * theta != n p)",
        });
    }
    let consts = bound_constants(params);
    let spare = 1.0 - theta;
    let prefactor = (p - theta).abs() / spare * consts.c1
        + (params.beta() - params.alpha()).abs() / spare * consts.c2;
    let epsilon_term = theta * theta * fit.epsilon / (np * spare);
    Ok(BoundReport::assemble(
        regime,
        prefactor,
        consts.bracket_terms(n, params.max_param()),
        epsilon_term,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::fit_binomial;

    fn params(a: f64, b: f64) -> ChainParams {
        ChainParams::new(a, b).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn constants_examples() {
        let c = bound_constants(&params(0.1, 0.8));
        assert!(rel(c.mu1, 9.0) < 1e-14);
        assert!(rel(c.mu2, 4.0) < 1e-14);
        assert!(rel(c.sigma1_sq, 90.0) < 1e-14);
        assert!(rel(c.sigma2_sq, 20.0) < 1e-14);
        assert!(rel(c.k1, 150f64.sqrt()) < 1e-14);
        assert!(rel(c.k2, 660.0) < 1e-14);
        assert!(rel(c.c0, 689.5) < 1e-14);
        assert!(rel(c.c1, 40.0) < 1e-14);
        assert!(rel(c.c2, 390.0) < 1e-14);

        let c = bound_constants(&params(0.5, 0.5));
        assert_eq!(c.c0, 0.0);
        assert_eq!((c.c1, c.mu1, c.mu2), (10.0, 1.0, 1.0));

        let c = bound_constants(&params(0.3, 0.6));
        assert!(rel(c.mu1, 7.0 / 3.0) < 1e-14);
        assert!(rel(c.mu2, 1.5) < 1e-14);
        assert!((c.k1 - 7.6376).abs() < 1e-4);
        assert!((c.k2 - 177.857).abs() < 1e-3);
        assert!(rel(c.c1, 15.0) < 1e-14);
        assert!((c.c2 - 67.1429).abs() < 1e-4);
    }

    #[test]
    fn gamma_examples() {
        let c = bound_constants(&params(0.1, 0.8));
        assert!((c.gamma(100.0).unwrap() - 7.82474).abs() < 1e-5);
        let mut last = f64::INFINITY;
        for x in [1.0, 10.0, 1e3, 1e6, 1e14] {
            let g = c.gamma(x).unwrap();
            assert!(g < last);
            last = g;
        }
        assert!(last < 1e-5);
        let zero = BoundConstants {
            k1: 0.0,
            k2: 0.0,
            ..c
        };
        assert_eq!(zero.gamma(3.0).unwrap(), 0.0);
        assert!(c.gamma(0.0).is_err());
        assert!(c.gamma(-1.0).is_err());
    }

    #[test]
    fn nb_bound_example() {
        let r = bound_nb(&params(0.1, 0.8), 100).unwrap();
        assert!((r.term("k1_term") - 2.44949).abs() < 1e-5);
        assert!((r.term("k2_term") - 26.4).abs() < 1e-12);
        assert!((r.term("geometric_term") - 0.0037779).abs() < 1e-7);
        assert!((r.bound_value - 689.5 * 28.8533).abs() < 1.0);
        assert_eq!(r.clipped_value, 1.0);
        assert!(matches!(
            bound_nb(&params(0.3, 0.6), 2),
            Err(Error::WrongRegime { .. })
        ));
    }

    #[test]
    fn nb_formula_vanishes_on_the_diagonal() {
        let r = nb_bound_formula(&params(0.4, 0.4), 50).unwrap();
        assert_eq!(r.bound_value, 0.0);
        assert_eq!(r.regime, Regime::Underdispersed);
    }

    #[test]
    fn nb_bound_decays_like_inverse_sqrt() {
        let p = params(0.3, 0.6);
        let c = bound_constants(&p);
        let big = bound_nb(&p, 400_000_000).unwrap().bound_value;
        let lead = 2.0 * c.c0 * c.k1 / 20_000.0;
        assert!(rel(big, lead) < 0.01);
    }

    #[test]
    fn nb_breakdown_arithmetic() {
        let p = params(0.2, 0.7);
        let c = bound_constants(&p);
        for n in [16, 17, 100, 1001, 50_000] {
            let r = bound_nb(&p, n).unwrap();
            let nf = n as f64;
            let residual = r.bound_value
                - 2.0 * c.c0 * c.k1 / nf.sqrt()
                - c.c0 * p.beta().powf((n / 4) as f64);
            assert!(rel(nf * residual, 4.0 * c.c0 * c.k2) < 1e-9, "n={n}");
            assert!(rel(r.recompute(), r.bound_value) < 1e-12);
        }
    }

    #[test]
    fn bounds_strictly_decrease_from_sixteen() {
        for (a, b) in [(0.1, 0.8), (0.3, 0.6), (0.45, 0.5)] {
            let p = params(a, b);
            let c = bound_constants(&p);
            let mut prev_nb = f64::INFINITY;
            let mut prev_bracket = f64::INFINITY;
            for n in 16..600 {
                let v = nb_bound_formula(&p, n).unwrap().bound_value;
                assert!(v < prev_nb, "({a},{b}) n={n}");
                prev_nb = v;
                let bracket: f64 = c.bracket_terms(n, p.max_param()).iter().sum();
                assert!(bracket < prev_bracket);
                prev_bracket = bracket;
            }
        }
    }

    #[test]
    fn binomial_bound_examples() {
        let p = params(0.4, 0.4);
        let fit = fit_binomial(&p, 10).unwrap();
        let r = bound_binomial(&p, 10, &fit).unwrap();
        assert_eq!(r.bound_value, 0.0);

        let p = params(0.3, 0.6);
        let fit = fit_binomial(&p, 2).unwrap();
        let r = bound_binomial(&p, 2, &fit).unwrap();
        assert!((r.term("epsilon_term") - 0.044_444_444_444_444).abs() < 1e-13);
        assert!((r.term("prefactor") - 31.2).abs() < 1e-12);
        // n < 4: geometric exponent is 0.
        assert_eq!(r.term("geometric_term"), 1.0);
        assert!(rel(r.recompute(), r.bound_value) < 1e-12);
    }

    #[test]
    fn binomial_bound_rejects_bad_inputs() {
        let p = params(0.1, 0.8);
        let fit = BinFit {
            m_tilde: 10.0,
            m: 10,
            theta: 0.3,
            epsilon: 0.0,
        };
        assert!(matches!(
            bound_binomial(&p, 100, &fit),
            Err(Error::WrongRegime { .. })
        ));
        let p = params(0.3, 0.6);
        assert!(bound_binomial(&p, 2, &fit).is_err());
    }

    #[test]
    fn binomial_bound_is_zero_on_the_whole_diagonal() {
        for k in 1..10 {
            let a = k as f64 / 10.0;
            for n in [1, 5, 64, 1000] {
                let fit = fit_binomial(&params(a, a), n).unwrap();
                assert_eq!(
                    bound_binomial(&params(a, a), n, &fit).unwrap().bound_value,
                    0.0
                );
            }
        }
    }
}
