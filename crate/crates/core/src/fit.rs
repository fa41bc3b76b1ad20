//! Moment-matched approximating laws and reference mass functions.
//!
//! Over-dispersed sums (`Var S >= E S`) are matched by a negative binomial
//! with the same mean and variance; under-dispersed ones by a binomial whose
//! index is the integer part of the matched real index.

use std::fmt;

use serde::Serialize;

use crate::chain::{exact_pmf, moments_closed_form, ChainParams, MomentSummary, Start};
use crate::error::{Error, Result};
use crate::pmf::{tv_distance, Pmf};
use crate::special::{binomial_mass, negative_binomial_mass, poisson_mass};

/// Relative tolerance on `|Var S - E S| / E S` below which the sum is treated
/// as equidispersed (Poisson limit of the negative binomial).
pub const EQUIDISPERSION_TOLERANCE: f64 = 1e-12;

/// Automatic truncation stops once this much mass has been accumulated.
pub const TRUNCATION_MASS: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Overdispersed,
    Underdispersed,
    Equidispersed,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Overdispersed => "overdispersed",
            Regime::Underdispersed => "underdispersed",
            Regime::Equidispersed => "equidispersed",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn regime_of(mean: f64, excess: f64) -> Regime {
    if excess.abs() <= EQUIDISPERSION_TOLERANCE * mean {
        Regime::Equidispersed
    } else if excess > 0.0 {
        Regime::Overdispersed
    } else {
        Regime::Underdispersed
    }
}

/// Classifies the stationary sum of length `n` by comparing `Var S` to `E S`.
///
/// Over-dispersion is only possible when `beta > alpha`; a violation of that
/// is reported as [`Error::Consistency`].
pub fn classify_regime(params: &ChainParams, n: usize) -> Result<Regime> {
    let moments = moments_closed_form(params, n)?;
    let regime = regime_of(moments.mean, moments.excess);
    if regime != Regime::Underdispersed && params.beta() <= params.alpha() {
        return Err(Error::Consistency(format!(
            "{regime} sum with beta = {} <= alpha = {} (n = {n})",
            params.beta(),
            params.alpha()
        )));
    }
    Ok(regime)
}

/// Negative-binomial match `NB(r, q)`; `poisson_limit` stands for `NB(∞, 1)`,
/// the Poisson law with mean `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NbFit {
    pub r: f64,
    pub q: f64,
    pub poisson_limit: bool,
    pub lambda: f64,
}

impl NbFit {
    /// Matches a mean and variance with `variance >= mean` (within tolerance).
    pub fn from_moments(mean: f64, variance: f64) -> Result<Self> {
        Self::from_excess(mean, variance, variance - mean)
    }

    fn from_excess(mean: f64, variance: f64, excess: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::InvalidParameter {
                name: "mean",
                value: mean,
                reason: "must be positive and finite",
            });
        }
        match regime_of(mean, excess) {
            Regime::Underdispersed => Err(Error::WrongRegime {
                operation: "negative-binomial fit",
                expected: "overdispersed or equidispersed",
                found: Regime::Underdispersed,
            }),
            Regime::Equidispersed => Ok(Self {
                r: f64::INFINITY,
                q: 1.0,
                poisson_limit: true,
                lambda: mean,
            }),
            Regime::Overdispersed => Ok(Self {
                r: mean * mean / excess,
                q: mean / variance,
                poisson_limit: false,
                lambda: mean,
            }),
        }
    }

    /// Truncated mass function of the fitted law.
    pub fn reference_pmf(&self, truncation: Option<usize>) -> Result<Pmf> {
        if self.poisson_limit {
            poisson_pmf(self.lambda, truncation)
        } else {
            nb_pmf(self.r, self.q, truncation)
        }
    }
}

pub fn fit_negative_binomial(params: &ChainParams, n: usize) -> Result<NbFit> {
    classify_regime(params, n)?;
    let m = moments_closed_form(params, n)?;
    NbFit::from_excess(m.mean, m.variance, m.excess)
}

/// Binomial match `Bi(m, theta)` with `m = ⌊m_tilde⌋` and `epsilon = m_tilde - m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinFit {
    pub m_tilde: f64,
    pub m: u64,
    pub theta: f64,
    pub epsilon: f64,
}

impl BinFit {
    pub fn reference_pmf(&self, truncation: Option<usize>) -> Result<Pmf> {
        binomial_pmf(self.m, self.theta, truncation)
    }
}

pub fn fit_binomial(params: &ChainParams, n: usize) -> Result<BinFit> {
    let regime = classify_regime(params, n)?;
    if regime != Regime::Underdispersed {
        return Err(Error::WrongRegime {
            operation: "binomial fit",
            expected: "underdispersed",
            found: regime,
        });
    }
    let moments = moments_closed_form(params, n)?;
    let p = params.stationary().p;
    binomial_from_moments(n, p, &moments)
}

fn binomial_from_moments(n: usize, p: f64, moments: &MomentSummary) -> Result<BinFit> {
    let nf = n as f64;
    // m_tilde = (E S)^2 / (E S - Var S) = n / (1 - c / (n p^2)), where
    // c = Var S - E S + n p^2 vanishes identically when alpha = beta; this
    // form returns m_tilde = n exactly in that case.
    let correction = moments.excess + nf * p * p;
    let m_tilde = nf / (1.0 - correction / (nf * p * p));
    let m = m_tilde.floor();
    let theta = p * (nf / m);
    if !(m >= 1.0 && theta < 1.0 && m_tilde.is_finite()) {
        return Err(Error::DegenerateFit {
            m_tilde,
            m: m.max(0.0) as u64,
            theta,
        });
    }
    Ok(BinFit {
        m_tilde,
        m: m as u64,
        theta,
        epsilon: m_tilde - m,
    })
}

/// Exact distance from the stationary sum to its fitted law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactDistance {
    pub regime: Regime,
    /// Total variation over the stored supports.
    pub tv: f64,
    /// Mass of the reference law beyond its truncation; the true distance is
    /// within half of this of `tv`.
    pub tail: f64,
}

/// `d_TV(L(S), fitted law)` by the exact recursion, `O(n^2)`.
///
/// Fails with [`Error::DegenerateFit`] when the binomial match is unusable.
pub fn exact_tv_to_fit(params: &ChainParams, n: usize) -> Result<ExactDistance> {
    let regime = classify_regime(params, n)?;
    let law = exact_pmf(params, n, Start::Stationary)?;
    let reference = match regime {
        Regime::Underdispersed => fit_binomial(params, n)?.reference_pmf(None)?,
        _ => fit_negative_binomial(params, n)?.reference_pmf(None)?,
    };
    Ok(ExactDistance {
        regime,
        tv: tv_distance(&law, &reference),
        tail: reference.tail(),
    })
}

fn default_cap(mean: f64, variance: f64) -> usize {
    (10.0 * (mean + 10.0 * variance.sqrt())).ceil().max(1.0) as usize
}

/// Collects `k = 0, 1, ...` from a mass sequence, either up to a fixed
/// index or until [`TRUNCATION_MASS`] is reached (bounded by `cap`).
fn collect_mass(
    truncation: Option<usize>,
    cap: usize,
    mass_at: impl Fn(f64) -> f64,
) -> Result<Pmf> {
    let mut mass = Vec::new();
    match truncation {
        Some(last) => mass.extend((0..=last).map(|k| mass_at(k as f64))),
        None => {
            let mut total = 0.0;
            for k in 0..=cap {
                let v = mass_at(k as f64);
                mass.push(v);
                total += v;
                if total >= TRUNCATION_MASS {
                    break;
                }
            }
        }
    }
    Pmf::truncated(mass)
}

/// `NB(r, q)`: `P(k) = Γ(r + k) / (Γ(r) k!) q^r (1 - q)^k`.
///
/// `q = 1` gives the point mass at zero. With `truncation = None` the support
/// is extended until all but `1e-12` of the mass is covered, capped at
/// `10 (mean + 10 sd)`.
pub fn nb_pmf(r: f64, q: f64, truncation: Option<usize>) -> Result<Pmf> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            value: r,
            reason: "must be positive and finite",
        });
    }
    if !(q.is_finite() && q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "q",
            value: q,
            reason: "must lie in (0, 1]",
        });
    }
    if q == 1.0 {
        return Pmf::truncated(point_mass_vec(truncation.unwrap_or(0)));
    }
    let mean = r * (1.0 - q) / q;
    let variance = mean / q;
    collect_mass(truncation, default_cap(mean, variance), |k| {
        negative_binomial_mass(k, r, q)
    })
}

/// `Bi(m, theta)`; the support is stored up to `max(m, truncation)`.
pub fn binomial_pmf(m: u64, theta: f64, truncation: Option<usize>) -> Result<Pmf> {
    if !(theta.is_finite() && theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: theta,
            reason: "must lie strictly between 0 and 1",
        });
    }
    if m == 0 || m > crate::chain::MAX_EXACT_N as u64 * 100 {
        return Err(Error::InvalidParameter {
            name: "m",
            value: m as f64,
            reason: "binomial index out of supported range",
        });
    }
    let last = truncation.map_or(m as usize, |t| t.max(m as usize));
    let fail = 1.0 - theta;
    let mass = (0..=last)
        .map(|k| binomial_mass(k as f64, m as f64, theta, fail))
        .collect();
    Pmf::truncated(mass)
}

/// Poisson law with mean `lambda`; `lambda = 0` is the point mass at zero.
pub fn poisson_pmf(lambda: f64, truncation: Option<usize>) -> Result<Pmf> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "must be non-negative and finite",
        });
    }
    if lambda == 0.0 {
        return Pmf::truncated(point_mass_vec(truncation.unwrap_or(0)));
    }
    collect_mass(truncation, default_cap(lambda, lambda), |k| {
        poisson_mass(k, lambda)
    })
}

fn point_mass_vec(last: usize) -> Vec<f64> {
    let mut v = vec![0.0; last + 1];
    v[0] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::moments_from_pmf;
    use statrs::distribution::{Binomial, Discrete, NegativeBinomial, Poisson};

    fn params(a: f64, b: f64) -> ChainParams {
        ChainParams::new(a, b).unwrap()
    }

    #[test]
    fn regime_examples() {
        assert_eq!(
            classify_regime(&params(0.4, 0.4), 10).unwrap(),
            Regime::Underdispersed
        );
        assert_eq!(
            classify_regime(&params(0.1, 0.8), 100).unwrap(),
            Regime::Overdispersed
        );
        assert_eq!(
            classify_regime(&params(0.3, 0.6), 2).unwrap(),
            Regime::Underdispersed
        );
    }

    #[test]
    fn nb_fit_examples() {
        let fit = fit_negative_binomial(&params(0.1, 0.8), 100).unwrap();
        assert!(!fit.poisson_limit);
        // Exact rational evaluation of E S^2 / (Var S - E S) and E S / Var S.
        assert!((fit.r - 12.465373961218836).abs() < 1e-10, "{}", fit.r);
        assert!((fit.q - 0.2721774193548387).abs() < 1e-13, "{}", fit.q);
        assert!((fit.r - 12.46536).abs() < 2e-5);

        let fit = NbFit::from_moments(4.2, 4.2).unwrap();
        assert!(fit.poisson_limit);
        assert_eq!(fit.lambda, 4.2);
        assert!(fit.r.is_infinite());

        assert!(matches!(
            fit_negative_binomial(&params(0.3, 0.6), 2),
            Err(Error::WrongRegime { .. })
        ));
    }

    #[test]
    fn binomial_fit_examples() {
        let fit = fit_binomial(&params(0.3, 0.6), 2).unwrap();
        assert!((fit.m_tilde - 10.0 / 3.0).abs() < 1e-13);
        assert_eq!(fit.m, 3);
        assert!((fit.theta - 2.0 / 7.0).abs() < 1e-15);
        assert!((fit.epsilon - 1.0 / 3.0).abs() < 1e-13);

        let fit = fit_binomial(&params(0.4, 0.4), 10).unwrap();
        assert_eq!(
            (fit.m_tilde, fit.m, fit.theta, fit.epsilon),
            (10.0, 10, 0.4, 0.0)
        );

        assert!(matches!(
            fit_binomial(&params(0.1, 0.8), 100),
            Err(Error::WrongRegime { .. })
        ));
    }

    #[test]
    fn binomial_fit_is_exact_on_the_diagonal() {
        for k in 1..10 {
            let a = k as f64 / 10.0;
            for n in [1, 2, 3, 17, 100, 999, 5000] {
                let fit = fit_binomial(&params(a, a), n).unwrap();
                assert_eq!(fit.m, n as u64);
                assert_eq!(fit.epsilon, 0.0);
                assert_eq!(fit.theta, params(a, a).stationary().p);
            }
        }
    }

    #[test]
    fn degenerate_binomial_fit_is_an_error() {
        // alpha near 1, beta near 0: E S ≈ n / 2 with tiny variance.
        let err = fit_binomial(&params(0.95, 0.05), 3).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit { .. }), "{err}");
    }

    #[test]
    fn nb_pmf_examples() {
        let g = nb_pmf(1.0, 0.5, Some(3)).unwrap();
        for (v, e) in g.mass().iter().zip([0.5, 0.25, 0.125, 0.0625]) {
            assert!((v - e).abs() < 1e-15);
        }
        assert_eq!(nb_pmf(3.7, 1.0, None).unwrap().mass(), &[1.0]);
        let p = nb_pmf(2.0, 0.5, Some(2)).unwrap();
        assert!((p.get(0) - 0.25).abs() < 1e-15);
        assert!((p.get(1) - 0.25).abs() < 1e-15);
        assert!((p.get(2) - 0.1875).abs() < 1e-15);
        assert!(nb_pmf(0.0, 0.5, None).is_err());
        assert!(nb_pmf(-1.0, 0.5, None).is_err());
        assert!(nb_pmf(1.0, 0.0, None).is_err());
    }

    #[test]
    fn nb_with_unit_shape_is_geometric() {
        for q in [0.05, 0.3, 0.5, 0.9] {
            let p = nb_pmf(1.0, q, None).unwrap();
            for (k, &v) in p.mass().iter().enumerate() {
                let geo = q * (1.0 - q).powi(k as i32);
                assert!((v - geo).abs() <= 1e-14, "q={q} k={k}");
            }
        }
    }

    #[test]
    fn binomial_pmf_examples() {
        assert_eq!(binomial_pmf(1, 0.5, None).unwrap().mass(), &[0.5, 0.5]);
        let p = binomial_pmf(3, 2.0 / 7.0, None).unwrap();
        for (v, e) in p.mass().iter().zip([125.0, 150.0, 60.0, 8.0]) {
            assert!((v - e / 343.0).abs() < 1e-15);
        }
        let p = binomial_pmf(2, 1e-9, Some(5)).unwrap();
        assert_eq!(p.len(), 6);
        assert!((p.get(0) - (1.0 - 1e-9) * (1.0 - 1e-9)).abs() < 1e-15);
        assert!((p.get(1) / (2e-9 * (1.0 - 1e-9)) - 1.0).abs() < 1e-14);
        assert_eq!(p.get(3), 0.0);
    }

    #[test]
    fn poisson_pmf_examples() {
        assert_eq!(poisson_pmf(0.0, None).unwrap().mass(), &[1.0]);
        let p = poisson_pmf(1.0, None).unwrap();
        assert!((p.get(0) - (-1f64).exp()).abs() < 1e-16);
        assert!((p.get(1) - (-1f64).exp()).abs() < 1e-16);
        let p = poisson_pmf(2.0, None).unwrap();
        assert!((p.get(2) - 0.270_670_566_473_225_4).abs() < 1e-15);
        assert!(poisson_pmf(-1.0, None).is_err());
    }

    // Independent route: closed-form pmfs evaluated through log-gamma.
    #[test]
    fn reference_pmfs_agree_with_log_gamma_evaluation() {
        for (r, q) in [(0.3, 0.2), (12.46536, 0.272178), (250.0, 0.9), (2.5, 0.6)] {
            let ours = nb_pmf(r, q, None).unwrap();
            let oracle = NegativeBinomial::new(r, q).unwrap();
            for (k, &v) in ours.mass().iter().enumerate() {
                let o = oracle.pmf(k as u64);
                assert!(
                    (v - o).abs() <= 1e-12 * o.max(1e-300) + 1e-15,
                    "r={r} q={q} k={k}"
                );
            }
        }
        for (m, theta) in [(3u64, 2.0 / 7.0), (50, 0.1), (400, 0.55)] {
            let ours = binomial_pmf(m, theta, None).unwrap();
            let oracle = Binomial::new(theta, m).unwrap();
            for (k, &v) in ours.mass().iter().enumerate() {
                assert!((v - oracle.pmf(k as u64)).abs() <= 1e-13, "m={m} k={k}");
            }
        }
        for lambda in [0.5, 7.0, 120.0] {
            let ours = poisson_pmf(lambda, None).unwrap();
            let oracle = Poisson::new(lambda).unwrap();
            for (k, &v) in ours.mass().iter().enumerate() {
                assert!(
                    (v - oracle.pmf(k as u64)).abs() <= 1e-13,
                    "lambda={lambda} k={k}"
                );
            }
        }
    }

    #[test]
    fn nb_fit_reproduces_target_moments() {
        for (a, b, n) in [
            (0.1, 0.8, 100),
            (0.3, 0.6, 1000),
            (0.2, 0.9, 50),
            (0.2, 0.7, 400),
        ] {
            let m = moments_closed_form(&params(a, b), n).unwrap();
            let fit = fit_negative_binomial(&params(a, b), n).unwrap();
            let pmf = fit.reference_pmf(None).unwrap();
            assert!(pmf.tail() <= 1e-11);
            let (mean, var) = moments_from_pmf(&pmf);
            assert!(
                (mean - m.mean).abs() / m.mean < 1e-9,
                "({a},{b},{n}) mean {mean}"
            );
            assert!(
                (var - m.variance).abs() / m.variance < 1e-9,
                "({a},{b},{n}) var {var}"
            );
        }
    }

    #[test]
    fn binomial_fit_matches_mean() {
        for (a, b, n) in [(0.3, 0.6, 2), (0.5, 0.4, 100), (0.9, 0.3, 1000)] {
            let fit = fit_binomial(&params(a, b), n).unwrap();
            let es = moments_closed_form(&params(a, b), n).unwrap().mean;
            assert!((fit.m as f64 * fit.theta - es).abs() <= 1e-12 * es);
        }
    }

    #[test]
    fn reference_pmfs_sum_to_one_minus_tail() {
        for pmf in [
            nb_pmf(0.7, 0.1, None).unwrap(),
            nb_pmf(40.0, 0.5, Some(30)).unwrap(),
            poisson_pmf(33.0, None).unwrap(),
            binomial_pmf(20, 0.3, Some(40)).unwrap(),
        ] {
            assert!(pmf.mass().iter().all(|&v| v >= 0.0));
            assert!((pmf.total() + pmf.tail() - 1.0).abs() < 1e-12);
        }
    }
}
