//! The two-state chain, its stationary law, and exact laws of its partial sums.
//!
//! All laws here come from a forward dynamic program over
//! `(step, current state, partial sum)`, which costs `O(n^2)` time and
//! `O(n)` memory.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::pmf::{Pmf, EXACT_TOLERANCE};

/// Largest chain length accepted by the exact computations.
pub const MAX_EXACT_N: usize = 100_000;

/// Transition pair of the chain: `P(0 -> 1) = alpha`, `P(1 -> 1) = beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    alpha: f64,
    beta: f64,
}

impl ChainParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        check_probability("alpha", alpha)?;
        check_probability("beta", beta)?;
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Row `from` of the transition matrix, as `[P(from -> 0), P(from -> 1)]`.
    pub fn row(&self, from: u8) -> [f64; 2] {
        if from == 0 {
            [1.0 - self.alpha, self.alpha]
        } else {
            [1.0 - self.beta, self.beta]
        }
    }

    pub fn transition(&self, from: u8, to: u8) -> f64 {
        self.row(from)[usize::from(to != 0)]
    }

    /// `alpha ∨ beta`.
    pub fn max_param(&self) -> f64 {
        self.alpha.max(self.beta)
    }

    pub fn stationary(&self) -> StationaryLaw {
        stationary_law(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryLaw {
    /// Mass at state 1.
    pub p: f64,
    /// Mass at state 0.
    pub p0: f64,
}

pub fn stationary_law(params: &ChainParams) -> StationaryLaw {
    let denom = 1.0 - params.beta + params.alpha;
    StationaryLaw {
        p: params.alpha / denom,
        p0: (1.0 - params.beta) / denom,
    }
}

/// Law of the anchoring state `Y_0`, which is not counted in the sum.
///
/// With a stationary anchor the counted states `X_1..X_n` are stationary
/// too, so `Stationary` gives the law of `S` itself.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Start {
    #[default]
    Stationary,
    State0,
    State1,
    /// Arbitrary initial law, given by its mass at state 1.
    Custom {
        p1: f64,
    },
}

impl Start {
    /// `[P(Y_0 = 0), P(Y_0 = 1)]`.
    pub fn law(&self, params: &ChainParams) -> Result<[f64; 2]> {
        Ok(match *self {
            Start::Stationary => {
                let pi = params.stationary();
                [pi.p0, pi.p]
            }
            Start::State0 => [1.0, 0.0],
            Start::State1 => [0.0, 1.0],
            Start::Custom { p1 } => {
                if !(0.0..=1.0).contains(&p1) {
                    return Err(Error::InvalidParameter {
                        name: "p1",
                        value: p1,
                        reason: "initial mass must lie in [0, 1]",
                    });
                }
                [1.0 - p1, p1]
            }
        })
    }

    pub fn state(j: u8) -> Self {
        if j == 0 {
            Start::State0
        } else {
            Start::State1
        }
    }
}

/// Exact law of `X_1 + ... + X_n`, where the chain is anchored at `Y_0 ~ start`.
pub fn exact_pmf(params: &ChainParams, n: usize, start: Start) -> Result<Pmf> {
    check_length(n)?;
    let mass = segment_mass(params, n, start.law(params)?);
    Pmf::with_tolerance(mass, recursion_tolerance(n))
}

/// Normalization tolerance for an `n`-step recursion: `1e-12`, widened to
/// `4 n ε` once that is larger. Rows such as `(1 - α, α)` need not sum to
/// one exactly in floating point, so the total can drift by `O(n ε)`.
pub fn recursion_tolerance(n: usize) -> f64 {
    EXACT_TOLERANCE.max(4.0 * n as f64 * f64::EPSILON)
}

/// Exact law of `S - X_i` given `X_i = j` under the stationary chain.
///
/// Conditionally on `X_i = j` the left segment `X_1..X_{i-1}` and the right
/// segment `X_{i+1}..X_n` are independent. The right one is the chain run
/// forward from `j`; the left one is the time-reversed chain run from `j`,
/// and a stationary two-state chain is reversible, so both reuse the same
/// forward recursion.
pub fn exact_conditional_pmf(params: &ChainParams, n: usize, i: usize, j: u8) -> Result<Pmf> {
    check_length(n)?;
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    if j > 1 {
        return Err(Error::InvalidParameter {
            name: "j",
            value: f64::from(j),
            reason: "state must be 0 or 1",
        });
    }
    let anchor = Start::state(j).law(params)?;
    let left = Pmf::with_tolerance(segment_mass(params, i - 1, anchor), recursion_tolerance(i))?;
    let right = Pmf::with_tolerance(segment_mass(params, n - i, anchor), recursion_tolerance(n))?;
    Ok(left.convolve(&right))
}

fn check_length(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::ZeroLength)
    } else if n > MAX_EXACT_N {
        Err(Error::TooLong {
            n,
            cap: MAX_EXACT_N,
        })
    } else {
        Ok(())
    }
}

/// Law of the sum of `len` steps after an anchor with law `initial`;
/// `len = 0` gives the point mass at 0.
pub(crate) fn segment_mass(params: &ChainParams, len: usize, initial: [f64; 2]) -> Vec<f64> {
    let [p00, p01] = params.row(0);
    let [p10, p11] = params.row(1);
    let mut at0 = vec![0.0; len + 1];
    let mut at1 = vec![0.0; len + 1];
    at0[0] = initial[0];
    at1[0] = initial[1];
    for step in 0..len {
        // Descending so that at1[s + 1] is read before it is overwritten.
        for s in (0..=step).rev() {
            let (z, o) = (at0[s], at1[s]);
            at0[s] = z * p00 + o * p10;
            at1[s + 1] = z * p01 + o * p11;
        }
        at1[0] = 0.0;
    }
    at0.iter().zip(&at1).map(|(a, b)| a + b).collect()
}

/// Closed-form mean and variance of `S` under the stationary chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub a0: f64,
    pub a1: f64,
    /// `Var S - E S`, evaluated without cancellation against the mean.
    pub excess: f64,
}

pub fn moments_closed_form(params: &ChainParams, n: usize) -> Result<MomentSummary> {
    if n == 0 {
        return Err(Error::ZeroLength);
    }
    let (alpha, beta) = (params.alpha, params.beta);
    let p = params.stationary().p;
    let drift = beta - alpha;
    let s = 1.0 - beta + alpha;
    let a0 = 2.0 * alpha * (1.0 - beta) * drift / (s * s * s);
    let a1 = a0 / s;
    let nf = n as f64;
    let decay = drift.powf(nf);
    Ok(MomentSummary {
        mean: nf * p,
        variance: nf * p * (1.0 - p) + nf * a0 - a1 + a1 * decay,
        a0,
        a1,
        excess: -nf * p * p + nf * a0 - a1 * (1.0 - decay),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::{moments_from_pmf, tv_distance};

    /// Sums over all 2^n paths, weighting by the anchor law and transitions.
    fn enumerate_paths(params: &ChainParams, n: usize, start: Start) -> Vec<f64> {
        let init = start.law(params).unwrap();
        let mut out = vec![0.0; n + 1];
        for y0 in 0..2u8 {
            for bits in 0u32..(1 << n) {
                let mut prob = init[y0 as usize];
                let mut prev = y0;
                let mut sum = 0;
                for t in 0..n {
                    let x = ((bits >> t) & 1) as u8;
                    prob *= params.transition(prev, x);
                    sum += x as usize;
                    prev = x;
                }
                out[sum] += prob;
            }
        }
        out
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn rejects_out_of_range_params() {
        assert!(ChainParams::new(0.0, 0.5).is_err());
        assert!(ChainParams::new(0.5, 1.0).is_err());
        assert!(ChainParams::new(f64::NAN, 0.5).is_err());
        assert!(ChainParams::new(1.2, 0.5).is_err());
    }

    #[test]
    fn stationary_examples() {
        let pi = stationary_law(&ChainParams::new(0.2, 0.2).unwrap());
        assert!((pi.p - 0.2).abs() < 1e-15);
        let pi = stationary_law(&ChainParams::new(0.3, 0.6).unwrap());
        assert!((pi.p - 3.0 / 7.0).abs() < 1e-15);
        assert!((pi.p + pi.p0 - 1.0).abs() < 1e-15);
        let pi = stationary_law(&ChainParams::new(0.1, 0.8).unwrap());
        assert!((pi.p - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_matches_long_run_frequency() {
        use rand::Rng;
        for (a, b, expected) in [(0.3, 0.6, 3.0 / 7.0), (0.1, 0.8, 1.0 / 3.0)] {
            let params = ChainParams::new(a, b).unwrap();
            let mut rng = crate::rng::stream_rng(11, 0);
            let mut state = 0u8;
            let mut ones = 0u64;
            let steps = 10_000_000u64;
            for _ in 0..steps {
                state = u8::from(rng.random::<f64>() < params.row(state)[1]);
                ones += u64::from(state);
            }
            let freq = ones as f64 / steps as f64;
            assert!((freq - expected).abs() < 1e-3, "{freq} vs {expected}");
        }
    }

    #[test]
    fn reversibility_detailed_balance() {
        for a in [0.1, 0.3, 0.5, 0.7, 0.9] {
            for b in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let params = ChainParams::new(a, b).unwrap();
                let pi = params.stationary();
                let lhs = pi.p0 * params.transition(0, 1);
                let rhs = pi.p * params.transition(1, 0);
                assert!((lhs - rhs).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exact_pmf_examples() {
        let half = ChainParams::new(0.5, 0.5).unwrap();
        let p = exact_pmf(&half, 3, Start::Stationary).unwrap();
        assert!(close(p.mass(), &[0.125, 0.375, 0.375, 0.125], 1e-15));

        let params = ChainParams::new(0.3, 0.6).unwrap();
        let p = exact_pmf(&params, 2, Start::Stationary).unwrap();
        assert!(close(p.mass(), &[0.4, 12.0 / 35.0, 9.0 / 35.0], 1e-15));
        let p = exact_pmf(&params, 2, Start::State0).unwrap();
        assert!(close(p.mass(), &[0.49, 0.33, 0.18], 1e-15));
    }

    #[test]
    fn exact_pmf_rejects_zero_and_huge_length() {
        let params = ChainParams::new(0.3, 0.6).unwrap();
        assert!(matches!(
            exact_pmf(&params, 0, Start::Stationary),
            Err(Error::ZeroLength)
        ));
        assert!(matches!(
            exact_pmf(&params, MAX_EXACT_N + 1, Start::Stationary),
            Err(Error::TooLong { .. })
        ));
        assert!(exact_pmf(&params, 3, Start::Custom { p1: 1.5 }).is_err());
    }

    #[test]
    fn exact_pmf_matches_enumeration_for_all_starts() {
        let params = ChainParams::new(0.2, 0.7).unwrap();
        for start in [
            Start::Stationary,
            Start::State0,
            Start::State1,
            Start::Custom { p1: 0.35 },
        ] {
            for n in 1..=10 {
                let dp = exact_pmf(&params, n, start).unwrap();
                let brute = enumerate_paths(&params, n, start);
                assert!(close(dp.mass(), &brute, 1e-14), "{start:?} n={n}");
            }
        }
    }

    #[test]
    fn custom_start_interpolates_state_starts() {
        let params = ChainParams::new(0.3, 0.6).unwrap();
        let a = exact_pmf(&params, 7, Start::Custom { p1: 0.0 }).unwrap();
        let b = exact_pmf(&params, 7, Start::State0).unwrap();
        assert_eq!(a, b);
        let p = params.stationary().p;
        let c = exact_pmf(&params, 7, Start::Custom { p1: p }).unwrap();
        let d = exact_pmf(&params, 7, Start::Stationary).unwrap();
        assert!(tv_distance(&c, &d) < 1e-15);
    }

    #[test]
    fn conditional_examples() {
        let params = ChainParams::new(0.3, 0.6).unwrap();
        for j in 0..2 {
            let p = exact_conditional_pmf(&params, 1, 1, j).unwrap();
            assert_eq!(p.mass(), &[1.0]);
        }
        let p = exact_conditional_pmf(&params, 2, 1, 1).unwrap();
        assert!(close(p.mass(), &[0.4, 0.6], 1e-15));
        let p = exact_conditional_pmf(&params, 3, 2, 0).unwrap();
        assert!(close(p.mass(), &[0.49, 0.42, 0.09], 1e-15));
        assert!(matches!(
            exact_conditional_pmf(&params, 3, 0, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(exact_conditional_pmf(&params, 3, 4, 0).is_err());
        assert!(exact_conditional_pmf(&params, 3, 1, 2).is_err());
    }

    /// Conditions the stationary path enumeration on `X_i = j` directly.
    fn enumerate_conditional(params: &ChainParams, n: usize, i: usize, j: u8) -> Vec<f64> {
        let pi = params.stationary();
        let mut out = vec![0.0; n];
        let mut norm = 0.0;
        for bits in 0u32..(1 << n) {
            let x = |t: usize| ((bits >> t) & 1) as u8;
            if x(i - 1) != j {
                continue;
            }
            let mut prob = if x(0) == 1 { pi.p } else { pi.p0 };
            for t in 1..n {
                prob *= params.transition(x(t - 1), x(t));
            }
            let sum: usize = (0..n).filter(|&t| t != i - 1).map(|t| x(t) as usize).sum();
            out[sum] += prob;
            norm += prob;
        }
        out.iter().map(|v| v / norm).collect()
    }

    #[test]
    fn conditional_matches_enumeration() {
        for (a, b) in [(0.3, 0.6), (0.7, 0.2), (0.1, 0.9)] {
            let params = ChainParams::new(a, b).unwrap();
            for n in 1..=9 {
                for i in 1..=n {
                    for j in 0..2 {
                        let dp = exact_conditional_pmf(&params, n, i, j).unwrap();
                        let brute = enumerate_conditional(&params, n, i, j);
                        assert!(
                            close(dp.mass(), &brute, 1e-13),
                            "({a},{b}) n={n} i={i} j={j}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn moments_examples() {
        let m = moments_closed_form(&ChainParams::new(0.5, 0.5).unwrap(), 4).unwrap();
        assert_eq!((m.mean, m.variance, m.a0, m.a1), (2.0, 1.0, 0.0, 0.0));

        let params = ChainParams::new(0.3, 0.6).unwrap();
        let m = moments_closed_form(&params, 2).unwrap();
        assert!((m.mean - 6.0 / 7.0).abs() < 1e-15);
        assert!((m.variance - 1092.0 / 1715.0).abs() < 1e-14);
        let (mean, var) = moments_from_pmf(&exact_pmf(&params, 2, Start::Stationary).unwrap());
        assert!((mean - 6.0 / 7.0).abs() < 1e-15);
        assert!((var - 1092.0 / 1715.0).abs() < 1e-14);

        let params = ChainParams::new(0.1, 0.8).unwrap();
        let m = moments_closed_form(&params, 100).unwrap();
        assert!((m.mean - 100.0 / 3.0).abs() < 1e-12);
        assert!((m.variance - 122.4691).abs() < 1e-4);
        let (mean, var) = moments_from_pmf(&exact_pmf(&params, 100, Start::Stationary).unwrap());
        assert!((mean - m.mean).abs() / m.mean < 1e-10);
        assert!((var - m.variance).abs() / m.variance < 1e-10);
    }

    #[test]
    fn moment_summary_invariants() {
        for a in [0.1, 0.45, 0.9] {
            for b in [0.05, 0.5, 0.95] {
                let params = ChainParams::new(a, b).unwrap();
                for n in [1, 2, 7, 300] {
                    let m = moments_closed_form(&params, n).unwrap();
                    assert!(m.variance >= 0.0);
                    assert!((m.a1 - m.a0 / (1.0 - b + a)).abs() <= 1e-15 * m.a0.abs().max(1.0));
                    let direct = m.variance - m.mean;
                    assert!((m.excess - direct).abs() <= 1e-12 * m.mean.max(1.0));
                }
            }
        }
        assert!(moments_closed_form(&ChainParams::new(0.3, 0.6).unwrap(), 0).is_err());
    }

    #[test]
    fn mixture_identity() {
        let params = ChainParams::new(0.3, 0.6).unwrap();
        let n = 25;
        let law = exact_pmf(&params, n, Start::Stationary).unwrap();
        let p = params.stationary().p;
        for i in 1..=n {
            let one = exact_conditional_pmf(&params, n, i, 1).unwrap().shifted(1);
            let zero = exact_conditional_pmf(&params, n, i, 0).unwrap();
            assert!(tv_distance(&one.mixture(p, &zero), &law) < 1e-12, "i={i}");
        }
    }
}
