//! Stein equations for the negative-binomial and binomial laws, and numerical
//! checks of the difference bounds their solutions satisfy.
//!
//! Both operators are birth-death generators,
//! `Bg(j) = birth(j) g(j + 1) - death(j) g(j)`, so the equation
//! `Bg = f` is a first-order recurrence in `g` once `g(1)` is pinned by the
//! `j = 0` equation. Running it forward multiplies rounding errors by
//! `death(j) / birth(j)`, which exceeds one beyond the mean of the target
//! law. The solvers therefore sweep forward up to the mean and backward from
//! the far end, where the solution is known exactly.

use rand::Rng;
use serde::Serialize;

use crate::bounds::bound_constants;
use crate::chain::{exact_conditional_pmf, exact_pmf, moments_closed_form, ChainParams, Start};
use crate::error::{Error, Result};
use crate::fit::{binomial_pmf, fit_negative_binomial, nb_pmf, poisson_pmf};
use crate::pmf::{tv_distance, Pmf};
use crate::rng::stream_rng;

/// Allowed deviation from equality in `Bg = f`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
/// Absolute slack allowed on the difference bounds.
pub const BOUND_SLACK: f64 = 1e-9;
/// Absolute slack on the exact conditional-law inequalities.
pub const LAW_SLACK: f64 = 1e-12;

/// Negative-binomial Stein operator `(a + b j) g(j + 1) - j g(j)`;
/// `b = 0` is the Poisson operator with mean `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NbSteinSetup {
    pub a: f64,
    pub b: f64,
    /// Target law truncated once all but `1e-12` of its mass is covered.
    pub target: Pmf,
}

impl NbSteinSetup {
    /// Operator for `NB(r, q)`: `a = r (1 - q)`, `b = 1 - q`.
    pub fn from_nb(r: f64, q: f64) -> Result<Self> {
        let target = nb_pmf(r, q, None)?;
        Ok(Self {
            a: r * (1.0 - q),
            b: 1.0 - q,
            target,
        })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
                reason: "Stein operator needs a positive mean",
            });
        }
        Ok(Self {
            a: lambda,
            b: 0.0,
            target: poisson_pmf(lambda, None)?,
        })
    }

    /// Operator matched to the stationary sum: `1 - b = E S / Var S` and
    /// `a = n (1 - b) p`.
    pub fn from_fit(params: &ChainParams, n: usize) -> Result<Self> {
        let fit = fit_negative_binomial(params, n)?;
        let moments = moments_closed_form(params, n)?;
        let p = params.stationary().p;
        let one_minus_b = if fit.poisson_limit {
            1.0
        } else {
            moments.mean / moments.variance
        };
        let a = n as f64 * one_minus_b * p;
        let b = 1.0 - one_minus_b;
        if b == 0.0 {
            return Self::poisson(a);
        }
        Ok(Self {
            a,
            b,
            target: nb_pmf(a / b, one_minus_b, None)?,
        })
    }

    /// Last index `N` of the truncated target.
    pub fn truncation(&self) -> usize {
        self.target.len() - 1
    }

    fn birth(&self, j: usize) -> f64 {
        self.a + self.b * j as f64
    }

    fn mean(&self) -> f64 {
        self.a / (1.0 - self.b)
    }
}

/// Tabulated solution of a Stein equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteinSolution {
    /// `g(0), g(1), ...`; `g(0) = 0` by convention (the operator never reads it).
    pub g: Vec<f64>,
    /// `max |Bg(j) - f(j)|` over the range where equality is required.
    pub residual_sup: f64,
    /// `sup |Δg'|` for the negative binomial, `sup |Δg|` for the binomial.
    pub delta_sup: f64,
}

fn member(set: &[bool], k: usize) -> bool {
    set.get(k).copied().unwrap_or(false)
}

fn law_of_set(law: &Pmf, set: &[bool]) -> f64 {
    law.mass()
        .iter()
        .enumerate()
        .filter(|&(k, _)| member(set, k))
        .map(|(_, &p)| p)
        .sum()
}

/// Solves `(a + b j) g(j + 1) - j g(j) = 1{j ∈ A} - NB(A)` for `j = 0..=N`,
/// returning `g(0..=N + 1)`.
///
/// `set[k]` marks membership of `k` in `A`; `A` must lie inside `0..=N`.
pub fn solve_nb_stein(setup: &NbSteinSetup, set: &[bool]) -> Result<SteinSolution> {
    if setup.a.is_nan() || setup.a <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "a",
            value: setup.a,
            reason: "Stein operator needs a > 0",
        });
    }
    let last = setup.truncation();
    if set.iter().skip(last + 1).any(|&x| x) {
        return Err(Error::InvalidParameter {
            name: "A",
            value: last as f64,
            reason: "set extends beyond the truncated support",
        });
    }
    let target_mass = law_of_set(&setup.target, set);
    let f = |j: usize| f64::from(u8::from(member(set, j))) - target_mass;

    let mut g = vec![0.0; last + 2];
    let switch = (setup.mean().floor() as usize).min(last);
    for j in 0..=switch {
        g[j + 1] = (f(j) + j as f64 * g[j]) / setup.birth(j);
    }
    if switch < last {
        // Beyond N no index is in A, so f = -NB(A) there and
        // g(N + 2) = NB(A) Σ_{k > N+1} π(k) / ((a + b (N+1)) π(N+1)).
        let start = last + 1;
        let tail_ratio = tail_ratio(|i| setup.birth(i - 1) / i as f64, start);
        let mut next = target_mass * tail_ratio / setup.birth(start);
        for j in (switch + 2..=start).rev() {
            let gj = (setup.birth(j) * next - f(j)) / j as f64;
            if j <= last + 1 {
                g[j] = gj;
            }
            next = gj;
        }
    }

    let residual_sup = (0..=last)
        .map(|j| (setup.birth(j) * g[j + 1] - j as f64 * g[j] - f(j)).abs())
        .fold(0.0, f64::max);
    let delta_sup = (0..last)
        .map(|j| (g[j + 2] - g[j + 1]).abs())
        .fold(0.0, f64::max);
    Ok(SteinSolution {
        g,
        residual_sup,
        delta_sup,
    })
}

/// `Σ_{k > start} π(k) / π(start)` from the ratios `π(i) / π(i - 1)`, which
/// must be eventually below one.
fn tail_ratio(ratio: impl Fn(usize) -> f64, start: usize) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    let mut i = start + 1;
    loop {
        term *= ratio(i);
        sum += term;
        if term <= 1e-18 * sum || term == 0.0 {
            break sum;
        }
        i += 1;
    }
}

/// Outcome of the `‖Δg'‖ <= 1/a` check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaBoundCheck {
    pub sup: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

pub fn check_nb_delta_bound(solution: &SteinSolution, a: f64) -> DeltaBoundCheck {
    let bound = 1.0 / a;
    let slack = bound - solution.delta_sup;
    DeltaBoundCheck {
        sup: solution.delta_sup,
        bound,
        slack,
        pass: slack >= -BOUND_SLACK,
    }
}

/// Solves the binomial Stein equation on `0..=m` and extends it by the
/// constant that makes `Bg(j) >= 1{j ∈ A} - Bi(m, θ)(A)` for all `j > m`.
///
/// The returned table covers `g(0..=J)` with `J = max(m + 2, set.len() + 1)`.
pub fn solve_binomial_stein(m: u64, theta: f64, set: &[bool]) -> Result<SteinSolution> {
    let law = binomial_pmf(m, theta, None)?;
    let m = m as usize;
    let target_mass = law_of_set(&law, set);
    let f = |j: usize| f64::from(u8::from(member(set, j))) - target_mass;
    let birth = |j: usize| theta * (m as f64 - j as f64);
    let death = |j: usize| (1.0 - theta) * j as f64;

    let len = (m + 3).max(set.len() + 2);
    let mut g = vec![0.0; len];
    let switch = ((m as f64 * theta).floor() as usize).min(m - 1);
    for j in 0..=switch {
        g[j + 1] = (f(j) + death(j) * g[j]) / birth(j);
    }
    if switch + 1 < m {
        // The j = m equation has no g(m + 1) term.
        g[m] = -f(m) / death(m);
        for j in (switch + 2..m).rev() {
            g[j] = (birth(j) * g[j + 1] - f(j)) / death(j);
        }
    }
    let scale = m as f64 * theta * (1.0 - theta);
    let beyond = if member(set, m) {
        -(1.0 + theta - theta * target_mass) / scale
    } else {
        -(1.0 - theta * target_mass) / scale
    };
    for v in g.iter_mut().skip(m + 1) {
        *v = beyond;
    }

    let residual_sup = (0..=m)
        .map(|j| (birth(j) * g[j + 1] - death(j) * g[j] - f(j)).abs())
        .fold(0.0, f64::max);
    // g(0) is a convention, so Δg(0) is not part of the norm.
    let delta_sup = g[1..]
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    Ok(SteinSolution {
        g,
        residual_sup,
        delta_sup,
    })
}

/// Checks of the binomial solution: the one-sided Stein inequality and the
/// difference bound `‖Δg‖ <= 1 / (m θ (1 - θ))`, which is attained at `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma31Report {
    /// `min_j (Bg(j) - f(j))` over the whole table; must be `>= 0`.
    pub min_inequality_slack: f64,
    pub residual_sup: f64,
    pub delta_sup: f64,
    pub delta_bound: f64,
    pub delta_at_m: f64,
    /// `max_{j > m} |Δg(j)|`; must be zero.
    pub delta_beyond_m: f64,
    pub pass: bool,
}

pub fn check_binomial_lemma31(
    solution: &SteinSolution,
    m: u64,
    theta: f64,
    set: &[bool],
) -> Result<Lemma31Report> {
    let law = binomial_pmf(m, theta, None)?;
    let m = m as usize;
    let g = &solution.g;
    let target_mass = law_of_set(&law, set);
    let mut min_slack = f64::INFINITY;
    for j in 0..g.len() - 1 {
        let bg = theta * (m as f64 - j as f64) * g[j + 1] - (1.0 - theta) * j as f64 * g[j];
        let f = f64::from(u8::from(member(set, j))) - target_mass;
        min_slack = min_slack.min(bg - f);
    }
    let delta_bound = 1.0 / (m as f64 * theta * (1.0 - theta));
    let delta_at_m = (g[m + 1] - g[m]).abs();
    let delta_beyond_m = g[m + 1..]
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    let pass = min_slack >= -RESIDUAL_TOLERANCE
        && solution.residual_sup <= RESIDUAL_TOLERANCE
        && solution.delta_sup <= delta_bound + BOUND_SLACK
        && (delta_at_m - delta_bound).abs() <= 1e-9 * delta_bound
        && delta_beyond_m == 0.0;
    Ok(Lemma31Report {
        min_inequality_slack: min_slack,
        residual_sup: solution.residual_sup,
        delta_sup: solution.delta_sup,
        delta_bound,
        delta_at_m,
        delta_beyond_m,
        pass,
    })
}

/// Uniformly random subset of `0..len` (each index kept with probability 1/2).
pub fn random_subset<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<bool> {
    (0..len).map(|_| rng.random::<bool>()).collect()
}

/// Aggregate of a randomized Stein run over many sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsetRunSummary {
    pub subsets: usize,
    pub max_residual: f64,
    pub max_delta: f64,
    pub delta_bound: f64,
    /// Smallest one-sided slack (binomial runs only; `0` otherwise).
    pub min_inequality_slack: f64,
    pub failures: usize,
}

impl SubsetRunSummary {
    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

/// Solves the negative-binomial equation for `subsets` random sets drawn
/// from seeded streams and checks residuals and `‖Δg'‖ <= 1/a` on each.
pub fn nb_subset_run(setup: &NbSteinSetup, subsets: usize, seed: u64) -> Result<SubsetRunSummary> {
    let mut summary = SubsetRunSummary {
        subsets,
        max_residual: 0.0,
        max_delta: 0.0,
        delta_bound: 1.0 / setup.a,
        min_inequality_slack: 0.0,
        failures: 0,
    };
    for k in 0..subsets {
        let set = random_subset(setup.truncation() + 1, &mut stream_rng(seed, k as u64));
        let solution = solve_nb_stein(setup, &set)?;
        let check = check_nb_delta_bound(&solution, setup.a);
        summary.max_residual = summary.max_residual.max(solution.residual_sup);
        summary.max_delta = summary.max_delta.max(solution.delta_sup);
        if !check.pass || solution.residual_sup > RESIDUAL_TOLERANCE {
            summary.failures += 1;
        }
    }
    Ok(summary)
}

/// Binomial counterpart of [`nb_subset_run`]; sets are drawn from
/// `0..=2m + 1` so that indices beyond `m` are exercised.
pub fn binomial_subset_run(
    m: u64,
    theta: f64,
    subsets: usize,
    seed: u64,
) -> Result<SubsetRunSummary> {
    let mut summary = SubsetRunSummary {
        subsets,
        max_residual: 0.0,
        max_delta: 0.0,
        delta_bound: 1.0 / (m as f64 * theta * (1.0 - theta)),
        min_inequality_slack: f64::INFINITY,
        failures: 0,
    };
    for k in 0..subsets {
        let set = random_subset(2 * m as usize + 2, &mut stream_rng(seed, k as u64));
        let solution = solve_binomial_stein(m, theta, &set)?;
        let report = check_binomial_lemma31(&solution, m, theta, &set)?;
        summary.max_residual = summary.max_residual.max(report.residual_sup);
        summary.max_delta = summary.max_delta.max(report.delta_sup);
        summary.min_inequality_slack = summary
            .min_inequality_slack
            .min(report.min_inequality_slack);
        if !report.pass {
            summary.failures += 1;
        }
    }
    Ok(summary)
}

/// Exact check of the conditional-law smoothing inequalities at one index.
///
/// The first inequality is checked at its supremum over `‖h‖ <= 1`
/// (twice the total-variation distance). The second cannot be maximized over
/// all `h`; it is probed with the threshold indicators `h_t = 1{x <= t}`,
/// `t = 0..=n`, which is a necessary-condition check only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma24Report {
    pub i: usize,
    pub lhs_sup: f64,
    pub rhs_sup: f64,
    pub probe_lhs_max: f64,
    pub probe_worst_t: usize,
    pub rhs_probe: f64,
    pub pass: bool,
}

/// Right-hand sides `(sup bound, probe bound)` for a chain of length `n`.
pub fn lemma24_bounds(params: &ChainParams, n: usize) -> Result<(f64, f64)> {
    let top = params.max_param();
    let consts = bound_constants(params);
    let smooth = consts.gamma(n as f64 / 4.0)? + top.powf((n / 4) as f64);
    let sup = 10.0 * top / (1.0 - top) * smooth;
    let drift = (params.alpha() - params.beta()).abs();
    let probe = drift * (5.0 + 23.0 * top) / ((1.0 - top) * (1.0 - top)) * smooth;
    Ok((sup, probe))
}

pub fn verify_lemma24(params: &ChainParams, n: usize, i: usize) -> Result<Lemma24Report> {
    let law = exact_pmf(params, n, Start::Stationary)?;
    let bounds = lemma24_bounds(params, n)?;
    lemma24_at(params, n, i, &law, bounds)
}

/// Runs [`verify_lemma24`] over several indices sharing one exact law of `S`.
pub fn verify_lemma24_indices(
    params: &ChainParams,
    n: usize,
    indices: impl IntoIterator<Item = usize>,
) -> Result<Vec<Lemma24Report>> {
    let law = exact_pmf(params, n, Start::Stationary)?;
    let bounds = lemma24_bounds(params, n)?;
    indices
        .into_iter()
        .map(|i| lemma24_at(params, n, i, &law, bounds))
        .collect()
}

fn lemma24_at(
    params: &ChainParams,
    n: usize,
    i: usize,
    law: &Pmf,
    (rhs_sup, rhs_probe): (f64, f64),
) -> Result<Lemma24Report> {
    let one = exact_conditional_pmf(params, n, i, 1)?;
    let zero = exact_conditional_pmf(params, n, i, 0)?;
    let lhs_sup = 2.0 * tv_distance(&one, law);
    let mean_gap = one.mean() - zero.mean();

    let mut probe_lhs_max = 0.0;
    let mut probe_worst_t = 0;
    let (mut cdf_one, mut cdf_zero) = (0.0, 0.0);
    for t in 0..=n {
        cdf_one += one.get(t);
        cdf_zero += zero.get(t);
        // E Δh_t(S) = P(S + 1 <= t) - P(S <= t) = -P(S = t)
        let lhs = (cdf_one - cdf_zero + mean_gap * law.get(t)).abs();
        if lhs > probe_lhs_max {
            probe_lhs_max = lhs;
            probe_worst_t = t;
        }
    }
    Ok(Lemma24Report {
        i,
        lhs_sup,
        rhs_sup,
        probe_lhs_max,
        probe_worst_t,
        rhs_probe,
        pass: lhs_sup <= rhs_sup + LAW_SLACK && probe_lhs_max <= rhs_probe + LAW_SLACK,
    })
}
