//! Monte-Carlo side: single-chain paths, the maximal one-step coupling of a
//! chain started at 1 with one started at 0, and regenerative block lengths.
//!
//! Every sample `k` draws from its own stream `stream_rng(seed, k)`, so a
//! sample never depends on how many others are taken.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::bound_constants;
use crate::chain::{exact_pmf, ChainParams, Start};
use crate::error::{Error, Result};
use crate::pmf::{shift_tv, Pmf};
use crate::rng::stream_rng;

/// Hard cap on simulated meeting times; longer runs are censored.
pub const TAU_CAP: usize = 10_000;

/// A simulated path `X_1..X_n` (the anchor `Y_0` is not included) and its sum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainPath {
    pub states: Vec<u8>,
    pub sum: usize,
}

fn step<R: Rng + ?Sized>(params: &ChainParams, from: u8, rng: &mut R) -> u8 {
    u8::from(rng.random::<f64>() < params.row(from)[1])
}

fn draw_start<R: Rng + ?Sized>(params: &ChainParams, start: Start, rng: &mut R) -> Result<u8> {
    let law = start.law(params)?;
    Ok(u8::from(rng.random::<f64>() < law[1]))
}

pub fn sample_chain(params: &ChainParams, n: usize, start: Start, seed: u64) -> Result<ChainPath> {
    if n == 0 {
        return Err(Error::ZeroLength);
    }
    let mut rng = stream_rng(seed, 0);
    let mut state = draw_start(params, start, &mut rng)?;
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        state = step(params, state, &mut rng);
        states.push(state);
    }
    let sum = states.iter().map(|&x| usize::from(x)).sum();
    Ok(ChainPath { states, sum })
}

/// `num_samples` independent sums, sample `k` drawn from stream `k`.
pub fn sample_sums(
    params: &ChainParams,
    n: usize,
    start: Start,
    num_samples: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::ZeroLength);
    }
    check_count(num_samples)?;
    let law = start.law(params)?;
    (0..num_samples)
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let mut state = u8::from(rng.random::<f64>() < law[1]);
            let mut sum = 0;
            for _ in 0..n {
                state = step(params, state, &mut rng);
                sum += usize::from(state);
            }
            Ok(sum)
        })
        .collect()
}

pub fn empirical_pmf(
    params: &ChainParams,
    n: usize,
    start: Start,
    num_samples: usize,
    seed: u64,
) -> Result<Pmf> {
    Pmf::from_samples(&sample_sums(params, n, start, num_samples, seed)?)
}

fn check_count(num_samples: usize) -> Result<()> {
    if num_samples == 0 {
        return Err(Error::InvalidParameter {
            name: "num_samples",
            value: 0.0,
            reason: "need at least one sample",
        });
    }
    Ok(())
}

/// Joint state of the chain started at 1 (`z1`) and the one started at 0 (`z0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CoupledState {
    pub z1: u8,
    pub z0: u8,
}

impl CoupledState {
    pub const SPLIT: CoupledState = CoupledState { z1: 1, z0: 0 };

    pub fn all() -> [CoupledState; 4] {
        [
            CoupledState { z1: 0, z0: 0 },
            CoupledState { z1: 0, z0: 1 },
            CoupledState { z1: 1, z0: 0 },
            CoupledState { z1: 1, z0: 1 },
        ]
    }

    pub fn met(&self) -> bool {
        self.z1 == self.z0
    }
}

/// One-step law of the coupled chain from `state`, as `(next, probability)`
/// pairs with positive probability.
pub fn coupled_kernel(params: &ChainParams, state: CoupledState) -> Vec<(CoupledState, f64)> {
    let (alpha, beta) = (params.alpha(), params.beta());
    if state.met() {
        let row = params.row(state.z1);
        return [0u8, 1]
            .into_iter()
            .map(|j| (CoupledState { z1: j, z0: j }, row[usize::from(j)]))
            .filter(|&(_, p)| p > 0.0)
            .collect();
    }
    // Off the diagonal the coordinates sit in different rows; the common part
    // of the rows moves them together and the rest keeps them apart.
    let split_to = |one_goes_to: u8| {
        if state.z1 == 1 {
            CoupledState {
                z1: one_goes_to,
                z0: 1 - one_goes_to,
            }
        } else {
            CoupledState {
                z1: 1 - one_goes_to,
                z0: one_goes_to,
            }
        }
    };
    let split = if beta > alpha {
        split_to(1)
    } else {
        split_to(0)
    };
    [
        (CoupledState { z1: 0, z0: 0 }, (1.0 - alpha).min(1.0 - beta)),
        (CoupledState { z1: 1, z0: 1 }, alpha.min(beta)),
        (split, (beta - alpha).abs()),
    ]
    .into_iter()
    .filter(|&(_, p)| p > 0.0)
    .collect()
}

pub fn step_coupled<R: Rng + ?Sized>(
    params: &ChainParams,
    state: CoupledState,
    rng: &mut R,
) -> CoupledState {
    let u = rng.random::<f64>();
    if state.met() {
        let j = u8::from(u < params.row(state.z1)[1]);
        return CoupledState { z1: j, z0: j };
    }
    let (alpha, beta) = (params.alpha(), params.beta());
    let to_zero = (1.0 - alpha).min(1.0 - beta);
    let to_one = alpha.min(beta);
    if u < to_zero {
        CoupledState { z1: 0, z0: 0 }
    } else if u < to_zero + to_one {
        CoupledState { z1: 1, z0: 1 }
    } else {
        // State 1 moves to 1 and state 0 to 0 when β > α, and the reverse otherwise.
        let one_goes_to = u8::from(beta > alpha);
        if state.z1 == 1 {
            CoupledState {
                z1: one_goes_to,
                z0: 1 - one_goes_to,
            }
        } else {
            CoupledState {
                z1: 1 - one_goes_to,
                z0: one_goes_to,
            }
        }
    }
}

/// First meeting time `ς` and first joint visit to 0 `τ` of a run from `(1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MeetingSample {
    pub varsigma: usize,
    pub tau: usize,
    /// `τ` reached [`TAU_CAP`]; `tau` then holds the cap.
    pub censored: bool,
    /// The coordinates stayed equal from `ς` up to `τ`.
    pub diagonal_held: bool,
}

fn meeting_sample(params: &ChainParams, rng: &mut ChaCha8Rng) -> MeetingSample {
    let mut state = CoupledState::SPLIT;
    let mut varsigma = None;
    let mut diagonal_held = true;
    for t in 1..=TAU_CAP {
        state = step_coupled(params, state, rng);
        match varsigma {
            None if state.met() => varsigma = Some(t),
            Some(_) if !state.met() => diagonal_held = false,
            _ => {}
        }
        if state.z1 == 0 && state.z0 == 0 {
            return MeetingSample {
                varsigma: varsigma.unwrap_or(t),
                tau: t,
                censored: false,
                diagonal_held,
            };
        }
    }
    MeetingSample {
        varsigma: varsigma.unwrap_or(TAU_CAP),
        tau: TAU_CAP,
        censored: true,
        diagonal_held,
    }
}

pub fn sample_meeting_times(
    params: &ChainParams,
    num_samples: usize,
    seed: u64,
) -> Result<Vec<MeetingSample>> {
    check_count(num_samples)?;
    Ok((0..num_samples)
        .map(|k| meeting_sample(params, &mut stream_rng(seed, k as u64)))
        .collect())
}

/// One empirical tail probability against its reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub m: usize,
    pub empirical: f64,
    pub reference: f64,
    /// Binomial standard deviation of the empirical frequency at the reference.
    pub sd: f64,
    pub pass: bool,
}

fn tail_rows(
    values: impl Fn(usize) -> usize,
    total: usize,
    max_m: usize,
    reference: impl Fn(usize) -> f64,
    two_sided: bool,
) -> Vec<TailRow> {
    (1..=max_m)
        .map(|m| {
            let count = values(m);
            let empirical = count as f64 / total as f64;
            let p = reference(m).min(1.0);
            let sd = (p * (1.0 - p) / total as f64).sqrt();
            let excess = if two_sided {
                (empirical - p).abs()
            } else {
                empirical - p
            };
            TailRow {
                m,
                empirical,
                reference: p,
                sd,
                pass: excess <= 4.0 * sd + 1e-15,
            }
        })
        .collect()
}

/// `P(ς >= m)` against `|β - α|^(m-1)`, two-sided at 4 standard deviations.
pub fn varsigma_tail_check(
    params: &ChainParams,
    samples: &[MeetingSample],
    max_m: usize,
) -> Vec<TailRow> {
    let drift = (params.beta() - params.alpha()).abs();
    tail_rows(
        |m| samples.iter().filter(|s| s.varsigma >= m).count(),
        samples.len(),
        max_m,
        |m| drift.powi(m as i32 - 1),
        true,
    )
}

/// `P(τ >= m)` against the upper bound `(α ∨ β)^(m-1)`, one-sided.
/// Censored samples count as `τ >= m` for every `m`.
pub fn tau_tail_check(
    params: &ChainParams,
    samples: &[MeetingSample],
    max_m: usize,
) -> Vec<TailRow> {
    let top = params.max_param();
    tail_rows(
        |m| samples.iter().filter(|s| s.censored || s.tau >= m).count(),
        samples.len(),
        max_m,
        |m| top.powi(m as i32 - 1),
        false,
    )
}

/// Chi-square comparison of each coordinate's one-step moves with its row of
/// the transition matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalFidelity {
    pub transitions: usize,
    pub chi2_z1: f64,
    pub chi2_z0: f64,
    pub dof: usize,
    /// `dof + 4 sqrt(2 dof)`.
    pub threshold: f64,
    pub pass: bool,
}

/// Takes `transitions / 4` coupled steps from each of the four joint states.
pub fn marginal_fidelity(
    params: &ChainParams,
    transitions: usize,
    seed: u64,
) -> Result<MarginalFidelity> {
    let per_state = transitions / 4;
    check_count(per_state)?;
    let mut chi2 = [0.0f64; 2];
    for (s, from) in CoupledState::all().into_iter().enumerate() {
        let mut rng = stream_rng(seed, s as u64);
        let mut ones = [0usize; 2];
        for _ in 0..per_state {
            let next = step_coupled(params, from, &mut rng);
            ones[0] += usize::from(next.z1);
            ones[1] += usize::from(next.z0);
        }
        for (c, current) in [from.z1, from.z0].into_iter().enumerate() {
            let p1 = params.row(current)[1];
            let expected = [per_state as f64 * (1.0 - p1), per_state as f64 * p1];
            let observed = [(per_state - ones[c]) as f64, ones[c] as f64];
            for k in 0..2 {
                let d = observed[k] - expected[k];
                chi2[c] += d * d / expected[k];
            }
        }
    }
    let dof = 4;
    let threshold = dof as f64 + 4.0 * (2.0 * dof as f64).sqrt();
    Ok(MarginalFidelity {
        transitions: 4 * per_state,
        chi2_z1: chi2[0],
        chi2_z0: chi2[1],
        dof,
        threshold,
        pass: chi2[0] <= threshold && chi2[1] <= threshold,
    })
}

/// Run lengths after entering a state: revisits of 0 (`xi_odd`) and of 1
/// (`xi_even`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockSample {
    pub xi_odd: usize,
    pub xi_even: usize,
}

/// Enters 0, counts the steps spent there before the first 1, then counts
/// the steps spent at 1 before the next 0.
pub fn sample_blocks(
    params: &ChainParams,
    num_samples: usize,
    seed: u64,
) -> Result<Vec<BlockSample>> {
    check_count(num_samples)?;
    Ok((0..num_samples)
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let mut xi_odd = 0;
            while step(params, 0, &mut rng) == 0 {
                xi_odd += 1;
            }
            let mut xi_even = 0;
            while step(params, 1, &mut rng) == 1 {
                xi_even += 1;
            }
            BlockSample { xi_odd, xi_even }
        })
        .collect())
}

/// Sample mean and (unbiased) variance of block lengths next to their
/// geometric-law values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockMoments {
    pub mean_odd: f64,
    pub var_odd: f64,
    pub mean_even: f64,
    pub var_even: f64,
    pub mu1: f64,
    pub sigma1_sq: f64,
    pub mu2: f64,
    pub sigma2_sq: f64,
}

impl BlockMoments {
    /// Means within `k` standard errors of `μ1`, `μ2`; variances within `k`
    /// standard errors of `σ1²`, `σ2²` using the geometric fourth moment.
    pub fn within(&self, count: usize, k: f64) -> bool {
        let n = count as f64;
        let close = |est: f64, target: f64, var_of_est: f64| {
            (est - target).abs() <= k * (var_of_est / n).sqrt()
        };
        // Geometric law with success probability s: μ4 = σ⁴ (9 + s² / (1 - s)).
        let var_of_var = |sigma_sq: f64, s: f64| {
            sigma_sq * sigma_sq * (9.0 + s * s / (1.0 - s)) - sigma_sq * sigma_sq
        };
        let s1 = 1.0 / (1.0 + self.mu1);
        let s2 = 1.0 / (1.0 + self.mu2);
        close(self.mean_odd, self.mu1, self.sigma1_sq)
            && close(self.mean_even, self.mu2, self.sigma2_sq)
            && close(self.var_odd, self.sigma1_sq, var_of_var(self.sigma1_sq, s1))
            && close(
                self.var_even,
                self.sigma2_sq,
                var_of_var(self.sigma2_sq, s2),
            )
    }
}

pub fn block_moments(params: &ChainParams, samples: &[BlockSample]) -> BlockMoments {
    let consts = bound_constants(params);
    let stats = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, var)
    };
    let (mean_odd, var_odd) = stats(&mut samples.iter().map(|s| s.xi_odd as f64));
    let (mean_even, var_even) = stats(&mut samples.iter().map(|s| s.xi_even as f64));
    BlockMoments {
        mean_odd,
        var_odd,
        mean_even,
        var_even,
        mu1: consts.mu1,
        sigma1_sq: consts.sigma1_sq,
        mu2: consts.mu2,
        sigma2_sq: consts.sigma2_sq,
    }
}

/// Smoothness of the sum started from 0 against `γ(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma21Report {
    pub n: usize,
    pub shift_tv: f64,
    pub gamma: f64,
    /// `√n · shift_tv`, order-one when the `1/√n` rate holds.
    pub scaled: f64,
    pub k1: f64,
    pub pass: bool,
}

pub fn verify_lemma21(params: &ChainParams, n: usize) -> Result<Lemma21Report> {
    let law = exact_pmf(params, n, Start::State0)?;
    let consts = bound_constants(params);
    let gamma = consts.gamma(n as f64)?;
    let smooth = shift_tv(&law);
    Ok(Lemma21Report {
        n,
        shift_tv: smooth,
        gamma,
        scaled: (n as f64).sqrt() * smooth,
        k1: consts.k1,
        pass: smooth <= gamma + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::tv_distance;

    #[test]
    fn kernel_example_and_marginals() {
        let params = ChainParams::new(0.3, 0.6).unwrap();
        let k = coupled_kernel(&params, CoupledState::SPLIT);
        let prob = |s: CoupledState| k.iter().find(|(t, _)| *t == s).map_or(0.0, |x| x.1);
        assert!((prob(CoupledState { z1: 0, z0: 0 }) - 0.4).abs() < 1e-15);
        assert!((prob(CoupledState { z1: 1, z0: 1 }) - 0.3).abs() < 1e-15);
        assert!((prob(CoupledState::SPLIT) - 0.3).abs() < 1e-15);

        for (a, b) in [(0.3, 0.6), (0.6, 0.3), (0.5, 0.5), (0.05, 0.95)] {
            let params = ChainParams::new(a, b).unwrap();
            for from in CoupledState::all() {
                let k = coupled_kernel(&params, from);
                assert!((k.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-15);
                let m1: f64 = k.iter().filter(|(s, _)| s.z1 == 1).map(|x| x.1).sum();
                let m0: f64 = k.iter().filter(|(s, _)| s.z0 == 1).map(|x| x.1).sum();
                assert!((m1 - params.row(from.z1)[1]).abs() < 1e-15);
                assert!((m0 - params.row(from.z0)[1]).abs() < 1e-15);
                if from.met() {
                    assert!(k.iter().all(|(s, _)| s.met()));
                }
            }
        }
    }

    #[test]
    fn sampler_matches_kernel() {
        let params = ChainParams::new(0.6, 0.3).unwrap();
        for (idx, from) in CoupledState::all().into_iter().enumerate() {
            let mut rng = stream_rng(11, idx as u64);
            let mut counts = std::collections::HashMap::new();
            let draws = 200_000;
            for _ in 0..draws {
                *counts
                    .entry(step_coupled(&params, from, &mut rng))
                    .or_insert(0usize) += 1;
            }
            for (to, p) in coupled_kernel(&params, from) {
                let freq = counts.get(&to).copied().unwrap_or(0) as f64 / draws as f64;
                assert!((freq - p).abs() < 5.0 * (p * (1.0 - p) / draws as f64).sqrt() + 1e-12);
            }
            assert_eq!(counts.values().sum::<usize>(), draws);
        }
    }

    #[test]
    fn equal_parameters_meet_at_once() {
        let params = ChainParams::new(0.4, 0.4).unwrap();
        let s = sample_meeting_times(&params, 1000, 3).unwrap();
        assert!(s
            .iter()
            .all(|x| x.varsigma == 1 && x.tau >= 1 && x.diagonal_held));
    }

    #[test]
    fn meeting_times_are_ordered_and_reproducible() {
        let params = ChainParams::new(0.1, 0.8).unwrap();
        let a = sample_meeting_times(&params, 2000, 9).unwrap();
        assert!(a
            .iter()
            .all(|x| x.tau >= x.varsigma && x.varsigma >= 1 && x.diagonal_held));
        assert_eq!(a, sample_meeting_times(&params, 2000, 9).unwrap());
        assert_eq!(a[..100], sample_meeting_times(&params, 100, 9).unwrap()[..]);
        assert!(sample_meeting_times(&params, 0, 9).is_err());
    }

    #[test]
    fn meeting_tails_match_geometric_law() {
        let params = ChainParams::new(0.3, 0.6).unwrap();
        let s = sample_meeting_times(&params, 100_000, 1).unwrap();
        assert!(varsigma_tail_check(&params, &s, 6).iter().all(|r| r.pass));
        let rows = tau_tail_check(&params, &s, 8);
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
        assert!((rows[1].reference - 0.6).abs() < 1e-15);
    }

    #[test]
    fn path_is_deterministic_and_sums_agree() {
        let params = ChainParams::new(0.2, 0.7).unwrap();
        let a = sample_chain(&params, 200, Start::Stationary, 5).unwrap();
        assert_eq!(a, sample_chain(&params, 200, Start::Stationary, 5).unwrap());
        assert_eq!(a.sum, a.states.iter().filter(|&&x| x == 1).count());
        assert!(sample_chain(&params, 0, Start::Stationary, 5).is_err());
    }

    #[test]
    fn sticky_chain_has_long_runs() {
        let params = ChainParams::new(0.999, 0.999).unwrap();
        let path = sample_chain(&params, 1000, Start::State1, 2).unwrap();
        assert!(path.sum > 950);
    }

    #[test]
    fn empirical_law_is_close_to_exact() {
        let params = ChainParams::new(0.3, 0.6).unwrap();
        let emp = empirical_pmf(&params, 20, Start::Stationary, 200_000, 4).unwrap();
        let exact = exact_pmf(&params, 20, Start::Stationary).unwrap();
        assert!(tv_distance(&emp, &exact) < 0.01);
    }

    #[test]
    fn marginals_pass_chi_square() {
        for (a, b) in [(0.3, 0.6), (0.6, 0.3)] {
            let params = ChainParams::new(a, b).unwrap();
            let r = marginal_fidelity(&params, 400_000, 8).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn block_means() {
        let params = ChainParams::new(0.5, 0.5).unwrap();
        let s = sample_blocks(&params, 100_000, 6).unwrap();
        let m = block_moments(&params, &s);
        assert!((m.mean_odd - 1.0).abs() < 0.03 && (m.mean_even - 1.0).abs() < 0.03);

        let params = ChainParams::new(0.1, 0.8).unwrap();
        let s = sample_blocks(&params, 200_000, 6).unwrap();
        let m = block_moments(&params, &s);
        assert!((m.mu1 - 9.0).abs() < 1e-12 && (m.sigma2_sq - 20.0).abs() < 1e-9);
        assert!(m.within(s.len(), 5.0), "{m:?}");
    }

    #[test]
    fn lemma21_holds_at_a_few_points() {
        for (a, b) in [(0.3, 0.6), (0.5, 0.5), (0.9, 0.1)] {
            let params = ChainParams::new(a, b).unwrap();
            for n in [16, 64, 256] {
                assert!(verify_lemma21(&params, n).unwrap().pass);
            }
        }
    }
}
