//! Trajectory generation for the sampled protocols and Monte-Carlo
//! aggregation of gossip runs.
//!
//! States advance in increment form, `x_i + g_i * sum_j a_ij (x_j - x_i)`,
//! which equals the matrix map `M x` but leaves agreeing neighborhoods exactly
//! unchanged.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::protocols::{
    check_sampling_period, continuous_interpolant, gossip_coefficients, gossip_interpolant,
    neighbor_drive, sampled_gain, GossipSchedule, HybridSystem, Pair, Protocol,
};

pub const DEFAULT_DENSE_PER_STEP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    /// Number of sampling intervals.
    pub steps: usize,
    /// Intra-sample records per interval for continuous agents.
    pub dense_per_step: usize,
    pub seed: u64,
    pub trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            dense_per_step: DEFAULT_DENSE_PER_STEP,
            seed: 0,
            trials: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseRecord {
    pub agent: usize,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub h: f64,
    pub continuous: usize,
    pub sample_times: Vec<f64>,
    pub sample_states: Vec<Vec<f64>>,
    /// Ordered by time, then agent. The last record of each interval sits at
    /// `t_{k+1}`.
    pub dense_records: Vec<DenseRecord>,
    /// Gossip only: the pair drawn at each `t_k`.
    pub selections: Vec<Pair>,
}

impl Trajectory {
    fn start(sys: &HybridSystem, steps: usize, dense_per_step: usize) -> Self {
        let mut sample_states = Vec::with_capacity(steps + 1);
        sample_states.push(sys.x0().to_vec());
        Self {
            h: sys.h(),
            continuous: sys.continuous(),
            sample_times: vec![0.0],
            sample_states,
            dense_records: Vec::with_capacity(steps * dense_per_step * sys.continuous()),
            selections: Vec::new(),
        }
    }

    fn push_sample(&mut self, state: Vec<f64>) {
        self.sample_times.push(self.sample_states.len() as f64 * self.h);
        self.sample_states.push(state);
    }

    pub fn final_state(&self) -> &[f64] {
        self.sample_states.last().expect("trajectory always holds x0")
    }

    pub fn steps(&self) -> usize {
        self.sample_states.len() - 1
    }
}

/// Time of sub-sample `s` (1-based) in interval `k`.
fn dense_time(h: f64, k: usize, s: usize, per_step: usize) -> f64 {
    h * (k * per_step + s) as f64 / per_step as f64
}

/// One sampled step of the deterministic protocols.
#[derive(Debug, Clone)]
pub struct SampledStepper<'a> {
    sys: &'a HybridSystem,
    gains: Vec<f64>,
}

impl<'a> SampledStepper<'a> {
    pub fn new(sys: &'a HybridSystem, protocol: Protocol) -> Result<Self> {
        Ok(Self {
            sys,
            gains: sampled_gain(sys, protocol)?.diag,
        })
    }

    pub fn step(&self, x: &[f64]) -> Vec<f64> {
        let g = self.sys.graph();
        (0..x.len())
            .map(|i| x[i] + self.gains[i] * neighbor_drive(g, x, i))
            .collect()
    }

    /// `x0, x(t_1), x(t_2), ...` without end.
    pub fn states(self) -> impl Iterator<Item = Vec<f64>> + 'a {
        let first = self.sys.x0().to_vec();
        std::iter::successors(Some(first), move |x| Some(self.step(x)))
    }
}

pub fn simulate_deterministic(
    sys: &HybridSystem,
    protocol: Protocol,
    cfg: &RunConfig,
) -> Result<Trajectory> {
    let stepper = SampledStepper::new(sys, protocol)?;
    let per = cfg.dense_per_step;
    let mut traj = Trajectory::start(sys, cfg.steps, per);
    for k in 0..cfg.steps {
        let x = &traj.sample_states[k];
        for s in 1..=per {
            let tau = sys.h() * s as f64 / per as f64;
            let t = dense_time(sys.h(), k, s, per);
            for agent in 0..sys.continuous() {
                let value = continuous_interpolant(protocol, sys, x, agent, tau)?;
                traj.dense_records.push(DenseRecord { agent, t, value });
            }
        }
        let next = stepper.step(x);
        traj.push_sample(next);
    }
    Ok(traj)
}

/// Portable edge sampler: ChaCha8 seeded through `seed_from_u64`, with
/// uniforms formed from the top 53 bits of each `u64` draw.
#[derive(Debug, Clone)]
pub struct EdgeSampler {
    rng: ChaCha8Rng,
}

impl EdgeSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn draw(&mut self, sched: &GossipSchedule) -> Pair {
        sched.select(self.unit())
    }
}

/// Gossip stepping with the pair coefficients precomputed per schedule edge.
#[derive(Debug, Clone)]
pub struct GossipStepper<'a> {
    sched: &'a GossipSchedule,
    coefficients: Vec<(f64, f64)>,
}

impl<'a> GossipStepper<'a> {
    pub fn new(sys: &HybridSystem, sched: &'a GossipSchedule) -> Result<Self> {
        crate::graph::is_connected_undirected(sys.graph())?;
        check_sampling_period(sys, Protocol::Gossip)?;
        let coefficients = sched
            .edges()
            .iter()
            .map(|&p| gossip_coefficients(sys, p))
            .collect::<Result<_>>()?;
        Ok(Self { sched, coefficients })
    }

    /// Applies the pair update in place and returns the pair.
    pub fn step(&self, sampler: &mut EdgeSampler, x: &mut [f64]) -> Pair {
        let pair = sampler.draw(self.sched);
        self.apply(pair, x);
        pair
    }

    pub fn apply(&self, pair: Pair, x: &mut [f64]) {
        let idx = self
            .sched
            .edges()
            .binary_search(&pair)
            .expect("pair drawn from the schedule");
        let (ci, cj) = self.coefficients[idx];
        let (xi, xj) = (x[pair.i], x[pair.j]);
        x[pair.i] = xi + ci * (xj - xi);
        x[pair.j] = xj + cj * (xi - xj);
    }
}

pub fn simulate_gossip(
    sys: &HybridSystem,
    sched: &GossipSchedule,
    cfg: &RunConfig,
) -> Result<Trajectory> {
    let stepper = GossipStepper::new(sys, sched)?;
    let mut sampler = EdgeSampler::new(cfg.seed);
    let per = cfg.dense_per_step;
    let mut traj = Trajectory::start(sys, cfg.steps, per);
    traj.selections.reserve(cfg.steps);
    for k in 0..cfg.steps {
        let mut next = traj.sample_states[k].clone();
        let pair = stepper.step(&mut sampler, &mut next);
        let x = &traj.sample_states[k];
        for s in 1..=per {
            let tau = sys.h() * s as f64 / per as f64;
            let t = dense_time(sys.h(), k, s, per);
            for agent in 0..sys.continuous() {
                let value = gossip_interpolant(sys, x, Some(pair), agent, tau)?;
                traj.dense_records.push(DenseRecord { agent, t, value });
            }
        }
        traj.selections.push(pair);
        traj.push_sample(next);
    }
    Ok(traj)
}

/// Per-instant sample mean and standard error over independent gossip runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloMean {
    pub trials: usize,
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

/// Welford accumulator over `(steps + 1) * n` slots.
#[derive(Debug, Clone)]
struct Moments {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self { count: 0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    fn push(&mut self, values: &[f64]) {
        self.count += 1;
        let c = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let delta = v - *m;
            *m += delta / c;
            *s += delta * (v - *m);
        }
    }

    /// Chan et al. pairwise combination.
    fn merge(mut self, other: Moments) -> Moments {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * nb / total;
            self.m2[k] += other.m2[k] + delta * delta * na * nb / total;
        }
        self.count += other.count;
        self
    }
}

const TRIALS_PER_BLOCK: usize = 64;

/// Trial `r` uses seed `cfg.seed + r`. Blocks of trials run in parallel and
/// are merged in trial order, so the result does not depend on scheduling.
pub fn monte_carlo_mean(
    sys: &HybridSystem,
    sched: &GossipSchedule,
    cfg: &RunConfig,
) -> Result<MonteCarloMean> {
    if cfg.trials < 2 {
        return Err(Error::InvalidRunConfig(format!(
            "standard error needs at least 2 trials, got {}",
            cfg.trials
        )));
    }
    let stepper = GossipStepper::new(sys, sched)?;
    let n = sys.order();
    let len = (cfg.steps + 1) * n;
    let blocks = cfg.trials.div_ceil(TRIALS_PER_BLOCK);

    let partials: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Moments::new(len);
            let mut path = vec![0.0; len];
            let end = ((b + 1) * TRIALS_PER_BLOCK).min(cfg.trials);
            for r in b * TRIALS_PER_BLOCK..end {
                let mut sampler = EdgeSampler::new(cfg.seed.wrapping_add(r as u64));
                let mut x = sys.x0().to_vec();
                path[..n].copy_from_slice(&x);
                for k in 1..=cfg.steps {
                    stepper.step(&mut sampler, &mut x);
                    path[k * n..(k + 1) * n].copy_from_slice(&x);
                }
                acc.push(&path);
            }
            acc
        })
        .collect();
    let total = partials
        .into_iter()
        .fold(Moments::new(len), Moments::merge);

    let trials = total.count as f64;
    let mean = total.mean.chunks(n).map(<[f64]>::to_vec).collect();
    let stderr = total
        .m2
        .chunks(n)
        .map(|row| row.iter().map(|s| (s / (trials - 1.0)).max(0.0).sqrt() / trials.sqrt()).collect())
        .collect();
    Ok(MonteCarloMean { trials: total.count, mean, stderr })
}
