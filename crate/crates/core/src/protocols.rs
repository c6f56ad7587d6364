//! One-step iteration matrices and intra-sample closed forms for the three
//! consensus protocols.
//!
//! Agents `0..m` evolve in continuous time; agents `m..n` update only at the
//! sampling instants `t_k = k h`.
//!
//! * [`Protocol::Hold`]: every agent acts on neighbor and own states held at
//!   `t_k`. One step is `I - hL`.
//! * [`Protocol::SelfObserving`]: continuous agents feed back their own live
//!   state. One step is `I - HL` with the exponential gains of [`case2_gain`].
//! * [`Protocol::Gossip`]: one undirected edge is drawn per interval and only
//!   its endpoints interact. One step is the pair matrix of that edge.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;
use crate::spectral::{check_stochastic, StochasticMatrix, ROW_SUM_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Continuous,
    Discrete,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Continuous => "continuous",
            AgentKind::Discrete => "discrete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Zero-order hold on all states (case 1).
    Hold,
    /// Continuous agents observe their own state in real time (case 2).
    SelfObserving,
    /// Randomised pairwise interaction (case 3).
    Gossip,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Hold, Protocol::SelfObserving, Protocol::Gossip];

    pub fn number(self) -> u8 {
        match self {
            Protocol::Hold => 1,
            Protocol::SelfObserving => 2,
            Protocol::Gossip => 3,
        }
    }

    pub fn from_number(case: u8) -> Option<Self> {
        match case {
            1 => Some(Protocol::Hold),
            2 => Some(Protocol::SelfObserving),
            3 => Some(Protocol::Gossip),
            _ => None,
        }
    }
}

/// Graph, agent partition, sampling period and initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridSystem {
    graph: WeightedDigraph,
    continuous: usize,
    h: f64,
    x0: Vec<f64>,
}

impl HybridSystem {
    /// `continuous` is the number of continuous-time agents; they occupy the
    /// lowest indices.
    pub fn new(graph: WeightedDigraph, continuous: usize, h: f64, x0: Vec<f64>) -> Result<Self> {
        let n = graph.order();
        if continuous > n {
            return Err(Error::InvalidSystem(format!(
                "{continuous} continuous agents in a graph of order {n}"
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidSystem(format!("sampling period must be positive, got {h}")));
        }
        if x0.len() != n {
            return Err(Error::InvalidSystem(format!(
                "initial state has length {}, graph has order {n}",
                x0.len()
            )));
        }
        if let Some(v) = x0.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSystem(format!("non-finite initial state {v}")));
        }
        Ok(Self { graph, continuous, h, x0 })
    }

    pub fn graph(&self) -> &WeightedDigraph {
        &self.graph
    }

    pub fn continuous(&self) -> usize {
        self.continuous
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn order(&self) -> usize {
        self.graph.order()
    }

    pub fn kind(&self, i: usize) -> AgentKind {
        if i < self.continuous {
            AgentKind::Continuous
        } else {
            AgentKind::Discrete
        }
    }

    pub fn is_continuous(&self, i: usize) -> bool {
        i < self.continuous
    }

    pub fn with_h(&self, h: f64) -> Result<Self> {
        Self::new(self.graph.clone(), self.continuous, h, self.x0.clone())
    }

    pub fn with_x0(&self, x0: Vec<f64>) -> Result<Self> {
        Self::new(self.graph.clone(), self.continuous, self.h, x0)
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.order() {
            return Err(Error::InvalidSystem(format!(
                "state has length {}, expected {}",
                x.len(),
                self.order()
            )));
        }
        Ok(())
    }

    fn check_agent(&self, i: usize) -> Result<()> {
        if i >= self.order() {
            return Err(Error::VertexOutOfRange { index: i, n: self.order() });
        }
        if !self.is_continuous(i) {
            return Err(Error::NotContinuousAgent(i));
        }
        Ok(())
    }

    fn check_window(&self, tau: f64) -> Result<()> {
        if !(tau > 0.0 && tau <= self.h) {
            return Err(Error::OutOfWindow { tau, h: self.h });
        }
        Ok(())
    }
}

/// Strict upper limit on the sampling period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingBound {
    Finite(f64),
    /// No agent constrains `h`.
    Unbounded,
}

impl SamplingBound {
    fn reciprocal_of(max: f64) -> Self {
        if max > 0.0 {
            SamplingBound::Finite(1.0 / max)
        } else {
            SamplingBound::Unbounded
        }
    }

    pub fn value(self) -> f64 {
        match self {
            SamplingBound::Finite(b) => b,
            SamplingBound::Unbounded => f64::INFINITY,
        }
    }

    pub fn admits(self, h: f64) -> bool {
        h < self.value()
    }
}

/// `1 / max_i d_ii` over all agents.
pub fn bound_case1(sys: &HybridSystem) -> SamplingBound {
    let g = sys.graph();
    SamplingBound::reciprocal_of((0..g.order()).map(|i| g.degree(i)).fold(0.0, f64::max))
}

/// `1 / max d_ii` over discrete agents only. Unbounded when there are none
/// or none of them listens to anyone.
pub fn bound_case2(sys: &HybridSystem) -> SamplingBound {
    let g = sys.graph();
    SamplingBound::reciprocal_of((sys.continuous()..g.order()).map(|i| g.degree(i)).fold(0.0, f64::max))
}

/// `1 / max a_ij`.
pub fn bound_case3(sys: &HybridSystem) -> SamplingBound {
    SamplingBound::reciprocal_of(sys.graph().max_weight())
}

pub fn bound(sys: &HybridSystem, protocol: Protocol) -> SamplingBound {
    match protocol {
        Protocol::Hold => bound_case1(sys),
        Protocol::SelfObserving => bound_case2(sys),
        Protocol::Gossip => bound_case3(sys),
    }
}

pub fn bound_name(protocol: Protocol) -> &'static str {
    match protocol {
        Protocol::Hold => "bound_case1",
        Protocol::SelfObserving => "bound_case2",
        Protocol::Gossip => "bound_case3",
    }
}

/// Fails with `SamplingPeriodTooLarge` unless `h` is strictly below the
/// protocol's bound.
pub fn check_sampling_period(sys: &HybridSystem, protocol: Protocol) -> Result<()> {
    let b = bound(sys, protocol);
    if b.admits(sys.h()) {
        Ok(())
    } else {
        Err(Error::SamplingPeriodTooLarge {
            bound_name: bound_name(protocol),
            h: sys.h(),
            bound: b.value(),
        })
    }
}

/// `(1 - e^{-d tau}) / d`, extended by continuity to `tau` at `d = 0`.
pub fn exponential_gain(degree: f64, tau: f64) -> f64 {
    if degree == 0.0 {
        tau
    } else {
        -(-degree * tau).exp_m1() / degree
    }
}

/// Diagonal gain matrix `H` of the update `x <- (I - HL) x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pub diag: Vec<f64>,
}

impl GainMatrix {
    pub fn uniform(n: usize, h: f64) -> Self {
        Self { diag: vec![h; n] }
    }
}

pub fn case2_gain(sys: &HybridSystem) -> Result<GainMatrix> {
    check_sampling_period(sys, Protocol::SelfObserving)?;
    Ok(case2_gain_unchecked(sys))
}

fn case2_gain_unchecked(sys: &HybridSystem) -> GainMatrix {
    let g = sys.graph();
    let diag = (0..sys.order())
        .map(|i| {
            if sys.is_continuous(i) {
                exponential_gain(g.degree(i), sys.h())
            } else {
                sys.h()
            }
        })
        .collect();
    GainMatrix { diag }
}

/// `I - H L` for an arbitrary positive diagonal gain with `h_i < 1/d_ii`.
pub fn gain_matrix(graph: &WeightedDigraph, gain: &GainMatrix) -> Result<StochasticMatrix> {
    let n = graph.order();
    if gain.diag.len() != n {
        return Err(Error::InvalidSystem(format!(
            "gain has length {}, graph has order {n}",
            gain.diag.len()
        )));
    }
    for (i, &hi) in gain.diag.iter().enumerate() {
        let d = graph.degree(i);
        let limit = if d > 0.0 { 1.0 / d } else { f64::INFINITY };
        if !(hi > 0.0 && hi < limit) {
            return Err(Error::InvalidGain { i, gain: hi, limit });
        }
    }
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 - gain.diag[i] * graph.degree(i)
        } else {
            gain.diag[i] * graph.weight(i, j)
        }
    });
    check_stochastic(m)
}

/// `I - hL`.
pub fn case1_matrix(sys: &HybridSystem) -> Result<StochasticMatrix> {
    check_sampling_period(sys, Protocol::Hold)?;
    gain_matrix(sys.graph(), &GainMatrix::uniform(sys.order(), sys.h()))
}

/// `I - HL` with `H` from [`case2_gain`]. Continuous diagonals are formed as
/// `e^{-d_ii h}` directly; `1 - h_i d_ii` rounds to zero once `d_ii h` is
/// large.
pub fn case2_matrix(sys: &HybridSystem) -> Result<StochasticMatrix> {
    let gain = case2_gain(sys)?;
    let g = sys.graph();
    let n = sys.order();
    let m = DMatrix::from_fn(n, n, |i, j| match (i == j, sys.is_continuous(i)) {
        (true, true) => (-g.degree(i) * sys.h()).exp(),
        (true, false) => 1.0 - gain.diag[i] * g.degree(i),
        (false, _) => gain.diag[i] * g.weight(i, j),
    });
    check_stochastic(m)
}

/// Per-interval gain of each agent under the deterministic protocols.
pub fn sampled_gain(sys: &HybridSystem, protocol: Protocol) -> Result<GainMatrix> {
    match protocol {
        Protocol::Hold => {
            check_sampling_period(sys, protocol)?;
            Ok(GainMatrix::uniform(sys.order(), sys.h()))
        }
        Protocol::SelfObserving => case2_gain(sys),
        Protocol::Gossip => Err(Error::InvalidSystem(
            "gossip has no single sampled gain; use the pair matrices".into(),
        )),
    }
}

pub fn sampled_matrix(sys: &HybridSystem, protocol: Protocol) -> Result<StochasticMatrix> {
    match protocol {
        Protocol::Hold => case1_matrix(sys),
        Protocol::SelfObserving => case2_matrix(sys),
        Protocol::Gossip => Err(Error::InvalidSystem(
            "gossip has no single sampled matrix; use the pair matrices".into(),
        )),
    }
}

/// `sum_j a_ij (x_j - x_i)`.
pub fn neighbor_drive(graph: &WeightedDigraph, x: &[f64], i: usize) -> f64 {
    graph.neighbors(i).map(|j| graph.weight(i, j) * (x[j] - x[i])).sum()
}

/// Intra-sample state of continuous agent `i` at `t_k + tau`.
pub fn continuous_interpolant(
    protocol: Protocol,
    sys: &HybridSystem,
    x_k: &[f64],
    i: usize,
    tau: f64,
) -> Result<f64> {
    sys.check_state(x_k)?;
    sys.check_agent(i)?;
    sys.check_window(tau)?;
    let g = sys.graph();
    let drive = neighbor_drive(g, x_k, i);
    let elapsed = match protocol {
        Protocol::Hold => tau,
        Protocol::SelfObserving => exponential_gain(g.degree(i), tau),
        Protocol::Gossip => {
            return Err(Error::InvalidSystem("gossip intra-sample states use gossip_interpolant".into()))
        }
    };
    Ok(x_k[i] + elapsed * drive)
}

/// Unordered edge drawn at a sampling instant, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
}

impl Pair {
    pub fn new(a: usize, b: usize) -> Self {
        Self { i: a.min(b), j: a.max(b) }
    }

    pub fn contains(self, k: usize) -> bool {
        self.i == k || self.j == k
    }

    pub fn partner(self, k: usize) -> Option<usize> {
        if k == self.i {
            Some(self.j)
        } else if k == self.j {
            Some(self.i)
        } else {
            None
        }
    }
}

/// Edge-selection probabilities over every edge of a symmetric graph,
/// kept in lexicographic edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipSchedule {
    edges: Vec<Pair>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl GossipSchedule {
    pub fn uniform(graph: &WeightedDigraph) -> Result<Self> {
        let edges = graph.undirected_edges();
        let p = 1.0 / edges.len() as f64;
        Self::new(graph, edges.into_iter().map(|(i, j)| (i, j, p)).collect())
    }

    /// `entries` are `(i, j, p_ij)` with 0-based indices in either order.
    pub fn new(graph: &WeightedDigraph, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        crate::graph::is_connected_undirected(graph)?;
        for e in entries.iter_mut() {
            let pair = Pair::new(e.0, e.1);
            *e = (pair.i, pair.j, e.2);
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let n = graph.order();
        for w in entries.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::InvalidSchedule(format!("duplicate edge ({}, {})", w[0].0, w[0].1)));
            }
        }
        for &(i, j, p) in &entries {
            if j >= n {
                return Err(Error::VertexOutOfRange { index: j, n });
            }
            if graph.weight(i, j) <= 0.0 {
                return Err(Error::NotAnEdge { i, j });
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidSchedule(format!("probability {p} for ({i}, {j}) outside (0, 1]")));
            }
        }
        if let Some(&(i, j)) = graph
            .undirected_edges()
            .iter()
            .find(|&&(i, j)| !entries.iter().any(|e| (e.0, e.1) == (i, j)))
        {
            return Err(Error::InvalidSchedule(format!("edge ({i}, {j}) has no probability")));
        }
        let total: f64 = entries.iter().map(|e| e.2).sum();
        if (total - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidSchedule(format!("probabilities sum to {total}")));
        }
        let edges: Vec<Pair> = entries.iter().map(|e| Pair::new(e.0, e.1)).collect();
        let probs: Vec<f64> = entries.iter().map(|e| e.2).collect();
        let cumulative = probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self { edges, probs, cumulative })
    }

    pub fn edges(&self) -> &[Pair] {
        &self.edges
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Inverse-CDF lookup: the first edge whose cumulative probability
    /// exceeds `u` for `u` in `[0, 1)`.
    pub fn select(&self, u: f64) -> Pair {
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.edges[idx.min(self.edges.len() - 1)]
    }
}

/// Step sizes `(c_i, c_j)` of the selected pair: `x_i += c_i (x_j - x_i)`,
/// `x_j += c_j (x_i - x_j)`.
pub fn gossip_coefficients(sys: &HybridSystem, pair: Pair) -> Result<(f64, f64)> {
    let n = sys.order();
    if pair.j >= n {
        return Err(Error::VertexOutOfRange { index: pair.j, n });
    }
    let a = sys.graph().weight(pair.i, pair.j);
    if a <= 0.0 || pair.i == pair.j {
        return Err(Error::NotAnEdge { i: pair.i, j: pair.j });
    }
    let h = sys.h();
    Ok(match (sys.kind(pair.i), sys.kind(pair.j)) {
        (AgentKind::Continuous, AgentKind::Continuous) => {
            let c = -(-2.0 * a * h).exp_m1() / 2.0;
            (c, c)
        }
        (AgentKind::Continuous, AgentKind::Discrete) => (-(-a * h).exp_m1(), h * a),
        // i < j and continuous agents come first, so (D, C) cannot occur.
        (AgentKind::Discrete, _) => (h * a, h * a),
    })
}

fn check_gossip_system(sys: &HybridSystem) -> Result<()> {
    crate::graph::is_connected_undirected(sys.graph())?;
    check_sampling_period(sys, Protocol::Gossip)
}

/// `Phi_ij`: identity except rows `i` and `j`.
pub fn gossip_pair_matrix(sys: &HybridSystem, i: usize, j: usize) -> Result<StochasticMatrix> {
    check_gossip_system(sys)?;
    pair_matrix_unchecked(sys, Pair::new(i, j))
}

fn pair_matrix_unchecked(sys: &HybridSystem, pair: Pair) -> Result<StochasticMatrix> {
    let (ci, cj) = gossip_coefficients(sys, pair)?;
    let n = sys.order();
    let mut m = DMatrix::identity(n, n);
    m[(pair.i, pair.i)] = 1.0 - ci;
    m[(pair.i, pair.j)] = ci;
    m[(pair.j, pair.j)] = 1.0 - cj;
    m[(pair.j, pair.i)] = cj;
    check_stochastic(m)
}

/// `E(Phi) = sum_ij p_ij Phi_ij`.
pub fn gossip_expected_matrix(sys: &HybridSystem, sched: &GossipSchedule) -> Result<StochasticMatrix> {
    check_gossip_system(sys)?;
    let n = sys.order();
    let mut acc = DMatrix::zeros(n, n);
    for (&pair, &p) in sched.edges().iter().zip(sched.probs()) {
        acc += pair_matrix_unchecked(sys, pair)?.matrix() * p;
    }
    check_stochastic(acc)
}

/// Intra-sample state of continuous agent `i` at `t_k + tau` given the pair
/// drawn at `t_k` (if any).
pub fn gossip_interpolant(
    sys: &HybridSystem,
    x_k: &[f64],
    selected: Option<Pair>,
    i: usize,
    tau: f64,
) -> Result<f64> {
    sys.check_state(x_k)?;
    sys.check_agent(i)?;
    sys.check_window(tau)?;
    let Some(partner) = selected.and_then(|p| p.partner(i)) else {
        return Ok(x_k[i]);
    };
    let a = sys.graph().weight(i, partner);
    if a <= 0.0 {
        return Err(Error::NotAnEdge { i, j: partner });
    }
    let beta = match sys.kind(partner) {
        AgentKind::Continuous => (1.0 + (-2.0 * a * tau).exp()) / 2.0,
        AgentKind::Discrete => (-a * tau).exp(),
    };
    Ok(beta * x_k[i] + (1.0 - beta) * x_k[partner])
}
