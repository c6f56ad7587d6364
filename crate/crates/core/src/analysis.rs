//! Solvability decisions, consensus-value prediction and convergence checks.

use serde::Serialize;

use crate::error::Result;
use crate::graph::{build_matrices, has_spanning_tree, is_connected_undirected, WeightedDigraph};
use crate::protocols::{
    bound, bound_name, case2_gain, check_sampling_period, gossip_expected_matrix, sampled_matrix,
    GossipSchedule, HybridSystem, Protocol,
};
use crate::sim::{monte_carlo_mean, MonteCarloMean, RunConfig, SampledStepper, Trajectory};
use crate::spectral::left_eigenvector;

/// Default agreement tolerance for the deterministic protocols.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Width of the statistical band, in standard errors, for gossip means.
pub const STDERR_BAND: f64 = 4.0;
/// Largest accepted `|L^T H nu|` entry for the self-observing protocol.
pub const GAIN_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusVerdict {
    pub protocol: Protocol,
    pub case: u8,
    pub solvable: bool,
    pub condition: String,
    pub predicted_value: Option<f64>,
    /// Consensus weights `nu`; the prediction is `nu^T x0`.
    pub weights: Option<Vec<f64>>,
    /// `max |(L^T H nu)_i|`, self-observing protocol only.
    pub gain_residual: Option<f64>,
    pub measured_final_disagreement: Option<f64>,
    pub final_state: Option<Vec<f64>>,
    /// Monte-Carlo standard error of `final_state` (gossip only).
    pub final_stderr: Option<Vec<f64>>,
    pub steps: Option<usize>,
    pub converged: bool,
    pub tolerance: f64,
}

/// `max_i x_i - min_i x_i`.
pub fn spread(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Largest pairwise gap at sampling instant `at`. Panics if `at` is past the
/// end of the trajectory.
pub fn disagreement(traj: &Trajectory, at: usize) -> f64 {
    spread(&traj.sample_states[at])
}

fn format_bound(b: f64) -> String {
    if b.is_finite() {
        format!("{b}")
    } else {
        "inf".to_string()
    }
}

/// Solvability and predicted consensus value, without simulating.
pub fn decide(
    sys: &HybridSystem,
    protocol: Protocol,
    sched: Option<&GossipSchedule>,
) -> Result<ConsensusVerdict> {
    check_sampling_period(sys, protocol)?;
    let h_status = format!(
        "h = {} < {} = {}",
        sys.h(),
        bound_name(protocol),
        format_bound(bound(sys, protocol).value())
    );

    let (solvable, structure, matrix) = match protocol {
        Protocol::Hold | Protocol::SelfObserving => {
            let tree = has_spanning_tree(sys.graph());
            let structure = if tree {
                "directed spanning tree present".to_string()
            } else {
                format!(
                    "no directed spanning tree ({} closed classes)",
                    sys.graph().closed_classes().len()
                )
            };
            (tree, structure, sampled_matrix(sys, protocol)?)
        }
        Protocol::Gossip => {
            let connected = is_connected_undirected(sys.graph())?;
            let uniform;
            let sched = match sched {
                Some(s) => s,
                None => {
                    uniform = GossipSchedule::uniform(sys.graph())?;
                    &uniform
                }
            };
            let structure = if connected { "undirected graph connected" } else { "undirected graph disconnected" };
            (connected, structure.to_string(), gossip_expected_matrix(sys, sched)?)
        }
    };

    let mut verdict = ConsensusVerdict {
        protocol,
        case: protocol.number(),
        solvable,
        condition: format!("{structure}; {h_status}"),
        predicted_value: None,
        weights: None,
        gain_residual: None,
        measured_final_disagreement: None,
        final_state: None,
        final_stderr: None,
        steps: None,
        converged: false,
        tolerance: DEFAULT_TOL,
    };
    if !solvable {
        return Ok(verdict);
    }

    let nu = left_eigenvector(&matrix)?;
    verdict.predicted_value = Some(nu.weigh(sys.x0()));
    if protocol == Protocol::SelfObserving {
        verdict.gain_residual = Some(gain_residual(sys.graph(), &case2_gain(sys)?.diag, &nu.nu));
    }
    verdict.weights = Some(nu.nu);
    Ok(verdict)
}

/// `max_i |(L^T H nu)_i|`.
pub fn gain_residual(graph: &WeightedDigraph, gains: &[f64], nu: &[f64]) -> f64 {
    let lap = build_matrices(graph).laplacian;
    let weighted = nalgebra::DVector::from_iterator(nu.len(), gains.iter().zip(nu).map(|(g, v)| g * v));
    (lap.transpose() * weighted).amax()
}

impl ConsensusVerdict {
    /// Fills the measured fields from the final sample of a deterministic run.
    pub fn measure_final_state(mut self, final_state: &[f64], steps: usize, tol: f64) -> Self {
        let d = spread(final_state);
        self.converged = match self.predicted_value {
            Some(p) => d < tol && final_state.iter().all(|x| (x - p).abs() < tol),
            None => false,
        };
        self.measured_final_disagreement = Some(d);
        self.final_state = Some(final_state.to_vec());
        self.steps = Some(steps);
        self.tolerance = tol;
        self
    }

    pub fn measure_trajectory(self, traj: &Trajectory, tol: f64) -> Self {
        self.measure_final_state(traj.final_state(), traj.steps(), tol)
    }

    /// Fills the measured fields from a Monte-Carlo mean. Each agent's
    /// tolerance is widened by `STDERR_BAND` standard errors.
    pub fn measure_mean(mut self, mc: &MonteCarloMean, tol: f64) -> Self {
        let mean = mc.mean.last().expect("mean holds x0");
        let stderr = mc.stderr.last().expect("stderr holds x0");
        let widest = stderr.iter().cloned().fold(0.0, f64::max);
        let d = spread(mean);
        self.converged = match self.predicted_value {
            Some(p) => {
                d < tol + 2.0 * STDERR_BAND * widest
                    && mean
                        .iter()
                        .zip(stderr)
                        .all(|(x, s)| (x - p).abs() < tol + STDERR_BAND * s)
            }
            None => false,
        };
        self.measured_final_disagreement = Some(d);
        self.final_state = Some(mean.clone());
        self.final_stderr = Some(stderr.clone());
        self.steps = Some(mc.mean.len() - 1);
        self.tolerance = tol;
        self
    }
}

/// Decides, simulates `cfg.steps` intervals (Monte-Carlo mean for gossip) and
/// compares the result against the prediction.
pub fn verify_run(
    sys: &HybridSystem,
    protocol: Protocol,
    sched: Option<&GossipSchedule>,
    cfg: &RunConfig,
    tol: f64,
) -> Result<ConsensusVerdict> {
    let verdict = decide(sys, protocol, sched)?;
    match protocol {
        Protocol::Hold | Protocol::SelfObserving => {
            let stepper = SampledStepper::new(sys, protocol)?;
            let last = stepper.states().nth(cfg.steps).expect("unbounded iterator");
            Ok(verdict.measure_final_state(&last, cfg.steps, tol))
        }
        Protocol::Gossip => {
            let uniform;
            let sched = match sched {
                Some(s) => s,
                None => {
                    uniform = GossipSchedule::uniform(sys.graph())?;
                    &uniform
                }
            };
            let mc = monte_carlo_mean(sys, sched, cfg)?;
            Ok(verdict.measure_mean(&mc, tol))
        }
    }
}

/// Initial state that can never reach consensus on a graph without a spanning
/// tree: two closed classes start at 0 and 1, everyone else at 0. Returns
/// `None` when the graph has a spanning tree.
pub fn necessity_witness(graph: &WeightedDigraph) -> Option<Vec<f64>> {
    let classes = graph.closed_classes();
    if classes.len() < 2 {
        return None;
    }
    let mut x0 = vec![0.0; graph.order()];
    for &i in &classes[1] {
        x0[i] = 1.0;
    }
    Some(x0)
}
