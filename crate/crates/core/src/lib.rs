//! Consensus analysis and simulation for hybrid multi-agent systems, where
//! some agents evolve in continuous time and the rest update only at sampling
//! instants.
//!
//! The crate decides whether a protocol reaches consensus on a given graph,
//! predicts the consensus value from the left Perron vector of the one-step
//! map, and confirms the prediction by simulation.

pub mod analysis;
pub mod error;
pub mod graph;
pub mod protocols;
pub mod sim;
pub mod spectral;

pub use analysis::{decide, disagreement, necessity_witness, spread, verify_run, ConsensusVerdict};
pub use error::{Error, Result};
pub use graph::{
    build_matrices, has_spanning_tree, is_connected_undirected, max_degree, parse_edge_list,
    write_edge_list, GraphMatrices, WeightedDigraph,
};
pub use protocols::{
    bound, bound_case1, bound_case2, bound_case3, case1_matrix, case2_gain, case2_matrix,
    continuous_interpolant, gain_matrix, gossip_expected_matrix, gossip_interpolant,
    gossip_pair_matrix, AgentKind, GainMatrix, GossipSchedule, HybridSystem, Pair, Protocol,
    SamplingBound,
};
pub use sim::{
    monte_carlo_mean, simulate_deterministic, simulate_gossip, DenseRecord, MonteCarloMean,
    RunConfig, Trajectory,
};
pub use spectral::{
    check_stochastic, left_eigenvector, sia_limit, PerronVector, SiaLimit, StochasticMatrix,
};
