use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph must have at least one vertex")]
    EmptyGraph,
    #[error("weight matrix is {rows}x{cols}, expected {n}x{n}")]
    DimensionMismatch { n: usize, rows: usize, cols: usize },
    #[error("negative weight a[{i}][{j}] = {w}")]
    NegativeWeight { i: usize, j: usize, w: f64 },
    #[error("non-finite weight a[{i}][{j}] = {w}")]
    NonFiniteWeight { i: usize, j: usize, w: f64 },
    #[error("self-loop at vertex {i} (a[{i}][{i}] = {w})")]
    SelfLoop { i: usize, w: f64 },
    #[error("graph has no edges")]
    NoEdges,
    #[error("graph is not symmetric: a[{i}][{j}] = {a_ij} but a[{j}][{i}] = {a_ji}")]
    AsymmetricGraph { i: usize, j: usize, a_ij: f64, a_ji: f64 },
    #[error("vertex subset is empty")]
    EmptySubset,
    #[error("vertex {index} out of range for graph of order {n}")]
    VertexOutOfRange { index: usize, n: usize },
    #[error("edge list parse error on line {line}: {msg}")]
    EdgeListParse { line: usize, msg: String },

    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("row {row} is not stochastic (|row sum - 1| = {residual:e})")]
    NotStochastic { row: usize, residual: f64 },
    #[error("negative entry m[{row}][{col}] = {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("matrix powers did not converge to rank one after {squarings} squarings (column spread {spread:e})")]
    NotRankOne { squarings: usize, spread: f64 },
    #[error("eigenvalue 1 is not simple: numerical null space of P^T - I has dimension {nullity}")]
    DegenerateEigenspace { nullity: usize },
    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),

    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("sampling period h = {h} violates {bound_name}: h must be < {bound}")]
    SamplingPeriodTooLarge { bound_name: &'static str, h: f64, bound: f64 },
    #[error("invalid gain h[{i}] = {gain}: need 0 < gain < {limit}")]
    InvalidGain { i: usize, gain: f64, limit: f64 },
    #[error("({i}, {j}) is not an edge")]
    NotAnEdge { i: usize, j: usize },
    #[error("invalid gossip schedule: {0}")]
    InvalidSchedule(String),
    #[error("tau = {tau} outside the sampling window (0, {h}]")]
    OutOfWindow { tau: f64, h: f64 },
    #[error("agent {0} is not a continuous-time agent")]
    NotContinuousAgent(usize),

    #[error("invalid run configuration: {0}")]
    InvalidRunConfig(String),
}
