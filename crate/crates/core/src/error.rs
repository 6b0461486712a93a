use thiserror::Error;

/// Errors raised by process construction and analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid process graph: {0}")]
    InvalidGraph(String),
    #[error("column {column} sums to {sum} (expected 1 for a non-terminal node)")]
    NonStochasticGraph { column: usize, sum: f64 },
    #[error("terminal node {node} has an outgoing edge")]
    SelfLoopOnTerminal { node: usize },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("invalid timing split: {0}")]
    InvalidSplit(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("matrix is not lumpable under the given partition")]
    NotLumpable,
    #[error("null space of the generating-function system is degenerate: {0}")]
    DegenerateNullSpace(String),
    #[error("process does not terminate with probability one: {0}")]
    NonTerminating(String),
    #[error("pole at |z| = {0} inside the unit disc")]
    PoleInsideUnitDisc(f64),
    #[error("multiple pole detected near z = {0}")]
    MultiplePoleDetected(String),
    #[error("imaginary remainder {0:e} exceeds tolerance")]
    ResidualImaginary(f64),
    #[error("entry ({row}, {col}) is structurally zero")]
    UnknownEdge { row: usize, col: usize },
    #[error("unknown counter `{0}`")]
    UnknownCounter(String),
    #[error("matrix carries no counting variable")]
    NoCounter,
    #[error("completion probability at t = {0} is zero")]
    ZeroMass(usize),
    #[error("evaluation grid of {points} points exceeds budget {budget}")]
    GridTooLarge { points: usize, budget: usize },
    #[error("coefficient {value:e} at k = {index} is negative beyond round-off")]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("section matrix is not in the single-terminal block form")]
    BadBlockForm,
    #[error("distillation success probability {0:e} is too small")]
    DegenerateDistill(f64),
    #[error("lambda = {0} must exceed 0.5")]
    LambdaOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("standard error {stderr:e} exceeds 5% of mean {mean:e}")]
    InsufficientSamples { mean: f64, stderr: f64 },
    #[error("fidelity collapsed to {fidelity} at level {level}")]
    FidelityCollapse { level: usize, fidelity: f64 },
    #[error("no memory error rate yields a secure final state")]
    NeverSecure,
    #[error("distribution did not reach the requested mass within {0} steps")]
    Truncation(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
