//! Completion-time and error-count statistics for probabilistic multi-step
//! processes modelled as absorbing Markov chains, with an application to
//! secret key rates and memory-lifetime thresholds of a bunched two-level
//! entanglement-distillation repeater.

pub mod bounds;
pub mod counting;
pub mod error;
pub mod innsbruck;
pub mod lumping;
pub mod pgf;
pub mod poly;
pub mod process;

pub use error::{Error, Result};
pub use poly::CounterPoly;
pub use process::{
    build_process, compose_and, compose_and_held, compose_or, compose_seq, pmf_by_power,
    pmf_series, rescale_timing, CountedMatrix, EvaluatedMatrix, ProcessGraph,
};
