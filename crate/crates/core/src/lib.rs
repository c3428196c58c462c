//! Infotaxis on a lattice: a Bayesian searcher that localises an emitting
//! source from sparse Poisson detections by greedily minimising the expected
//! entropy of its belief, plus the Monte Carlo harness used to study how
//! search time and success rate depend on the transport parameters and on
//! mismatches between the agent's model and the real environment.

pub mod belief;
pub mod bessel;
pub mod env_model;
pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod numeric;
pub mod policy;
pub mod search;

pub use belief::{ArgMax, BeliefGrid};
pub use env_model::{EnvParams, RateTable};
pub use error::{Error, Result};
pub use field::GridField;
pub use grid::{Cell, Direction, GridSpec};
pub use policy::{MoveEvaluation, PolicyConfig, Truncation};
pub use search::{PreparedSearch, SearchConfig, SearchOutcome, SearchStatus, StepRecord};
