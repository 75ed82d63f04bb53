//! Feature selection for learning-to-rank by simulated annealing, with a
//! local-beam-search baseline.
//!
//! A search state is a fixed-size [`subset::FeatureSubset`]; its quality is
//! the IR metric of a ranker trained on just those features
//! ([`evaluator::Evaluator`]). [`annealer::anneal`] and [`beam::beam_search`]
//! explore that space, and [`sweep`] runs the full k-by-repeat protocol.

pub mod annealer;
pub mod beam;
pub mod compare;
pub mod data;
pub mod error;
pub mod evaluator;
pub mod metrics;
pub mod record;
pub mod rng;
pub mod subset;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
