//! Vicinal risk minimization toolkit.
//!
//! Building blocks: synthetic distributions and sample sets ([`sample`],
//! [`distribution`]), loss-composed hypotheses ([`function`], [`loss`]),
//! vicinity functions and vicinal risks ([`vicinity`]), optimal ghost matching
//! ([`matching`]), empirical CDF distances ([`cdfdist`]), training and
//! generalization gaps ([`learn`]), empirical covering numbers ([`covering`])
//! and the bound diagnostics built on them ([`diagnostics`]).
//!
//! Every stochastic routine takes an explicit `u64` seed; see [`rng`].

#![allow(clippy::too_many_arguments, clippy::neg_cmp_op_on_partial_ord)]

pub mod cdfdist;
pub mod covering;
pub mod diagnostics;
pub mod distribution;
pub mod error;
pub mod function;
pub mod learn;
pub mod loss;
pub mod matching;
pub mod rng;
pub mod sample;
pub mod stats;
pub mod vicinity;

pub use covering::{CoverMethod, CoverResult, DifferenceClass, EvaluationMatrix};
pub use distribution::SyntheticDistribution;
pub use error::{Result, VrmError};
pub use function::{FunctionClass, Hypothesis, PointFunction};
pub use learn::MonteCarloBudget;
pub use loss::{LossKind, LossSpec};
pub use matching::{vicinity_ghost_match, MatchResult};
pub use sample::{Point, SampleSet, Split};
pub use stats::Estimate;
pub use vicinity::{Scope, VicinitySpec};

/// Library version, embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
