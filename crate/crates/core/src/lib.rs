//! Post-processing repair of binary-outcome score models.
//!
//! Scores of each protected group are moved along the Wasserstein geodesic
//! towards the groups' barycenter. The amount of repair (`λ`, one per group)
//! is picked so that a chosen confusion-matrix rate agrees across groups at
//! every decision threshold at once, or, for many groups, so that the
//! worst-off groups are served first (max-min and lexicographic repair).

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod lambda;
pub mod lex;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod ot;
pub mod repair;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use model::{
    LabelCondition, MetricCombo, MetricKind, PredictedClass, ScoreDomain, ScoredDataset,
    ScoredRow,
};
pub use ot::EmpiricalDistribution;
