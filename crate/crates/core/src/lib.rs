//! Self-paced maximum-margin partial-label learning.
//!
//! Each training instance carries a set of candidate labels, exactly one of
//! which is correct. The trainer alternates between fitting a weighted
//! Crammer–Singer multi-class SVM, re-assigning labels under per-class quotas
//! (a transportation problem solved exactly by min-cost flow), and re-weighting
//! instances with a soft self-paced regularizer so that low-loss instances are
//! learned first.
//!
//! Class labels are 1-based at every public interface.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod data_io;
pub mod error;
pub mod label_assignment;
pub mod losses;
pub mod margin_solver;
pub mod rng;
pub mod self_paced;
pub mod trainer;
pub mod types;

pub use error::{Error, Result, ValidationError};
pub use types::{
    Assignment, LinearModel, Matrix, ModelMeta, PartialLabelDataset, SelfPacedState, TrainConfig,
};
