//! Deep recurrent survival ranking.
//!
//! Learning-to-rank from biased click logs, treated as a survival-analysis
//! problem over list positions: a recurrent hazard model predicts the
//! conditional click probability at each position, the probability chain rule
//! recovers the full click/observe distributions, and censored (non-click)
//! sessions contribute through the survival likelihood instead of being
//! discarded.
//!
//! The crate covers the full experimental loop:
//!
//! - [`data`] — LETOR/SVMLight ingestion, multi-click session truncation, and
//!   the positive/negative/untrusted document partition.
//! - [`sim`] — synthetic click-log generation from labeled queries under the
//!   position-based (PBM) and cascade (CCM) user models.
//! - [`model`] — the recurrent hazard model and the survival chain rule.
//! - [`loss`] — point-wise and permutation pair-wise survival losses.
//! - [`train`] — mini-batch training with analytic backpropagation through
//!   time, checked against finite differences.
//! - [`eval`] — NDCG@k, MAP, and average-position curves.
//! - [`runner`] — batch commands (`simulate`, `train`, `eval`, `sweep`,
//!   `curve`, `gradcheck`) behind the `drsr` binary.
//!
//! See the crate examples for runnable walkthroughs of each capability.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod eval;
pub mod loss;
pub mod model;
pub mod runner;
pub mod sim;
pub mod synth;
pub mod train;
