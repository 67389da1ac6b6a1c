//! Feature selection for classification driven by the trace criterion
//! `trace(S_w^{-1} S_b)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`] holds the immutable observation table and per-class statistics.
//! * [`scatter`] evaluates scatter matrices and the criterion directly. It is the
//!   reference every incremental path is checked against.
//! * [`incremental`] keeps `S_R^{-1}` and `t_R` current under single-feature
//!   additions and removals in `O(|R|^2)` via block-inverse updates.
//! * [`greedy`] has the sequential forward, backward and stepwise baselines.
//! * [`pfst`] is the three-stage parallel selector (forward with early dropping,
//!   re-forward, backward) running bulk-synchronous rounds over feature blocks.
//! * [`eval`] fits LDA on a selected subset and runs stratified k-fold CV.
//! * [`io`], [`synth`] and [`run`] cover CSV ingestion, standardization,
//!   synthetic data and the report documents written by the CLI.

// `!(x > y)` is used on purpose so that NaN fails every threshold check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod eval;
pub mod greedy;
pub mod incremental;
pub mod io;
pub mod linalg;
pub mod pfst;
pub mod report;
pub mod run;
pub mod scatter;
pub mod synth;

pub use dataset::{compute_class_stats, ClassStats, Dataset, FeatureSubset};
pub use error::{Error, Result};
pub use eval::{kfold_cv, lda_fit, lda_predict, CvResult, LdaModel};
pub use greedy::{backward_select, forward_select, stepwise_select, StopRule};
pub use incremental::{CandidateDelta, ScatterContext, SelectionState};
pub use pfst::{pfst_select, PfstConfig};
pub use report::{DropReason, SelectionReport, Stage};
pub use run::{run_benchmark, run_select, Method, ReportDocument, RunSpec};
pub use scatter::{trace_criterion_direct, trace_criterion_mahalanobis};

/// Default relative pivot tolerance below which a scatter matrix is treated as singular.
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-10;
