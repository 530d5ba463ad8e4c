// SPDX-License-Identifier: MIT OR Apache-2.0

//! Optimal changepoint detection for piecewise-constant means with exact
//! post-selection p-values for the detected changepoints.
//!
//! Detection minimizes the within-segment squared error with either a fixed
//! number of changepoints or a per-changepoint penalty. Inference conditions
//! on the detected vector being selected, which a parametric DP over a line
//! through data space characterizes exactly as a finite union of intervals.

pub mod detect;
pub mod envelope;
pub mod error;
pub mod format;
pub mod inference;
pub mod intervals;
pub mod model;
pub mod paradp;
pub mod quadratic;
pub mod sim;

pub use detect::{
    default_beta, detect_fixed_k, detect_fixed_k_with, detect_penalized, detect_penalized_with, mad_variance,
    DpTable, PenalizedTable,
};
pub use envelope::{para_cp, Envelope, PiecewiseSolution};
pub use error::{Error, Result};
pub use inference::{
    bonferroni_adjust, contrast_vector, estimate_variance_max_segment, line_embedding, naive_p, optseg_si,
    run_inference, selection_region, truncated_gaussian_two_sided_p, truncation_region, Detection, InferenceOptions, Method,
    Selection, TestResult,
};
pub use intervals::IntervalSet;
pub use model::{
    loss_fixed, loss_penalized, segment_cost, Covariance, CpVector, DenseMatrix, LineEmbedding, ObservedSequence,
};
pub use paradp::{para_dp_fixed_k, para_dp_penalized, ParaDpOptions, ParaDpOutput, ParametricPath};
pub use quadratic::{quad_loss, quad_segment_cost, QuadraticFn};
