//! Visual token pruning by spatially-augmented greedy k-center, with
//! baseline selectors, coverage-radius diagnostics, a closed-form FLOPs
//! model of the segmentation pipeline, and a sweep harness.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64`/`*32` aliases below name the concrete instantiations. `f64` is the
//! reference precision used by the CLI and the sweep harness.

pub mod error;
pub mod flops;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod scalar;
pub mod select;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
pub use flops::{
    flops_lm, flops_mask, flops_prune, flops_temporal, flops_total, flops_vision, flops_vmtf,
    sequence_length, tflops_maintext, FlopsBreakdown, FlopsOptions, FrameAccounting, ModelDims,
    WorkloadPreset,
};
pub use grid::{
    augment, normalize_features, total_variance, AugmentedTokens, PruneConfig, TokenGrid,
    DEFAULT_EPSILON,
};
pub use metrics::{
    coverage_radius, epsilon_ball_coverage, feature_coverage_radius, joint_coverage_radius,
    spatial_coverage_radius, CoverageReport, FeatureSpace,
};
pub use scalar::Scalar;
pub use select::{
    farthest_first, oracle_optimal_radius, select, select_divmax, select_evtp, select_kcenter,
    select_random, Method, Selection,
};
pub use sweep::{run_sweep, SweepInput, SweepOutcome, SweepSpec};
pub use synth::{generate, SynthKind, SynthSpec};

pub type TokenGrid64 = TokenGrid<f64>;
pub type TokenGrid32 = TokenGrid<f32>;
pub type AugmentedTokens64 = AugmentedTokens<f64>;
pub type AugmentedTokens32 = AugmentedTokens<f32>;
