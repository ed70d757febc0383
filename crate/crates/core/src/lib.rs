//! Single-shot HDR imaging from spatially varying exposure (SVE) Bayer raws,
//! with hue correction on the constant hue plane.
//!
//! The core is generic over the float type ([`Scalar`], implemented for
//! `f32` and `f64`); the aliases below name the common instantiations.

pub mod corpus;
pub mod hue_plane;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod raw_sve;
pub mod scalar;

pub use hue_plane::{
    decompose, max_saturated_color, recompose, transplant_hue, HueError, HuePlaneDecomposition, RgbPixel,
    ACHROMATIC_EPSILON,
};
pub use metrics::{evaluate, evaluate_pair, MetricsError, MetricsReport};
pub use pipeline::{
    run_pipeline, BranchCounts, HueBranch, Method, PipelineConfig, PipelineError, PipelineOutput, RgbImage,
};
pub use raw_sve::{
    simulate_sve_capture, BayerSveImage, BitDepth, ClipFlag, ClipMask, ExposureAnchor, HdrImage, SveError,
};
pub use scalar::{CompensatedSum, Scalar};

pub type RgbPixel64 = RgbPixel<f64>;
pub type RgbPixel32 = RgbPixel<f32>;
pub type RgbImage64 = RgbImage<f64>;
pub type RgbImage32 = RgbImage<f32>;
pub type HdrImage64 = HdrImage<f64>;
pub type HdrImage32 = HdrImage<f32>;
pub type BayerSveImage64 = BayerSveImage<f64>;
pub type BayerSveImage32 = BayerSveImage<f32>;
pub type Decomposition64 = HuePlaneDecomposition<f64>;
pub type Decomposition32 = HuePlaneDecomposition<f32>;
