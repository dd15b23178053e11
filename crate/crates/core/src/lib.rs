//! Stereo disparity estimation modelled on a streaming FPGA pipeline.
//!
//! The processing chain mirrors a hardware block structure:
//!
//! 1. [`rectify`]: bilinear remap of both images through a compressed
//!    displacement map.
//! 2. [`census`]: 5×5 census transform of both rectified images.
//! 3. [`sgm`]: Hamming matching costs and four-path semi-global aggregation.
//! 4. [`costpost`]: subpixel parabola refinement, uniqueness and
//!    left/right consistency checks evaluated on the cost volume.
//! 5. [`disppost`]: texture, speckle, gap-interpolation and median filters
//!    on the disparity map.
//!
//! [`pipeline`] wires the stages together, owns the configuration model and
//! provides the synthetic scenes and throughput harness.
//!
//! Disparities are carried as Q12.4 fixed point ([`FixedDisparity`]), i.e.
//! with a resolution of 1/16 pixel.

pub mod census;
pub mod costpost;
pub mod disppost;
mod error;
pub mod imagecore;
pub mod pipeline;
pub mod rectify;
pub mod sgm;

pub use census::{census_transform, CensusImage};
pub use costpost::{
    consistency_check, extract_disparity, uniqueness_check, CompetitorSet, PostConfig,
    UniquenessFactor,
};
pub use disppost::{gap_interpolation, noise_filter, speckle_filter, texture_filter, FilterConfig};
pub use error::{Error, Result, Stage};
pub use imagecore::{DisparityMap, FixedDisparity, GrayImage, MAX_DIMENSION};
pub use pipeline::{
    benchmark, evaluate, gen_test_scene, run_pipeline, BenchReport, Metrics, PipelineConfig,
    Profile, Scene, SceneKind, Stages,
};
pub use rectify::{decode_map, encode_map, rectify_pair, remap, Offset, RectificationMap};
pub use sgm::{aggregate, matching_cost, max_disparity, AggregationPath, CostVolume, MatchConfig};
