//! Stage orchestration, configuration, synthetic scenes, evaluation and the
//! throughput harness.

mod bench;
mod config;
mod eval;
mod scene;

pub use bench::{benchmark, BenchReport};
pub use config::{parse_config, PipelineConfig, Profile, Stages};
pub use eval::{evaluate, Metrics, BAD_PIXEL_THRESHOLDS};
pub use scene::{gen_test_scene, synthetic_map, Scene, SceneKind, Texture};

use crate::census::census_transform;
use crate::costpost::{consistency_check, extract_disparity, uniqueness_check};
use crate::disppost::{gap_interpolation, noise_filter, speckle_filter, texture_filter};
use crate::error::{Error, Result, Stage};
use crate::imagecore::{DisparityMap, GrayImage};
use crate::rectify::{rectify_pair, RectificationMap};
use crate::sgm::{aggregate, matching_cost};

/// Runs every enabled stage in block-diagram order:
/// rectify → census → matching cost → aggregation → extraction →
/// uniqueness → consistency → texture → speckle → gap → noise.
///
/// `map` is required when `cfg.stages.rectify` is set.
pub fn run_pipeline(
    left: &GrayImage,
    right: &GrayImage,
    cfg: &PipelineConfig,
    map: Option<&RectificationMap>,
) -> Result<DisparityMap> {
    cfg.validate()?;
    if left.width() != right.width() || left.height() != right.height() {
        return Err(Error::DimensionMismatch(left.width(), left.height(), right.width(), right.height()));
    }
    let st = &cfg.stages;

    let rectified;
    let (left, right) = if st.rectify {
        let map = map.ok_or_else(|| {
            Error::InvalidConfig("rectification enabled without a map".into()).at(Stage::Rectify)
        })?;
        rectified = rectify_pair(left, right, map).map_err(|e| e.at(Stage::Rectify))?;
        (&rectified.0, &rectified.1)
    } else {
        (left, right)
    };

    let (cl, cr) = rayon::join(|| census_transform(left), || census_transform(right));
    let (cl, cr) = (cl.map_err(|e| e.at(Stage::Census))?, cr.map_err(|e| e.at(Stage::Census))?);
    let raw = matching_cost(&cl, &cr, &cfg.matching).map_err(|e| e.at(Stage::MatchingCost))?;
    drop((cl, cr));
    let vol = aggregate(&raw, &cfg.matching).map_err(|e| e.at(Stage::Aggregate))?;
    drop(raw);

    let mut disp = extract_disparity(&vol).map_err(|e| e.at(Stage::Extract))?;
    if st.uniqueness {
        disp = uniqueness_check(&vol, &disp, cfg.post.uniqueness_factor, cfg.post.competitors)
            .map_err(|e| e.at(Stage::Uniqueness))?;
    }
    if st.consistency {
        disp = consistency_check(&vol, &disp, cfg.post.consistency_threshold)
            .map_err(|e| e.at(Stage::Consistency))?;
    }
    drop(vol);

    if st.texture {
        disp = texture_filter(&disp, left, &cfg.filter).map_err(|e| e.at(Stage::Texture))?;
    }
    if st.speckle {
        disp = speckle_filter(&disp, &cfg.filter).map_err(|e| e.at(Stage::Speckle))?;
    }
    if st.gap {
        disp = gap_interpolation(&disp, &cfg.filter).map_err(|e| e.at(Stage::Gap))?;
    }
    if st.noise {
        disp = noise_filter(&disp, &cfg.filter).map_err(|e| e.at(Stage::Noise))?;
    }
    Ok(disp)
}
