use crate::error::{Error, Result};
use crate::imagecore::DisparityMap;

/// Error thresholds, in pixels, for the bad-pixel rates.
pub const BAD_PIXEL_THRESHOLDS: [f64; 3] = [0.5, 1.0, 2.0];

/// Accuracy of a disparity map against ground truth.
///
/// Error figures are computed over pixels that are valid in both maps and not
/// occluded; they are `None` when no such pixel exists.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    /// Fraction of valid pixels in the evaluated map.
    pub density: f64,
    /// Fraction of compared pixels with error above each threshold of
    /// [`BAD_PIXEL_THRESHOLDS`].
    pub bad: Option<[f64; 3]>,
    pub mean_abs_error: Option<f64>,
    pub compared: usize,
}

pub fn evaluate(disp: &DisparityMap, truth: &DisparityMap, occluded: Option<&[bool]>) -> Result<Metrics> {
    disp.same_shape(truth.width(), truth.height())?;
    if let Some(mask) = occluded {
        if mask.len() != truth.data().len() {
            return Err(Error::DataLength { width: truth.width(), height: truth.height(), len: mask.len() });
        }
    }
    let mut bad = [0usize; 3];
    let mut abs_sum = 0.0;
    let mut compared = 0usize;
    for (i, (d, t)) in disp.data().iter().zip(truth.data()).enumerate() {
        if occluded.is_some_and(|m| m[i]) {
            continue;
        }
        let (Some(d), Some(t)) = (d.value(), t.value()) else { continue };
        let err = (d - t).abs();
        compared += 1;
        abs_sum += err;
        for (b, thr) in bad.iter_mut().zip(BAD_PIXEL_THRESHOLDS) {
            if err > thr {
                *b += 1;
            }
        }
    }
    let n = compared as f64;
    Ok(Metrics {
        density: disp.density(),
        bad: (compared > 0).then(|| bad.map(|b| b as f64 / n)),
        mean_abs_error: (compared > 0).then(|| abs_sum / n),
        compared,
    })
}
