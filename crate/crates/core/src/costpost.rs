//! Post-processing that still needs the aggregated cost volume: winner-take-all
//! extraction with parabola subpixel refinement, the uniqueness check and the
//! left/right consistency check.
//!
//! Costs equal to [`MAX_COST`] are treated as "no comparison" and are never
//! selected as a minimum or a competitor.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::{DisparityMap, FixedDisparity};
use crate::sgm::{CostVolume, MAX_COST};

/// Uniqueness factor `q` as the rational `numerator / 256`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UniquenessFactor {
    numerator: u32,
}

impl UniquenessFactor {
    pub const DENOMINATOR: u32 = 256;
    pub const ONE: UniquenessFactor = UniquenessFactor { numerator: 256 };

    /// `q` rounded to the nearest multiple of 1/256. Rejects `q < 1`.
    pub fn from_f64(q: f64) -> Result<Self> {
        if !q.is_finite() || !(1.0..=65536.0).contains(&q) {
            return Err(Error::InvalidConfig(format!("uniqueness factor {q} outside [1, 65536]")));
        }
        Ok(UniquenessFactor { numerator: (q * f64::from(Self::DENOMINATOR)).round() as u32 })
    }

    pub fn from_ratio256(numerator: u32) -> Result<Self> {
        if numerator < Self::DENOMINATOR {
            return Err(Error::InvalidConfig(format!("uniqueness factor {numerator}/256 below 1")));
        }
        Ok(UniquenessFactor { numerator })
    }

    pub fn numerator(self) -> u32 {
        self.numerator
    }

    pub fn value(self) -> f64 {
        f64::from(self.numerator) / f64::from(Self::DENOMINATOR)
    }

    /// `best · q < competitor`, exactly.
    #[inline]
    pub fn accepts(self, best: u16, competitor: u16) -> bool {
        u64::from(best) * u64::from(self.numerator)
            < u64::from(competitor) * u64::from(Self::DENOMINATOR)
    }
}

/// Which disparities compete with the winner `j*` in the uniqueness test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CompetitorSet {
    /// Every index except `j*`.
    AllOthers,
    /// Every index with `|j - j*| > 1`; the direct neighbours of the minimum
    /// are part of the same cost valley.
    #[default]
    ExcludeNeighbors,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PostConfig {
    pub uniqueness_factor: UniquenessFactor,
    pub competitors: CompetitorSet,
    /// t_c in whole pixels; `None` disables the check.
    pub consistency_threshold: Option<u32>,
}

impl Default for PostConfig {
    fn default() -> Self {
        PostConfig {
            uniqueness_factor: UniquenessFactor { numerator: 282 }, // ~1.1
            competitors: CompetitorSet::ExcludeNeighbors,
            consistency_threshold: Some(1),
        }
    }
}

/// Lowest index holding the minimum valid cost.
#[inline]
pub fn best_index(column: &[u16]) -> Option<usize> {
    let mut best: Option<(usize, u16)> = None;
    for (j, &c) in column.iter().enumerate() {
        if c != MAX_COST && best.is_none_or(|(_, b)| c < b) {
            best = Some((j, c));
        }
    }
    best.map(|(j, _)| j)
}

/// Parabola vertex offset through `(−1, prev)`, `(0, best)`, `(+1, next)` in
/// 1/16 px, rounded half up and clamped to ±8.
pub fn subpixel_offset(prev: u16, best: u16, next: u16) -> i32 {
    let (cm, c, cp) = (i64::from(prev), i64::from(best), i64::from(next));
    let den = 2 * (cm - 2 * c + cp);
    if den == 0 {
        return 0;
    }
    let num = 16 * (cm - cp);
    // round(num / den) half up, for either sign of den
    let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
    let q = (2 * num + den).div_euclid(2 * den);
    q.clamp(-8, 8) as i32
}

/// Winner-take-all disparity with subpixel refinement for interior minima.
/// Pixels without any valid cost are invalid.
pub fn extract_disparity(vol: &CostVolume) -> Result<DisparityMap> {
    let (w, h, nd) = (vol.width(), vol.height(), vol.num_disparities());
    let od = i32::try_from(vol.disparity_offset()).unwrap_or(i32::MAX);
    let mut out = vec![FixedDisparity::INVALID; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, px) in row.iter_mut().enumerate() {
            let col = vol.column(x, y);
            let Some(j) = best_index(col) else { continue };
            let delta = if j > 0 && j + 1 < nd && col[j - 1] != MAX_COST && col[j + 1] != MAX_COST {
                subpixel_offset(col[j - 1], col[j], col[j + 1])
            } else {
                0
            };
            let raw = (od + j as i32) * 16 + delta;
            *px = FixedDisparity::from_raw(raw.clamp(0, i32::from(u16::MAX) - 1) as u16);
        }
    });
    DisparityMap::new(w, h, out)
}

fn check_shapes(vol: &CostVolume, disp: &DisparityMap) -> Result<()> {
    disp.same_shape(vol.width(), vol.height())
}

/// Smallest competitor cost for winner `j`, or `None` when there is none.
pub fn competitor_min(column: &[u16], j: usize, set: CompetitorSet) -> Option<u16> {
    column
        .iter()
        .enumerate()
        .filter(|&(k, &c)| {
            c != MAX_COST
                && match set {
                    CompetitorSet::AllOthers => k != j,
                    CompetitorSet::ExcludeNeighbors => k.abs_diff(j) > 1,
                }
        })
        .map(|(_, &c)| c)
        .min()
}

/// Invalidates pixels whose best cost times `q` is not strictly below the best
/// competing cost. Pixels without competitors pass.
pub fn uniqueness_check(
    vol: &CostVolume,
    disp: &DisparityMap,
    q: UniquenessFactor,
    set: CompetitorSet,
) -> Result<DisparityMap> {
    check_shapes(vol, disp)?;
    let w = vol.width();
    let mut out = disp.clone();
    out.data_mut().par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, px) in row.iter_mut().enumerate() {
            if !px.is_valid() {
                continue;
            }
            let col = vol.column(x, y);
            let Some(j) = best_index(col) else {
                *px = FixedDisparity::INVALID;
                continue;
            };
            if let Some(m) = competitor_min(col, j, set) {
                if !q.accepts(col[j], m) {
                    *px = FixedDisparity::INVALID;
                }
            }
        }
    });
    Ok(out)
}

/// Right-view integer disparities for row `y`, read along the diagonals of the
/// left-view volume: right pixel `x_r` is seen by left pixel `x_r + o_d + j`
/// at index `j`. Lowest `j` wins ties.
pub fn right_disparities(vol: &CostVolume, y: usize) -> Vec<Option<u32>> {
    let (w, nd) = (vol.width(), vol.num_disparities());
    let od = vol.disparity_offset() as usize;
    (0..w)
        .map(|xr| {
            let mut best: Option<(usize, u16)> = None;
            for j in 0..nd {
                let xl = xr + od + j;
                if xl >= w {
                    break;
                }
                let c = vol.get(xl, y, j);
                if c != MAX_COST && best.is_none_or(|(_, b)| c < b) {
                    best = Some((j, c));
                }
            }
            best.map(|(j, _)| vol.disparity_offset() + j as u32)
        })
        .collect()
}

/// Keeps left pixels whose rounded disparity `d_l` agrees with the right-view
/// disparity at `x - d_l` to within `t_c` pixels.
pub fn consistency_check(
    vol: &CostVolume,
    disp: &DisparityMap,
    threshold: Option<u32>,
) -> Result<DisparityMap> {
    check_shapes(vol, disp)?;
    let Some(tc) = threshold else { return Ok(disp.clone()) };
    let w = vol.width();
    let mut out = disp.clone();
    out.data_mut().par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let right = right_disparities(vol, y);
        for (x, px) in row.iter_mut().enumerate() {
            let Some(dl) = px.rounded() else { continue };
            let keep = x
                .checked_sub(dl as usize)
                .and_then(|xr| right[xr])
                .is_some_and(|dr| u32::from(dl).abs_diff(dr) <= tc);
            if !keep {
                *px = FixedDisparity::INVALID;
            }
        }
    });
    Ok(out)
}
