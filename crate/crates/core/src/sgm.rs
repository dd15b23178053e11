//! Census/Hamming matching costs and semi-global cost aggregation.
//!
//! Aggregation follows the usual path recursion
//!
//! ```text
//! L_r(p, d) = C(p, d) + min(L_r(p-r, d),
//!                           L_r(p-r, d±1) + P1,
//!                           min_k L_r(p-r, k) + P2) - min_k L_r(p-r, k)
//! ```
//!
//! over four causal paths (left→right, top→bottom and both downward
//! diagonals), so the whole volume can be produced in one top-to-bottom
//! sweep. All cost words are 16 bit and saturate at [`MAX_COST`].

use rayon::prelude::*;

use crate::census::CensusImage;
use crate::error::{Error, Result};

/// Saturation value, also used to mark comparisons that leave the image.
pub const MAX_COST: u16 = u16::MAX;

/// Largest integer disparity representable in Q12.4.
pub const MAX_REPRESENTABLE_DISPARITY: u32 = 4095;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatchConfig {
    /// P1, charged for a ±1 disparity change between path neighbours.
    pub penalty_small: u16,
    /// P2, charged for any larger change.
    pub penalty_large: u16,
    /// o_d, the smallest disparity searched.
    pub disparity_offset: u32,
    /// n_i, number of matching iterations per pixel.
    pub iterations: u32,
    /// p, disparities compared per iteration.
    pub parallelism: u32,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            penalty_small: 10,
            penalty_large: 120,
            disparity_offset: 0,
            iterations: 4,
            parallelism: 32,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.penalty_small == 0 || self.penalty_small >= self.penalty_large {
            return Err(Error::InvalidConfig(format!(
                "penalties must satisfy 0 < P1 < P2 (got P1={}, P2={})",
                self.penalty_small, self.penalty_large
            )));
        }
        if self.iterations == 0 || self.parallelism == 0 {
            return Err(Error::InvalidConfig("n_i and p must be at least 1".into()));
        }
        let d_max = u64::from(self.disparity_offset)
            + u64::from(self.iterations) * u64::from(self.parallelism)
            - 1;
        if d_max > u64::from(MAX_REPRESENTABLE_DISPARITY) {
            return Err(Error::InvalidConfig(format!(
                "maximum disparity {d_max} exceeds {MAX_REPRESENTABLE_DISPARITY}"
            )));
        }
        Ok(())
    }

    pub fn num_disparities(&self) -> usize {
        (self.iterations * self.parallelism) as usize
    }
}

/// `d_max = o_d + n_i·p − 1`.
pub fn max_disparity(cfg: &MatchConfig) -> u32 {
    cfg.disparity_offset + cfg.iterations * cfg.parallelism - 1
}

/// Matching costs indexed by pixel and disparity index `j`, where `j`
/// stands for disparity `disparity_offset + j`. Layout is
/// `[(y * width + x) * num_disparities + j]`.
#[derive(Clone, PartialEq, Eq)]
pub struct CostVolume {
    width: usize,
    height: usize,
    num_disparities: usize,
    disparity_offset: u32,
    costs: Vec<u16>,
}

impl CostVolume {
    pub fn new(
        width: usize,
        height: usize,
        num_disparities: usize,
        disparity_offset: u32,
        costs: Vec<u16>,
    ) -> Result<Self> {
        if num_disparities == 0 || costs.len() != width * height * num_disparities {
            return Err(Error::DataLength { width, height, len: costs.len() });
        }
        Ok(Self { width, height, num_disparities, disparity_offset, costs })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_disparities(&self) -> usize {
        self.num_disparities
    }

    pub fn disparity_offset(&self) -> u32 {
        self.disparity_offset
    }

    pub fn costs(&self) -> &[u16] {
        &self.costs
    }

    /// The cost column of pixel `(x, y)`.
    #[inline]
    pub fn column(&self, x: usize, y: usize) -> &[u16] {
        let start = (y * self.width + x) * self.num_disparities;
        &self.costs[start..start + self.num_disparities]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, j: usize) -> u16 {
        self.costs[(y * self.width + x) * self.num_disparities + j]
    }
}

impl std::fmt::Debug for CostVolume {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "CostVolume({}x{}x{}, o_d={})",
            self.width, self.height, self.num_disparities, self.disparity_offset
        )
    }
}

/// Hamming distance between each left descriptor and the right descriptor
/// `o_d + j` pixels to its left.
pub fn matching_cost(left: &CensusImage, right: &CensusImage, cfg: &MatchConfig) -> Result<CostVolume> {
    cfg.validate()?;
    let (w, h) = (left.width(), left.height());
    if right.width() != w || right.height() != h {
        return Err(Error::DimensionMismatch(w, h, right.width(), right.height()));
    }
    let nd = cfg.num_disparities();
    let od = cfg.disparity_offset as usize;
    let mut costs = vec![MAX_COST; w * h * nd];
    costs.par_chunks_mut(w * nd).enumerate().for_each(|(y, row)| {
        let (lrow, rrow) = (&left.data()[y * w..(y + 1) * w], &right.data()[y * w..(y + 1) * w]);
        for (x, col) in row.chunks_exact_mut(nd).enumerate() {
            let l = lrow[x];
            // valid while x - (o_d + j) >= 0
            let valid = (x + 1).saturating_sub(od).min(nd);
            for (j, c) in col[..valid].iter_mut().enumerate() {
                *c = (l ^ rrow[x - od - j]).count_ones() as u16;
            }
        }
    });
    CostVolume::new(w, h, nd, cfg.disparity_offset, costs)
}

/// Direction a path travels through the image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggregationPath {
    LeftToRight,
    TopToBottom,
    TopLeftToBottomRight,
    TopRightToBottomLeft,
}

impl AggregationPath {
    pub const ALL: [AggregationPath; 4] = [
        AggregationPath::LeftToRight,
        AggregationPath::TopToBottom,
        AggregationPath::TopLeftToBottomRight,
        AggregationPath::TopRightToBottomLeft,
    ];

    /// Offset `(dx, dy)` from a pixel to its predecessor on the path.
    pub fn predecessor(self) -> (isize, isize) {
        match self {
            AggregationPath::LeftToRight => (-1, 0),
            AggregationPath::TopToBottom => (0, -1),
            AggregationPath::TopLeftToBottomRight => (-1, -1),
            AggregationPath::TopRightToBottomLeft => (1, -1),
        }
    }
}

/// Sums all four paths.
pub fn aggregate(raw: &CostVolume, cfg: &MatchConfig) -> Result<CostVolume> {
    aggregate_paths(raw, cfg, &AggregationPath::ALL)
}

/// Saturating sum of the listed paths. Listing a path twice counts it twice.
pub fn aggregate_paths(
    raw: &CostVolume,
    cfg: &MatchConfig,
    paths: &[AggregationPath],
) -> Result<CostVolume> {
    cfg.validate()?;
    let (w, h, nd) = (raw.width, raw.height, raw.num_disparities);
    let (p1, p2) = (u32::from(cfg.penalty_small), u32::from(cfg.penalty_large));
    let mut out = vec![0u16; raw.costs.len()];

    let horizontal = paths.iter().filter(|&&p| p == AggregationPath::LeftToRight).count();
    if horizontal > 0 {
        out.par_chunks_mut(w * nd).enumerate().for_each(|(y, out_row)| {
            let raw_row = &raw.costs[y * w * nd..(y + 1) * w * nd];
            let mut prev = vec![0u16; nd];
            let mut cur = vec![0u16; nd];
            let mut prev_min = 0u16;
            for x in 0..w {
                let c = &raw_row[x * nd..(x + 1) * nd];
                let cur_min = if x == 0 {
                    cur.copy_from_slice(c);
                    *c.iter().min().unwrap()
                } else {
                    step(c, &prev, prev_min, p1, p2, &mut cur)
                };
                for _ in 0..horizontal {
                    accumulate(&mut out_row[x * nd..(x + 1) * nd], &cur);
                }
                std::mem::swap(&mut prev, &mut cur);
                prev_min = cur_min;
            }
        });
    }

    let vertical: Vec<AggregationPath> =
        paths.iter().copied().filter(|&p| p != AggregationPath::LeftToRight).collect();
    if !vertical.is_empty() {
        let np = vertical.len();
        // per path: previous and current row of L, plus per-pixel minima
        let mut prev = vec![0u16; np * w * nd];
        let mut cur = vec![0u16; np * w * nd];
        let mut prev_min = vec![0u16; np * w];
        let mut cur_min = vec![0u16; np * w];
        for y in 0..h {
            let raw_row = &raw.costs[y * w * nd..(y + 1) * w * nd];
            for (k, &path) in vertical.iter().enumerate() {
                let prev_l = &prev[k * w * nd..(k + 1) * w * nd];
                let prev_m = &prev_min[k * w..(k + 1) * w];
                let (dx, _) = path.predecessor();
                cur[k * w * nd..(k + 1) * w * nd]
                    .par_chunks_mut(nd)
                    .zip(cur_min[k * w..(k + 1) * w].par_iter_mut())
                    .enumerate()
                    .with_min_len(16)
                    .for_each(|(x, (l, m))| {
                        let c = &raw_row[x * nd..(x + 1) * nd];
                        let px = x as isize + dx;
                        *m = if y == 0 || px < 0 || px >= w as isize {
                            l.copy_from_slice(c);
                            *c.iter().min().unwrap()
                        } else {
                            let px = px as usize;
                            step(c, &prev_l[px * nd..(px + 1) * nd], prev_m[px], p1, p2, l)
                        };
                    });
            }
            let out_row = &mut out[y * w * nd..(y + 1) * w * nd];
            out_row.par_chunks_mut(nd).enumerate().with_min_len(16).for_each(|(x, o)| {
                for k in 0..np {
                    let start = k * w * nd + x * nd;
                    accumulate(o, &cur[start..start + nd]);
                }
            });
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut prev_min, &mut cur_min);
        }
    }

    CostVolume::new(w, h, nd, raw.disparity_offset, out)
}

/// One recursion step; writes `L_r(p, ·)` into `out` and returns its minimum.
#[inline]
fn step(c: &[u16], prev: &[u16], prev_min: u16, p1: u32, p2: u32, out: &mut [u16]) -> u16 {
    let nd = c.len();
    let pm = u32::from(prev_min);
    let jump = pm + p2;
    let cell = |cost: u16, best: u32| (u32::from(cost) + best - pm).min(u32::from(MAX_COST)) as u16;
    if nd == 1 {
        out[0] = cell(c[0], u32::from(prev[0]).min(jump));
        return out[0];
    }
    out[0] = cell(c[0], u32::from(prev[0]).min(jump).min(u32::from(prev[1]) + p1));
    out[nd - 1] = cell(c[nd - 1], u32::from(prev[nd - 1]).min(jump).min(u32::from(prev[nd - 2]) + p1));
    // branch-free interior so the loop vectorises
    let (lo, mid, hi) = (&prev[..nd - 2], &prev[1..nd - 1], &prev[2..]);
    for ((((o, &cd), &a), &b), &e) in out[1..nd - 1].iter_mut().zip(&c[1..nd - 1]).zip(lo).zip(mid).zip(hi) {
        let best = u32::from(b).min(jump).min(u32::from(a).min(u32::from(e)) + p1);
        *o = cell(cd, best);
    }
    out.iter().copied().min().unwrap_or(MAX_COST)
}

#[inline]
fn accumulate(acc: &mut [u16], add: &[u16]) {
    for (a, &b) in acc.iter_mut().zip(add) {
        *a = a.saturating_add(b);
    }
}
