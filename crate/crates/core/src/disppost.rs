//! Filters applied to the disparity map once the cost volume is gone.
//!
//! Texture and speckle filtering only remove pixels, gap interpolation only
//! adds pixels, and the median filter keeps the valid set unchanged.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::{DisparityMap, FixedDisparity, GrayImage};

/// Side length of the noise-reduction median window.
pub const MEDIAN_WINDOW: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FilterConfig {
    /// t_t; pixels with a lower texture score are invalidated. 0 disables.
    pub texture_threshold: u64,
    /// Odd side length of the texture window.
    pub texture_window: usize,
    /// w_s, minimum speckle population. 0 disables.
    pub speckle_window: usize,
    /// Largest Q12.4 step between connected speckle members.
    pub speckle_max_diff: u16,
    /// l_max, longest fillable gap. 0 disables.
    pub max_gap: usize,
    /// Largest Q12.4 difference between the two edges of a fillable gap.
    pub gap_similarity: u16,
    /// Valid pixels (centre included) required for a median.
    pub median_min_valid: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            texture_threshold: 0,
            texture_window: 5,
            speckle_window: 0,
            speckle_max_diff: 16,
            max_gap: 0,
            gap_similarity: 16,
            median_min_valid: 5,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.texture_window < 3 || self.texture_window.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "texture window must be odd and at least 3 (got {})",
                self.texture_window
            )));
        }
        if self.gap_similarity == 0 {
            return Err(Error::InvalidConfig("gap similarity must be positive".into()));
        }
        if self.median_min_valid > MEDIAN_WINDOW * MEDIAN_WINDOW {
            return Err(Error::InvalidConfig(format!(
                "median_min_valid {} exceeds the window population",
                self.median_min_valid
            )));
        }
        Ok(())
    }
}

/// Windowed sum of squared horizontal differences `I(x+1, y) - I(x, y)`.
/// Differences involving a pixel outside the image count as 0, as do
/// window positions outside the image.
pub fn texture_scores(img: &GrayImage, window: usize) -> Vec<u64> {
    let (w, h) = (img.width(), img.height());
    let r = window / 2;
    let mut grad = vec![0u64; w * h];
    for y in 0..h {
        let row = img.row(y);
        for x in 0..w.saturating_sub(1) {
            let d = i64::from(row[x + 1]) - i64::from(row[x]);
            grad[y * w + x] = (d * d) as u64;
        }
    }
    // separable box sum: horizontal then vertical
    let mut horiz = vec![0u64; w * h];
    horiz.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
        let g = &grad[y * w..(y + 1) * w];
        let mut prefix = vec![0u64; w + 1];
        for x in 0..w {
            prefix[x + 1] = prefix[x] + g[x];
        }
        for (x, o) in out.iter_mut().enumerate() {
            let lo = x.saturating_sub(r);
            let hi = (x + r + 1).min(w);
            *o = prefix[hi] - prefix[lo];
        }
    });
    let mut scores = vec![0u64; w * h];
    scores.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
        let lo = y.saturating_sub(r);
        let hi = (y + r + 1).min(h);
        for yy in lo..hi {
            for (o, &v) in out.iter_mut().zip(&horiz[yy * w..(yy + 1) * w]) {
                *o += v;
            }
        }
    });
    scores
}

pub fn texture_filter(disp: &DisparityMap, left: &GrayImage, cfg: &FilterConfig) -> Result<DisparityMap> {
    cfg.validate()?;
    disp.same_shape(left.width(), left.height())?;
    if cfg.texture_threshold == 0 {
        return Ok(disp.clone());
    }
    let scores = texture_scores(left, cfg.texture_window);
    let mut out = disp.clone();
    for (d, &s) in out.data_mut().iter_mut().zip(&scores) {
        if s < cfg.texture_threshold {
            *d = FixedDisparity::INVALID;
        }
    }
    Ok(out)
}

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let p = self.parent[i as usize];
            self.parent[i as usize] = self.parent[p as usize];
            i = p;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
    }
}

#[inline]
fn connected(a: FixedDisparity, b: FixedDisparity, max_diff: u16) -> bool {
    a.is_valid() && b.is_valid() && a.raw().abs_diff(b.raw()) <= max_diff
}

/// Removes 4-connected components of mutually similar disparities with fewer
/// than `speckle_window` pixels.
pub fn speckle_filter(disp: &DisparityMap, cfg: &FilterConfig) -> Result<DisparityMap> {
    cfg.validate()?;
    if cfg.speckle_window == 0 {
        return Ok(disp.clone());
    }
    let (w, h) = (disp.width(), disp.height());
    let data = disp.data();
    let mut sets = DisjointSet::new(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w && connected(data[i], data[i + 1], cfg.speckle_max_diff) {
                sets.union(i as u32, (i + 1) as u32);
            }
            if y + 1 < h && connected(data[i], data[i + w], cfg.speckle_max_diff) {
                sets.union(i as u32, (i + w) as u32);
            }
        }
    }
    let mut out = disp.clone();
    for (i, d) in out.data_mut().iter_mut().enumerate() {
        if d.is_valid() {
            let root = sets.find(i as u32);
            if (sets.size[root as usize] as usize) < cfg.speckle_window {
                *d = FixedDisparity::INVALID;
            }
        }
    }
    Ok(out)
}

/// Length of the vertical run of invalid pixels through each pixel (0 for
/// valid pixels).
fn vertical_invalid_runs(disp: &DisparityMap) -> Vec<usize> {
    let (w, h) = (disp.width(), disp.height());
    let mut runs = vec![0usize; w * h];
    for x in 0..w {
        let mut y = 0;
        while y < h {
            if disp.get(x, y).is_valid() {
                y += 1;
                continue;
            }
            let start = y;
            while y < h && !disp.get(x, y).is_valid() {
                y += 1;
            }
            for yy in start..y {
                runs[yy * w + x] = y - start;
            }
        }
    }
    runs
}

/// Fills horizontal runs of invalid pixels bounded by similar disparities on
/// both sides. A run pixel is filled when the shorter of its horizontal run
/// and its vertical invalid run is at most `max_gap`; the value is the linear
/// blend of the two edges, rounded half up on the 1/16 grid.
pub fn gap_interpolation(disp: &DisparityMap, cfg: &FilterConfig) -> Result<DisparityMap> {
    cfg.validate()?;
    if cfg.max_gap == 0 {
        return Ok(disp.clone());
    }
    let w = disp.width();
    let vertical = vertical_invalid_runs(disp);
    let mut out = disp.clone();
    out.data_mut().par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let src = &disp.data()[y * w..(y + 1) * w];
        let mut x = 0;
        while x < w {
            if src[x].is_valid() {
                x += 1;
                continue;
            }
            let start = x;
            while x < w && !src[x].is_valid() {
                x += 1;
            }
            if start == 0 || x == w {
                continue;
            }
            let (a, b) = (src[start - 1].raw(), src[x].raw());
            if a.abs_diff(b) > cfg.gap_similarity {
                continue;
            }
            let run = x - start;
            let span = (x - (start - 1)) as i64;
            for xx in start..x {
                if run.min(vertical[y * w + xx]) > cfg.max_gap {
                    continue;
                }
                let t = (xx - (start - 1)) as i64;
                let num = (i64::from(b) - i64::from(a)) * t;
                let v = i64::from(a) + (2 * num + span).div_euclid(2 * span);
                row[xx] = FixedDisparity::from_raw(v as u16);
            }
        }
    });
    Ok(out)
}

/// 3×3 median over valid neighbours, applied to valid pixels whose window
/// holds at least `median_min_valid` valid values. Even counts take the
/// lower middle element.
pub fn noise_filter(disp: &DisparityMap, cfg: &FilterConfig) -> Result<DisparityMap> {
    cfg.validate()?;
    let (w, h) = (disp.width(), disp.height());
    let src = disp.data();
    let mut out = disp.clone();
    out.data_mut().par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut window = Vec::with_capacity(MEDIAN_WINDOW * MEDIAN_WINDOW);
        for (x, px) in row.iter_mut().enumerate() {
            if !src[y * w + x].is_valid() {
                continue;
            }
            window.clear();
            for yy in y.saturating_sub(1)..(y + 2).min(h) {
                for xx in x.saturating_sub(1)..(x + 2).min(w) {
                    let d = src[yy * w + xx];
                    if d.is_valid() {
                        window.push(d.raw());
                    }
                }
            }
            if window.len() >= cfg.median_min_valid {
                window.sort_unstable();
                *px = FixedDisparity::from_raw(window[(window.len() - 1) / 2]);
            }
        }
    });
    Ok(out)
}
