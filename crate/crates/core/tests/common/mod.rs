//! Brute-force reference implementations shared by the integration tests.
//! Each one follows the definition literally and never calls into the
//! library's algorithmic code.

#![allow(dead_code)]

use std::collections::VecDeque;

use rand::Rng;
use stereopipe::{DisparityMap, FixedDisparity, GrayImage};

pub const INVALID: u16 = u16::MAX;
pub const SENTINEL: u16 = u16::MAX;

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::new(w, h, (0..w * h).map(|_| rng.gen()).collect()).unwrap()
}

/// Random map where roughly `valid` of the pixels hold one of a few
/// clustered values, so components, gaps and medians all occur.
pub fn random_disparity(rng: &mut impl Rng, w: usize, h: usize, valid: f64) -> DisparityMap {
    let base: u16 = rng.gen_range(0..400);
    let raw: Vec<u16> = (0..w * h)
        .map(|_| if rng.gen_bool(valid) { base + rng.gen_range(0..48) } else { INVALID })
        .collect();
    DisparityMap::from_raw(w, h, &raw).unwrap()
}

pub fn raw(m: &DisparityMap) -> Vec<u16> {
    m.data().iter().map(|d| d.raw()).collect()
}

pub fn census_ref(img: &GrayImage) -> Vec<u32> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let at = |x: i64, y: i64| if x < 0 || y < 0 || x >= w || y >= h { 0 } else { img.get(x as usize, y as usize) };
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let centre = at(x, y);
            let mut bits = 0u32;
            let mut k = 0;
            for dy in -2..=2 {
                for dx in -2..=2 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    if at(x + dx, y + dy) < centre {
                        bits |= 1 << k;
                    }
                    k += 1;
                }
            }
            out.push(bits);
        }
    }
    out
}

fn popcount(mut v: u32) -> u16 {
    let mut n = 0;
    while v != 0 {
        n += (v & 1) as u16;
        v >>= 1;
    }
    n
}

/// Raw cost volume, layout `[(y * w + x) * nd + j]`.
pub fn cost_ref(cl: &[u32], cr: &[u32], w: usize, h: usize, od: usize, nd: usize) -> Vec<u16> {
    let mut out = Vec::with_capacity(w * h * nd);
    for y in 0..h {
        for x in 0..w {
            for j in 0..nd {
                let d = od + j;
                out.push(if x >= d { popcount(cl[y * w + x] ^ cr[y * w + x - d]) } else { SENTINEL });
            }
        }
    }
    out
}

pub const PATHS: [(i64, i64); 4] = [(-1, 0), (0, -1), (-1, -1), (1, -1)];

/// One path of the four-path recursion, computed in wide integers with the
/// result of every step clamped to 65535.
pub fn path_ref(raw: &[u16], w: usize, h: usize, nd: usize, p1: u64, p2: u64, (dx, dy): (i64, i64)) -> Vec<u64> {
    let mut l = vec![0u64; raw.len()];
    // raster order visits every predecessor first for all four directions
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = (y as usize * w + x as usize) * nd;
            let (px, py) = (x + dx, y + dy);
            if px < 0 || py < 0 || px >= w as i64 {
                for d in 0..nd {
                    l[i + d] = u64::from(raw[i + d]);
                }
                continue;
            }
            let p = (py as usize * w + px as usize) * nd;
            let prev = l[p..p + nd].to_vec();
            let m = *prev.iter().min().unwrap();
            for d in 0..nd {
                let mut cands = vec![prev[d], m + p2];
                if d > 0 {
                    cands.push(prev[d - 1] + p1);
                }
                if d + 1 < nd {
                    cands.push(prev[d + 1] + p1);
                }
                let v = u64::from(raw[i + d]) + cands.into_iter().min().unwrap() - m;
                l[i + d] = v.min(65535);
            }
        }
    }
    l
}

pub fn aggregate_ref(raw: &[u16], w: usize, h: usize, nd: usize, p1: u16, p2: u16) -> Vec<u16> {
    let paths: Vec<Vec<u64>> =
        PATHS.iter().map(|&dir| path_ref(raw, w, h, nd, p1.into(), p2.into(), dir)).collect();
    (0..raw.len()).map(|i| paths.iter().map(|p| p[i]).sum::<u64>().min(65535) as u16).collect()
}

/// Lowest index of the minimum non-sentinel cost.
pub fn argmin_ref(col: &[u16]) -> Option<usize> {
    let valid: Vec<(usize, u16)> = col.iter().copied().enumerate().filter(|&(_, c)| c != SENTINEL).collect();
    let m = valid.iter().map(|&(_, c)| c).min()?;
    valid.iter().find(|&&(_, c)| c == m).map(|&(j, _)| j)
}

/// Keep/reject decision of the uniqueness test with `q = numerator / 256`,
/// evaluated in floating point.
pub fn uniqueness_keeps(col: &[u16], numerator: u32, exclude_neighbours: bool) -> bool {
    let Some(j) = argmin_ref(col) else { return false };
    let q = f64::from(numerator) / 256.0;
    let best = f64::from(col[j]);
    let competitors = col.iter().enumerate().filter(|&(k, &c)| {
        c != SENTINEL && if exclude_neighbours { (k as i64 - j as i64).abs() > 1 } else { k != j }
    });
    match competitors.map(|(_, &c)| f64::from(c)).reduce(f64::min) {
        None => true,
        Some(m) => best * q < m,
    }
}

/// Right-view winner-take-all: right pixel `xr` against left pixels `xr + d`,
/// using the cost function `cost(xl, d)`. Lowest disparity wins ties.
pub fn right_matcher(w: usize, od: usize, nd: usize, cost: impl Fn(usize, usize) -> u16) -> Vec<Option<usize>> {
    (0..w)
        .map(|xr| {
            let mut best: Option<(usize, u16)> = None;
            for d in od..od + nd {
                if xr + d >= w {
                    continue;
                }
                let c = cost(xr + d, d);
                if c == SENTINEL {
                    continue;
                }
                if best.is_none_or(|(_, b)| c < b) {
                    best = Some((d, c));
                }
            }
            best.map(|(d, _)| d)
        })
        .collect()
}

pub fn texture_ref(img: &GrayImage, window: usize) -> Vec<u64> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let r = (window / 2) as i64;
    let grad = |x: i64, y: i64| -> u64 {
        if x < 0 || y < 0 || x + 1 >= w || y >= h {
            return 0;
        }
        let d = i64::from(img.get(x as usize + 1, y as usize)) - i64::from(img.get(x as usize, y as usize));
        (d * d) as u64
    };
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let mut s = 0;
            for yy in y - r..=y + r {
                for xx in x - r..=x + r {
                    s += grad(xx, yy);
                }
            }
            out.push(s);
        }
    }
    out
}

/// Speckle removal by breadth-first flood fill.
pub fn speckle_ref(src: &[u16], w: usize, h: usize, min_size: usize, max_diff: u16) -> Vec<u16> {
    let mut out = src.to_vec();
    let mut seen = vec![false; w * h];
    for start in 0..w * h {
        if seen[start] || src[start] == INVALID {
            continue;
        }
        let mut component = vec![start];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            let mut nbrs = Vec::new();
            if x > 0 {
                nbrs.push(i - 1);
            }
            if x + 1 < w {
                nbrs.push(i + 1);
            }
            if y > 0 {
                nbrs.push(i - w);
            }
            if y + 1 < h {
                nbrs.push(i + w);
            }
            for n in nbrs {
                if !seen[n] && src[n] != INVALID && src[n].abs_diff(src[i]) <= max_diff {
                    seen[n] = true;
                    component.push(n);
                    queue.push_back(n);
                }
            }
        }
        if component.len() < min_size {
            for i in component {
                out[i] = INVALID;
            }
        }
    }
    out
}

/// Gap filling evaluated independently for every invalid pixel.
pub fn gap_ref(src: &[u16], w: usize, h: usize, max_gap: usize, similarity: u16) -> Vec<u16> {
    let mut out = src.to_vec();
    for y in 0..h {
        for x in 0..w {
            if src[y * w + x] != INVALID {
                continue;
            }
            let left = (0..x).rev().find(|&k| src[y * w + k] != INVALID);
            let right = (x + 1..w).find(|&k| src[y * w + k] != INVALID);
            let (Some(xa), Some(xb)) = (left, right) else { continue };
            let (a, b) = (src[y * w + xa], src[y * w + xb]);
            if a.abs_diff(b) > similarity {
                continue;
            }
            let horizontal = xb - xa - 1;
            let up = (0..y).rev().take_while(|&k| src[k * w + x] == INVALID).count();
            let down = (y + 1..h).take_while(|&k| src[k * w + x] == INVALID).count();
            if horizontal.min(up + down + 1) > max_gap {
                continue;
            }
            let t = (x - xa) as f64 / (xb - xa) as f64;
            let v = f64::from(a) + (f64::from(b) - f64::from(a)) * t;
            out[y * w + x] = (v + 0.5).floor() as u16;
        }
    }
    out
}

pub fn median_ref(src: &[u16], w: usize, h: usize, min_valid: usize) -> Vec<u16> {
    let mut out = src.to_vec();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            if src[i] == INVALID {
                continue;
            }
            let mut vals = Vec::new();
            for yy in y - 1..=y + 1 {
                for xx in x - 1..=x + 1 {
                    if xx >= 0 && yy >= 0 && xx < w as i64 && yy < h as i64 {
                        let v = src[yy as usize * w + xx as usize];
                        if v != INVALID {
                            vals.push(v);
                        }
                    }
                }
            }
            if vals.len() >= min_valid {
                vals.sort();
                out[i] = vals[(vals.len() - 1) / 2];
            }
        }
    }
    out
}

/// Bilinear sampling in floating point: support is the set of source pixels
/// with non-zero weight; if any lies outside the image the result is 0.
pub fn bilinear_ref(img: &GrayImage, x: usize, y: usize, dx16: i16, dy16: i16) -> u8 {
    let sx = x as f64 + f64::from(dx16) / 16.0;
    let sy = y as f64 + f64::from(dy16) / 16.0;
    let (x0, y0) = (sx.floor(), sy.floor());
    let (fx, fy) = (sx - x0, sy - y0);
    let mut acc = 0.0;
    for (xx, wx) in [(x0, 1.0 - fx), (x0 + 1.0, fx)] {
        for (yy, wy) in [(y0, 1.0 - fy), (y0 + 1.0, fy)] {
            if wx * wy == 0.0 {
                continue;
            }
            if xx < 0.0 || yy < 0.0 || xx >= img.width() as f64 || yy >= img.height() as f64 {
                return 0;
            }
            acc += wx * wy * f64::from(img.get(xx as usize, yy as usize));
        }
    }
    (acc + 0.5).floor() as u8
}

pub fn fixed(v: f64) -> FixedDisparity {
    FixedDisparity::from_f64(v).unwrap()
}
