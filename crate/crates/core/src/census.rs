//! 5×5 census transform.
//!
//! Bit `k` of a descriptor is set when the `k`-th neighbor (raster order over
//! the 5×5 window, centre skipped, bit 0 = top-left) is strictly darker than
//! the centre. Neighbors outside the image read as intensity 0.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::GrayImage;

pub const WINDOW: usize = 5;
const RADIUS: isize = (WINDOW / 2) as isize;

#[derive(Clone, PartialEq, Eq)]
pub struct CensusImage {
    width: usize,
    height: usize,
    data: Vec<u32>,
}

impl CensusImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.data[y * self.width + x]
    }

    /// Wraps precomputed descriptors; only the low 24 bits are meaningful.
    pub fn from_descriptors(width: usize, height: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DataLength { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }
}

impl std::fmt::Debug for CensusImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CensusImage({}x{})", self.width, self.height)
    }
}

pub fn census_transform(img: &GrayImage) -> Result<CensusImage> {
    let (w, h) = (img.width(), img.height());
    if w < WINDOW || h < WINDOW {
        return Err(Error::ImageTooSmall { width: w, height: h, min: WINDOW });
    }
    let src = img.data();
    let mut data = vec![0u32; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let interior_y = y as isize >= RADIUS && (y as isize) < h as isize - RADIUS;
        for (x, out) in row.iter_mut().enumerate() {
            let interior = interior_y && x as isize >= RADIUS && (x as isize) < w as isize - RADIUS;
            *out = if interior {
                descriptor_interior(src, w, x, y)
            } else {
                descriptor_padded(src, w, h, x, y)
            };
        }
    });
    Ok(CensusImage { width: w, height: h, data })
}

#[inline]
fn descriptor_interior(src: &[u8], w: usize, x: usize, y: usize) -> u32 {
    let c = src[y * w + x];
    let mut bits = 0u32;
    let mut k = 0;
    for yy in y - 2..=y + 2 {
        let row = &src[yy * w + x - 2..yy * w + x + 3];
        for (i, &v) in row.iter().enumerate() {
            if yy == y && i == 2 {
                continue;
            }
            bits |= u32::from(v < c) << k;
            k += 1;
        }
    }
    bits
}

fn descriptor_padded(src: &[u8], w: usize, h: usize, x: usize, y: usize) -> u32 {
    let c = src[y * w + x];
    let mut bits = 0u32;
    let mut k = 0;
    for dy in -RADIUS..=RADIUS {
        for dx in -RADIUS..=RADIUS {
            if dx == 0 && dy == 0 {
                continue;
            }
            let (xx, yy) = (x as isize + dx, y as isize + dy);
            let v = if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                0
            } else {
                src[yy as usize * w + xx as usize]
            };
            bits |= u32::from(v < c) << k;
            k += 1;
        }
    }
    bits
}
