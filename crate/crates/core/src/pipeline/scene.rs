//! Seeded synthetic stereo scenes with analytic ground truth.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imagecore::{DisparityMap, FixedDisparity, GrayImage};
use crate::rectify::{Offset, OffsetField, RectificationMap};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SceneKind {
    /// Fronto-parallel plane at a constant (possibly fractional) disparity.
    Shift(f64),
    /// Background plane at `.0` with a rectangular foreground plane at `.1`.
    TwoPlane(f64, f64),
    /// Independent noise in both views; no correspondences.
    Noise,
}

impl FromStr for SceneKind {
    type Err = Error;

    /// `shift:<d>`, `twoplane:<d1>,<d2>` or `noise`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad scene kind {s:?}"));
        let num = |v: &str| v.trim().parse::<f64>().ok().filter(|d| d.is_finite() && *d >= 0.0);
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        match name {
            "shift" => Ok(SceneKind::Shift(num(args).ok_or_else(bad)?)),
            "twoplane" | "two-plane" => {
                let (a, b) = args.split_once(',').ok_or_else(bad)?;
                Ok(SceneKind::TwoPlane(num(a).ok_or_else(bad)?, num(b).ok_or_else(bad)?))
            }
            "noise" if args.is_empty() => Ok(SceneKind::Noise),
            _ => Err(bad()),
        }
    }
}

/// A rendered stereo pair. `truth` is invalid where the left pixel has no
/// counterpart inside the right image; `occluded` marks left pixels whose
/// counterpart is hidden behind a nearer surface.
#[derive(Clone, Debug)]
pub struct Scene {
    pub left: GrayImage,
    pub right: GrayImage,
    pub truth: DisparityMap,
    pub occluded: Vec<bool>,
}

impl Scene {
    /// Occlusion mask as an image, 255 where occluded.
    pub fn occlusion_image(&self) -> GrayImage {
        let data = self.occluded.iter().map(|&o| if o { 255 } else { 0 }).collect();
        GrayImage::new(self.left.width(), self.left.height(), data).expect("scene dimensions")
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Multi-octave value noise, defined on the whole plane so it can be sampled
/// at fractional positions.
#[derive(Clone, Copy, Debug)]
pub struct Texture {
    seed: u64,
}

impl Texture {
    const OCTAVES: [(f64, f64); 3] = [(1.5, 0.5), (4.0, 0.3), (11.0, 0.2)];

    pub fn new(seed: u64) -> Self {
        Texture { seed }
    }

    fn lattice(&self, octave: u64, ix: i64, iy: i64) -> f64 {
        let h = splitmix(self.seed ^ splitmix(octave ^ splitmix(ix as u64 ^ splitmix(iy as u64))));
        (h >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Intensity in `[0, 255]`.
    pub fn sample(&self, u: f64, v: f64) -> f64 {
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let mut acc = 0.0;
        for (k, &(spacing, amp)) in Self::OCTAVES.iter().enumerate() {
            let (gu, gv) = (u / spacing, v / spacing);
            let (iu, iv) = (gu.floor(), gv.floor());
            let (tu, tv) = (smooth(gu - iu), smooth(gv - iv));
            let (iu, iv) = (iu as i64, iv as i64);
            let o = k as u64;
            let top = self.lattice(o, iu, iv) * (1.0 - tu) + self.lattice(o, iu + 1, iv) * tu;
            let bottom = self.lattice(o, iu, iv + 1) * (1.0 - tu) + self.lattice(o, iu + 1, iv + 1) * tu;
            acc += amp * (top * (1.0 - tv) + bottom * tv);
        }
        acc * 255.0
    }

    fn pixel(&self, u: f64, v: f64) -> u8 {
        self.sample(u, v).round().clamp(0.0, 255.0) as u8
    }
}

/// Renders a scene. The right image is sampled directly from the continuous
/// textures, so fractional disparities need no resampling of the left view.
pub fn gen_test_scene(kind: SceneKind, width: usize, height: usize, seed: u64) -> Result<Scene> {
    let back = Texture::new(splitmix(seed));
    let front = Texture::new(splitmix(seed ^ 0xF00D));
    let n = width * height;
    match kind {
        SceneKind::Shift(d) => {
            check_disparity(d)?;
            let left = GrayImage::from_fn(width, height, |x, y| back.pixel(x as f64, y as f64))?;
            let right = GrayImage::from_fn(width, height, |x, y| back.pixel(x as f64 + d, y as f64))?;
            let truth = truth_map(width, height, |_, _| d, |x, _| x as f64 - d >= 0.0)?;
            Ok(Scene { left, right, truth, occluded: vec![false; n] })
        }
        SceneKind::TwoPlane(d_back, d_front) => {
            check_disparity(d_back)?;
            check_disparity(d_front)?;
            if d_front <= d_back {
                return Err(Error::InvalidConfig("foreground must be nearer than background".into()));
            }
            let (x0, x1) = (width as f64 / 3.0, 2.0 * width as f64 / 3.0);
            let rows = height / 4..3 * height / 4;
            let in_front = |u: f64, y: usize| rows.contains(&y) && u >= x0 && u < x1;
            let left = GrayImage::from_fn(width, height, |x, y| {
                let u = x as f64;
                if in_front(u, y) { front.pixel(u, y as f64) } else { back.pixel(u, y as f64) }
            })?;
            // a right pixel shows the front plane if it projects onto it
            let right = GrayImage::from_fn(width, height, |x, y| {
                let uf = x as f64 + d_front;
                if in_front(uf, y) { front.pixel(uf, y as f64) } else { back.pixel(x as f64 + d_back, y as f64) }
            })?;
            let depth = |x: usize, y: usize| if in_front(x as f64, y) { d_front } else { d_back };
            let truth = truth_map(width, height, depth, |x, y| x as f64 - depth(x, y) >= 0.0)?;
            let occluded = (0..n)
                .map(|i| {
                    let (x, y) = (i % width, i / width);
                    // background point whose right projection lies under the front plane
                    !in_front(x as f64, y) && in_front(x as f64 - d_back + d_front, y)
                })
                .collect();
            Ok(Scene { left, right, truth, occluded })
        }
        SceneKind::Noise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let left = GrayImage::new(width, height, (0..n).map(|_| rng.gen()).collect())?;
            let right = GrayImage::new(width, height, (0..n).map(|_| rng.gen()).collect())?;
            Ok(Scene { left, right, truth: DisparityMap::invalid(width, height)?, occluded: vec![false; n] })
        }
    }
}

fn check_disparity(d: f64) -> Result<()> {
    if !(0.0..=4095.0).contains(&d) {
        return Err(Error::InvalidConfig(format!("scene disparity {d} out of range")));
    }
    Ok(())
}

fn truth_map(
    width: usize,
    height: usize,
    disparity: impl Fn(usize, usize) -> f64,
    visible: impl Fn(usize, usize) -> bool,
) -> Result<DisparityMap> {
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            data.push(if visible(x, y) {
                FixedDisparity::from_f64(disparity(x, y)).unwrap_or(FixedDisparity::INVALID)
            } else {
                FixedDisparity::INVALID
            });
        }
    }
    DisparityMap::new(width, height, data)
}

/// A smooth, lens-like displacement field pair: slight rotation and scale
/// about the centre, plus a small vertical misalignment on the right camera.
pub fn synthetic_map(width: usize, height: usize) -> Result<RectificationMap> {
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let field = |angle: f64, scale: f64, shift_y: f64| {
        let data = (0..width * height)
            .map(|i| {
                let (x, y) = ((i % width) as f64 - cx, (i / width) as f64 - cy);
                let dx = -angle * y + scale * x;
                let dy = angle * x + scale * y + shift_y;
                Offset::from_pixels(dx.clamp(-39.0, 39.0), dy.clamp(-39.0, 39.0))
            })
            .collect();
        OffsetField::new(width, height, data)
    };
    RectificationMap::new(field(0.004, 0.006, 0.0)?, field(-0.003, -0.004, 1.25)?)
}
