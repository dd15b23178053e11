//! Bilinear rectification through a compressed displacement map.
//!
//! Displacements are stored in signed Q12.4 (1/16 px) and limited to the
//! ±39 px reach of a 79×79 window. The `RMAP1` container interleaves the
//! left and right records of each pixel so one sequential read yields both
//! displacement vectors:
//!
//! ```text
//! "RMAP1\n" <width> " " <height> "\n"
//! for each pixel in raster order: <left record> <right record>
//! record := nibble byte                       (both residuals in -8..=7)
//!         | 0x80 <dx: i16 LE> <dy: i16 LE>    (escape)
//! ```
//!
//! Residuals are taken against the previous pixel of the same row, or
//! against the first pixel of the previous row at the start of a row. The
//! nibble byte holds the x residual in the high nibble. Because `0x80` is the
//! escape marker, the residual pair (-8, 0) is always escaped.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::GrayImage;

/// Displacement reach in 1/16 px (39 px).
pub const MAX_OFFSET: i32 = 39 * 16;

const MAGIC: &str = "RMAP1\n";
const ESCAPE: u8 = 0x80;

/// Subpixel displacement in 1/16 px units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Offset {
    pub dx: i16,
    pub dy: i16,
}

impl Offset {
    pub const ZERO: Offset = Offset { dx: 0, dy: 0 };

    pub const fn new(dx: i16, dy: i16) -> Self {
        Offset { dx, dy }
    }

    /// Offset nearest to `(dx, dy)` pixels.
    pub fn from_pixels(dx: f64, dy: f64) -> Self {
        let q = |v: f64| (v * 16.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        Offset { dx: q(dx), dy: q(dy) }
    }

    pub fn in_window(self) -> bool {
        i32::from(self.dx).abs() <= MAX_OFFSET && i32::from(self.dy).abs() <= MAX_OFFSET
    }
}

/// Per-pixel displacements for one camera.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OffsetField {
    width: usize,
    height: usize,
    data: Vec<Offset>,
}

impl OffsetField {
    pub fn new(width: usize, height: usize, data: Vec<Offset>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DataLength { width, height, len: data.len() });
        }
        for (i, o) in data.iter().enumerate() {
            if !o.in_window() {
                return Err(out_of_range(i % width.max(1), i / width.max(1), *o));
            }
        }
        Ok(Self { width, height, data })
    }

    pub fn zero(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![Offset::ZERO; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[Offset] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> Offset {
        self.data[y * self.width + x]
    }
}

fn out_of_range(x: usize, y: usize, o: Offset) -> Error {
    Error::OffsetOutOfRange { x, y, dx: o.dx.into(), dy: o.dy.into() }
}

/// Displacement fields for both cameras of a stereo head.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RectificationMap {
    pub left: OffsetField,
    pub right: OffsetField,
}

impl RectificationMap {
    pub fn new(left: OffsetField, right: OffsetField) -> Result<Self> {
        if left.width != right.width || left.height != right.height {
            return Err(Error::DimensionMismatch(left.width, left.height, right.width, right.height));
        }
        Ok(Self { left, right })
    }

    pub fn identity(width: usize, height: usize) -> Self {
        Self { left: OffsetField::zero(width, height), right: OffsetField::zero(width, height) }
    }

    pub fn width(&self) -> usize {
        self.left.width
    }

    pub fn height(&self) -> usize {
        self.left.height
    }
}

/// Samples `img` at `(x + dx, y + dy)` for every output pixel.
///
/// Weights carry 8 fractional bits per axis and the result is rounded half
/// up. A pixel whose bilinear support (the source pixels with non-zero
/// weight) leaves the image is set to 0.
pub fn remap(img: &GrayImage, offsets: &OffsetField) -> Result<GrayImage> {
    let (w, h) = (img.width(), img.height());
    if offsets.width != w || offsets.height != h {
        return Err(Error::DimensionMismatch(w, h, offsets.width, offsets.height));
    }
    if let Some(i) = offsets.data.iter().position(|o| !o.in_window()) {
        return Err(out_of_range(i % w, i / w, offsets.data[i]));
    }
    let src = img.data();
    let mut out = vec![0u8; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, px) in row.iter_mut().enumerate() {
            *px = sample(src, w, h, x, y, offsets.data[y * w + x]);
        }
    });
    GrayImage::new(w, h, out)
}

#[inline]
fn sample(src: &[u8], w: usize, h: usize, x: usize, y: usize, o: Offset) -> u8 {
    let sx = x as i32 * 16 + i32::from(o.dx);
    let sy = y as i32 * 16 + i32::from(o.dy);
    let (x0, fx) = (sx.div_euclid(16), sx.rem_euclid(16));
    let (y0, fy) = (sy.div_euclid(16), sy.rem_euclid(16));
    let x1 = if fx > 0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0 { y0 + 1 } else { y0 };
    if x0 < 0 || y0 < 0 || x1 >= w as i32 || y1 >= h as i32 {
        return 0;
    }
    let (wx1, wy1) = ((fx * 16) as u32, (fy * 16) as u32);
    let (wx0, wy0) = (256 - wx1, 256 - wy1);
    let at = |xx: i32, yy: i32| u32::from(src[yy as usize * w + xx as usize]);
    let acc = wy0 * (wx0 * at(x0, y0) + wx1 * at(x1, y0))
        + wy1 * (wx0 * at(x0, y1) + wx1 * at(x1, y1));
    ((acc + (1 << 15)) >> 16) as u8
}

/// Rectifies a stereo pair, each image with its own displacement field.
pub fn rectify_pair(
    left: &GrayImage,
    right: &GrayImage,
    map: &RectificationMap,
) -> Result<(GrayImage, GrayImage)> {
    if left.width() != right.width() || left.height() != right.height() {
        return Err(Error::DimensionMismatch(left.width(), left.height(), right.width(), right.height()));
    }
    let (l, r) = rayon::join(|| remap(left, &map.left), || remap(right, &map.right));
    Ok((l?, r?))
}

/// Walks raster order yielding the prediction for each pixel.
struct Predictor {
    width: usize,
    prev: Offset,
    row_start: Offset,
}

impl Predictor {
    fn new(width: usize) -> Self {
        Predictor { width, prev: Offset::ZERO, row_start: Offset::ZERO }
    }

    fn predict(&self, i: usize) -> Offset {
        if i.is_multiple_of(self.width) {
            self.row_start
        } else {
            self.prev
        }
    }

    fn update(&mut self, i: usize, value: Offset) {
        if i.is_multiple_of(self.width) {
            self.row_start = value;
        }
        self.prev = value;
    }
}

fn push_record(out: &mut Vec<u8>, value: Offset, pred: Offset) {
    let rx = i32::from(value.dx) - i32::from(pred.dx);
    let ry = i32::from(value.dy) - i32::from(pred.dy);
    let nib = |r: i32| (-8..=7).contains(&r);
    if nib(rx) && nib(ry) {
        let byte = (((rx & 0xF) << 4) | (ry & 0xF)) as u8;
        if byte != ESCAPE {
            out.push(byte);
            return;
        }
    }
    out.push(ESCAPE);
    out.extend_from_slice(&(rx as i16).to_le_bytes());
    out.extend_from_slice(&(ry as i16).to_le_bytes());
}

/// Serializes a map as an `RMAP1` stream.
pub fn encode_map(map: &RectificationMap) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let mut out = format!("{MAGIC}{w} {h}\n").into_bytes();
    out.reserve(2 * w * h);
    let mut pl = Predictor::new(w);
    let mut pr = Predictor::new(w);
    for i in 0..w * h {
        let (l, r) = (map.left.data[i], map.right.data[i]);
        push_record(&mut out, l, pl.predict(i));
        push_record(&mut out, r, pr.predict(i));
        pl.update(i, l);
        pr.update(i, r);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn byte(&mut self) -> Result<u8> {
        let b = *self.bytes.get(self.pos).ok_or(Error::TruncatedStream)?;
        self.pos += 1;
        Ok(b)
    }

    fn i16(&mut self) -> Result<i32> {
        let lo = self.byte()?;
        let hi = self.byte()?;
        Ok(i16::from_le_bytes([lo, hi]).into())
    }

    fn record(&mut self, pred: Offset) -> Result<(i32, i32)> {
        let b = self.byte()?;
        let (rx, ry) = if b == ESCAPE {
            (self.i16()?, self.i16()?)
        } else {
            (i32::from((b as i8) >> 4), i32::from(((b << 4) as i8) >> 4))
        };
        Ok((i32::from(pred.dx) + rx, i32::from(pred.dy) + ry))
    }
}

fn parse_map_header(bytes: &[u8]) -> Result<(usize, usize, usize)> {
    if !bytes.starts_with(MAGIC.as_bytes()) {
        return Err(Error::BadMagic("RMAP1"));
    }
    let rest = &bytes[MAGIC.len()..];
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("missing dimension line".into()))?;
    let line = std::str::from_utf8(&rest[..nl])
        .map_err(|_| Error::MalformedHeader("non-ASCII dimension line".into()))?;
    let dims: Vec<usize> = line
        .split(' ')
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::MalformedHeader(format!("bad dimension line {line:?}")))?;
    match dims[..] {
        [w, h] if w >= 1 && h >= 1 && w <= crate::MAX_DIMENSION && h <= crate::MAX_DIMENSION => {
            Ok((w, h, MAGIC.len() + nl + 1))
        }
        _ => Err(Error::MalformedHeader(format!("bad dimension line {line:?}"))),
    }
}

/// Parses an `RMAP1` stream produced by [`encode_map`].
pub fn decode_map(bytes: &[u8]) -> Result<RectificationMap> {
    let (w, h, start) = parse_map_header(bytes)?;
    let mut rd = Reader { bytes, pos: start };
    let mut left = Vec::with_capacity(w * h);
    let mut right = Vec::with_capacity(w * h);
    let mut pl = Predictor::new(w);
    let mut pr = Predictor::new(w);
    for i in 0..w * h {
        for (pred, dst) in [(&mut pl, &mut left), (&mut pr, &mut right)] {
            let (dx, dy) = rd.record(pred.predict(i))?;
            if dx.abs() > MAX_OFFSET || dy.abs() > MAX_OFFSET {
                return Err(Error::OffsetOutOfRange { x: i % w, y: i / w, dx, dy });
            }
            let o = Offset::new(dx as i16, dy as i16);
            pred.update(i, o);
            dst.push(o);
        }
    }
    if rd.pos != bytes.len() {
        return Err(Error::TrailingBytes);
    }
    Ok(RectificationMap {
        left: OffsetField { width: w, height: h, data: left },
        right: OffsetField { width: w, height: h, data: right },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(values: &[u8]) -> GrayImage {
        GrayImage::new(values.len(), 1, values.to_vec()).unwrap()
    }

    fn uniform(w: usize, h: usize, o: Offset) -> OffsetField {
        OffsetField::new(w, h, vec![o; w * h]).unwrap()
    }

    #[test]
    fn zero_offsets_are_identity() {
        let img = GrayImage::from_fn(7, 5, |x, y| (x * 31 + y * 17) as u8).unwrap();
        assert_eq!(remap(&img, &OffsetField::zero(7, 5)).unwrap(), img);
    }

    #[test]
    fn integer_and_half_pixel_shifts() {
        let img = row(&[10, 20, 30]);
        let out = remap(&img, &uniform(3, 1, Offset::from_pixels(1.0, 0.0))).unwrap();
        assert_eq!(out.data(), &[20, 30, 0]);

        let img = row(&[10, 20]);
        let out = remap(&img, &uniform(2, 1, Offset::from_pixels(0.5, 0.0))).unwrap();
        assert_eq!(out.data(), &[15, 0]);
    }

    #[test]
    fn rounds_half_up() {
        // 1/16 between 0 and 8: 8 * 16/256 = 0.5 -> 1
        let out = remap(&row(&[0, 8]), &uniform(2, 1, Offset::new(1, 0))).unwrap();
        assert_eq!(out.get(0, 0), 1);
    }

    #[test]
    fn remap_errors() {
        let img = row(&[1, 2, 3]);
        assert!(matches!(remap(&img, &OffsetField::zero(2, 1)), Err(Error::DimensionMismatch(..))));
        let bad = OffsetField { width: 3, height: 1, data: vec![Offset::new(625, 0); 3] };
        assert!(matches!(remap(&img, &bad), Err(Error::OffsetOutOfRange { .. })));
        assert!(OffsetField::new(1, 1, vec![Offset::new(0, -625)]).is_err());
        assert!(OffsetField::new(1, 1, vec![Offset::new(624, -624)]).is_ok());
    }

    #[test]
    fn zero_map_encodes_one_byte_per_record() {
        let map = RectificationMap::identity(4, 4);
        let bytes = encode_map(&map);
        let header = b"RMAP1\n4 4\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0u8; 32]);
        assert_eq!(decode_map(&bytes).unwrap(), map);
    }

    fn count_escapes(bytes: &[u8], w: usize, h: usize) -> usize {
        let (_, _, mut pos) = parse_map_header(bytes).unwrap();
        let mut n = 0;
        for _ in 0..2 * w * h {
            if bytes[pos] == ESCAPE {
                n += 1;
                pos += 5;
            } else {
                pos += 1;
            }
        }
        assert_eq!(pos, bytes.len());
        n
    }

    #[test]
    fn single_jump_costs_one_escape() {
        // every pixel from row 2 on is displaced by +30 px
        let (w, h) = (6, 5);
        let data = (0..w * h)
            .map(|i| if i / w >= 2 { Offset::from_pixels(30.0, 0.0) } else { Offset::ZERO })
            .collect();
        let map = RectificationMap::new(OffsetField::new(w, h, data).unwrap(), OffsetField::zero(w, h)).unwrap();
        let bytes = encode_map(&map);
        assert_eq!(count_escapes(&bytes, w, h), 1);
        assert_eq!(bytes.len(), 10 + 2 * w * h + 4);
        assert_eq!(decode_map(&bytes).unwrap(), map);

        // step inside a single row
        let data = (0..8).map(|x| if x >= 3 { Offset::from_pixels(30.0, 0.0) } else { Offset::ZERO }).collect();
        let map = RectificationMap::new(OffsetField::zero(8, 1), OffsetField::new(8, 1, data).unwrap()).unwrap();
        assert_eq!(count_escapes(&encode_map(&map), 8, 1), 1);
    }

    #[test]
    fn escape_byte_collision_is_escaped() {
        let field = OffsetField::new(1, 1, vec![Offset::new(-8, 0)]).unwrap();
        let map = RectificationMap::new(field, OffsetField::zero(1, 1)).unwrap();
        let bytes = encode_map(&map);
        assert_eq!(count_escapes(&bytes, 1, 1), 1);
        assert_eq!(decode_map(&bytes).unwrap(), map);
    }

    #[test]
    fn decode_errors() {
        assert!(matches!(decode_map(b"RMAP2\n1 1\n\0\0"), Err(Error::BadMagic(_))));
        assert!(matches!(decode_map(b"RMAP1\n2 1\n\0\0\0"), Err(Error::TruncatedStream)));
        assert!(matches!(decode_map(b"RMAP1\n1 1\n\x80\x00"), Err(Error::TruncatedStream)));
        assert!(matches!(decode_map(b"RMAP1\n1 1\n\0\0\0"), Err(Error::TrailingBytes)));
        assert!(matches!(decode_map(b"RMAP1\n1x1\n\0\0"), Err(Error::MalformedHeader(_))));
        let mut far = b"RMAP1\n1 1\n\x80".to_vec();
        far.extend_from_slice(&625i16.to_le_bytes());
        far.extend_from_slice(&[0, 0, 0]);
        assert!(matches!(decode_map(&far), Err(Error::OffsetOutOfRange { dx: 625, .. })));
    }

    fn smooth_field(w: usize, h: usize, seed: u64) -> OffsetField {
        let s = |k: u64| ((seed.wrapping_mul(0x9E3779B97F4A7C15).rotate_left(k as u32 * 7) >> 40) as f64 / 16777216.0) - 0.5;
        let (ax, bx, cx) = (s(1) * 0.8, s(2) * 0.8, s(3) * 40.0);
        let (ay, by, cy) = (s(4) * 0.8, s(5) * 0.8, s(6) * 40.0);
        let data = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                let dx = (cx + ax * x + bx * y).clamp(-39.0, 39.0);
                let dy = (cy + ay * x + by * y).clamp(-39.0, 39.0);
                Offset::from_pixels(dx, dy)
            })
            .collect();
        OffsetField::new(w, h, data).unwrap()
    }

    proptest! {
        #[test]
        fn codec_round_trip(w in 1usize..24, h in 1usize..24, a in any::<u64>(), b in any::<u64>()) {
            let map = RectificationMap::new(smooth_field(w, h, a), smooth_field(w, h, b)).unwrap();
            prop_assert_eq!(decode_map(&encode_map(&map)).unwrap(), map);
        }

        #[test]
        fn codec_round_trip_arbitrary(w in 1usize..6, h in 1usize..6,
                                      raw in proptest::collection::vec((-624i16..=624, -624i16..=624), 72)) {
            let take = |k: usize| raw.iter().skip(k).take(w * h).map(|&(dx, dy)| Offset::new(dx, dy)).collect();
            let map = RectificationMap::new(
                OffsetField::new(w, h, take(0)).unwrap(),
                OffsetField::new(w, h, take(36)).unwrap(),
            ).unwrap();
            prop_assert_eq!(decode_map(&encode_map(&map)).unwrap(), map);
        }

        #[test]
        fn bilinear_stays_within_support(vals in proptest::collection::vec(any::<u8>(), 16), dx in -8i16..8, dy in -8i16..8) {
            let img = GrayImage::new(4, 4, vals).unwrap();
            let field = OffsetField::new(4, 4, vec![Offset::new(dx, dy); 16]).unwrap();
            let out = remap(&img, &field).unwrap();
            for y in 0..4 {
                for x in 0..4 {
                    let sx = x as i32 * 16 + i32::from(dx);
                    let sy = y as i32 * 16 + i32::from(dy);
                    let (x0, y0) = (sx.div_euclid(16), sy.div_euclid(16));
                    let x1 = x0 + i32::from(sx.rem_euclid(16) > 0);
                    let y1 = y0 + i32::from(sy.rem_euclid(16) > 0);
                    let v = out.get(x, y);
                    if x0 < 0 || y0 < 0 || x1 > 3 || y1 > 3 {
                        prop_assert_eq!(v, 0);
                        continue;
                    }
                    let support: Vec<u8> = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
                        .iter().map(|&(a, b)| img.get(a as usize, b as usize)).collect();
                    prop_assert!(v >= *support.iter().min().unwrap() && v <= *support.iter().max().unwrap());
                }
            }
        }
    }
}
