//! Raster types, Q12.4 disparities and PGM/PFM codecs.

use std::fmt;

use crate::error::{Error, Result};

/// Largest width or height accepted anywhere in the pipeline.
pub const MAX_DIMENSION: usize = 1856;

fn check_dimensions(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(Error::BadDimensions { width, height });
    }
    Ok(())
}

/// 8-bit single channel image, row-major, top row first.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dimensions(width, height)?;
        if data.len() != width * height {
            return Err(Error::DataLength { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        check_dimensions(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

/// Disparity in Q12.4 fixed point; `0xFFFF` is reserved for invalid pixels.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FixedDisparity(u16);

impl FixedDisparity {
    pub const INVALID: FixedDisparity = FixedDisparity(u16::MAX);
    pub const FRACTIONAL_BITS: u32 = 4;
    pub const SCALE: u16 = 1 << Self::FRACTIONAL_BITS;

    /// Wraps a raw Q12.4 word. `0xFFFF` yields [`FixedDisparity::INVALID`].
    pub const fn from_raw(raw: u16) -> Self {
        FixedDisparity(raw)
    }

    pub const fn from_pixels(pixels: u16) -> Self {
        FixedDisparity(pixels * Self::SCALE)
    }

    /// Nearest representable value, halves rounded up. `None` for negative,
    /// non-finite or unrepresentable inputs.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() || value < 0.0 {
            return None;
        }
        let raw = (value * f64::from(Self::SCALE) + 0.5).floor();
        if raw >= f64::from(u16::MAX) {
            return None;
        }
        Some(FixedDisparity(raw as u16))
    }

    pub const fn raw(self) -> u16 {
        self.0
    }

    pub const fn is_valid(self) -> bool {
        self.0 != u16::MAX
    }

    pub fn value(self) -> Option<f64> {
        self.is_valid().then(|| f64::from(self.0) / f64::from(Self::SCALE))
    }

    /// Integer disparity, rounding halves up.
    pub fn rounded(self) -> Option<u16> {
        self.is_valid().then(|| (self.0 + Self::SCALE / 2) >> Self::FRACTIONAL_BITS)
    }
}

impl fmt::Debug for FixedDisparity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("INVALID"),
        }
    }
}

/// Per-pixel fixed point disparities for the rectified left view.
#[derive(Clone, PartialEq, Eq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    data: Vec<FixedDisparity>,
}

impl DisparityMap {
    pub fn new(width: usize, height: usize, data: Vec<FixedDisparity>) -> Result<Self> {
        check_dimensions(width, height)?;
        if data.len() != width * height {
            return Err(Error::DataLength { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn invalid(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![FixedDisparity::INVALID; width * height])
    }

    pub fn from_raw(width: usize, height: usize, raw: &[u16]) -> Result<Self> {
        Self::new(width, height, raw.iter().map(|&r| FixedDisparity(r)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[FixedDisparity] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [FixedDisparity] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> FixedDisparity {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: FixedDisparity) {
        self.data[y * self.width + x] = d;
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| d.is_valid()).count()
    }

    pub fn density(&self) -> f64 {
        self.valid_count() as f64 / self.data.len() as f64
    }

    pub(crate) fn same_shape(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::DimensionMismatch(self.width, self.height, width, height));
        }
        Ok(())
    }
}

impl fmt::Debug for DisparityMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DisparityMap({}x{}, {} valid)", self.width, self.height, self.valid_count())
    }
}

/// Tokenizer for netpbm-style headers: whitespace separated fields with
/// `#` comments running to end of line.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Header { bytes, pos: 0 }
    }

    fn magic(&mut self, expected: &'static str) -> Result<()> {
        let m = expected.as_bytes();
        if self.bytes.len() < m.len() || &self.bytes[..m.len()] != m {
            return Err(Error::BadMagic(expected));
        }
        self.pos = m.len();
        Ok(())
    }

    fn token(&mut self) -> Result<&'a str> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while let Some(&c) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if c == b'\n' || c == b'\r' {
                            break;
                        }
                    }
                }
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err(Error::MalformedHeader("unexpected end of header".into())),
            }
        }
        let start = self.pos;
        while let Some(c) = self.bytes.get(self.pos) {
            if c.is_ascii_whitespace() || *c == b'#' {
                break;
            }
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::MalformedHeader("non-ASCII header field".into()))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::MalformedHeader(format!("bad {what} field {tok:?}")))
    }

    /// Consumes the single whitespace byte separating header and payload.
    fn payload(self) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => Ok(&self.bytes[self.pos + 1..]),
            _ => Err(Error::MalformedHeader("missing whitespace before payload".into())),
        }
    }
}

fn read_netpbm_header<'a>(
    bytes: &'a [u8],
    magic: &'static str,
) -> Result<(usize, usize, u32, &'a [u8])> {
    let mut h = Header::new(bytes);
    h.magic(magic)?;
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    check_dimensions(width, height)?;
    let maxval = u32::try_from(maxval).map_err(|_| Error::UnsupportedMaxval(u32::MAX))?;
    Ok((width, height, maxval, h.payload()?))
}

/// Decodes a binary 8-bit PGM (`P5`, maxval 255).
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let (width, height, maxval, payload) = read_netpbm_header(bytes, "P5")?;
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    let n = width * height;
    if payload.len() < n {
        return Err(Error::TruncatedPayload { expected: n, found: payload.len() });
    }
    GrayImage::new(width, height, payload[..n].to_vec())
}

pub fn save_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

/// Encodes raw Q12.4 words as a 16-bit big-endian PGM. Invalid pixels are
/// written as 65535.
pub fn save_disparity_pgm16(map: &DisparityMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", map.width, map.height).into_bytes();
    out.reserve(map.data.len() * 2);
    for d in &map.data {
        out.extend_from_slice(&d.raw().to_be_bytes());
    }
    out
}

/// Inverse of [`save_disparity_pgm16`].
pub fn load_disparity_pgm16(bytes: &[u8]) -> Result<DisparityMap> {
    let (width, height, maxval, payload) = read_netpbm_header(bytes, "P5")?;
    if maxval != 65535 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    let n = width * height * 2;
    if payload.len() < n {
        return Err(Error::TruncatedPayload { expected: n, found: payload.len() });
    }
    let data = payload[..n]
        .chunks_exact(2)
        .map(|c| FixedDisparity(u16::from_be_bytes([c[0], c[1]])))
        .collect();
    DisparityMap::new(width, height, data)
}

/// Grayscale PFM, little-endian (scale -1.0), rows bottom to top. Invalid
/// pixels become negative infinity.
pub fn save_disparity_pfm(map: &DisparityMap) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", map.width, map.height).into_bytes();
    out.reserve(map.data.len() * 4);
    for row in map.data.chunks_exact(map.width).rev() {
        for d in row {
            let v = d.value().map_or(f32::NEG_INFINITY, |v| v as f32);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Reads a grayscale PFM of either endianness. Non-finite or negative
/// samples load as invalid; others are rounded to the 1/16 grid.
pub fn load_disparity_pfm(bytes: &[u8]) -> Result<DisparityMap> {
    let mut h = Header::new(bytes);
    h.magic("Pf")?;
    let width = h.number("width")?;
    let height = h.number("height")?;
    let scale_tok = h.token()?;
    let scale: f32 = scale_tok
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("bad scale field {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::MalformedHeader(format!("bad scale field {scale_tok:?}")));
    }
    check_dimensions(width, height)?;
    let payload = h.payload()?;
    let n = width * height * 4;
    if payload.len() < n {
        return Err(Error::TruncatedPayload { expected: n, found: payload.len() });
    }
    let little = scale < 0.0;
    let mut data = vec![FixedDisparity::INVALID; width * height];
    for (i, c) in payload[..n].chunks_exact(4).enumerate() {
        let b = [c[0], c[1], c[2], c[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (x, y) = (i % width, height - 1 - i / width);
        data[y * width + x] = FixedDisparity::from_f64(f64::from(v)).unwrap_or(FixedDisparity::INVALID);
    }
    DisparityMap::new(width, height, data)
}
