//! Raw frame ingestion and preprocessing.
//!
//! Frames arrive as binary PGM (`P5`) files holding the raw colour filter
//! array. [`demosaic_bilinear`] rebuilds RGB, [`crop_rows`] drops the bottom
//! of the frame and [`equalize_histogram`] boosts contrast. [`ncc`] and
//! [`ncc_match`] provide the correlation primitive for box interpolation.

mod demosaic;
mod equalize;
mod ncc;
mod pnm;

pub use demosaic::demosaic_bilinear;
pub use equalize::equalize_histogram;
pub use ncc::{ncc, ncc_match, ncc_match_anchored, search_area, NccMatch};
pub use pnm::{read_pnm, read_ppm, write_pgm, write_ppm};

use thiserror::Error;

use crate::kv::{KvError, KvFile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("not a PNM file")]
    BadMagic,
    #[error("unsupported PNM format {0}")]
    UnsupportedFormat(String),
    #[error("malformed PNM header: {0}")]
    Header(String),
    #[error("invalid max value {0}")]
    MaxValue(u64),
    #[error("payload truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("sample {value} at index {index} exceeds max value {max}")]
    SampleOutOfRange { index: usize, value: u16, max: u16 },
    #[error("image dimensions {width}x{height} do not match {samples} samples")]
    Dimensions { width: usize, height: usize, samples: usize },
    #[error("row count {keep} outside 1..={height}")]
    CropOutOfRange { keep: usize, height: usize },
    #[error("images differ in size: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("correlation needs at least 2 pixels")]
    TooSmall,
    #[error("zero variance: correlation undefined")]
    DegenerateCorrelation,
    #[error("template {0}x{1} larger than search area {2}x{3}")]
    TemplateTooLarge(usize, usize, usize, usize),
    #[error("unknown CFA pattern {0:?}")]
    UnknownPattern(String),
    #[error(transparent)]
    Config(#[from] KvError),
}

fn check_samples(width: usize, height: usize, channels: usize, max_value: u16, samples: &[u16]) -> Result<(), FrameError> {
    if width == 0 || height == 0 || width.checked_mul(height).and_then(|n| n.checked_mul(channels)) != Some(samples.len()) {
        return Err(FrameError::Dimensions { width, height, samples: samples.len() });
    }
    if max_value == 0 {
        return Err(FrameError::MaxValue(0));
    }
    if let Some((index, &value)) = samples.iter().enumerate().find(|(_, &v)| v > max_value) {
        return Err(FrameError::SampleOutOfRange { index, value, max: max_value });
    }
    Ok(())
}

/// Single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub max_value: u16,
    pub samples: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, max_value: u16, samples: Vec<u16>) -> Result<Self, FrameError> {
        check_samples(width, height, 1, max_value, &samples)?;
        Ok(GrayImage { width, height, max_value, samples })
    }

    pub fn filled(width: usize, height: usize, max_value: u16, value: u16) -> Self {
        GrayImage { width, height, max_value, samples: vec![value.min(max_value); width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.samples[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u16) {
        self.samples[y * self.width + x] = v;
    }

    /// Copy of the `w x h` region at `(x, y)`. Panics when out of bounds.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> GrayImage {
        assert!(x + w <= self.width && y + h <= self.height, "crop outside image");
        let mut samples = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            samples.extend_from_slice(&self.samples[start..start + w]);
        }
        GrayImage { width: w, height: h, max_value: self.max_value, samples }
    }
}

/// Interleaved RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub max_value: u16,
    pub samples: Vec<u16>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, max_value: u16, samples: Vec<u16>) -> Result<Self, FrameError> {
        check_samples(width, height, 3, max_value, &samples)?;
        Ok(RgbImage { width, height, max_value, samples })
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u16; 3] {
        let i = 3 * (y * self.width + x);
        [self.samples[i], self.samples[i + 1], self.samples[i + 2]]
    }

    pub fn channel(&self, c: usize) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            max_value: self.max_value,
            samples: self.samples.iter().skip(c).step_by(3).copied().collect(),
        }
    }

    pub fn from_channels(r: &GrayImage, g: &GrayImage, b: &GrayImage) -> Result<Self, FrameError> {
        for p in [g, b] {
            if (p.width, p.height) != (r.width, r.height) {
                return Err(FrameError::SizeMismatch(r.width, r.height, p.width, p.height));
            }
        }
        let mut samples = Vec::with_capacity(r.samples.len() * 3);
        for i in 0..r.samples.len() {
            samples.extend_from_slice(&[r.samples[i], g.samples[i], b.samples[i]]);
        }
        RgbImage::new(r.width, r.height, r.max_value, samples)
    }

    /// Rec. 601 luma, rounded to the nearest integer.
    pub fn luma(&self) -> GrayImage {
        let samples = self
            .samples
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round().min(self.max_value as f64) as u16)
            .collect();
        GrayImage { width: self.width, height: self.height, max_value: self.max_value, samples }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CfaPattern {
    #[default]
    Rggb,
    Bggr,
    Grbg,
    Gbrg,
}

/// Channel index: 0 red, 1 green, 2 blue.
pub type Channel = usize;

impl CfaPattern {
    /// Colour of each site in the 2x2 tile, row-major.
    pub fn tile(&self) -> [Channel; 4] {
        match self {
            CfaPattern::Rggb => [0, 1, 1, 2],
            CfaPattern::Bggr => [2, 1, 1, 0],
            CfaPattern::Grbg => [1, 0, 2, 1],
            CfaPattern::Gbrg => [1, 2, 0, 1],
        }
    }

    #[inline]
    pub fn color_at(&self, x: i64, y: i64) -> Channel {
        self.tile()[(y.rem_euclid(2) * 2 + x.rem_euclid(2)) as usize]
    }
}

impl std::str::FromStr for CfaPattern {
    type Err = FrameError;
    fn from_str(s: &str) -> Result<Self, FrameError> {
        match s.to_ascii_uppercase().as_str() {
            "RGGB" => Ok(CfaPattern::Rggb),
            "BGGR" => Ok(CfaPattern::Bggr),
            "GRBG" => Ok(CfaPattern::Grbg),
            "GBRG" => Ok(CfaPattern::Gbrg),
            _ => Err(FrameError::UnknownPattern(s.to_string())),
        }
    }
}

/// Raw sensor frame. The pattern is not stored in the PNM header and comes
/// from a sidecar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfaImage {
    pub pattern: CfaPattern,
    pub raw: GrayImage,
}

impl CfaImage {
    pub fn new(raw: GrayImage, pattern: CfaPattern) -> Self {
        CfaImage { pattern, raw }
    }
}

pub trait CropRows: Sized {
    /// Keep the top `keep_top` rows.
    fn crop_rows(&self, keep_top: usize) -> Result<Self, FrameError>;
}

fn check_keep(keep: usize, height: usize) -> Result<(), FrameError> {
    if keep == 0 || keep > height {
        return Err(FrameError::CropOutOfRange { keep, height });
    }
    Ok(())
}

impl CropRows for GrayImage {
    fn crop_rows(&self, keep_top: usize) -> Result<Self, FrameError> {
        check_keep(keep_top, self.height)?;
        Ok(GrayImage {
            width: self.width,
            height: keep_top,
            max_value: self.max_value,
            samples: self.samples[..keep_top * self.width].to_vec(),
        })
    }
}

impl CropRows for RgbImage {
    fn crop_rows(&self, keep_top: usize) -> Result<Self, FrameError> {
        check_keep(keep_top, self.height)?;
        Ok(RgbImage {
            width: self.width,
            height: keep_top,
            max_value: self.max_value,
            samples: self.samples[..keep_top * self.width * 3].to_vec(),
        })
    }
}

impl CropRows for CfaImage {
    fn crop_rows(&self, keep_top: usize) -> Result<Self, FrameError> {
        Ok(CfaImage { pattern: self.pattern, raw: self.raw.crop_rows(keep_top)? })
    }
}

pub fn crop_rows<I: CropRows>(img: &I, keep_top: usize) -> Result<I, FrameError> {
    img.crop_rows(keep_top)
}

/// Conversion settings read from a `key=value` sidecar:
/// `pattern=RGGB`, `equalize=true`, `crop_keep=1448`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameSidecar {
    pub pattern: CfaPattern,
    pub equalize: bool,
    pub crop_keep: Option<usize>,
}

impl FrameSidecar {
    pub fn parse(text: &str) -> Result<Self, FrameError> {
        let kv = KvFile::parse(text)?;
        kv.restrict(&["pattern", "equalize", "crop_keep"])?;
        let mut s = FrameSidecar::default();
        if let Some(p) = kv.raw("pattern") {
            s.pattern = p.parse()?;
        }
        if let Some(e) = kv.get_bool("equalize")? {
            s.equalize = e;
        }
        s.crop_keep = kv.get("crop_keep")?;
        Ok(s)
    }
}

/// Raw PGM bytes to RGB: demosaic, then crop, then equalize each channel.
pub fn convert_raw(bytes: &[u8], sidecar: &FrameSidecar) -> Result<RgbImage, FrameError> {
    let raw = read_pnm(bytes)?;
    let mut rgb = demosaic_bilinear(&CfaImage::new(raw, sidecar.pattern));
    if let Some(keep) = sidecar.crop_keep {
        rgb = rgb.crop_rows(keep)?;
    }
    if sidecar.equalize {
        let [r, g, b] = [0, 1, 2].map(|c| equalize_histogram(&rgb.channel(c)));
        rgb = RgbImage::from_channels(&r, &g, &b)?;
    }
    Ok(rgb)
}

/// Grayscale view of a raw frame for correlation: the demosaiced green
/// channel.
pub fn cfa_green(cfa: &CfaImage) -> GrayImage {
    demosaic_bilinear(cfa).channel(1)
}
