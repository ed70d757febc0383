//! Spatially varying exposure (SVE) Bayer sensor model.
//!
//! The sensor is an RGGB mosaic whose exposure alternates every two rows:
//! rows `0-1` take the low exposure, rows `2-3` the high one, and so on.
//! A capture is separated into two sparse raws, one per exposure, whose
//! missing row pairs are then filled by CFA-aware vertical interpolation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{CompensatedSum, Scalar};

/// Scene luminance that lands on photographic middle gray at 0 EV.
pub const MIDDLE_GRAY: f64 = 0.18;

/// Offset inside the log-average so black pixels do not send it to zero.
const LOG_AVERAGE_DELTA: f64 = 1e-6;

const REC709_LUMA: [f64; 3] = [0.2126, 0.7152, 0.0722];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SveError {
    #[error("low exposure {ev_low} EV must be below high exposure {ev_high} EV")]
    InvalidExposurePair { ev_low: f64, ev_high: f64 },
    #[error("image is {width}x{height}, both sides must be positive multiples of 4")]
    BadDimensions { width: usize, height: usize },
    #[error("unsupported bit depth {0}, expected one of 8, 10, 12, 14, 16")]
    UnsupportedBitDepth(u32),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("scene has no positive luminance to anchor the exposure on")]
    DegenerateScene,
}

/// Linear scene radiance, row-major, non-negative and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage<T> {
    width: usize,
    height: usize,
    data: Vec<[T; 3]>,
}

impl<T: Scalar> HdrImage<T> {
    pub fn new(width: usize, height: usize, data: Vec<[T; 3]>) -> Result<Self, SveError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(SveError::InvalidImage(format!(
                "{} radiance triplets for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some(bad) = data
            .iter()
            .flatten()
            .find(|v| !(v.is_finite() && **v >= T::zero()))
        {
            return Err(SveError::InvalidImage(format!(
                "radiance {bad} is negative or not finite"
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [T; 3]) -> Result<Self, SveError> {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[T; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [T; 3] {
        self.data[y * self.width + x]
    }

    /// Largest top-left crop whose sides are multiples of 4.
    pub fn crop_to_sensor_grid(&self) -> Result<Self, SveError> {
        let (w, h) = (self.width / 4 * 4, self.height / 4 * 4);
        if w == 0 || h == 0 {
            return Err(SveError::BadDimensions {
                width: self.width,
                height: self.height,
            });
        }
        Self::from_fn(w, h, |x, y| self.get(x, y))
    }

    pub fn scaled(&self, gain: T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|p| p.map(|v| v * gain)).collect(),
        }
    }

    /// Rec. 709 luminance of every pixel.
    pub fn luminance(&self) -> Vec<f64> {
        self.data.iter().map(|p| luminance(p.map(Scalar::as_f64))).collect()
    }
}

#[inline]
pub(crate) fn luminance(rgb: [f64; 3]) -> f64 {
    REC709_LUMA[0] * rgb[0] + REC709_LUMA[1] * rgb[1] + REC709_LUMA[2] * rgb[2]
}

/// How scene radiance maps onto the sensor's 0 EV exposure.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExposureAnchor {
    /// Log-average luminance lands on 0.18.
    #[default]
    MiddleGray,
    /// Explicit radiance gain.
    Gain(f64),
}

impl ExposureAnchor {
    pub fn gain<T: Scalar>(self, scene: &HdrImage<T>) -> Result<f64, SveError> {
        match self {
            ExposureAnchor::Gain(g) if g.is_finite() && g > 0.0 => Ok(g),
            ExposureAnchor::Gain(g) => Err(SveError::InvalidImage(format!("anchor gain {g}"))),
            ExposureAnchor::MiddleGray => {
                let acc: CompensatedSum = scene
                    .luminance()
                    .into_iter()
                    .map(|l| (l + LOG_AVERAGE_DELTA).ln())
                    .collect();
                let log_average = acc.mean().map(f64::exp).unwrap_or(0.0);
                if log_average <= LOG_AVERAGE_DELTA * (1.0 + 1e-9) {
                    return Err(SveError::DegenerateScene);
                }
                Ok(MIDDLE_GRAY / log_average)
            }
        }
    }
}

/// Sample bit depth of the simulated sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct BitDepth(u32);

impl BitDepth {
    pub const EIGHT: BitDepth = BitDepth(8);

    pub fn new(bits: u32) -> Result<Self, SveError> {
        match bits {
            8 | 10 | 12 | 14 | 16 => Ok(Self(bits)),
            other => Err(SveError::UnsupportedBitDepth(other)),
        }
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Full-scale code value, `2^bits - 1`.
    pub fn max_code(self) -> u32 {
        (1u32 << self.0) - 1
    }

    /// One quantization step in normalized units.
    pub fn step(self) -> f64 {
        1.0 / self.max_code() as f64
    }

    /// Rounds half away from zero to the nearest code, renormalized to `[0, 1]`.
    pub fn quantize<T: Scalar>(self, v: T) -> T {
        let levels = T::lit(self.max_code() as f64);
        (v * levels).round() / levels
    }
}

impl Default for BitDepth {
    fn default() -> Self {
        Self::EIGHT
    }
}

impl TryFrom<u32> for BitDepth {
    type Error = SveError;
    fn try_from(bits: u32) -> Result<Self, SveError> {
        Self::new(bits)
    }
}

impl From<BitDepth> for u32 {
    fn from(b: BitDepth) -> u32 {
        b.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exposure {
    Low,
    High,
}

impl Exposure {
    /// Row-pair pattern: rows `4k` and `4k+1` are low, `4k+2` and `4k+3` high.
    #[inline]
    pub fn of_row(row: usize) -> Exposure {
        if (row / 2).is_multiple_of(2) {
            Exposure::Low
        } else {
            Exposure::High
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfaChannel {
    Red = 0,
    Green = 1,
    Blue = 2,
}

impl CfaChannel {
    /// RGGB layout.
    #[inline]
    pub fn at(row: usize, col: usize) -> CfaChannel {
        match (row & 1, col & 1) {
            (0, 0) => CfaChannel::Red,
            (1, 1) => CfaChannel::Blue,
            _ => CfaChannel::Green,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// A full single-channel RGGB raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BayerRaw<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> BayerRaw<T> {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn constant(width: usize, height: usize, v: T) -> Self {
        Self {
            width,
            height,
            data: vec![v; width * height],
        }
    }
}

/// One SVE capture: the raw mosaic plus the exposure of each row pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BayerSveImage<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
    pub ev_low: f64,
    pub ev_high: f64,
    pub bit_depth: BitDepth,
}

impl<T: Scalar> BayerSveImage<T> {
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<T>,
        ev_low: f64,
        ev_high: f64,
        bit_depth: BitDepth,
    ) -> Result<Self, SveError> {
        check_exposure_pair(ev_low, ev_high)?;
        check_dimensions(width, height)?;
        if data.len() != width * height {
            return Err(SveError::InvalidImage(format!(
                "{} samples for a {width}x{height} mosaic",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(SveError::InvalidImage(format!("raw sample {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
            ev_low,
            ev_high,
            bit_depth,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn ev_of(&self, exposure: Exposure) -> f64 {
        match exposure {
            Exposure::Low => self.ev_low,
            Exposure::High => self.ev_high,
        }
    }
}

pub fn check_exposure_pair(ev_low: f64, ev_high: f64) -> Result<(), SveError> {
    if ev_low.is_finite() && ev_high.is_finite() && ev_low < ev_high {
        Ok(())
    } else {
        Err(SveError::InvalidExposurePair { ev_low, ev_high })
    }
}

fn check_dimensions(width: usize, height: usize) -> Result<(), SveError> {
    if width == 0 || height == 0 || !width.is_multiple_of(4) || !height.is_multiple_of(4) {
        Err(SveError::BadDimensions { width, height })
    } else {
        Ok(())
    }
}

#[inline]
fn sense<T: Scalar>(radiance: [T; 3], row: usize, col: usize, gain: T, bit_depth: BitDepth) -> T {
    let v = radiance[CfaChannel::at(row, col).index()] * gain;
    bit_depth.quantize(v.max(T::zero()).min(T::one()))
}

/// Synthesizes the SVE raw of `scene`. Each sample is the scene radiance of
/// its CFA channel times `anchor_gain * 2^ev_row`, clipped to `[0, 1]` and
/// quantized to `bit_depth`.
pub fn simulate_sve_capture<T: Scalar>(
    scene: &HdrImage<T>,
    ev_low: f64,
    ev_high: f64,
    anchor: ExposureAnchor,
    bit_depth: BitDepth,
) -> Result<BayerSveImage<T>, SveError> {
    check_exposure_pair(ev_low, ev_high)?;
    check_dimensions(scene.width, scene.height)?;
    let anchor_gain = anchor.gain(scene)?;
    let gain_low = T::lit(anchor_gain * ev_low.exp2());
    let gain_high = T::lit(anchor_gain * ev_high.exp2());
    let mut data = Vec::with_capacity(scene.width * scene.height);
    for row in 0..scene.height {
        let gain = match Exposure::of_row(row) {
            Exposure::Low => gain_low,
            Exposure::High => gain_high,
        };
        data.extend((0..scene.width).map(|col| sense(scene.get(col, row), row, col, gain, bit_depth)));
    }
    Ok(BayerSveImage {
        width: scene.width,
        height: scene.height,
        data,
        ev_low,
        ev_high,
        bit_depth,
    })
}

/// Captures `scene` with a single exposure over the whole mosaic.
pub fn simulate_uniform_capture<T: Scalar>(
    scene: &HdrImage<T>,
    ev: f64,
    anchor_gain: f64,
    bit_depth: BitDepth,
) -> BayerRaw<T> {
    let gain = T::lit(anchor_gain * ev.exp2());
    let data = (0..scene.height)
        .flat_map(|row| (0..scene.width).map(move |col| (row, col)))
        .map(|(row, col)| sense(scene.get(col, row), row, col, gain, bit_depth))
        .collect();
    BayerRaw {
        width: scene.width,
        height: scene.height,
        data,
    }
}

/// Rows of one exposure; rows of the other exposure are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRaw<T> {
    pub width: usize,
    pub height: usize,
    /// Missing rows hold zeros.
    pub data: Vec<T>,
    pub exposure: Exposure,
    pub ev: f64,
}

impl<T: Scalar> SparseRaw<T> {
    #[inline]
    pub fn is_present(&self, row: usize) -> bool {
        Exposure::of_row(row) == self.exposure
    }

    fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.width..(row + 1) * self.width]
    }
}

pub fn separate<T: Scalar>(x: &BayerSveImage<T>) -> (SparseRaw<T>, SparseRaw<T>) {
    let split = |exposure: Exposure| {
        let mut data = vec![T::zero(); x.data.len()];
        for row in (0..x.height).filter(|&r| Exposure::of_row(r) == exposure) {
            let span = row * x.width..(row + 1) * x.width;
            data[span.clone()].copy_from_slice(&x.data[span]);
        }
        SparseRaw {
            width: x.width,
            height: x.height,
            data,
            exposure,
            ev: x.ev_of(exposure),
        }
    };
    (split(Exposure::Low), split(Exposure::High))
}

/// Recombines the present rows of two complementary sparse raws.
pub fn overlay<T: Scalar>(a: &SparseRaw<T>, b: &SparseRaw<T>) -> Vec<T> {
    (0..a.height)
        .flat_map(|row| if a.is_present(row) { a.row(row) } else { b.row(row) }.iter().copied())
        .collect()
}

/// Where a row of the filled raster takes its values from.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RowSource {
    Present,
    Copy(usize),
    /// `above + t * (below - above)`.
    Between { above: usize, below: usize, t: f64 },
}

fn row_source<T: Scalar>(sparse: &SparseRaw<T>, row: usize) -> RowSource {
    if sparse.is_present(row) {
        return RowSource::Present;
    }
    // Same CFA channel means same row parity, so step by two.
    let above = (2..=row)
        .step_by(2)
        .map(|d| row - d)
        .find(|&r| sparse.is_present(r));
    let below = (row + 2..sparse.height)
        .step_by(2)
        .find(|&r| sparse.is_present(r));
    match (above, below) {
        (Some(a), Some(b)) => RowSource::Between {
            above: a,
            below: b,
            t: (row - a) as f64 / (b - a) as f64,
        },
        (Some(r), None) | (None, Some(r)) => RowSource::Copy(r),
        (None, None) => unreachable!("sparse raster has no present row of matching parity"),
    }
}

/// Fills the missing rows of `sparse` from the nearest present rows of the
/// same CFA parity. Present rows are copied untouched.
pub fn interpolate<T: Scalar>(sparse: &SparseRaw<T>) -> BayerRaw<T> {
    let mut data = Vec::with_capacity(sparse.data.len());
    for row in 0..sparse.height {
        match row_source(sparse, row) {
            RowSource::Present => data.extend_from_slice(sparse.row(row)),
            RowSource::Copy(src) => data.extend_from_slice(sparse.row(src)),
            RowSource::Between { above, below, t } => {
                let t = T::lit(t);
                data.extend(
                    sparse
                        .row(above)
                        .iter()
                        .zip(sparse.row(below))
                        .map(|(&a, &b)| a + t * (b - a)),
                );
            }
        }
    }
    BayerRaw {
        width: sparse.width,
        height: sparse.height,
        data,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipFlag {
    Valid,
    Under,
    Over,
}

impl ClipFlag {
    #[inline]
    pub fn of_sample<T: Scalar>(v: T) -> ClipFlag {
        if v <= T::zero() {
            ClipFlag::Under
        } else if v >= T::one() {
            ClipFlag::Over
        } else {
            ClipFlag::Valid
        }
    }

    /// Flag of a sample interpolated from two sources; any clipped source
    /// taints the result, over-exposure taking precedence.
    #[inline]
    pub fn merge(self, other: ClipFlag) -> ClipFlag {
        match (self, other) {
            (ClipFlag::Over, _) | (_, ClipFlag::Over) => ClipFlag::Over,
            (ClipFlag::Under, _) | (_, ClipFlag::Under) => ClipFlag::Under,
            _ => ClipFlag::Valid,
        }
    }

    #[inline]
    pub fn is_valid(self) -> bool {
        self == ClipFlag::Valid
    }

    pub fn code(self) -> u8 {
        match self {
            ClipFlag::Valid => 0,
            ClipFlag::Under => 1,
            ClipFlag::Over => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<ClipFlag> {
        match code {
            0 => Some(ClipFlag::Valid),
            1 => Some(ClipFlag::Under),
            2 => Some(ClipFlag::Over),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipMask {
    pub width: usize,
    pub height: usize,
    pub flags: Vec<ClipFlag>,
}

impl ClipMask {
    pub fn from_samples<T: Scalar>(width: usize, height: usize, samples: &[T]) -> Self {
        Self {
            width,
            height,
            flags: samples.iter().map(|&v| ClipFlag::of_sample(v)).collect(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> ClipFlag {
        self.flags[y * self.width + x]
    }

    pub fn count(&self, flag: ClipFlag) -> usize {
        self.flags.iter().filter(|&&f| f == flag).count()
    }

    pub fn clipped_count(&self) -> usize {
        self.flags.len() - self.count(ClipFlag::Valid)
    }
}

/// Per-sample clip flags of the raw capture.
pub fn clip_mask_of<T: Scalar>(x: &BayerSveImage<T>) -> ClipMask {
    ClipMask::from_samples(x.width, x.height, &x.data)
}

/// Clip flags of `interpolate(sparse)`: present samples keep their own
/// flag, filled samples merge the flags of the samples they were built from.
pub fn interpolated_clip_mask<T: Scalar>(sparse: &SparseRaw<T>) -> ClipMask {
    let raw_flags = ClipMask::from_samples(sparse.width, sparse.height, &sparse.data);
    let row_flags = |r: usize| &raw_flags.flags[r * sparse.width..(r + 1) * sparse.width];
    let mut flags = Vec::with_capacity(raw_flags.flags.len());
    for row in 0..sparse.height {
        match row_source(sparse, row) {
            RowSource::Present => flags.extend_from_slice(row_flags(row)),
            RowSource::Copy(src) => flags.extend_from_slice(row_flags(src)),
            RowSource::Between { above, below, .. } => flags.extend(
                row_flags(above)
                    .iter()
                    .zip(row_flags(below))
                    .map(|(a, b)| a.merge(*b)),
            ),
        }
    }
    ClipMask {
        width: sparse.width,
        height: sparse.height,
        flags,
    }
}
