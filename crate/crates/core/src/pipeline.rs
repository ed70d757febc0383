//! Reconstruction of an RGB image from one SVE capture.
//!
//! ```text
//! separate -> interpolate -> compensate -> demosaic -> fuse -> correct_hue
//! ```
//!
//! The conventional method stops after fusion. The proposed method replaces
//! the hue of each fused pixel with the maximally saturated color of the
//! first exposure whose raw samples at that location are all unclipped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hue_plane::{decompose, max_saturated_color, recompose, RgbPixel};
use crate::raw_sve::{
    check_exposure_pair, interpolate, interpolated_clip_mask, luminance, separate, BayerRaw,
    BayerSveImage, CfaChannel, ClipMask, SveError,
};
use crate::scalar::Scalar;

/// Standard deviation of the well-exposedness weight.
pub const FUSION_SIGMA: f64 = 0.2;

/// Below this both weights count as zero and the inputs are averaged.
pub const FUSION_WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("config exposures ({cfg_low}, {cfg_high}) EV do not match the capture ({raw_low}, {raw_high}) EV")]
    ConfigMismatch {
        cfg_low: f64,
        cfg_high: f64,
        raw_low: f64,
        raw_high: f64,
    },
    #[error("invalid RGB image: {0}")]
    InvalidImage(String),
    #[error(transparent)]
    Sve(#[from] SveError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<RgbPixel<T>>,
}

impl<T: Scalar> RgbImage<T> {
    pub fn new(width: usize, height: usize, data: Vec<RgbPixel<T>>) -> Result<Self, PipelineError> {
        if data.len() != width * height {
            return Err(PipelineError::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                data.len()
            )));
        }
        for p in &data {
            RgbPixel::try_new(p.r, p.g, p.b).map_err(|e| PipelineError::InvalidImage(e.to_string()))?;
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> RgbPixel<T>) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self { width, height, data }
    }

    pub fn constant(width: usize, height: usize, p: RgbPixel<T>) -> Self {
        Self {
            width,
            height,
            data: vec![p; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> RgbPixel<T> {
        self.data[y * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_size<U>(&self, other: &RgbImage<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn ensure_same_size<U>(&self, other: &RgbImage<U>, what: &str) -> Result<(), PipelineError> {
        if self.same_size(other) {
            Ok(())
        } else {
            Err(PipelineError::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMethod {
    #[default]
    WellExposedness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemosaicMethod {
    #[default]
    Bilinear,
}

/// Whether the fused image gets its hue corrected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Fusion output as is.
    Conventional,
    /// Fusion output with clip-aware hue correction.
    Proposed,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Conventional, Method::Proposed];

    pub fn name(self) -> &'static str {
        match self {
            Method::Conventional => "conventional",
            Method::Proposed => "proposed",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub ev_low: f64,
    pub ev_high: f64,
    pub fusion: FusionMethod,
    pub method: Method,
    pub demosaic: DemosaicMethod,
}

impl PipelineConfig {
    pub fn new(ev_low: f64, ev_high: f64, method: Method) -> Result<Self, PipelineError> {
        check_exposure_pair(ev_low, ev_high)?;
        Ok(Self {
            ev_low,
            ev_high,
            fusion: FusionMethod::default(),
            method,
            demosaic: DemosaicMethod::default(),
        })
    }

    /// Configuration matching the exposures recorded in a capture.
    pub fn for_capture<T: Scalar>(x: &BayerSveImage<T>, method: Method) -> Self {
        Self {
            ev_low: x.ev_low,
            ev_high: x.ev_high,
            fusion: FusionMethod::default(),
            method,
            demosaic: DemosaicMethod::default(),
        }
    }
}

/// Brings a raw captured at `ev` back to the 0 EV reference: `clip(x * 2^-ev)`.
pub fn exposure_compensate<T: Scalar>(x: &BayerRaw<T>, ev: f64) -> BayerRaw<T> {
    let gain = T::lit((-ev).exp2());
    BayerRaw {
        width: x.width,
        height: x.height,
        data: x.data.iter().map(|&v| (v * gain).max(T::zero()).min(T::one())).collect(),
    }
}

const NATIVE: &[(isize, isize)] = &[(0, 0)];
const CROSS: &[(isize, isize)] = &[(-1, 0), (1, 0), (0, -1), (0, 1)];
const DIAGONAL: &[(isize, isize)] = &[(-1, -1), (-1, 1), (1, -1), (1, 1)];
const HORIZONTAL: &[(isize, isize)] = &[(0, -1), (0, 1)];
const VERTICAL: &[(isize, isize)] = &[(-1, 0), (1, 0)];

/// Bilinear taps `(drow, dcol)` for each output channel at an RGGB site.
fn bilinear_taps(row: usize, col: usize) -> [&'static [(isize, isize)]; 3] {
    match CfaChannel::at(row, col) {
        CfaChannel::Red => [NATIVE, CROSS, DIAGONAL],
        CfaChannel::Blue => [DIAGONAL, CROSS, NATIVE],
        // Green on a red row: red neighbours left/right, blue above/below.
        CfaChannel::Green if row.is_multiple_of(2) => [HORIZONTAL, NATIVE, VERTICAL],
        CfaChannel::Green => [VERTICAL, NATIVE, HORIZONTAL],
    }
}

/// Whole-sample mirror about the border; keeps CFA parity for even sizes.
#[inline]
fn mirror(i: usize, d: isize, n: usize) -> usize {
    let j = i as isize + d;
    if j < 0 {
        (-j) as usize
    } else if j as usize >= n {
        2 * (n - 1) - j as usize
    } else {
        j as usize
    }
}

fn for_each_tap(
    width: usize,
    height: usize,
    row: usize,
    col: usize,
    mut f: impl FnMut(usize, usize, usize),
) {
    for (channel, taps) in bilinear_taps(row, col).into_iter().enumerate() {
        for &(dr, dc) in taps {
            f(channel, mirror(row, dr, height), mirror(col, dc, width));
        }
    }
}

/// Bilinear RGGB demosaicing.
pub fn demosaic<T: Scalar>(x: &BayerRaw<T>) -> RgbImage<T> {
    RgbImage::from_fn(x.width, x.height, |col, row| {
        let mut acc = [T::zero(); 3];
        let mut n = [0usize; 3];
        for_each_tap(x.width, x.height, row, col, |ch, r, c| {
            acc[ch] += x.get(c, r);
            n[ch] += 1;
        });
        RgbPixel::from_array([0, 1, 2].map(|ch| acc[ch] / T::lit(n[ch] as f64)))
    })
}

/// Per-pixel validity after demosaicing: a pixel is valid when every raw
/// sample feeding any of its three channels is unclipped.
pub fn demosaic_validity(mask: &ClipMask) -> Vec<bool> {
    let mut valid = Vec::with_capacity(mask.flags.len());
    for row in 0..mask.height {
        for col in 0..mask.width {
            let mut ok = true;
            for_each_tap(mask.width, mask.height, row, col, |_, r, c| {
                ok &= mask.get(c, r).is_valid();
            });
            valid.push(ok);
        }
    }
    valid
}

/// `exp(-(u - 0.5)^2 / (2 sigma^2))`.
#[inline]
pub fn well_exposedness(u: f64) -> f64 {
    (-(u - 0.5).powi(2) / (2.0 * FUSION_SIGMA * FUSION_SIGMA)).exp()
}

/// One exposure entering fusion: the compensated image that gets blended,
/// and the image before compensation whose luminance drives the weight.
#[derive(Debug, Clone, Copy)]
pub struct FusionInput<'a, T> {
    pub compensated: &'a RgbImage<T>,
    pub pre_compensation: &'a RgbImage<T>,
}

fn pixel_luminance<T: Scalar>(p: RgbPixel<T>) -> f64 {
    luminance(p.to_array().map(Scalar::as_f64))
}

/// Per-pixel convex combination weighted by well-exposedness.
pub fn fuse<T: Scalar>(low: FusionInput<'_, T>, high: FusionInput<'_, T>) -> Result<RgbImage<T>, PipelineError> {
    low.compensated.ensure_same_size(high.compensated, "fusion inputs")?;
    low.compensated.ensure_same_size(low.pre_compensation, "low exposure weights")?;
    low.compensated.ensure_same_size(high.pre_compensation, "high exposure weights")?;
    let data = (0..low.compensated.len())
        .map(|i| {
            let mut w_low = well_exposedness(pixel_luminance(low.pre_compensation.data[i]));
            let mut w_high = well_exposedness(pixel_luminance(high.pre_compensation.data[i]));
            if w_low < FUSION_WEIGHT_FLOOR && w_high < FUSION_WEIGHT_FLOOR {
                w_low = 1.0;
                w_high = 1.0;
            }
            let total = w_low + w_high;
            let (w_low, w_high) = (T::lit(w_low / total), T::lit(w_high / total));
            let (a, b) = (low.compensated.data[i], high.compensated.data[i]);
            RgbPixel::new(
                w_low * a.r + w_high * b.r,
                w_low * a.g + w_high * b.g,
                w_low * a.b + w_high * b.b,
            )
            .clamp_unit()
        })
        .collect();
    Ok(RgbImage {
        width: low.compensated.width,
        height: low.compensated.height,
        data,
    })
}

/// Which saturated color a pixel ended up with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HueBranch {
    /// Unclipped in the low exposure: hue of the low exposure.
    Low,
    /// Clipped in the low exposure, unclipped in the high one.
    High,
    /// Clipped in both: the fused hue is kept.
    Keep,
    /// Fused pixel has no hue; passed through.
    Achromatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BranchCounts {
    pub low: usize,
    pub high: usize,
    pub keep: usize,
    pub achromatic: usize,
}

impl BranchCounts {
    pub fn record(&mut self, branch: HueBranch) {
        match branch {
            HueBranch::Low => self.low += 1,
            HueBranch::High => self.high += 1,
            HueBranch::Keep => self.keep += 1,
            HueBranch::Achromatic => self.achromatic += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.low + self.high + self.keep + self.achromatic
    }

    pub fn chromatic(&self) -> usize {
        self.low + self.high + self.keep
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HueCorrected<T> {
    pub image: RgbImage<T>,
    pub branches: Vec<HueBranch>,
    pub counts: BranchCounts,
}

/// Picks the replacement saturated color for one fused pixel. An exposure
/// whose own pixel is achromatic cannot supply a hue and falls through.
pub fn choose_hue<T: Scalar>(
    y_out: RgbPixel<T>,
    low: (RgbPixel<T>, bool),
    high: (RgbPixel<T>, bool),
) -> (HueBranch, Option<RgbPixel<T>>) {
    if y_out.is_achromatic() {
        return (HueBranch::Achromatic, None);
    }
    let (y_low, low_valid) = low;
    let (y_high, high_valid) = high;
    if low_valid {
        if let Ok(c) = max_saturated_color(y_low) {
            return (HueBranch::Low, Some(c));
        }
    }
    if high_valid {
        if let Ok(c) = max_saturated_color(y_high) {
            return (HueBranch::High, Some(c));
        }
    }
    (HueBranch::Keep, None)
}

/// Clip-aware hue correction of a fused image.
///
/// `y_low` and `y_high` are the demosaiced exposures (any positive scaling
/// of them gives the same hue), `mask_low` and `mask_high` the clip masks of
/// the interpolated raws they were demosaiced from.
pub fn correct_hue<T: Scalar>(
    y_out: &RgbImage<T>,
    y_low: &RgbImage<T>,
    y_high: &RgbImage<T>,
    mask_low: &ClipMask,
    mask_high: &ClipMask,
) -> Result<HueCorrected<T>, PipelineError> {
    y_out.ensure_same_size(y_low, "low exposure")?;
    y_out.ensure_same_size(y_high, "high exposure")?;
    for (mask, what) in [(mask_low, "low mask"), (mask_high, "high mask")] {
        if mask.width != y_out.width || mask.height != y_out.height {
            return Err(PipelineError::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                mask.width, mask.height, y_out.width, y_out.height
            )));
        }
    }
    let valid_low = demosaic_validity(mask_low);
    let valid_high = demosaic_validity(mask_high);
    let mut counts = BranchCounts::default();
    let mut branches = Vec::with_capacity(y_out.len());
    let data = y_out
        .data
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let (branch, color) = choose_hue(y, (y_low.data[i], valid_low[i]), (y_high.data[i], valid_high[i]));
            counts.record(branch);
            branches.push(branch);
            match color {
                Some(c) => recompose(decompose(y).with_color(c)),
                None => y,
            }
        })
        .collect();
    Ok(HueCorrected {
        image: RgbImage {
            width: y_out.width,
            height: y_out.height,
            data,
        },
        branches,
        counts,
    })
}

/// Everything the two methods share, computed once per capture.
#[derive(Debug, Clone)]
pub struct SharedStages<T> {
    /// Demosaiced interpolated raws before compensation.
    pub y_low: RgbImage<T>,
    pub y_high: RgbImage<T>,
    pub mask_low: ClipMask,
    pub mask_high: ClipMask,
    /// Conventional output.
    pub fused: RgbImage<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput<T> {
    pub image: RgbImage<T>,
    /// Present for the proposed method only.
    pub branches: Option<BranchCounts>,
}

/// Runs every stage up to and including fusion.
pub fn shared_stages<T: Scalar>(x: &BayerSveImage<T>) -> Result<SharedStages<T>, PipelineError> {
    let (sparse_low, sparse_high) = separate(x);
    let raw_low = interpolate(&sparse_low);
    let raw_high = interpolate(&sparse_high);
    let y_low = demosaic(&raw_low);
    let y_high = demosaic(&raw_high);
    let comp_low = demosaic(&exposure_compensate(&raw_low, x.ev_low));
    let comp_high = demosaic(&exposure_compensate(&raw_high, x.ev_high));
    let fused = fuse(
        FusionInput {
            compensated: &comp_low,
            pre_compensation: &y_low,
        },
        FusionInput {
            compensated: &comp_high,
            pre_compensation: &y_high,
        },
    )?;
    Ok(SharedStages {
        y_low,
        y_high,
        mask_low: interpolated_clip_mask(&sparse_low),
        mask_high: interpolated_clip_mask(&sparse_high),
        fused,
    })
}

impl<T: Scalar> SharedStages<T> {
    pub fn finish(&self, method: Method) -> Result<PipelineOutput<T>, PipelineError> {
        match method {
            Method::Conventional => Ok(PipelineOutput {
                image: self.fused.clone(),
                branches: None,
            }),
            Method::Proposed => {
                let corrected = correct_hue(&self.fused, &self.y_low, &self.y_high, &self.mask_low, &self.mask_high)?;
                Ok(PipelineOutput {
                    image: corrected.image,
                    branches: Some(corrected.counts),
                })
            }
        }
    }
}

pub fn run_pipeline<T: Scalar>(x: &BayerSveImage<T>, cfg: &PipelineConfig) -> Result<PipelineOutput<T>, PipelineError> {
    check_exposure_pair(cfg.ev_low, cfg.ev_high)?;
    if cfg.ev_low != x.ev_low || cfg.ev_high != x.ev_high {
        return Err(PipelineError::ConfigMismatch {
            cfg_low: cfg.ev_low,
            cfg_high: cfg.ev_high,
            raw_low: x.ev_low,
            raw_high: x.ev_high,
        });
    }
    shared_stages(x)?.finish(cfg.method)
}
