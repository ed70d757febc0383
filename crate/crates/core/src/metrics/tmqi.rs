//! Tone-mapped image quality index (TMQI).
//!
//! Structural fidelity compares local standard deviations of HDR and LDR
//! luminance after passing them through a contrast-sensitivity driven
//! normal CDF, at five dyadic scales. Statistical naturalness scores the
//! LDR global mean brightness against a Gaussian model and its mean block
//! contrast against a Beta model. The two are combined as
//! `Q = a S^alpha + (1 - a) N^beta`.

use statrs::distribution::{Beta, Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::hue_plane::RgbPixel;
use crate::pipeline::RgbImage;
use crate::raw_sve::HdrImage;
use crate::scalar::{CompensatedSum, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TmqiError {
    #[error("dimension mismatch: HDR {hdr_w}x{hdr_h} vs LDR {ldr_w}x{ldr_h}")]
    DimensionMismatch {
        hdr_w: usize,
        hdr_h: usize,
        ldr_w: usize,
        ldr_h: usize,
    },
    #[error("degenerate image: {0}")]
    DegenerateImage(String),
}

/// Model constants. `Default` gives the published values.
#[derive(Debug, Clone, PartialEq)]
pub struct TmqiParams {
    pub a: f64,
    pub alpha: f64,
    pub beta: f64,
    pub scale_weights: Vec<f64>,
    pub window_size: usize,
    pub window_sigma: f64,
    pub c1: f64,
    pub c2: f64,
    pub brightness_mean: f64,
    pub brightness_std: f64,
    pub contrast_alpha: f64,
    pub contrast_beta: f64,
    /// Block contrast is divided by this before the Beta model.
    pub contrast_scale: f64,
    pub naturalness_block: usize,
}

impl Default for TmqiParams {
    fn default() -> Self {
        Self {
            a: 0.8012,
            alpha: 0.3046,
            beta: 0.7088,
            scale_weights: vec![0.0448, 0.2856, 0.3001, 0.2363, 0.1333],
            window_size: 11,
            window_sigma: 1.5,
            c1: 0.01,
            c2: 10.0,
            brightness_mean: 115.94,
            brightness_std: 27.99,
            contrast_alpha: 4.4,
            contrast_beta: 10.1,
            contrast_scale: 64.29,
            naturalness_block: 11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmqiScore {
    pub overall: f64,
    pub structural: f64,
    pub naturalness: f64,
}

/// Single-channel row-major plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// 2x2 box average followed by decimation; the last row or column is
    /// repeated when a side is odd.
    pub fn downsample(&self) -> Plane {
        let (w, h) = (self.width.div_ceil(2), self.height.div_ceil(2));
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            let (y0, y1) = (2 * y, (2 * y + 1).min(self.height - 1));
            for x in 0..w {
                let (x0, x1) = (2 * x, (2 * x + 1).min(self.width - 1));
                data.push((self.get(x0, y0) + self.get(x1, y0) + self.get(x0, y1) + self.get(x1, y1)) / 4.0);
            }
        }
        Plane { width: w, height: h, data }
    }
}

const LUMA_ROW: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// HDR luminance rescaled to `[0, 2^32 - 1]`.
pub fn hdr_luminance<T: Scalar>(hdr: &HdrImage<T>) -> Result<Plane, TmqiError> {
    let lum: Vec<f64> = hdr.luminance();
    let (lo, hi) = lum
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(TmqiError::DegenerateImage("HDR luminance is constant".into()));
    }
    let full = u32::MAX as f64 / (hi - lo);
    let factor = if full.round() > 0.0 { full.round() } else { full };
    Ok(Plane {
        width: hdr.width(),
        height: hdr.height(),
        data: lum.iter().map(|&v| factor * (v - lo)).collect(),
    })
}

/// LDR luminance on the 8-bit code scale `[0, 255]`.
pub fn ldr_luminance<T: Scalar>(ldr: &RgbImage<T>) -> Plane {
    Plane {
        width: ldr.width,
        height: ldr.height,
        data: ldr
            .data
            .iter()
            .map(|p: &RgbPixel<T>| {
                let [r, g, b] = p.to_array().map(|v| 255.0 * v.as_f64());
                LUMA_ROW[0] * r + LUMA_ROW[1] * g + LUMA_ROW[2] * b
            })
            .collect(),
    }
}

/// Normalized 1-D Gaussian; the 2-D window is its outer product.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Separable correlation keeping only fully covered positions.
fn filter_valid(p: &Plane, k: &[f64]) -> Plane {
    let n = k.len();
    let w = p.width + 1 - n;
    let h = p.height + 1 - n;
    let mut rows = Vec::with_capacity(w * p.height);
    for y in 0..p.height {
        let line = &p.data[y * p.width..(y + 1) * p.width];
        rows.extend((0..w).map(|x| k.iter().zip(&line[x..x + n]).map(|(a, b)| a * b).sum::<f64>()));
    }
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(k.iter().enumerate().map(|(j, a)| a * rows[(y + j) * w + x]).sum::<f64>());
        }
    }
    Plane { width: w, height: h, data }
}

/// Contrast sensitivity at spatial frequency `sf` (cycles per degree).
pub fn contrast_sensitivity(sf: f64) -> f64 {
    100.0 * 2.6 * (0.0192 + 0.114 * sf) * (-(0.114 * sf).powf(1.1)).exp()
}

/// Local structural fidelity map of one scale and its mean.
pub fn local_structure(hdr: &Plane, ldr: &Plane, sf: f64, params: &TmqiParams) -> (f64, Plane) {
    let k = gaussian_kernel(params.window_size, params.window_sigma);
    let mu1 = filter_valid(hdr, &k);
    let mu2 = filter_valid(ldr, &k);
    let e11 = filter_valid(&hdr.map(|v| v * v), &k);
    let e22 = filter_valid(&ldr.map(|v| v * v), &k);
    let e12 = filter_valid(&hdr.zip(ldr, |a, b| a * b), &k);

    let threshold = 128.0 / (1.4 * contrast_sensitivity(sf));
    let visibility = Normal::new(threshold, threshold / 3.0).expect("positive threshold");

    let data: Vec<f64> = (0..mu1.data.len())
        .map(|i| {
            let sigma1 = (e11.data[i] - mu1.data[i] * mu1.data[i]).max(0.0).sqrt();
            let sigma2 = (e22.data[i] - mu2.data[i] * mu2.data[i]).max(0.0).sqrt();
            let sigma12 = e12.data[i] - mu1.data[i] * mu2.data[i];
            let s1 = visibility.cdf(sigma1);
            let s2 = visibility.cdf(sigma2);
            (2.0 * s1 * s2 + params.c1) / (s1 * s1 + s2 * s2 + params.c1) * ((sigma12 + params.c2) / (sigma1 * sigma2 + params.c2))
        })
        .collect();
    let mean = data.iter().copied().collect::<CompensatedSum>().mean().unwrap_or(0.0);
    let map = Plane {
        width: mu1.width,
        height: mu1.height,
        data,
    };
    (mean, map)
}

/// Multi-scale structural fidelity. Scales smaller than the window are
/// dropped and the remaining weights renormalized.
pub fn structural_fidelity(hdr: &Plane, ldr: &Plane, params: &TmqiParams) -> f64 {
    let (mut hdr, mut ldr) = (hdr.clone(), ldr.clone());
    let mut sf = 32.0;
    let mut scores = Vec::new();
    for &w in &params.scale_weights {
        if hdr.width < params.window_size || hdr.height < params.window_size {
            break;
        }
        sf /= 2.0;
        let (s, _) = local_structure(&hdr, &ldr, sf, params);
        scores.push((s.max(0.0), w));
        hdr = hdr.downsample();
        ldr = ldr.downsample();
    }
    if scores.is_empty() {
        return 0.0;
    }
    let norm = if scores.len() == params.scale_weights.len() {
        1.0
    } else {
        scores.iter().map(|(_, w)| w).sum::<f64>()
    };
    scores.iter().map(|&(s, w)| s.powf(w / norm)).product::<f64>().min(1.0)
}

/// Block-contrast and brightness model of natural LDR images.
pub fn statistical_naturalness(ldr: &Plane, params: &TmqiParams) -> f64 {
    let mean = ldr.data.iter().copied().collect::<CompensatedSum>().mean().unwrap_or(0.0);
    let bs = params.naturalness_block;
    let mut contrast = CompensatedSum::new();
    for by in (0..ldr.height).step_by(bs) {
        for bx in (0..ldr.width).step_by(bs) {
            let block: Vec<f64> = (by..(by + bs).min(ldr.height))
                .flat_map(|y| (bx..(bx + bs).min(ldr.width)).map(move |x| (x, y)))
                .map(|(x, y)| ldr.get(x, y))
                .collect();
            let n = block.len() as f64;
            let m = block.iter().sum::<f64>() / n;
            let std = if block.len() > 1 {
                (block.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            // Every pixel carries its block's deviation.
            for _ in 0..block.len() {
                contrast.add(std);
            }
        }
    }
    let sigma = contrast.mean().unwrap_or(0.0);

    let beta = Beta::new(params.contrast_alpha, params.contrast_beta).expect("positive shape parameters");
    let mode = (params.contrast_alpha - 1.0) / (params.contrast_alpha + params.contrast_beta - 2.0);
    let x = sigma / params.contrast_scale;
    let pc = if (0.0..=1.0).contains(&x) { beta.pdf(x) / beta.pdf(mode) } else { 0.0 };
    let pb = (-(mean - params.brightness_mean).powi(2) / (2.0 * params.brightness_std.powi(2))).exp();
    (pb * pc).clamp(0.0, 1.0)
}

pub fn tmqi_with<T: Scalar>(hdr: &HdrImage<T>, ldr: &RgbImage<T>, params: &TmqiParams) -> Result<TmqiScore, TmqiError> {
    if hdr.width() != ldr.width || hdr.height() != ldr.height {
        return Err(TmqiError::DimensionMismatch {
            hdr_w: hdr.width(),
            hdr_h: hdr.height(),
            ldr_w: ldr.width,
            ldr_h: ldr.height,
        });
    }
    let l_hdr = hdr_luminance(hdr)?;
    let l_ldr = ldr_luminance(ldr);
    let structural = structural_fidelity(&l_hdr, &l_ldr, params);
    let naturalness = statistical_naturalness(&l_ldr, params);
    let overall = params.a * structural.powf(params.alpha) + (1.0 - params.a) * naturalness.powf(params.beta);
    Ok(TmqiScore {
        overall,
        structural,
        naturalness,
    })
}

pub fn tmqi<T: Scalar>(hdr: &HdrImage<T>, ldr: &RgbImage<T>) -> Result<TmqiScore, TmqiError> {
    tmqi_with(hdr, ldr, &TmqiParams::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(11, 1.5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[10]);
        assert!(k[5] > k[4]);
    }

    #[test]
    fn valid_filter_shrinks_by_window() {
        let p = Plane {
            width: 20,
            height: 15,
            data: vec![2.0; 300],
        };
        let f = filter_valid(&p, &gaussian_kernel(11, 1.5));
        assert_eq!((f.width, f.height), (10, 5));
        assert!(f.data.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn downsample_averages_blocks() {
        let p = Plane {
            width: 3,
            height: 2,
            data: vec![1.0, 3.0, 5.0, 3.0, 5.0, 7.0],
        };
        let d = p.downsample();
        assert_eq!((d.width, d.height), (2, 1));
        assert_eq!(d.data, vec![3.0, 6.0]);
    }

    #[test]
    fn constant_hdr_is_degenerate() {
        let hdr = HdrImage::from_fn(16, 16, |_, _| [1.0f64; 3]).unwrap();
        let ldr = RgbImage::constant(16, 16, RgbPixel::gray(0.5));
        assert!(matches!(tmqi(&hdr, &ldr), Err(TmqiError::DegenerateImage(_))));
    }

    #[test]
    fn mismatched_sizes_error() {
        let hdr = HdrImage::from_fn(16, 16, |x, _| [x as f64; 3]).unwrap();
        let ldr = RgbImage::constant(16, 8, RgbPixel::gray(0.5));
        assert!(matches!(tmqi(&hdr, &ldr), Err(TmqiError::DimensionMismatch { .. })));
    }

    #[test]
    fn brightness_model_peaks_at_mode() {
        let params = TmqiParams::default();
        let flat = |v: f64| Plane {
            width: 22,
            height: 22,
            data: (0..484).map(|i| v + if (i / 22 + i % 22) % 2 == 0 { 12.0 } else { -12.0 }).collect(),
        };
        let at_mode = statistical_naturalness(&flat(115.94), &params);
        assert!(at_mode > statistical_naturalness(&flat(90.0), &params));
        assert!(at_mode > statistical_naturalness(&flat(140.0), &params));
    }
}
