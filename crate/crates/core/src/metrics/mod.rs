//! Objective scores of a reconstruction against its HDR scene.
//!
//! Per-pixel hue metrics compare against the reference LDR, the scene at
//! 0 EV clipped to `[0, 1]`; TMQI compares against the HDR radiance itself.

pub mod ciede2000;
pub mod tmqi;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hue_plane::{max_saturated_color, RgbPixel};
use crate::pipeline::RgbImage;
use crate::raw_sve::HdrImage;
use crate::scalar::{CompensatedSum, Scalar};

pub use ciede2000::{ciede2000, delta_e_2000, srgb_to_lab, Ciede2000, Lab};
pub use tmqi::{tmqi, tmqi_with, TmqiError, TmqiParams, TmqiScore};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Tmqi(#[from] TmqiError),
}

fn check_sizes<T>(a: &RgbImage<T>, b: &RgbImage<T>) -> Result<(), MetricsError> {
    if a.width == b.width && a.height == b.height {
        Ok(())
    } else {
        Err(MetricsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineScore {
    /// `None` when no pixel is chromatic in both images.
    pub mean: Option<f64>,
    pub included: usize,
    pub skipped_achromatic: usize,
}

pub fn cosine(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    dot / (na * nb)
}

/// Mean cosine similarity between the maximally saturated colors of both
/// images, over pixels chromatic in both.
pub fn max_sat_cosine_similarity<T: Scalar>(reference: &RgbImage<T>, test: &RgbImage<T>) -> Result<CosineScore, MetricsError> {
    check_sizes(reference, test)?;
    let mut acc = CompensatedSum::new();
    let mut skipped = 0;
    for (&r, &t) in reference.data.iter().zip(&test.data) {
        match (max_saturated_color(r), max_saturated_color(t)) {
            (Ok(cr), Ok(ct)) => acc.add(cosine(cr.to_array().map(Scalar::as_f64), ct.to_array().map(Scalar::as_f64))),
            _ => skipped += 1,
        }
    }
    Ok(CosineScore {
        mean: acc.mean(),
        included: acc.count(),
        skipped_achromatic: skipped,
    })
}

fn lab_of<T: Scalar>(p: RgbPixel<T>) -> Lab {
    srgb_to_lab(p.to_array().map(Scalar::as_f64))
}

/// Mean absolute CIEDE2000 hue difference `|dH'|` over all pixels.
pub fn ciede2000_hue_difference<T: Scalar>(reference: &RgbImage<T>, test: &RgbImage<T>) -> Result<f64, MetricsError> {
    check_sizes(reference, test)?;
    let acc: CompensatedSum = reference
        .data
        .iter()
        .zip(&test.data)
        .map(|(&r, &t)| ciede2000(lab_of(r), lab_of(t)).delta_h_prime.abs())
        .collect();
    Ok(acc.mean().unwrap_or(0.0))
}

/// The scene as an ideal 0 EV capture: `clip(radiance * anchor_gain, 0, 1)`.
pub fn reference_image<T: Scalar>(hdr: &HdrImage<T>, anchor_gain: f64) -> RgbImage<T> {
    let gain = T::lit(anchor_gain);
    RgbImage::from_fn(hdr.width(), hdr.height(), |x, y| {
        RgbPixel::from_array(hdr.get(x, y).map(|v| v * gain)).clamp_unit()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cosine_similarity_mean: Option<f64>,
    pub ciede2000_hue_mean: f64,
    pub tmqi: f64,
    pub tmqi_structural: f64,
    pub tmqi_naturalness: f64,
    pub pixel_count: usize,
    pub skipped_achromatic: usize,
}

/// Scores one reconstruction.
pub fn evaluate<T: Scalar>(hdr: &HdrImage<T>, anchor_gain: f64, test: &RgbImage<T>) -> Result<MetricsReport, MetricsError> {
    let reference = reference_image(hdr, anchor_gain);
    check_sizes(&reference, test)?;
    let cos = max_sat_cosine_similarity(&reference, test)?;
    let hue = ciede2000_hue_difference(&reference, test)?;
    let q = tmqi(hdr, test)?;
    Ok(MetricsReport {
        cosine_similarity_mean: cos.mean,
        ciede2000_hue_mean: hue,
        tmqi: q.overall,
        tmqi_structural: q.structural,
        tmqi_naturalness: q.naturalness,
        pixel_count: cos.included,
        skipped_achromatic: cos.skipped_achromatic,
    })
}

/// Scores the conventional and proposed reconstructions of one capture.
pub fn evaluate_pair<T: Scalar>(
    hdr: &HdrImage<T>,
    anchor_gain: f64,
    conventional: &RgbImage<T>,
    proposed: &RgbImage<T>,
) -> Result<(MetricsReport, MetricsReport), MetricsError> {
    Ok((evaluate(hdr, anchor_gain, conventional)?, evaluate(hdr, anchor_gain, proposed)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(f: impl Fn(usize, usize) -> RgbPixel<f64>) -> RgbImage<f64> {
        RgbImage::from_fn(8, 8, f)
    }

    fn chart() -> RgbImage<f64> {
        img(|x, y| RgbPixel::new(0.1 + 0.1 * x as f64, 0.2 + 0.05 * y as f64, 0.3))
    }

    #[test]
    fn cosine_examples() {
        let a = chart();
        let s = max_sat_cosine_similarity(&a, &a).unwrap();
        assert!((s.mean.unwrap() - 1.0).abs() < 1e-12);

        let red = img(|_, _| RgbPixel::new(0.8, 0.1, 0.1));
        let green = img(|_, _| RgbPixel::new(0.1, 0.8, 0.1));
        assert!(max_sat_cosine_similarity(&red, &green).unwrap().mean.unwrap().abs() < 1e-12);

        let orange = img(|_, _| RgbPixel::new(0.6, 0.4, 0.2));
        let s = max_sat_cosine_similarity(&orange, &red).unwrap().mean.unwrap();
        assert!((s - 1.0 / 1.25f64.sqrt()).abs() < 1e-12);
        assert!((s - 0.8944).abs() < 1e-4);
    }

    #[test]
    fn cosine_skips_achromatic() {
        let a = img(|x, _| if x == 0 { RgbPixel::gray(0.4) } else { RgbPixel::new(0.5, 0.2, 0.1) });
        let s = max_sat_cosine_similarity(&a, &a).unwrap();
        assert_eq!(s.skipped_achromatic, 8);
        assert_eq!(s.included + s.skipped_achromatic, 64);
        let gray = img(|_, _| RgbPixel::gray(0.4));
        assert_eq!(max_sat_cosine_similarity(&gray, &gray).unwrap().mean, None);
    }

    #[test]
    fn hue_difference_examples() {
        let a = chart();
        assert_eq!(ciede2000_hue_difference(&a, &a).unwrap(), 0.0);
        let dark = img(|_, _| RgbPixel::gray(0.2));
        let light = img(|_, _| RgbPixel::gray(0.9));
        // sRGB grays are not exactly a* = b* = 0 under the rounded D65
        // white, so allow the residual chroma.
        assert!(ciede2000_hue_difference(&dark, &light).unwrap() < 1e-3);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let a = chart();
        let b = RgbImage::constant(4, 8, RgbPixel::gray(0.1));
        assert!(max_sat_cosine_similarity(&a, &b).is_err());
        assert!(ciede2000_hue_difference(&a, &b).is_err());
    }

    #[test]
    fn reference_clips_at_full_scale() {
        let hdr = HdrImage::from_fn(4, 4, |x, _| [x as f64, 0.25, 0.0]).unwrap();
        let r = reference_image(&hdr, 0.5);
        assert_eq!(r.get(3, 0), RgbPixel::new(1.0, 0.125, 0.0));
        assert_eq!(r.get(1, 0), RgbPixel::new(0.5, 0.125, 0.0));
    }

    #[test]
    fn identical_reconstructions_give_identical_reports() {
        let hdr = HdrImage::from_fn(32, 32, |x, y| [0.01 + 0.02 * x as f64, 0.3, 0.01 * y as f64]).unwrap();
        let out = reference_image(&hdr, 1.0);
        let (a, b) = evaluate_pair(&hdr, 1.0, &out, &out).unwrap();
        assert_eq!(a, b);
        assert!((a.cosine_similarity_mean.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(a.ciede2000_hue_mean, 0.0);
        assert!((0.0..=1.0).contains(&a.tmqi));
    }

    proptest! {
        #[test]
        fn cosine_scale_invariant(g in 0.05f64..=1.0, seed in 0u64..500) {
            let a = img(|x, y| {
                let h = seed.wrapping_mul(6364136223846793005).wrapping_add(((y * 8 + x) as u64).wrapping_mul(1442695040888963407));
                let c = |s: u32| ((h >> s) % 1000) as f64 / 1000.0;
                RgbPixel::new(c(3), c(17), c(31))
            });
            let scaled = RgbImage { data: a.data.iter().map(|p| p.map(|v| v * g)).collect(), ..a.clone() };
            let reference = chart();
            let s0 = max_sat_cosine_similarity(&reference, &a).unwrap();
            let s1 = max_sat_cosine_similarity(&reference, &scaled).unwrap();
            prop_assume!(s0.included == s1.included);
            prop_assert!((s0.mean.unwrap() - s1.mean.unwrap()).abs() < 1e-9);
        }

        #[test]
        fn means_ignore_pixel_order(seed in 0u64..200, shift in 1usize..63) {
            let a = img(|x, y| {
                let h = seed.wrapping_add((y * 8 + x) as u64).wrapping_mul(2862933555777941757);
                RgbPixel::new(((h >> 5) % 997) as f64 / 997.0, ((h >> 19) % 991) as f64 / 991.0, 0.25)
            });
            let b = chart();
            let rot = |i: &RgbImage<f64>| {
                let mut data = i.data.clone();
                data.rotate_left(shift);
                RgbImage { data, ..i.clone() }
            };
            let h0 = ciede2000_hue_difference(&b, &a).unwrap();
            let h1 = ciede2000_hue_difference(&rot(&b), &rot(&a)).unwrap();
            prop_assert!((h0 - h1).abs() < 1e-12);
            let c0 = max_sat_cosine_similarity(&b, &a).unwrap().mean.unwrap();
            let c1 = max_sat_cosine_similarity(&rot(&b), &rot(&a)).unwrap().mean.unwrap();
            prop_assert!((c0 - c1).abs() < 1e-12);
        }
    }
}
