//! Deterministic synthetic scene corpus.
//!
//! Every synthetic scene is built in anchored units (log-average luminance
//! 0.18, the sensor's 0 EV) and then multiplied by a random global radiance
//! scale, which the exposure anchor removes again at capture time.
//!
//! | recipe              | content                                   | hue branch exercised        |
//! |---------------------|-------------------------------------------|-----------------------------|
//! | `gradient_chart`    | smooth hue/saturation sweep, no clipping  | low exposure on every pixel |
//! | `spotlight_patches` | saturated patches under bright spotlights | low exposure where high clips |
//! | `chromatic_shadows` | colored objects in deep shadow            | high exposure where low underflows |
//! | `mixed`             | all of the above plus neutral surfaces    | every branch, incl. keep    |

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{read_hdr, IoError};
use crate::raw_sve::{check_exposure_pair, ExposureAnchor, HdrImage, SveError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("scene {scene}: {source}")]
    Read { scene: String, source: IoError },
    #[error("scene {scene}: {source}")]
    Scene { scene: String, source: SveError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    GradientChart,
    SpotlightPatches,
    ChromaticShadows,
    Mixed,
}

impl Recipe {
    pub const ALL: [Recipe; 4] = [
        Recipe::GradientChart,
        Recipe::SpotlightPatches,
        Recipe::ChromaticShadows,
        Recipe::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::GradientChart => "gradient_chart",
            Recipe::SpotlightPatches => "spotlight_patches",
            Recipe::ChromaticShadows => "chromatic_shadows",
            Recipe::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneSource {
    File { path: PathBuf },
    Synthetic { recipe: Recipe, width: usize, height: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub id: String,
    pub source: SceneSource,
    /// `(ev_low, ev_high)` pairs.
    pub ev_pairs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub scenes: Vec<SceneEntry>,
}

pub const DEFAULT_SCENE_SIZE: usize = 192;

pub fn symmetric_pairs(evs: &[f64]) -> Vec<(f64, f64)> {
    evs.iter().map(|&e| (-e, e)).collect()
}

impl CorpusManifest {
    /// Three scenes per recipe at ±1..±4 EV.
    pub fn default_synthetic(seed: u64) -> Self {
        let scenes = Recipe::ALL
            .iter()
            .flat_map(|&r| (0..3).map(move |i| (r, i)))
            .map(|(recipe, i)| SceneEntry {
                id: format!("{}_{i}", recipe.name()),
                source: SceneSource::Synthetic {
                    recipe,
                    width: DEFAULT_SCENE_SIZE,
                    height: DEFAULT_SCENE_SIZE,
                },
                ev_pairs: symmetric_pairs(&[1.0, 2.0, 3.0, 4.0]),
            })
            .collect();
        Self { seed, scenes }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidManifest(m));
        if self.scenes.is_empty() {
            return bad("no scenes".into());
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.scenes {
            if s.id.is_empty() || !s.id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return bad(format!("scene id {:?} must be non-empty [A-Za-z0-9._-]", s.id));
            }
            if !seen.insert(&s.id) {
                return bad(format!("duplicate scene id {}", s.id));
            }
            if s.ev_pairs.is_empty() {
                return bad(format!("scene {} has no ev pairs", s.id));
            }
            for &(lo, hi) in &s.ev_pairs {
                if check_exposure_pair(lo, hi).is_err() {
                    return bad(format!("scene {}: ev pair ({lo}, {hi}) needs low < high", s.id));
                }
            }
            if let SceneSource::Synthetic { width, height, .. } = s.source {
                if width < 4 || height < 4 || width % 4 != 0 || height % 4 != 0 {
                    return bad(format!("scene {}: {width}x{height} is not a multiple of 4", s.id));
                }
            }
        }
        Ok(())
    }
}

/// 64-bit FNV-1a, so scene seeds do not depend on the std hasher.
fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn scene_rng(seed: u64, id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(id))
}

/// Fully saturated color of hue `h` (turns), value 1.
fn hue_color(h: f64) -> [f64; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let f = h6 - h6.floor();
    match h6 as u32 {
        0 => [1.0, f, 0.0],
        1 => [1.0 - f, 1.0, 0.0],
        2 => [0.0, 1.0, f],
        3 => [0.0, 1.0 - f, 1.0],
        4 => [f, 0.0, 1.0],
        _ => [1.0, 0.0, 1.0 - f],
    }
}

/// Mix of a hue toward white: `sat` 0 is gray, 1 the full color.
fn tint(h: f64, sat: f64) -> [f64; 3] {
    hue_color(h).map(|c| 1.0 - sat + sat * c)
}

fn scale(p: [f64; 3], k: f64) -> [f64; 3] {
    p.map(|v| v * k)
}

/// Low-amplitude multiplicative texture from a few random sinusoids.
struct Texture {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Texture {
    fn new(rng: &mut ChaCha8Rng, amplitude: f64) -> Self {
        let waves = (0..3)
            .map(|_| {
                (
                    rng.gen_range(0.01..0.06),
                    rng.gen_range(0.01..0.06),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                    amplitude / 3.0,
                )
            })
            .collect();
        Self { waves }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        1.0 + self
            .waves
            .iter()
            .map(|&(fx, fy, ph, a)| a * (fx * x + fy * y + ph).sin())
            .sum::<f64>()
    }
}

/// Largest channel value a recipe may reach at 0 EV, where it still has an
/// unclipped reference.
pub const PEAK_AT_0EV: f64 = 0.95;

/// Rescales to log-average luminance 0.18.
fn anchored(w: usize, h: usize, data: Vec<[f64; 3]>) -> Result<Vec<[f64; 3]>, SveError> {
    let img = HdrImage::new(w, h, data)?;
    let g = ExposureAnchor::MiddleGray.gain(&img)?;
    Ok(img.data().iter().map(|p| scale(*p, g)).collect())
}

fn peak(data: &[[f64; 3]]) -> f64 {
    data.iter().flatten().fold(0.0, |m, &v| m.max(v))
}

/// Picks the contrast parameter in `[lo, hi]` whose anchored rendering
/// peaks closest to, but not above, `target`. The peak must be monotone in
/// the parameter.
fn fit_contrast(
    w: usize,
    h: usize,
    (lo, hi): (f64, f64),
    target: f64,
    render: impl Fn(f64) -> Vec<[f64; 3]>,
) -> Result<Vec<[f64; 3]>, SveError> {
    let eval = |t: f64| anchored(w, h, render(t));
    let (at_lo, at_hi) = (eval(lo)?, eval(hi)?);
    let (p_lo, p_hi) = (peak(&at_lo), peak(&at_hi));
    let ((mut below, dim), (mut above, bright)) = if p_lo <= p_hi {
        ((lo, at_lo), (hi, at_hi))
    } else {
        ((hi, at_hi), (lo, at_lo))
    };
    if peak(&dim) > target {
        return Ok(dim);
    }
    if peak(&bright) <= target {
        return Ok(bright);
    }
    let mut best = dim;
    for _ in 0..40 {
        let mid = 0.5 * (below + above);
        let img = eval(mid)?;
        if peak(&img) <= target {
            below = mid;
            best = img;
        } else {
            above = mid;
        }
    }
    Ok(best)
}

fn pixels(w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..h).flat_map(move |y| (0..w).map(move |x| (x, y)))
}

fn gradient_chart(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Result<Vec<[f64; 3]>, SveError> {
    let hue0 = rng.gen_range(0.0..1.0);
    let tex = Texture::new(rng, 0.06);
    let (wf, hf) = (w as f64, h as f64);
    let data = pixels(w, h)
        .map(|(x, y)| {
            let (x, y) = (x as f64, y as f64);
            let sat = 0.15 + 0.7 * y / hf;
            let level = 0.16 + 0.12 * (x / wf);
            scale(tint(hue0 + x / wf, sat), level * tex.at(x, y))
        })
        .collect();
    anchored(w, h, data)
}

struct Spot {
    cx: f64,
    cy: f64,
    radius: f64,
    weight: f64,
}

fn spots(rng: &mut ChaCha8Rng, w: usize, h: usize, n: usize) -> Vec<Spot> {
    (0..n)
        .map(|_| Spot {
            cx: rng.gen_range(0.2..0.8) * w as f64,
            cy: rng.gen_range(0.2..0.8) * h as f64,
            radius: rng.gen_range(0.15..0.3) * w.min(h) as f64,
            weight: rng.gen_range(0.5..1.0),
        })
        .collect()
}

fn illumination(spots: &[Spot], gain: f64, x: f64, y: f64) -> f64 {
    1.0 + gain
        * spots
            .iter()
            .map(|s| {
                let d2 = ((x - s.cx).powi(2) + (y - s.cy).powi(2)) / (s.radius * s.radius);
                s.weight * (-d2).exp()
            })
            .sum::<f64>()
}

/// Colored patches on a `cells` x `cells` grid whose cuts are jittered, so
/// patch edges fall at arbitrary rows of the exposure pattern.
struct Patches {
    xs: Vec<usize>,
    ys: Vec<usize>,
    cells: usize,
    colors: Vec<[f64; 3]>,
}

impl Patches {
    fn new(rng: &mut ChaCha8Rng, w: usize, h: usize, cells: usize, sat: std::ops::Range<f64>) -> Self {
        let mut cuts = |len: usize| -> Vec<usize> {
            let pitch = len as f64 / cells as f64;
            (1..cells)
                .map(|i| (i as f64 * pitch + rng.gen_range(-pitch / 3.0..pitch / 3.0)).round() as usize)
                .collect()
        };
        let (xs, ys) = (cuts(w), cuts(h));
        let colors = (0..cells * cells)
            .map(|_| {
                let hue = rng.gen_range(0.0..1.0);
                tint(hue, rng.gen_range(sat.clone()))
            })
            .collect();
        Self { xs, ys, cells, colors }
    }

    fn at(&self, x: usize, y: usize) -> [f64; 3] {
        let cx = self.xs.partition_point(|&c| c <= x);
        let cy = self.ys.partition_point(|&c| c <= y);
        self.colors[cy * self.cells + cx]
    }
}

/// The spotlight gain is fitted so the brightest patch stays just below
/// 0 EV full scale while the high exposure rows clip.
fn spotlight_patches(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Result<Vec<[f64; 3]>, SveError> {
    let cells = 6;
    let albedo = Patches::new(rng, w, h, cells, 0.3..0.95);
    let lights = spots(rng, w, h, 2);
    let tex = Texture::new(rng, 0.08);
    fit_contrast(w, h, (0.0, 400.0), PEAK_AT_0EV, |gain| {
        pixels(w, h)
            .map(|(x, y)| {
                let (xf, yf) = (x as f64, y as f64);
                scale(albedo.at(x, y), illumination(&lights, gain, xf, yf) * tex.at(xf, yf))
            })
            .collect()
    })
}

/// Colored patches, part of them in a soft-edged shadow; the shadow depth is
/// the deepest that keeps the lit side below 0 EV full scale.
fn chromatic_shadows(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Result<Vec<[f64; 3]>, SveError> {
    let cells = 4;
    let albedo = Patches::new(rng, w, h, cells, 0.5..0.9);
    let edge = rng.gen_range(0.2..0.35);
    let tex = Texture::new(rng, 0.06);
    fit_contrast(w, h, (1e-3, 1.0), PEAK_AT_0EV, |depth| {
        pixels(w, h)
            .map(|(x, y)| {
                let (xf, yf) = (x as f64, y as f64);
                let u = xf / w as f64;
                let lit = 1.0 / (1.0 + (-(u - edge) * 40.0).exp());
                let light = depth + (1.0 - depth) * lit;
                scale(albedo.at(x, y), light * tex.at(xf, yf))
            })
            .collect()
    })
}

/// Neutral surfaces with hard highlight stripes and one saturated lamp that
/// clips both exposures.
fn lamp_and_stripes(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Result<Vec<[f64; 3]>, SveError> {
    let tex = Texture::new(rng, 0.1);
    let lamp_color = hue_color(rng.gen_range(0.0..1.0));
    let (cx, cy) = (rng.gen_range(0.3..0.7) * w as f64, rng.gen_range(0.3..0.7) * h as f64);
    let r2 = (0.12 * w.min(h) as f64).powi(2);
    let data = pixels(w, h)
        .map(|(x, y)| {
            let (xf, yf) = (x as f64, y as f64);
            if (xf - cx).powi(2) + (yf - cy).powi(2) < r2 {
                scale(lamp_color, 200.0)
            } else {
                let stripe = if (x + y) % 48 < 6 { 30.0 } else { 1.0 };
                let v = stripe * tex.at(xf, yf);
                [v, v, v]
            }
        })
        .collect();
    anchored(w, h, data)
}

fn mixed(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Result<Vec<[f64; 3]>, SveError> {
    let (hw, hh) = (w / 2, h / 2);
    let quadrants = [
        gradient_chart(rng, hw, hh)?,
        spotlight_patches(rng, w - hw, hh)?,
        chromatic_shadows(rng, hw, h - hh)?,
        lamp_and_stripes(rng, w - hw, h - hh)?,
    ];
    Ok(pixels(w, h)
        .map(|(x, y)| match (x < hw, y < hh) {
            (true, true) => quadrants[0][y * hw + x],
            (false, true) => quadrants[1][y * (w - hw) + x - hw],
            (true, false) => quadrants[2][(y - hh) * hw + x],
            (false, false) => quadrants[3][(y - hh) * (w - hw) + x - hw],
        })
        .collect())
}

/// Renders one synthetic scene, anchored then multiplied by a random scale.
pub fn render_synthetic<T: Scalar>(
    recipe: Recipe,
    width: usize,
    height: usize,
    rng: &mut ChaCha8Rng,
) -> Result<HdrImage<T>, SveError> {
    let data = match recipe {
        Recipe::GradientChart => gradient_chart(rng, width, height)?,
        Recipe::SpotlightPatches => spotlight_patches(rng, width, height)?,
        Recipe::ChromaticShadows => chromatic_shadows(rng, width, height)?,
        Recipe::Mixed => mixed(rng, width, height)?,
    };
    let data = anchored(width, height, data)?;
    let radiance_scale = 10f64.powf(rng.gen_range(-1.0..2.0));
    HdrImage::new(
        width,
        height,
        data.iter().map(|p| p.map(|v| T::lit(v * radiance_scale))).collect(),
    )
}

/// Loads or renders every scene of the manifest, in manifest order.
pub fn generate_synthetic_corpus<T: Scalar>(manifest: &CorpusManifest) -> Result<Vec<(String, HdrImage<T>)>, CorpusError> {
    manifest.validate()?;
    manifest
        .scenes
        .iter()
        .map(|s| {
            let img = match &s.source {
                SceneSource::Synthetic { recipe, width, height } => {
                    let mut rng = scene_rng(manifest.seed, &s.id);
                    render_synthetic(*recipe, *width, *height, &mut rng)
                }
                SceneSource::File { path } => read_hdr::<T>(path)
                    .map_err(|source| CorpusError::Read {
                        scene: s.id.clone(),
                        source,
                    })?
                    .crop_to_sensor_grid(),
            };
            img.map(|i| (s.id.clone(), i)).map_err(|source| CorpusError::Scene {
                scene: s.id.clone(),
                source,
            })
        })
        .collect()
}
