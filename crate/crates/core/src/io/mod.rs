//! File formats: Radiance RGBE and PFM scenes, PFM intermediates, 8-bit PNG
//! previews and the CSV score tables.

pub mod pfm;
pub mod report;
pub mod rgbe;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;

use thiserror::Error;

use crate::hue_plane::RgbPixel;
use crate::pipeline::RgbImage;
use crate::raw_sve::{BayerSveImage, BitDepth, ClipFlag, ClipMask, HdrImage};
use crate::scalar::Scalar;

pub use pfm::{read_pfm, write_pfm, PfmImage};
pub use report::{summarize, write_report, ReportEntry, ReportTable};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("truncated data: {0}")]
    TruncatedData(String),
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error("nothing to report")]
    NoResults,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("png: {0}")]
    Png(#[from] png::EncodingError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    Ok(BufReader::new(File::open(path)?))
}

fn pfm_at(path: &Path) -> Result<PfmImage, IoError> {
    read_pfm(open(path)?)
}

fn save_pfm(path: &Path, img: &PfmImage) -> Result<(), IoError> {
    write_pfm(BufWriter::new(File::create(path)?), img)
}

/// Reads a Radiance `.hdr` or PFM scene, detected from the file magic.
pub fn read_hdr<T: Scalar>(path: impl AsRef<Path>) -> Result<HdrImage<T>, IoError> {
    let mut r = open(path.as_ref())?;
    let mut magic = [0u8; 2];
    let got = r.read(&mut magic)?;
    if got == 0 {
        return Err(IoError::CorruptHeader("empty file".into()));
    }
    // Re-open instead of chaining, so the readers see the file from the start.
    let r = open(path.as_ref())?;
    let (width, height, rgb) = match &magic[..got] {
        b"PF" | b"Pf" => {
            let img = read_pfm(r)?;
            let rgb = if img.channels == 3 {
                img.data
            } else {
                img.data.iter().flat_map(|&v| [v, v, v]).collect()
            };
            (img.width, img.height, rgb)
        }
        b"#?" => rgbe::read_rgbe(r)?,
        other => {
            return Err(IoError::UnsupportedFormat(format!(
                "unrecognized magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let data = rgb.chunks_exact(3).map(|p| [0, 1, 2].map(|i| T::lit(p[i] as f64))).collect();
    HdrImage::new(width, height, data).map_err(|e| IoError::Invalid(e.to_string()))
}

pub fn write_hdr_pfm<T: Scalar>(path: impl AsRef<Path>, img: &HdrImage<T>) -> Result<(), IoError> {
    let data = img.data().iter().flatten().map(|v| v.as_f64() as f32).collect();
    save_pfm(
        path.as_ref(),
        &PfmImage {
            width: img.width(),
            height: img.height(),
            channels: 3,
            data,
        },
    )
}

pub fn write_rgb_pfm<T: Scalar>(path: impl AsRef<Path>, img: &RgbImage<T>) -> Result<(), IoError> {
    let data = img.data.iter().flat_map(|p| p.to_array()).map(|v| v.as_f64() as f32).collect();
    save_pfm(
        path.as_ref(),
        &PfmImage {
            width: img.width,
            height: img.height,
            channels: 3,
            data,
        },
    )
}

pub fn read_rgb_pfm<T: Scalar>(path: impl AsRef<Path>) -> Result<RgbImage<T>, IoError> {
    let img = pfm_at(path.as_ref())?;
    if img.channels != 3 {
        return Err(IoError::Invalid("expected an RGB PFM".into()));
    }
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| RgbPixel::from_array([0, 1, 2].map(|i| T::lit(p[i] as f64))))
        .collect();
    RgbImage::new(img.width, img.height, data).map_err(|e| IoError::Invalid(e.to_string()))
}

/// Raw mosaic as a single-channel PFM. Exposure metadata travels separately.
pub fn write_raw<T: Scalar>(path: impl AsRef<Path>, raw: &BayerSveImage<T>) -> Result<(), IoError> {
    save_pfm(
        path.as_ref(),
        &PfmImage {
            width: raw.width,
            height: raw.height,
            channels: 1,
            data: raw.data.iter().map(|v| v.as_f64() as f32).collect(),
        },
    )
}

pub fn read_raw<T: Scalar>(
    path: impl AsRef<Path>,
    ev_low: f64,
    ev_high: f64,
    bit_depth: BitDepth,
) -> Result<BayerSveImage<T>, IoError> {
    let img = pfm_at(path.as_ref())?;
    if img.channels != 1 {
        return Err(IoError::Invalid("expected a single-channel raw PFM".into()));
    }
    let data = img.data.iter().map(|&v| T::lit(v as f64)).collect();
    BayerSveImage::new(img.width, img.height, data, ev_low, ev_high, bit_depth).map_err(|e| IoError::Invalid(e.to_string()))
}

/// Clip flags as a single-channel PFM of codes 0 (valid), 1 (under), 2 (over).
pub fn write_mask(path: impl AsRef<Path>, mask: &ClipMask) -> Result<(), IoError> {
    save_pfm(
        path.as_ref(),
        &PfmImage {
            width: mask.width,
            height: mask.height,
            channels: 1,
            data: mask.flags.iter().map(|f| f.code() as f32).collect(),
        },
    )
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<ClipMask, IoError> {
    let img = pfm_at(path.as_ref())?;
    if img.channels != 1 {
        return Err(IoError::Invalid("expected a single-channel mask PFM".into()));
    }
    let flags = img
        .data
        .iter()
        .map(|&v| {
            (v.fract() == 0.0 && (0.0..=2.0).contains(&v))
                .then(|| ClipFlag::from_code(v as u8))
                .flatten()
                .ok_or_else(|| IoError::Invalid(format!("mask code {v}")))
        })
        .collect::<Result<_, _>>()?;
    Ok(ClipMask {
        width: img.width,
        height: img.height,
        flags,
    })
}

/// `round(v * 255)` with halves away from zero.
#[inline]
pub fn to_byte<T: Scalar>(v: T) -> u8 {
    (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_png<T: Scalar>(path: impl AsRef<Path>, img: &RgbImage<T>) -> Result<(), IoError> {
    let w = BufWriter::new(File::create(path.as_ref())?);
    let mut enc = png::Encoder::new(w, img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    let bytes: Vec<u8> = img.data.iter().flat_map(|p| p.to_array().map(to_byte)).collect();
    writer.write_image_data(&bytes)?;
    writer.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raw_sve::{clip_mask_of, simulate_sve_capture, ExposureAnchor};

    #[test]
    fn byte_quantization() {
        assert_eq!(to_byte(1.0f64), 255);
        assert_eq!(to_byte(0.5f64), 128);
        assert_eq!(to_byte(0.0f64), 0);
        assert_eq!(to_byte(0.5f32), 128);
        for i in 0..=1000 {
            let v = i as f64 / 1000.0;
            assert!((to_byte(v) as f64 / 255.0 - v).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.png");
        let img = RgbImage::from_fn(3, 2, |x, y| RgbPixel::new(x as f64 / 2.0, y as f64, 0.5));
        write_png(&path, &img).unwrap();
        let dec = png::Decoder::new(BufReader::new(File::open(&path).unwrap()));
        let mut reader = dec.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (3, 2));
        assert_eq!(&buf[..9], &[0, 0, 128, 128, 0, 128, 255, 0, 128]);
        assert_eq!(&buf[9..12], &[0, 255, 128]);
    }

    #[test]
    fn hdr_pfm_and_rgbe_detection() {
        let dir = tempfile::tempdir().unwrap();
        let pfm = dir.path().join("scene.pfm");
        let hdr = HdrImage::from_fn(4, 4, |x, y| [x as f64, y as f64 * 0.5, 3.25]).unwrap();
        write_hdr_pfm(&pfm, &hdr).unwrap();
        assert_eq!(read_hdr::<f64>(&pfm).unwrap(), hdr);

        let rad = dir.path().join("scene.hdr");
        let mut bytes = b"#?RADIANCE\n\n-Y 1 +X 1\n".to_vec();
        bytes.extend_from_slice(&[128, 128, 128, 129]);
        std::fs::write(&rad, bytes).unwrap();
        assert_eq!(read_hdr::<f32>(&rad).unwrap().data(), &[[1.0f32, 1.0, 1.0]]);

        let empty = dir.path().join("empty.hdr");
        std::fs::write(&empty, b"").unwrap();
        assert!(matches!(read_hdr::<f64>(&empty), Err(IoError::CorruptHeader(_))));
        let junk = dir.path().join("junk.hdr");
        std::fs::write(&junk, b"GIF89a").unwrap();
        assert!(matches!(read_hdr::<f64>(&junk), Err(IoError::UnsupportedFormat(_))));
    }

    #[test]
    fn raw_and_mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let scene = HdrImage::from_fn(8, 8, |x, y| [0.1 * x as f64, 0.05 * y as f64, 0.02]).unwrap();
        let raw = simulate_sve_capture(&scene, -2.0, 2.0, ExposureAnchor::Gain(1.0), BitDepth::EIGHT).unwrap();
        write_raw(dir.path().join("r.pfm"), &raw).unwrap();
        let back: BayerSveImage<f64> = read_raw(dir.path().join("r.pfm"), -2.0, 2.0, BitDepth::EIGHT).unwrap();
        // Samples are k/255, which f32 does not represent exactly.
        for (a, b) in back.data.iter().zip(&raw.data) {
            assert!((a - b).abs() < 1e-7);
        }
        let back32: BayerSveImage<f32> = read_raw(dir.path().join("r.pfm"), -2.0, 2.0, BitDepth::EIGHT).unwrap();
        assert_eq!(clip_mask_of(&back32), clip_mask_of(&raw));

        let mask = clip_mask_of(&raw);
        write_mask(dir.path().join("m.pfm"), &mask).unwrap();
        assert_eq!(read_mask(dir.path().join("m.pfm")).unwrap(), mask);
    }
}
