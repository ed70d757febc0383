//! Portable float map: `PF` (RGB) and `Pf` (gray), rows stored bottom-up.
//! A negative scale marks little-endian samples.

use std::io::{BufRead, Read, Write};

use super::IoError;

#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Top-down, interleaved.
    pub data: Vec<f32>,
}

fn header_token<R: BufRead>(r: &mut R) -> Result<String, IoError> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match r.read(&mut byte)? {
            0 if tok.is_empty() => return Err(IoError::CorruptHeader("PFM header ends early".into())),
            0 => break,
            _ if byte[0].is_ascii_whitespace() => {
                if !tok.is_empty() {
                    break;
                }
            }
            _ => {
                tok.push(byte[0]);
                if tok.len() > 64 {
                    return Err(IoError::CorruptHeader("PFM header token too long".into()));
                }
            }
        }
    }
    String::from_utf8(tok).map_err(|_| IoError::CorruptHeader("non-ASCII PFM header".into()))
}

pub fn read_pfm<R: BufRead>(mut r: R) -> Result<PfmImage, IoError> {
    let channels = match header_token(&mut r)?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(IoError::UnsupportedFormat(format!("PFM magic {other:?}"))),
    };
    let mut dim = |what: &str| -> Result<usize, IoError> {
        header_token(&mut r)?
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| IoError::CorruptHeader(format!("bad PFM {what}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let scale: f32 = header_token(&mut r)?
        .parse()
        .ok()
        .filter(|s: &f32| s.is_finite() && *s != 0.0)
        .ok_or_else(|| IoError::CorruptHeader("bad PFM scale".into()))?;
    let little_endian = scale < 0.0;

    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| IoError::CorruptHeader("PFM dimensions overflow".into()))?;
    let mut bytes = Vec::with_capacity(count * 4);
    r.take((count * 4) as u64).read_to_end(&mut bytes)?;
    if bytes.len() < count * 4 {
        return Err(IoError::TruncatedData(format!(
            "PFM has {} of {} sample bytes",
            bytes.len(),
            count * 4
        )));
    }
    let samples: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    let stride = width * channels;
    let data = samples.chunks_exact(stride).rev().flatten().copied().collect();
    Ok(PfmImage {
        width,
        height,
        channels,
        data,
    })
}

/// Writes little-endian with scale `-1.0`.
pub fn write_pfm<W: Write>(mut w: W, img: &PfmImage) -> Result<(), IoError> {
    let magic = match img.channels {
        3 => "PF",
        1 => "Pf",
        n => return Err(IoError::UnsupportedFormat(format!("{n}-channel PFM"))),
    };
    if img.data.len() != img.width * img.height * img.channels {
        return Err(IoError::Invalid("PFM sample count does not match its size".into()));
    }
    write!(w, "{magic}\n{} {}\n-1.0\n", img.width, img.height)?;
    let stride = img.width * img.channels;
    let mut bytes = Vec::with_capacity(img.data.len() * 4);
    for row in img.data.chunks_exact(stride).rev() {
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pixel_little_endian() {
        let mut bytes = b"PF\n1 1\n-1.0\n".to_vec();
        for v in [1.0f32, 0.5, 0.25] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let img = read_pfm(&bytes[..]).unwrap();
        assert_eq!(img.data, vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn big_endian_and_row_order() {
        let mut bytes = b"Pf\n1 2\n1.0\n".to_vec();
        // Bottom row first.
        for v in [2.0f32, 7.0] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        let img = read_pfm(&bytes[..]).unwrap();
        assert_eq!(img.channels, 1);
        assert_eq!(img.data, vec![7.0, 2.0]);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(read_pfm(&b""[..]), Err(IoError::CorruptHeader(_))));
        assert!(matches!(read_pfm(&b"P6\n1 1\n255\n"[..]), Err(IoError::UnsupportedFormat(_))));
        assert!(matches!(read_pfm(&b"PF\n1 x\n-1\n"[..]), Err(IoError::CorruptHeader(_))));
        assert!(matches!(read_pfm(&b"PF\n2 2\n-1\n\0\0\0\0"[..]), Err(IoError::TruncatedData(_))));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            (w, h, data) in (1usize..5, 1usize..5).prop_flat_map(|(w, h)| {
                (Just(w), Just(h), proptest::collection::vec(any::<u32>().prop_map(f32::from_bits), w * h * 3))
            })
        ) {
            let img = PfmImage { width: w, height: h, channels: 3, data };
            let mut buf = Vec::new();
            write_pfm(&mut buf, &img).unwrap();
            let back = read_pfm(&buf[..]).unwrap();
            let bits = |d: &[f32]| d.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back.data), bits(&img.data));
        }
    }
}
