//! Radiance RGBE (`.hdr`) reader. Supports flat and new-style run-length
//! encoded scanlines in the standard `-Y h +X w` orientation.

use std::io::{BufRead, Read};

use super::IoError;

/// `(m / 256) * 2^(e - 128)` per channel; exponent 0 is black.
#[inline]
pub fn rgbe_to_float([r, g, b, e]: [u8; 4]) -> [f32; 3] {
    if e == 0 {
        return [0.0; 3];
    }
    let f = (e as f64 - 136.0).exp2();
    [r, g, b].map(|m| (m as f64 * f) as f32)
}

fn read_line<R: BufRead>(r: &mut R) -> Result<Option<String>, IoError> {
    let mut buf = Vec::new();
    let n = r.read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() == Some(&b'\n') {
        buf.pop();
    }
    Ok(Some(String::from_utf8_lossy(&buf).into_owned()))
}

/// Returns width, height and top-down interleaved RGB floats.
pub fn read_rgbe<R: BufRead>(mut r: R) -> Result<(usize, usize, Vec<f32>), IoError> {
    let magic = read_line(&mut r)?.ok_or_else(|| IoError::CorruptHeader("empty file".into()))?;
    if !(magic.starts_with("#?RADIANCE") || magic.starts_with("#?RGBE")) {
        return Err(IoError::CorruptHeader(format!("not a Radiance header: {magic:?}")));
    }
    loop {
        let line = read_line(&mut r)?.ok_or_else(|| IoError::CorruptHeader("header not terminated".into()))?;
        if line.trim().is_empty() {
            break;
        }
        if let Some(fmt) = line.strip_prefix("FORMAT=") {
            if fmt.trim() != "32-bit_rle_rgbe" {
                return Err(IoError::UnsupportedFormat(format!("Radiance pixel format {fmt}")));
            }
        }
    }
    let res = read_line(&mut r)?.ok_or_else(|| IoError::CorruptHeader("missing resolution line".into()))?;
    let parts: Vec<&str> = res.split_whitespace().collect();
    let (height, width) = match parts.as_slice() {
        ["-Y", h, "+X", w] => (
            h.parse::<usize>().map_err(|_| IoError::CorruptHeader(format!("bad height in {res:?}")))?,
            w.parse::<usize>().map_err(|_| IoError::CorruptHeader(format!("bad width in {res:?}")))?,
        ),
        [a, _, b, _] if a.len() == 2 && b.len() == 2 => {
            return Err(IoError::UnsupportedFormat(format!("image orientation {res:?}")))
        }
        _ => return Err(IoError::CorruptHeader(format!("bad resolution line {res:?}"))),
    };
    if width == 0 || height == 0 {
        return Err(IoError::CorruptHeader("zero image size".into()));
    }

    let mut data = Vec::with_capacity(width * height * 3);
    let mut line = vec![[0u8; 4]; width];
    for y in 0..height {
        read_scanline(&mut r, &mut line).map_err(|e| match e {
            IoError::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
                IoError::TruncatedData(format!("scanline {y} of {height}"))
            }
            other => other,
        })?;
        data.extend(line.iter().flat_map(|&p| rgbe_to_float(p)));
    }
    Ok((width, height, data))
}

fn read_scanline<R: Read>(r: &mut R, line: &mut [[u8; 4]]) -> Result<(), IoError> {
    let width = line.len();
    let mut first = [0u8; 4];
    r.read_exact(&mut first)?;
    let rle = (8..=0x7fff).contains(&width) && first[0] == 2 && first[1] == 2 && first[2] & 0x80 == 0;
    if !rle {
        line[0] = first;
        for px in &mut line[1..] {
            r.read_exact(px)?;
        }
        return Ok(());
    }
    let encoded = ((first[2] as usize) << 8) | first[3] as usize;
    if encoded != width {
        return Err(IoError::CorruptHeader(format!("scanline width {encoded}, expected {width}")));
    }
    for channel in 0..4 {
        let mut x = 0;
        while x < width {
            let mut count = [0u8; 1];
            r.read_exact(&mut count)?;
            let (run, n) = if count[0] > 128 { (true, count[0] as usize - 128) } else { (false, count[0] as usize) };
            if n == 0 || x + n > width {
                return Err(IoError::CorruptHeader("bad run length".into()));
            }
            if run {
                let mut v = [0u8; 1];
                r.read_exact(&mut v)?;
                for px in &mut line[x..x + n] {
                    px[channel] = v[0];
                }
            } else {
                for px in &mut line[x..x + n] {
                    let mut v = [0u8; 1];
                    r.read_exact(&mut v)?;
                    px[channel] = v[0];
                }
            }
            x += n;
        }
    }
    Ok(())
}
