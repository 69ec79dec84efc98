//! Binary PNM codec: `P5` (gray) and `P6` (RGB), 8- or 16-bit.
//!
//! Samples are one byte when the max value is below 256 and two bytes
//! big-endian otherwise. Header tokens are separated by whitespace and `#`
//! comments; exactly one whitespace byte separates the max value from the
//! payload. Trailing bytes after the payload are ignored.

use super::{FrameError, GrayImage, RgbImage};

struct Header {
    width: usize,
    height: usize,
    max_value: u16,
    data_start: usize,
}

fn parse_header(bytes: &[u8], want: &[u8; 2]) -> Result<Header, FrameError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(FrameError::BadMagic);
    }
    let magic = &bytes[..2];
    if magic != want {
        return match bytes[1] {
            b'1'..=b'7' => Err(FrameError::UnsupportedFormat(String::from_utf8_lossy(magic).into_owned())),
            _ => Err(FrameError::BadMagic),
        };
    }
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // whitespace and comments before each token; at least one separator
        let start = pos;
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        if pos == start {
            return Err(FrameError::Header(format!("missing separator before field {}", i + 1)));
        }
        let digits_start = pos;
        let mut v: u64 = 0;
        while let Some(&b) = bytes.get(pos) {
            if !b.is_ascii_digit() {
                break;
            }
            v = v
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as u64))
                .filter(|&v| v <= u32::MAX as u64)
                .ok_or_else(|| FrameError::Header("numeric field overflow".into()))?;
            pos += 1;
        }
        if pos == digits_start {
            return Err(FrameError::Header(format!("expected a number for field {}", i + 1)));
        }
        *field = v;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        Some(_) => return Err(FrameError::Header("max value not followed by whitespace".into())),
        None => return Err(FrameError::Truncated { expected: pos + 1, got: bytes.len() }),
    }
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 {
        return Err(FrameError::Header(format!("zero dimension {w}x{h}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(FrameError::MaxValue(maxval));
    }
    Ok(Header { width: w as usize, height: h as usize, max_value: maxval as u16, data_start: pos })
}

fn decode_samples(bytes: &[u8], header: &Header, channels: usize) -> Result<Vec<u16>, FrameError> {
    let bps = if header.max_value < 256 { 1 } else { 2 };
    let count = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| FrameError::Header("image too large".into()))?;
    let expected = count.checked_mul(bps).ok_or_else(|| FrameError::Header("image too large".into()))?;
    let payload = &bytes[header.data_start..];
    if payload.len() < expected {
        return Err(FrameError::Truncated { expected, got: payload.len() });
    }
    let payload = &payload[..expected];
    let samples: Vec<u16> = if bps == 1 {
        payload.iter().map(|&b| b as u16).collect()
    } else {
        payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    if let Some((index, &value)) = samples.iter().enumerate().find(|(_, &v)| v > header.max_value) {
        return Err(FrameError::SampleOutOfRange { index, value, max: header.max_value });
    }
    Ok(samples)
}

/// Decode a binary PGM (`P5`).
pub fn read_pnm(bytes: &[u8]) -> Result<GrayImage, FrameError> {
    let header = parse_header(bytes, b"P5")?;
    let samples = decode_samples(bytes, &header, 1)?;
    Ok(GrayImage { width: header.width, height: header.height, max_value: header.max_value, samples })
}

/// Decode a binary PPM (`P6`).
pub fn read_ppm(bytes: &[u8]) -> Result<RgbImage, FrameError> {
    let header = parse_header(bytes, b"P6")?;
    let samples = decode_samples(bytes, &header, 3)?;
    Ok(RgbImage { width: header.width, height: header.height, max_value: header.max_value, samples })
}

fn encode(magic: &str, width: usize, height: usize, max_value: u16, samples: &[u16]) -> Vec<u8> {
    let header = format!("{magic}\n{width} {height}\n{max_value}\n");
    let bps = if max_value < 256 { 1 } else { 2 };
    let mut out = Vec::with_capacity(header.len() + samples.len() * bps);
    out.extend_from_slice(header.as_bytes());
    if bps == 1 {
        out.extend(samples.iter().map(|&s| s as u8));
    } else {
        for &s in samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    }
    out
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    encode("P5", img.width, img.height, img.max_value, &img.samples)
}

pub fn write_ppm(img: &RgbImage) -> Vec<u8> {
    encode("P6", img.width, img.height, img.max_value, &img.samples)
}
