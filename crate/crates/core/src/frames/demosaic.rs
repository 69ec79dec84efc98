use super::{CfaImage, RgbImage};

const CROSS: [(i64, i64); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
const HORIZONTAL: [(i64, i64); 2] = [(-1, 0), (1, 0)];
const VERTICAL: [(i64, i64); 2] = [(0, -1), (0, 1)];
const DIAGONAL: [(i64, i64); 4] = [(-1, -1), (1, -1), (-1, 1), (1, 1)];

/// Bilinear demosaic.
///
/// A missing channel is the mean of the nearest same-colour sites: the 4-tap
/// cross for green at red/blue sites, the 2-tap row or column pair for
/// red/blue at green sites, and the 4 diagonals for red at blue sites and
/// vice versa. Taps outside the image are dropped; when none remain the taps
/// are clamped to the edge (replicate). Means round half up.
pub fn demosaic_bilinear(cfa: &CfaImage) -> RgbImage {
    let raw = &cfa.raw;
    let (w, h) = (raw.width as i64, raw.height as i64);
    let pattern = cfa.pattern;
    let mut out = vec![0u16; raw.samples.len() * 3];

    let sample = |x: i64, y: i64| raw.samples[(y * w + x) as usize] as u64;
    let mean = |x: i64, y: i64, taps: &[(i64, i64)]| -> u16 {
        let (mut sum, mut n) = (0u64, 0u64);
        for &(dx, dy) in taps {
            let (nx, ny) = (x + dx, y + dy);
            if (0..w).contains(&nx) && (0..h).contains(&ny) {
                sum += sample(nx, ny);
                n += 1;
            }
        }
        if n == 0 {
            for &(dx, dy) in taps {
                sum += sample((x + dx).clamp(0, w - 1), (y + dy).clamp(0, h - 1));
                n += 1;
            }
        }
        ((2 * sum + n) / (2 * n)) as u16
    };

    for y in 0..h {
        for x in 0..w {
            let site = pattern.color_at(x, y);
            let base = 3 * (y * w + x) as usize;
            for ch in 0..3 {
                let v = if ch == site {
                    sample(x, y) as u16
                } else if ch == 1 {
                    mean(x, y, &CROSS)
                } else if site == 1 {
                    if pattern.color_at(x + 1, y) == ch {
                        mean(x, y, &HORIZONTAL)
                    } else {
                        mean(x, y, &VERTICAL)
                    }
                } else {
                    mean(x, y, &DIAGONAL)
                };
                out[base + ch] = v;
            }
        }
    }
    RgbImage { width: raw.width, height: raw.height, max_value: raw.max_value, samples: out }
}
