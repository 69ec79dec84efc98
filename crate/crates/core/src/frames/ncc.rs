//! Zero-mean normalized cross-correlation.
//!
//! Sums are accumulated in exact integer arithmetic and only the final ratio
//! is taken in floating point, so identical content always yields identical
//! scores and zero variance is detected exactly.

use super::{FrameError, GrayImage};
use crate::geometry::BoundingBox;

fn moments(img: &GrayImage) -> (i128, i128) {
    let mut s = 0i128;
    let mut s2 = 0i128;
    for &v in &img.samples {
        let v = v as i128;
        s += v;
        s2 += v * v;
    }
    (s, s2)
}

/// `Σ(t-t̄)(w-w̄) / sqrt(Σ(t-t̄)² Σ(w-w̄)²)`, in `[-1, 1]`.
pub fn ncc(template: &GrayImage, window: &GrayImage) -> Result<f64, FrameError> {
    if (template.width, template.height) != (window.width, window.height) {
        return Err(FrameError::SizeMismatch(template.width, template.height, window.width, window.height));
    }
    let n = template.samples.len() as i128;
    if n < 2 {
        return Err(FrameError::TooSmall);
    }
    let (st, st2) = moments(template);
    let (sw, sw2) = moments(window);
    let stw: i128 = template.samples.iter().zip(&window.samples).map(|(&a, &b)| a as i128 * b as i128).sum();
    correlation(n, st, st2, sw, sw2, stw).ok_or(FrameError::DegenerateCorrelation)
}

#[inline]
fn correlation(n: i128, st: i128, st2: i128, sw: i128, sw2: i128, stw: i128) -> Option<f64> {
    let vt = n * st2 - st * st;
    let vw = n * sw2 - sw * sw;
    if vt == 0 || vw == 0 {
        return None;
    }
    let num = (n * stw - st * sw) as f64;
    Some((num / ((vt as f64).sqrt() * (vw as f64).sqrt())).clamp(-1.0, 1.0))
}

/// Best placement of a template inside a search image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NccMatch {
    /// Top-left corner of the placement within the search image.
    pub offset_x: usize,
    pub offset_y: usize,
    /// `-inf` when no placement had a defined correlation.
    pub score: f64,
    /// True when the template or every window had zero variance.
    pub degenerate: bool,
}

/// Exhaustive NCC search. Ties go to the placement closest to the centre of
/// the search area, then to row-major order.
pub fn ncc_match(template: &GrayImage, search: &GrayImage) -> Result<NccMatch, FrameError> {
    let ax = (search.width as f64 - template.width as f64) / 2.0;
    let ay = (search.height as f64 - template.height as f64) / 2.0;
    ncc_match_anchored(template, search, (ax, ay))
}

/// Exhaustive NCC search with ties broken by Euclidean distance of the
/// placement's top-left corner from `anchor`, then row-major order.
/// Placements with zero variance score `-inf`.
pub fn ncc_match_anchored(template: &GrayImage, search: &GrayImage, anchor: (f64, f64)) -> Result<NccMatch, FrameError> {
    let (tw, th) = (template.width, template.height);
    let (sw, sh) = (search.width, search.height);
    if tw > sw || th > sh {
        return Err(FrameError::TemplateTooLarge(tw, th, sw, sh));
    }
    let n = (tw * th) as i128;
    if n < 2 {
        return Err(FrameError::TooSmall);
    }
    let (st, st2) = moments(template);
    let template_flat = n * st2 - st * st == 0;

    // summed-area tables for window sums and sums of squares
    let iw = sw + 1;
    let mut sat = vec![0u64; iw * (sh + 1)];
    let mut sat2 = vec![0u64; iw * (sh + 1)];
    for y in 0..sh {
        let (mut row, mut row2) = (0u64, 0u64);
        for x in 0..sw {
            let v = search.samples[y * sw + x] as u64;
            row += v;
            row2 += v * v;
            sat[(y + 1) * iw + x + 1] = sat[y * iw + x + 1] + row;
            sat2[(y + 1) * iw + x + 1] = sat2[y * iw + x + 1] + row2;
        }
    }
    let rect = |t: &[u64], x: usize, y: usize| -> i128 {
        (t[(y + th) * iw + x + tw] + t[y * iw + x]) as i128 - (t[y * iw + x + tw] + t[(y + th) * iw + x]) as i128
    };

    let dist2 = |x: usize, y: usize| {
        let dx = x as f64 - anchor.0;
        let dy = y as f64 - anchor.1;
        dx * dx + dy * dy
    };

    let mut best: Option<(f64, f64, usize, usize)> = None;
    let mut nearest: Option<(f64, usize, usize)> = None;
    for y in 0..=sh - th {
        for x in 0..=sw - tw {
            let d = dist2(x, y);
            if nearest.is_none_or(|(bd, _, _)| d < bd) {
                nearest = Some((d, x, y));
            }
            if template_flat {
                continue;
            }
            let swin = rect(&sat, x, y);
            let swin2 = rect(&sat2, x, y);
            if n * swin2 - swin * swin == 0 {
                continue;
            }
            let mut stw = 0u64;
            for ty in 0..th {
                let trow = &template.samples[ty * tw..(ty + 1) * tw];
                let srow = &search.samples[(y + ty) * sw + x..(y + ty) * sw + x + tw];
                stw += trow.iter().zip(srow).map(|(&a, &b)| a as u64 * b as u64).sum::<u64>();
            }
            let Some(score) = correlation(n, st, st2, swin, swin2, stw as i128) else {
                continue;
            };
            let better = match best {
                None => true,
                Some((bs, bd, _, _)) => score > bs || (score == bs && d < bd),
            };
            if better {
                best = Some((score, d, x, y));
            }
        }
    }
    Ok(match best {
        Some((score, _, x, y)) => NccMatch { offset_x: x, offset_y: y, score, degenerate: false },
        None => {
            let (_, x, y) = nearest.expect("at least one placement");
            NccMatch { offset_x: x, offset_y: y, score: f64::NEG_INFINITY, degenerate: true }
        }
    })
}

/// Hull of two boxes grown by `margin` on every side. Not clipped.
pub fn search_area(a: &BoundingBox, b: &BoundingBox, margin: f64) -> BoundingBox {
    a.union_hull(b).expand(margin)
}
