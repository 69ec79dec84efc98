use super::GrayImage;

/// Histogram equalization:
/// `out = round((cdf(v) - cdf_min) / (N - cdf_min) * max_value)`.
///
/// A constant image has `cdf_min == N` and is returned unchanged.
pub fn equalize_histogram(img: &GrayImage) -> GrayImage {
    let n = img.samples.len() as u128;
    let max = img.max_value as u128;
    let mut hist = vec![0u64; img.max_value as usize + 1];
    for &v in &img.samples {
        hist[v as usize] += 1;
    }
    let mut cdf = Vec::with_capacity(hist.len());
    let mut acc = 0u64;
    for &c in &hist {
        acc += c;
        cdf.push(acc as u128);
    }
    let cdf_min = hist.iter().zip(&cdf).find(|(&c, _)| c > 0).map_or(n, |(_, &c)| c);
    if cdf_min == n {
        return img.clone();
    }
    let denom = n - cdf_min;
    // integer half-up rounding of (cdf - cdf_min) * max / denom
    let lut: Vec<u16> = cdf.iter().map(|&c| ((2 * c.saturating_sub(cdf_min) * max + denom) / (2 * denom)) as u16).collect();
    GrayImage {
        width: img.width,
        height: img.height,
        max_value: img.max_value,
        samples: img.samples.iter().map(|&v| lut[v as usize]).collect(),
    }
}
