use crate::imgcore::CHANNELS;
use crate::ImageBuffer;

/// Equalization lookup table for one channel histogram.
///
/// `out(v) = round((cdf(v) - cdf_min) / (n - cdf_min) * 255)` with `cdf_min` the first
/// nonzero cdf value. `None` when the channel is constant (`n == cdf_min`) or empty.
pub fn equalize_channel_table(hist: &[u64; 256]) -> Option<[u8; 256]> {
    let n: u64 = hist.iter().sum();
    let cdf_min = hist.iter().copied().find(|&c| c > 0)?;
    let denom = n - cdf_min;
    if denom == 0 {
        return None;
    }
    let mut lut = [0u8; 256];
    let mut cdf = 0u64;
    for (v, out) in lut.iter_mut().enumerate() {
        cdf += hist[v];
        // Values below the minimum never occur; saturating keeps their (unused) entry at 0.
        let num = cdf.saturating_sub(cdf_min);
        *out = ((2 * num * 255 + denom) / (2 * denom)) as u8;
    }
    Some(lut)
}

/// Classic global histogram equalization, independently per channel.
pub fn histogram_equalize(img: &ImageBuffer) -> ImageBuffer {
    let mut hists = [[0u64; 256]; CHANNELS];
    for px in img.data().chunks_exact(CHANNELS) {
        for (c, &v) in px.iter().enumerate() {
            hists[c][v as usize] += 1;
        }
    }
    let luts: Vec<Option<[u8; 256]>> = hists.iter().map(equalize_channel_table).collect();
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(CHANNELS) {
        for (c, v) in px.iter_mut().enumerate() {
            if let Some(lut) = &luts[c] {
                *v = lut[*v as usize];
            }
        }
    }
    out
}
