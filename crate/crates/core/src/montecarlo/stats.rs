use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("percentile of an empty sample")]
pub struct EmptyInput;

/// Empirical percentile with linear interpolation between closest ranks.
///
/// With sorted values `v[0..m]` and `h = (m - 1) * p / 100`, returns
/// `v[floor(h)] + (h - floor(h)) * (v[floor(h) + 1] - v[floor(h)])`.
/// `p` is clamped to `[0, 100]`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, EmptyInput> {
    if values.is_empty() {
        return Err(EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let p = p.clamp(0.0, 100.0);
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

/// Arithmetic mean, accumulated as deviations from the first value so a
/// constant sample returns that constant exactly.
pub(crate) fn mean(values: &[f64]) -> f64 {
    let base = values[0];
    base + values.iter().map(|v| v - base).sum::<f64>() / values.len() as f64
}

/// Monte Carlo average with its 95% percentile band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    /// Mean plus the 2.5th and 97.5th percentiles; `None` for an empty sample.
    pub fn from_values(values: &[f64]) -> Option<Band> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Band {
            mean: mean(values),
            lo: percentile_sorted(&sorted, 2.5),
            hi: percentile_sorted(&sorted, 97.5),
        })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}
