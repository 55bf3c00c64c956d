//! Population-weighted warning-time distributions per intensity bin.
//!
//! The warning time at a location is the S-wave arrival there minus the
//! detection time and the alert dissemination latency. Negative values (the
//! blind zone) are kept.

use thiserror::Error;

use crate::detection::Detection;
use crate::geo::{validate_bins, BinError, Grid, MmiBin};
use crate::montecarlo::{Band, RunResult};
use crate::scenario::{Earthquake, VelocityModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WarningError {
    #[error(transparent)]
    Bins(#[from] BinError),
    #[error("histogram width must be > 0, got {0}")]
    HistWidth(f64),
    #[error("warning field has {field} cells but the population grid has {grid}")]
    FieldMismatch { field: usize, grid: usize },
    #[error("dissemination latency must be finite and >= 0, got {0}")]
    Latency(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlertParams {
    pub dissemination_latency_s: f64,
}

impl AlertParams {
    pub fn validate(&self) -> Result<(), WarningError> {
        let l = self.dissemination_latency_s;
        if !(l.is_finite() && l >= 0.0) {
            return Err(WarningError::Latency(l));
        }
        Ok(())
    }
}

/// Warning time per population cell, `None` where the population is nodata.
/// Aligned with the population grid's row-major cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct WarningField {
    values: Vec<Option<f64>>,
}

impl WarningField {
    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }
}

/// Warning time at every population cell center for a given detection.
pub fn warning_field(det: &Detection, eq: &Earthquake, vm: &VelocityModel, ap: &AlertParams, pop: &Grid) -> WarningField {
    let values = pop
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if pop.is_nodata(v) {
                return None;
            }
            let center = pop.center_unchecked(i / pop.ncols(), i % pop.ncols());
            Some(warning_time(eq.s_arrival_s(vm, center), det.time_s, ap))
        })
        .collect();
    WarningField { values }
}

fn warning_time(s_arrival_s: f64, detection_time_s: f64, ap: &AlertParams) -> f64 {
    s_arrival_s - detection_time_s - ap.dissemination_latency_s
}

/// Population-weighted percentile: the smallest value whose cumulative
/// weight reaches `p` percent of the total (left-continuous inverse CDF).
/// Pairs with zero weight are ignored. `None` when the total weight is zero.
pub fn weighted_percentile(pairs: &[(f64, f64)], p: f64) -> Option<f64> {
    let mut sorted: Vec<(f64, f64)> = pairs.iter().copied().filter(|pw| pw.1 > 0.0).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = sorted.iter().map(|pw| pw.1).sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let idx = inverse_cdf_index(sorted.iter().map(|pw| pw.1), total, p);
    Some(sorted[idx].0)
}

fn inverse_cdf_index(weights: impl Iterator<Item = f64>, total: f64, p: f64) -> usize {
    let target = p.clamp(0.0, 100.0) * total;
    let mut cum = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        cum += w;
        last = i;
        if 100.0 * cum >= target {
            return i;
        }
    }
    last
}

/// The three per-bin warning summaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarningSummary {
    pub p2_5_s: f64,
    pub mean_s: f64,
    pub p97_5_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistBucket {
    pub lo_s: f64,
    pub hi_s: f64,
    pub population: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarningStats {
    pub bin: MmiBin,
    pub population: u64,
    /// `None` when no population falls in the bin.
    pub summary: Option<WarningSummary>,
    pub histogram: Vec<HistBucket>,
}

/// Values sorted ascending with integer population weights.
#[derive(Debug, Clone, Default)]
struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<u64>,
    total: u64,
}

impl WeightedSample {
    fn from_pairs(mut pairs: Vec<(f64, u64)>) -> Self {
        pairs.retain(|p| p.1 > 0);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total = pairs.iter().map(|p| p.1).sum();
        let (values, weights) = pairs.into_iter().unzip();
        WeightedSample { values, weights, total }
    }

    fn quantile_index(&self, p: f64) -> usize {
        inverse_cdf_index(self.weights.iter().map(|&w| w as f64), self.total as f64, p)
    }

    /// Summary of `value - offset` over the sample, with `offset` subtracted
    /// element-wise (`(v - a) - b`) so percentiles match a direct evaluation.
    fn summary(&self, a: f64, b: f64) -> Option<WarningSummary> {
        if self.total == 0 {
            return None;
        }
        let shift = |v: f64| v - a - b;
        let base = self.values[0];
        let dev: f64 = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(v, &w)| (v - base) * w as f64)
            .sum();
        let mean_raw = base + dev / self.total as f64;
        Some(WarningSummary {
            p2_5_s: shift(self.values[self.quantile_index(2.5)]),
            mean_s: shift(mean_raw),
            p97_5_s: shift(self.values[self.quantile_index(97.5)]),
        })
    }

    fn histogram(&self, a: f64, b: f64, width: f64) -> Vec<HistBucket> {
        let shifted: Vec<(f64, u64)> = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(v, &w)| (v - a - b, w))
            .collect();
        let Some(first) = shifted.first() else {
            return Vec::new();
        };
        let last = shifted.last().expect("non-empty");
        let k_lo = (first.0 / width).floor() as i64;
        let k_hi = (last.0 / width).floor() as i64;
        let mut buckets: Vec<HistBucket> = (k_lo..=k_hi)
            .map(|k| HistBucket {
                lo_s: k as f64 * width,
                hi_s: (k + 1) as f64 * width,
                population: 0,
            })
            .collect();
        for (v, w) in shifted {
            let k = ((v / width).floor() as i64 - k_lo) as usize;
            buckets[k].population += w;
        }
        buckets
    }
}

/// Population counts are whole people: cell values are rounded to the
/// nearest integer before weighting.
fn people(v: f64) -> u64 {
    v.round().max(0.0) as u64
}

fn bin_of(bins: &[MmiBin], m: f64) -> Option<usize> {
    bins.iter().position(|b| b.contains(m))
}

fn check_hist_width(w: f64) -> Result<(), WarningError> {
    if !(w.is_finite() && w > 0.0) {
        return Err(WarningError::HistWidth(w));
    }
    Ok(())
}

/// Per-bin warning-time distribution for one warning field.
///
/// Each populated cell is assigned to the bin holding the intensity sampled
/// at its center; cells with nodata intensity or zero population are left
/// out. Percentiles and the mean are population weighted.
pub fn warning_stats(
    field: &WarningField,
    mmi: &Grid,
    pop: &Grid,
    bins: &[MmiBin],
    hist_width_s: f64,
) -> Result<Vec<WarningStats>, WarningError> {
    validate_bins(bins)?;
    check_hist_width(hist_width_s)?;
    if field.values.len() != pop.len() {
        return Err(WarningError::FieldMismatch {
            field: field.values.len(),
            grid: pop.len(),
        });
    }
    let mut per_bin: Vec<Vec<(f64, u64)>> = vec![Vec::new(); bins.len()];
    for (row, col, value) in pop.cells() {
        let Some(w) = field.values[row * pop.ncols() + col] else {
            continue;
        };
        let Some(m) = mmi.sample_at(pop.center_unchecked(row, col)) else {
            continue;
        };
        if let Some(b) = bin_of(bins, m) {
            per_bin[b].push((w, people(value)));
        }
    }
    Ok(bins
        .iter()
        .zip(per_bin)
        .map(|(bin, pairs)| {
            let sample = WeightedSample::from_pairs(pairs);
            WarningStats {
                bin: *bin,
                population: sample.total,
                summary: sample.summary(0.0, 0.0),
                histogram: sample.histogram(0.0, 0.0, hist_width_s),
            }
        })
        .collect())
}

/// Absolute S-wave arrival times of the binned population, computed once and
/// reused for every detection.
///
/// Warning times for a detection at time `t` are the arrivals shifted by
/// `t + latency`, so per-detection summaries cost O(bins) instead of a pass
/// over the whole raster.
#[derive(Debug, Clone)]
pub struct WarningBasis {
    bins: Vec<MmiBin>,
    samples: Vec<WeightedSample>,
}

impl WarningBasis {
    pub fn new(eq: &Earthquake, vm: &VelocityModel, mmi: &Grid, pop: &Grid, bins: &[MmiBin]) -> Result<Self, WarningError> {
        validate_bins(bins)?;
        let mut per_bin: Vec<Vec<(f64, u64)>> = vec![Vec::new(); bins.len()];
        for (row, col, value) in pop.cells() {
            let center = pop.center_unchecked(row, col);
            let Some(m) = mmi.sample_at(center) else {
                continue;
            };
            if let Some(b) = bin_of(bins, m) {
                per_bin[b].push((eq.s_arrival_s(vm, center), people(value)));
            }
        }
        Ok(WarningBasis {
            bins: bins.to_vec(),
            samples: per_bin.into_iter().map(WeightedSample::from_pairs).collect(),
        })
    }

    pub fn bins(&self) -> &[MmiBin] {
        &self.bins
    }

    /// Per-bin summaries for a detection declared at `detection_time_s`.
    pub fn summaries(&self, detection_time_s: f64, ap: &AlertParams) -> Vec<Option<WarningSummary>> {
        self.samples
            .iter()
            .map(|s| s.summary(detection_time_s, ap.dissemination_latency_s))
            .collect()
    }

    /// Full per-bin statistics, histogram included.
    pub fn stats(&self, detection_time_s: f64, ap: &AlertParams, hist_width_s: f64) -> Result<Vec<WarningStats>, WarningError> {
        check_hist_width(hist_width_s)?;
        Ok(self
            .bins
            .iter()
            .zip(&self.samples)
            .map(|(bin, s)| WarningStats {
                bin: *bin,
                population: s.total,
                summary: s.summary(detection_time_s, ap.dissemination_latency_s),
                histogram: s.histogram(detection_time_s, ap.dissemination_latency_s, hist_width_s),
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarningStat {
    P2_5,
    Mean,
    P97_5,
}

impl WarningStat {
    pub const ALL: [WarningStat; 3] = [WarningStat::P2_5, WarningStat::Mean, WarningStat::P97_5];

    pub fn name(&self) -> &'static str {
        match self {
            WarningStat::P2_5 => "p2_5",
            WarningStat::Mean => "mean",
            WarningStat::P97_5 => "p97_5",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        WarningStat::ALL.into_iter().find(|w| w.name() == s)
    }

    fn pick(&self, s: &WarningSummary) -> f64 {
        match self {
            WarningStat::P2_5 => s.p2_5_s,
            WarningStat::Mean => s.mean_s,
            WarningStat::P97_5 => s.p97_5_s,
        }
    }
}

/// One statistic of one bin at one network size, averaged over detected
/// replicas with its 95% band. `None` when no detected replica had
/// population in the bin.
#[derive(Debug, Clone, PartialEq)]
pub struct WarningBandRow {
    pub n: usize,
    pub bin: MmiBin,
    pub stat: WarningStat,
    pub band: Option<Band>,
}

/// Warning summaries per network size: each detected replica contributes
/// the summaries for its own detection time; they are then averaged across
/// replicas with percentile bands. `runs` must be grouped by `n` (any order
/// within the group is kept as given).
pub fn warning_vs_n(runs: &[RunResult], eq: &Earthquake, basis: &WarningBasis, ap: &AlertParams) -> Vec<WarningBandRow> {
    let mut sizes: Vec<usize> = Vec::new();
    for r in runs {
        if !sizes.contains(&r.n) {
            sizes.push(r.n);
        }
    }
    let mut rows = Vec::with_capacity(sizes.len() * basis.bins.len() * 3);
    for n in sizes {
        let per_replica: Vec<Vec<Option<WarningSummary>>> = runs
            .iter()
            .filter(|r| r.n == n)
            .filter_map(|r| r.detection)
            .map(|d| basis.summaries(eq.origin_time_s() + d.delay_s, ap))
            .collect();
        for (b, bin) in basis.bins.iter().enumerate() {
            for stat in WarningStat::ALL {
                let values: Vec<f64> = per_replica
                    .iter()
                    .filter_map(|s| s[b].as_ref().map(|s| stat.pick(s)))
                    .collect();
                rows.push(WarningBandRow {
                    n,
                    bin: *bin,
                    stat,
                    band: Band::from_values(&values),
                });
            }
        }
    }
    rows
}
