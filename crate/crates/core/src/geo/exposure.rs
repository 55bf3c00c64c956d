use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::Grid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BinError {
    #[error("no MMI bins given")]
    EmptyBins,
    #[error("bin bounds must satisfy lo < hi, got {lo} and {hi}")]
    Inverted { lo: f64, hi: f64 },
    #[error("MMI bins {0} and {1} overlap")]
    Overlap(MmiBin, MmiBin),
    #[error("cannot parse MMI bin `{0}`; expected interval notation such as `(7.5, 8]`")]
    Syntax(String),
}

/// An interval of intensity values, each end open or closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmiBin {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl MmiBin {
    pub fn new(lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> Result<Self, BinError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(BinError::Inverted { lo, hi });
        }
        Ok(MmiBin {
            lo,
            hi,
            lo_open,
            hi_open,
        })
    }

    /// `(lo, hi]`, the form used for the default warning bins.
    pub fn left_open(lo: f64, hi: f64) -> Result<Self, BinError> {
        Self::new(lo, hi, true, false)
    }

    pub fn contains(&self, m: f64) -> bool {
        let above = if self.lo_open { m > self.lo } else { m >= self.lo };
        let below = if self.hi_open { m < self.hi } else { m <= self.hi };
        above && below
    }

    fn overlaps(&self, other: &MmiBin) -> bool {
        let separated = |a: &MmiBin, b: &MmiBin| a.hi < b.lo || (a.hi == b.lo && (a.hi_open || b.lo_open));
        !(separated(self, other) || separated(other, self))
    }

    /// Default warning bins: (7.5, 8], (8, 8.5], (8.5, 9].
    pub fn default_warning_bins() -> Vec<MmiBin> {
        [(7.5, 8.0), (8.0, 8.5), (8.5, 9.0)]
            .into_iter()
            .map(|(lo, hi)| MmiBin::left_open(lo, hi).expect("static bins"))
            .collect()
    }

    /// Contiguous `[lo, lo + width)` bins spanning `[0, 12]`; the last bin is closed.
    pub fn uniform_bins(width: f64) -> Result<Vec<MmiBin>, BinError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(BinError::Inverted { lo: 0.0, hi: width });
        }
        let count = (12.0 / width).ceil() as usize;
        (0..count)
            .map(|i| {
                let lo = i as f64 * width;
                let last = i + 1 == count;
                let hi = if last { 12.0 } else { (i + 1) as f64 * width };
                MmiBin::new(lo, hi, false, !last)
            })
            .collect()
    }
}

/// Rejects an empty or overlapping bin set.
pub fn validate_bins(bins: &[MmiBin]) -> Result<(), BinError> {
    if bins.is_empty() {
        return Err(BinError::EmptyBins);
    }
    for (i, a) in bins.iter().enumerate() {
        for b in &bins[i + 1..] {
            if a.overlaps(b) {
                return Err(BinError::Overlap(*a, *b));
            }
        }
    }
    Ok(())
}

impl fmt::Display for MmiBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{},{}{}",
            if self.lo_open { '(' } else { '[' },
            self.lo,
            self.hi,
            if self.hi_open { ')' } else { ']' }
        )
    }
}

impl FromStr for MmiBin {
    type Err = BinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = || BinError::Syntax(s.to_string());
        let t = s.trim();
        let lo_open = match t.chars().next() {
            Some('(') => true,
            Some('[') => false,
            _ => return Err(syntax()),
        };
        let hi_open = match t.chars().last() {
            Some(')') => true,
            Some(']') => false,
            _ => return Err(syntax()),
        };
        let inner = &t[1..t.len() - 1];
        let (lo, hi) = inner.split_once(',').ok_or_else(syntax)?;
        let lo: f64 = lo.trim().parse().map_err(|_| syntax())?;
        let hi: f64 = hi.trim().parse().map_err(|_| syntax())?;
        MmiBin::new(lo, hi, lo_open, hi_open)
    }
}

/// Population per intensity bin plus the exceedance curve.
#[derive(Debug, Clone)]
pub struct ExposureReport {
    pub bins: Vec<(MmiBin, f64)>,
    // (mmi, population) pairs sorted by mmi, with suffix sums of population
    sorted_mmi: Vec<f64>,
    suffix_pop: Vec<f64>,
}

impl ExposureReport {
    /// Population with a known intensity (valid population cell, valid sampled MMI).
    pub fn total_population(&self) -> f64 {
        self.suffix_pop.first().copied().unwrap_or(0.0)
    }

    /// Fraction of the total population exposed to an intensity ≥ `m`.
    /// Zero when no population has a known intensity.
    pub fn exceedance(&self, m: f64) -> f64 {
        let total = self.total_population();
        if total <= 0.0 {
            return 0.0;
        }
        let idx = self.sorted_mmi.partition_point(|&v| v < m);
        self.suffix_pop.get(idx).copied().unwrap_or(0.0) / total
    }
}

/// MMI population exposure.
///
/// Each population cell is matched to the intensity found at its cell center
/// in `mmi` (nearest cell). Cells whose population or sampled intensity is
/// nodata are left out entirely.
pub fn exposure_histogram(mmi: &Grid, pop: &Grid, bins: &[MmiBin]) -> Result<ExposureReport, BinError> {
    if bins.is_empty() {
        return Err(BinError::EmptyBins);
    }
    let mut pairs: Vec<(f64, f64)> = pop
        .cells()
        .filter_map(|(row, col, people)| {
            let m = mmi.sample_at(pop.center_unchecked(row, col))?;
            Some((m, people))
        })
        .collect();

    let mut totals = vec![0.0; bins.len()];
    for &(m, people) in &pairs {
        for (bin, total) in bins.iter().zip(totals.iter_mut()) {
            if bin.contains(m) {
                *total += people;
            }
        }
    }

    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut suffix_pop = vec![0.0; pairs.len()];
    let mut acc = 0.0;
    for (i, &(_, people)) in pairs.iter().enumerate().rev() {
        acc += people;
        suffix_pop[i] = acc;
    }

    Ok(ExposureReport {
        bins: bins.iter().copied().zip(totals).collect(),
        sorted_mmi: pairs.iter().map(|p| p.0).collect(),
        suffix_pop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row_grid(values: Vec<f64>) -> Grid {
        Grid::new(values.len(), 1, 0.0, 0.0, 1.0, -9999.0, values).unwrap()
    }

    #[test]
    fn bin_membership_and_display() {
        let b: MmiBin = "(7.5, 8]".parse().unwrap();
        assert!(!b.contains(7.5));
        assert!(b.contains(8.0));
        assert_eq!(b.to_string(), "(7.5,8]");
        let c: MmiBin = "[8,8.5)".parse().unwrap();
        assert!(c.contains(8.0) && !c.contains(8.5));
        assert!("7.5,8".parse::<MmiBin>().is_err());
        assert!("(8,7]".parse::<MmiBin>().is_err());
    }

    #[test]
    fn overlap_detection() {
        let bins = MmiBin::default_warning_bins();
        assert!(validate_bins(&bins).is_ok());
        let clash = vec!["[7,8]".parse().unwrap(), "[8,9]".parse().unwrap()];
        assert!(matches!(validate_bins(&clash), Err(BinError::Overlap(..))));
        assert_eq!(validate_bins(&[]), Err(BinError::EmptyBins));
        assert!(validate_bins(&MmiBin::uniform_bins(0.5).unwrap()).is_ok());
    }

    #[test]
    fn uniform_intensity_lands_in_one_bin() {
        let pop = Grid::new(2, 2, 0.0, 0.0, 1.0, -9999.0, vec![250.0; 4]).unwrap();
        let mmi = pop.filled_like(8.0);
        let report = exposure_histogram(&mmi, &pop, &MmiBin::default_warning_bins()[..2]).unwrap();
        assert_eq!(report.bins[0].1, 1000.0);
        assert_eq!(report.bins[1].1, 0.0);
    }

    #[test]
    fn all_nodata_population() {
        let pop = row_grid(vec![-9999.0, -9999.0]);
        let mmi = row_grid(vec![8.0, 8.0]);
        let report = exposure_histogram(&mmi, &pop, &MmiBin::default_warning_bins()).unwrap();
        assert!(report.bins.iter().all(|(_, p)| *p == 0.0));
        assert_eq!(report.exceedance(0.0), 0.0);
    }

    #[test]
    fn two_cell_exceedance() {
        let pop = row_grid(vec![300.0, 700.0]);
        let mmi = row_grid(vec![6.0, 9.0]);
        let report = exposure_histogram(&mmi, &pop, &MmiBin::uniform_bins(1.0).unwrap()).unwrap();
        // cell 2 alone has MMI >= 7: 700 / 1000
        assert!((report.exceedance(7.0) - 0.7).abs() < 1e-15);
        assert_eq!(report.exceedance(6.0), 1.0);
        assert_eq!(report.exceedance(9.5), 0.0);
    }

    #[test]
    fn empty_bins_rejected() {
        let g = row_grid(vec![1.0]);
        assert!(matches!(exposure_histogram(&g, &g, &[]), Err(BinError::EmptyBins)));
    }

    proptest! {
        #[test]
        fn bins_bounded_by_total_and_exceedance_monotone(
            cells in prop::collection::vec((0.0f64..12.0, 0.0f64..1e4), 1..40),
            probes in prop::collection::vec(-1.0f64..13.0, 2..10),
        ) {
            let pop = row_grid(cells.iter().map(|c| c.1).collect());
            let mmi = row_grid(cells.iter().map(|c| c.0).collect());
            let report = exposure_histogram(&mmi, &pop, &MmiBin::uniform_bins(0.5).unwrap()).unwrap();
            let total = report.total_population();
            let binned: f64 = report.bins.iter().map(|b| b.1).sum();
            // uniform bins cover [0, 12], so equality up to summation order
            prop_assert!((binned - total).abs() <= 1e-9 * total.max(1.0));

            let mut probes = probes;
            probes.sort_by(f64::total_cmp);
            let curve: Vec<f64> = probes.iter().map(|&m| report.exceedance(m)).collect();
            for w in curve.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            prop_assert!(curve.iter().all(|f| (0.0..=1.0).contains(f)));
        }
    }
}
