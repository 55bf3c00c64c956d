//! Gaussian kernel density of detection locations on a lat/lon raster.

use crate::geo::{GeoPoint, Grid};

use super::McError;

/// Kernel support is truncated at this many bandwidths.
const KERNEL_RADIUS: f64 = 4.0;

/// Raster geometry the density is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySpec {
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub ncols: usize,
    pub nrows: usize,
}

impl DensitySpec {
    pub fn from_grid(g: &Grid) -> Self {
        DensitySpec {
            xll: g.xll(),
            yll: g.yll(),
            cellsize: g.cellsize(),
            ncols: g.ncols(),
            nrows: g.nrows(),
        }
    }

    /// Same extent as `g`, resampled to (roughly) `cellsize`.
    pub fn covering(g: &Grid, cellsize: f64) -> Self {
        let width = g.ncols() as f64 * g.cellsize();
        let height = g.nrows() as f64 * g.cellsize();
        DensitySpec {
            xll: g.xll(),
            yll: g.yll(),
            cellsize,
            ncols: ((width / cellsize).ceil() as usize).max(1),
            nrows: ((height / cellsize).ceil() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule per axis, averaged into one isotropic bandwidth.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub grid: Grid,
    pub bandwidth_deg: f64,
    pub mode: GeoPoint,
}

impl DensityGrid {
    pub fn cell_area_deg2(&self) -> f64 {
        self.grid.cellsize() * self.grid.cellsize()
    }

    /// Sum of density times cell area; 1 up to rounding.
    pub fn integral(&self) -> f64 {
        self.grid.values().iter().sum::<f64>() * self.cell_area_deg2()
    }

    /// Area (deg²) of the smallest set of cells holding at least `mass` of
    /// the probability, taking cells in decreasing density order.
    pub fn hdr_area_deg2(&self, mass: f64) -> f64 {
        let mut values = self.grid.values().to_vec();
        values.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = values.iter().sum();
        let target = mass.clamp(0.0, 1.0) * total;
        let mut acc = 0.0;
        let mut count = 0usize;
        for v in values {
            if acc >= target {
                break;
            }
            acc += v;
            count += 1;
        }
        count as f64 * self.cell_area_deg2()
    }
}

fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let base = values[0];
    let m = base + values.iter().map(|v| v - base).sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Silverman's normal-reference bandwidth for two dimensions,
/// `sd * n^(-1/6)` per axis, averaged over latitude and longitude.
pub fn silverman_bandwidth(points: &[GeoPoint]) -> f64 {
    let lats: Vec<f64> = points.iter().map(|p| p.lat()).collect();
    let lons: Vec<f64> = points.iter().map(|p| p.lon()).collect();
    let factor = (points.len() as f64).powf(-1.0 / 6.0);
    (sample_sd(&lats) + sample_sd(&lons)) / 2.0 * factor
}

/// Isotropic Gaussian kernel density over `points`, normalized over the grid.
///
/// The automatic bandwidth is never narrower than half a cell; a fixed
/// bandwidth that is not positive falls back to one cell. The
/// mode is the center of the densest cell, ties going to the smallest row
/// and then the smallest column.
pub fn detection_density(points: &[GeoPoint], spec: &DensitySpec, bandwidth: Bandwidth) -> Result<DensityGrid, McError> {
    if points.is_empty() {
        return Err(McError::NoDetections);
    }
    let mut h = match bandwidth {
        // below half a cell the kernel is not resolved by the raster
        Bandwidth::Auto => silverman_bandwidth(points).max(spec.cellsize / 2.0),
        Bandwidth::Fixed(h) => h,
    };
    if !(h.is_finite() && h > 0.0) {
        h = spec.cellsize;
    }

    let DensitySpec {
        xll,
        yll,
        cellsize,
        ncols,
        nrows,
    } = *spec;
    let mut values = vec![0.0f64; ncols * nrows];
    let reach = KERNEL_RADIUS * h;
    let inv_two_h2 = 1.0 / (2.0 * h * h);

    for p in points {
        let (x, y) = (p.lon(), p.lat());
        let col_lo = ((x - reach - xll) / cellsize).floor().max(0.0) as usize;
        let col_hi = ((x + reach - xll) / cellsize).ceil().min(ncols as f64);
        let south = ((y - reach - yll) / cellsize).floor().max(0.0) as usize;
        let north = ((y + reach - yll) / cellsize).ceil().min(nrows as f64);
        if col_hi <= 0.0 || north <= 0.0 {
            continue;
        }
        let (col_hi, north) = (col_hi as usize, north as usize);
        for rs in south..north {
            let cy = yll + (rs as f64 + 0.5) * cellsize;
            let dy2 = (cy - y).powi(2);
            let row = nrows - 1 - rs;
            let base = row * ncols;
            for col in col_lo..col_hi {
                let cx = xll + (col as f64 + 0.5) * cellsize;
                values[base + col] += (-((cx - x).powi(2) + dy2) * inv_two_h2).exp();
            }
        }
    }

    let total: f64 = values.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(McError::DensityUnderflow);
    }
    let scale = 1.0 / (total * cellsize * cellsize);
    values.iter_mut().for_each(|v| *v *= scale);

    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let grid = Grid::new(ncols, nrows, xll, yll, cellsize, -9999.0, values).map_err(|e| McError::Geometry(e.to_string()))?;
    let mode = grid.cell_center(best / ncols, best % ncols).expect("argmax index in range");
    Ok(DensityGrid {
        grid,
        bandwidth_deg: h,
        mode,
    })
}

/// The argmax cell center of an arbitrary density raster (same tie rule).
pub fn grid_mode(grid: &Grid) -> Option<GeoPoint> {
    let (mut best, mut best_v) = (None, f64::NEG_INFINITY);
    for (row, col, v) in grid.cells() {
        if v > best_v {
            best_v = v;
            best = Some((row, col));
        }
    }
    best.map(|(r, c)| grid.cell_center(r, c).expect("cell from iteration"))
}
