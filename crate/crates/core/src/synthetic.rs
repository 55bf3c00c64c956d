//! A bundled Haiti-like test scenario.
//!
//! Population is a handful of Gaussian urban clusters over a rural
//! background on a blocky island mask; intensity decays anisotropically
//! from the epicenter, elongated along an east-west fault. Nothing here is
//! real data: it only has the right shape for exercising the pipeline.

use crate::geo::{GeoPoint, Grid};
use crate::scenario::Earthquake;

pub const CELLSIZE_DEG: f64 = 1.0 / 120.0;
const XLL: f64 = -74.5;
const YLL: f64 = 17.9;
const NCOLS: usize = 348;
const NROWS: usize = 264;
pub const NODATA: f64 = -9999.0;

/// (lat, lon, people, sigma in degrees)
const CLUSTERS: [(f64, f64, f64, f64); 6] = [
    (18.54, -72.34, 2_800_000.0, 0.06),
    (19.76, -72.20, 300_000.0, 0.04),
    (19.45, -72.69, 300_000.0, 0.04),
    (19.11, -72.70, 150_000.0, 0.03),
    (18.19, -73.75, 150_000.0, 0.03),
    (18.23, -72.53, 60_000.0, 0.02),
];

const RURAL_PER_CELL: f64 = 60.0;

/// (south, north, west, east)
const LAND: [(f64, f64, f64, f64); 3] = [
    (18.90, 19.95, -73.40, -71.65),
    (18.05, 19.00, -72.75, -71.65),
    (18.05, 18.65, -74.45, -72.75),
];

/// Placeholder hypocentral depth for both events.
pub const DEPTH_KM: f64 = 10.0;

/// The two reference events. Locations are approximate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaitiEvent {
    /// M7.0 near Léogâne, close to the capital.
    Jan2010,
    /// M7.2 on the southern peninsula.
    Aug2021,
}

impl HaitiEvent {
    pub fn epicenter(self) -> (f64, f64) {
        match self {
            HaitiEvent::Jan2010 => (18.457, -72.533),
            HaitiEvent::Aug2021 => (18.408, -73.475),
        }
    }

    pub fn magnitude(self) -> f64 {
        match self {
            HaitiEvent::Jan2010 => 7.0,
            HaitiEvent::Aug2021 => 7.2,
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            HaitiEvent::Jan2010 => "2010",
            HaitiEvent::Aug2021 => "2021",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScenario {
    pub population: Grid,
    pub mmi: Grid,
    pub earthquake: Earthquake,
}

fn is_land(lat: f64, lon: f64) -> bool {
    LAND.iter()
        .any(|&(s, n, w, e)| (s..n).contains(&lat) && (w..e).contains(&lon))
}

fn km_offsets(from: GeoPoint, to: GeoPoint) -> (f64, f64) {
    let km_per_deg = crate::geo::EARTH_RADIUS_KM.to_radians();
    let east = (to.lon() - from.lon()) * km_per_deg * from.lat().to_radians().cos();
    let north = (to.lat() - from.lat()) * km_per_deg;
    (east, north)
}

/// Intensity from an elliptical distance: the fault runs east-west, so
/// shaking decays half as fast along strike as across it.
fn intensity(epicenter: GeoPoint, p: GeoPoint) -> f64 {
    let (east, north) = km_offsets(epicenter, p);
    let d = ((east / 1.8).powi(2) + (north / 0.9).powi(2)).sqrt();
    let m = 9.6 - 1.1 * (1.0 + d / 8.0).ln();
    ((m * 100.0).round() / 100.0).clamp(0.0, 12.0)
}

pub fn haiti_like(event: HaitiEvent) -> SyntheticScenario {
    let (lat, lon) = event.epicenter();
    let epicenter = GeoPoint::new(lat, lon).expect("valid epicenter");
    let earthquake = Earthquake::new(epicenter, DEPTH_KM, 0.0, event.magnitude()).expect("valid event");

    let template = Grid::new(NCOLS, NROWS, XLL, YLL, CELLSIZE_DEG, NODATA, vec![0.0; NCOLS * NROWS])
        .expect("static geometry");
    let mut population = template.clone();
    let mut mmi = template;

    for row in 0..NROWS {
        for col in 0..NCOLS {
            let c = population.cell_center(row, col).expect("in range");
            let idx = row * NCOLS + col;
            mmi.values_mut()[idx] = intensity(epicenter, c);
            population.values_mut()[idx] = if is_land(c.lat(), c.lon()) {
                let urban: f64 = CLUSTERS
                    .iter()
                    .map(|&(lat, lon, people, sigma)| {
                        let d2 = (c.lat() - lat).powi(2) + (c.lon() - lon).powi(2);
                        let cell_share = CELLSIZE_DEG * CELLSIZE_DEG / (2.0 * std::f64::consts::PI * sigma * sigma);
                        people * cell_share * (-d2 / (2.0 * sigma * sigma)).exp()
                    })
                    .sum();
                (RURAL_PER_CELL + urban).round()
            } else {
                NODATA
            };
        }
    }

    SyntheticScenario {
        population,
        mmi,
        earthquake,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_is_sane() {
        let s = haiti_like(HaitiEvent::Jan2010);
        assert!(s.population.validate_population().is_ok());
        assert!(s.mmi.validate_mmi().is_ok());
        let total: f64 = s.population.cells().map(|c| c.2).sum();
        assert!((5e6..2e7).contains(&total), "total {total}");
        assert!(s.population.cells().count() < s.population.len());
        let at_epi = s.mmi.sample_at(s.earthquake.epicenter()).unwrap();
        assert!(at_epi > 9.0);
        // anisotropy: 40 km east is shaken harder than 40 km north
        let (lat, lon) = HaitiEvent::Jan2010.epicenter();
        let east = GeoPoint::new(lat, lon + 40.0 / 105.5).unwrap();
        let north = GeoPoint::new(lat + 40.0 / 111.2, lon).unwrap();
        assert!(s.mmi.sample_at(east).unwrap() > s.mmi.sample_at(north).unwrap() + 0.3);
    }

    #[test]
    fn events_share_population_only() {
        let a = haiti_like(HaitiEvent::Jan2010);
        let b = haiti_like(HaitiEvent::Aug2021);
        assert_eq!(a.population, b.population);
        assert_ne!(a.mmi, b.mmi);
        let capital = GeoPoint::new(18.54, -72.34).unwrap();
        assert!(a.mmi.sample_at(capital).unwrap() > b.mmi.sample_at(capital).unwrap());
        assert!(b.population.sample_at(b.earthquake.epicenter()).is_some());
    }
}
