//! Earthquake description and a homogeneous constant-velocity travel-time model.

use thiserror::Error;

use crate::geo::{haversine_km, GeoPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("depth must be finite and >= 0 km, got {0}")]
    Depth(f64),
    #[error("magnitude and origin time must be finite")]
    NonFinite,
    #[error("velocities must satisfy v_p > v_s > 0, got v_p={v_p} v_s={v_s}")]
    Velocities { v_p: f64, v_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Earthquake {
    epicenter: GeoPoint,
    depth_km: f64,
    origin_time_s: f64,
    magnitude: f64,
}

impl Earthquake {
    pub fn new(
        epicenter: GeoPoint,
        depth_km: f64,
        origin_time_s: f64,
        magnitude: f64,
    ) -> Result<Self, ScenarioError> {
        if !(depth_km.is_finite() && depth_km >= 0.0) {
            return Err(ScenarioError::Depth(depth_km));
        }
        if !origin_time_s.is_finite() || !magnitude.is_finite() {
            return Err(ScenarioError::NonFinite);
        }
        Ok(Earthquake {
            epicenter,
            depth_km,
            origin_time_s,
            magnitude,
        })
    }

    pub fn epicenter(&self) -> GeoPoint {
        self.epicenter
    }

    pub fn depth_km(&self) -> f64 {
        self.depth_km
    }

    pub fn origin_time_s(&self) -> f64 {
        self.origin_time_s
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    /// Same event with a different origin time.
    pub fn with_origin_time(mut self, origin_time_s: f64) -> Self {
        self.origin_time_s = origin_time_s;
        self
    }

    /// Straight-line distance from the hypocenter to a surface point.
    pub fn hypocentral_km(&self, p: GeoPoint) -> f64 {
        haversine_km(self.epicenter, p).hypot(self.depth_km)
    }

    /// Absolute P-wave arrival time at `p`.
    pub fn p_arrival_s(&self, vm: &VelocityModel, p: GeoPoint) -> f64 {
        self.origin_time_s + vm.p_travel_s(self.hypocentral_km(p))
    }

    /// Absolute S-wave arrival time at `p`.
    pub fn s_arrival_s(&self, vm: &VelocityModel, p: GeoPoint) -> f64 {
        self.origin_time_s + vm.s_travel_s(self.hypocentral_km(p))
    }
}

/// P and S propagation speeds of a homogeneous half-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityModel {
    v_p_km_s: f64,
    v_s_km_s: f64,
}

impl Default for VelocityModel {
    fn default() -> Self {
        VelocityModel {
            v_p_km_s: 6.5,
            v_s_km_s: 3.5,
        }
    }
}

impl VelocityModel {
    pub fn new(v_p_km_s: f64, v_s_km_s: f64) -> Result<Self, ScenarioError> {
        if !(v_s_km_s.is_finite() && v_p_km_s.is_finite() && v_s_km_s > 0.0 && v_p_km_s > v_s_km_s) {
            return Err(ScenarioError::Velocities {
                v_p: v_p_km_s,
                v_s: v_s_km_s,
            });
        }
        Ok(VelocityModel { v_p_km_s, v_s_km_s })
    }

    pub fn v_p_km_s(&self) -> f64 {
        self.v_p_km_s
    }

    pub fn v_s_km_s(&self) -> f64 {
        self.v_s_km_s
    }

    pub fn p_travel_s(&self, distance_km: f64) -> f64 {
        distance_km / self.v_p_km_s
    }

    pub fn s_travel_s(&self, distance_km: f64) -> f64 {
        distance_km / self.v_s_km_s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::EARTH_RADIUS_KM;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    /// Latitude offset (on a meridian) that gives `km` of surface distance.
    fn north_of(p: GeoPoint, km: f64) -> GeoPoint {
        pt(p.lat() + (km / EARTH_RADIUS_KM).to_degrees(), p.lon())
    }

    fn quake(depth: f64, origin: f64) -> Earthquake {
        Earthquake::new(pt(18.45, -72.5), depth, origin, 7.0).unwrap()
    }

    #[test]
    fn pythagorean_slant_distance() {
        let eq = quake(4.0, 0.0);
        let p = north_of(eq.epicenter(), 3.0);
        assert!((eq.hypocentral_km(p) - 5.0).abs() < 1e-9);
        assert_eq!(quake(10.0, 0.0).hypocentral_km(eq.epicenter()), 10.0);
        let flat = quake(0.0, 0.0);
        assert_eq!(flat.hypocentral_km(p), haversine_km(flat.epicenter(), p));
    }

    #[test]
    fn arrival_arithmetic() {
        let vm = VelocityModel::default();
        assert_eq!(vm.p_travel_s(65.0), 10.0);
        assert_eq!(5.0 + vm.p_travel_s(13.0), 7.0);
        assert_eq!(vm.s_travel_s(35.0), 10.0);

        let eq = quake(65.0, 0.0);
        assert!((eq.p_arrival_s(&vm, eq.epicenter()) - 10.0).abs() < 1e-12);
        let eq = quake(13.0, 5.0);
        assert!((eq.p_arrival_s(&vm, eq.epicenter()) - 7.0).abs() < 1e-12);
        let eq = quake(35.0, 0.0);
        assert!((eq.s_arrival_s(&vm, eq.epicenter()) - 10.0).abs() < 1e-12);

        let at_source = quake(0.0, 3.0);
        assert_eq!(at_source.p_arrival_s(&vm, at_source.epicenter()), 3.0);
        assert_eq!(at_source.s_arrival_s(&vm, at_source.epicenter()), 3.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(VelocityModel::new(3.0, 3.5).is_err());
        assert!(VelocityModel::new(6.5, 0.0).is_err());
        assert!(Earthquake::new(pt(0.0, 0.0), -1.0, 0.0, 7.0).is_err());
        assert!(Earthquake::new(pt(0.0, 0.0), 1.0, f64::NAN, 7.0).is_err());
    }

    proptest! {
        #[test]
        fn s_after_p(depth in 0.0f64..50.0, dlat in -2.0f64..2.0, dlon in -2.0f64..2.0) {
            let eq = quake(depth, 0.0);
            let vm = VelocityModel::default();
            let p = pt(18.45 + dlat, -72.5 + dlon);
            let hypo = eq.hypocentral_km(p);
            let gap = eq.s_arrival_s(&vm, p) - eq.p_arrival_s(&vm, p);
            if hypo > 0.0 {
                prop_assert!(gap > 0.0);
            } else {
                prop_assert_eq!(gap, 0.0);
            }
            let expected = hypo * (1.0 / vm.v_s_km_s() - 1.0 / vm.v_p_km_s());
            prop_assert!((gap - expected).abs() < 1e-9);
        }

        #[test]
        fn arrivals_monotone_in_distance(depth in 0.0f64..50.0, a in 0.0f64..300.0, b in 0.0f64..300.0) {
            let eq = quake(depth, 0.0);
            let vm = VelocityModel::default();
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            let (pn, pf) = (north_of(eq.epicenter(), near), north_of(eq.epicenter(), far));
            prop_assert!(eq.p_arrival_s(&vm, pn) <= eq.p_arrival_s(&vm, pf));
            prop_assert!(eq.s_arrival_s(&vm, pn) <= eq.s_arrival_s(&vm, pf));
        }
    }
}
