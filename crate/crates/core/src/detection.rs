//! Two-step detection: independent phone triggers, then a server-side
//! sliding-window count detector.

use std::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

use crate::geo::{haversine_km, GeoPoint};
use crate::network::{Network, SeedSpec, Stream};
use crate::scenario::{Earthquake, VelocityModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("triggers must be sorted by time; index {index} precedes its predecessor")]
    UnsortedInput { index: usize },
    #[error("invalid phone parameters: {0}")]
    PhoneParams(String),
    #[error("invalid detector parameters: {0}")]
    DetectorParams(String),
}

/// Per-phone detection behaviour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhoneParams {
    pub p_detect: f64,
    pub delay_lo_s: f64,
    pub delay_hi_s: f64,
}

impl Default for PhoneParams {
    fn default() -> Self {
        PhoneParams {
            p_detect: 0.7,
            delay_lo_s: 0.5,
            delay_hi_s: 3.5,
        }
    }
}

impl PhoneParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        if !(0.0..=1.0).contains(&self.p_detect) {
            return Err(DetectError::PhoneParams(format!(
                "p_detect {} outside [0, 1]",
                self.p_detect
            )));
        }
        if !(self.delay_lo_s.is_finite() && self.delay_hi_s.is_finite())
            || self.delay_lo_s < 0.0
            || self.delay_lo_s > self.delay_hi_s
        {
            return Err(DetectError::PhoneParams(format!(
                "delay bounds must satisfy 0 <= lo <= hi, got [{}, {}]",
                self.delay_lo_s, self.delay_hi_s
            )));
        }
        Ok(())
    }
}

/// Count threshold `k_min` within a trailing window of `window_s` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub k_min: usize,
    pub window_s: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            k_min: 5,
            window_s: 10.0,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.k_min < 2 {
            return Err(DetectError::DetectorParams(format!("k_min {} must be >= 2", self.k_min)));
        }
        if !(self.window_s.is_finite() && self.window_s > 0.0) {
            return Err(DetectError::DetectorParams(format!(
                "window_s {} must be > 0",
                self.window_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhoneTrigger {
    pub location: GeoPoint,
    pub trigger_time_s: f64,
}

/// Total order used to sort triggers: time, then latitude, then longitude.
pub fn trigger_order(a: &PhoneTrigger, b: &PhoneTrigger) -> Ordering {
    a.trigger_time_s
        .total_cmp(&b.trigger_time_s)
        .then(a.location.lat().total_cmp(&b.location.lat()))
        .then(a.location.lon().total_cmp(&b.location.lon()))
}

/// A server-side detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub time_s: f64,
    pub location: GeoPoint,
    /// Indices into the trigger list that fed the detection.
    pub contributing: Vec<usize>,
}

/// First step: which phones detect the P wave, and when.
///
/// Each phone triggers independently with probability `p_detect`, at its
/// P-wave arrival plus a uniform delay. The result is sorted by
/// [`trigger_order`].
pub fn simulate_triggers(
    net: &Network,
    eq: &Earthquake,
    vm: &VelocityModel,
    pp: &PhoneParams,
    seed: SeedSpec,
) -> Vec<PhoneTrigger> {
    let mut rng = seed.rng(Stream::Triggers);
    let spread = pp.delay_hi_s - pp.delay_lo_s;
    let mut triggers: Vec<PhoneTrigger> = net
        .points()
        .iter()
        .filter_map(|&p| {
            // both draws are always made so a phone's delay does not depend on p_detect
            let fires = rng.random::<f64>() < pp.p_detect;
            let delay = pp.delay_lo_s + spread * rng.random::<f64>();
            fires.then(|| PhoneTrigger {
                location: p,
                trigger_time_s: eq.p_arrival_s(vm, p) + delay,
            })
        })
        .collect();
    triggers.sort_by(trigger_order);
    triggers
}

/// Median with the two central values averaged for even counts.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        (values[m / 2 - 1] + values[m / 2]) / 2.0
    }
}

/// Coordinate-wise median of a set of points.
pub fn coordinate_median(points: impl IntoIterator<Item = GeoPoint>) -> Option<GeoPoint> {
    let (mut lats, mut lons): (Vec<f64>, Vec<f64>) = points.into_iter().map(|p| (p.lat(), p.lon())).unzip();
    if lats.is_empty() {
        return None;
    }
    let lat = median(&mut lats);
    let lon = median(&mut lons);
    GeoPoint::new(lat, lon).ok()
}

/// Second step: the server-side detector.
///
/// Scans triggers in time order and declares a detection at the first trigger
/// time `t` such that at least `k_min` triggers fall in `(t - window_s, t]`.
/// The location is the coordinate-wise median of the earliest `k_min`
/// triggers in that window. Returns `Ok(None)` when no window qualifies.
pub fn detect(triggers: &[PhoneTrigger], dp: &DetectorParams) -> Result<Option<Detection>, DetectError> {
    if let Some(i) = triggers
        .windows(2)
        .position(|w| w[1].trigger_time_s < w[0].trigger_time_s)
    {
        return Err(DetectError::UnsortedInput { index: i + 1 });
    }
    if dp.k_min == 0 {
        return Ok(None);
    }

    let mut start = 0;
    let mut j = 0;
    while j < triggers.len() {
        let t = triggers[j].trigger_time_s;
        // triggers sharing time t all lie inside the window ending at t
        let mut end = j + 1;
        while end < triggers.len() && triggers[end].trigger_time_s == t {
            end += 1;
        }
        while start < j && triggers[start].trigger_time_s <= t - dp.window_s {
            start += 1;
        }
        if end - start >= dp.k_min {
            let contributing: Vec<usize> = (start..start + dp.k_min).collect();
            let location = coordinate_median(contributing.iter().map(|&i| triggers[i].location))
                .expect("k_min >= 1 contributing triggers");
            return Ok(Some(Detection {
                time_s: t,
                location,
                contributing,
            }));
        }
        j = end;
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionMetrics {
    pub delay_s: f64,
    pub distance_km: f64,
}

/// Delay from origin time and distance from the true epicenter.
pub fn detection_metrics(det: &Detection, eq: &Earthquake) -> DetectionMetrics {
    DetectionMetrics {
        delay_s: det.time_s - eq.origin_time_s(),
        distance_km: haversine_km(det.location, eq.epicenter()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn trig(t: f64, lat: f64, lon: f64) -> PhoneTrigger {
        PhoneTrigger {
            location: pt(lat, lon),
            trigger_time_s: t,
        }
    }

    fn at_times(times: &[f64]) -> Vec<PhoneTrigger> {
        times.iter().enumerate().map(|(i, &t)| trig(t, i as f64 * 0.1, 0.0)).collect()
    }

    /// Tries every trigger as the window end, with no incremental state.
    fn brute_force(triggers: &[PhoneTrigger], dp: &DetectorParams) -> Option<Detection> {
        for cand in triggers {
            let t = cand.trigger_time_s;
            let inside: Vec<usize> = (0..triggers.len())
                .filter(|&i| triggers[i].trigger_time_s > t - dp.window_s && triggers[i].trigger_time_s <= t)
                .collect();
            if inside.len() >= dp.k_min {
                let chosen: Vec<usize> = inside[..dp.k_min].to_vec();
                let mut lats: Vec<f64> = chosen.iter().map(|&i| triggers[i].location.lat()).collect();
                let mut lons: Vec<f64> = chosen.iter().map(|&i| triggers[i].location.lon()).collect();
                lats.sort_by(f64::total_cmp);
                lons.sort_by(f64::total_cmp);
                let mid = |v: &[f64]| {
                    let m = v.len();
                    if m % 2 == 1 { v[m / 2] } else { (v[m / 2 - 1] + v[m / 2]) / 2.0 }
                };
                return Some(Detection {
                    time_s: t,
                    location: pt(mid(&lats), mid(&lons)),
                    contributing: chosen,
                });
            }
        }
        None
    }

    #[test]
    fn three_in_a_row() {
        let dp = DetectorParams { k_min: 3, window_s: 10.0 };
        let det = detect(&at_times(&[1.0, 2.0, 3.0]), &dp).unwrap().unwrap();
        assert_eq!(det.time_s, 3.0);
        assert_eq!(det.contributing, vec![0, 1, 2]);
        assert_eq!(det.location, pt(0.1, 0.0));
    }

    #[test]
    fn sparse_triggers_never_detect() {
        let dp = DetectorParams { k_min: 3, window_s: 1.0 };
        assert_eq!(detect(&at_times(&[1.0, 5.0, 9.0]), &dp).unwrap(), None);
        assert_eq!(detect(&[], &dp).unwrap(), None);
    }

    #[test]
    fn window_is_half_open() {
        // 1.0 is exactly window_s before 3.0 and must be excluded
        let dp = DetectorParams { k_min: 3, window_s: 2.0 };
        assert_eq!(detect(&at_times(&[1.0, 2.0, 3.0]), &dp).unwrap(), None);
        let dp = DetectorParams { k_min: 3, window_s: 2.0000001 };
        assert!(detect(&at_times(&[1.0, 2.0, 3.0]), &dp).unwrap().is_some());
    }

    #[test]
    fn simultaneous_later_triggers_count() {
        let dp = DetectorParams { k_min: 3, window_s: 1.0 };
        let det = detect(&at_times(&[0.0, 5.0, 5.0, 5.0]), &dp).unwrap().unwrap();
        assert_eq!(det.time_s, 5.0);
        assert_eq!(det.contributing, vec![1, 2, 3]);
    }

    #[test]
    fn five_trigger_fixture_matches_oracle() {
        let triggers = vec![
            trig(1.0, 18.40, -72.60),
            trig(2.5, 18.55, -72.30),
            trig(3.0, 18.45, -72.50),
            trig(3.2, 18.50, -72.40),
            trig(9.0, 18.70, -72.10),
        ];
        let dp = DetectorParams { k_min: 3, window_s: 1.0 };
        let det = detect(&triggers, &dp).unwrap().unwrap();
        assert_eq!(Some(det.clone()), brute_force(&triggers, &dp));
        assert_eq!(det.time_s, 3.2);
        assert_eq!(det.contributing, vec![1, 2, 3]);
        assert_eq!(det.location, pt(18.50, -72.40));
    }

    #[test]
    fn unsorted_input_rejected() {
        let dp = DetectorParams::default();
        assert_eq!(
            detect(&at_times(&[1.0, 0.5]), &dp),
            Err(DetectError::UnsortedInput { index: 1 })
        );
    }

    #[test]
    fn even_median_averages() {
        let m = coordinate_median([pt(1.0, 4.0), pt(3.0, 2.0), pt(2.0, 1.0), pt(10.0, 3.0)]).unwrap();
        assert_eq!(m, pt(2.5, 2.5));
    }

    #[test]
    fn metrics() {
        let eq = Earthquake::new(pt(18.0, -72.0), 10.0, 0.0, 7.0).unwrap();
        let det = Detection { time_s: 12.0, location: eq.epicenter(), contributing: vec![] };
        let m = detection_metrics(&det, &eq);
        assert_eq!(m.delay_s, 12.0);
        assert_eq!(m.distance_km, 0.0);
        let north = Detection { location: pt(18.5, -72.0), ..det };
        assert!((detection_metrics(&north, &eq).distance_km - 55.597).abs() < 1e-3);
    }

    #[test]
    fn param_validation() {
        assert!(PhoneParams::default().validate().is_ok());
        assert!(PhoneParams { p_detect: 1.1, ..Default::default() }.validate().is_err());
        assert!(PhoneParams { delay_lo_s: 2.0, delay_hi_s: 1.0, ..Default::default() }.validate().is_err());
        assert!(DetectorParams::default().validate().is_ok());
        assert!(DetectorParams { k_min: 1, window_s: 1.0 }.validate().is_err());
        assert!(DetectorParams { k_min: 3, window_s: 0.0 }.validate().is_err());
    }

    fn epicentral_quake() -> Earthquake {
        Earthquake::new(pt(18.45, -72.53), 0.0, 0.0, 7.0).unwrap()
    }

    #[test]
    fn no_phone_detects() {
        let net = Network::from_points(vec![pt(18.5, -72.5); 10]);
        let pp = PhoneParams { p_detect: 0.0, ..Default::default() };
        let out = simulate_triggers(&net, &epicentral_quake(), &VelocityModel::default(), &pp, SeedSpec::new(1, 10, 0));
        assert!(out.is_empty());
    }

    #[test]
    fn degenerate_delay_single_phone() {
        let eq = Earthquake::new(pt(18.45, -72.53), 65.0, 0.0, 7.0).unwrap();
        let net = Network::from_points(vec![eq.epicenter()]);
        let pp = PhoneParams { p_detect: 1.0, delay_lo_s: 1.0, delay_hi_s: 1.0 };
        let out = simulate_triggers(&net, &eq, &VelocityModel::default(), &pp, SeedSpec::new(1, 1, 0));
        assert_eq!(out.len(), 1);
        assert!((out[0].trigger_time_s - 11.0).abs() < 1e-12);
    }

    #[test]
    fn mean_trigger_count_matches_binomial() {
        let net = Network::from_points((0..1000).map(|i| pt(18.0 + i as f64 * 1e-3, -72.0)).collect());
        let pp = PhoneParams::default();
        let total: usize = (0..100)
            .map(|r| simulate_triggers(&net, &epicentral_quake(), &VelocityModel::default(), &pp, SeedSpec::new(5, 1000, r)).len())
            .sum();
        let mean = total as f64 / 100.0;
        assert!((678.0..=722.0).contains(&mean), "mean {mean}");
    }

    #[test]
    fn triggers_sorted_and_bounded() {
        let net = Network::from_points((0..200).map(|i| pt(18.0 + i as f64 * 5e-3, -72.0)).collect());
        let eq = epicentral_quake();
        let vm = VelocityModel::default();
        let pp = PhoneParams::default();
        let out = simulate_triggers(&net, &eq, &vm, &pp, SeedSpec::new(9, 200, 1));
        assert!(out.windows(2).all(|w| trigger_order(&w[0], &w[1]) != Ordering::Greater));
        for t in &out {
            let p = eq.p_arrival_s(&vm, t.location);
            assert!(t.trigger_time_s >= p + pp.delay_lo_s && t.trigger_time_s <= p + pp.delay_hi_s);
        }
    }

    fn trigger_set() -> impl Strategy<Value = Vec<PhoneTrigger>> {
        // coarse times so ties and window-boundary coincidences are common
        prop::collection::vec((0u32..40, 17.0f64..19.0, -73.0f64..-71.0), 0..20).prop_map(|raw| {
            let mut v: Vec<PhoneTrigger> = raw.into_iter().map(|(t, lat, lon)| trig(t as f64 * 0.25, lat, lon)).collect();
            v.sort_by(trigger_order);
            v
        })
    }

    fn params() -> impl Strategy<Value = DetectorParams> {
        (2usize..7, 1u32..16).prop_map(|(k_min, w)| DetectorParams { k_min, window_s: w as f64 * 0.25 })
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(triggers in trigger_set(), dp in params()) {
            prop_assert_eq!(detect(&triggers, &dp).unwrap(), brute_force(&triggers, &dp));
        }

        #[test]
        fn extra_trigger_never_delays(triggers in trigger_set(), dp in params(), extra in (0u32..40, 17.0f64..19.0, -73.0f64..-71.0)) {
            let before = detect(&triggers, &dp).unwrap().map(|d| d.time_s);
            let mut more = triggers.clone();
            more.push(trig(extra.0 as f64 * 0.25, extra.1, extra.2));
            more.sort_by(trigger_order);
            let after = detect(&more, &dp).unwrap().map(|d| d.time_s);
            if let Some(b) = before {
                prop_assert!(after.is_some_and(|a| a <= b));
            }
        }

        #[test]
        fn input_order_of_ties_is_irrelevant(triggers in trigger_set(), dp in params()) {
            let mut shuffled = triggers.clone();
            shuffled.reverse();
            shuffled.sort_by(trigger_order);
            prop_assert_eq!(detect(&shuffled, &dp).unwrap(), detect(&triggers, &dp).unwrap());
        }
    }
}
