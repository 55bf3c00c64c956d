//! Replication over random network geometries and per-size summaries.
//!
//! Replica `r` of network size `n` draws all its randomness from
//! `SeedSpec(master_seed, n, r)`, so replicas can run in any order or in
//! parallel and still produce bit-identical results.

mod density;
mod stats;

pub use density::{detection_density, grid_mode, silverman_bandwidth, Bandwidth, DensityGrid, DensitySpec};
pub use stats::{percentile, Band, EmptyInput};

use rayon::prelude::*;
use thiserror::Error;

use crate::detection::{detect, detection_metrics, simulate_triggers, DetectError, DetectorParams, PhoneParams};
use crate::geo::GeoPoint;
use crate::network::{sample_network, Catalog, NetworkError, SeedSpec};
use crate::scenario::{Earthquake, VelocityModel};

#[derive(Debug, Error)]
pub enum McError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("no detections to summarize")]
    NoDetections,
    #[error("kernel density vanished on the evaluation grid (detections far outside it?)")]
    DensityUnderflow,
    #[error("invalid density grid: {0}")]
    Geometry(String),
    #[error("replicas must be >= 1")]
    NoReplicas,
}

/// What a detected replica observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaDetection {
    pub delay_s: f64,
    pub distance_km: f64,
    pub location: GeoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunResult {
    pub n: usize,
    pub replica: usize,
    /// `None` when the network never reached the detection threshold.
    pub detection: Option<ReplicaDetection>,
}

impl RunResult {
    pub fn detected(&self) -> bool {
        self.detection.is_some()
    }
}

/// Everything one replica needs besides its seed.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    pub catalog: &'a Catalog,
    pub earthquake: Earthquake,
    pub velocity: VelocityModel,
    pub phone: PhoneParams,
    pub detector: DetectorParams,
}

impl Simulation<'_> {
    /// Sample a network, simulate phone triggers, run the detector.
    pub fn run_replica(&self, n: usize, replica: usize, master_seed: u64) -> Result<RunResult, McError> {
        let seed = SeedSpec::new(master_seed, n, replica);
        let net = sample_network(self.catalog, n, seed)?;
        let triggers = simulate_triggers(&net, &self.earthquake, &self.velocity, &self.phone, seed);
        let detection = detect(&triggers, &self.detector)?.map(|det| {
            let m = detection_metrics(&det, &self.earthquake);
            ReplicaDetection {
                delay_s: m.delay_s,
                distance_km: m.distance_km,
                location: det.location,
            }
        });
        Ok(RunResult { n, replica, detection })
    }

    /// Runs `replicas` replicas for every size in `n_grid`.
    ///
    /// Work is spread over the current rayon pool; results come back in
    /// `(n_grid order, replica index)` order regardless of scheduling.
    pub fn run_campaign(&self, n_grid: &[usize], replicas: usize, master_seed: u64) -> Result<Campaign, McError> {
        if replicas == 0 {
            return Err(McError::NoReplicas);
        }
        self.phone.validate()?;
        self.detector.validate()?;
        for &n in n_grid {
            if n == 0 {
                return Err(NetworkError::NZero.into());
            }
            if n > self.catalog.len() {
                return Err(NetworkError::NTooLarge {
                    n,
                    catalog: self.catalog.len(),
                }
                .into());
            }
        }

        let jobs: Vec<(usize, usize)> = n_grid
            .iter()
            .flat_map(|&n| (0..replicas).map(move |r| (n, r)))
            .collect();
        let runs = jobs
            .par_iter()
            .map(|&(n, r)| self.run_replica(n, r, master_seed))
            .collect::<Result<Vec<_>, _>>()?;

        let summaries = runs.chunks(replicas).map(McSummary::from_runs).collect();
        Ok(Campaign { summaries, runs })
    }
}

/// Per-size aggregate over replicas. Delay and distance statistics only use
/// detected replicas and are `None` when there were none.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub n: usize,
    pub replicas: usize,
    pub detected: usize,
    pub detect_rate: f64,
    pub delay_s: Option<Band>,
    pub distance_km: Option<Band>,
}

impl McSummary {
    /// Summarizes the runs of one network size, folding in slice order.
    pub fn from_runs(runs: &[RunResult]) -> McSummary {
        let n = runs.first().map_or(0, |r| r.n);
        let detections: Vec<ReplicaDetection> = runs.iter().filter_map(|r| r.detection).collect();
        let delays: Vec<f64> = detections.iter().map(|d| d.delay_s).collect();
        let distances: Vec<f64> = detections.iter().map(|d| d.distance_km).collect();
        McSummary {
            n,
            replicas: runs.len(),
            detected: detections.len(),
            detect_rate: if runs.is_empty() {
                0.0
            } else {
                detections.len() as f64 / runs.len() as f64
            },
            delay_s: Band::from_values(&delays),
            distance_km: Band::from_values(&distances),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub summaries: Vec<McSummary>,
    pub runs: Vec<RunResult>,
}

impl Campaign {
    pub fn runs_for(&self, n: usize) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(move |r| r.n == n)
    }

    pub fn detection_locations(&self, n: usize) -> Vec<GeoPoint> {
        self.runs_for(n).filter_map(|r| r.detection.map(|d| d.location)).collect()
    }
}
