//! Plot-ready CSV outputs. Every file has a header row; floats use
//! shortest round-trip formatting and absent values are empty fields.

use std::path::Path;

use thiserror::Error;

use crate::geo::{ExposureReport, GeoPoint};
use crate::montecarlo::{DensityGrid, McSummary, ReplicaDetection, RunResult};
use crate::warning::{WarningBandRow, WarningStats};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: line {line}: {reason}")]
    BadRow { path: String, line: u64, reason: String },
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct Sheet {
    path: String,
    writer: csv::Writer<std::fs::File>,
}

impl Sheet {
    fn create(path: &Path, header: &[&str]) -> Result<Self, OutputError> {
        let path_s = path.display().to_string();
        let writer = csv::Writer::from_path(path).map_err(|source| OutputError::Csv {
            path: path_s.clone(),
            source,
        })?;
        let mut sheet = Sheet { path: path_s, writer };
        sheet.row(header.iter().map(|s| s.to_string()))?;
        Ok(sheet)
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) -> Result<(), OutputError> {
        self.writer
            .write_record(fields.into_iter().collect::<Vec<_>>())
            .map_err(|source| OutputError::Csv {
                path: self.path.clone(),
                source,
            })
    }

    fn finish(mut self) -> Result<(), OutputError> {
        self.writer.flush().map_err(|e| OutputError::Csv {
            path: self.path.clone(),
            source: e.into(),
        })
    }
}

pub const RUNS_HEADER: [&str; 7] = ["n", "replica", "detected", "delay_s", "distance_km", "det_lat", "det_lon"];

pub fn write_runs(path: &Path, runs: &[RunResult]) -> Result<(), OutputError> {
    let mut sheet = Sheet::create(path, &RUNS_HEADER)?;
    for r in runs {
        let d = r.detection;
        sheet.row([
            r.n.to_string(),
            r.replica.to_string(),
            r.detected().to_string(),
            opt(d.map(|d| d.delay_s)),
            opt(d.map(|d| d.distance_km)),
            opt(d.map(|d| d.location.lat())),
            opt(d.map(|d| d.location.lon())),
        ])?;
    }
    sheet.finish()
}

pub fn read_runs(path: &Path) -> Result<Vec<RunResult>, OutputError> {
    let path_s = path.display().to_string();
    let csv_err = |source| OutputError::Csv {
        path: path_s.clone(),
        source,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(RUNS_HEADER) {
        return Err(OutputError::BadRow {
            path: path_s,
            line: 1,
            reason: format!("expected header `{}`", RUNS_HEADER.join(",")),
        });
    }
    let mut runs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| OutputError::BadRow {
            path: path_s.clone(),
            line,
            reason,
        };
        let int = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(format!("bad integer `{}`", &rec[i])));
        let float = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(format!("bad number `{}`", &rec[i])));
        let detection = match &rec[2] {
            "true" => {
                let location = GeoPoint::new(float(5)?, float(6)?).map_err(|e| bad(e.to_string()))?;
                Some(ReplicaDetection {
                    delay_s: float(3)?,
                    distance_km: float(4)?,
                    location,
                })
            }
            "false" => None,
            other => return Err(bad(format!("`detected` must be true or false, got `{other}`"))),
        };
        runs.push(RunResult {
            n: int(0)?,
            replica: int(1)?,
            detection,
        });
    }
    Ok(runs)
}

pub fn write_summary(path: &Path, summaries: &[McSummary]) -> Result<(), OutputError> {
    let mut sheet = Sheet::create(
        path,
        &[
            "n",
            "replicas",
            "detected",
            "detect_rate",
            "delay_mean_s",
            "delay_lo_s",
            "delay_hi_s",
            "dist_mean_km",
            "dist_lo_km",
            "dist_hi_km",
        ],
    )?;
    for s in summaries {
        sheet.row([
            s.n.to_string(),
            s.replicas.to_string(),
            s.detected.to_string(),
            num(s.detect_rate),
            opt(s.delay_s.map(|b| b.mean)),
            opt(s.delay_s.map(|b| b.lo)),
            opt(s.delay_s.map(|b| b.hi)),
            opt(s.distance_km.map(|b| b.mean)),
            opt(s.distance_km.map(|b| b.lo)),
            opt(s.distance_km.map(|b| b.hi)),
        ])?;
    }
    sheet.finish()
}

/// One row per bin; `exceedance_fraction` is the share of population
/// exposed to an intensity at least the bin's lower bound.
pub fn write_exposure(path: &Path, report: &ExposureReport) -> Result<(), OutputError> {
    let mut sheet = Sheet::create(path, &["mmi_bin", "population", "exceedance_fraction"])?;
    for (bin, people) in &report.bins {
        sheet.row([bin.to_string(), num(*people), num(report.exceedance(bin.lo))])?;
    }
    sheet.finish()
}

/// Histogram rows; a bin without population gets a single row with empty edges.
pub fn write_warning_hist(path: &Path, stats: &[WarningStats]) -> Result<(), OutputError> {
    let mut sheet = Sheet::create(path, &["bin", "edge_lo_s", "edge_hi_s", "population"])?;
    for s in stats {
        if s.histogram.is_empty() {
            sheet.row([s.bin.to_string(), String::new(), String::new(), "0".into()])?;
        }
        for b in &s.histogram {
            sheet.row([s.bin.to_string(), num(b.lo_s), num(b.hi_s), b.population.to_string()])?;
        }
    }
    sheet.finish()
}

pub fn write_warning_summary(path: &Path, n: usize, stats: &[WarningStats]) -> Result<(), OutputError> {
    let mut sheet = Sheet::create(path, &["n", "bin", "population", "p2_5_s", "mean_s", "p97_5_s"])?;
    for s in stats {
        sheet.row([
            n.to_string(),
            s.bin.to_string(),
            s.population.to_string(),
            opt(s.summary.map(|x| x.p2_5_s)),
            opt(s.summary.map(|x| x.mean_s)),
            opt(s.summary.map(|x| x.p97_5_s)),
        ])?;
    }
    sheet.finish()
}

pub fn write_warning_vs_n(path: &Path, rows: &[WarningBandRow]) -> Result<(), OutputError> {
    let mut sheet = Sheet::create(path, &["n", "bin", "stat", "value_s", "band_lo_s", "band_hi_s"])?;
    for r in rows {
        sheet.row([
            r.n.to_string(),
            r.bin.to_string(),
            r.stat.name().to_string(),
            opt(r.band.map(|b| b.mean)),
            opt(r.band.map(|b| b.lo)),
            opt(r.band.map(|b| b.hi)),
        ])?;
    }
    sheet.finish()
}

/// Per-size density digest: bandwidth, mode and 95% highest-density area.
pub fn write_density_summary(path: &Path, rows: &[(usize, Option<&DensityGrid>)]) -> Result<(), OutputError> {
    let mut sheet = Sheet::create(
        path,
        &["n", "bandwidth_deg", "mode_lat", "mode_lon", "hdr95_area_deg2", "integral", "file"],
    )?;
    for (n, d) in rows {
        sheet.row([
            n.to_string(),
            opt(d.map(|d| d.bandwidth_deg)),
            opt(d.map(|d| d.mode.lat())),
            opt(d.map(|d| d.mode.lon())),
            opt(d.map(|d| d.hdr_area_deg2(0.95))),
            opt(d.map(|d| d.integral())),
            d.map(|_| density_file_name(*n)).unwrap_or_default(),
        ])?;
    }
    sheet.finish()
}

pub fn density_file_name(n: usize) -> String {
    format!("density_n{n}.asc")
}
