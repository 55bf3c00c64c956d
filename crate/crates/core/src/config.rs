//! TOML run configuration.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Every section is optional except `[scenario]` and `[inputs]`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::detection::{DetectorParams, PhoneParams};
use crate::geo::{validate_bins, GeoPoint, MmiBin};
use crate::montecarlo::Bandwidth;
use crate::scenario::{Earthquake, VelocityModel};
use crate::warning::AlertParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

fn default_seed() -> u64 {
    1
}

fn default_replicas() -> usize {
    1000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_bins() -> Vec<String> {
    MmiBin::default_warning_bins().iter().map(|b| b.to_string()).collect()
}

/// Network sizes, either listed or as an inclusive range.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NGrid {
    List(Vec<usize>),
    Range { start: usize, stop: usize, step: usize },
}

impl Default for NGrid {
    fn default() -> Self {
        NGrid::Range {
            start: 300,
            stop: 3000,
            step: 100,
        }
    }
}

impl NGrid {
    pub fn sizes(&self) -> Vec<usize> {
        match self {
            NGrid::List(v) => v.clone(),
            NGrid::Range { start, stop, step } => (*start..=*stop).step_by((*step).max(1)).collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub lat: f64,
    pub lon: f64,
    pub depth_km: f64,
    #[serde(default)]
    pub origin_time_s: f64,
    #[serde(default)]
    pub magnitude: f64,
    #[serde(default = "default_vp")]
    pub v_p_km_s: f64,
    #[serde(default = "default_vs")]
    pub v_s_km_s: f64,
}

fn default_vp() -> f64 {
    VelocityModel::default().v_p_km_s()
}

fn default_vs() -> f64 {
    VelocityModel::default().v_s_km_s()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsConfig {
    pub population: PathBuf,
    pub mmi: PathBuf,
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default = "default_n_phones")]
    pub n_phones: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Where `synth` writes the catalog; defaults to `<output_dir>/catalog.csv`.
    pub output: Option<PathBuf>,
}

fn default_n_phones() -> usize {
    6202
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhoneConfig {
    pub p_detect: f64,
    pub delay_lo_s: f64,
    pub delay_hi_s: f64,
}

impl Default for PhoneConfig {
    fn default() -> Self {
        let p = PhoneParams::default();
        PhoneConfig {
            p_detect: p.p_detect,
            delay_lo_s: p.delay_lo_s,
            delay_hi_s: p.delay_hi_s,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub k_min: usize,
    pub window_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let d = DetectorParams::default();
        DetectorConfig {
            k_min: d.k_min,
            window_s: d.window_s,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlertConfig {
    pub dissemination_latency_s: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    /// Fixed kernel bandwidth; Silverman's rule when absent.
    pub bandwidth_deg: Option<f64>,
    /// Density raster resolution; the population grid's when absent.
    pub cellsize_deg: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WarningConfig {
    pub hist_width_s: f64,
}

impl Default for WarningConfig {
    fn default() -> Self {
        WarningConfig { hist_width_s: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExposureConfig {
    pub bin_width: f64,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        ExposureConfig { bin_width: 0.5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub n_grid: NGrid,
    #[serde(default = "default_bins")]
    pub mmi_bins: Vec<String>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub scenario: ScenarioConfig,
    pub inputs: InputsConfig,
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub phone: PhoneConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub alert: AlertConfig,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub warning: WarningConfig,
    #[serde(default)]
    pub exposure: ExposureConfig,

    /// Path of the file this was read from (not a config key).
    #[serde(skip)]
    pub source: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = RunConfig::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    /// Parses and validates without touching the filesystem; paths stay as written.
    pub fn parse(text: &str, path: &Path) -> Result<RunConfig, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.source = path.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.inputs.population);
        fix(&mut self.inputs.mmi);
        if let Some(c) = self.inputs.catalog.as_mut() {
            fix(c);
        }
        if let Some(o) = self.synth.as_mut().and_then(|s| s.output.as_mut()) {
            fix(o);
        }
        fix(&mut self.output_dir);
    }

    fn invalid(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            path: self.source.clone(),
            message: message.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replicas == 0 {
            return Err(self.invalid("replicas must be >= 1"));
        }
        let sizes = self.n_grid.sizes();
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(self.invalid("n_grid must list sizes >= 1"));
        }
        if let NGrid::Range { step: 0, .. } = self.n_grid {
            return Err(self.invalid("n_grid step must be >= 1"));
        }
        self.earthquake()?;
        self.velocity()?;
        self.phone_params()
            .validate()
            .map_err(|e| self.invalid(e.to_string()))?;
        self.detector_params()
            .validate()
            .map_err(|e| self.invalid(e.to_string()))?;
        self.alert_params()
            .validate()
            .map_err(|e| self.invalid(e.to_string()))?;
        self.bins()?;
        if let Some(s) = &self.synth {
            if s.n_phones == 0 {
                return Err(self.invalid("synth.n_phones must be >= 1"));
            }
        }
        if !(self.warning.hist_width_s.is_finite() && self.warning.hist_width_s > 0.0) {
            return Err(self.invalid("warning.hist_width_s must be > 0"));
        }
        if !(self.exposure.bin_width.is_finite() && self.exposure.bin_width > 0.0) {
            return Err(self.invalid("exposure.bin_width must be > 0"));
        }
        for (key, v) in [
            ("density.bandwidth_deg", self.density.bandwidth_deg),
            ("density.cellsize_deg", self.density.cellsize_deg),
        ] {
            if v.is_some_and(|v| !(v.is_finite() && v > 0.0)) {
                return Err(self.invalid(format!("{key} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn earthquake(&self) -> Result<Earthquake, ConfigError> {
        let s = &self.scenario;
        let epicenter = GeoPoint::new(s.lat, s.lon).map_err(|e| self.invalid(format!("scenario: {e}")))?;
        Earthquake::new(epicenter, s.depth_km, s.origin_time_s, s.magnitude)
            .map_err(|e| self.invalid(format!("scenario: {e}")))
    }

    pub fn velocity(&self) -> Result<VelocityModel, ConfigError> {
        VelocityModel::new(self.scenario.v_p_km_s, self.scenario.v_s_km_s)
            .map_err(|e| self.invalid(format!("scenario: {e}")))
    }

    pub fn phone_params(&self) -> PhoneParams {
        PhoneParams {
            p_detect: self.phone.p_detect,
            delay_lo_s: self.phone.delay_lo_s,
            delay_hi_s: self.phone.delay_hi_s,
        }
    }

    pub fn detector_params(&self) -> DetectorParams {
        DetectorParams {
            k_min: self.detector.k_min,
            window_s: self.detector.window_s,
        }
    }

    pub fn alert_params(&self) -> AlertParams {
        AlertParams {
            dissemination_latency_s: self.alert.dissemination_latency_s,
        }
    }

    pub fn bandwidth(&self) -> Bandwidth {
        self.density.bandwidth_deg.map_or(Bandwidth::Auto, Bandwidth::Fixed)
    }

    pub fn bins(&self) -> Result<Vec<MmiBin>, ConfigError> {
        let bins = self
            .mmi_bins
            .iter()
            .map(|s| s.parse::<MmiBin>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| self.invalid(format!("mmi_bins: {e}")))?;
        validate_bins(&bins).map_err(|e| self.invalid(format!("mmi_bins: {e}")))?;
        Ok(bins)
    }

    pub fn synth_output(&self) -> PathBuf {
        self.synth
            .as_ref()
            .and_then(|s| s.output.clone())
            .unwrap_or_else(|| self.output_dir.join("catalog.csv"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scenario]
lat = 18.457
lon = -72.533
depth_km = 10

[inputs]
population = "pop.asc"
mmi = "mmi.asc"
"#;

    #[test]
    fn defaults_follow_reference_setup() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("run.toml")).unwrap();
        let sizes = cfg.n_grid.sizes();
        assert_eq!(sizes.len(), 28);
        assert_eq!((sizes[0], sizes[27]), (300, 3000));
        assert_eq!(cfg.replicas, 1000);
        assert_eq!(cfg.phone_params(), PhoneParams::default());
        assert_eq!(cfg.detector_params(), DetectorParams::default());
        assert_eq!(cfg.bins().unwrap(), MmiBin::default_warning_bins());
        assert_eq!(cfg.velocity().unwrap(), VelocityModel::default());
        assert_eq!(cfg.bandwidth(), Bandwidth::Auto);
    }

    #[test]
    fn explicit_list_and_sections() {
        let text = format!(
            "n_grid = [10, 20]\nreplicas = 5\nmmi_bins = [\"[6,7)\"]\n{MINIMAL}\n[phone]\np_detect = 1.0\n[density]\nbandwidth_deg = 0.05\n"
        );
        let cfg = RunConfig::parse(&text, Path::new("run.toml")).unwrap();
        assert_eq!(cfg.n_grid.sizes(), vec![10, 20]);
        assert_eq!(cfg.phone_params().p_detect, 1.0);
        assert_eq!(cfg.phone_params().delay_lo_s, 0.5);
        assert_eq!(cfg.bandwidth(), Bandwidth::Fixed(0.05));
    }

    #[test]
    fn rejects_bad_values_with_location() {
        let err = RunConfig::parse(&format!("replicas = 0\n{MINIMAL}"), Path::new("a.toml")).unwrap_err();
        assert!(err.to_string().contains("a.toml"));
        let err = RunConfig::parse(&format!("{MINIMAL}\n[phone]\np_detect = 2\n"), Path::new("a.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }));
        let err = RunConfig::parse(&format!("{MINIMAL}\n[detector]\nkmin = 2\n"), Path::new("a.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }), "{err}");
        let err = RunConfig::parse(&format!("mmi_bins = [\"[7,8]\", \"[8,9]\"]\n{MINIMAL}"), Path::new("a.toml")).unwrap_err();
        assert!(err.to_string().contains("overlap"));
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let mut cfg = RunConfig::parse(MINIMAL, Path::new("/data/run.toml")).unwrap();
        cfg.resolve_paths(Path::new("/data"));
        assert_eq!(cfg.inputs.population, PathBuf::from("/data/pop.asc"));
        assert_eq!(cfg.synth_output(), PathBuf::from("/data/out/catalog.csv"));
    }
}
