//! Command-line front end: `exposure`, `synth`, `simulate`, `warn`, `all`.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input or configuration.

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::RunConfig;
use crate::detection::Detection;
use crate::geo::{exposure_histogram, parse_ascii_grid, Grid, MmiBin};
use crate::montecarlo::{detection_density, Band, DensityGrid, DensitySpec, McError, RunResult, Simulation};
use crate::network::{load_catalog, synth_catalog, Catalog};
use crate::output;
use crate::warning::{warning_field, warning_stats, warning_vs_n, WarningBasis};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "EEWSIM_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "eewsim", version, about = "Monte Carlo alerting-performance simulator for smartphone earthquake early warning networks")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override `master_seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Override `output_dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override `replicas`
    #[arg(long)]
    replicas: Option<usize>,
    /// Suppress progress messages
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// MMI population exposure histogram (exposure.csv)
    Exposure(Common),
    /// Synthetic phone catalog from the population grid
    Synth(Common),
    /// Monte Carlo campaign (runs.csv, summary.csv, density grids)
    Simulate(Common),
    /// Warning-time distributions from a finished campaign
    Warn {
        #[command(flatten)]
        common: Common,
        /// Campaign results to read (default: <out>/runs.csv)
        #[arg(long)]
        runs: Option<PathBuf>,
    },
    /// synth (if configured), exposure, simulate and warn in sequence
    All(Common),
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("eewsim: {e}");
            e.exit_code()
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| input(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(threads);
    }
    builder.build().map_err(internal)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::Exposure(c) => Session::open(&c)?.exposure(),
        Command::Synth(c) => Session::open(&c)?.synth(),
        Command::Simulate(c) => Session::open(&c)?.simulate(),
        Command::Warn { common, runs } => Session::open(&common)?.warn(runs.as_deref()),
        Command::All(c) => {
            let s = Session::open(&c)?;
            if s.cfg.synth.is_some() {
                s.synth()?;
            }
            s.exposure()?;
            s.simulate()?;
            s.warn(None)
        }
    })
}

/// Removes every tracked file on drop unless committed.
struct OutputGuard {
    files: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    fn new() -> Self {
        OutputGuard {
            files: Vec::new(),
            committed: false,
        }
    }

    fn track(&mut self, path: PathBuf) -> PathBuf {
        self.files.push(path.clone());
        path
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.committed {
            for f in &self.files {
                let _ = std::fs::remove_file(f);
            }
        }
    }
}

struct Session {
    cfg: RunConfig,
    quiet: bool,
}

fn read_grid(path: &Path, what: &str) -> Result<Grid, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("cannot read {what} grid {}: {e}", path.display())))?;
    let grid = parse_ascii_grid(&text).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let check = if what == "MMI" {
        grid.validate_mmi()
    } else {
        grid.validate_population()
    };
    check.map_err(|e| input(format!("{}: {e}", path.display())))?;
    Ok(grid)
}

impl Session {
    fn open(c: &Common) -> Result<Self, CliError> {
        let mut cfg = RunConfig::load(&c.config).map_err(input)?;
        if let Some(seed) = c.seed {
            cfg.master_seed = seed;
        }
        if let Some(out) = &c.out {
            cfg.output_dir = out.clone();
        }
        if let Some(r) = c.replicas {
            cfg.replicas = r;
        }
        cfg.validate().map_err(input)?;
        Ok(Session { cfg, quiet: c.quiet })
    }

    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        let dir = self.cfg.output_dir.as_path();
        std::fs::create_dir_all(dir).map_err(|e| internal(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn population(&self) -> Result<Grid, CliError> {
        read_grid(&self.cfg.inputs.population, "population")
    }

    fn mmi(&self) -> Result<Grid, CliError> {
        read_grid(&self.cfg.inputs.mmi, "MMI")
    }

    fn catalog(&self, pop: &Grid) -> Result<Catalog, CliError> {
        if let Some(path) = &self.cfg.inputs.catalog {
            let file = File::open(path).map_err(|e| input(format!("cannot read catalog {}: {e}", path.display())))?;
            return load_catalog(file, path.display().to_string()).map_err(|e| input(format!("{}: {e}", path.display())));
        }
        match &self.cfg.synth {
            Some(s) => synth_catalog(pop, s.n_phones, s.seed).map_err(input),
            None => Err(input("configuration has neither inputs.catalog nor a [synth] section")),
        }
    }

    fn exposure(&self) -> Result<(), CliError> {
        let (pop, mmi) = (self.population()?, self.mmi()?);
        let bins = MmiBin::uniform_bins(self.cfg.exposure.bin_width).map_err(input)?;
        let report = exposure_histogram(&mmi, &pop, &bins).map_err(input)?;
        let path = self.out_dir()?.join("exposure.csv");
        let mut guard = OutputGuard::new();
        output::write_exposure(&guard.track(path.clone()), &report).map_err(internal)?;
        guard.commit();
        self.log(format!("exposure: {} people with known intensity -> {}", report.total_population(), path.display()));
        Ok(())
    }

    fn synth(&self) -> Result<(), CliError> {
        let s = self
            .cfg
            .synth
            .as_ref()
            .ok_or_else(|| input("configuration has no [synth] section"))?;
        let pop = self.population()?;
        let catalog = synth_catalog(&pop, s.n_phones, s.seed).map_err(input)?;
        let path = self.cfg.synth_output();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(internal)?;
        }
        let mut guard = OutputGuard::new();
        let file = File::create(guard.track(path.clone())).map_err(|e| internal(format!("{}: {e}", path.display())))?;
        catalog.write_csv(file).map_err(internal)?;
        guard.commit();
        self.log(format!("synth: {} phones -> {}", catalog.len(), path.display()));
        Ok(())
    }

    fn density_spec(&self, pop: &Grid) -> DensitySpec {
        match self.cfg.density.cellsize_deg {
            Some(cs) => DensitySpec::covering(pop, cs),
            None => DensitySpec::from_grid(pop),
        }
    }

    fn simulate(&self) -> Result<(), CliError> {
        let cfg = &self.cfg;
        let pop = self.population()?;
        let catalog = self.catalog(&pop)?;
        let sizes = cfg.n_grid.sizes();
        let sim = Simulation {
            catalog: &catalog,
            earthquake: cfg.earthquake().map_err(input)?,
            velocity: cfg.velocity().map_err(input)?,
            phone: cfg.phone_params(),
            detector: cfg.detector_params(),
        };
        self.log(format!(
            "simulate: {} sizes x {} replicas over a {}-phone catalog (seed {})",
            sizes.len(),
            cfg.replicas,
            catalog.len(),
            cfg.master_seed
        ));
        let campaign = sim.run_campaign(&sizes, cfg.replicas, cfg.master_seed).map_err(|e| match e {
            McError::Network(_) | McError::Detect(_) | McError::NoReplicas => input(e),
            other => internal(other),
        })?;

        let spec = self.density_spec(&pop);
        let bandwidth = cfg.bandwidth();
        let densities: Vec<Option<DensityGrid>> = sizes
            .par_iter()
            .map(|&n| match detection_density(&campaign.detection_locations(n), &spec, bandwidth) {
                Ok(d) => Ok(Some(d)),
                Err(McError::NoDetections) => Ok(None),
                Err(e) => Err(input(format!("density for n={n}: {e}"))),
            })
            .collect::<Result<_, _>>()?;

        let dir = self.out_dir()?;
        let mut guard = OutputGuard::new();
        output::write_runs(&guard.track(dir.join("runs.csv")), &campaign.runs).map_err(internal)?;
        output::write_summary(&guard.track(dir.join("summary.csv")), &campaign.summaries).map_err(internal)?;
        for (n, d) in sizes.iter().zip(&densities) {
            if let Some(d) = d {
                let path = guard.track(dir.join(output::density_file_name(*n)));
                std::fs::write(&path, d.grid.to_ascii()).map_err(|e| internal(format!("{}: {e}", path.display())))?;
            }
        }
        let digest: Vec<(usize, Option<&DensityGrid>)> = sizes.iter().copied().zip(densities.iter().map(Option::as_ref)).collect();
        output::write_density_summary(&guard.track(dir.join("density.csv")), &digest).map_err(internal)?;
        guard.commit();

        for s in &campaign.summaries {
            let fmt = |b: Option<Band>| b.map_or("-".to_string(), |b| format!("{:.2} [{:.2}, {:.2}]", b.mean, b.lo, b.hi));
            self.log(format!(
                "  n={:<5} detect_rate={:.3} delay_s={} distance_km={}",
                s.n,
                s.detect_rate,
                fmt(s.delay_s),
                fmt(s.distance_km)
            ));
        }
        Ok(())
    }

    fn warn(&self, runs_path: Option<&Path>) -> Result<(), CliError> {
        let cfg = &self.cfg;
        let default_runs = cfg.output_dir.join("runs.csv");
        let runs_path = runs_path.unwrap_or(&default_runs);
        if !runs_path.exists() {
            return Err(input(format!("campaign results {} not found; run `simulate` first", runs_path.display())));
        }
        let runs = output::read_runs(runs_path).map_err(input)?;
        let (pop, mmi) = (self.population()?, self.mmi()?);
        let eq = cfg.earthquake().map_err(input)?;
        let vm = cfg.velocity().map_err(input)?;
        let ap = cfg.alert_params();
        let bins = cfg.bins().map_err(input)?;

        let basis = WarningBasis::new(&eq, &vm, &mmi, &pop, &bins).map_err(input)?;
        let rows = warning_vs_n(&runs, &eq, &basis, &ap);

        let n_max = runs.iter().map(|r| r.n).max();
        let mode_stats = match n_max {
            Some(n) => {
                let at_n: Vec<RunResult> = runs.iter().filter(|r| r.n == n).copied().collect();
                match expected_detection(&at_n, &eq, &self.density_spec(&pop), cfg.bandwidth()) {
                    Ok(det) => {
                        let field = warning_field(&det, &eq, &vm, &ap, &pop);
                        Some((n, warning_stats(&field, &mmi, &pop, &bins, cfg.warning.hist_width_s).map_err(input)?))
                    }
                    Err(McError::NoDetections) => None,
                    Err(e) => return Err(input(e)),
                }
            }
            None => None,
        };

        let dir = self.out_dir()?;
        let mut guard = OutputGuard::new();
        output::write_warning_vs_n(&guard.track(dir.join("warning_vs_n.csv")), &rows).map_err(internal)?;
        let (n_mode, stats) = mode_stats.map_or((n_max.unwrap_or(0), Vec::new()), |(n, s)| (n, s));
        output::write_warning_hist(&guard.track(dir.join("warning_hist.csv")), &stats).map_err(internal)?;
        output::write_warning_summary(&guard.track(dir.join("warning_mode.csv")), n_mode, &stats).map_err(internal)?;
        guard.commit();

        if stats.is_empty() {
            self.log("warn: no detections at the largest network size; mode-conditioned outputs are empty");
        }
        for s in &stats {
            match s.summary {
                Some(x) => self.log(format!(
                    "  n={n_mode} MMI {}: {} people, warning p2.5={:.2}s mean={:.2}s p97.5={:.2}s",
                    s.bin, s.population, x.p2_5_s, x.mean_s, x.p97_5_s
                )),
                None => self.log(format!("  n={n_mode} MMI {}: no population", s.bin)),
            }
        }
        Ok(())
    }
}

/// The expected detection for a set of replicas of one network size:
/// located at the mode of the detection-location density and timed at the
/// mean detection delay.
pub fn expected_detection(runs: &[RunResult], eq: &crate::scenario::Earthquake, spec: &DensitySpec, bandwidth: crate::montecarlo::Bandwidth) -> Result<Detection, McError> {
    let detections: Vec<_> = runs.iter().filter_map(|r| r.detection).collect();
    let locations: Vec<_> = detections.iter().map(|d| d.location).collect();
    let density = detection_density(&locations, spec, bandwidth)?;
    let delays: Vec<f64> = detections.iter().map(|d| d.delay_s).collect();
    let mean_delay = Band::from_values(&delays).ok_or(McError::NoDetections)?.mean;
    Ok(Detection {
        time_s: eq.origin_time_s() + mean_delay,
        location: density.mode,
        contributing: Vec::new(),
    })
}
