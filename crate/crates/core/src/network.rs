//! Candidate phone catalogs, reproducible random substreams and size-n network sampling.

use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geo::{GeoPoint, Grid};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("line {line}: malformed catalog row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: coordinate ({lat}, {lon}) out of range")]
    OutOfRangeCoordinate { line: u64, lat: f64, lon: f64 },
    #[error("catalog has no points")]
    EmptyCatalog,
    #[error("population grid has no cell with population > 0")]
    AllZeroPopulation,
    #[error("network size {n} exceeds catalog size {catalog}")]
    NTooLarge { n: usize, catalog: usize },
    #[error("network size must be at least 1")]
    NZero,
    #[error("catalog I/O: {0}")]
    Io(#[from] csv::Error),
}

/// Candidate phone locations.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    points: Vec<GeoPoint>,
    source: String,
}

impl Catalog {
    pub fn new(points: Vec<GeoPoint>, source: impl Into<String>) -> Result<Self, NetworkError> {
        if points.is_empty() {
            return Err(NetworkError::EmptyCatalog);
        }
        Ok(Catalog {
            points,
            source: source.into(),
        })
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Writes the catalog as `lat,lon` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), NetworkError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lat", "lon"])?;
        for p in &self.points {
            w.write_record([p.lat().to_string(), p.lon().to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Reads a `lat,lon` CSV catalog, keeping file order.
pub fn load_catalog<R: Read>(reader: R, source: impl Into<String>) -> Result<Catalog, NetworkError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let names: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    if names != ["lat", "lon"] {
        return Err(NetworkError::MalformedRow {
            line: 1,
            reason: format!("expected header `lat,lon`, found `{}`", names.join(",")),
        });
    }

    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(NetworkError::MalformedRow {
                line,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let field = |i: usize| {
            record[i].parse::<f64>().map_err(|_| NetworkError::MalformedRow {
                line,
                reason: format!("`{}` is not a number", &record[i]),
            })
        };
        let (lat, lon) = (field(0)?, field(1)?);
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(NetworkError::OutOfRangeCoordinate { line, lat, lon });
        }
        let p = GeoPoint::new(lat, lon).map_err(|_| NetworkError::OutOfRangeCoordinate { line, lat, lon })?;
        points.push(p);
    }
    Catalog::new(points, source)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A ChaCha8 generator keyed by a 64-bit value, on one of its 2^64 streams.
fn keyed_rng(key: u64, stream: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    let mut state = key;
    for chunk in seed.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng
}

/// Independent uses of one replica's randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Network = 0,
    Triggers = 1,
}

/// Identifies the random substream of one Monte Carlo replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub n: usize,
    pub replica: usize,
}

impl SeedSpec {
    pub fn new(master_seed: u64, n: usize, replica: usize) -> Self {
        SeedSpec {
            master_seed,
            n,
            replica,
        }
    }

    fn key(&self) -> u64 {
        let h = splitmix64(self.master_seed);
        let h = splitmix64(h ^ (self.n as u64).wrapping_mul(0xd6e8_feb8_6659_fd93));
        splitmix64(h ^ (self.replica as u64).wrapping_mul(0xa076_1d64_78bd_642f))
    }

    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        keyed_rng(self.key(), stream as u64)
    }
}

/// The active subset of a catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    points: Vec<GeoPoint>,
    catalog_indices: Vec<usize>,
}

impl Network {
    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn catalog_indices(&self) -> &[usize] {
        &self.catalog_indices
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// A network made of every given point, in order. Useful for fixed layouts.
    pub fn from_points(points: Vec<GeoPoint>) -> Self {
        let catalog_indices = (0..points.len()).collect();
        Network {
            points,
            catalog_indices,
        }
    }
}

/// Draws `n` distinct catalog points, uniformly over all n-subsets
/// (partial Fisher-Yates shuffle of the index array).
pub fn sample_network(cat: &Catalog, n: usize, seed: SeedSpec) -> Result<Network, NetworkError> {
    if n == 0 {
        return Err(NetworkError::NZero);
    }
    let total = cat.len();
    if n > total {
        return Err(NetworkError::NTooLarge { n, catalog: total });
    }
    let mut rng = seed.rng(Stream::Network);
    let mut indices: Vec<usize> = (0..total).collect();
    for i in 0..n {
        let j = rng.random_range(i..total);
        indices.swap(i, j);
    }
    indices.truncate(n);
    Ok(Network {
        points: indices.iter().map(|&i| cat.points[i]).collect(),
        catalog_indices: indices,
    })
}

/// Synthesizes a catalog of `count` phones placed where people live.
///
/// Cells are drawn with replacement, with probability proportional to their
/// population; each point is then placed uniformly at random inside its cell.
pub fn synth_catalog(pop: &Grid, count: usize, seed: u64) -> Result<Catalog, NetworkError> {
    if count == 0 {
        return Err(NetworkError::EmptyCatalog);
    }
    let cells: Vec<(usize, usize, f64)> = pop.cells().filter(|c| c.2 > 0.0).collect();
    let weights = WeightedIndex::new(cells.iter().map(|c| c.2)).map_err(|_| NetworkError::AllZeroPopulation)?;

    let mut rng = keyed_rng(splitmix64(seed), 0);
    let cs = pop.cellsize();
    let points = (0..count)
        .map(|_| {
            let (row, col, _) = cells[weights.sample(&mut rng)];
            let (u, v): (f64, f64) = (rng.random(), rng.random());
            let lon = pop.xll() + (col as f64 + u) * cs;
            let lat = pop.yll() + ((pop.nrows() - 1 - row) as f64 + v) * cs;
            GeoPoint::new(lat.clamp(-90.0, 90.0), lon).expect("point inside a finite grid")
        })
        .collect();
    Catalog::new(points, format!("synthetic (seed {seed}, {count} points)"))
}
