use std::fmt::Write as _;

use thiserror::Error;

use super::GeoPoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("expected {expected} values ({nrows} rows x {ncols} cols), found {found}")]
    DimensionMismatch {
        nrows: usize,
        ncols: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: non-finite value `{token}`")]
    NonFiniteValue { line: usize, token: String },
    #[error("line {line}: cannot parse `{token}` as a number")]
    BadNumber { line: usize, token: String },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("cell ({row}, {col}) outside a {nrows}x{ncols} grid")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("cell ({row}, {col}) holds {value}, outside the allowed range {range}")]
    ValueOutOfRange {
        row: usize,
        col: usize,
        value: f64,
        range: &'static str,
    },
}

/// A regular lat/lon raster.
///
/// `values` is row-major with row 0 the northernmost row, as in the ESRI
/// ASCII layout. A cell equal to `nodata` carries no value.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    ncols: usize,
    nrows: usize,
    xll: f64,
    yll: f64,
    cellsize: f64,
    nodata: f64,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self, GridError> {
        if ncols == 0 || nrows == 0 {
            return Err(GridError::Geometry(format!(
                "grid must have at least one cell, got {nrows}x{ncols}"
            )));
        }
        if !(cellsize.is_finite() && cellsize > 0.0) {
            return Err(GridError::Geometry(format!("cellsize {cellsize} must be > 0")));
        }
        if !xll.is_finite() || !yll.is_finite() || !nodata.is_finite() {
            return Err(GridError::Geometry(
                "corner coordinates and nodata must be finite".into(),
            ));
        }
        let expected = ncols * nrows;
        if values.len() != expected {
            return Err(GridError::DimensionMismatch {
                nrows,
                ncols,
                expected,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFiniteValue {
                line: 0,
                token: format!("{} at cell {}", values[i], i),
            });
        }
        Ok(Grid {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata,
            values,
        })
    }

    /// A grid with the same geometry and every cell set to `value`.
    pub fn filled_like(&self, value: f64) -> Grid {
        Grid {
            values: vec![value; self.values.len()],
            ..self.clone()
        }
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn xll(&self) -> f64 {
        self.xll
    }

    pub fn yll(&self) -> f64 {
        self.yll
    }

    pub fn cellsize(&self) -> f64 {
        self.cellsize
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata
    }

    /// Value at `(row, col)`, `None` for nodata.
    pub fn get(&self, row: usize, col: usize) -> Result<Option<f64>, GridError> {
        self.check_index(row, col)?;
        let v = self.values[row * self.ncols + col];
        Ok((!self.is_nodata(v)).then_some(v))
    }

    /// Iterates over `(row, col, value)` for every cell that is not nodata.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !self.is_nodata(**v))
            .map(|(i, v)| (i / self.ncols, i % self.ncols, *v))
    }

    fn check_index(&self, row: usize, col: usize) -> Result<(), GridError> {
        if row >= self.nrows || col >= self.ncols {
            return Err(GridError::IndexOutOfRange {
                row,
                col,
                nrows: self.nrows,
                ncols: self.ncols,
            });
        }
        Ok(())
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Result<GeoPoint, GridError> {
        self.check_index(row, col)?;
        Ok(self.center_unchecked(row, col))
    }

    pub(crate) fn center_unchecked(&self, row: usize, col: usize) -> GeoPoint {
        let lon = self.xll + (col as f64 + 0.5) * self.cellsize;
        let lat = self.yll + ((self.nrows - 1 - row) as f64 + 0.5) * self.cellsize;
        GeoPoint::new(lat.clamp(-90.0, 90.0), lon).expect("finite grid coordinates")
    }

    /// Row and column of the cell containing `p`.
    ///
    /// A point on the edge shared by two cells belongs to the cell with the
    /// larger row (or column) index. Consequently the southern and eastern
    /// outer boundaries fall outside the grid.
    pub fn locate(&self, p: GeoPoint) -> Option<(usize, usize)> {
        let x = (p.lon() - self.xll) / self.cellsize;
        let y = (p.lat() - self.yll) / self.cellsize;
        let col = x.floor();
        // counted from the south; ceil - 1 sends an edge point to the southern cell
        let row_from_south = y.ceil() - 1.0;
        if col < 0.0 || col >= self.ncols as f64 || row_from_south < 0.0 {
            return None;
        }
        if row_from_south >= self.nrows as f64 {
            return None;
        }
        let row = self.nrows - 1 - row_from_south as usize;
        Some((row, col as usize))
    }

    /// Nearest-cell lookup; `None` outside the grid or on a nodata cell.
    pub fn sample_at(&self, p: GeoPoint) -> Option<f64> {
        let (row, col) = self.locate(p)?;
        let v = self.values[row * self.ncols + col];
        (!self.is_nodata(v)).then_some(v)
    }

    /// Checks population semantics: every value is ≥ 0.
    pub fn validate_population(&self) -> Result<(), GridError> {
        self.validate_range(0.0, f64::INFINITY, "[0, inf)")
    }

    /// Checks intensity semantics: every value lies in [0, 12].
    pub fn validate_mmi(&self) -> Result<(), GridError> {
        self.validate_range(0.0, 12.0, "[0, 12]")
    }

    fn validate_range(&self, lo: f64, hi: f64, range: &'static str) -> Result<(), GridError> {
        match self.cells().find(|&(_, _, v)| v < lo || v > hi) {
            Some((row, col, value)) => Err(GridError::ValueOutOfRange {
                row,
                col,
                value,
                range,
            }),
            None => Ok(()),
        }
    }

    /// Serializes as an ESRI ASCII grid. Values are written with shortest
    /// round-trip formatting, so parsing the output reproduces the grid.
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 8 + 128);
        let _ = writeln!(out, "ncols {}", self.ncols);
        let _ = writeln!(out, "nrows {}", self.nrows);
        let _ = writeln!(out, "xllcorner {}", self.xll);
        let _ = writeln!(out, "yllcorner {}", self.yll);
        let _ = writeln!(out, "cellsize {}", self.cellsize);
        let _ = writeln!(out, "NODATA_value {}", self.nodata);
        for row in self.values.chunks(self.ncols) {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Default)]
struct Header {
    ncols: Option<usize>,
    nrows: Option<usize>,
    xll: Option<f64>,
    yll: Option<f64>,
    // set when the file gives xllcenter/yllcenter instead of corners
    x_is_center: bool,
    y_is_center: bool,
    cellsize: Option<f64>,
    nodata: Option<f64>,
}

fn malformed(line: usize, reason: impl Into<String>) -> GridError {
    GridError::MalformedHeader {
        line,
        reason: reason.into(),
    }
}

fn set_once<T>(slot: &mut Option<T>, value: T, key: &str, line: usize) -> Result<(), GridError> {
    if slot.is_some() {
        return Err(malformed(line, format!("duplicate header `{key}`")));
    }
    *slot = Some(value);
    Ok(())
}

fn starts_like_number(token: &str) -> bool {
    token
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.'))
        || token.eq_ignore_ascii_case("nan")
        || token.to_ascii_lowercase().starts_with("inf")
}

/// Parses an ESRI ASCII grid.
///
/// Header keys are case-insensitive. `ncols`, `nrows`, `xllcorner`,
/// `yllcorner`, `cellsize` and `NODATA_value` are all required
/// (`xllcenter`/`yllcenter` are accepted in place of the corners). The body
/// must hold exactly `nrows * ncols` numbers; line breaks inside the body are
/// not significant.
pub fn parse_ascii_grid(text: &str) -> Result<Grid, GridError> {
    let mut header = Header::default();
    let mut lines = text.lines().enumerate().peekable();

    while let Some(&(idx, line)) = lines.peek() {
        let lineno = idx + 1;
        let mut tokens = line.split_whitespace();
        let Some(key) = tokens.next() else {
            lines.next();
            continue;
        };
        if starts_like_number(key) {
            break;
        }
        lines.next();
        let value = tokens
            .next()
            .ok_or_else(|| malformed(lineno, format!("header `{key}` has no value")))?;
        if tokens.next().is_some() {
            return Err(malformed(lineno, format!("trailing tokens after `{key}`")));
        }
        let as_usize = || {
            value
                .parse::<usize>()
                .map_err(|_| malformed(lineno, format!("`{key}` needs a positive integer, got `{value}`")))
        };
        let as_f64 = || {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(lineno, format!("`{key}` needs a finite number, got `{value}`")))
        };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => set_once(&mut header.ncols, as_usize()?, key, lineno)?,
            "nrows" => set_once(&mut header.nrows, as_usize()?, key, lineno)?,
            "xllcorner" => set_once(&mut header.xll, as_f64()?, key, lineno)?,
            "yllcorner" => set_once(&mut header.yll, as_f64()?, key, lineno)?,
            "xllcenter" => {
                set_once(&mut header.xll, as_f64()?, key, lineno)?;
                header.x_is_center = true;
            }
            "yllcenter" => {
                set_once(&mut header.yll, as_f64()?, key, lineno)?;
                header.y_is_center = true;
            }
            "cellsize" => set_once(&mut header.cellsize, as_f64()?, key, lineno)?,
            "nodata_value" => set_once(&mut header.nodata, as_f64()?, key, lineno)?,
            _ => return Err(malformed(lineno, format!("unknown header `{key}`"))),
        }
    }

    let body_line = lines.peek().map_or(text.lines().count() + 1, |(i, _)| i + 1);
    let missing = |name: &str| malformed(body_line, format!("missing header `{name}`"));
    let ncols = header.ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = header.nrows.ok_or_else(|| missing("nrows"))?;
    let cellsize = header.cellsize.ok_or_else(|| missing("cellsize"))?;
    let mut xll = header.xll.ok_or_else(|| missing("xllcorner"))?;
    let mut yll = header.yll.ok_or_else(|| missing("yllcorner"))?;
    let nodata = header.nodata.ok_or_else(|| missing("NODATA_value"))?;
    if header.x_is_center {
        xll -= cellsize / 2.0;
    }
    if header.y_is_center {
        yll -= cellsize / 2.0;
    }

    let mut values = Vec::with_capacity(ncols.saturating_mul(nrows).min(1 << 26));
    for (idx, line) in lines {
        for token in line.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| GridError::BadNumber {
                line: idx + 1,
                token: token.to_string(),
            })?;
            if !v.is_finite() {
                return Err(GridError::NonFiniteValue {
                    line: idx + 1,
                    token: token.to_string(),
                });
            }
            values.push(v);
        }
    }

    Grid::new(ncols, nrows, xll, yll, cellsize, nodata, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TWO_BY_TWO: &str = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3 4\n";

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn parses_two_by_two() {
        let g = parse_ascii_grid(TWO_BY_TWO).unwrap();
        assert_eq!((g.ncols(), g.nrows()), (2, 2));
        assert_eq!(g.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(g.nodata(), -9999.0);
    }

    #[test]
    fn headers_are_case_insensitive() {
        let text = TWO_BY_TWO
            .replace("ncols", "NCOLS")
            .replace("NODATA_value", "nodata_VALUE");
        assert!(parse_ascii_grid(&text).is_ok());
    }

    #[test]
    fn center_headers_shift_to_corners() {
        let text = TWO_BY_TWO
            .replace("xllcorner 0", "xllcenter 0.5")
            .replace("yllcorner 0", "yllcenter 0.5");
        let g = parse_ascii_grid(&text).unwrap();
        assert_eq!((g.xll(), g.yll()), (0.0, 0.0));
    }

    #[test]
    fn nodata_cells_are_skipped() {
        let text = TWO_BY_TWO.replace("3 4", "-9999 4");
        let g = parse_ascii_grid(&text).unwrap();
        assert_eq!(g.get(1, 0).unwrap(), None);
        assert_eq!(g.cells().count(), 3);
        assert_eq!(g.cells().map(|c| c.2).sum::<f64>(), 7.0);
    }

    #[test]
    fn wrong_value_count() {
        let text = TWO_BY_TWO.replace("3 4\n", "3\n");
        assert!(matches!(
            parse_ascii_grid(&text),
            Err(GridError::DimensionMismatch { expected: 4, found: 3, .. })
        ));
    }

    #[test]
    fn missing_and_duplicate_headers() {
        let missing = TWO_BY_TWO.replace("cellsize 1\n", "");
        assert!(matches!(
            parse_ascii_grid(&missing),
            Err(GridError::MalformedHeader { .. })
        ));
        let dup = TWO_BY_TWO.replace("nrows 2\n", "nrows 2\nNROWS 2\n");
        assert!(matches!(
            parse_ascii_grid(&dup),
            Err(GridError::MalformedHeader { line: 3, .. })
        ));
    }

    #[test]
    fn non_finite_body_value() {
        let text = TWO_BY_TWO.replace("3 4", "3 inf");
        assert!(matches!(
            parse_ascii_grid(&text),
            Err(GridError::NonFiniteValue { line: 8, .. })
        ));
        let text = TWO_BY_TWO.replace("3 4", "3 x");
        assert!(matches!(
            parse_ascii_grid(&text),
            Err(GridError::BadNumber { line: 8, .. })
        ));
    }

    #[test]
    fn cell_centers() {
        let g = parse_ascii_grid(TWO_BY_TWO).unwrap();
        assert_eq!(g.cell_center(1, 0).unwrap(), pt(0.5, 0.5));
        assert_eq!(g.cell_center(0, 1).unwrap(), pt(1.5, 1.5));
        assert!(matches!(
            g.cell_center(2, 0),
            Err(GridError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn sample_at_centers_and_outside() {
        let g = parse_ascii_grid(TWO_BY_TWO).unwrap();
        for row in 0..2 {
            for col in 0..2 {
                let c = g.cell_center(row, col).unwrap();
                assert_eq!(g.sample_at(c), g.get(row, col).unwrap());
            }
        }
        assert_eq!(g.sample_at(pt(0.5, 2.5)), None);
        assert_eq!(g.sample_at(pt(-0.5, 0.5)), None);
        assert_eq!(g.sample_at(pt(2.5, 0.5)), None);
    }

    #[test]
    fn edge_points_go_to_upper_index() {
        let g = parse_ascii_grid(TWO_BY_TWO).unwrap();
        // vertical edge between col 0 and col 1 in the top row
        assert_eq!(g.locate(pt(1.5, 1.0)), Some((0, 1)));
        // horizontal edge between row 0 and row 1 in the left column
        assert_eq!(g.locate(pt(1.0, 0.5)), Some((1, 0)));
        // shared corner of all four cells
        assert_eq!(g.locate(pt(1.0, 1.0)), Some((1, 1)));
        assert_eq!(g.sample_at(pt(1.0, 1.0)), Some(4.0));
    }

    #[test]
    fn range_validation() {
        let g = parse_ascii_grid(TWO_BY_TWO).unwrap();
        assert!(g.validate_population().is_ok());
        assert!(g.validate_mmi().is_ok());
        let hot = parse_ascii_grid(&TWO_BY_TWO.replace("3 4", "3 13")).unwrap();
        assert!(matches!(
            hot.validate_mmi(),
            Err(GridError::ValueOutOfRange { row: 1, col: 1, .. })
        ));
        let neg = parse_ascii_grid(&TWO_BY_TWO.replace("3 4", "-3 4")).unwrap();
        assert!(neg.validate_population().is_err());
    }

    fn any_grid() -> impl Strategy<Value = Grid> {
        (1usize..6, 1usize..6).prop_flat_map(|(ncols, nrows)| {
            (
                -180.0f64..170.0,
                -80.0f64..70.0,
                1e-4f64..2.0,
                prop::collection::vec(
                    prop_oneof![Just(-9999.0), -1e6f64..1e6],
                    ncols * nrows,
                ),
            )
                .prop_map(move |(xll, yll, cs, values)| {
                    Grid::new(ncols, nrows, xll, yll, cs, -9999.0, values).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn ascii_round_trip(g in any_grid()) {
            let back = parse_ascii_grid(&g.to_ascii()).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
