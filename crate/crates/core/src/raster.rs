//! Single-band georeferenced grids and the ESRI ASCII grid (`.asc`) format.
//!
//! Row 0 is the northernmost row, matching the top-down body order of the
//! file format. Cells equal to the grid's NODATA sentinel are masked.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_NODATA: f64 = -9999.0;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cell ({row}, {col}) is outside a {nrows}x{ncols} grid")]
    OutOfBounds { row: usize, col: usize, nrows: usize, ncols: usize },
    #[error("invalid grid geometry: {0}")]
    Geometry(String),
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Shape and georeferencing of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub nrows: usize,
    pub ncols: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
}

impl GridGeometry {
    pub fn new(nrows: usize, ncols: usize, xllcorner: f64, yllcorner: f64, cellsize: f64) -> Result<Self, RasterError> {
        let g = Self { nrows, ncols, xllcorner, yllcorner, cellsize };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), RasterError> {
        if self.nrows == 0 || self.ncols == 0 {
            return Err(RasterError::Geometry(format!(
                "grid must have at least one cell, got {}x{}",
                self.nrows, self.ncols
            )));
        }
        if !(self.cellsize > 0.0 && self.cellsize.is_finite()) {
            return Err(RasterError::Geometry(format!("cellsize must be positive, got {}", self.cellsize)));
        }
        if !self.xllcorner.is_finite() || !self.yllcorner.is_finite() {
            return Err(RasterError::Geometry("non-finite lower-left corner".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nrows * self.ncols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.ncols + col
    }

    #[inline]
    pub fn contains(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.nrows && (col as usize) < self.ncols
    }

    /// World coordinates of the cell center.
    pub fn cell_to_world(&self, row: usize, col: usize) -> Result<(f64, f64), RasterError> {
        if row >= self.nrows || col >= self.ncols {
            return Err(RasterError::OutOfBounds { row, col, nrows: self.nrows, ncols: self.ncols });
        }
        let x = self.xllcorner + (col as f64 + 0.5) * self.cellsize;
        let y = self.yllcorner + (self.nrows as f64 - row as f64 - 0.5) * self.cellsize;
        Ok((x, y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    geometry: GridGeometry,
    nodata_value: f64,
    values: Vec<f64>,
}

impl RasterGrid {
    /// `values` is row-major, north row first; cells equal to `nodata_value`
    /// are masked and every other value must be finite.
    pub fn new(geometry: GridGeometry, nodata_value: f64, values: Vec<f64>) -> Result<Self, RasterError> {
        geometry.validate()?;
        if values.len() != geometry.len() {
            return Err(RasterError::Length { expected: geometry.len(), got: values.len() });
        }
        if !nodata_value.is_finite() {
            return Err(RasterError::Geometry("NODATA value must be finite".into()));
        }
        if let Some(i) = values.iter().position(|v| *v != nodata_value && !v.is_finite()) {
            return Err(RasterError::NonFinite { row: i / geometry.ncols, col: i % geometry.ncols });
        }
        Ok(Self { geometry, nodata_value, values })
    }

    /// Builds a grid from a cell function; `None` marks NODATA.
    ///
    /// Panics if the function yields a non-finite value.
    pub fn from_fn(geometry: GridGeometry, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Self {
        let mut values = Vec::with_capacity(geometry.len());
        for r in 0..geometry.nrows {
            for c in 0..geometry.ncols {
                let v = f(r, c);
                assert!(v.is_none_or(f64::is_finite), "non-finite value at ({r}, {c})");
                values.push(v.unwrap_or(DEFAULT_NODATA));
            }
        }
        Self { geometry, nodata_value: DEFAULT_NODATA, values }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn nrows(&self) -> usize {
        self.geometry.nrows
    }

    pub fn ncols(&self) -> usize {
        self.geometry.ncols
    }

    pub fn cellsize(&self) -> f64 {
        self.geometry.cellsize
    }

    pub fn nodata_value(&self) -> f64 {
        self.nodata_value
    }

    /// Raw row-major values, NODATA cells holding the sentinel.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values[self.geometry.index(row, col)];
        (v != self.nodata_value).then_some(v)
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> Option<f64> {
        let v = self.values[i];
        (v != self.nodata_value).then_some(v)
    }

    pub fn is_nodata(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_none()
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != self.nodata_value).count()
    }

    pub fn cell_to_world(&self, row: usize, col: usize) -> Result<(f64, f64), RasterError> {
        self.geometry.cell_to_world(row, col)
    }

    /// Same shape and georeferencing.
    pub fn aligned_with(&self, other: &RasterGrid) -> bool {
        self.geometry == other.geometry
    }

    /// Applies `f` to every valid cell, keeping the NODATA mask.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> RasterGrid {
        RasterGrid::from_fn(self.geometry, |r, c| self.get(r, c).map(&mut f))
    }
}

/// Parses an ESRI ASCII grid.
///
/// Header keys are case-insensitive and may appear in any order;
/// `xllcenter`/`yllcenter` are converted to corner coordinates and
/// `NODATA_value` defaults to -9999.
pub fn read_asc<R: BufRead>(reader: R) -> Result<RasterGrid, RasterError> {
    let mut ncols = None;
    let mut nrows = None;
    let mut x = None;
    let mut y = None;
    let mut cellsize = None;
    let mut nodata = None;
    let mut centered_x = false;
    let mut centered_y = false;

    let mut lines = reader.lines().enumerate();
    let mut first_body: Option<(usize, String)> = None;

    for (idx, line) in lines.by_ref() {
        let line = line?;
        let lineno = idx + 1;
        let mut tokens = line.split_whitespace();
        let Some(key) = tokens.next() else { continue };
        if key.parse::<f64>().is_ok() {
            first_body = Some((lineno, line));
            break;
        }
        let value = tokens
            .next()
            .ok_or_else(|| RasterError::Parse { line: lineno, msg: format!("missing value for `{key}`") })?;
        if tokens.next().is_some() {
            return Err(RasterError::Parse { line: lineno, msg: format!("trailing tokens after `{key}`") });
        }
        let num = |v: &str| -> Result<f64, RasterError> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| RasterError::Parse { line: lineno, msg: format!("invalid number `{v}` for `{key}`") })
        };
        let count = |v: &str| -> Result<usize, RasterError> {
            v.parse::<usize>()
                .map_err(|_| RasterError::Parse { line: lineno, msg: format!("invalid count `{v}` for `{key}`") })
        };
        let slot_taken = || RasterError::Parse { line: lineno, msg: format!("duplicate header key `{key}`") };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols.replace(count(value)?).map_or(Ok(()), |_| Err(slot_taken()))?,
            "nrows" => nrows.replace(count(value)?).map_or(Ok(()), |_| Err(slot_taken()))?,
            "xllcorner" | "xllcenter" => {
                centered_x = key.eq_ignore_ascii_case("xllcenter");
                x.replace(num(value)?).map_or(Ok(()), |_| Err(slot_taken()))?
            }
            "yllcorner" | "yllcenter" => {
                centered_y = key.eq_ignore_ascii_case("yllcenter");
                y.replace(num(value)?).map_or(Ok(()), |_| Err(slot_taken()))?
            }
            "cellsize" => cellsize.replace(num(value)?).map_or(Ok(()), |_| Err(slot_taken()))?,
            "nodata_value" => nodata.replace(num(value)?).map_or(Ok(()), |_| Err(slot_taken()))?,
            _ => {
                return Err(RasterError::Parse { line: lineno, msg: format!("unknown header key `{key}`") });
            }
        }
    }

    let header_line = first_body.as_ref().map_or(1, |(l, _)| *l);
    let missing = |what: &str| RasterError::Parse { line: header_line, msg: format!("missing header key `{what}`") };
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let mut x = x.ok_or_else(|| missing("xllcorner"))?;
    let mut y = y.ok_or_else(|| missing("yllcorner"))?;
    if centered_x {
        x -= cellsize / 2.0;
    }
    if centered_y {
        y -= cellsize / 2.0;
    }
    let nodata = nodata.unwrap_or(DEFAULT_NODATA);
    let geometry = GridGeometry::new(nrows, ncols, x, y, cellsize)
        .map_err(|e| RasterError::Parse { line: header_line, msg: e.to_string() })?;

    let expected = geometry.len();
    let mut values = Vec::with_capacity(expected);
    let mut last_line = header_line;
    let push_line = |lineno: usize, line: &str, values: &mut Vec<f64>| -> Result<(), RasterError> {
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| RasterError::Parse { line: lineno, msg: format!("non-numeric token `{tok}`") })?;
            if v != nodata && !v.is_finite() {
                return Err(RasterError::Parse { line: lineno, msg: format!("non-finite value `{tok}`") });
            }
            if values.len() == expected {
                return Err(RasterError::Parse {
                    line: lineno,
                    msg: format!("more than the expected {expected} cell values"),
                });
            }
            values.push(v);
        }
        Ok(())
    };
    if let Some((lineno, line)) = first_body {
        push_line(lineno, &line, &mut values)?;
    }
    for (idx, line) in lines {
        let line = line?;
        last_line = idx + 1;
        push_line(last_line, &line, &mut values)?;
    }
    if values.len() != expected {
        return Err(RasterError::Parse {
            line: last_line,
            msg: format!("expected {expected} cell values, found {}", values.len()),
        });
    }
    RasterGrid::new(geometry, nodata, values)
}

/// Writes an ESRI ASCII grid with `precision` decimal digits per valid cell.
pub fn write_asc<W: Write>(grid: &RasterGrid, precision: usize, writer: W) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    let g = grid.geometry();
    writeln!(w, "ncols         {}", g.ncols)?;
    writeln!(w, "nrows         {}", g.nrows)?;
    writeln!(w, "xllcorner     {}", g.xllcorner)?;
    writeln!(w, "yllcorner     {}", g.yllcorner)?;
    writeln!(w, "cellsize      {}", g.cellsize)?;
    writeln!(w, "NODATA_value  {}", grid.nodata_value())?;
    let nodata = grid.nodata_value().to_string();
    let mut line = String::new();
    for r in 0..g.nrows {
        line.clear();
        for c in 0..g.ncols {
            if c > 0 {
                line.push(' ');
            }
            match grid.get(r, c) {
                Some(v) => {
                    use std::fmt::Write as _;
                    let _ = write!(line, "{v:.precision$}");
                }
                None => line.push_str(&nodata),
            }
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn read_asc_path(path: impl AsRef<Path>) -> Result<RasterGrid, RasterError> {
    read_asc(BufReader::new(File::open(path)?))
}

pub fn write_asc_path(grid: &RasterGrid, precision: usize, path: impl AsRef<Path>) -> io::Result<()> {
    write_asc(grid, precision, File::create(path)?)
}
