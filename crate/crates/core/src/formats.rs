//! Text formats shared by the pipeline stages.
//!
//! A matrix file is comma-separated text. Leading `#` lines carry the grid
//! geometry and the min-max record of every column:
//!
//! ```text
//! # soilsamp-matrix 1
//! # grid nrows=100 ncols=130 xllcorner=0 yllcorner=0 cellsize=2.5
//! # norm name=slope min=0.001 max=0.31 degenerate=false
//! slope,aspect,depressions,accumulation,twi,x,y,grid_row,grid_col
//! 0.25,0.5,0,0.001,0.4,0,1,0,0
//! ```
//!
//! followed by one row per pixel: normalized feature values, then the
//! pixel's grid row and column. Floats are written in shortest round-trip
//! form, so reading back is lossless.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde_json::json;
use thiserror::Error;

use crate::maxvol::TallMatrix;
use crate::raster::GridGeometry;
use crate::samplers::SampleDesign;
use crate::terrain::{FeatureMatrix, NormRecord, TerrainError};

const MAGIC: &str = "soilsamp-matrix 1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

pub fn write_matrix<W: Write>(fm: &FeatureMatrix, out: W) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    let g = fm.geometry();
    writeln!(w, "# {MAGIC}")?;
    writeln!(
        w,
        "# grid nrows={} ncols={} xllcorner={} yllcorner={} cellsize={}",
        g.nrows, g.ncols, g.xllcorner, g.yllcorner, g.cellsize
    )?;
    for r in fm.norm_records() {
        writeln!(w, "# norm name={} min={} max={} degenerate={}", r.name, r.min, r.max, r.degenerate)?;
    }
    writeln!(w, "{},grid_row,grid_col", fm.feature_names().join(","))?;
    let mut line = String::new();
    for (i, &(r, c)) in fm.pixel_index().iter().enumerate() {
        line.clear();
        for j in 0..fm.ncols() {
            use std::fmt::Write as _;
            write!(line, "{},", fm.value(i, j)).unwrap();
        }
        writeln!(w, "{line}{r},{c}")?;
    }
    w.flush()
}

fn key_values(line: usize, fields: &[&str]) -> Result<HashMap<String, String>, FormatError> {
    fields
        .iter()
        .map(|f| {
            f.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| parse_err(line, format!("expected key=value, got `{f}`")))
        })
        .collect()
}

fn take<T: std::str::FromStr>(kv: &HashMap<String, String>, key: &str, line: usize) -> Result<T, FormatError> {
    let raw = kv.get(key).ok_or_else(|| parse_err(line, format!("missing `{key}`")))?;
    raw.parse().map_err(|_| parse_err(line, format!("bad value for `{key}`: `{raw}`")))
}

pub fn read_matrix<R: BufRead>(reader: R) -> Result<FeatureMatrix, FormatError> {
    let mut geometry = None;
    let mut norms: Vec<NormRecord> = Vec::new();
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<f64> = Vec::new();
    let mut pixels = Vec::new();

    for (idx, text) in reader.lines().enumerate() {
        let text = text?;
        let line = idx + 1;
        let trimmed = text.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            let fields: Vec<&str> = meta.split_whitespace().collect();
            match fields.first().copied() {
                Some("grid") => {
                    let kv = key_values(line, &fields[1..])?;
                    let g = GridGeometry::new(
                        take(&kv, "nrows", line)?,
                        take(&kv, "ncols", line)?,
                        take(&kv, "xllcorner", line)?,
                        take(&kv, "yllcorner", line)?,
                        take(&kv, "cellsize", line)?,
                    )
                    .map_err(|e| parse_err(line, e.to_string()))?;
                    geometry = Some(g);
                }
                Some("norm") => {
                    let kv = key_values(line, &fields[1..])?;
                    norms.push(NormRecord {
                        name: take(&kv, "name", line)?,
                        min: take(&kv, "min", line)?,
                        max: take(&kv, "max", line)?,
                        degenerate: take(&kv, "degenerate", line)?,
                    });
                }
                _ => {}
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let Some(header) = &names else {
            if fields.len() < 4 || fields[fields.len() - 2..] != ["grid_row", "grid_col"] {
                return Err(parse_err(line, "header must list the features, then grid_row,grid_col"));
            }
            names = Some(fields[..fields.len() - 2].iter().map(|s| s.to_string()).collect());
            continue;
        };
        let n = header.len();
        if fields.len() != n + 2 {
            return Err(parse_err(line, format!("expected {} fields, found {}", n + 2, fields.len())));
        }
        for f in &fields[..n] {
            let v: f64 = f.parse().map_err(|_| parse_err(line, format!("bad number `{f}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value `{f}`")));
            }
            rows.push(v);
        }
        let r: usize = fields[n].parse().map_err(|_| parse_err(line, format!("bad grid_row `{}`", fields[n])))?;
        let c: usize =
            fields[n + 1].parse().map_err(|_| parse_err(line, format!("bad grid_col `{}`", fields[n + 1])))?;
        pixels.push((r, c));
    }

    let names = names.ok_or_else(|| parse_err(0, "missing header line"))?;
    let geometry = geometry.ok_or_else(|| parse_err(0, "missing `# grid` metadata line"))?;
    if norms.is_empty() {
        norms = names.iter().map(|n| NormRecord { name: n.clone(), min: 0.0, max: 1.0, degenerate: false }).collect();
    }
    let data = DMatrix::from_row_slice(pixels.len(), names.len(), &rows);
    let matrix = TallMatrix::new(data).map_err(TerrainError::from)?;
    Ok(FeatureMatrix::new(matrix, pixels, names, norms, geometry)?)
}

pub fn write_matrix_path(fm: &FeatureMatrix, path: impl AsRef<Path>) -> io::Result<()> {
    write_matrix(fm, File::create(path)?)
}

pub fn read_matrix_path(path: impl AsRef<Path>) -> Result<FeatureMatrix, FormatError> {
    read_matrix(BufReader::new(File::open(path)?))
}

/// Columns `rank, matrix_row, grid_row, grid_col, world_x, world_y`, rank
/// counting from 1 in selection order.
pub fn write_points_csv<W: Write>(design: &SampleDesign, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "matrix_row", "grid_row", "grid_col", "world_x", "world_y"])?;
    for (rank, p) in design.points.iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            p.matrix_row.to_string(),
            p.grid_row.to_string(),
            p.grid_col.to_string(),
            p.world_x.to_string(),
            p.world_y.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(rank, matrix_row, grid_row, grid_col, world_x, world_y)` per point.
pub type PointRow = (usize, usize, usize, usize, f64, f64);

pub fn read_points_csv<R: io::Read>(input: R) -> csv::Result<Vec<PointRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// GeoJSON FeatureCollection of the points, with the CSV columns as
/// properties and the design parameters as foreign members.
pub fn points_geojson(design: &SampleDesign) -> serde_json::Value {
    let features: Vec<_> = design
        .points
        .iter()
        .enumerate()
        .map(|(rank, p)| {
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [p.world_x, p.world_y] },
                "properties": {
                    "rank": rank + 1,
                    "matrix_row": p.matrix_row,
                    "grid_row": p.grid_row,
                    "grid_col": p.grid_col,
                },
            })
        })
        .collect();
    json!({
        "type": "FeatureCollection",
        "method": design.method,
        "epsilon": design.epsilon,
        "seed": design.seed,
        "features": features,
    })
}

pub fn write_points_geojson<W: Write>(design: &SampleDesign, out: W) -> Result<(), FormatError> {
    let mut w = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut w, &points_geojson(design))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
