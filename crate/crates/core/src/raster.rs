//! Plain-text raster format used for per-level outputs and initial
//! conditions.
//!
//! ```text
//! ni nj dx x0 y0
//! v(0,0) v(1,0) ... v(ni-1,0)
//! ...
//! v(0,nj-1) ...     v(ni-1,nj-1)
//! ```
//!
//! The header gives the cell counts, the cell size in meters and the
//! lower-left corner in meters. Rows start at `j = 0` (the southern edge),
//! values are whitespace-separated and written in shortest round-trip
//! exponent form so that identical values always give identical bytes.
//! Cells not covered by any block are `NaN`.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster header must be `ni nj dx x0 y0`: {0}")]
    Header(String),
    #[error("raster value {index}: cannot parse {token:?}")]
    Value { index: usize, token: String },
    #[error("raster has {found} values, header promises {expected}")]
    Count { found: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub ni: usize,
    pub nj: usize,
    pub dx: f64,
    pub x0: f64,
    pub y0: f64,
    pub values: Vec<f64>,
}

impl Raster {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.ni + i]
    }

    /// Value of the raster cell containing the point, if any.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let fi = ((x - self.x0) / self.dx).floor();
        let fj = ((y - self.y0) / self.dx).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.ni as f64 || fj >= self.nj as f64 {
            return None;
        }
        Some(self.get(fi as usize, fj as usize))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 12 + 64);
        writeln!(s, "{} {} {} {} {}", self.ni, self.nj, self.dx, self.x0, self.y0).unwrap();
        for row in self.values.chunks(self.ni.max(1)) {
            let mut first = true;
            for v in row {
                if !first {
                    s.push(' ');
                }
                write!(s, "{v:e}").unwrap();
                first = false;
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, RasterError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let fields: Vec<&str> = header.split_whitespace().collect();
        let bad = || RasterError::Header(header.to_string());
        if fields.len() != 5 {
            return Err(bad());
        }
        let ni: usize = fields[0].parse().map_err(|_| bad())?;
        let nj: usize = fields[1].parse().map_err(|_| bad())?;
        let dx: f64 = fields[2].parse().map_err(|_| bad())?;
        let x0: f64 = fields[3].parse().map_err(|_| bad())?;
        let y0: f64 = fields[4].parse().map_err(|_| bad())?;
        let values = parse_values(lines.flat_map(str::split_whitespace))?;
        if values.len() != ni * nj {
            return Err(RasterError::Count {
                found: values.len(),
                expected: ni * nj,
            });
        }
        Ok(Self {
            ni,
            nj,
            dx,
            x0,
            y0,
            values,
        })
    }

    pub fn read(path: &Path) -> Result<Self, RasterError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_text())
    }
}

/// Header-less whitespace-separated values, as used for block bathymetry.
pub fn read_plain_values(path: &Path) -> Result<Vec<f64>, RasterError> {
    let text = std::fs::read_to_string(path)?;
    parse_values(text.split_whitespace())
}

fn parse_values<'a>(tokens: impl Iterator<Item = &'a str>) -> Result<Vec<f64>, RasterError> {
    tokens
        .enumerate()
        .map(|(index, t)| {
            t.parse::<f64>().map_err(|_| RasterError::Value {
                index,
                token: t.to_string(),
            })
        })
        .collect()
}
