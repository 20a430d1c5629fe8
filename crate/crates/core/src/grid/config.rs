//! TOML scenario files.
//!
//! ```toml
//! [simulation]
//! dt = 0.2
//! duration = 60.0
//! # g = 9.81
//! # wet_threshold = 1e-5
//!
//! [boundary]            # each edge: "wall" (default) or "radiation"
//! east = "radiation"
//!
//! [initial]             # "rest", "gaussian" or "raster"
//! type = "gaussian"
//! x = 5000.0
//! y = 5000.0
//! amplitude = 0.5
//! sigma = 800.0
//!
//! [decomposition]       # optional per-level rank budget
//! per_level_ranks = [1, 3]
//!
//! [[level]]
//! dx = 90.0
//! [[level.block]]
//! origin = [0.0, 0.0]   # meters, multiple of dx
//! ni = 120
//! nj = 120
//! manning = 0.025
//! bathymetry = { constant = 50.0 }
//! # bathymetry = { slope = { depth_at_origin = 50.0, gradient_y = -0.01 } }
//! # bathymetry = { raster = "depth.txt" }   # ni*nj values, row-major
//! ```
//!
//! Instead of `[[level]]` tables a `[kochi]` table with `scale = "1/1000"`
//! generates the synthetic five-level coastal system. Relative paths are
//! resolved against the directory holding the scenario file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use super::kochi::{build_kochi_scaled, Scale};
use super::{
    cell_center, Bathymetry, BlockSpec, BoundaryConditions, GridError, LevelSpec, NestedGridSystem, Roughness,
    SimulationConfig, Slope, DEFAULT_GRAVITY, DEFAULT_WET_THRESHOLD,
};
use crate::raster::{read_plain_values, Raster, RasterError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{path}: {source}")]
    Raster { path: PathBuf, source: RasterError },
    #[error("level {level} block {block}: origin ({x}, {y}) m is not a multiple of dx = {dx} m")]
    OriginOffGrid {
        level: usize,
        block: usize,
        x: f64,
        y: f64,
        dx: f64,
    },
    #[error("level {level} block {block}: bathymetry needs exactly one of constant, slope, raster")]
    Bathymetry { level: usize, block: usize },
    #[error("scenario needs either [[level]] tables or a [kochi] table")]
    NoGrid,
    #[error("initial raster list has {found} entries for {levels} levels")]
    InitialRasterCount { found: usize, levels: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Initial water-level displacement.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    Rest,
    Gaussian {
        x: f64,
        y: f64,
        amplitude: f64,
        sigma: f64,
    },
    /// One raster per level, sampled at cell centers; cells outside are 0.
    Raster(Vec<Raster>),
}

impl InitialCondition {
    /// Displacement at global cell `(gi, gj)` of `level`.
    pub fn eta(&self, level: usize, gi: isize, gj: isize, dx: f64) -> f64 {
        let (x, y) = cell_center(gi, gj, dx);
        match self {
            InitialCondition::Rest => 0.0,
            InitialCondition::Gaussian {
                x: cx,
                y: cy,
                amplitude,
                sigma,
            } => {
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                amplitude * (-r2 / (2.0 * sigma * sigma)).exp()
            }
            InitialCondition::Raster(rasters) => rasters
                .get(level)
                .and_then(|r| r.sample(x, y))
                .filter(|v| v.is_finite())
                .unwrap_or(0.0),
        }
    }
}

/// Everything needed to run: grid hierarchy, physics, initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub system: NestedGridSystem,
    pub config: SimulationConfig,
    pub initial: InitialCondition,
    pub per_level_ranks: Option<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    simulation: SimulationSection,
    #[serde(default)]
    boundary: BoundaryConditions,
    initial: Option<InitialSection>,
    decomposition: Option<DecompositionSection>,
    kochi: Option<KochiSection>,
    #[serde(default)]
    level: Vec<LevelSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSection {
    dt: f64,
    #[serde(default)]
    duration: f64,
    g: Option<f64>,
    wet_threshold: Option<f64>,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum InitialSection {
    Rest,
    Gaussian { x: f64, y: f64, amplitude: f64, sigma: f64 },
    Raster { files: Vec<PathBuf> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecompositionSection {
    per_level_ranks: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScaleValue {
    Number(f64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KochiSection {
    scale: ScaleValue,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelSection {
    dx: f64,
    block: Vec<BlockSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockSection {
    origin: [f64; 2],
    ni: usize,
    nj: usize,
    #[serde(default)]
    manning: f64,
    manning_raster: Option<PathBuf>,
    bathymetry: BathymetrySection,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct BathymetrySection {
    constant: Option<f64>,
    slope: Option<Slope>,
    raster: Option<PathBuf>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let file: ScenarioFile = toml::from_str(text)?;
        let config = SimulationConfig {
            dt: file.simulation.dt,
            total_duration: file.simulation.duration,
            g: file.simulation.g.unwrap_or(DEFAULT_GRAVITY),
            wet_threshold: file.simulation.wet_threshold.unwrap_or(DEFAULT_WET_THRESHOLD),
            boundary: file.boundary,
        };
        let system = match (&file.kochi, file.level.is_empty()) {
            (Some(k), _) => {
                let scale = match &k.scale {
                    ScaleValue::Number(v) => Scale(*v),
                    ScaleValue::Text(s) => s.parse()?,
                };
                build_kochi_scaled(scale.0)?
            }
            (None, false) => build_levels(&file.level, base_dir)?,
            (None, true) => return Err(ConfigError::NoGrid),
        };
        let initial = match file.initial {
            None | Some(InitialSection::Rest) => InitialCondition::Rest,
            Some(InitialSection::Gaussian { x, y, amplitude, sigma }) => {
                InitialCondition::Gaussian { x, y, amplitude, sigma }
            }
            Some(InitialSection::Raster { files }) => {
                if files.len() != system.n_levels() {
                    return Err(ConfigError::InitialRasterCount {
                        found: files.len(),
                        levels: system.n_levels(),
                    });
                }
                let rasters = files
                    .iter()
                    .map(|f| {
                        let p = base_dir.join(f);
                        Raster::read(&p).map_err(|source| ConfigError::Raster { path: p, source })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                InitialCondition::Raster(rasters)
            }
        };
        Ok(Scenario {
            system,
            config,
            initial,
            per_level_ranks: file.decomposition.map(|d| d.per_level_ranks),
        })
    }
}

fn build_levels(levels: &[LevelSection], base: &Path) -> Result<NestedGridSystem, ConfigError> {
    let mut specs = Vec::with_capacity(levels.len());
    for (li, level) in levels.iter().enumerate() {
        let mut blocks = Vec::with_capacity(level.block.len());
        for (bi, b) in level.block.iter().enumerate() {
            let to_cells = |v: f64| -> Option<isize> {
                let c = v / level.dx;
                let r = c.round();
                ((c - r).abs() <= 1e-6 * c.abs().max(1.0)).then_some(r as isize)
            };
            let origin = match (to_cells(b.origin[0]), to_cells(b.origin[1])) {
                (Some(x), Some(y)) => (x, y),
                _ => {
                    return Err(ConfigError::OriginOffGrid {
                        level: li + 1,
                        block: bi + 1,
                        x: b.origin[0],
                        y: b.origin[1],
                        dx: level.dx,
                    })
                }
            };
            let bathymetry = match (&b.bathymetry.constant, &b.bathymetry.slope, &b.bathymetry.raster) {
                (Some(h), None, None) => Bathymetry::Constant(*h),
                (None, Some(s), None) => Bathymetry::Slope(*s),
                (None, None, Some(p)) => Bathymetry::Raster(read_values(&base.join(p))?),
                _ => {
                    return Err(ConfigError::Bathymetry {
                        level: li + 1,
                        block: bi + 1,
                    })
                }
            };
            let roughness = match &b.manning_raster {
                Some(p) => Roughness::Raster(read_values(&base.join(p))?),
                None => Roughness::Uniform(b.manning),
            };
            blocks.push(BlockSpec {
                origin,
                ni: b.ni,
                nj: b.nj,
                bathymetry,
                roughness,
            });
        }
        specs.push(LevelSpec { dx: level.dx, blocks });
    }
    Ok(NestedGridSystem::new(specs)?)
}

fn read_values(path: &Path) -> Result<Arc<[f64]>, ConfigError> {
    read_plain_values(path)
        .map(Arc::from)
        .map_err(|source| ConfigError::Raster {
            path: path.to_path_buf(),
            source,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::EdgeKind;

    const TWO_LEVEL: &str = r#"
[simulation]
dt = 0.5
duration = 10.0

[boundary]
north = "radiation"

[initial]
type = "gaussian"
x = 450.0
y = 450.0
amplitude = 0.2
sigma = 100.0

[[level]]
dx = 90.0
[[level.block]]
origin = [0.0, 0.0]
ni = 10
nj = 10
manning = 0.02
bathymetry = { constant = 40.0 }

[[level]]
dx = 30.0
[[level.block]]
origin = [270.0, 270.0]
ni = 12
nj = 12
bathymetry = { slope = { depth_at_origin = 40.0, gradient_y = -0.001 } }
"#;

    #[test]
    fn parses_levels_and_sections() {
        let sc = Scenario::from_toml(TWO_LEVEL, Path::new(".")).unwrap();
        assert_eq!(sc.config.dt, 0.5);
        assert_eq!(sc.config.steps(), 20);
        assert_eq!(sc.config.g, 9.81);
        assert_eq!(sc.config.boundary.north, EdgeKind::Radiation);
        assert_eq!(sc.config.boundary.west, EdgeKind::Wall);
        assert_eq!(sc.system.n_levels(), 2);
        let child = sc.system.block(1);
        assert_eq!(child.origin, (9, 9));
        assert!(matches!(child.bathymetry, Bathymetry::Slope(_)));
        assert!(matches!(sc.initial, InitialCondition::Gaussian { .. }));
    }

    #[test]
    fn off_grid_origin_rejected() {
        let text = TWO_LEVEL.replace("origin = [270.0, 270.0]", "origin = [275.0, 270.0]");
        let err = Scenario::from_toml(&text, Path::new(".")).unwrap_err();
        assert!(matches!(err, ConfigError::OriginOffGrid { level: 2, block: 1, .. }));
    }

    #[test]
    fn raster_bathymetry_read_relative_to_base() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("h.txt"), "1 2 3\n4 5 6\n").unwrap();
        let text = r#"
[simulation]
dt = 0.1
[[level]]
dx = 10.0
[[level.block]]
origin = [0.0, 0.0]
ni = 3
nj = 2
bathymetry = { raster = "h.txt" }
"#;
        let sc = Scenario::from_toml(text, dir.path()).unwrap();
        assert_eq!(sc.system.block(0).depth(2, 1), 6.0);

        let bad = text.replace("nj = 2", "nj = 3");
        let err = Scenario::from_toml(&bad, dir.path()).unwrap_err();
        assert!(matches!(err, ConfigError::Grid(GridError::RasterShape { .. })));
    }

    #[test]
    fn kochi_section_generates_system() {
        let text = "[simulation]\ndt = 0.2\n[kochi]\nscale = \"1/1000\"\n";
        let sc = Scenario::from_toml(text, Path::new(".")).unwrap();
        assert_eq!(sc.system.n_blocks(), 84);
    }

    #[test]
    fn ambiguous_bathymetry_rejected() {
        let text = TWO_LEVEL.replace(
            "bathymetry = { constant = 40.0 }",
            "bathymetry = { constant = 40.0, raster = \"x\" }",
        );
        assert!(matches!(
            Scenario::from_toml(&text, Path::new(".")),
            Err(ConfigError::Bathymetry { level: 1, block: 1 })
        ));
    }
}
