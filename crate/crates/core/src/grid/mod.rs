//! Nested grid hierarchy: levels, blocks, bathymetry and structural checks.
//!
//! Every level uses square cells. Level `k + 1` refines level `k` by exactly
//! 3:1 and all block placement is expressed in integer cell indices of the
//! block's own level, with the lower-left corner of the coarsest level's
//! bounding box at index `(0, 0)`.

pub mod config;
pub mod geom;
pub mod kochi;

use std::fmt;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

pub use geom::IRect;

/// Refinement ratio between a parent level and its child level.
pub const REFINEMENT: isize = 3;

/// Global block identifier: position in the concatenated per-level block list.
pub type BlockId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("level {level} block {block}: block must have at least one cell in each direction (got {ni}x{nj})")]
    EmptyBlock {
        level: usize,
        block: usize,
        ni: usize,
        nj: usize,
    },
    #[error("level {level} block {block}: {what} raster has {len} values, expected {ni}x{nj}")]
    RasterShape {
        level: usize,
        block: usize,
        what: &'static str,
        len: usize,
        ni: usize,
        nj: usize,
    },
    #[error("level {level} block {block}: scale too small, block would have fewer than 3x3 cells")]
    ScaleUnderflow { level: usize, block: usize },
    #[error("level {level}: scaled layout does not fit inside its parent level")]
    ScaleMisfit { level: usize },
    #[error("invalid scale {0}: must be a positive finite number")]
    InvalidScale(String),
    #[error("system has no levels")]
    NoLevels,
}

/// Planar depth surface, capped at `max_depth`; evaluated in global meters.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
pub struct Slope {
    pub depth_at_origin: f64,
    #[serde(default)]
    pub gradient_x: f64,
    #[serde(default)]
    pub gradient_y: f64,
    #[serde(default = "Slope::uncapped")]
    pub max_depth: f64,
}

impl Slope {
    fn uncapped() -> f64 {
        f64::INFINITY
    }

    #[inline]
    pub fn depth(&self, x: f64, y: f64) -> f64 {
        (self.depth_at_origin + self.gradient_x * x + self.gradient_y * y).min(self.max_depth)
    }
}

/// Still-water depth source. Positive values are water depth below datum,
/// negative values are land elevation.
#[derive(Clone, Debug, PartialEq)]
pub enum Bathymetry {
    Constant(f64),
    Slope(Slope),
    /// `ni * nj` values, row-major with x fastest.
    Raster(Arc<[f64]>),
}

/// Manning roughness coefficient.
#[derive(Clone, Debug, PartialEq)]
pub enum Roughness {
    Uniform(f64),
    Raster(Arc<[f64]>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpec {
    /// Lower-left cell index in the block's level.
    pub origin: (isize, isize),
    pub ni: usize,
    pub nj: usize,
    pub bathymetry: Bathymetry,
    pub roughness: Roughness,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub id: BlockId,
    /// Zero-based level position.
    pub level: usize,
    /// Position of the block within its level.
    pub index_in_level: usize,
    pub origin: (isize, isize),
    pub ni: usize,
    pub nj: usize,
    pub dx: f64,
    pub bathymetry: Bathymetry,
    pub roughness: Roughness,
}

impl Block {
    pub fn rect(&self) -> IRect {
        IRect::from_origin(self.origin, self.ni, self.nj)
    }

    pub fn cell_count(&self) -> usize {
        self.ni * self.nj
    }

    pub fn origin_m(&self) -> (f64, f64) {
        (self.origin.0 as f64 * self.dx, self.origin.1 as f64 * self.dx)
    }

    /// Depth at local interior cell `(i, j)`.
    pub fn depth(&self, i: isize, j: isize) -> f64 {
        match &self.bathymetry {
            Bathymetry::Constant(h) => *h,
            Bathymetry::Slope(s) => {
                let (x, y) = cell_center(self.origin.0 + i, self.origin.1 + j, self.dx);
                s.depth(x, y)
            }
            Bathymetry::Raster(v) => v[j as usize * self.ni + i as usize],
        }
    }

    pub fn roughness(&self, i: isize, j: isize) -> f64 {
        match &self.roughness {
            Roughness::Uniform(n) => *n,
            Roughness::Raster(v) => v[j as usize * self.ni + i as usize],
        }
    }

    /// Largest positive still-water depth in the block (0 if all land).
    pub fn max_depth(&self) -> f64 {
        match &self.bathymetry {
            Bathymetry::Constant(h) => h.max(0.0),
            Bathymetry::Slope(_) => {
                // A capped plane reaches its maximum at a corner cell.
                let (ei, ej) = (self.ni as isize - 1, self.nj as isize - 1);
                [(0, 0), (ei, 0), (0, ej), (ei, ej)]
                    .into_iter()
                    .map(|(i, j)| self.depth(i, j))
                    .fold(0.0, f64::max)
            }
            Bathymetry::Raster(v) => v.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Center of global cell `(gi, gj)` in meters.
#[inline]
pub fn cell_center(gi: isize, gj: isize, dx: f64) -> (f64, f64) {
    ((gi as f64 + 0.5) * dx, (gj as f64 + 0.5) * dx)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridLevel {
    /// One-based level number (1 = coarsest).
    pub index: usize,
    pub dx: f64,
    pub blocks: Vec<Block>,
}

impl GridLevel {
    pub fn cell_count(&self) -> usize {
        self.blocks.iter().map(Block::cell_count).sum()
    }

    pub fn bounds(&self) -> IRect {
        self.blocks
            .iter()
            .map(Block::rect)
            .fold(IRect::new(0, 0, 0, 0), |acc, r| acc.union_bounds(&r))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSpec {
    pub dx: f64,
    pub blocks: Vec<BlockSpec>,
}

/// Immutable hierarchy of grid levels, coarsest first.
#[derive(Clone, Debug, PartialEq)]
pub struct NestedGridSystem {
    levels: Vec<GridLevel>,
    /// Level, index-in-level for each global block id.
    lookup: Vec<(usize, usize)>,
}

impl NestedGridSystem {
    pub fn new(levels: Vec<LevelSpec>) -> Result<Self, GridError> {
        if levels.is_empty() {
            return Err(GridError::NoLevels);
        }
        let mut out = Vec::with_capacity(levels.len());
        let mut lookup = Vec::new();
        for (li, spec) in levels.into_iter().enumerate() {
            let mut blocks = Vec::with_capacity(spec.blocks.len());
            for (bi, b) in spec.blocks.into_iter().enumerate() {
                if b.ni == 0 || b.nj == 0 {
                    return Err(GridError::EmptyBlock {
                        level: li + 1,
                        block: bi + 1,
                        ni: b.ni,
                        nj: b.nj,
                    });
                }
                let n = b.ni * b.nj;
                if let Bathymetry::Raster(v) = &b.bathymetry {
                    if v.len() != n {
                        return Err(GridError::RasterShape {
                            level: li + 1,
                            block: bi + 1,
                            what: "bathymetry",
                            len: v.len(),
                            ni: b.ni,
                            nj: b.nj,
                        });
                    }
                }
                if let Roughness::Raster(v) = &b.roughness {
                    if v.len() != n {
                        return Err(GridError::RasterShape {
                            level: li + 1,
                            block: bi + 1,
                            what: "roughness",
                            len: v.len(),
                            ni: b.ni,
                            nj: b.nj,
                        });
                    }
                }
                let id = lookup.len();
                lookup.push((li, bi));
                blocks.push(Block {
                    id,
                    level: li,
                    index_in_level: bi,
                    origin: b.origin,
                    ni: b.ni,
                    nj: b.nj,
                    dx: spec.dx,
                    bathymetry: b.bathymetry,
                    roughness: b.roughness,
                });
            }
            out.push(GridLevel {
                index: li + 1,
                dx: spec.dx,
                blocks,
            });
        }
        Ok(Self { levels: out, lookup })
    }

    pub fn levels(&self) -> &[GridLevel] {
        &self.levels
    }

    pub fn level(&self, level: usize) -> &GridLevel {
        &self.levels[level]
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.lookup.len()
    }

    pub fn block(&self, id: BlockId) -> &Block {
        let (l, b) = self.lookup[id];
        &self.levels[l].blocks[b]
    }

    /// All blocks, coarsest level first, in level order.
    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.levels.iter().flat_map(|l| l.blocks.iter())
    }

    pub fn total_cells(&self) -> usize {
        self.levels.iter().map(GridLevel::cell_count).sum()
    }

    /// Physical domain in the index space of `level`: the coarsest level's
    /// bounding box refined `level` times.
    pub fn domain(&self, level: usize) -> IRect {
        self.levels[0].bounds().scale(REFINEMENT.pow(level as u32))
    }
}

/// Outer edge treatment of the physical domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    /// Zero normal flux, mirrored ghost values.
    #[default]
    Wall,
    /// Zero-gradient water level; the edge face carries an outward wave flux.
    Radiation,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
pub struct BoundaryConditions {
    #[serde(default)]
    pub west: EdgeKind,
    #[serde(default)]
    pub east: EdgeKind,
    #[serde(default)]
    pub south: EdgeKind,
    #[serde(default)]
    pub north: EdgeKind,
}

impl BoundaryConditions {
    pub fn all(kind: EdgeKind) -> Self {
        Self {
            west: kind,
            east: kind,
            south: kind,
            north: kind,
        }
    }
}

pub const DEFAULT_GRAVITY: f64 = 9.81;
pub const DEFAULT_WET_THRESHOLD: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    /// Global time step shared by all levels, seconds.
    pub dt: f64,
    pub total_duration: f64,
    pub g: f64,
    pub wet_threshold: f64,
    pub boundary: BoundaryConditions,
}

impl SimulationConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            total_duration: 0.0,
            g: DEFAULT_GRAVITY,
            wet_threshold: DEFAULT_WET_THRESHOLD,
            boundary: BoundaryConditions::default(),
        }
    }

    pub fn steps(&self) -> u64 {
        if self.dt > 0.0 {
            (self.total_duration / self.dt).round().max(0.0) as u64
        } else {
            0
        }
    }
}

/// One violated structural or stability rule.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonPositiveTimeStep {
        dt: f64,
    },
    NonPositiveWetThreshold {
        threshold: f64,
    },
    RefinementRatio {
        level: usize,
        dx: f64,
        parent_dx: f64,
    },
    DomainNotRectangular,
    Overlap {
        level: usize,
        first: usize,
        second: usize,
    },
    Misaligned {
        level: usize,
        block: usize,
    },
    NotEnclosed {
        level: usize,
        block: usize,
    },
    NestingMargin {
        level: usize,
        block: usize,
    },
    Cfl {
        level: usize,
        dx: f64,
        dt: f64,
        h_max: f64,
        required: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveTimeStep { dt } => write!(f, "time step {dt} s is not positive"),
            Violation::NonPositiveWetThreshold { threshold } => {
                write!(f, "wet threshold {threshold} m is not positive")
            }
            Violation::RefinementRatio {
                level,
                dx,
                parent_dx,
            } => write!(
                f,
                "level {level}: dx {dx} m is not parent dx {parent_dx} m divided by 3"
            ),
            Violation::DomainNotRectangular => {
                write!(f, "level 1: blocks do not tile their bounding rectangle")
            }
            Violation::Overlap {
                level,
                first,
                second,
            } => write!(f, "level {level}: blocks {first} and {second} overlap"),
            Violation::Misaligned { level, block } => write!(
                f,
                "level {level} block {block}: edges not aligned to parent cell boundaries"
            ),
            Violation::NotEnclosed { level, block } => write!(
                f,
                "level {level} block {block}: not fully enclosed by level {} blocks",
                level - 1
            ),
            Violation::NestingMargin { level, block } => write!(
                f,
                "level {level} block {block}: ghost margin not covered by level {} blocks",
                level - 1
            ),
            Violation::Cfl {
                level,
                dx,
                dt,
                h_max,
                required,
            } => write!(
                f,
                "level {level}: CFL violated, dx/dt = {} m/s < sqrt(2 g h_max) = {required} m/s (dx {dx} m, dt {dt} s, h_max {h_max} m)",
                dx / dt
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Check every nesting, alignment and stability rule; violations are
/// collected rather than returned as errors.
// Negated comparisons so that NaN counts as a violation.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_system(system: &NestedGridSystem, config: &SimulationConfig) -> ValidationReport {
    let mut violations = Vec::new();
    if !(config.dt > 0.0) {
        violations.push(Violation::NonPositiveTimeStep { dt: config.dt });
    }
    if !(config.wet_threshold > 0.0) {
        violations.push(Violation::NonPositiveWetThreshold {
            threshold: config.wet_threshold,
        });
    }

    let level0 = system.level(0);
    let bbox = level0.bounds();
    if level0.cell_count() != bbox.area() || has_overlap(level0) {
        violations.push(Violation::DomainNotRectangular);
    }

    for (li, level) in system.levels().iter().enumerate() {
        let rects: Vec<IRect> = level.blocks.iter().map(Block::rect).collect();
        for a in 0..rects.len() {
            for b in a + 1..rects.len() {
                if rects[a].overlaps(&rects[b]) {
                    violations.push(Violation::Overlap {
                        level: level.index,
                        first: a + 1,
                        second: b + 1,
                    });
                }
            }
        }

        if li > 0 {
            let parent = system.level(li - 1);
            let ratio = parent.dx / level.dx;
            if (ratio - REFINEMENT as f64).abs() > 1e-9 * REFINEMENT as f64 {
                violations.push(Violation::RefinementRatio {
                    level: level.index,
                    dx: level.dx,
                    parent_dx: parent.dx,
                });
            }
            let parent_rects: Vec<IRect> = parent.blocks.iter().map(Block::rect).collect();
            let domain = system.domain(li - 1);
            for (bi, block) in level.blocks.iter().enumerate() {
                let r = block.rect();
                let aligned = [r.x0, r.y0, r.x1, r.y1].iter().all(|v| v.rem_euclid(REFINEMENT) == 0);
                if !aligned {
                    violations.push(Violation::Misaligned {
                        level: level.index,
                        block: bi + 1,
                    });
                }
                let footprint = coarsen_cover(&r);
                if !geom::subtract_all(vec![footprint], &parent_rects).is_empty() {
                    violations.push(Violation::NotEnclosed {
                        level: level.index,
                        block: bi + 1,
                    });
                    continue;
                }
                if aligned {
                    // Ghost cells outside the block must come from a sibling,
                    // the parent level, or lie outside the domain.
                    let ring = footprint.expand(1).intersect(&domain);
                    let mut cuts = vec![footprint];
                    cuts.extend(rects.iter().map(coarsen_cover));
                    cuts.extend(parent_rects.iter().copied());
                    if !geom::subtract_all(vec![ring], &cuts).is_empty() {
                        violations.push(Violation::NestingMargin {
                            level: level.index,
                            block: bi + 1,
                        });
                    }
                }
            }
        }

        let h_max = level.blocks.iter().map(Block::max_depth).fold(0.0, f64::max);
        if !cfl_satisfied(level.dx, config.dt, config.g, h_max) {
            violations.push(Violation::Cfl {
                level: level.index,
                dx: level.dx,
                dt: config.dt,
                h_max,
                required: (2.0 * config.g * h_max).sqrt(),
            });
        }
    }
    ValidationReport { violations }
}

/// `dx / dt >= sqrt(2 g h_max)`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn cfl_satisfied(dx: f64, dt: f64, g: f64, h_max: f64) -> bool {
    if !(dt > 0.0) {
        return false;
    }
    dx / dt >= (2.0 * g * h_max.max(0.0)).sqrt()
}

fn has_overlap(level: &GridLevel) -> bool {
    let rects: Vec<IRect> = level.blocks.iter().map(Block::rect).collect();
    (0..rects.len()).any(|a| (a + 1..rects.len()).any(|b| rects[a].overlaps(&rects[b])))
}

/// Smallest parent-level rectangle covering a child-level rectangle.
pub fn coarsen_cover(r: &IRect) -> IRect {
    IRect::new(
        r.x0.div_euclid(REFINEMENT),
        r.y0.div_euclid(REFINEMENT),
        (r.x1 + REFINEMENT - 1).div_euclid(REFINEMENT),
        (r.y1 + REFINEMENT - 1).div_euclid(REFINEMENT),
    )
}

/// Parent cell containing child cell `(gi, gj)`.
#[inline]
pub fn parent_cell(gi: isize, gj: isize) -> (isize, isize) {
    (gi.div_euclid(REFINEMENT), gj.div_euclid(REFINEMENT))
}
