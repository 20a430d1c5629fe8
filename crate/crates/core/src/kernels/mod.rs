//! Per-block numerical updates on a staggered grid.
//!
//! Layout, in block-local indices with interior cells `0..ni x 0..nj`:
//!
//! * `eta` lives at cell centers, `i in -2..ni+2`, `j in -2..nj+2`;
//! * `M` lives on x-faces, face `i` west of cell `i`, `i in -2..=ni+2`;
//! * `N` lives on y-faces, face `j` south of cell `j`, `j in -2..=nj+2`.
//!
//! Interior faces are the ones on or inside the block edge. Every field is
//! double-buffered: a step reads the current buffers and writes the next
//! ones, and `swap` flips their roles.

mod mass;
mod momentum;
mod output;

pub use mass::update_mass;
pub use momentum::update_momentum;
pub use output::{accumulate_outputs, OutputAccumulators};

use thiserror::Error;

use crate::field::Grid2;
use crate::grid::{BlockId, IRect};

/// Ghost cells on every side of a block.
pub const HALO: usize = 2;
const H: isize = HALO as isize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldKind {
    Eta,
    M,
    N,
}

impl FieldKind {
    pub const ALL: [FieldKind; 3] = [FieldKind::Eta, FieldKind::M, FieldKind::N];

    /// Extra locations along (x, y) compared with the cell count.
    fn stagger(self) -> (usize, usize) {
        match self {
            FieldKind::Eta => (0, 0),
            FieldKind::M => (1, 0),
            FieldKind::N => (0, 1),
        }
    }

    /// Locations owned by a block, in local indices.
    pub fn interior(self, ni: usize, nj: usize) -> IRect {
        let (sx, sy) = self.stagger();
        IRect::from_origin((0, 0), ni + sx, nj + sy)
    }

    /// Interior plus halo, in local indices.
    pub fn extended(self, ni: usize, nj: usize) -> IRect {
        self.interior(ni, nj).expand(H)
    }

    /// Locations of this field inside a cell rectangle given in any index
    /// space (faces on the rectangle edge included).
    pub fn locations_of(self, cells: &IRect) -> IRect {
        let (sx, sy) = self.stagger();
        IRect::new(cells.x0, cells.y0, cells.x1 + sx as isize, cells.y1 + sy as isize)
    }

    fn alloc(self, ni: usize, nj: usize) -> Grid2<f64> {
        let r = self.extended(ni, nj);
        Grid2::new((r.x0, r.y0), (r.width(), r.height()), 0.0)
    }
}

/// How an interior face gets its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceClass {
    /// Both neighbouring cells belong to this level: momentum equation.
    Computed,
    /// Domain edge with zero normal flux.
    Wall,
    /// Domain edge carrying the flux of an outward-travelling wave.
    Radiation,
    /// Next to a cell only the parent level resolves: copied from the parent.
    Prolonged,
}

/// Static per-block data used by the kernels.
#[derive(Clone, Debug)]
pub struct BlockContext {
    pub id: BlockId,
    pub ni: usize,
    pub nj: usize,
    pub dx: f64,
    /// Still-water depth on the extended cell range.
    pub h: Grid2<f64>,
    /// Manning roughness on the extended cell range.
    pub manning: Grid2<f64>,
    /// Classes of interior x-faces, `0..=ni x 0..nj`.
    pub m_class: Grid2<FaceClass>,
    /// Classes of interior y-faces, `0..ni x 0..=nj`.
    pub n_class: Grid2<FaceClass>,
}

impl BlockContext {
    /// Wet if total depth reaches the threshold.
    #[inline]
    pub fn is_wet(&self, i: isize, j: isize, eta: f64, threshold: f64) -> bool {
        self.h[(i, j)] + eta >= threshold
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepParams {
    pub dt: f64,
    pub g: f64,
    pub wet_threshold: f64,
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("non-finite {field:?} in block {block} at ({i}, {j})")]
pub struct NumericError {
    pub block: BlockId,
    pub field: FieldKind,
    pub i: isize,
    pub j: isize,
}

/// Double-buffered prognostic fields of one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockState {
    pub ni: usize,
    pub nj: usize,
    eta: [Grid2<f64>; 2],
    m: [Grid2<f64>; 2],
    n: [Grid2<f64>; 2],
    /// Wet flags of the most recently assembled water level.
    pub wet: Grid2<bool>,
    cur: usize,
    pub acc: OutputAccumulators,
}

impl BlockState {
    /// Zero water level and fluxes in both buffers, everything dry.
    pub fn new(ni: usize, nj: usize) -> Self {
        let e = FieldKind::Eta.alloc(ni, nj);
        let m = FieldKind::M.alloc(ni, nj);
        let n = FieldKind::N.alloc(ni, nj);
        Self {
            ni,
            nj,
            wet: Grid2::new(e.lo(), e.dims(), false),
            eta: [e.clone(), e],
            m: [m.clone(), m],
            n: [n.clone(), n],
            cur: 0,
            acc: OutputAccumulators::new(ni, nj),
        }
    }

    #[inline]
    fn nxt(&self) -> usize {
        1 - self.cur
    }

    /// Current (time level `n`) buffer of a field.
    pub fn field(&self, kind: FieldKind) -> &Grid2<f64> {
        match kind {
            FieldKind::Eta => &self.eta[self.cur],
            FieldKind::M => &self.m[self.cur],
            FieldKind::N => &self.n[self.cur],
        }
    }

    pub fn field_mut(&mut self, kind: FieldKind) -> &mut Grid2<f64> {
        let k = self.cur;
        match kind {
            FieldKind::Eta => &mut self.eta[k],
            FieldKind::M => &mut self.m[k],
            FieldKind::N => &mut self.n[k],
        }
    }

    /// Buffer being assembled for time level `n + 1`.
    pub fn field_next(&self, kind: FieldKind) -> &Grid2<f64> {
        let k = self.nxt();
        match kind {
            FieldKind::Eta => &self.eta[k],
            FieldKind::M => &self.m[k],
            FieldKind::N => &self.n[k],
        }
    }

    pub fn field_next_mut(&mut self, kind: FieldKind) -> &mut Grid2<f64> {
        let k = self.nxt();
        match kind {
            FieldKind::Eta => &mut self.eta[k],
            FieldKind::M => &mut self.m[k],
            FieldKind::N => &mut self.n[k],
        }
    }

    pub fn swap(&mut self) {
        self.cur = self.nxt();
    }

    /// Recompute wet flags from the next water level over the whole array.
    pub fn refresh_wet(&mut self, ctx: &BlockContext, threshold: f64) {
        let k = self.nxt();
        let eta = &self.eta[k];
        for ((w, e), h) in self
            .wet
            .as_mut_slice()
            .iter_mut()
            .zip(eta.as_slice())
            .zip(ctx.h.as_slice())
        {
            *w = h + e >= threshold;
        }
    }

    /// Sum of the current water level over interior cells.
    pub fn interior_eta_sum(&self) -> f64 {
        let eta = self.field(FieldKind::Eta);
        let mut s = 0.0;
        for j in 0..self.nj as isize {
            for i in 0..self.ni as isize {
                s += eta[(i, j)];
            }
        }
        s
    }
}

/// Split a double buffer into (current, next).
fn split_pair(pair: &mut [Grid2<f64>; 2], cur: usize) -> (&Grid2<f64>, &mut Grid2<f64>) {
    let [a, b] = pair;
    if cur == 0 {
        (a, b)
    } else {
        (b, a)
    }
}
