//! Static neighbourhood of every block.
//!
//! Each location outside a block's interior gets exactly one source:
//!
//! * a sibling block on the same level that owns it (first in block order);
//! * otherwise, inside the domain, the parent level at the mapped location;
//! * otherwise a mirror (wall) or clamp (radiation) of the block's own array.
//!
//! Interior faces are classified the same way: computed when both cells are
//! on this level, domain edge when one cell is outside the domain, and
//! prolonged from the parent otherwise.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::field::Grid2;
use crate::grid::{geom, Block, BlockId, BoundaryConditions, EdgeKind, IRect, NestedGridSystem, REFINEMENT};
use crate::kernels::{BlockContext, BlockState, FaceClass, FieldKind};

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("block {block}: no source for {field:?} at level index ({gi}, {gj})")]
    NoSource {
        block: BlockId,
        field: FieldKind,
        gi: isize,
        gj: isize,
    },
}

/// Copy of a rectangle of locations from a sibling's interior.
#[derive(Clone, Debug, PartialEq)]
pub struct SiblingTransfer {
    pub src: BlockId,
    pub dst: BlockId,
    pub field: FieldKind,
    /// Level index space.
    pub rect: IRect,
}

/// Row of child locations filled from one parent block.
#[derive(Clone, Debug, PartialEq)]
pub struct ParentRun {
    pub parent: BlockId,
    pub child: BlockId,
    pub field: FieldKind,
    /// Child level index space, one row high.
    pub run: IRect,
}

/// Local copy that fills a location outside the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainCopy {
    pub dst: (isize, isize),
    pub src: (isize, isize),
    pub negate: bool,
}

#[derive(Clone, Debug)]
pub struct BlockTopology {
    pub ctx: BlockContext,
    pub siblings: Vec<SiblingTransfer>,
    pub parent_runs: Vec<ParentRun>,
    domain_fill: [Vec<DomainCopy>; 3],
}

impl BlockTopology {
    pub fn domain_fill(&self, kind: FieldKind) -> &[DomainCopy] {
        &self.domain_fill[kind as usize]
    }

    /// Apply the out-of-domain fill to the next buffer of `kind`.
    pub fn fill_domain(&self, state: &mut BlockState, kind: FieldKind) {
        let f = state.field_next_mut(kind);
        for c in self.domain_fill(kind) {
            let v = f[c.src];
            f[c.dst] = if c.negate { -v } else { v };
        }
    }
}

#[derive(Clone, Debug)]
pub struct Topology {
    pub blocks: Vec<BlockTopology>,
}

/// Parent-level location a child location takes its value from: the
/// containing cell, or the nearest parent face.
#[inline]
pub fn parent_location(kind: FieldKind, gi: isize, gj: isize) -> (isize, isize) {
    match kind {
        FieldKind::Eta => (gi.div_euclid(REFINEMENT), gj.div_euclid(REFINEMENT)),
        FieldKind::M => ((gi + 1).div_euclid(REFINEMENT), gj.div_euclid(REFINEMENT)),
        FieldKind::N => (gi.div_euclid(REFINEMENT), (gj + 1).div_euclid(REFINEMENT)),
    }
}

/// First block of `blocks` owning location `(gi, gj)` of `kind`.
pub fn owner(blocks: &[Block], kind: FieldKind, gi: isize, gj: isize) -> Option<&Block> {
    blocks.iter().find(|b| kind.locations_of(&b.rect()).contains(gi, gj))
}

fn on_level(blocks: &[Block], gi: isize, gj: isize) -> bool {
    blocks.iter().any(|b| b.rect().contains(gi, gj))
}

/// In-domain location an outside location mirrors (wall) or clamps to
/// (radiation), and whether the value changes sign.
pub fn domain_source(
    kind: FieldKind,
    gi: isize,
    gj: isize,
    domain: &IRect,
    bc: &BoundaryConditions,
) -> ((isize, isize), bool) {
    let (si, neg_x) = reflect(gi, domain.x0, domain.x1, kind == FieldKind::M, bc.west, bc.east);
    let (sj, neg_y) = reflect(gj, domain.y0, domain.y1, kind == FieldKind::N, bc.south, bc.north);
    ((si, sj), neg_x != neg_y)
}

/// One axis of `domain_source`. Cells span `lo..hi`, faces `lo..=hi`;
/// normal fluxes are odd across a wall.
fn reflect(v: isize, lo: isize, hi: isize, normal_face: bool, low: EdgeKind, high: EdgeKind) -> (isize, bool) {
    let top = if normal_face { hi } else { hi - 1 };
    if v < lo {
        match low {
            EdgeKind::Wall if normal_face => (2 * lo - v, true),
            EdgeKind::Wall => (2 * lo - 1 - v, false),
            EdgeKind::Radiation => (lo, false),
        }
    } else if v > top {
        match high {
            EdgeKind::Wall if normal_face => (2 * hi - v, true),
            EdgeKind::Wall => (2 * hi - 1 - v, false),
            EdgeKind::Radiation => (top, false),
        }
    } else {
        (v, false)
    }
}

impl Topology {
    pub fn build(system: &NestedGridSystem, bc: &BoundaryConditions) -> Result<Self, TopologyError> {
        let blocks = system
            .blocks()
            .map(|b| build_block(system, b, bc))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { blocks })
    }

    pub fn block(&self, id: BlockId) -> &BlockTopology {
        &self.blocks[id]
    }
}

fn build_block(
    system: &NestedGridSystem,
    block: &Block,
    bc: &BoundaryConditions,
) -> Result<BlockTopology, TopologyError> {
    let level = block.level;
    let siblings_all = &system.level(level).blocks;
    let cell_domain = system.domain(level);
    let (ox, oy) = block.origin;
    let no_source = |field, gi, gj| TopologyError::NoSource {
        block: block.id,
        field,
        gi,
        gj,
    };

    let classify = |l: (isize, isize), r: (isize, isize), low: EdgeKind, high: EdgeKind| {
        let inside = |c: (isize, isize)| cell_domain.contains(c.0, c.1);
        let edge = |k: EdgeKind| match k {
            EdgeKind::Wall => FaceClass::Wall,
            EdgeKind::Radiation => FaceClass::Radiation,
        };
        if !inside(l) {
            edge(low)
        } else if !inside(r) {
            edge(high)
        } else if on_level(siblings_all, l.0, l.1) && on_level(siblings_all, r.0, r.1) {
            FaceClass::Computed
        } else {
            FaceClass::Prolonged
        }
    };
    let (ni, nj) = (block.ni as isize, block.nj as isize);
    let mut m_class = Grid2::new((0, 0), (block.ni + 1, block.nj), FaceClass::Computed);
    for j in 0..nj {
        for i in 0..=ni {
            let (gi, gj) = (ox + i, oy + j);
            m_class[(i, j)] = classify((gi - 1, gj), (gi, gj), bc.west, bc.east);
        }
    }
    let mut n_class = Grid2::new((0, 0), (block.ni, block.nj + 1), FaceClass::Computed);
    for j in 0..=nj {
        for i in 0..ni {
            let (gi, gj) = (ox + i, oy + j);
            n_class[(i, j)] = classify((gi, gj - 1), (gi, gj), bc.south, bc.north);
        }
    }

    let mut siblings = Vec::new();
    let mut parent_runs = Vec::new();
    let mut domain_fill: [Vec<DomainCopy>; 3] = Default::default();
    for kind in FieldKind::ALL {
        let interior = kind.interior(block.ni, block.nj).translate(ox, oy);
        let extended = kind.extended(block.ni, block.nj).translate(ox, oy);
        let mut remaining = extended.subtract(&interior);
        for sib in siblings_all.iter().filter(|s| s.id != block.id) {
            let owned = kind.locations_of(&sib.rect());
            for piece in &remaining {
                let rect = piece.intersect(&owned);
                if !rect.is_empty() {
                    siblings.push(SiblingTransfer {
                        src: sib.id,
                        dst: block.id,
                        field: kind,
                        rect,
                    });
                }
            }
            remaining = geom::subtract_all(remaining, &[owned]);
        }

        let domain = kind.locations_of(&cell_domain);
        // Row-major order of parent-sourced locations.
        let mut from_parent: BTreeMap<(isize, isize), ()> = BTreeMap::new();
        for piece in &remaining {
            for (gi, gj) in piece.intersect(&domain).cells() {
                from_parent.insert((gj, gi), ());
            }
            for (gi, gj) in piece.cells().filter(|&(x, y)| !domain.contains(x, y)) {
                let (src, negate) = domain_source(kind, gi, gj, &cell_domain, bc);
                domain_fill[kind as usize].push(DomainCopy {
                    dst: (gi - ox, gj - oy),
                    src: (src.0 - ox, src.1 - oy),
                    negate,
                });
            }
        }
        let classes = match kind {
            FieldKind::Eta => None,
            FieldKind::M => Some(&m_class),
            FieldKind::N => Some(&n_class),
        };
        if let Some(classes) = classes {
            let (lo, hi) = (classes.lo(), classes.hi());
            for j in lo.1..hi.1 {
                for i in lo.0..hi.0 {
                    if classes[(i, j)] == FaceClass::Prolonged {
                        from_parent.insert((oy + j, ox + i), ());
                    }
                }
            }
        }
        if from_parent.is_empty() {
            continue;
        }
        if level == 0 {
            let &(gj, gi) = from_parent.keys().next().unwrap();
            return Err(no_source(kind, gi, gj));
        }
        let parents = &system.level(level - 1).blocks;
        let mut run: Option<ParentRun> = None;
        for &(gj, gi) in from_parent.keys() {
            let (pi, pj) = parent_location(kind, gi, gj);
            let parent = owner(parents, kind, pi, pj).ok_or_else(|| no_source(kind, gi, gj))?;
            match &mut run {
                Some(r) if r.parent == parent.id && r.run.y0 == gj && r.run.x1 == gi => r.run.x1 += 1,
                _ => {
                    parent_runs.extend(run.take());
                    run = Some(ParentRun {
                        parent: parent.id,
                        child: block.id,
                        field: kind,
                        run: IRect::new(gi, gj, gi + 1, gj + 1),
                    });
                }
            }
        }
        parent_runs.extend(run);
    }

    let extended = FieldKind::Eta.extended(block.ni, block.nj);
    let mut h = Grid2::new((extended.x0, extended.y0), (extended.width(), extended.height()), 0.0);
    let mut manning = h.clone();
    for (i, j) in extended.cells() {
        let (b, li, lj) = static_source(system, level, ox + i, oy + j, bc)
            .ok_or_else(|| no_source(FieldKind::Eta, ox + i, oy + j))?;
        h[(i, j)] = b.depth(li, lj);
        manning[(i, j)] = b.roughness(li, lj);
    }

    Ok(BlockTopology {
        ctx: BlockContext {
            id: block.id,
            ni: block.ni,
            nj: block.nj,
            dx: block.dx,
            h,
            manning,
            m_class,
            n_class,
        },
        siblings,
        parent_runs,
        domain_fill,
    })
}

/// Block and local cell whose bathymetry describes cell `(gi, gj)` of
/// `level`: mirrored into the domain, then the finest covering level.
fn static_source<'a>(
    system: &'a NestedGridSystem,
    level: usize,
    gi: isize,
    gj: isize,
    bc: &BoundaryConditions,
) -> Option<(&'a Block, isize, isize)> {
    let domain = system.domain(level);
    let ((gi, gj), _) = domain_source(FieldKind::Eta, gi, gj, &domain, bc);
    match owner(&system.level(level).blocks, FieldKind::Eta, gi, gj) {
        Some(b) => Some((b, gi - b.origin.0, gj - b.origin.1)),
        None if level > 0 => {
            let (pi, pj) = parent_location(FieldKind::Eta, gi, gj);
            static_source(system, level - 1, pi, pj, bc)
        }
        None => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bathymetry, BlockSpec, LevelSpec, Roughness};

    fn spec(origin: (isize, isize), ni: usize, nj: usize, h: f64) -> BlockSpec {
        BlockSpec {
            origin,
            ni,
            nj,
            bathymetry: Bathymetry::Constant(h),
            roughness: Roughness::Uniform(0.01),
        }
    }

    fn two_level() -> NestedGridSystem {
        NestedGridSystem::new(vec![
            LevelSpec {
                dx: 90.0,
                blocks: vec![spec((0, 0), 4, 6, 10.0), spec((4, 0), 4, 6, 20.0)],
            },
            LevelSpec {
                dx: 30.0,
                blocks: vec![spec((6, 3), 6, 6, 12.0), spec((12, 3), 6, 9, 14.0)],
            },
        ])
        .unwrap()
    }

    #[test]
    fn wall_reflection_rules() {
        let d = IRect::new(0, 0, 10, 8);
        let bc = BoundaryConditions::default();
        assert_eq!(domain_source(FieldKind::Eta, -1, 3, &d, &bc), ((0, 3), false));
        assert_eq!(domain_source(FieldKind::Eta, -2, -1, &d, &bc), ((1, 0), false));
        assert_eq!(domain_source(FieldKind::M, -2, 3, &d, &bc), ((2, 3), true));
        assert_eq!(domain_source(FieldKind::M, 12, 3, &d, &bc), ((8, 3), true));
        assert_eq!(domain_source(FieldKind::M, 4, 8, &d, &bc), ((4, 7), false));
        assert_eq!(domain_source(FieldKind::N, 3, 10, &d, &bc), ((3, 6), true));
        let rad = BoundaryConditions::all(EdgeKind::Radiation);
        assert_eq!(domain_source(FieldKind::M, 12, -2, &d, &rad), ((10, 0), false));
        assert_eq!(domain_source(FieldKind::Eta, 11, 9, &d, &rad), ((9, 7), false));
    }

    #[test]
    fn parent_mapping_is_nearest_face() {
        assert_eq!(parent_location(FieldKind::M, 9, 4), (3, 1));
        assert_eq!(parent_location(FieldKind::M, 8, 4), (3, 1));
        assert_eq!(parent_location(FieldKind::M, 7, 4), (2, 1));
        assert_eq!(parent_location(FieldKind::Eta, -1, 5), (-1, 1));
    }

    #[test]
    fn every_halo_location_has_exactly_one_source() {
        let sys = two_level();
        let topo = Topology::build(&sys, &BoundaryConditions::default()).unwrap();
        for bt in &topo.blocks {
            let b = sys.block(bt.ctx.id);
            for kind in FieldKind::ALL {
                let ext = kind.extended(b.ni, b.nj).translate(b.origin.0, b.origin.1);
                let int = kind.interior(b.ni, b.nj).translate(b.origin.0, b.origin.1);
                for (gi, gj) in ext.cells().filter(|&(x, y)| !int.contains(x, y)) {
                    let sib = bt
                        .siblings
                        .iter()
                        .filter(|t| t.field == kind && t.rect.contains(gi, gj))
                        .count();
                    let par = bt
                        .parent_runs
                        .iter()
                        .filter(|r| r.field == kind && r.run.contains(gi, gj))
                        .count();
                    let fill = bt
                        .domain_fill(kind)
                        .iter()
                        .filter(|c| c.dst == (gi - b.origin.0, gj - b.origin.1))
                        .count();
                    assert_eq!(sib + par + fill, 1, "block {} {kind:?} ({gi}, {gj})", b.id);
                }
            }
        }
    }

    #[test]
    fn child_faces_are_classified() {
        let sys = two_level();
        let topo = Topology::build(&sys, &BoundaryConditions::default()).unwrap();
        let left = &topo.block(2).ctx;
        // West edge borders the parent only; east edge is shared with a sibling.
        assert_eq!(left.m_class[(0, 2)], FaceClass::Prolonged);
        assert_eq!(left.m_class[(6, 2)], FaceClass::Computed);
        assert_eq!(left.m_class[(3, 2)], FaceClass::Computed);
        let coarse = &topo.block(0).ctx;
        assert_eq!(coarse.m_class[(0, 0)], FaceClass::Wall);
        assert_eq!(coarse.m_class[(4, 0)], FaceClass::Computed);
        assert_eq!(coarse.n_class[(1, 6)], FaceClass::Wall);
    }

    #[test]
    fn halo_depth_comes_from_sibling_or_parent() {
        let sys = two_level();
        let topo = Topology::build(&sys, &BoundaryConditions::default()).unwrap();
        let left = &topo.block(2).ctx;
        assert_eq!(left.h[(6, 0)], 14.0);
        // Parent cell (1, 1) of coarse block 0.
        assert_eq!(left.h[(-1, 0)], 10.0);
        let coarse = &topo.block(0).ctx;
        assert_eq!(coarse.h[(4, 2)], 20.0);
        assert_eq!(coarse.h[(-1, 2)], 10.0);
    }

    #[test]
    fn sibling_sources_respect_block_order() {
        let sys = two_level();
        let topo = Topology::build(&sys, &BoundaryConditions::default()).unwrap();
        let m_from_sibling: Vec<_> = topo
            .block(2)
            .siblings
            .iter()
            .filter(|t| t.field == FieldKind::M)
            .collect();
        assert!(m_from_sibling.iter().all(|t| t.src == 3));
        // Faces 13 and 14 of rows 3..9 beyond the shared edge face 12.
        assert!(m_from_sibling.iter().any(|t| t.rect.contains(14, 5)));
    }
}
