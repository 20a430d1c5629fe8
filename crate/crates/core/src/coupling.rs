//! Transfers between a parent level and its child level.
//!
//! Restriction averages each 3x3 child patch into the parent cell it
//! covers, for the ring of parent cells just inside the child edge that
//! border parent-only cells. Prolongation copies parent water level and
//! per-unit-width fluxes onto every child location the child cannot compute
//! itself (see [`crate::topology`]).
//!
//! Both directions use precomputed links. A link joins one parent block and
//! one child block and lists segments with fixed buffer offsets inside the
//! message exchanged by the two owning ranks.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::balance::DecompositionPlan;
use crate::grid::{coarsen_cover, Block, BlockId, BoundaryConditions, IRect, NestedGridSystem, REFINEMENT};
use crate::kernels::{BlockState, FieldKind};
use crate::topology::{owner, parent_location, Topology, TopologyError};

#[derive(Debug, Error, PartialEq)]
pub enum CouplingError {
    #[error("level {level} block {block}: interface not aligned to parent cells")]
    Misaligned { level: usize, block: BlockId },
    #[error("child block {child}: parent cell ({pi}, {pj}) is not on the parent level")]
    NoParent { child: BlockId, pi: isize, pj: isize },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    West,
    East,
    South,
    North,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkKind {
    /// Child water level averaged into parent cells.
    Restrict,
    /// Parent water level and fluxes copied onto child locations.
    Prolong,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub side: Side,
    pub field: FieldKind,
    /// Child-level locations (restriction: the 3x3 patches).
    pub child: IRect,
    /// Parent-level locations (prolongation: bounding box of the sources).
    pub parent: IRect,
    /// Start in the message buffer.
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterGridLink {
    pub kind: LinkKind,
    pub parent_block: BlockId,
    pub child_block: BlockId,
    /// Zero-based level of the child block.
    pub child_level: usize,
    pub sender: usize,
    pub receiver: usize,
    pub segments: Vec<Segment>,
    /// Start of the first segment in the message buffer.
    pub offset: usize,
    pub len: usize,
}

/// Start offsets of consecutive pieces and their total length.
pub fn prefix_offsets(lengths: &[usize]) -> (Vec<usize>, usize) {
    let mut out = Vec::with_capacity(lengths.len());
    let mut total = 0;
    for &l in lengths {
        out.push(total);
        total += l;
    }
    (out, total)
}

/// Parent cells of `child` that receive restricted water level, as runs
/// along each side paired with the parent block owning them. Corner cells
/// belong to the west or east side.
pub fn restriction_ring(
    system: &NestedGridSystem,
    child: &Block,
) -> Result<Vec<(Side, BlockId, IRect)>, CouplingError> {
    let r = child.rect();
    if [r.x0, r.y0, r.x1, r.y1].iter().any(|v| v.rem_euclid(REFINEMENT) != 0) {
        return Err(CouplingError::Misaligned {
            level: child.level + 1,
            block: child.id,
        });
    }
    let f = coarsen_cover(&r);
    let parent_domain = system.domain(child.level - 1);
    let footprints: Vec<IRect> = system
        .level(child.level)
        .blocks
        .iter()
        .map(|b| coarsen_cover(&b.rect()))
        .collect();
    let parent_only =
        |x: isize, y: isize| parent_domain.contains(x, y) && !footprints.iter().any(|fp| fp.contains(x, y));
    let parents = &system.level(child.level - 1).blocks;

    // (side, cell) in side order, cells along each side in increasing order.
    let mut taken = HashSet::new();
    let mut cells: Vec<(Side, (isize, isize))> = Vec::new();
    type Pairs = Vec<((isize, isize), (isize, isize))>;
    let sides: [(Side, Pairs); 4] = [
        (Side::West, (f.y0..f.y1).map(|y| ((f.x0, y), (f.x0 - 1, y))).collect()),
        (Side::East, (f.y0..f.y1).map(|y| ((f.x1 - 1, y), (f.x1, y))).collect()),
        (Side::South, (f.x0..f.x1).map(|x| ((x, f.y0), (x, f.y0 - 1))).collect()),
        (Side::North, (f.x0..f.x1).map(|x| ((x, f.y1 - 1), (x, f.y1))).collect()),
    ];
    for (side, candidates) in sides {
        for (cell, outward) in candidates {
            if parent_only(outward.0, outward.1) && taken.insert(cell) {
                cells.push((side, cell));
            }
        }
    }

    let mut runs: Vec<(Side, BlockId, IRect)> = Vec::new();
    for (side, (x, y)) in cells {
        let parent = owner(parents, FieldKind::Eta, x, y).ok_or(CouplingError::NoParent {
            child: child.id,
            pi: x,
            pj: y,
        })?;
        if let Some((s, p, run)) = runs.last_mut() {
            let vertical = matches!(side, Side::West | Side::East);
            let extends = *s == side
                && *p == parent.id
                && if vertical {
                    run.x0 == x && run.y1 == y
                } else {
                    run.y0 == y && run.x1 == x
                };
            if extends {
                if vertical {
                    run.y1 += 1;
                } else {
                    run.x1 += 1;
                }
                continue;
            }
        }
        runs.push((side, parent.id, IRect::new(x, y, x + 1, y + 1)));
    }
    Ok(runs)
}

/// Side of `child` a prolongation run lies on.
fn run_side(field: FieldKind, run: &IRect, child: &IRect) -> Side {
    let (sx, sy) = match field {
        FieldKind::Eta => (0, 0),
        FieldKind::M => (1, 0),
        FieldKind::N => (0, 1),
    };
    if run.x1 <= child.x0 + sx {
        Side::West
    } else if run.x0 >= child.x1 {
        Side::East
    } else if run.y0 < child.y0 + sy {
        Side::South
    } else {
        Side::North
    }
}

/// Links for every parent/child interface, with offsets assigned inside
/// the message of each (kind, child level, sender rank, receiver rank).
pub fn build_offset_tables(
    system: &NestedGridSystem,
    plan: &DecompositionPlan,
) -> Result<Vec<InterGridLink>, CouplingError> {
    let topo = Topology::build(system, &BoundaryConditions::default())?;
    build_links(system, &topo, plan)
}

pub fn build_links(
    system: &NestedGridSystem,
    topo: &Topology,
    plan: &DecompositionPlan,
) -> Result<Vec<InterGridLink>, CouplingError> {
    let owners = plan.owners();
    let mut links = Vec::new();
    for child in system.blocks().filter(|b| b.level > 0) {
        let mut by_parent: BTreeMap<BlockId, Vec<Segment>> = BTreeMap::new();
        for (side, parent, cells) in restriction_ring(system, child)? {
            by_parent.entry(parent).or_default().push(Segment {
                side,
                field: FieldKind::Eta,
                child: cells.scale(REFINEMENT),
                parent: cells,
                offset: 0,
                len: cells.area(),
            });
        }
        for (parent, segments) in by_parent {
            links.push(InterGridLink {
                kind: LinkKind::Restrict,
                parent_block: parent,
                child_block: child.id,
                child_level: child.level,
                sender: owners[child.id],
                receiver: owners[parent],
                segments,
                offset: 0,
                len: 0,
            });
        }

        let mut by_parent: BTreeMap<BlockId, Vec<Segment>> = BTreeMap::new();
        for run in &topo.block(child.id).parent_runs {
            let first = parent_location(run.field, run.run.x0, run.run.y0);
            let last = parent_location(run.field, run.run.x1 - 1, run.run.y0);
            by_parent.entry(run.parent).or_default().push(Segment {
                side: run_side(run.field, &run.run, &child.rect()),
                field: run.field,
                child: run.run,
                parent: IRect::new(first.0, first.1, last.0 + 1, last.1 + 1),
                offset: 0,
                len: run.run.area(),
            });
        }
        for (parent, segments) in by_parent {
            links.push(InterGridLink {
                kind: LinkKind::Prolong,
                parent_block: parent,
                child_block: child.id,
                child_level: child.level,
                sender: owners[parent],
                receiver: owners[child.id],
                segments,
                offset: 0,
                len: 0,
            });
        }
    }

    links.sort_by_key(|l| {
        (
            l.kind,
            l.child_level,
            l.sender,
            l.receiver,
            l.child_block,
            l.parent_block,
        )
    });
    let mut cursor: BTreeMap<(LinkKind, usize, usize, usize), usize> = BTreeMap::new();
    for link in &mut links {
        let start = cursor
            .entry((link.kind, link.child_level, link.sender, link.receiver))
            .or_insert(0);
        let lengths: Vec<usize> = link.segments.iter().map(|s| s.len).collect();
        let (offsets, total) = prefix_offsets(&lengths);
        for (seg, off) in link.segments.iter_mut().zip(offsets) {
            seg.offset = *start + off;
        }
        link.offset = *start;
        link.len = total;
        *start += total;
    }
    Ok(links)
}

/// Fill `buffer` with 3x3 averages of the child's next water level,
/// summed row by row within each patch.
pub fn restrict_eta(child: &BlockState, child_origin: (isize, isize), link: &InterGridLink, buffer: &mut [f64]) {
    let eta = child.field_next(FieldKind::Eta);
    let (ox, oy) = child_origin;
    for seg in &link.segments {
        for (k, (pi, pj)) in seg.parent.cells().enumerate() {
            let mut sum = 0.0;
            for dj in 0..REFINEMENT {
                for di in 0..REFINEMENT {
                    sum += eta[(REFINEMENT * pi + di - ox, REFINEMENT * pj + dj - oy)];
                }
            }
            buffer[seg.offset + k] = sum / 9.0;
        }
    }
}

/// Write restricted values into the parent's next water level.
pub fn apply_restriction(parent: &mut BlockState, parent_origin: (isize, isize), link: &InterGridLink, buffer: &[f64]) {
    let eta = parent.field_next_mut(FieldKind::Eta);
    let (ox, oy) = parent_origin;
    for seg in &link.segments {
        for (k, (pi, pj)) in seg.parent.cells().enumerate() {
            eta[(pi - ox, pj - oy)] = buffer[seg.offset + k];
        }
    }
}

/// Fill `buffer` with the parent value behind every child location.
pub fn prolong_flux(parent: &BlockState, parent_origin: (isize, isize), link: &InterGridLink, buffer: &mut [f64]) {
    let (ox, oy) = parent_origin;
    for seg in &link.segments {
        let src = parent.field_next(seg.field);
        for (k, (gi, gj)) in seg.child.cells().enumerate() {
            let (pi, pj) = parent_location(seg.field, gi, gj);
            buffer[seg.offset + k] = src[(pi - ox, pj - oy)];
        }
    }
}

/// Copy prolonged values onto the child's next buffers.
pub fn apply_prolongation(child: &mut BlockState, child_origin: (isize, isize), link: &InterGridLink, buffer: &[f64]) {
    let (ox, oy) = child_origin;
    for seg in &link.segments {
        let dst = child.field_next_mut(seg.field);
        for (k, (gi, gj)) in seg.child.cells().enumerate() {
            dst[(gi - ox, gj - oy)] = buffer[seg.offset + k];
        }
    }
}
