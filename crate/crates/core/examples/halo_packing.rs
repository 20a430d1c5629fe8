//! Halo schedule of two side-by-side blocks on separate ranks: prints the
//! message layout, then packs one entry and unpacks it on the neighbour.

use nested_swe::balance::DecompositionPlan;
use nested_swe::exchange::{entry_slice, pack_halo, unpack_halo, HaloSchedule, Phase};
use nested_swe::grid::{Bathymetry, BlockSpec, BoundaryConditions, LevelSpec, NestedGridSystem, Roughness};
use nested_swe::kernels::{BlockState, FieldKind};
use nested_swe::topology::Topology;

fn main() {
    let spec = |origin| BlockSpec {
        origin,
        ni: 6,
        nj: 4,
        bathymetry: Bathymetry::Constant(10.0),
        roughness: Roughness::Uniform(0.0),
    };
    let system = NestedGridSystem::new(vec![LevelSpec {
        dx: 100.0,
        blocks: vec![spec((0, 0)), spec((6, 0))],
    }])
    .expect("two blocks");
    let topo = Topology::build(&system, &BoundaryConditions::default()).expect("topology");
    let plan = DecompositionPlan::new(2, vec![1]).expect("one block per rank");
    let schedule = HaloSchedule::build(&topo, &plan);

    for phase in [Phase::Eta, Phase::Flux] {
        for pair in schedule.pairs(phase) {
            println!(
                "{phase:?}: rank {} -> rank {}, {} values",
                pair.sender, pair.receiver, pair.len
            );
            for e in &pair.entries {
                println!(
                    "  {:?} block {} -> {}  rect {:?}  offset {} len {}",
                    e.field, e.src_block, e.dst_block, e.rect, e.offset, e.len
                );
            }
        }
    }

    // Fill the sender's water level with its global x index and ship it.
    let pair = &schedule.pairs(Phase::Eta)[0];
    let src = system.block(pair.sender);
    let dst = system.block(pair.receiver);
    let mut a = BlockState::new(src.ni, src.nj);
    let eta = a.field_next_mut(FieldKind::Eta);
    for j in -2..src.nj as isize + 2 {
        for i in -2..src.ni as isize + 2 {
            eta[(i, j)] = (src.origin.0 + i) as f64;
        }
    }
    let message: Vec<f64> = pair.entries.iter().flat_map(|e| pack_halo(&a, src.origin, e)).collect();
    let mut b = BlockState::new(dst.ni, dst.nj);
    for e in &pair.entries {
        unpack_halo(&mut b, dst.origin, e, entry_slice(&message, e)).expect("lengths match");
    }
    let local = |g: isize| g - dst.origin.0;
    let got: Vec<f64> = (dst.origin.0 - 2..dst.origin.0)
        .map(|g| b.field_next(FieldKind::Eta)[(local(g), 0)])
        .collect();
    println!("receiver west halo, row 0: {got:?}");
}
