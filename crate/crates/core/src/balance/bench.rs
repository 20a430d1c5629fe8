use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Bathymetry, BlockSpec, BoundaryConditions, LevelSpec, NestedGridSystem, Roughness};
use crate::kernels::{update_momentum, BlockState, FieldKind, StepParams};
use crate::topology::Topology;

/// Time the momentum kernel on square blocks of the given side lengths.
/// Returns `(cells, median microseconds per call)` per side.
pub fn benchmark_momentum(sides: &[usize], repeats: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = StepParams {
        dt: 0.2,
        g: 9.81,
        wet_threshold: 1e-5,
    };
    sides
        .iter()
        .map(|&side| {
            let system = NestedGridSystem::new(vec![LevelSpec {
                dx: 30.0,
                blocks: vec![BlockSpec {
                    origin: (0, 0),
                    ni: side,
                    nj: side,
                    bathymetry: Bathymetry::Constant(50.0),
                    roughness: Roughness::Uniform(0.025),
                }],
            }])
            .expect("benchmark block is valid");
            let topo = Topology::build(&system, &BoundaryConditions::default()).expect("single block topology");
            let ctx = &topo.block(0).ctx;
            let mut state = BlockState::new(side, side);
            for kind in FieldKind::ALL {
                for v in state.field_mut(kind).as_mut_slice() {
                    *v = rng.random_range(-0.1..0.1);
                }
            }
            for v in state.field_next_mut(FieldKind::Eta).as_mut_slice() {
                *v = rng.random_range(-0.1..0.1);
            }
            state.refresh_wet(ctx, params.wet_threshold);
            let mut times: Vec<f64> = (0..repeats.max(1))
                .map(|_| {
                    let t = Instant::now();
                    update_momentum(&mut state, ctx, &params).expect("finite benchmark state");
                    t.elapsed().as_secs_f64() * 1e6
                })
                .collect();
            times.sort_by(f64::total_cmp);
            ((side * side) as f64, times[times.len() / 2])
        })
        .collect()
}
