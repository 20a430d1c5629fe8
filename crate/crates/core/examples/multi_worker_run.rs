//! The same nested run on one worker and on four; final states agree
//! bit for bit.

use nested_swe::balance::DecompositionPlan;
use nested_swe::grid::config::{InitialCondition, Scenario};
use nested_swe::grid::{Bathymetry, BlockSpec, LevelSpec, NestedGridSystem, Roughness, SimulationConfig};
use nested_swe::kernels::FieldKind;
use nested_swe::sim::{run_simulation, PlanSource, RunOptions};

fn block(origin: (isize, isize), ni: usize, nj: usize, depth: f64) -> BlockSpec {
    BlockSpec {
        origin,
        ni,
        nj,
        bathymetry: Bathymetry::Constant(depth),
        roughness: Roughness::Uniform(0.025),
    }
}

fn main() {
    let system = NestedGridSystem::new(vec![
        LevelSpec {
            dx: 270.0,
            blocks: vec![block((0, 0), 20, 40, 60.0), block((20, 0), 20, 40, 40.0)],
        },
        LevelSpec {
            dx: 90.0,
            blocks: vec![block((45, 30), 30, 30, 45.0), block((45, 60), 30, 30, 45.0)],
        },
    ])
    .expect("valid nesting");
    let scenario = Scenario {
        system,
        config: SimulationConfig::new(1.0),
        initial: InitialCondition::Gaussian {
            x: 5400.0,
            y: 5400.0,
            amplitude: 0.5,
            sigma: 1200.0,
        },
        per_level_ranks: None,
    };
    let run = |workers, plan| {
        run_simulation(
            &scenario,
            &RunOptions {
                steps: 150,
                workers,
                plan,
                ..RunOptions::default()
            },
        )
        .expect("run")
    };
    let one = run(1, PlanSource::EqualCells);
    let four = run(
        4,
        PlanSource::Explicit(DecompositionPlan::new(4, vec![1, 2, 3]).expect("plan")),
    );

    let same = one.blocks.iter().zip(&four.blocks).all(|(a, b)| {
        FieldKind::ALL.iter().all(|&k| {
            a.field(k)
                .as_slice()
                .iter()
                .zip(b.field(k).as_slice())
                .all(|(x, y)| x.to_bits() == y.to_bits())
        })
    });
    println!(
        "messages between ranks: {} on one worker, {} on four",
        one.messages_sent, four.messages_sent
    );
    for (rank, t) in four.timings.iter().enumerate() {
        println!("rank {rank} total {:.3} s", t.total);
    }
    println!("bit-identical: {same}");
}
