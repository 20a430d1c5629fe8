//! Runs the shipped two-level config on three workers and compares the
//! child's water level with the parent cell underneath each child cell.

use std::path::Path;

use nested_swe::grid::config::Scenario;
use nested_swe::sim::{run_simulation, RunOptions};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/nested_two_level.toml");
    let scenario = Scenario::load(&path).expect("config");
    let dir = std::env::temp_dir().join("nested_two_level_example");
    let report = run_simulation(
        &scenario,
        &RunOptions {
            steps: 200,
            workers: 3,
            out_dir: Some(dir.clone()),
            ..RunOptions::default()
        },
    )
    .expect("run");
    println!("plan: {:?}", report.plan.separators());
    for f in &report.files {
        println!("wrote {}", f.display());
    }

    let parent = nested_swe::raster::Raster::read(&dir.join("level1_eta.txt")).expect("parent raster");
    let child = nested_swe::raster::Raster::read(&dir.join("level2_eta.txt")).expect("child raster");
    // Child cell centres sampled on the parent raster.
    let mut worst = 0.0f64;
    for j in 0..child.nj {
        for i in 0..child.ni {
            let x = child.x0 + (i as f64 + 0.5) * child.dx;
            let y = child.y0 + (j as f64 + 0.5) * child.dx;
            if let Some(p) = parent.sample(x, y).filter(|v| v.is_finite()) {
                worst = worst.max((p - child.get(i, j)).abs());
            }
        }
    }
    println!("largest child/parent water-level gap {worst:.4} m");
}
