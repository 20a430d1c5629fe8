//! Loads each shipped config and prints what validation finds.

use std::path::Path;

use nested_swe::grid::config::Scenario;
use nested_swe::grid::validate_system;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .expect("configs directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    for path in paths {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        match Scenario::load(&path) {
            Ok(s) => {
                let report = validate_system(&s.system, &s.config);
                println!(
                    "{name}: {} levels, {} blocks, {} cells",
                    s.system.n_levels(),
                    s.system.n_blocks(),
                    s.system.total_cells()
                );
                print!("{report}");
            }
            Err(e) => println!("{name}: {e}"),
        }
    }
}
