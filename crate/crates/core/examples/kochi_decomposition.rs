//! Equal-cell versus optimized decomposition of the finest Kochi level
//! (1/1000 scale) over 16 ranks, under the reference cost model.

use nested_swe::balance::{block_cells, equal_cell_plan, optimize_plan, CostModel, PlanComparison, DEFAULT_ITERS};
use nested_swe::grid::kochi::build_kochi_scaled;

fn main() {
    let system = build_kochi_scaled(1e-3).expect("kochi");
    for level in system.levels() {
        println!(
            "level {}  dx {:>5} m  blocks {:>2}  cells {}",
            level.index,
            level.dx,
            level.blocks.len(),
            level.cell_count()
        );
    }

    let finest = system.n_levels() - 1;
    let all = block_cells(&system);
    let cells: Vec<usize> = system
        .blocks()
        .filter(|b| b.level == finest)
        .map(|b| all[b.id])
        .collect();
    let model = CostModel::reference();
    let cmp = PlanComparison {
        model,
        baseline: equal_cell_plan(&cells, 16).expect("16 <= blocks"),
        optimized: optimize_plan(&cells, 16, &model, DEFAULT_ITERS, DEFAULT_ITERS, 7).expect("plan"),
        cells,
    };
    print!("{}", cmp.comparison_csv());
    println!("improvement of the slowest rank: {:.1}%", 100.0 * cmp.improvement());
}
