//! Planner and cost-model invariants.

use proptest::prelude::*;

use nested_swe::balance::{
    equal_cell_plan, fit_cost_model, optimize_plan, optimize_plan_traced, per_level_plan, rank_costs, BalanceError,
    CostModel, DecompositionPlan, PlanComparison, PlanStrategy, ScoreKind,
};
use nested_swe::grid::kochi::build_kochi_scaled;

fn instance() -> impl Strategy<Value = (Vec<usize>, usize)> {
    prop::collection::vec(1usize..2_000_000, 1..40).prop_flat_map(|cells| {
        let n = cells.len();
        (Just(cells), 1..=n)
    })
}

fn valid(plan: &DecompositionPlan, n_blocks: usize, n_ranks: usize) -> bool {
    let s = plan.separators();
    plan.n_blocks() == n_blocks
        && plan.n_ranks() == n_ranks
        && s.windows(2).all(|w| w[0] < w[1])
        && s.first().is_none_or(|&x| x > 0)
        && s.last().is_none_or(|&x| x < n_blocks)
}

proptest! {
    #[test]
    fn equal_cell_plans_are_valid((cells, ranks) in instance()) {
        let plan = equal_cell_plan(&cells, ranks).unwrap();
        prop_assert!(valid(&plan, cells.len(), ranks));
        for r in 0..ranks {
            prop_assert!(!plan.rank_range(r).is_empty());
        }
    }

    #[test]
    fn plan_text_round_trips((cells, ranks) in instance()) {
        let plan = equal_cell_plan(&cells, ranks).unwrap();
        prop_assert_eq!(DecompositionPlan::parse(&plan.to_text()).unwrap(), plan);
    }

    #[test]
    fn rank_costs_partition_the_total((cells, ranks) in instance(), slope in 0.0..1e-3f64, intercept in 0.0..100.0f64) {
        let model = CostModel { slope, intercept, r_squared: 1.0 };
        let plan = equal_cell_plan(&cells, ranks).unwrap();
        let total: f64 = cells.iter().map(|&c| model.block_cost(c)).sum();
        let split: f64 = rank_costs(&plan, &cells, &model).iter().sum();
        prop_assert!((total - split).abs() <= 1e-9 * total);
    }

    #[test]
    fn optimizer_only_accepts_improvements((cells, ranks) in instance(), seed in any::<u64>()) {
        let model = CostModel::reference();
        let (plan, trace) = optimize_plan_traced(&cells, ranks, &model, 300, 300, seed).unwrap();
        prop_assert!(valid(&plan, cells.len(), ranks));
        for r in &trace.records {
            prop_assert!(!r.accepted || r.proposed < r.before);
            prop_assert!(r.to != r.from || !r.accepted);
        }
        let max = |p: &DecompositionPlan| ScoreKind::MaxCost.score(&rank_costs(p, &cells, &model));
        prop_assert!(max(&plan) <= max(&trace.initial));
        // Same seed, same plan.
        prop_assert_eq!(optimize_plan(&cells, ranks, &model, 300, 300, seed).unwrap(), plan);
    }

    #[test]
    fn exact_lines_are_recovered(slope in 1e-6..1e-2f64, intercept in 0.0..500.0f64, n in 2usize..50) {
        let samples: Vec<(f64, f64)> = (0..n).map(|k| {
            let x = 1000.0 * (k + 1) as f64;
            (x, slope * x + intercept)
        }).collect();
        let m = fit_cost_model(&samples).unwrap();
        prop_assert!((m.slope - slope).abs() <= 1e-9 * slope);
        prop_assert!((m.intercept - intercept).abs() <= 1e-9 * intercept.max(1.0));
        prop_assert!(m.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn model_text_round_trips(slope in 0.0..1.0f64, intercept in 0.0..1e3f64, r2 in 0.0..=1.0f64) {
        let m = CostModel { slope, intercept, r_squared: r2 };
        prop_assert_eq!(CostModel::parse(&m.to_text()).unwrap(), m);
    }
}

#[test]
fn more_ranks_than_blocks_is_infeasible() {
    assert!(matches!(
        equal_cell_plan(&[5, 5], 3),
        Err(BalanceError::Infeasible { ranks: 3, blocks: 2 })
    ));
}

#[test]
fn degenerate_samples_are_rejected() {
    assert!(matches!(
        fit_cost_model(&[(1.0, 2.0)]),
        Err(BalanceError::DegenerateFit(_))
    ));
    assert!(matches!(
        fit_cost_model(&[(3.0, 1.0), (3.0, 2.0)]),
        Err(BalanceError::DegenerateFit(_))
    ));
}

#[test]
fn per_level_plans_never_mix_levels() {
    let sys = build_kochi_scaled(1e-3).unwrap();
    let plan = per_level_plan(&sys, &[1, 1, 2, 4, 8], &PlanStrategy::EqualCells).unwrap();
    assert_eq!(plan.n_ranks(), 16);
    let owners = plan.owners();
    for r in 0..16 {
        let levels: std::collections::BTreeSet<usize> =
            sys.blocks().filter(|b| owners[b.id] == r).map(|b| b.level).collect();
        assert_eq!(levels.len(), 1, "rank {r} spans {levels:?}");
    }
    assert!(matches!(
        per_level_plan(&sys, &[1, 1, 2, 4], &PlanStrategy::EqualCells),
        Err(BalanceError::Budget { .. })
    ));
}

#[test]
fn comparison_tables_have_one_row_per_rank() {
    let cells = vec![100, 200, 300, 400, 500, 600];
    let model = CostModel::reference();
    let cmp = PlanComparison {
        model,
        baseline: equal_cell_plan(&cells, 3).unwrap(),
        optimized: optimize_plan(&cells, 3, &model, 100, 100, 1).unwrap(),
        cells,
    };
    let dir = tempfile::tempdir().unwrap();
    cmp.write(dir.path()).unwrap();
    let ranks = std::fs::read_to_string(dir.path().join("rank_costs.csv")).unwrap();
    assert_eq!(ranks.lines().count(), 1 + 2 * 3);
    let comparison = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert_eq!(
        comparison.lines().next().unwrap(),
        "plan,max_us,mean_us,min_us,variance_us2"
    );
    assert!(cmp.improvement() >= 0.0);
}
