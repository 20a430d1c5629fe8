//! Cost model, decomposition plans and the separator optimizer.
//!
//! Blocks are taken in system order (coarsest level first) and every rank
//! receives a consecutive, non-empty run of them. A plan is the list of
//! cut positions between runs.

mod bench;
mod compare;
mod model;
mod optimize;
mod plan;

pub use bench::benchmark_momentum;
pub use compare::PlanComparison;
pub use model::{fit_cost_model, parse_samples, samples_to_csv, CostModel};
pub use optimize::{optimize_plan, optimize_plan_traced, IterationRecord, OptimizerTrace, ScoreKind};
pub use plan::{equal_cell_plan, predict_rank_cost, rank_costs, DecompositionPlan};

use thiserror::Error;

use crate::grid::NestedGridSystem;

#[derive(Debug, Error)]
pub enum BalanceError {
    #[error("cannot fit a line: {0}")]
    DegenerateFit(String),
    #[error("{ranks} ranks cannot each get a block out of {blocks}")]
    Infeasible { ranks: usize, blocks: usize },
    #[error("invalid separators {separators:?} for {blocks} blocks")]
    InvalidSeparators { separators: Vec<usize>, blocks: usize },
    #[error("per-level budget {budget:?} does not match the level structure: {reason}")]
    Budget { budget: Vec<usize>, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How separators are chosen within a block list.
#[derive(Clone, Debug, PartialEq)]
pub enum PlanStrategy {
    EqualCells,
    Optimized {
        model: CostModel,
        iters_phase1: usize,
        iters_phase2: usize,
        seed: u64,
    },
}

pub const DEFAULT_ITERS: usize = 5000;

/// Plan for `cells` (one entry per block) on `n_ranks` ranks.
pub fn plan_blocks(
    cells: &[usize],
    n_ranks: usize,
    strategy: &PlanStrategy,
) -> Result<DecompositionPlan, BalanceError> {
    match strategy {
        PlanStrategy::EqualCells => equal_cell_plan(cells, n_ranks),
        PlanStrategy::Optimized {
            model,
            iters_phase1,
            iters_phase2,
            seed,
        } => optimize_plan(cells, n_ranks, model, *iters_phase1, *iters_phase2, *seed),
    }
}

/// Cell counts of every block in system order.
pub fn block_cells(system: &NestedGridSystem) -> Vec<usize> {
    system.blocks().map(|b| b.cell_count()).collect()
}

/// Plan whose ranks never mix levels: level `k` gets `budget[k]` ranks and
/// is partitioned on its own.
pub fn per_level_plan(
    system: &NestedGridSystem,
    budget: &[usize],
    strategy: &PlanStrategy,
) -> Result<DecompositionPlan, BalanceError> {
    let bad = |reason: String| BalanceError::Budget {
        budget: budget.to_vec(),
        reason,
    };
    if budget.len() != system.n_levels() {
        return Err(bad(format!("{} levels", system.n_levels())));
    }
    let mut separators = Vec::new();
    let mut offset = 0;
    for (k, (level, &ranks)) in system.levels().iter().zip(budget).enumerate() {
        let cells: Vec<usize> = level.blocks.iter().map(|b| b.cell_count()).collect();
        if ranks == 0 || ranks > cells.len() {
            return Err(bad(format!("level {} has {} blocks", k + 1, cells.len())));
        }
        let strategy = match strategy {
            PlanStrategy::Optimized {
                model,
                iters_phase1,
                iters_phase2,
                seed,
            } => PlanStrategy::Optimized {
                model: *model,
                iters_phase1: *iters_phase1,
                iters_phase2: *iters_phase2,
                seed: seed.wrapping_add(k as u64),
            },
            other => other.clone(),
        };
        let sub = plan_blocks(&cells, ranks, &strategy)?;
        if offset > 0 {
            separators.push(offset);
        }
        separators.extend(sub.separators().iter().map(|s| s + offset));
        offset += cells.len();
    }
    DecompositionPlan::new(offset, separators)
}

/// Per-level plan when the budget is given and sums to `n_ranks`, shared
/// plan over all blocks otherwise.
pub fn system_plan(
    system: &NestedGridSystem,
    n_ranks: usize,
    budget: Option<&[usize]>,
    strategy: &PlanStrategy,
) -> Result<DecompositionPlan, BalanceError> {
    match budget {
        Some(b) if b.iter().sum::<usize>() == n_ranks => per_level_plan(system, b, strategy),
        _ => plan_blocks(&block_cells(system), n_ranks, strategy),
    }
}
