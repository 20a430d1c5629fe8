//! Equal-cell baseline against the optimized plan, with the tables the
//! `balance optimize` command writes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{rank_costs, BalanceError, CostModel, DecompositionPlan, ScoreKind};

#[derive(Clone, Debug, PartialEq)]
pub struct PlanComparison {
    pub model: CostModel,
    pub cells: Vec<usize>,
    pub baseline: DecompositionPlan,
    pub optimized: DecompositionPlan,
}

impl PlanComparison {
    pub fn baseline_costs(&self) -> Vec<f64> {
        rank_costs(&self.baseline, &self.cells, &self.model)
    }

    pub fn optimized_costs(&self) -> Vec<f64> {
        rank_costs(&self.optimized, &self.cells, &self.model)
    }

    /// Relative drop of the largest predicted rank cost.
    pub fn improvement(&self) -> f64 {
        let base = ScoreKind::MaxCost.score(&self.baseline_costs());
        let opt = ScoreKind::MaxCost.score(&self.optimized_costs());
        1.0 - opt / base
    }

    /// `plan,rank,first_block,blocks,cells,predicted_us`, baseline rows first.
    pub fn rank_costs_csv(&self) -> String {
        let mut s = String::from("plan,rank,first_block,blocks,cells,predicted_us\n");
        for (name, plan) in [("equal", &self.baseline), ("optimized", &self.optimized)] {
            for (rank, cost) in rank_costs(plan, &self.cells, &self.model).into_iter().enumerate() {
                let r = plan.rank_range(rank);
                let cells: usize = self.cells[r.clone()].iter().sum();
                writeln!(s, "{name},{rank},{},{},{cells},{cost:.6}", r.start, r.len()).unwrap();
            }
        }
        s
    }

    /// `plan,max_us,mean_us,min_us,variance_us2`.
    pub fn comparison_csv(&self) -> String {
        let mut s = String::from("plan,max_us,mean_us,min_us,variance_us2\n");
        for (name, costs) in [("equal", self.baseline_costs()), ("optimized", self.optimized_costs())] {
            let n = costs.len() as f64;
            let mean = costs.iter().sum::<f64>() / n;
            let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
            writeln!(
                s,
                "{name},{:.6},{mean:.6},{min:.6},{:.6}",
                ScoreKind::MaxCost.score(&costs),
                ScoreKind::Variance.score(&costs)
            )
            .unwrap();
        }
        s
    }

    /// `plan.txt`, `rank_costs.csv` and `comparison.csv` in `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, BalanceError> {
        std::fs::create_dir_all(dir)?;
        let plan = dir.join("plan.txt");
        self.optimized.write(&plan)?;
        let costs = dir.join("rank_costs.csv");
        std::fs::write(&costs, self.rank_costs_csv())?;
        let cmp = dir.join("comparison.csv");
        std::fs::write(&cmp, self.comparison_csv())?;
        Ok(vec![plan, costs, cmp])
    }
}
