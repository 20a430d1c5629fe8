use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use super::{BalanceError, CostModel};

/// Assignment of consecutive block runs to ranks.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DecompositionPlan {
    n_blocks: usize,
    /// Rank `r` owns blocks `separators[r - 1]..separators[r]`, with
    /// virtual separators at 0 and `n_blocks`.
    separators: Vec<usize>,
}

impl DecompositionPlan {
    pub fn new(n_blocks: usize, separators: Vec<usize>) -> Result<Self, BalanceError> {
        let ok = n_blocks > 0
            && separators.first().is_none_or(|&s| s > 0)
            && separators.last().is_none_or(|&s| s < n_blocks)
            && separators.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(Self { n_blocks, separators })
        } else {
            Err(BalanceError::InvalidSeparators {
                separators,
                blocks: n_blocks,
            })
        }
    }

    /// Everything on one rank.
    pub fn single(n_blocks: usize) -> Self {
        Self {
            n_blocks,
            separators: Vec::new(),
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn n_ranks(&self) -> usize {
        self.separators.len() + 1
    }

    pub fn separators(&self) -> &[usize] {
        &self.separators
    }

    pub(crate) fn separators_mut(&mut self) -> &mut [usize] {
        &mut self.separators
    }

    pub fn rank_range(&self, rank: usize) -> Range<usize> {
        let lo = if rank == 0 { 0 } else { self.separators[rank - 1] };
        let hi = self.separators.get(rank).copied().unwrap_or(self.n_blocks);
        lo..hi
    }

    pub fn rank_of(&self, block: usize) -> usize {
        self.separators.partition_point(|&s| s <= block)
    }

    /// Rank of every block.
    pub fn owners(&self) -> Vec<usize> {
        (0..self.n_blocks).map(|b| self.rank_of(b)).collect()
    }

    /// Text form: a `blocks` line and a `separators` line; `#` starts a comment.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# consecutive block runs per rank, cut before each separator\n");
        writeln!(s, "blocks {}", self.n_blocks).unwrap();
        s.push_str("separators");
        for sep in &self.separators {
            write!(s, " {sep}").unwrap();
        }
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, BalanceError> {
        let mut blocks = None;
        let mut separators = None;
        for line in text.lines().map(|l| l.split('#').next().unwrap().trim()) {
            let mut words = line.split_whitespace();
            let Some(key) = words.next() else { continue };
            let values = words
                .map(|w| {
                    w.parse::<usize>()
                        .map_err(|_| BalanceError::Parse(format!("plan value {w:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            match key {
                "blocks" if values.len() == 1 => blocks = Some(values[0]),
                "separators" => separators = Some(values),
                _ => return Err(BalanceError::Parse(format!("plan line {line:?}"))),
            }
        }
        let blocks = blocks.ok_or_else(|| BalanceError::Parse("plan needs a blocks line".into()))?;
        Self::new(blocks, separators.unwrap_or_default())
    }

    pub fn read(path: &Path) -> Result<Self, BalanceError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), BalanceError> {
        Ok(std::fs::write(path, self.to_text())?)
    }
}

/// Predicted runtime of one rank: the model summed over its blocks in order.
pub fn predict_rank_cost(plan: &DecompositionPlan, cells: &[usize], model: &CostModel, rank: usize) -> f64 {
    cells[plan.rank_range(rank)].iter().map(|&c| model.block_cost(c)).sum()
}

pub fn rank_costs(plan: &DecompositionPlan, cells: &[usize], model: &CostModel) -> Vec<f64> {
    (0..plan.n_ranks())
        .map(|r| predict_rank_cost(plan, cells, model, r))
        .collect()
}

/// Greedy cuts: separator `k` goes where the running cell total is closest
/// to `k / n_ranks` of the whole, leaving room for the remaining ranks.
pub fn equal_cell_plan(cells: &[usize], n_ranks: usize) -> Result<DecompositionPlan, BalanceError> {
    let nb = cells.len();
    if n_ranks == 0 || n_ranks > nb {
        return Err(BalanceError::Infeasible {
            ranks: n_ranks,
            blocks: nb,
        });
    }
    let mut prefix = vec![0usize; nb + 1];
    for (k, &c) in cells.iter().enumerate() {
        prefix[k + 1] = prefix[k] + c;
    }
    let total = prefix[nb] as f64;
    let mut separators = Vec::with_capacity(n_ranks - 1);
    let mut prev = 0;
    for k in 1..n_ranks {
        let target = total * k as f64 / n_ranks as f64;
        let (lo, hi) = (prev + 1, nb - (n_ranks - k));
        let best = (lo..=hi)
            .min_by(|&a, &b| {
                let da = (prefix[a] as f64 - target).abs();
                let db = (prefix[b] as f64 - target).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("non-empty range");
        separators.push(best);
        prev = best;
    }
    DecompositionPlan::new(nb, separators)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_blocks_split_in_half() {
        let p = equal_cell_plan(&[5, 5, 5, 5], 2).unwrap();
        assert_eq!(p.separators(), &[2]);
    }

    #[test]
    fn skewed_blocks_split_after_third() {
        // Candidates 1, 2, 3 give 10/90, 20/80, 30/70.
        let p = equal_cell_plan(&[10, 10, 10, 70], 2).unwrap();
        assert_eq!(p.separators(), &[3]);
    }

    #[test]
    fn one_block_per_rank_when_counts_match() {
        let p = equal_cell_plan(&[3, 9, 1, 4], 4).unwrap();
        assert_eq!(p.separators(), &[1, 2, 3]);
        assert!(matches!(
            equal_cell_plan(&[1, 2], 3),
            Err(BalanceError::Infeasible { ranks: 3, blocks: 2 })
        ));
    }

    #[test]
    fn plan_validation() {
        assert!(DecompositionPlan::new(4, vec![0, 2]).is_err());
        assert!(DecompositionPlan::new(4, vec![2, 2]).is_err());
        assert!(DecompositionPlan::new(4, vec![4]).is_err());
        let p = DecompositionPlan::new(5, vec![1, 3]).unwrap();
        assert_eq!(p.owners(), vec![0, 1, 1, 2, 2]);
        assert_eq!(p.rank_range(2), 3..5);
    }

    #[test]
    fn plan_text_roundtrip() {
        let p = DecompositionPlan::new(84, vec![10, 40, 70]).unwrap();
        assert_eq!(DecompositionPlan::parse(&p.to_text()).unwrap(), p);
        let single = DecompositionPlan::single(3);
        assert_eq!(DecompositionPlan::parse(&single.to_text()).unwrap(), single);
    }

    #[test]
    fn one_block_rank_costs_slope_plus_intercept() {
        let m = CostModel::reference();
        let p = DecompositionPlan::single(1);
        assert_eq!(predict_rank_cost(&p, &[1], &m, 0), m.slope + m.intercept);
    }

    proptest! {
        #[test]
        fn rank_cost_is_additive(
            cells in prop::collection::vec(1usize..100_000, 2..30),
            cut in 1usize..29,
        ) {
            let cut = cut.min(cells.len() - 1);
            let m = CostModel::reference();
            let whole: f64 = cells.iter().map(|&c| m.block_cost(c)).sum();
            let p = DecompositionPlan::new(cells.len(), vec![cut]).unwrap();
            let parts: f64 = rank_costs(&p, &cells, &m).iter().sum();
            prop_assert!((whole - parts).abs() <= 1e-9 * whole);
        }

        #[test]
        fn equal_cell_plan_is_valid(
            cells in prop::collection::vec(1usize..1000, 1..40),
            ranks in 1usize..10,
        ) {
            match equal_cell_plan(&cells, ranks) {
                Ok(p) => {
                    prop_assert_eq!(p.n_ranks(), ranks);
                    for r in 0..ranks {
                        prop_assert!(!p.rank_range(r).is_empty());
                    }
                }
                Err(_) => prop_assert!(ranks > cells.len()),
            }
        }
    }
}
