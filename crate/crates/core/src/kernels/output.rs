use super::{BlockContext, BlockState};
use crate::field::Grid2;

/// Running maxima over interior cells.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputAccumulators {
    pub max_eta: Grid2<f64>,
    pub max_speed: Grid2<f64>,
    /// Largest total depth seen on land cells.
    pub max_inundation: Grid2<f64>,
}

impl OutputAccumulators {
    pub fn new(ni: usize, nj: usize) -> Self {
        let z = Grid2::new((0, 0), (ni, nj), 0.0);
        Self {
            max_eta: z.clone(),
            max_speed: z.clone(),
            max_inundation: z,
        }
    }
}

/// Fold the next water level and fluxes into the accumulators.
pub fn accumulate_outputs(state: &mut BlockState, ctx: &BlockContext, wet_threshold: f64) {
    let nxt = 1 - state.cur;
    let eta = &state.eta[nxt];
    let m = &state.m[nxt];
    let n = &state.n[nxt];
    let acc = &mut state.acc;
    for j in 0..ctx.nj as isize {
        for i in 0..ctx.ni as isize {
            let e = eta[(i, j)];
            let h = ctx.h[(i, j)];
            acc.max_eta[(i, j)] = acc.max_eta[(i, j)].max(e);
            let depth = h + e;
            if depth < wet_threshold {
                continue;
            }
            let u = 0.5 * (m[(i, j)] + m[(i + 1, j)]) / depth;
            let v = 0.5 * (n[(i, j)] + n[(i, j + 1)]) / depth;
            let speed = (u * u + v * v).sqrt();
            acc.max_speed[(i, j)] = acc.max_speed[(i, j)].max(speed);
            if h < 0.0 {
                acc.max_inundation[(i, j)] = acc.max_inundation[(i, j)].max(depth);
            }
        }
    }
}
