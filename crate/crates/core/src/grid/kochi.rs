//! Synthetic five-level system shaped after the Kochi coastal model.
//!
//! Block counts per level are 1/3/9/11/60 and per-level cell totals follow
//! the reference inventory scaled by `scale`. Each refined level is a strip
//! of side-by-side blocks following a straight coastline, nested inside the
//! uniform part of its parent strip with a one-parent-cell margin. At
//! `scale = 1` the totals match the reference inventory exactly; the last
//! block of a level absorbs the remainder with a shorter height when the
//! target does not factor into a single strip height.

use std::str::FromStr;

use super::{Bathymetry, BlockSpec, GridError, LevelSpec, NestedGridSystem, Roughness, Slope, REFINEMENT};

/// Cell totals of the reference inventory, coarsest level first.
pub const KOCHI_CELLS: [u64; 5] = [2_012_940, 1_703_484, 2_230_056, 9_863_424, 31_401_540];
pub const KOCHI_BLOCKS: [usize; 5] = [1, 3, 9, 11, 60];
pub const KOCHI_DX: [f64; 5] = [810.0, 270.0, 90.0, 30.0, 10.0];
pub const KOCHI_TOTAL_CELLS: u64 = 47_211_444;

/// Coarsest level extent at scale 1 (x by y cells).
const LEVEL1_CELLS: (usize, usize) = (1266, 1590);
/// Strip aspect ratio (width / height) for levels 2..5.
const STRIP_ASPECT: [f64; 4] = [5.0, 16.0, 14.0, 28.0];
/// Coastline position as a fraction of the coarsest level height.
const COAST_FRACTION: f64 = 0.3;
const SEABED_GRADIENT: f64 = 0.01;
const MAX_DEPTH: f64 = 4000.0;
pub const DEFAULT_MANNING: f64 = 0.025;

/// Relative block widths inside each refined strip. Level 5 alternates runs
/// of large blocks with runs of small coastline-detail blocks.
fn width_weights(level: usize) -> Vec<f64> {
    match level {
        1 => vec![3.0, 4.0, 3.0],
        2 => vec![4.0, 2.0, 5.0, 3.0, 6.0, 2.0, 4.0, 3.0, 5.0],
        3 => vec![3.0, 5.0, 2.0, 6.0, 4.0, 7.0, 3.0, 5.0, 4.0, 6.0, 2.0],
        4 => {
            let runs: [(f64, usize); 7] = [
                (10.0, 6),
                (1.0, 14),
                (12.0, 7),
                (1.0, 10),
                (4.0, 8),
                (1.0, 9),
                (10.0, 6),
            ];
            runs.iter().flat_map(|&(w, n)| std::iter::repeat_n(w, n)).collect()
        }
        _ => unreachable!("no strip weights for level index {level}"),
    }
}

/// A positive scale factor, parsed from `"1/1000"` or `"0.001"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scale(pub f64);

impl FromStr for Scale {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GridError::InvalidScale(s.to_string());
        let value = match s.split_once('/') {
            Some((num, den)) => {
                let n: f64 = num.trim().parse().map_err(|_| bad())?;
                let d: f64 = den.trim().parse().map_err(|_| bad())?;
                n / d
            }
            None => s.trim().parse().map_err(|_| bad())?,
        };
        if value.is_finite() && value > 0.0 {
            Ok(Scale(value))
        } else {
            Err(bad())
        }
    }
}

/// Still-water depth shared by every level: sea below the coastline
/// (small `y`), rising land above it.
pub fn kochi_bathymetry(scale: f64) -> Slope {
    let height_m = scaled_len(LEVEL1_CELLS.1, scale.sqrt()) as f64 * KOCHI_DX[0];
    let coast_y = COAST_FRACTION * height_m;
    Slope {
        depth_at_origin: SEABED_GRADIENT * coast_y,
        gradient_x: 0.0,
        gradient_y: -SEABED_GRADIENT,
        max_depth: MAX_DEPTH,
    }
}

fn scaled_len(n: usize, s: f64) -> usize {
    (n as f64 * s).round() as usize
}

/// Largest-remainder apportionment of `total` by `weights`, ties to the
/// lower index.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let raw: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let rem = total - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - out[a] as f64;
        let fb = raw[b] - out[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(rem) {
        out[i] += 1;
    }
    out
}

/// Uniform strip of a level in that level's cell indices, excluding a
/// shorter remainder block.
#[derive(Clone, Copy, Debug)]
struct Strip {
    x0: isize,
    y0: isize,
    width: usize,
    height: usize,
}

/// Build the synthetic system. Every block keeps at least 3x3 cells or the
/// first underflowing block is named in the error.
pub fn build_kochi_scaled(scale: f64) -> Result<NestedGridSystem, GridError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(GridError::InvalidScale(scale.to_string()));
    }
    let s = scale.sqrt();
    let (w1, h1) = if scale == 1.0 {
        LEVEL1_CELLS
    } else {
        (scaled_len(LEVEL1_CELLS.0, s), scaled_len(LEVEL1_CELLS.1, s))
    };
    if w1 < 3 || h1 < 3 {
        return Err(GridError::ScaleUnderflow { level: 1, block: 1 });
    }
    let seabed = Bathymetry::Slope(kochi_bathymetry(scale));
    let roughness = Roughness::Uniform(DEFAULT_MANNING);
    let coast_y_m = COAST_FRACTION * h1 as f64 * KOCHI_DX[0];

    let mut levels = vec![LevelSpec {
        dx: KOCHI_DX[0],
        blocks: vec![BlockSpec {
            origin: (0, 0),
            ni: w1,
            nj: h1,
            bathymetry: seabed.clone(),
            roughness: roughness.clone(),
        }],
    }];
    let mut parent = Strip {
        x0: 0,
        y0: 0,
        width: w1,
        height: h1,
    };

    for k in 1..5 {
        let level_no = k + 1;
        let weights = width_weights(k);
        // Work in parent cells: each is a 3x3 patch of this level.
        let target = (KOCHI_CELLS[k] as f64 * scale / 9.0).round() as usize;
        if parent.height < 3 || parent.width < 3 {
            return Err(GridError::ScaleMisfit { level: level_no });
        }
        let height = ((target as f64 / STRIP_ASPECT[k - 1]).sqrt().round() as usize).clamp(1, parent.height - 2);
        let mut widths = apportion(target / height, &weights);
        if let Some(pos) = widths.iter().position(|&w| w == 0) {
            return Err(GridError::ScaleUnderflow {
                level: level_no,
                block: pos + 1,
            });
        }
        let remainder = target - height * (target / height);
        let mut tail: Option<(usize, usize)> = None;
        if remainder > 0 {
            if let Some((tail_h, tail_w, rest)) = absorb_remainder(target, height, widths[widths.len() - 1]) {
                widths = apportion(rest, &weights[..weights.len() - 1]);
                if let Some(pos) = widths.iter().position(|&w| w == 0) {
                    return Err(GridError::ScaleUnderflow {
                        level: level_no,
                        block: pos + 1,
                    });
                }
                widths.push(tail_w);
                tail = Some((tail_h, tail_w));
            }
        }
        let total_width: usize = widths.iter().sum();
        if total_width + 2 > parent.width {
            return Err(GridError::ScaleMisfit { level: level_no });
        }
        let x0 = parent.x0 + ((parent.width - total_width) / 2) as isize;
        let coast = coast_y_m / KOCHI_DX[k - 1];
        let y_lo = parent.y0 + 1;
        let y_hi = parent.y0 + (parent.height - height) as isize - 1;
        let y0 = ((coast - height as f64 / 3.0).round() as isize).clamp(y_lo, y_hi);

        let mut blocks = Vec::with_capacity(widths.len());
        let mut x = x0;
        for (i, &w) in widths.iter().enumerate() {
            let h = match tail {
                Some((th, _)) if i + 1 == widths.len() => th,
                _ => height,
            };
            blocks.push(BlockSpec {
                origin: (x * REFINEMENT, y0 * REFINEMENT),
                ni: w * REFINEMENT as usize,
                nj: h * REFINEMENT as usize,
                bathymetry: seabed.clone(),
                roughness: roughness.clone(),
            });
            x += w as isize;
        }
        let uniform_width = match tail {
            Some((_, tw)) => total_width - tw,
            None => total_width,
        };
        parent = Strip {
            x0: x0 * REFINEMENT,
            y0: y0 * REFINEMENT,
            width: uniform_width * REFINEMENT as usize,
            height: height * REFINEMENT as usize,
        };
        levels.push(LevelSpec {
            dx: KOCHI_DX[k],
            blocks,
        });
    }
    NestedGridSystem::new(levels)
}

/// Find a last block `tail_h x tail_w` (tail_h < height) so the remaining
/// blocks at full `height` make up `target` exactly. Returns the tail shape
/// and the total width left for the other blocks.
fn absorb_remainder(target: usize, height: usize, last_width: usize) -> Option<(usize, usize, usize)> {
    let lo_h = height.div_ceil(2);
    for tail_h in (lo_h..height).rev() {
        let lo_w = last_width.saturating_sub(height).max(1);
        for tail_w in lo_w..=last_width + height {
            let used = tail_h * tail_w;
            if used < target && (target - used).is_multiple_of(height) {
                return Some((tail_h, tail_w, (target - used) / height));
            }
        }
    }
    None
}
