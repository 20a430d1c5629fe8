//! Per-level rasters and the timing table.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::field::Grid2;
use crate::grid::NestedGridSystem;
use crate::kernels::{BlockState, FieldKind};
use crate::raster::Raster;

use super::RankTiming;

/// File stems of the rasters written per level.
pub const RASTER_KINDS: [&str; 4] = ["max_eta", "max_speed", "max_inundation", "eta"];

/// Interior values of every block of `level` on the level's bounding box.
/// `blocks` is indexed by block id.
pub fn level_raster(
    system: &NestedGridSystem,
    level: usize,
    blocks: &[&BlockState],
    pick: impl Fn(&BlockState) -> &Grid2<f64>,
) -> Raster {
    let lv = system.level(level);
    let bounds = lv.bounds();
    let (ni, nj) = (bounds.width(), bounds.height());
    let mut values = vec![f64::NAN; ni * nj];
    for b in &lv.blocks {
        let f = pick(blocks[b.id]);
        for j in 0..b.nj as isize {
            for i in 0..b.ni as isize {
                let x = (b.origin.0 + i - bounds.x0) as usize;
                let y = (b.origin.1 + j - bounds.y0) as usize;
                values[y * ni + x] = f[(i, j)];
            }
        }
    }
    Raster {
        ni,
        nj,
        dx: lv.dx,
        x0: bounds.x0 as f64 * lv.dx,
        y0: bounds.y0 as f64 * lv.dx,
        values,
    }
}

/// Write `level{k}_{kind}.txt` for every level (k from 1) and every kind
/// in [`RASTER_KINDS`].
pub fn emit_rasters(system: &NestedGridSystem, blocks: &[&BlockState], dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for level in 0..system.n_levels() {
        for kind in RASTER_KINDS {
            let r = match kind {
                "max_eta" => level_raster(system, level, blocks, |s| &s.acc.max_eta),
                "max_speed" => level_raster(system, level, blocks, |s| &s.acc.max_speed),
                "max_inundation" => level_raster(system, level, blocks, |s| &s.acc.max_inundation),
                _ => level_raster(system, level, blocks, |s| s.field(FieldKind::Eta)),
            };
            let path = dir.join(format!("level{}_{kind}.txt", level + 1));
            r.write(&path)?;
            files.push(path);
        }
    }
    Ok(files)
}

/// `rank,mass,...,total` in seconds, one row per rank.
pub fn write_timing_csv(timings: &[RankTiming], path: &Path) -> io::Result<()> {
    let mut s = String::from("rank");
    for c in RankTiming::COLUMNS {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for (rank, t) in timings.iter().enumerate() {
        write!(s, "{rank}").unwrap();
        for v in t.values() {
            write!(s, ",{v:.9}").unwrap();
        }
        s.push('\n');
    }
    std::fs::write(path, s)
}
