use super::{split_pair, BlockContext, BlockState, FieldKind, NumericError, StepParams};

/// Continuity update of the interior water level into the next buffer.
///
/// Halo cells are carried over from the current buffer. A dry cell starts
/// from its ground level when water flows in, and no cell drains below its
/// ground.
pub fn update_mass(state: &mut BlockState, ctx: &BlockContext, p: &StepParams) -> Result<(), NumericError> {
    let r = p.dt / ctx.dx;
    let cur = state.cur;
    let (old, new) = split_pair(&mut state.eta, cur);
    let m = &state.m[cur];
    let n = &state.n[cur];
    let wet = &state.wet;
    new.copy_from(old);
    for j in 0..ctx.nj as isize {
        for i in 0..ctx.ni as isize {
            let div_x = m[(i + 1, j)] - m[(i, j)];
            let div_y = n[(i, j + 1)] - n[(i, j)];
            if div_x == 0.0 && div_y == 0.0 {
                continue;
            }
            let h = ctx.h[(i, j)];
            let e_old = old[(i, j)];
            let base = if wet[(i, j)] { e_old } else { e_old.max(-h) };
            let e = base - r * div_x - r * div_y;
            if !e.is_finite() {
                return Err(NumericError {
                    block: ctx.id,
                    field: FieldKind::Eta,
                    i,
                    j,
                });
            }
            new[(i, j)] = e.max(-h);
        }
    }
    for j in 0..ctx.nj as isize {
        for i in 0..ctx.ni as isize {
            state.wet[(i, j)] = ctx.h[(i, j)] + new[(i, j)] >= p.wet_threshold;
        }
    }
    Ok(())
}
