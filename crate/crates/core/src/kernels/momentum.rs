use super::{BlockContext, BlockState, FaceClass, FieldKind, NumericError, StepParams};

/// Total depth and water-level difference across an active face.
#[derive(Clone, Copy)]
struct Face {
    depth: f64,
    grad: f64,
    /// Both neighbours wet; only full faces carry advection.
    full: bool,
}

/// Inactive face; active faces have depth at least the wet threshold.
const CLOSED: Face = Face {
    depth: 0.0,
    grad: 0.0,
    full: false,
};

/// Face between cell `l` (west or south) and cell `r`. A face next to a dry
/// cell is active only while the wet side stands above the dry ground.
#[inline]
fn face(el: f64, hl: f64, wl: bool, er: f64, hr: f64, wr: bool, thr: f64) -> Option<Face> {
    let f = if wl && wr {
        Face {
            depth: 0.5 * ((hl + el) + (hr + er)),
            grad: er - el,
            full: true,
        }
    } else if wl && el > -hr {
        Face {
            depth: el + hr,
            grad: er.max(-hr) - el,
            full: false,
        }
    } else if wr && er > -hl {
        Face {
            depth: er + hl,
            grad: er - el.max(-hl),
            full: false,
        }
    } else {
        return None;
    };
    (f.depth >= thr).then_some(f)
}

/// Donor-cell flux of `q` carried by velocity-like `u` between two faces.
#[inline]
fn upwind(u: f64, q_lo: f64, q_hi: f64) -> f64 {
    u.max(0.0) * q_lo + u.min(0.0) * q_hi
}

/// Momentum update of interior fluxes into the next buffers.
///
/// Reads the next water level and the current fluxes. Computed faces get
/// advection, pressure and implicit Manning friction; wall faces get zero
/// and radiation faces carry an outgoing wave flux. Prolonged faces are
/// left for the parent level to fill.
pub fn update_momentum(state: &mut BlockState, ctx: &BlockContext, p: &StepParams) -> Result<(), NumericError> {
    let (ni, nj) = (ctx.ni as isize, ctx.nj as isize);
    let cur = state.cur;
    let nxt = 1 - cur;
    let thr = p.wet_threshold;
    let (dt, g, dx) = (p.dt, p.g, ctx.dx);
    let [m0, m1] = &mut state.m;
    let (m_old, m_new) = if cur == 0 { (&*m0, m1) } else { (&*m1, m0) };
    let [n0, n1] = &mut state.n;
    let (n_old, n_new) = if cur == 0 { (&*n0, n1) } else { (&*n1, n0) };
    let eta = &state.eta[nxt];
    let wet = &state.wet;
    let h = &ctx.h;
    let man = &ctx.manning;

    // Face states and flux over depth on every face whose two cells are
    // stored, evaluated once per step. Loops below address rows through
    // flat offsets; `sm` and `sn` are the row strides of the M and N grids.
    let (e, hs, ws) = (eta.as_slice(), h.as_slice(), wet.as_slice());
    let (mo, no) = (m_old.as_slice(), n_old.as_slice());
    let sm = m_old.dims().0;
    let sn = n_old.dims().0;
    let mut xf = vec![CLOSED; mo.len()];
    let mut qm = vec![0.0; mo.len()];
    for j in -2..nj + 2 {
        let (ce, ch, cw, k0) = (eta.offset(0, j), h.offset(0, j), wet.offset(0, j), m_old.offset(0, j));
        for i in -1..=ni + 1 {
            let (re, rh, rw) = (
                (ce as isize + i) as usize,
                (ch as isize + i) as usize,
                (cw as isize + i) as usize,
            );
            if let Some(f) = face(e[re - 1], hs[rh - 1], ws[rw - 1], e[re], hs[rh], ws[rw], thr) {
                let k = (k0 as isize + i) as usize;
                qm[k] = mo[k] / f.depth;
                xf[k] = f;
            }
        }
    }
    let mut yf = vec![CLOSED; no.len()];
    let mut qn = vec![0.0; no.len()];
    for j in -1..=nj + 1 {
        let (se, sh, sw) = (eta.dims().0, h.dims().0, wet.dims().0);
        let (ce, ch, cw, k0) = (eta.offset(0, j), h.offset(0, j), wet.offset(0, j), n_old.offset(0, j));
        for i in -2..ni + 2 {
            let (re, rh, rw) = (
                (ce as isize + i) as usize,
                (ch as isize + i) as usize,
                (cw as isize + i) as usize,
            );
            if let Some(f) = face(e[re - se], hs[rh - sh], ws[rw - sw], e[re], hs[rh], ws[rw], thr) {
                let k = (k0 as isize + i) as usize;
                qn[k] = no[k] / f.depth;
                yf[k] = f;
            }
        }
    }

    // Implicit Manning factor; d^(7/3) as d^2 * cbrt(d).
    let friction = |flux: f64, cross: f64, n_face: f64, depth: f64| {
        if n_face == 0.0 || (flux == 0.0 && cross == 0.0) {
            return 0.0;
        }
        let d = depth.max(thr);
        dt * g * n_face * n_face * (flux * flux + cross * cross).sqrt() / (d * d * d.cbrt())
    };
    let err = |field, i, j| NumericError {
        block: ctx.id,
        field,
        i,
        j,
    };

    for j in 0..nj {
        let (km0, kn0, kn1, ke) = (
            m_old.offset(0, j),
            n_old.offset(0, j),
            n_old.offset(0, j + 1),
            man.offset(0, j),
        );
        let mn = man.as_slice();
        for i in 0..=ni {
            if ctx.m_class[(i, j)] != FaceClass::Computed {
                continue;
            }
            let k = km0 + i as usize;
            let f = &xf[k];
            if f.depth == 0.0 {
                m_new[(i, j)] = 0.0;
                continue;
            }
            // N faces west and east of this x-face, below and above it.
            let (sw, se) = (no[kn0 + i as usize - 1], no[kn0 + i as usize]);
            let (nw, ne) = (no[kn1 + i as usize - 1], no[kn1 + i as usize]);
            let m = mo[k];
            let mut adv = 0.0;
            if f.full {
                let along_hi = upwind(0.5 * (mo[k] + mo[k + 1]), qm[k], qm[k + 1]);
                let along_lo = upwind(0.5 * (mo[k - 1] + mo[k]), qm[k - 1], qm[k]);
                let cross_hi = upwind(0.5 * (nw + ne), qm[k], qm[k + sm]);
                let cross_lo = upwind(0.5 * (sw + se), qm[k - sm], qm[k]);
                adv = ((along_hi - along_lo) + (cross_hi - cross_lo)) / dx;
            }
            let pres = g * f.depth * f.grad / dx;
            let n_bar = 0.25 * ((sw + se) + (nw + ne));
            let n_face = 0.5 * (mn[ke + i as usize - 1] + mn[ke + i as usize]);
            let v = (m - dt * (adv + pres)) / (1.0 + friction(m, n_bar, n_face, f.depth));
            if !v.is_finite() {
                return Err(err(FieldKind::M, i, j));
            }
            m_new[(i, j)] = v;
        }
    }

    for j in 0..=nj {
        let (kn0, km0, km1, ke) = (
            n_old.offset(0, j),
            m_old.offset(0, j - 1),
            m_old.offset(0, j),
            man.offset(0, j),
        );
        let (mn, stride_e) = (man.as_slice(), man.dims().0);
        for i in 0..ni {
            if ctx.n_class[(i, j)] != FaceClass::Computed {
                continue;
            }
            let k = kn0 + i as usize;
            let f = &yf[k];
            if f.depth == 0.0 {
                n_new[(i, j)] = 0.0;
                continue;
            }
            // M faces west and east of this y-face, below and above it.
            let (sw, se) = (mo[km0 + i as usize], mo[km0 + i as usize + 1]);
            let (nw, ne) = (mo[km1 + i as usize], mo[km1 + i as usize + 1]);
            let n = no[k];
            let mut adv = 0.0;
            if f.full {
                let along_hi = upwind(0.5 * (no[k] + no[k + sn]), qn[k], qn[k + sn]);
                let along_lo = upwind(0.5 * (no[k - sn] + no[k]), qn[k - sn], qn[k]);
                let cross_hi = upwind(0.5 * (se + ne), qn[k], qn[k + 1]);
                let cross_lo = upwind(0.5 * (sw + nw), qn[k - 1], qn[k]);
                adv = ((along_hi - along_lo) + (cross_hi - cross_lo)) / dx;
            }
            let pres = g * f.depth * f.grad / dx;
            let m_bar = 0.25 * ((sw + se) + (nw + ne));
            let n_face = 0.5 * (mn[ke + i as usize - stride_e] + mn[ke + i as usize]);
            let v = (n - dt * (adv + pres)) / (1.0 + friction(n, m_bar, n_face, f.depth));
            if !v.is_finite() {
                return Err(err(FieldKind::N, i, j));
            }
            n_new[(i, j)] = v;
        }
    }

    // Domain-edge faces, after every computed face is final.
    for j in 0..nj {
        for i in [0, ni] {
            let class = ctx.m_class[(i, j)];
            if !is_edge(class) {
                continue;
            }
            let (cell, outward) = if i == 0 { (0, -1.0) } else { (ni - 1, 1.0) };
            m_new[(i, j)] = edge_flux(class, eta[(cell, j)], h[(cell, j)], outward, g, thr);
        }
    }
    for i in 0..ni {
        for j in [0, nj] {
            let class = ctx.n_class[(i, j)];
            if !is_edge(class) {
                continue;
            }
            let (cell, outward) = if j == 0 { (0, -1.0) } else { (nj - 1, 1.0) };
            n_new[(i, j)] = edge_flux(class, eta[(i, cell)], h[(i, cell)], outward, g, thr);
        }
    }
    Ok(())
}

fn is_edge(class: FaceClass) -> bool {
    matches!(class, FaceClass::Wall | FaceClass::Radiation)
}

/// Domain-edge face value from the adjacent cell; `outward` is the sign
/// of flux leaving the domain. Radiation faces carry the flux of a wave
/// travelling outward, `eta * sqrt(g D)`, which also lets water back in
/// when the level is below datum.
#[inline]
fn edge_flux(class: FaceClass, eta: f64, h: f64, outward: f64, g: f64, thr: f64) -> f64 {
    match class {
        FaceClass::Wall => 0.0,
        FaceClass::Radiation => {
            let d = h + eta;
            if h > 0.0 && d >= thr {
                outward * eta * (g * d).sqrt()
            } else {
                0.0
            }
        }
        FaceClass::Computed | FaceClass::Prolonged => unreachable!("not a domain edge"),
    }
}
