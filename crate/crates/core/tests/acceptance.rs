//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Reference values come from oracles written here, not from the
//! library code under test.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use nested_swe::balance::{
    equal_cell_plan, fit_cost_model, optimize_plan_traced, plan_blocks, rank_costs, CostModel, DecompositionPlan,
    PlanStrategy, ScoreKind, DEFAULT_ITERS,
};
use nested_swe::coupling::{apply_prolongation, apply_restriction, build_links, prolong_flux, restrict_eta, LinkKind};
use nested_swe::exchange::{entry_slice, entry_slice_mut, pack_halo_into, unpack_halo, HaloSchedule};
use nested_swe::grid::config::{InitialCondition, Scenario};
use nested_swe::grid::kochi::build_kochi_scaled;
use nested_swe::grid::{
    Bathymetry, BlockSpec, BoundaryConditions, LevelSpec, NestedGridSystem, Roughness, SimulationConfig,
};
use nested_swe::kernels::{BlockState, FieldKind};
use nested_swe::sim::{run_simulation, PlanSource, RunOptions, Simulation, RASTER_KINDS};
use nested_swe::topology::Topology;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn block(origin: (isize, isize), ni: usize, nj: usize, bathymetry: Bathymetry, manning: f64) -> BlockSpec {
    BlockSpec {
        origin,
        ni,
        nj,
        bathymetry,
        roughness: Roughness::Uniform(manning),
    }
}

fn scenario(levels: Vec<LevelSpec>, dt: f64, initial: InitialCondition) -> Scenario {
    Scenario {
        system: NestedGridSystem::new(levels).expect("valid system"),
        config: SimulationConfig::new(dt),
        initial,
        per_level_ranks: None,
    }
}

fn random_depths(rng: &mut ChaCha8Rng, n: usize) -> Bathymetry {
    let v: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.2) {
                -rng.random_range(0.0..8.0)
            } else {
                rng.random_range(0.5..60.0)
            }
        })
        .collect();
    Bathymetry::Raster(Arc::from(v))
}

fn lake_at_rest() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut coarse = Vec::new();
    for origin in [(0, 0), (120, 0)] {
        coarse.push(block(origin, 120, 150, random_depths(&mut rng, 120 * 150), 0.025));
    }
    let mut fine = Vec::new();
    for origin in [(90, 135), (450, 135)] {
        fine.push(block(origin, 90, 180, random_depths(&mut rng, 90 * 180), 0.025));
    }
    let s = scenario(
        vec![
            LevelSpec {
                dx: 90.0,
                blocks: coarse,
            },
            LevelSpec { dx: 30.0, blocks: fine },
        ],
        0.5,
        InitialCondition::Rest,
    );
    let cells = s.system.total_cells();
    let t = Instant::now();
    let mut sim = Simulation::new(&s, DecompositionPlan::single(s.system.n_blocks())).expect("simulation");
    sim.run(1000).expect("run");
    let secs = t.elapsed().as_secs_f64();
    let mut max_abs = 0.0f64;
    for b in sim.blocks() {
        for kind in FieldKind::ALL {
            for &v in b.field(kind).as_slice() {
                max_abs = max_abs.max(v.abs());
            }
        }
    }
    outcome(
        max_abs == 0.0 && secs < 10.0,
        format!(
            "{cells} cells in {} blocks with land, 1000 steps: max |eta|,|M|,|N| = {max_abs:e}, {secs:.2} s",
            s.system.n_blocks()
        ),
    )
}

fn mass_conservation() -> Outcome {
    let s = scenario(
        vec![LevelSpec {
            dx: 100.0,
            blocks: vec![block((0, 0), 80, 60, Bathymetry::Constant(25.0), 0.025)],
        }],
        1.0,
        InitialCondition::Gaussian {
            x: 3100.0,
            y: 2700.0,
            amplitude: 1.5,
            sigma: 600.0,
        },
    );
    let mut sim = Simulation::new(&s, DecompositionPlan::single(1)).expect("simulation");
    let v0 = sim.level_volume(0);
    let hump0 = sim.block(0).interior_eta_sum();
    sim.run(1000).expect("run");
    let drift = ((sim.level_volume(0) - v0) / v0).abs();
    let hump_drift = ((sim.block(0).interior_eta_sum() - hump0) / hump0).abs();
    outcome(
        drift < 1e-10,
        format!("closed basin, 1000 steps: total volume drift {drift:.2e} (hump volume drift {hump_drift:.2e})"),
    )
}

/// Largest difference between `eta` and its mirror images in x, y and the
/// diagonal.
fn asymmetry(r: &nested_swe::raster::Raster) -> f64 {
    assert_eq!(r.ni, r.nj);
    let n = r.ni;
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let v = r.get(i, j);
            for w in [r.get(n - 1 - i, j), r.get(i, n - 1 - j), r.get(j, i)] {
                worst = worst.max((v - w).abs());
            }
        }
    }
    worst
}

fn mirror_symmetry() -> Outcome {
    let single = scenario(
        vec![LevelSpec {
            dx: 100.0,
            blocks: vec![block((0, 0), 64, 64, Bathymetry::Constant(30.0), 0.025)],
        }],
        1.0,
        InitialCondition::Gaussian {
            x: 3200.0,
            y: 3200.0,
            amplitude: 2.0,
            sigma: 500.0,
        },
    );
    let nested = scenario(
        vec![
            LevelSpec {
                dx: 270.0,
                blocks: vec![block((0, 0), 30, 30, Bathymetry::Constant(50.0), 0.025)],
            },
            LevelSpec {
                dx: 90.0,
                blocks: vec![block((30, 30), 30, 30, Bathymetry::Constant(50.0), 0.025)],
            },
        ],
        1.0,
        InitialCondition::Gaussian {
            x: 4050.0,
            y: 4050.0,
            amplitude: 2.0,
            sigma: 900.0,
        },
    );
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, s) in [("single block", &single), ("two-level", &nested)] {
        let mut sim = Simulation::new(s, DecompositionPlan::single(s.system.n_blocks())).expect("simulation");
        sim.run(500).expect("run");
        let a = (0..s.system.n_levels())
            .map(|l| asymmetry(&sim.eta_raster(l)))
            .fold(0.0, f64::max);
        worst = worst.max(a);
        parts.push(format!("{name} {a:.1e}"));
    }
    outcome(
        worst < 1e-12,
        format!("500 steps, x/y/diagonal mirror asymmetry: {}", parts.join(", ")),
    )
}

fn multi_worker_equivalence() -> Outcome {
    let system = build_kochi_scaled(1e-3).expect("kochi");
    let b = system.level(1).bounds();
    let dx = system.level(1).dx;
    let s = Scenario {
        initial: InitialCondition::Gaussian {
            x: 0.5 * (b.x0 + b.x1) as f64 * dx,
            y: 0.5 * (b.y0 + b.y1) as f64 * dx,
            amplitude: 1.0,
            sigma: 4.0 * dx,
        },
        system,
        config: SimulationConfig::new(0.2),
        per_level_ranks: None,
    };
    let n = s.system.n_blocks();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut random_seps: Vec<usize> = sample(&mut rng, n - 1, 3).into_iter().map(|k| k + 1).collect();
    random_seps.sort_unstable();
    let plans = [
        ("equal-cell", PlanSource::EqualCells, false),
        ("optimized", PlanSource::optimized(CostModel::reference()), false),
        (
            "adversarial",
            PlanSource::Explicit(DecompositionPlan::new(n, vec![1, 2, 3]).unwrap()),
            false,
        ),
        (
            "random",
            PlanSource::Explicit(DecompositionPlan::new(n, random_seps).unwrap()),
            false,
        ),
        ("equal-cell sequential", PlanSource::EqualCells, true),
    ];
    let root = tempfile::tempdir().expect("tempdir");
    let steps = 150;
    let run = |tag: &str, workers, plan: PlanSource, sequential| {
        let dir = root.path().join(tag.replace(' ', "_"));
        run_simulation(
            &s,
            &RunOptions {
                steps,
                workers,
                plan,
                sequential,
                out_dir: Some(dir.clone()),
                ..RunOptions::default()
            },
        )
        .expect("run");
        dir
    };
    let reference = run("one", 1, PlanSource::EqualCells, false);
    let mut names = Vec::new();
    for l in 1..=s.system.n_levels() {
        for kind in RASTER_KINDS {
            names.push(format!("level{l}_{kind}.txt"));
        }
    }
    let read = |dir: &std::path::Path, name: &str| std::fs::read(dir.join(name)).expect("raster file");
    let moved = std::str::from_utf8(&read(&reference, "level5_max_eta.txt"))
        .unwrap()
        .split_whitespace()
        .skip(5)
        .any(|t| t != "0e0" && t != "NaN");
    let mut mismatches = Vec::new();
    for (tag, plan, sequential) in plans {
        let dir = run(tag, 4, plan, sequential);
        for name in &names {
            if read(&reference, name) != read(&dir, name) {
                mismatches.push(format!("{tag}:{name}"));
            }
        }
    }
    outcome(
        mismatches.is_empty() && moved,
        format!(
            "{} raster files x 5 four-worker runs (equal-cell, optimized, adversarial, random, sequential), {steps} steps, \
             finest level disturbed: {moved}; mismatches: {}",
            names.len(),
            if mismatches.is_empty() { "none".into() } else { mismatches.join(" ") }
        ),
    )
}

/// Three levels with siblings on every refined level and a shared coarse edge.
fn roundtrip_system() -> NestedGridSystem {
    let c = |d| Bathymetry::Constant(d);
    NestedGridSystem::new(vec![
        LevelSpec {
            dx: 810.0,
            blocks: vec![block((0, 0), 12, 10, c(40.0), 0.0), block((12, 0), 9, 10, c(40.0), 0.0)],
        },
        LevelSpec {
            dx: 270.0,
            blocks: vec![
                block((6, 6), 15, 12, c(40.0), 0.0),
                block((21, 6), 18, 12, c(40.0), 0.0),
                block((39, 9), 9, 9, c(40.0), 0.0),
            ],
        },
        LevelSpec {
            dx: 90.0,
            blocks: vec![
                block((27, 27), 18, 9, c(40.0), 0.0),
                block((45, 27), 21, 12, c(40.0), 0.0),
            ],
        },
    ])
    .expect("roundtrip system")
}

fn random_plan(rng: &mut ChaCha8Rng, n_blocks: usize) -> DecompositionPlan {
    let ranks = rng.random_range(1..=n_blocks);
    let mut seps: Vec<usize> = sample(rng, n_blocks - 1, ranks - 1)
        .into_iter()
        .map(|k| k + 1)
        .collect();
    seps.sort_unstable();
    DecompositionPlan::new(n_blocks, seps).unwrap()
}

fn randomize(rng: &mut ChaCha8Rng, states: &mut [BlockState]) {
    for s in states {
        for kind in FieldKind::ALL {
            for v in s.field_next_mut(kind).as_mut_slice() {
                *v = rng.random_range(-10.0..10.0);
            }
        }
    }
}

fn value(states: &[BlockState], sys: &NestedGridSystem, id: usize, kind: FieldKind, gi: isize, gj: isize) -> f64 {
    let o = sys.block(id).origin;
    states[id].field_next(kind)[(gi - o.0, gj - o.1)]
}

/// Child-to-parent location map written independently of the library:
/// cells by floor division, faces by rounding to the nearest parent face.
fn parent_of(kind: FieldKind, gi: isize, gj: isize) -> (isize, isize) {
    let near = |g: isize| (g as f64 / 3.0).round() as isize;
    match kind {
        FieldKind::Eta => (gi.div_euclid(3), gj.div_euclid(3)),
        FieldKind::M => (near(gi), gj.div_euclid(3)),
        FieldKind::N => (gi.div_euclid(3), near(gj)),
    }
}

fn roundtrip_trial(rng: &mut ChaCha8Rng, sys: &NestedGridSystem, topo: &Topology) -> Result<(), String> {
    let plan = random_plan(rng, sys.n_blocks());
    let mut original: Vec<BlockState> = sys.blocks().map(|b| BlockState::new(b.ni, b.nj)).collect();
    randomize(rng, &mut original);

    // Halo messages: entries tile the message, and every unpacked value is
    // the sender's value at the same global location.
    let halo = HaloSchedule::build(topo, &plan);
    let mut received = original.clone();
    let mut written: BTreeMap<(usize, FieldKind, isize, isize), f64> = BTreeMap::new();
    for pairs in [&halo.eta, &halo.flux] {
        for pair in pairs.iter() {
            let mut next = 1;
            for e in &pair.entries {
                if e.offset != next || e.len != e.rect.area() {
                    return Err(format!("halo entry {e:?} breaks tiling at {next}"));
                }
                next += e.len;
            }
            if pair.len != next - 1 {
                return Err(format!(
                    "pair {}->{} length {} != {}",
                    pair.sender,
                    pair.receiver,
                    pair.len,
                    next - 1
                ));
            }
            let mut message = vec![f64::NAN; pair.len];
            for e in &pair.entries {
                let o = sys.block(e.src_block).origin;
                pack_halo_into(&original[e.src_block], o, e, entry_slice_mut(&mut message, e));
            }
            for e in &pair.entries {
                let o = sys.block(e.dst_block).origin;
                unpack_halo(&mut received[e.dst_block], o, e, entry_slice(&message, e)).map_err(|x| x.to_string())?;
                if unpack_halo(&mut received[e.dst_block], o, e, &message[..e.len.saturating_sub(1)]).is_ok() {
                    return Err("short payload accepted".into());
                }
                for (gi, gj) in e.rect.cells() {
                    written.insert(
                        (e.dst_block, e.field, gi, gj),
                        value(&original, sys, e.src_block, e.field, gi, gj),
                    );
                }
            }
        }
    }
    for b in sys.blocks() {
        for kind in FieldKind::ALL {
            let loc = kind.extended(b.ni, b.nj);
            for (i, j) in loc.cells() {
                let (gi, gj) = (i + b.origin.0, j + b.origin.1);
                let got = received[b.id].field_next(kind)[(i, j)];
                let want = written
                    .get(&(b.id, kind, gi, gj))
                    .copied()
                    .unwrap_or(original[b.id].field_next(kind)[(i, j)]);
                if got.to_bits() != want.to_bits() {
                    return Err(format!("halo block {} {kind:?} ({gi},{gj}): {got} != {want}", b.id));
                }
            }
        }
    }

    // Inter-grid links: offsets tile each message, restriction delivers the
    // 3x3 mean and prolongation the parent value behind each location.
    let links = build_links(sys, topo, &plan).map_err(|e| e.to_string())?;
    let mut groups: BTreeMap<(LinkKind, usize, usize, usize), usize> = BTreeMap::new();
    for l in &links {
        let next = groups.entry((l.kind, l.child_level, l.sender, l.receiver)).or_insert(0);
        if l.offset != *next {
            return Err(format!("link offset {} != {next}", l.offset));
        }
        let mut seg_next = l.offset;
        for s in &l.segments {
            let area = if l.kind == LinkKind::Restrict {
                s.parent.area()
            } else {
                s.child.area()
            };
            if s.offset != seg_next || s.len != area {
                return Err(format!("segment {s:?} breaks tiling at {seg_next}"));
            }
            seg_next += s.len;
        }
        if seg_next != l.offset + l.len {
            return Err("link length mismatch".into());
        }
        *next += l.len;
    }
    let mut buffers: BTreeMap<(LinkKind, usize, usize, usize), Vec<f64>> =
        groups.iter().map(|(k, &len)| (*k, vec![f64::NAN; len])).collect();
    for l in &links {
        let buf = buffers.get_mut(&(l.kind, l.child_level, l.sender, l.receiver)).unwrap();
        match l.kind {
            LinkKind::Restrict => restrict_eta(&original[l.child_block], sys.block(l.child_block).origin, l, buf),
            LinkKind::Prolong => prolong_flux(&original[l.parent_block], sys.block(l.parent_block).origin, l, buf),
        }
    }
    let mut received = original.clone();
    for l in &links {
        let buf = &buffers[&(l.kind, l.child_level, l.sender, l.receiver)];
        match l.kind {
            LinkKind::Restrict => {
                apply_restriction(&mut received[l.parent_block], sys.block(l.parent_block).origin, l, buf)
            }
            LinkKind::Prolong => {
                apply_prolongation(&mut received[l.child_block], sys.block(l.child_block).origin, l, buf)
            }
        }
    }
    for l in &links {
        for s in &l.segments {
            match l.kind {
                LinkKind::Restrict => {
                    for (pi, pj) in s.parent.cells() {
                        let mut sum = 0.0;
                        for dj in 0..3 {
                            for di in 0..3 {
                                sum += value(&original, sys, l.child_block, FieldKind::Eta, 3 * pi + di, 3 * pj + dj);
                            }
                        }
                        let want = sum / 9.0;
                        let got = value(&received, sys, l.parent_block, FieldKind::Eta, pi, pj);
                        if got.to_bits() != want.to_bits() {
                            return Err(format!("restriction ({pi},{pj}): {got} != {want}"));
                        }
                    }
                }
                LinkKind::Prolong => {
                    for (gi, gj) in s.child.cells() {
                        let (pi, pj) = parent_of(s.field, gi, gj);
                        let want = value(&original, sys, l.parent_block, s.field, pi, pj);
                        let got = value(&received, sys, l.child_block, s.field, gi, gj);
                        if got.to_bits() != want.to_bits() {
                            return Err(format!("prolongation {:?} ({gi},{gj}): {got} != {want}", s.field));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn roundtrips() -> Outcome {
    let sys = roundtrip_system();
    let topo = Topology::build(&sys, &BoundaryConditions::default()).expect("topology");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    for trial in 0..1000 {
        if let Err(e) = roundtrip_trial(&mut rng, &sys, &topo) {
            failures.push(format!("trial {trial}: {e}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "1000 random states and plans over {} blocks on 3 levels: {} failed{}",
            sys.n_blocks(),
            failures.len(),
            failures.first().map(|f| format!(" ({f})")).unwrap_or_default()
        ),
    )
}

fn cost_model_fit() -> Outcome {
    let (a, b) = (1.09e-4, 46.2);
    let exact: Vec<(f64, f64)> = (0..40)
        .map(|k| {
            let x = 1.0e4 + 1.6e4 * k as f64;
            (x, a * x + b)
        })
        .collect();
    let m = fit_cost_model(&exact).expect("fit");
    let exact_err = ((m.slope - a) / a).abs().max(((m.intercept - b) / b).abs());
    let exact_ok = exact_err < 1e-9 && m.r_squared == 1.0;

    let noise = Normal::new(0.0, 5.0).unwrap();
    let mut worst_slope = 0.0f64;
    let (mut r2_min, mut r2_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<(f64, f64)> = (0..400)
            .map(|_| {
                let x: f64 = rng.random_range(1.0e4..6.4e5);
                (x, a * x + b + noise.sample(&mut rng))
            })
            .collect();
        let m = fit_cost_model(&samples).expect("fit");
        worst_slope = worst_slope.max(((m.slope - a) / a).abs());
        r2_min = r2_min.min(m.r_squared);
        r2_max = r2_max.max(m.r_squared);
    }
    let noisy_ok = worst_slope < 0.05 && r2_min >= 0.9 && r2_max <= 1.0;
    outcome(
        exact_ok && noisy_ok,
        format!(
            "exact: max coefficient error {exact_err:.1e}, R2 {}; sigma 5 us x 20 seeds: worst slope error {:.2}%, R2 in [{r2_min:.3}, {r2_max:.3}]",
            m.r_squared,
            100.0 * worst_slope
        ),
    )
}

/// Smallest achievable maximum rank cost over every contiguous split.
fn brute_force(cells: &[usize], ranks: usize, model: &CostModel) -> f64 {
    fn go(costs: &[f64], ranks: usize) -> f64 {
        if ranks == 1 {
            return costs.iter().sum();
        }
        let mut best = f64::INFINITY;
        let mut head = 0.0;
        for k in 1..=costs.len() - (ranks - 1) {
            head += costs[k - 1];
            best = best.min(head.max(go(&costs[k..], ranks - 1)));
        }
        best
    }
    let costs: Vec<f64> = cells.iter().map(|&c| model.block_cost(c)).collect();
    go(&costs, ranks)
}

fn optimizer_vs_brute_force() -> Outcome {
    let model = CostModel::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut within = 0;
    let mut worst_gap = 0.0f64;
    let mut monotone = true;
    for inst in 0..20u64 {
        let n = rng.random_range(4..=12);
        let ranks = rng.random_range(2..=4.min(n));
        let cells: Vec<usize> = (0..n).map(|_| rng.random_range(1_000..1_500_000)).collect();
        let (plan, trace) =
            optimize_plan_traced(&cells, ranks, &model, DEFAULT_ITERS, DEFAULT_ITERS, inst).expect("optimize");
        let got = ScoreKind::MaxCost.score(&rank_costs(&plan, &cells, &model));
        let best = brute_force(&cells, ranks, &model);
        let gap = got / best - 1.0;
        worst_gap = worst_gap.max(gap);
        if gap <= 0.05 {
            within += 1;
        }
        let mut current: Option<(ScoreKind, f64)> = None;
        for r in &trace.records {
            if r.accepted && r.proposed.partial_cmp(&r.before) != Some(std::cmp::Ordering::Less) {
                monotone = false;
            }
            if let Some((phase, score)) = current {
                if phase == r.phase && (r.before.to_bits() != score.to_bits()) {
                    monotone = false;
                }
            }
            current = Some((r.phase, if r.accepted { r.proposed } else { r.before }));
        }
        let initial = ScoreKind::MaxCost.score(&rank_costs(&trace.initial, &cells, &model));
        if got > initial {
            monotone = false;
        }
    }
    outcome(
        within >= 18 && monotone,
        format!(
            "{within}/20 instances within 5% of exhaustive optimum (worst gap {:.2}%), scores monotone: {monotone}",
            100.0 * worst_gap
        ),
    )
}

fn max_cost(plan: &DecompositionPlan, cells: &[usize], model: &CostModel) -> f64 {
    ScoreKind::MaxCost.score(&rank_costs(plan, cells, model))
}

fn level5_improvement(scale: f64, seed: u64) -> (f64, f64, f64, f64) {
    let sys = build_kochi_scaled(scale).expect("kochi");
    let cells: Vec<usize> = sys.level(4).blocks.iter().map(|b| b.cell_count()).collect();
    let model = CostModel::reference();
    let base = max_cost(&equal_cell_plan(&cells, 16).unwrap(), &cells, &model);
    let strategy = PlanStrategy::Optimized {
        model,
        iters_phase1: DEFAULT_ITERS,
        iters_phase2: DEFAULT_ITERS,
        seed,
    };
    let opt = max_cost(&plan_blocks(&cells, 16, &strategy).unwrap(), &cells, &model);
    let best = brute_force_dp(&cells, 16, &model);
    (base, opt, 1.0 - opt / base, 1.0 - best / base)
}

/// Exact minimax contiguous partition by dynamic programming.
fn brute_force_dp(cells: &[usize], ranks: usize, model: &CostModel) -> f64 {
    let n = cells.len();
    let mut prefix = vec![0.0; n + 1];
    for (k, &c) in cells.iter().enumerate() {
        prefix[k + 1] = prefix[k] + model.block_cost(c);
    }
    // best[r][k]: first k blocks on r ranks.
    let mut best = vec![vec![f64::INFINITY; n + 1]; ranks + 1];
    best[0][0] = 0.0;
    for r in 1..=ranks {
        for k in r..=n {
            for s in r - 1..k {
                let v = best[r - 1][s].max(prefix[k] - prefix[s]);
                if v < best[r][k] {
                    best[r][k] = v;
                }
            }
        }
    }
    best[ranks][n]
}

fn load_balance() -> Outcome {
    let (base, opt, gain, optimum) = level5_improvement(1e-3, 0);
    let seeds: Vec<f64> = (1..10).map(|s| level5_improvement(1e-3, s).2).collect();
    let (lo, hi) = seeds.iter().fold((gain, gain), |(a, b), &g| (a.min(g), b.max(g)));
    let (_, _, full_gain, full_optimum) = level5_improvement(1.0, 0);
    outcome(
        gain >= 0.25,
        format!(
            "1/1000 inventory, level 5 on 16 ranks: max {base:.1} -> {opt:.1} us, {:.1}% reduction (seeds 0-9: {:.1}%..{:.1}%, exact optimum {:.1}%); full-scale inventory: {:.1}% (exact optimum {:.1}%)",
            100.0 * gain,
            100.0 * lo,
            100.0 * hi,
            100.0 * optimum,
            100.0 * full_gain,
            100.0 * full_optimum
        ),
    )
}

fn nested_sanity() -> Outcome {
    let hump = InitialCondition::Gaussian {
        x: 5400.0,
        y: 5400.0,
        amplitude: 1.0,
        sigma: 1500.0,
    };
    let nested = scenario(
        vec![
            LevelSpec {
                dx: 270.0,
                blocks: vec![block((0, 0), 40, 40, Bathymetry::Constant(50.0), 0.0)],
            },
            LevelSpec {
                dx: 90.0,
                blocks: vec![block((30, 30), 60, 60, Bathymetry::Constant(50.0), 0.0)],
            },
        ],
        1.0,
        hump.clone(),
    );
    let fine = scenario(
        vec![LevelSpec {
            dx: 90.0,
            blocks: vec![block((0, 0), 120, 120, Bathymetry::Constant(50.0), 0.0)],
        }],
        1.0,
        hump,
    );
    let mut a = Simulation::new(&nested, DecompositionPlan::single(2)).expect("nested");
    let mut b = Simulation::new(&fine, DecompositionPlan::single(1)).expect("fine");
    let mut peak = 0.0f64;
    let mut series = Vec::new();
    for _ in 0..200 {
        a.step().expect("nested step");
        b.step().expect("fine step");
        let child = a.eta_raster(1);
        let reference = b.eta_raster(0);
        let (mut diff2, mut ref2) = (0.0, 0.0);
        for j in 0..child.nj {
            for i in 0..child.ni {
                let r = reference.get(i + 30, j + 30);
                diff2 += (child.get(i, j) - r).powi(2);
                ref2 += r * r;
                peak = peak.max(r.abs());
            }
        }
        let cells = (child.ni * child.nj) as f64;
        series.push(((diff2 / cells).sqrt(), (diff2 / ref2).sqrt()));
    }
    let worst = series.iter().map(|s| s.0).fold(0.0, f64::max) / peak;
    let final_rel = series.last().unwrap().1;
    outcome(
        worst < 0.05,
        format!(
            "refined region vs uniform fine grid, 200 steps: max RMS difference {:.2}% of peak eta (relative L2 at step 200: {:.1}%)",
            100.0 * worst,
            100.0 * final_rel
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("lake at rest", lake_at_rest),
        ("mass conservation", mass_conservation),
        ("mirror symmetry", mirror_symmetry),
        ("multi-worker equivalence", multi_worker_equivalence),
        ("pack/unpack and inter-grid roundtrips", roundtrips),
        ("cost-model fit", cost_model_fit),
        ("optimizer vs brute force", optimizer_vs_brute_force),
        ("load-balance improvement", load_balance),
        ("nested-grid sanity", nested_sanity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
