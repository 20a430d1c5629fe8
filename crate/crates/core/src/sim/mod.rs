//! Time integration over all ranks.
//!
//! Every step runs the same stage sequence on every rank:
//!
//! 1. mass update of all blocks;
//! 2. restriction of child water level into parents, finest level first;
//! 3. water-level halo exchange;
//! 4. momentum update;
//! 5. prolongation of parent fluxes and water level, coarsest level first;
//! 6. flux halo exchange;
//! 7. output accumulation;
//! 8. buffer swap.
//!
//! Before step 1 a prologue writes the initial water level and runs every
//! transfer once, so step 1 starts from filled halos.
//!
//! Each location has exactly one source and ranks only talk through
//! messages, so results do not depend on the number of ranks or on thread
//! timing.

mod output;
mod worker;

pub use output::{emit_rasters, level_raster, write_timing_csv, RASTER_KINDS};

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::balance::{system_plan, BalanceError, CostModel, DecompositionPlan, PlanStrategy, DEFAULT_ITERS};
use crate::coupling::CouplingError;
use crate::exchange::{begin_phase, finish_phase, run_exchange_phase, write_trace, ExchangeError, Mailbox, MailboxSet};
use crate::grid::config::{ConfigError, Scenario};
use crate::grid::{validate_system, NestedGridSystem, ValidationReport};
use crate::kernels::{BlockState, FieldKind, NumericError};
use crate::raster::Raster;
use crate::topology::TopologyError;

use worker::{prologue_actions, step_actions, Action, Model, Worker};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid configuration:\n{0}")]
    Validation(ValidationReport),
    #[error(transparent)]
    Plan(#[from] BalanceError),
    #[error("plan covers {plan_blocks} blocks on {plan_ranks} ranks, run has {blocks} blocks on {workers} workers")]
    PlanMismatch {
        plan_blocks: usize,
        plan_ranks: usize,
        blocks: usize,
        workers: usize,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Exchange(#[from] ExchangeError),
    #[error("worker {rank} panicked")]
    WorkerPanic { rank: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Stages of a step, in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Mass,
    Restrict,
    HaloEta,
    Momentum,
    Prolong,
    HaloFlux,
    Output,
    Swap,
}

impl Stage {
    pub const ORDER: [Stage; 8] = [
        Stage::Mass,
        Stage::Restrict,
        Stage::HaloEta,
        Stage::Momentum,
        Stage::Prolong,
        Stage::HaloFlux,
        Stage::Output,
        Stage::Swap,
    ];
}

/// Busy seconds per routine on one rank. Waiting for messages is not
/// charged to any routine; it is part of `total` only.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RankTiming {
    pub mass: f64,
    pub momentum: f64,
    pub restrict: f64,
    pub prolong: f64,
    pub halo_eta: f64,
    pub halo_flux: f64,
    pub output: f64,
    /// Wall time of the rank's step loop.
    pub total: f64,
}

impl RankTiming {
    pub const COLUMNS: [&'static str; 8] = [
        "mass",
        "momentum",
        "restrict",
        "prolong",
        "halo_eta",
        "halo_flux",
        "output",
        "total",
    ];

    fn add(&mut self, stage: Stage, secs: f64) {
        match stage {
            Stage::Mass => self.mass += secs,
            Stage::Restrict => self.restrict += secs,
            Stage::HaloEta => self.halo_eta += secs,
            Stage::Momentum => self.momentum += secs,
            Stage::Prolong => self.prolong += secs,
            Stage::HaloFlux => self.halo_flux += secs,
            Stage::Output => self.output += secs,
            Stage::Swap => {}
        }
    }

    pub fn values(&self) -> [f64; 8] {
        [
            self.mass,
            self.momentum,
            self.restrict,
            self.prolong,
            self.halo_eta,
            self.halo_flux,
            self.output,
            self.total,
        ]
    }

    /// Sum of the seven routine timers.
    pub fn routines(&self) -> f64 {
        self.values()[..7].iter().sum()
    }
}

/// Where the decomposition comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum PlanSource {
    EqualCells,
    Optimized {
        model: CostModel,
        iters_phase1: usize,
        iters_phase2: usize,
    },
    File(PathBuf),
    Explicit(DecompositionPlan),
}

impl PlanSource {
    pub fn optimized(model: CostModel) -> Self {
        PlanSource::Optimized {
            model,
            iters_phase1: DEFAULT_ITERS,
            iters_phase2: DEFAULT_ITERS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub steps: u64,
    pub workers: usize,
    pub plan: PlanSource,
    pub seed: u64,
    /// Rasters, timing table and plan go here when set.
    pub out_dir: Option<PathBuf>,
    /// Write per-block water level every this many steps.
    pub snapshot_every: Option<u64>,
    /// Record every message in `trace.bin`.
    pub trace: bool,
    /// Run all ranks from the calling thread.
    pub sequential: bool,
    /// How long a rank waits for a message before reporting it missing.
    pub stall_timeout: Duration,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            steps: 0,
            workers: 1,
            plan: PlanSource::EqualCells,
            seed: 0,
            out_dir: None,
            snapshot_every: None,
            trace: false,
            sequential: false,
            stall_timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub steps: u64,
    pub plan: DecompositionPlan,
    pub timings: Vec<RankTiming>,
    /// Stages run by rank 0, one entry per stage per step.
    pub phase_log: Vec<Stage>,
    /// Messages between distinct ranks, prologue included.
    pub messages_sent: u64,
    /// Messages a step is scheduled to send.
    pub messages_per_step: usize,
    /// Final block states in block order.
    pub blocks: Vec<BlockState>,
    /// Files written to the output directory.
    pub files: Vec<PathBuf>,
}

/// Decomposition for `scenario` on `workers` ranks.
pub fn resolve_plan(
    scenario: &Scenario,
    workers: usize,
    source: &PlanSource,
    seed: u64,
) -> Result<DecompositionPlan, SimError> {
    let budget = scenario.per_level_ranks.as_deref();
    let plan = match source {
        PlanSource::EqualCells => system_plan(&scenario.system, workers, budget, &PlanStrategy::EqualCells)?,
        PlanSource::Optimized {
            model,
            iters_phase1,
            iters_phase2,
        } => system_plan(
            &scenario.system,
            workers,
            budget,
            &PlanStrategy::Optimized {
                model: *model,
                iters_phase1: *iters_phase1,
                iters_phase2: *iters_phase2,
                seed,
            },
        )?,
        PlanSource::File(path) => DecompositionPlan::read(path)?,
        PlanSource::Explicit(plan) => plan.clone(),
    };
    if plan.n_blocks() != scenario.system.n_blocks() || plan.n_ranks() != workers {
        return Err(SimError::PlanMismatch {
            plan_blocks: plan.n_blocks(),
            plan_ranks: plan.n_ranks(),
            blocks: scenario.system.n_blocks(),
            workers,
        });
    }
    Ok(plan)
}

/// All ranks of a run stepped from the calling thread.
#[derive(Debug)]
pub struct Simulation {
    model: Arc<Model>,
    workers: Vec<Worker>,
    mailboxes: Vec<Mailbox>,
    shared: MailboxSet,
    actions: Vec<Action>,
    steps_done: u64,
}

impl Simulation {
    /// Validate, build schedules and run the prologue.
    pub fn new(scenario: &Scenario, plan: DecompositionPlan) -> Result<Self, SimError> {
        Self::with_trace(scenario, plan, false)
    }

    fn with_trace(scenario: &Scenario, plan: DecompositionPlan, trace: bool) -> Result<Self, SimError> {
        let report = validate_system(&scenario.system, &scenario.config);
        if !report.is_ok() {
            return Err(SimError::Validation(report));
        }
        if plan.n_blocks() != scenario.system.n_blocks() {
            return Err(SimError::PlanMismatch {
                plan_blocks: plan.n_blocks(),
                plan_ranks: plan.n_ranks(),
                blocks: scenario.system.n_blocks(),
                workers: plan.n_ranks(),
            });
        }
        let n = plan.n_ranks();
        let model = Arc::new(Model::new(
            scenario.system.clone(),
            &scenario.config,
            scenario.initial.clone(),
            plan,
        )?);
        let workers = (0..n).map(|r| Worker::new(r, Arc::clone(&model))).collect();
        let (mailboxes, shared) = Mailbox::network(n, None, trace);
        let mut sim = Self {
            actions: step_actions(model.system.n_levels()),
            model,
            workers,
            mailboxes,
            shared,
            steps_done: 0,
        };
        let prologue = prologue_actions(sim.model.system.n_levels());
        sim.run_actions(&prologue, 0)?;
        for w in &mut sim.workers {
            w.set_timed(true);
        }
        Ok(sim)
    }

    fn run_actions(&mut self, actions: &[Action], step: u64) -> Result<(), SimError> {
        for &a in actions {
            match a {
                Action::Enter(s) => self.workers.iter_mut().for_each(|w| w.enter(s)),
                Action::Compute(c) => {
                    for w in &mut self.workers {
                        w.compute(c)?;
                    }
                }
                Action::Exchange(phase, level) => {
                    for (w, mb) in self.workers.iter_mut().zip(&mut self.mailboxes) {
                        begin_phase(mb, w, phase, level, step)?;
                    }
                    for (w, mb) in self.workers.iter_mut().zip(&mut self.mailboxes) {
                        finish_phase(mb, w, phase, level, step)?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn step(&mut self) -> Result<(), SimError> {
        let t = Instant::now();
        let actions = std::mem::take(&mut self.actions);
        let result = self.run_actions(&actions, self.steps_done + 1);
        self.actions = actions;
        result?;
        self.steps_done += 1;
        let secs = t.elapsed().as_secs_f64();
        for w in &mut self.workers {
            w.timing.total += secs;
        }
        Ok(())
    }

    pub fn run(&mut self, steps: u64) -> Result<(), SimError> {
        (0..steps).try_for_each(|_| self.step())
    }

    pub fn steps_done(&self) -> u64 {
        self.steps_done
    }

    pub fn system(&self) -> &NestedGridSystem {
        &self.model.system
    }

    pub fn plan(&self) -> &DecompositionPlan {
        &self.model.plan
    }

    /// Block states in block order.
    pub fn blocks(&self) -> impl Iterator<Item = &BlockState> {
        self.workers.iter().flat_map(|w| w.states.iter())
    }

    pub fn block(&self, id: usize) -> &BlockState {
        let rank = self.model.plan.rank_of(id);
        let w = &self.workers[rank];
        &w.states[id - w.block_ids().start]
    }

    /// Current water level of a level (zero-based), `NaN` outside blocks.
    pub fn eta_raster(&self, level: usize) -> Raster {
        let blocks: Vec<&BlockState> = self.blocks().collect();
        level_raster(&self.model.system, level, &blocks, |s| s.field(FieldKind::Eta))
    }

    /// Water volume `sum max(h + eta, 0) dx^2` over the interior cells of
    /// one level.
    pub fn level_volume(&self, level: usize) -> f64 {
        let sys = &self.model.system;
        let mut v = 0.0;
        for b in &sys.level(level).blocks {
            let ctx = &self.model.topo.block(b.id).ctx;
            let eta = self.block(b.id).field(FieldKind::Eta);
            for j in 0..b.nj as isize {
                for i in 0..b.ni as isize {
                    v += (ctx.h[(i, j)] + eta[(i, j)]).max(0.0);
                }
            }
        }
        v * sys.level(level).dx * sys.level(level).dx
    }

    pub fn phase_log(&self) -> &[Stage] {
        self.workers[0].log.as_deref().unwrap_or_default()
    }

    pub fn messages_sent(&self) -> u64 {
        self.mailboxes.iter().map(Mailbox::sent).sum()
    }

    pub fn messages_per_step(&self) -> usize {
        self.model.messages_per_step()
    }

    fn into_report(self, files: Vec<PathBuf>) -> RunReport {
        let messages_sent = self.messages_sent();
        let phase_log = self.phase_log().to_vec();
        RunReport {
            steps: self.steps_done,
            plan: self.model.plan.clone(),
            timings: self.workers.iter().map(|w| w.timing).collect(),
            phase_log,
            messages_sent,
            messages_per_step: self.model.messages_per_step(),
            blocks: self.workers.into_iter().flat_map(|w| w.states).collect(),
            files,
        }
    }

    /// Step on one thread per rank, then gather the ranks back.
    fn run_threaded(
        &mut self,
        steps: u64,
        timeout: Duration,
        snapshots: Option<(u64, PathBuf)>,
    ) -> Result<(), SimError> {
        let start = self.steps_done;
        let workers = std::mem::take(&mut self.workers);
        let mailboxes = std::mem::take(&mut self.mailboxes);
        let handles: Vec<_> = workers
            .into_iter()
            .zip(mailboxes)
            .map(|(mut w, mut mb)| {
                mb.set_stall_timeout(Some(timeout));
                let actions = self.actions.clone();
                let guard = AbortGuard(self.shared.clone());
                let snapshots = snapshots.clone();
                thread::Builder::new()
                    .name(format!("rank-{}", w.rank))
                    .spawn(move || {
                        let t = Instant::now();
                        let result = (|| {
                            for step in start + 1..=start + steps {
                                for &a in &actions {
                                    match a {
                                        Action::Enter(s) => w.enter(s),
                                        Action::Compute(c) => w.compute(c)?,
                                        Action::Exchange(p, l) => run_exchange_phase(&mut mb, &mut w, p, l, step)?,
                                    }
                                }
                                if let Some((every, dir)) = &snapshots {
                                    if step % every == 0 {
                                        w.snapshot(dir, step)?;
                                    }
                                }
                            }
                            Ok::<(), SimError>(())
                        })();
                        w.timing.total += t.elapsed().as_secs_f64();
                        if result.is_err() {
                            guard.0.abort();
                        }
                        std::mem::forget(guard);
                        (w, mb, result)
                    })
                    .expect("spawn worker thread")
            })
            .collect();

        let mut first_error: Option<SimError> = None;
        let mut keep = |e: SimError| {
            let aborted = matches!(e, SimError::Exchange(ExchangeError::Aborted { .. }));
            match &first_error {
                None => first_error = Some(e),
                Some(SimError::Exchange(ExchangeError::Aborted { .. })) if !aborted => first_error = Some(e),
                _ => {}
            }
        };
        for (rank, h) in handles.into_iter().enumerate() {
            match h.join() {
                Ok((w, mut mb, result)) => {
                    mb.set_stall_timeout(None);
                    self.workers.push(w);
                    self.mailboxes.push(mb);
                    if let Err(e) = result {
                        keep(e);
                    }
                }
                Err(_) => keep(SimError::WorkerPanic { rank }),
            }
        }
        match first_error {
            Some(e) => Err(e),
            None => {
                self.steps_done += steps;
                Ok(())
            }
        }
    }
}

/// Raises the shared abort flag if a worker thread unwinds.
struct AbortGuard(MailboxSet);

impl Drop for AbortGuard {
    fn drop(&mut self) {
        self.0.abort();
    }
}

/// Full run: plan, prologue, steps, outputs. On failure after the output
/// directory was chosen, an `INVALID` file there records the error.
pub fn run_simulation(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, SimError> {
    let plan = resolve_plan(scenario, opts.workers, &opts.plan, opts.seed)?;
    let result = run_with_plan(scenario, plan, opts);
    if let (Err(e), Some(dir)) = (&result, &opts.out_dir) {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join("INVALID"), format!("{e}\n"));
        }
    }
    result
}

fn run_with_plan(scenario: &Scenario, plan: DecompositionPlan, opts: &RunOptions) -> Result<RunReport, SimError> {
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
        let stale = dir.join("INVALID");
        if stale.exists() {
            std::fs::remove_file(stale)?;
        }
    }
    let mut sim = Simulation::with_trace(scenario, plan, opts.trace)?;
    let snapshots = match (opts.snapshot_every, &opts.out_dir) {
        (Some(k), Some(dir)) if k > 0 => Some((k, dir.join("snapshots"))),
        _ => None,
    };
    if opts.sequential || sim.workers.len() == 1 {
        for _ in 0..opts.steps {
            sim.step()?;
            if let Some((every, dir)) = &snapshots {
                if sim.steps_done % every == 0 {
                    for w in &sim.workers {
                        w.snapshot(dir, sim.steps_done)?;
                    }
                }
            }
        }
    } else {
        sim.run_threaded(opts.steps, opts.stall_timeout, snapshots)?;
    }

    let mut files = Vec::new();
    if let Some(dir) = &opts.out_dir {
        let blocks: Vec<&BlockState> = sim.blocks().collect();
        files.extend(emit_rasters(sim.system(), &blocks, dir)?);
        let plan_path = dir.join("plan.txt");
        sim.plan().write(&plan_path)?;
        files.push(plan_path);
        if opts.trace {
            let path = dir.join("trace.bin");
            write_trace(&path, &sim.shared.take_trace())?;
            files.push(path);
        }
    }
    let report = sim.into_report(files);
    if let Some(dir) = &opts.out_dir {
        let path = dir.join("timing.csv");
        write_timing_csv(&report.timings, &path)?;
        let mut report = report;
        report.files.push(path);
        return Ok(report);
    }
    Ok(report)
}

/// Load a scenario and run it.
pub fn run_config(path: &Path, opts: &RunOptions) -> Result<RunReport, SimError> {
    let scenario = Scenario::load(path)?;
    run_simulation(&scenario, opts)
}
