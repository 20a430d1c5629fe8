//! One rank: its blocks, its stages and its side of every exchange.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::balance::DecompositionPlan;
use crate::coupling::{
    apply_prolongation, apply_restriction, build_links, prolong_flux, restrict_eta, InterGridLink, LinkKind,
};
use crate::exchange::{entry_slice, entry_slice_mut, pack_halo_into, unpack_halo, HaloSchedule, Participant, Phase};
use crate::grid::config::InitialCondition;
use crate::grid::{BlockId, NestedGridSystem, SimulationConfig};
use crate::kernels::{
    accumulate_outputs, update_mass, update_momentum, BlockState, FieldKind, NumericError, StepParams,
};
use crate::topology::Topology;

use super::{RankTiming, SimError, Stage};

/// Inter-grid message: links of one (kind, child level) from one rank to
/// another, packed in link order.
#[derive(Clone, Debug)]
pub(crate) struct LinkMessage {
    pub kind: LinkKind,
    pub level: usize,
    pub sender: usize,
    pub receiver: usize,
    pub links: Vec<usize>,
    pub len: usize,
}

/// Static data shared by all ranks.
#[derive(Debug)]
pub(crate) struct Model {
    pub system: NestedGridSystem,
    pub topo: Topology,
    pub params: StepParams,
    pub plan: DecompositionPlan,
    pub halo: HaloSchedule,
    pub links: Vec<InterGridLink>,
    pub messages: Vec<LinkMessage>,
    pub initial: InitialCondition,
}

impl Model {
    pub fn new(
        system: NestedGridSystem,
        config: &SimulationConfig,
        initial: InitialCondition,
        plan: DecompositionPlan,
    ) -> Result<Self, SimError> {
        let topo = Topology::build(&system, &config.boundary)?;
        let halo = HaloSchedule::build(&topo, &plan);
        let links = build_links(&system, &topo, &plan)?;
        // Links come sorted by (kind, level, sender, receiver).
        let mut messages: Vec<LinkMessage> = Vec::new();
        for (k, l) in links.iter().enumerate() {
            match messages.last_mut() {
                Some(m) if (m.kind, m.level, m.sender, m.receiver) == (l.kind, l.child_level, l.sender, l.receiver) => {
                    m.links.push(k);
                    m.len += l.len;
                }
                _ => messages.push(LinkMessage {
                    kind: l.kind,
                    level: l.child_level,
                    sender: l.sender,
                    receiver: l.receiver,
                    links: vec![k],
                    len: l.len,
                }),
            }
        }
        Ok(Self {
            system,
            topo,
            params: StepParams {
                dt: config.dt,
                g: config.g,
                wet_threshold: config.wet_threshold,
            },
            plan,
            halo,
            links,
            messages,
            initial,
        })
    }

    /// Messages sent between distinct ranks in one step.
    pub fn messages_per_step(&self) -> usize {
        self.halo.message_count() + self.messages.iter().filter(|m| m.sender != m.receiver).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Compute {
    Init,
    Mass,
    EtaFill,
    Momentum,
    FluxFill,
    Output,
    Swap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Action {
    Enter(Stage),
    Compute(Compute),
    /// Phase and child level (0 for halo phases).
    Exchange(Phase, usize),
}

fn link_kind(phase: Phase) -> Option<LinkKind> {
    match phase {
        Phase::InterGridEta => Some(LinkKind::Restrict),
        Phase::InterGridFlux => Some(LinkKind::Prolong),
        Phase::Eta | Phase::Flux => None,
    }
}

/// Actions of a regular step.
pub(crate) fn step_actions(n_levels: usize) -> Vec<Action> {
    use Action::*;
    let mut a = vec![Enter(Stage::Mass), Compute(self::Compute::Mass), Enter(Stage::Restrict)];
    a.extend((1..n_levels).rev().map(|l| Exchange(Phase::InterGridEta, l)));
    a.extend([
        Enter(Stage::HaloEta),
        Exchange(Phase::Eta, 0),
        Compute(self::Compute::EtaFill),
        Enter(Stage::Momentum),
        Compute(self::Compute::Momentum),
        Enter(Stage::Prolong),
    ]);
    a.extend((1..n_levels).map(|l| Exchange(Phase::InterGridFlux, l)));
    a.extend([
        Enter(Stage::HaloFlux),
        Exchange(Phase::Flux, 0),
        Compute(self::Compute::FluxFill),
        Enter(Stage::Output),
        Compute(self::Compute::Output),
        Enter(Stage::Swap),
        Compute(self::Compute::Swap),
    ]);
    a
}

/// Actions that turn the initial water level into a consistent state:
/// every transfer of a step, no physics and no output.
pub(crate) fn prologue_actions(n_levels: usize) -> Vec<Action> {
    step_actions(n_levels)
        .into_iter()
        .map(|a| match a {
            Action::Compute(Compute::Mass) => Action::Compute(Compute::Init),
            other => other,
        })
        .filter(|a| !matches!(a, Action::Compute(Compute::Momentum | Compute::Output)))
        .collect()
}

#[derive(Debug)]
pub(crate) struct Worker {
    pub rank: usize,
    model: Arc<Model>,
    first: BlockId,
    pub states: Vec<BlockState>,
    pub timing: RankTiming,
    /// Stage sequence, kept by rank 0 only.
    pub log: Option<Vec<Stage>>,
    stage: Stage,
    timed: bool,
}

impl Worker {
    pub fn new(rank: usize, model: Arc<Model>) -> Self {
        let range = model.plan.rank_range(rank);
        let states = range
            .clone()
            .map(|id| {
                let b = model.system.block(id);
                BlockState::new(b.ni, b.nj)
            })
            .collect();
        Self {
            rank,
            first: range.start,
            states,
            timing: RankTiming::default(),
            log: (rank == 0).then(Vec::new),
            stage: Stage::Mass,
            timed: false,
            model,
        }
    }

    pub fn block_ids(&self) -> std::ops::Range<BlockId> {
        self.first..self.first + self.states.len()
    }

    fn st(&self, id: BlockId) -> &BlockState {
        &self.states[id - self.first]
    }

    fn st_mut(&mut self, id: BlockId) -> &mut BlockState {
        &mut self.states[id - self.first]
    }

    fn origin(&self, id: BlockId) -> (isize, isize) {
        self.model.system.block(id).origin
    }

    /// Count time and log stages from now on.
    pub fn set_timed(&mut self, on: bool) {
        self.timed = on;
    }

    fn charge(&mut self, d: Duration) {
        if self.timed {
            self.timing.add(self.stage, d.as_secs_f64());
        }
    }

    pub fn enter(&mut self, stage: Stage) {
        self.stage = stage;
        if self.timed {
            if let Some(log) = &mut self.log {
                log.push(stage);
            }
        }
    }

    pub fn compute(&mut self, c: Compute) -> Result<(), SimError> {
        let t = Instant::now();
        let model = Arc::clone(&self.model);
        let p = &model.params;
        let thr = p.wet_threshold;
        for (k, id) in self.block_ids().enumerate() {
            let bt = model.topo.block(id);
            let ctx = &bt.ctx;
            let state = &mut self.states[k];
            match c {
                Compute::Init => {
                    let b = model.system.block(id);
                    let eta = state.field_next_mut(FieldKind::Eta);
                    for j in 0..b.nj as isize {
                        for i in 0..b.ni as isize {
                            let h = ctx.h[(i, j)];
                            let e = model.initial.eta(b.level, b.origin.0 + i, b.origin.1 + j, b.dx);
                            if !e.is_finite() {
                                return Err(NumericError {
                                    block: id,
                                    field: FieldKind::Eta,
                                    i,
                                    j,
                                }
                                .into());
                            }
                            eta[(i, j)] = if h <= 0.0 { 0.0 } else { e.max(-h) };
                        }
                    }
                }
                Compute::Mass => update_mass(state, ctx, p)?,
                Compute::EtaFill => {
                    bt.fill_domain(state, FieldKind::Eta);
                    state.refresh_wet(ctx, thr);
                }
                Compute::Momentum => update_momentum(state, ctx, p)?,
                Compute::FluxFill => {
                    for kind in [FieldKind::M, FieldKind::N, FieldKind::Eta] {
                        bt.fill_domain(state, kind);
                    }
                    state.refresh_wet(ctx, thr);
                }
                Compute::Output => accumulate_outputs(state, ctx, thr),
                Compute::Swap => state.swap(),
            }
        }
        self.charge(t.elapsed());
        Ok(())
    }

    fn pack_pair(&self, phase: Phase, index: usize) -> Vec<f64> {
        let pair = &self.model.halo.pairs(phase)[index];
        let mut payload = vec![0.0; pair.len];
        for e in &pair.entries {
            pack_halo_into(
                self.st(e.src_block),
                self.origin(e.src_block),
                e,
                entry_slice_mut(&mut payload, e),
            );
        }
        payload
    }

    fn unpack_pair(&mut self, phase: Phase, index: usize, payload: &[f64]) {
        let model = Arc::clone(&self.model);
        for e in &model.halo.pairs(phase)[index].entries {
            let origin = self.origin(e.dst_block);
            unpack_halo(self.st_mut(e.dst_block), origin, e, entry_slice(payload, e))
                .expect("entry slices have entry length");
        }
    }

    fn pack_links(&self, index: usize) -> Vec<f64> {
        let msg = &self.model.messages[index];
        let mut payload = vec![0.0; msg.len];
        for &li in &msg.links {
            let link = &self.model.links[li];
            match link.kind {
                LinkKind::Restrict => restrict_eta(
                    self.st(link.child_block),
                    self.origin(link.child_block),
                    link,
                    &mut payload,
                ),
                LinkKind::Prolong => prolong_flux(
                    self.st(link.parent_block),
                    self.origin(link.parent_block),
                    link,
                    &mut payload,
                ),
            }
        }
        payload
    }

    fn unpack_links(&mut self, index: usize, payload: &[f64]) {
        let model = Arc::clone(&self.model);
        for &li in &model.messages[index].links {
            let link = &model.links[li];
            match link.kind {
                LinkKind::Restrict => {
                    let o = self.origin(link.parent_block);
                    apply_restriction(self.st_mut(link.parent_block), o, link, payload);
                }
                LinkKind::Prolong => {
                    let o = self.origin(link.child_block);
                    apply_prolongation(self.st_mut(link.child_block), o, link, payload);
                }
            }
        }
    }

    /// Indices of halo pairs or link messages of a phase with the given
    /// sender/receiver filter.
    fn select(&self, phase: Phase, level: usize, keep: impl Fn(usize, usize) -> bool) -> Vec<usize> {
        match link_kind(phase) {
            None => self
                .model
                .halo
                .pairs(phase)
                .iter()
                .enumerate()
                .filter(|(_, p)| keep(p.sender, p.receiver))
                .map(|(k, _)| k)
                .collect(),
            Some(kind) => self
                .model
                .messages
                .iter()
                .enumerate()
                .filter(|(_, m)| m.kind == kind && m.level == level && keep(m.sender, m.receiver))
                .map(|(k, _)| k)
                .collect(),
        }
    }

    fn pack(&self, phase: Phase, index: usize) -> Vec<f64> {
        match link_kind(phase) {
            None => self.pack_pair(phase, index),
            Some(_) => self.pack_links(index),
        }
    }

    fn unpack(&mut self, phase: Phase, index: usize, payload: &[f64]) {
        match link_kind(phase) {
            None => self.unpack_pair(phase, index, payload),
            Some(_) => self.unpack_links(index, payload),
        }
    }

    /// Current water level of the owned blocks, used for snapshots.
    pub fn snapshot(&self, dir: &std::path::Path, step: u64) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for id in self.block_ids() {
            let b = self.model.system.block(id);
            let eta = self.st(id).field(FieldKind::Eta);
            let (x0, y0) = b.origin_m();
            let mut values = Vec::with_capacity(b.cell_count());
            for j in 0..b.nj as isize {
                for i in 0..b.ni as isize {
                    values.push(eta[(i, j)]);
                }
            }
            let r = crate::raster::Raster {
                ni: b.ni,
                nj: b.nj,
                dx: b.dx,
                x0,
                y0,
                values,
            };
            r.write(&dir.join(format!("step{step:08}_block{id:04}_eta.txt")))?;
        }
        Ok(())
    }
}

impl Participant for Worker {
    fn outgoing(&mut self, phase: Phase, level: usize) -> Vec<(usize, Vec<f64>)> {
        let t = Instant::now();
        let rank = self.rank;
        let out = self
            .select(phase, level, |s, r| s == rank && r != rank)
            .into_iter()
            .map(|k| {
                let receiver = match link_kind(phase) {
                    None => self.model.halo.pairs(phase)[k].receiver,
                    Some(_) => self.model.messages[k].receiver,
                };
                (receiver, self.pack(phase, k))
            })
            .collect();
        self.charge(t.elapsed());
        out
    }

    fn local(&mut self, phase: Phase, level: usize) {
        let t = Instant::now();
        let rank = self.rank;
        for k in self.select(phase, level, |s, r| s == rank && r == rank) {
            let payload = self.pack(phase, k);
            self.unpack(phase, k, &payload);
        }
        self.charge(t.elapsed());
    }

    fn expected(&self, phase: Phase, level: usize) -> Vec<(usize, usize)> {
        let rank = self.rank;
        self.select(phase, level, |s, r| r == rank && s != rank)
            .into_iter()
            .map(|k| match link_kind(phase) {
                None => {
                    let p = &self.model.halo.pairs(phase)[k];
                    (p.sender, p.len)
                }
                Some(_) => {
                    let m = &self.model.messages[k];
                    (m.sender, m.len)
                }
            })
            .collect()
    }

    fn incoming(&mut self, phase: Phase, level: usize, sender: usize, payload: &[f64]) {
        let t = Instant::now();
        let rank = self.rank;
        let k = self.select(phase, level, |s, r| s == sender && r == rank)[0];
        self.unpack(phase, k, payload);
        self.charge(t.elapsed());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_follows_fixed_stage_order() {
        let stages: Vec<Stage> = step_actions(3)
            .into_iter()
            .filter_map(|a| match a {
                Action::Enter(s) => Some(s),
                _ => None,
            })
            .collect();
        assert_eq!(stages, Stage::ORDER.to_vec());
    }

    #[test]
    fn restriction_runs_finest_first_and_prolongation_coarsest_first() {
        let ex: Vec<(Phase, usize)> = step_actions(4)
            .into_iter()
            .filter_map(|a| match a {
                Action::Exchange(p, l) if p != Phase::Eta && p != Phase::Flux => Some((p, l)),
                _ => None,
            })
            .collect();
        assert_eq!(
            ex,
            vec![
                (Phase::InterGridEta, 3),
                (Phase::InterGridEta, 2),
                (Phase::InterGridEta, 1),
                (Phase::InterGridFlux, 1),
                (Phase::InterGridFlux, 2),
                (Phase::InterGridFlux, 3),
            ]
        );
    }

    #[test]
    fn prologue_has_no_physics() {
        let p = prologue_actions(2);
        assert_eq!(p[1], Action::Compute(Compute::Init));
        assert!(!p.contains(&Action::Compute(Compute::Mass)));
        assert!(!p.contains(&Action::Compute(Compute::Momentum)));
        assert!(!p.contains(&Action::Compute(Compute::Output)));
    }
}
