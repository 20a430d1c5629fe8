//! Halo exchange between blocks of the same level.
//!
//! A schedule lists, for every ordered (sender, receiver) rank pair, the
//! rectangles of locations the receiver's blocks take from the sender's
//! blocks. Entries are packed back to back, field-major in the flux phase
//! (all `M` entries first, then all `N`). Inside an entry the offset of a
//! location is a closed-form function of its position, so packing has no
//! loop-carried counter.

mod harness;
mod trace;

pub use harness::{
    begin_phase, finish_phase, run_exchange_phase, Mailbox, MailboxSet, Participant, Phase, RankMessage,
};
pub use trace::{read_trace, write_trace, TraceRecord, TRACE_RECORD_BYTES};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::balance::DecompositionPlan;
use crate::grid::{BlockId, IRect};
use crate::kernels::{BlockState, FieldKind};
use crate::topology::Topology;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ExchangeError {
    #[error("entry payload has {found} values, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error(
        "protocol error in {phase:?} at step {step}: message {sender} -> {receiver} has {found} values, expected {expected}"
    )]
    Protocol {
        phase: Phase,
        step: u64,
        sender: usize,
        receiver: usize,
        expected: usize,
        found: usize,
    },
    #[error("step {step}: undelivered messages (sender, receiver, phase): {missing:?}")]
    Missing {
        step: u64,
        missing: Vec<(usize, usize, Phase)>,
    },
    #[error("rank {rank}: aborted after a failure on another rank")]
    Aborted { rank: usize },
    #[error("rank {rank}: channel to rank {peer} closed")]
    Disconnected { rank: usize, peer: usize },
}

/// One rectangle copied from a sender block into a receiver block.
#[derive(Clone, Debug, PartialEq)]
pub struct HaloEntry {
    pub src_block: BlockId,
    pub dst_block: BlockId,
    pub field: FieldKind,
    /// Level index space.
    pub rect: IRect,
    /// 1-based position of the entry's first value in the message.
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairSchedule {
    pub sender: usize,
    pub receiver: usize,
    pub entries: Vec<HaloEntry>,
    /// Message length, the sum of entry lengths.
    pub len: usize,
}

impl PairSchedule {
    pub fn is_local(&self) -> bool {
        self.sender == self.receiver
    }
}

/// Pair schedules of the water-level phase and the flux phase. Pairs with
/// `sender == receiver` are copied in place without a message.
#[derive(Clone, Debug, PartialEq)]
pub struct HaloSchedule {
    pub eta: Vec<PairSchedule>,
    pub flux: Vec<PairSchedule>,
}

impl HaloSchedule {
    pub fn build(topo: &Topology, plan: &DecompositionPlan) -> Self {
        let owners = plan.owners();
        let mut eta: BTreeMap<(usize, usize), Vec<HaloEntry>> = BTreeMap::new();
        let mut flux: BTreeMap<(usize, usize), Vec<HaloEntry>> = BTreeMap::new();
        for bt in &topo.blocks {
            for t in &bt.siblings {
                let key = (owners[t.src], owners[t.dst]);
                let entry = HaloEntry {
                    src_block: t.src,
                    dst_block: t.dst,
                    field: t.field,
                    rect: t.rect,
                    offset: 0,
                    len: t.rect.area(),
                };
                match t.field {
                    FieldKind::Eta => eta.entry(key).or_default().push(entry),
                    FieldKind::M | FieldKind::N => flux.entry(key).or_default().push(entry),
                }
            }
        }
        Self {
            eta: finish_pairs(eta),
            flux: finish_pairs(flux),
        }
    }

    pub fn pairs(&self, phase: Phase) -> &[PairSchedule] {
        match phase {
            Phase::Eta => &self.eta,
            Phase::Flux => &self.flux,
            Phase::InterGridEta | Phase::InterGridFlux => &[],
        }
    }

    /// Messages a step sends in the two halo phases.
    pub fn message_count(&self) -> usize {
        self.eta.iter().chain(&self.flux).filter(|p| !p.is_local()).count()
    }
}

fn finish_pairs(map: BTreeMap<(usize, usize), Vec<HaloEntry>>) -> Vec<PairSchedule> {
    map.into_iter()
        .map(|((sender, receiver), mut entries)| {
            // Field-major; a stable sort keeps block order inside a field.
            entries.sort_by_key(|e| e.field);
            let mut next = 1;
            for e in &mut entries {
                e.offset = next;
                next += e.len;
            }
            PairSchedule {
                sender,
                receiver,
                entries,
                len: next - 1,
            }
        })
        .collect()
}

/// 1-based position of `(i, j)` inside `rect`, rows of width `x1 - x0`.
#[inline]
pub fn packed_offset(i: isize, j: isize, rect: &IRect) -> usize {
    ((i - rect.x0 + 1) + (j - rect.y0) * (rect.x1 - rect.x0)) as usize
}

/// Values of the entry rectangle from the sender's next buffer.
pub fn pack_halo(state: &BlockState, origin: (isize, isize), entry: &HaloEntry) -> Vec<f64> {
    let mut out = vec![0.0; entry.len];
    pack_halo_into(state, origin, entry, &mut out);
    out
}

/// `pack_halo` into a slice of exactly `entry.len` values.
pub fn pack_halo_into(state: &BlockState, origin: (isize, isize), entry: &HaloEntry, out: &mut [f64]) {
    let f = state.field_next(entry.field);
    let r = &entry.rect;
    for j in r.y0..r.y1 {
        for i in r.x0..r.x1 {
            out[packed_offset(i, j, r) - 1] = f[(i - origin.0, j - origin.1)];
        }
    }
}

/// Write an entry payload into the receiver's next buffer.
pub fn unpack_halo(
    state: &mut BlockState,
    origin: (isize, isize),
    entry: &HaloEntry,
    payload: &[f64],
) -> Result<(), ExchangeError> {
    if payload.len() != entry.len {
        return Err(ExchangeError::Length {
            expected: entry.len,
            found: payload.len(),
        });
    }
    let f = state.field_next_mut(entry.field);
    let r = &entry.rect;
    for j in r.y0..r.y1 {
        for i in r.x0..r.x1 {
            f[(i - origin.0, j - origin.1)] = payload[packed_offset(i, j, r) - 1];
        }
    }
    Ok(())
}

/// Slice of a message holding one entry.
#[inline]
pub fn entry_slice<'a>(payload: &'a [f64], entry: &HaloEntry) -> &'a [f64] {
    &payload[entry.offset - 1..entry.offset - 1 + entry.len]
}

#[inline]
pub fn entry_slice_mut<'a>(payload: &'a mut [f64], entry: &HaloEntry) -> &'a mut [f64] {
    &mut payload[entry.offset - 1..entry.offset - 1 + entry.len]
}
