//! Message passing between workers.
//!
//! Every rank owns a [`Mailbox`] holding one sender per rank and its own
//! inbox. Sends never block. Messages that arrive ahead of the phase a rank
//! is waiting for are stashed by (step, phase, level, sender); channels keep
//! per-sender order, so each stash key sees its messages in send order.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::{ExchangeError, TraceRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Eta,
    Flux,
    InterGridEta,
    InterGridFlux,
}

impl Phase {
    pub fn tag(self) -> u8 {
        match self {
            Phase::Eta => 0,
            Phase::Flux => 1,
            Phase::InterGridEta => 2,
            Phase::InterGridFlux => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Phase::Eta,
            1 => Phase::Flux,
            2 => Phase::InterGridEta,
            3 => Phase::InterGridFlux,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankMessage {
    pub sender: usize,
    pub receiver: usize,
    pub phase: Phase,
    /// Child level of an inter-grid phase; 0 for halo phases.
    pub level: usize,
    pub step: u64,
    pub payload: Vec<f64>,
}

type StashKey = (u64, Phase, usize, usize);

/// Shared state of all mailboxes of one run.
#[derive(Clone, Debug)]
pub struct MailboxSet {
    pub abort: Arc<AtomicBool>,
    pub trace: Option<Arc<Mutex<Vec<TraceRecord>>>>,
}

impl MailboxSet {
    /// Tell every rank to stop waiting.
    pub fn abort(&self) {
        self.abort.store(true, Ordering::SeqCst);
    }

    /// Recorded messages sorted by (step, phase, sender, receiver).
    pub fn take_trace(&self) -> Vec<TraceRecord> {
        let mut out = match &self.trace {
            Some(t) => std::mem::take(&mut *t.lock().unwrap_or_else(|e| e.into_inner())),
            None => Vec::new(),
        };
        out.sort_by_key(|r| (r.step, r.phase, r.sender, r.receiver));
        out
    }
}

#[derive(Debug)]
pub struct Mailbox {
    rank: usize,
    peers: Vec<Sender<RankMessage>>,
    inbox: Receiver<RankMessage>,
    pending: HashMap<StashKey, VecDeque<Vec<f64>>>,
    shared: MailboxSet,
    /// `None`: never wait, a message not yet sent is missing.
    stall_timeout: Option<Duration>,
    sent: u64,
}

impl Mailbox {
    /// Mailboxes for `n` ranks. With `stall_timeout = None` receives never
    /// wait, which suits running all ranks from one thread.
    pub fn network(n: usize, stall_timeout: Option<Duration>, trace: bool) -> (Vec<Mailbox>, MailboxSet) {
        let shared = MailboxSet {
            abort: Arc::new(AtomicBool::new(false)),
            trace: trace.then(|| Arc::new(Mutex::new(Vec::new()))),
        };
        let (senders, receivers): (Vec<_>, Vec<_>) = (0..n).map(|_| mpsc::channel()).unzip();
        let boxes = receivers
            .into_iter()
            .enumerate()
            .map(|(rank, inbox)| Mailbox {
                rank,
                peers: senders.clone(),
                inbox,
                pending: HashMap::new(),
                shared: shared.clone(),
                stall_timeout,
                sent: 0,
            })
            .collect();
        (boxes, shared)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn set_stall_timeout(&mut self, timeout: Option<Duration>) {
        self.stall_timeout = timeout;
    }

    /// Messages sent so far.
    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn send(&mut self, msg: RankMessage) -> Result<(), ExchangeError> {
        if let Some(t) = &self.shared.trace {
            t.lock().unwrap_or_else(|e| e.into_inner()).push(TraceRecord {
                step: msg.step,
                phase: msg.phase.tag(),
                sender: msg.sender as u32,
                receiver: msg.receiver as u32,
                len: msg.payload.len() as u64,
            });
        }
        let peer = msg.receiver;
        self.peers[peer]
            .send(msg)
            .map_err(|_| ExchangeError::Disconnected { rank: self.rank, peer })?;
        self.sent += 1;
        Ok(())
    }

    fn stash(&mut self, msg: RankMessage) {
        self.pending
            .entry((msg.step, msg.phase, msg.level, msg.sender))
            .or_default()
            .push_back(msg.payload);
    }

    fn take_pending(&mut self, key: &StashKey) -> Option<Vec<f64>> {
        let queue = self.pending.get_mut(key)?;
        let v = queue.pop_front();
        if queue.is_empty() {
            self.pending.remove(key);
        }
        v
    }

    /// Drain the inbox without waiting; true if `key` is now stashed.
    fn poll(&mut self, key: &StashKey) -> bool {
        while let Ok(msg) = self.inbox.try_recv() {
            self.stash(msg);
        }
        self.pending.contains_key(key)
    }

    /// Next payload for `key`, or `None` once the stall timeout runs out.
    fn receive(&mut self, key: StashKey) -> Result<Option<Vec<f64>>, ExchangeError> {
        if let Some(p) = self.take_pending(&key) {
            return Ok(Some(p));
        }
        let Some(limit) = self.stall_timeout else {
            self.poll(&key);
            return Ok(self.take_pending(&key));
        };
        let start = Instant::now();
        let slice = Duration::from_millis(20);
        loop {
            if self.shared.abort.load(Ordering::SeqCst) {
                return Err(ExchangeError::Aborted { rank: self.rank });
            }
            let left = limit.saturating_sub(start.elapsed());
            if left.is_zero() {
                return Ok(None);
            }
            match self.inbox.recv_timeout(left.min(slice)) {
                Ok(msg) => {
                    let hit = (msg.step, msg.phase, msg.level, msg.sender) == key;
                    if hit {
                        return Ok(Some(msg.payload));
                    }
                    self.stash(msg);
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => return Ok(None),
            }
        }
    }
}

/// A rank's side of one exchange phase.
pub trait Participant {
    /// Messages for other ranks, as (receiver, payload).
    fn outgoing(&mut self, phase: Phase, level: usize) -> Vec<(usize, Vec<f64>)>;
    /// Transfers between blocks this rank owns.
    fn local(&mut self, phase: Phase, level: usize);
    /// (sender, payload length) of every message this rank waits for.
    fn expected(&self, phase: Phase, level: usize) -> Vec<(usize, usize)>;
    fn incoming(&mut self, phase: Phase, level: usize, sender: usize, payload: &[f64]);
}

/// Send this rank's messages and do its local copies.
pub fn begin_phase<P: Participant + ?Sized>(
    mailbox: &mut Mailbox,
    part: &mut P,
    phase: Phase,
    level: usize,
    step: u64,
) -> Result<(), ExchangeError> {
    for (receiver, payload) in part.outgoing(phase, level) {
        mailbox.send(RankMessage {
            sender: mailbox.rank,
            receiver,
            phase,
            level,
            step,
            payload,
        })?;
    }
    part.local(phase, level);
    Ok(())
}

/// Receive and apply every expected message of the phase.
pub fn finish_phase<P: Participant + ?Sized>(
    mailbox: &mut Mailbox,
    part: &mut P,
    phase: Phase,
    level: usize,
    step: u64,
) -> Result<(), ExchangeError> {
    let expected = part.expected(phase, level);
    for (k, &(sender, len)) in expected.iter().enumerate() {
        let Some(payload) = mailbox.receive((step, phase, level, sender))? else {
            let mut missing = vec![(sender, mailbox.rank, phase)];
            for &(other, _) in &expected[k + 1..] {
                let key = (step, phase, level, other);
                if !mailbox.poll(&key) {
                    missing.push((other, mailbox.rank, phase));
                }
            }
            return Err(ExchangeError::Missing { step, missing });
        };
        if payload.len() != len {
            return Err(ExchangeError::Protocol {
                phase,
                step,
                sender,
                receiver: mailbox.rank,
                expected: len,
                found: payload.len(),
            });
        }
        part.incoming(phase, level, sender, &payload);
    }
    Ok(())
}

/// One full phase for one rank.
pub fn run_exchange_phase<P: Participant + ?Sized>(
    mailbox: &mut Mailbox,
    part: &mut P,
    phase: Phase,
    level: usize,
    step: u64,
) -> Result<(), ExchangeError> {
    begin_phase(mailbox, part, phase, level, step)?;
    finish_phase(mailbox, part, phase, level, step)
}
