//! Binary message trace: fixed 25-byte little-endian records
//! `step u64 | phase u8 | sender u32 | receiver u32 | len u64`.

use std::io::{self, Read, Write};
use std::path::Path;

pub const TRACE_RECORD_BYTES: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub step: u64,
    /// See [`super::Phase::tag`].
    pub phase: u8,
    pub sender: u32,
    pub receiver: u32,
    /// Payload values.
    pub len: u64,
}

impl TraceRecord {
    pub fn to_bytes(&self) -> [u8; TRACE_RECORD_BYTES] {
        let mut b = [0u8; TRACE_RECORD_BYTES];
        b[0..8].copy_from_slice(&self.step.to_le_bytes());
        b[8] = self.phase;
        b[9..13].copy_from_slice(&self.sender.to_le_bytes());
        b[13..17].copy_from_slice(&self.receiver.to_le_bytes());
        b[17..25].copy_from_slice(&self.len.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; TRACE_RECORD_BYTES]) -> Self {
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().expect("8 bytes"));
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().expect("4 bytes"));
        Self {
            step: u64_at(0),
            phase: b[8],
            sender: u32_at(9),
            receiver: u32_at(13),
            len: u64_at(17),
        }
    }
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> io::Result<()> {
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        w.write_all(&r.to_bytes())?;
    }
    w.flush()
}

pub fn read_trace(path: &Path) -> io::Result<Vec<TraceRecord>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % TRACE_RECORD_BYTES != 0 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("trace length {} is not a multiple of {TRACE_RECORD_BYTES}", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(TRACE_RECORD_BYTES)
        .map(|c| TraceRecord::from_bytes(c.try_into().expect("exact chunk")))
        .collect())
}
