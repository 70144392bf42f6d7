use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use super::packet::{decode_packet, SensorPacket, FRAME_LEN, MAGIC};

/// Packets held per node before the oldest is released.
pub const REORDER_DEPTH: usize = 8;
/// How many recent sequence numbers per node are remembered for duplicate detection.
const SEEN_HISTORY: usize = 256;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReorderStats {
    pub delivered: u64,
    pub duplicates: u64,
    pub late: u64,
    pub corrupt_frames: u64,
}

#[derive(Default)]
struct NodeState {
    // keyed by (timestamp_ms, arrival index) so equal timestamps keep arrival order
    pending: BTreeMap<(u32, u64), SensorPacket>,
    last_emitted_ts: Option<u32>,
    seen: HashSet<u16>,
    seen_order: VecDeque<u16>,
}

impl NodeState {
    fn remember(&mut self, seq: u16) {
        self.seen.insert(seq);
        self.seen_order.push_back(seq);
        if self.seen_order.len() > SEEN_HISTORY {
            if let Some(old) = self.seen_order.pop_front() {
                self.seen.remove(&old);
            }
        }
    }
}

/// Per-node reordering buffer.
///
/// Each node holds up to [`REORDER_DEPTH`] packets sorted by timestamp; a new
/// arrival beyond that releases the oldest. A packet older than the last one
/// released for its node is dropped as late, and a `(node_id, seq)` pair seen
/// recently is dropped as a duplicate.
#[derive(Default)]
pub struct Reorderer {
    nodes: HashMap<u16, NodeState>,
    arrivals: u64,
    stats: ReorderStats,
}

impl Reorderer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accepts one packet and returns whatever it pushed out of the buffer.
    pub fn push(&mut self, p: SensorPacket) -> Vec<SensorPacket> {
        let node = self.nodes.entry(p.node_id).or_default();
        if node.seen.contains(&p.seq) {
            self.stats.duplicates += 1;
            return Vec::new();
        }
        if node.last_emitted_ts.is_some_and(|ts| p.timestamp_ms < ts) {
            self.stats.late += 1;
            return Vec::new();
        }
        node.remember(p.seq);
        node.pending.insert((p.timestamp_ms, self.arrivals), p);
        self.arrivals += 1;

        let mut out = Vec::new();
        while node.pending.len() > REORDER_DEPTH {
            if let Some((_, oldest)) = node.pending.pop_first() {
                node.last_emitted_ts = Some(oldest.timestamp_ms);
                out.push(oldest);
            }
        }
        self.stats.delivered += out.len() as u64;
        out
    }

    /// Releases everything still buffered, node by node in ascending node id.
    pub fn flush(&mut self) -> Vec<SensorPacket> {
        let mut ids: Vec<u16> = self.nodes.keys().copied().collect();
        ids.sort_unstable();
        let mut out = Vec::new();
        for id in ids {
            let node = self.nodes.get_mut(&id).expect("node id taken from map");
            while let Some((_, p)) = node.pending.pop_first() {
                node.last_emitted_ts = Some(p.timestamp_ms);
                out.push(p);
            }
        }
        self.stats.delivered += out.len() as u64;
        out
    }

    /// Counts a frame that failed to decode before it reached the buffer.
    pub fn note_corrupt(&mut self) {
        self.stats.corrupt_frames += 1;
    }

    pub fn stats(&self) -> ReorderStats {
        self.stats
    }
}

/// Iterates over the valid frames in a byte buffer.
///
/// On a frame that fails to decode the reader slides forward to the next
/// magic byte, so one corrupt frame costs at most that frame.
pub struct FrameReader<'a> {
    buf: &'a [u8],
    pos: usize,
    errors: u64,
}

impl<'a> FrameReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        FrameReader {
            buf,
            pos: 0,
            errors: 0,
        }
    }

    /// Number of resynchronisations performed so far.
    pub fn errors(&self) -> u64 {
        self.errors
    }
}

impl Iterator for FrameReader<'_> {
    type Item = SensorPacket;

    fn next(&mut self) -> Option<SensorPacket> {
        let mut resyncing = false;
        while self.pos + FRAME_LEN <= self.buf.len() {
            match decode_packet(&self.buf[self.pos..self.pos + FRAME_LEN]) {
                Ok(p) => {
                    self.pos += FRAME_LEN;
                    return Some(p);
                }
                Err(e) => {
                    if !resyncing {
                        log::debug!("frame at byte {}: {e}", self.pos);
                        self.errors += 1;
                        resyncing = true;
                    }
                    self.pos += 1;
                    while self.pos < self.buf.len() && self.buf[self.pos] != MAGIC {
                        self.pos += 1;
                    }
                }
            }
        }
        if self.pos < self.buf.len() && !resyncing {
            self.errors += 1;
        }
        self.pos = self.buf.len();
        None
    }
}
