//! The complete record of one simulation run: per-slot node snapshots
//! plus the event ledgers the metrics pipeline consumes.

use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};

use crate::model::{Location3D, MessageKind, UavId};
use crate::protocol::{MessageCounters, PerKindCounts};

/// One neighbor-list row as captured in a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborSnap {
    pub id: UavId,
    pub h: u8,
    pub q: u8,
}

/// State of one node at the end of a slot. Counters are cumulative.
#[derive(Debug, Clone)]
pub struct NodeFrame {
    pub pos: Location3D,
    pub neighbors: Vec<NeighborSnap>,
    pub sent: PerKindCounts,
    pub received: PerKindCounts,
}

impl NodeFrame {
    /// Ids perceived as direct neighbors in this slot.
    pub fn one_hop_ids(&self) -> impl Iterator<Item = UavId> + '_ {
        self.neighbors.iter().filter(|n| n.h == 1).map(|n| n.id)
    }
}

/// All nodes at the end of one slot.
#[derive(Debug, Clone)]
pub struct SlotFrame {
    pub start_time: f64,
    pub nodes: Vec<NodeFrame>,
}

/// One accepted location-bearing message, as seen by the receiver.
#[derive(Debug, Clone, Copy)]
pub struct UpdateRecord {
    pub receiver: UavId,
    pub sender: UavId,
    pub kind: MessageKind,
    pub sent_at: f64,
    pub recv_at: f64,
    /// The location the sender claimed; for a lying sender this differs
    /// from its true position.
    pub claimed: Location3D,
    /// The sender was absent from the receiver's list before this message.
    pub newly_inserted: bool,
}

/// One trap message handed to the radio, one record per recipient.
#[derive(Debug, Clone, Copy)]
pub struct TmSendRecord {
    pub sender: UavId,
    pub dest: UavId,
    /// The sender's change-detection time (the trap's send timestamp).
    pub detected_at: f64,
}

/// Detector outcomes for one (receiver, sender) pair.
#[derive(Debug, Clone, Copy, Default)]
pub struct VerdictTally {
    pub evaluated: u64,
    pub flagged: u64,
    pub first_flagged: bool,
}

/// Full output of a run.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub lambda_s: f64,
    pub sim_time_s: f64,
    pub range_m: f64,
    pub node_ids: Vec<UavId>,
    pub malicious: BTreeSet<UavId>,
    pub slots: Vec<SlotFrame>,
    pub updates: Vec<UpdateRecord>,
    pub tm_sends: Vec<TmSendRecord>,
    pub verdicts: BTreeMap<(UavId, UavId), VerdictTally>,
    pub final_counters: Vec<MessageCounters>,
}

impl SimTrace {
    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    /// Total mission time covered by the recorded slots.
    pub fn tau(&self) -> f64 {
        self.slot_count() as f64 * self.lambda_s
    }

    pub fn position(&self, slot: usize, node: UavId) -> Location3D {
        self.slots[slot].nodes[node.index()].pos
    }

    /// Slot index a timestamp falls into, clamped to the recorded range.
    pub fn slot_of_time(&self, t: f64) -> usize {
        let idx = (t / self.lambda_s).floor() as isize;
        idx.clamp(0, self.slot_count() as isize - 1) as usize
    }

    /// Deterministic content hash over every field that defines the run
    /// outcome. Identical (config, seed) pairs must produce identical
    /// hashes.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        let f = |h: &mut Sha256, v: f64| h.update(v.to_bits().to_le_bytes());
        let u = |h: &mut Sha256, v: u64| h.update(v.to_le_bytes());

        f(&mut h, self.lambda_s);
        f(&mut h, self.sim_time_s);
        f(&mut h, self.range_m);
        u(&mut h, self.node_ids.len() as u64);
        for id in &self.malicious {
            u(&mut h, id.0 as u64);
        }
        for frame in &self.slots {
            f(&mut h, frame.start_time);
            for nf in &frame.nodes {
                f(&mut h, nf.pos.x);
                f(&mut h, nf.pos.y);
                f(&mut h, nf.pos.z);
                for n in &nf.neighbors {
                    u(&mut h, n.id.0 as u64);
                    h.update([n.h, n.q]);
                }
                for c in [&nf.sent, &nf.received] {
                    u(&mut h, c.hm);
                    u(&mut h, c.im);
                    u(&mut h, c.tm);
                    u(&mut h, c.sn);
                }
            }
        }
        for r in &self.updates {
            u(&mut h, r.receiver.0 as u64);
            u(&mut h, r.sender.0 as u64);
            h.update([r.kind.short().as_bytes()[0], r.newly_inserted as u8]);
            f(&mut h, r.sent_at);
            f(&mut h, r.recv_at);
            f(&mut h, r.claimed.x);
            f(&mut h, r.claimed.y);
            f(&mut h, r.claimed.z);
        }
        for r in &self.tm_sends {
            u(&mut h, r.sender.0 as u64);
            u(&mut h, r.dest.0 as u64);
            f(&mut h, r.detected_at);
        }
        for ((recv, send), t) in &self.verdicts {
            u(&mut h, recv.0 as u64);
            u(&mut h, send.0 as u64);
            u(&mut h, t.evaluated);
            u(&mut h, t.flagged);
            h.update([t.first_flagged as u8]);
        }
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
