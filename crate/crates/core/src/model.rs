//! Shared domain types and the geometric/flag primitives every other
//! module builds on.

use serde::{Deserialize, Serialize};

/// Attitude epsilon used to absorb floating-point jitter when deriving a
/// neighbor's mobility behavior from consecutive distance samples.
pub const DEFAULT_ATTITUDE_EPS_M: f64 = 0.5;

/// Unique, stable identifier of a UAV for the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UavId(pub u32);

impl UavId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for UavId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "u{}", self.0)
    }
}

/// Position in flat Cartesian meters. `z` is altitude above ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Location3D {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite() && z.is_finite());
        debug_assert!(z >= 0.0);
        Self { x, y, z }
    }
}

/// Euclidean distance between two positions.
pub fn distance(a: Location3D, b: Location3D) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Whether `b` lies inside `a`'s coverage area. The boundary is inclusive:
/// a neighbor exactly at radius `r` is still covered.
pub fn in_range(a: Location3D, b: Location3D, r: f64) -> bool {
    debug_assert!(r > 0.0);
    distance(a, b) <= r
}

/// Freshness counter for a neighbor entry: 3 means updated in the last
/// slot, 0 means no update for the previous three slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct QualityFlag(u8);

impl QualityFlag {
    pub const MAX: u8 = 3;

    /// Flag value for an entry refreshed this slot.
    pub fn fresh() -> Self {
        QualityFlag(Self::MAX)
    }

    pub fn new(q: u8) -> Self {
        assert!(q <= Self::MAX, "quality flag out of range: {q}");
        QualityFlag(q)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Per-slot decay, saturating at zero.
    pub fn decrement(&mut self) {
        self.0 = self.0.saturating_sub(1);
    }

    pub fn is_expired(self) -> bool {
        self.0 == 0
    }
}

/// Mobility behavior of a neighbor relative to the observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attitude {
    Static = 0,
    Inbound = 1,
    Outbound = 2,
}

/// Derive the attitude flag from two consecutive distance observations of
/// the same neighbor. Changes smaller than `eps` count as static.
pub fn classify_attitude(prev_d: f64, new_d: f64, eps: f64) -> Attitude {
    debug_assert!(prev_d >= 0.0 && new_d >= 0.0);
    if new_d < prev_d - eps {
        Attitude::Inbound
    } else if new_d > prev_d + eps {
        Attitude::Outbound
    } else {
        Attitude::Static
    }
}

/// State flag of a neighbor: ordinary or observed-malicious.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborState {
    Honest = 0,
    Malicious = 1,
}

/// One row of a UAV's neighbor list.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborEntry {
    pub id: UavId,
    /// Slot index of the last update to this entry.
    pub last_update_slot: u64,
    pub loc: Location3D,
    pub q: QualityFlag,
    /// 1 for directly heard neighbors, 2 for entries learned from a
    /// neighbor's list.
    pub h: u8,
    pub a: Attitude,
    /// Distance from the owner at the time of the last update.
    pub d: f64,
    pub s: NeighborState,
}

/// Per-UAV neighbor table keyed by id. Never contains the owner's own id;
/// that guard lives in the protocol, which is the only writer.
#[derive(Debug, Clone, Default)]
pub struct NeighborList {
    entries: std::collections::BTreeMap<UavId, NeighborEntry>,
}

impl NeighborList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: UavId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn get(&self, id: UavId) -> Option<&NeighborEntry> {
        self.entries.get(&id)
    }

    pub fn get_mut(&mut self, id: UavId) -> Option<&mut NeighborEntry> {
        self.entries.get_mut(&id)
    }

    pub fn insert(&mut self, entry: NeighborEntry) {
        self.entries.insert(entry.id, entry);
    }

    pub fn remove(&mut self, id: UavId) -> Option<NeighborEntry> {
        self.entries.remove(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &NeighborEntry> {
        self.entries.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut NeighborEntry> {
        self.entries.values_mut()
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&NeighborEntry) -> bool) {
        self.entries.retain(|_, e| keep(e));
    }

    /// Ids of directly heard (one-hop) neighbors, ascending.
    pub fn one_hop_ids(&self) -> Vec<UavId> {
        self.entries
            .values()
            .filter(|e| e.h == 1)
            .map(|e| e.id)
            .collect()
    }

    /// True when every remaining entry was learned second-hand.
    pub fn only_beyond_coverage(&self) -> bool {
        self.entries.values().all(|e| e.h > 1)
    }

    /// Snapshot of all entries as they travel inside HM/IM/TM payloads.
    /// Only (id, loc, h) are shared; the q/a/d/s judgments stay local.
    pub fn payload_snapshot(&self) -> Vec<NlSnapshot> {
        self.entries
            .values()
            .map(|e| NlSnapshot {
                id: e.id,
                loc: e.loc,
                h: e.h,
            })
            .collect()
    }
}

/// Entry of the suspect list: recurrence counter plus block state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuspectEntry {
    pub id: UavId,
    pub r: u32,
    pub blocked: bool,
}

/// State carried by a notification about another UAV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnState {
    Suspect,
    Blocked,
    Honest,
}

/// One neighbor-list row as shared on the wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlSnapshot {
    pub id: UavId,
    pub loc: Location3D,
    pub h: u8,
}

/// Wire message kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MessageKind {
    Hello,
    Identification,
    Trap,
    StateNotification,
}

impl MessageKind {
    pub fn short(self) -> &'static str {
        match self {
            MessageKind::Hello => "HM",
            MessageKind::Identification => "IM",
            MessageKind::Trap => "TM",
            MessageKind::StateNotification => "SN",
        }
    }
}

/// Body of a wire message. HM/IM/TM carry the sender's location plus its
/// neighbor-list snapshot; a state notification carries only the target's
/// state change.
#[derive(Debug, Clone, PartialEq)]
pub enum MessageBody {
    Hello {
        loc: Location3D,
        nl: Vec<NlSnapshot>,
    },
    Identification {
        loc: Location3D,
        nl: Vec<NlSnapshot>,
    },
    Trap {
        loc: Location3D,
        nl: Vec<NlSnapshot>,
    },
    StateNotification {
        target: UavId,
        state: SnState,
    },
}

/// A message in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: UavId,
    pub sent_at: f64,
    pub body: MessageBody,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self.body {
            MessageBody::Hello { .. } => MessageKind::Hello,
            MessageBody::Identification { .. } => MessageKind::Identification,
            MessageBody::Trap { .. } => MessageKind::Trap,
            MessageBody::StateNotification { .. } => MessageKind::StateNotification,
        }
    }

    /// The location the sender claims for itself, if the kind carries one.
    pub fn claimed_loc(&self) -> Option<Location3D> {
        match &self.body {
            MessageBody::Hello { loc, .. }
            | MessageBody::Identification { loc, .. }
            | MessageBody::Trap { loc, .. } => Some(*loc),
            MessageBody::StateNotification { .. } => None,
        }
    }

    pub fn payload_nl(&self) -> Option<&[NlSnapshot]> {
        match &self.body {
            MessageBody::Hello { nl, .. }
            | MessageBody::Identification { nl, .. }
            | MessageBody::Trap { nl, .. } => Some(nl),
            MessageBody::StateNotification { .. } => None,
        }
    }
}

/// Slot timing of the protocol. `lambda_s` is the update period; the hello
/// frequency follows as its reciprocal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotConfig {
    pub lambda_s: f64,
    pub lambda_min_s: f64,
    pub lambda_max_s: f64,
}

impl SlotConfig {
    pub fn new(lambda_s: f64) -> Self {
        Self {
            lambda_s,
            lambda_min_s: 0.1,
            lambda_max_s: 10.0,
        }
    }

    pub fn hello_freq_hz(&self) -> f64 {
        1.0 / self.lambda_s
    }

    pub fn is_valid(&self) -> bool {
        self.lambda_s > 0.0
            && self.lambda_min_s <= self.lambda_s
            && self.lambda_s <= self.lambda_max_s
    }
}

impl Default for SlotConfig {
    fn default() -> Self {
        Self::new(1.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_345_triangle() {
        let a = Location3D::new(0.0, 0.0, 0.0);
        let b = Location3D::new(3.0, 4.0, 0.0);
        assert_eq!(distance(a, b), 5.0);
    }

    #[test]
    fn distance_identity() {
        let p = Location3D::new(1.0, 2.0, 3.0);
        assert_eq!(distance(p, p), 0.0);
    }

    #[test]
    fn distance_single_axis_at_altitude() {
        // 300 ft = 91.44 m exactly.
        let a = Location3D::new(10.0, 0.0, 91.44);
        let b = Location3D::new(10.0, 115.0, 91.44);
        assert_eq!(distance(a, b), 115.0);
    }

    #[test]
    fn in_range_boundary_is_inclusive() {
        let a = Location3D::new(0.0, 0.0, 0.0);
        assert!(in_range(a, Location3D::new(114.9, 0.0, 0.0), 115.0));
        assert!(in_range(a, Location3D::new(115.0, 0.0, 0.0), 115.0));
        assert!(!in_range(a, Location3D::new(115.01, 0.0, 0.0), 115.0));
    }

    #[test]
    fn attitude_classification() {
        assert_eq!(classify_attitude(50.0, 40.0, 0.5), Attitude::Inbound);
        assert_eq!(classify_attitude(50.0, 50.0, 0.5), Attitude::Static);
        assert_eq!(classify_attitude(40.0, 50.0, 0.5), Attitude::Outbound);
    }

    #[test]
    fn attitude_jitter_within_eps_is_static() {
        assert_eq!(classify_attitude(50.0, 50.4, 0.5), Attitude::Static);
        assert_eq!(classify_attitude(50.0, 49.6, 0.5), Attitude::Static);
    }

    #[test]
    fn quality_flag_decays_and_saturates() {
        let mut q = QualityFlag::fresh();
        assert_eq!(q.value(), 3);
        q.decrement();
        q.decrement();
        q.decrement();
        assert!(q.is_expired());
        q.decrement();
        assert_eq!(q.value(), 0);
    }

    #[test]
    fn payload_snapshot_carries_id_loc_h_only() {
        let mut nl = NeighborList::new();
        nl.insert(NeighborEntry {
            id: UavId(7),
            last_update_slot: 3,
            loc: Location3D::new(1.0, 2.0, 91.44),
            q: QualityFlag::new(2),
            h: 2,
            a: Attitude::Inbound,
            d: 42.0,
            s: NeighborState::Malicious,
        });
        let snap = nl.payload_snapshot();
        assert_eq!(snap.len(), 1);
        assert_eq!(snap[0].id, UavId(7));
        assert_eq!(snap[0].h, 2);
    }

    #[test]
    fn slot_config_defaults() {
        let c = SlotConfig::default();
        assert_eq!(c.lambda_s, 1.5);
        assert!((c.hello_freq_hz() - 1.0 / 1.5).abs() < 1e-12);
        assert!(c.is_valid());
    }

    fn arb_loc() -> impl Strategy<Value = Location3D> {
        (
            -2000.0f64..2000.0,
            -2000.0f64..2000.0,
            0.0f64..500.0,
        )
            .prop_map(|(x, y, z)| Location3D::new(x, y, z))
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(a in arb_loc(), b in arb_loc()) {
            prop_assert_eq!(distance(a, b), distance(b, a));
        }

        #[test]
        fn distance_triangle_inequality(a in arb_loc(), b in arb_loc(), c in arb_loc()) {
            prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
        }

        #[test]
        fn distance_nonnegative(a in arb_loc(), b in arb_loc()) {
            prop_assert!(distance(a, b) >= 0.0);
        }

        /// The flag stays in 0..=3 under arbitrary refresh/decay sequences.
        #[test]
        fn quality_flag_never_leaves_range(ops in proptest::collection::vec(any::<bool>(), 0..64)) {
            let mut q = QualityFlag::fresh();
            for refresh in ops {
                if refresh {
                    q = QualityFlag::fresh();
                } else {
                    q.decrement();
                }
                prop_assert!(q.value() <= QualityFlag::MAX);
            }
        }
    }
}
