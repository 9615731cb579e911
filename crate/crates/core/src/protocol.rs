//! The per-node location-sharing state machine: neighbor discovery,
//! mobility-triggered maintenance, and management of neighbors caught
//! injecting false locations.
//!
//! Handlers are pure over the node's own state: they never touch a radio
//! and instead return the messages to transmit. The kernel owns dispatch,
//! delivery, and timing.

use std::collections::BTreeMap;

use crate::adversary::Verdict;
use crate::model::{
    classify_attitude, distance, Attitude, Location3D, Message, MessageBody, MessageKind,
    NeighborEntry, NeighborList, NeighborState, NlSnapshot, QualityFlag, SnState, SuspectEntry,
    UavId, DEFAULT_ATTITUDE_EPS_M,
};

/// Protocol constants. The block threshold is fixed by the counter scheme
/// but stays configurable for sensitivity runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub block_threshold: u32,
    pub attitude_eps_m: f64,
    /// Radio coverage radius; the hop flag marks whether a neighbor's
    /// freshest known location falls inside it.
    pub coverage_radius_m: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            block_threshold: 3,
            attitude_eps_m: DEFAULT_ATTITUDE_EPS_M,
            coverage_radius_m: 115.0,
        }
    }
}

/// Timing context the kernel passes into every handler.
#[derive(Debug, Clone, Copy)]
pub struct TickCtx {
    pub now: f64,
    pub slot: u64,
}

/// A message the node wants transmitted.
#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    Broadcast(Message),
    Unicast(UavId, Message),
}

/// Guard decision for one received message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardAction {
    Process,
    Drop,
}

/// What happened to one delivered message.
#[derive(Debug, Default)]
pub struct DeliveryOutcome {
    /// The message passed the guard and updated protocol state.
    pub processed: bool,
    /// Processing inserted the sender as a previously unknown one-hop
    /// neighbor (a recognition event).
    pub sender_newly_inserted: bool,
    pub outbound: Vec<Outbound>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct PerKindCounts {
    pub hm: u64,
    pub im: u64,
    pub tm: u64,
    pub sn: u64,
}

impl PerKindCounts {
    pub fn bump(&mut self, kind: MessageKind) {
        match kind {
            MessageKind::Hello => self.hm += 1,
            MessageKind::Identification => self.im += 1,
            MessageKind::Trap => self.tm += 1,
            MessageKind::StateNotification => self.sn += 1,
        }
    }

    pub fn get(&self, kind: MessageKind) -> u64 {
        match kind {
            MessageKind::Hello => self.hm,
            MessageKind::Identification => self.im,
            MessageKind::Trap => self.tm,
            MessageKind::StateNotification => self.sn,
        }
    }

    /// HM + IM + TM; notifications are bookkeeping, not location traffic.
    pub fn location_bearing(&self) -> u64 {
        self.hm + self.im + self.tm
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct MessageCounters {
    pub sent: PerKindCounts,
    pub received: PerKindCounts,
}

/// Full protocol state of one UAV.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: UavId,
    pub loc: Location3D,
    pub prev_loc: Location3D,
    pub nl: NeighborList,
    pub sl: BTreeMap<UavId, SuspectEntry>,
    pub counters: MessageCounters,
    pub announce_pending: bool,
    cfg: ProtocolConfig,
    last_hm_slot: Option<u64>,
    started: bool,
}

impl NodeState {
    pub fn new(id: UavId, loc: Location3D, cfg: ProtocolConfig) -> Self {
        Self {
            id,
            loc,
            prev_loc: loc,
            nl: NeighborList::new(),
            sl: BTreeMap::new(),
            counters: MessageCounters::default(),
            announce_pending: false,
            cfg,
            last_hm_slot: None,
            started: false,
        }
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn is_blocked(&self, id: UavId) -> bool {
        self.sl.get(&id).is_some_and(|e| e.blocked)
    }

    pub fn is_suspect(&self, id: UavId) -> bool {
        self.sl.get(&id).is_some_and(|e| !e.blocked)
    }

    /// Activate the node: clear protocol state and announce presence.
    /// A restarted node behaves exactly like a fresh one; only the
    /// message tallies survive, since those are monotone measurements.
    pub fn on_start(&mut self, ctx: &TickCtx) -> Vec<Outbound> {
        self.nl = NeighborList::new();
        self.sl.clear();
        self.announce_pending = false;
        self.last_hm_slot = None;
        self.started = true;
        self.last_hm_slot = Some(ctx.slot);
        vec![self.make_broadcast_hello(ctx)]
    }

    /// Slot boundary: age all neighbor entries, evict the expired,
    /// re-judge which of the survivors sit inside coverage, and
    /// re-announce when nobody does.
    ///
    /// The hop re-derivation is what turns gossip into awareness: an id
    /// learned second-hand whose freshest known location falls inside
    /// coverage becomes a one-hop neighbor and starts receiving trap
    /// messages, which bootstraps the direct exchange. A wrong promotion
    /// corrects itself, since the unreachable entry ages out.
    pub fn on_slot_tick(&mut self, ctx: &TickCtx) -> Vec<Outbound> {
        for e in self.nl.iter_mut() {
            e.q.decrement();
        }
        self.nl.retain(|e| !e.q.is_expired());
        let own = self.loc;
        let radius = self.cfg.coverage_radius_m;
        for e in self.nl.iter_mut() {
            e.d = distance(own, e.loc);
            e.h = if e.d <= radius { 1 } else { 2 };
        }
        if self.nl.is_empty() || self.nl.only_beyond_coverage() {
            self.announce_pending = true;
        }
        self.flush_announce(ctx)
    }

    /// The node moved: trap-message every one-hop neighbor with the new
    /// location, or fall back to discovery when nobody is directly known.
    pub fn on_location_change(&mut self, new_loc: Location3D, ctx: &TickCtx) -> Vec<Outbound> {
        debug_assert!(new_loc != self.loc, "location change requires movement");
        self.prev_loc = self.loc;
        self.loc = new_loc;
        let one_hop = self.nl.one_hop_ids();
        if one_hop.is_empty() {
            self.announce_pending = true;
            return self.flush_announce(ctx);
        }
        let payload = self.nl.payload_snapshot();
        one_hop
            .into_iter()
            .map(|dest| {
                self.counters.sent.bump(MessageKind::Trap);
                Outbound::Unicast(
                    dest,
                    Message {
                        sender: self.id,
                        sent_at: ctx.now,
                        body: MessageBody::Trap {
                            loc: self.loc,
                            nl: payload.clone(),
                        },
                    },
                )
            })
            .collect()
    }

    /// Full receive pipeline: tally, guard, then dispatch by kind.
    /// Location-bearing kinds require the detector's verdict.
    pub fn handle_delivery(
        &mut self,
        msg: &Message,
        verdict: Option<Verdict>,
        ctx: &TickCtx,
    ) -> DeliveryOutcome {
        self.counters.received.bump(msg.kind());

        if let MessageBody::StateNotification { target, state } = msg.body {
            if self.is_blocked(msg.sender) {
                return DeliveryOutcome::default();
            }
            self.on_state_notification(msg.sender, target, state);
            return DeliveryOutcome::default();
        }

        let verdict = verdict.expect("location-bearing message requires a verdict");
        let (action, mut outbound) = self.guard_message(msg.sender, verdict, ctx);
        if action == GuardAction::Drop {
            return DeliveryOutcome {
                processed: false,
                sender_newly_inserted: false,
                outbound,
            };
        }

        let newly = match &msg.body {
            MessageBody::Hello { loc, nl } => {
                let newly = self.upsert_discovered(msg.sender, *loc, ctx);
                self.merge_neighbor_nl(nl, ctx);
                outbound.push(self.make_identification(msg.sender, ctx));
                newly
            }
            MessageBody::Identification { loc, nl } => {
                let newly = self.upsert_discovered(msg.sender, *loc, ctx);
                self.merge_neighbor_nl(nl, ctx);
                newly
            }
            MessageBody::Trap { loc, nl } => {
                let newly = self.upsert_trap(msg.sender, *loc, ctx);
                self.merge_neighbor_nl(nl, ctx);
                newly
            }
            MessageBody::StateNotification { .. } => unreachable!("handled above"),
        };

        DeliveryOutcome {
            processed: true,
            sender_newly_inserted: newly,
            outbound,
        }
    }

    /// False-location management. Messages from blocked senders are
    /// dropped outright. A false claim from an honest sender marks it
    /// suspect (the message is still processed); repeated false claims
    /// count up and block at the threshold; truthful claims count back
    /// down and rehabilitate at zero. One-hop neighbors are notified of
    /// every state change.
    pub fn guard_message(
        &mut self,
        sender: UavId,
        verdict: Verdict,
        ctx: &TickCtx,
    ) -> (GuardAction, Vec<Outbound>) {
        if self.is_blocked(sender) {
            return (GuardAction::Drop, Vec::new());
        }
        match verdict {
            Verdict::False => {
                if let Some(entry) = self.sl.get_mut(&sender) {
                    entry.r += 1;
                    if entry.r >= self.cfg.block_threshold {
                        entry.blocked = true;
                        self.nl.remove(sender);
                        let out = self.notify_one_hop(sender, SnState::Blocked, ctx);
                        (GuardAction::Drop, out)
                    } else {
                        (GuardAction::Process, Vec::new())
                    }
                } else {
                    if let Some(e) = self.nl.get_mut(sender) {
                        e.s = NeighborState::Malicious;
                    }
                    self.sl.insert(
                        sender,
                        SuspectEntry {
                            id: sender,
                            r: 1,
                            blocked: false,
                        },
                    );
                    let out = self.notify_one_hop(sender, SnState::Suspect, ctx);
                    (GuardAction::Process, out)
                }
            }
            Verdict::Honest => {
                let mut out = Vec::new();
                if let Some(entry) = self.sl.get_mut(&sender) {
                    if !entry.blocked {
                        entry.r = entry.r.saturating_sub(1);
                        if entry.r == 0 {
                            if let Some(e) = self.nl.get_mut(sender) {
                                e.s = NeighborState::Honest;
                            }
                            self.sl.remove(&sender);
                            out = self.notify_one_hop(sender, SnState::Honest, ctx);
                        }
                    }
                }
                (GuardAction::Process, out)
            }
        }
    }

    /// Apply a neighbor's state-change notification. Notifications about
    /// the node itself are ignored.
    pub fn on_state_notification(&mut self, _sender: UavId, target: UavId, state: SnState) {
        if target == self.id {
            return;
        }
        match state {
            SnState::Suspect => {
                if let Some(e) = self.nl.get_mut(target) {
                    e.s = NeighborState::Malicious;
                }
                self.sl.entry(target).or_insert(SuspectEntry {
                    id: target,
                    r: 1,
                    blocked: false,
                });
            }
            SnState::Blocked => {
                self.nl.remove(target);
                self.sl.insert(
                    target,
                    SuspectEntry {
                        id: target,
                        r: self.cfg.block_threshold,
                        blocked: true,
                    },
                );
            }
            SnState::Honest => {
                if let Some(e) = self.nl.get_mut(target) {
                    e.s = NeighborState::Honest;
                }
                self.sl.remove(&target);
            }
        }
    }

    /// Merge the neighbor-list snapshot carried by a processed message.
    /// Unknown ids come in as second-hop entries; known ids only have
    /// their location refreshed when the carried knowledge is at least as
    /// direct as ours. Freshness is never lowered, own and blocked ids
    /// never enter, and locally flagged entries are left untouched.
    pub fn merge_neighbor_nl(&mut self, payload: &[NlSnapshot], ctx: &TickCtx) {
        for snap in payload {
            if snap.id == self.id || self.is_blocked(snap.id) {
                continue;
            }
            match self.nl.get_mut(snap.id) {
                None => {
                    let d = distance(self.loc, snap.loc);
                    self.nl.insert(NeighborEntry {
                        id: snap.id,
                        last_update_slot: ctx.slot,
                        loc: snap.loc,
                        q: QualityFlag::fresh(),
                        h: (snap.h + 1).min(2),
                        a: Attitude::Static,
                        d,
                        s: NeighborState::Honest,
                    });
                }
                Some(e) => {
                    if e.s == NeighborState::Malicious {
                        continue;
                    }
                    if snap.h <= e.h {
                        e.loc = snap.loc;
                        e.d = distance(self.loc, snap.loc);
                        e.last_update_slot = ctx.slot;
                    }
                }
            }
        }
    }

    /// Register a directly heard announcer or responder.
    fn upsert_discovered(&mut self, sender: UavId, loc: Location3D, ctx: &TickCtx) -> bool {
        let d = distance(self.loc, loc);
        match self.nl.get_mut(sender) {
            Some(e) => {
                e.loc = loc;
                e.q = QualityFlag::fresh();
                e.h = 1;
                e.a = Attitude::Static;
                e.d = d;
                e.s = NeighborState::Honest;
                e.last_update_slot = ctx.slot;
                false
            }
            None => {
                self.nl.insert(NeighborEntry {
                    id: sender,
                    last_update_slot: ctx.slot,
                    loc,
                    q: QualityFlag::fresh(),
                    h: 1,
                    a: Attitude::Static,
                    d,
                    s: NeighborState::Honest,
                });
                true
            }
        }
    }

    /// Register a trap-message sender: like discovery, but the movement
    /// direction is derived from the previous distance sample and the
    /// local state judgment is preserved.
    fn upsert_trap(&mut self, sender: UavId, loc: Location3D, ctx: &TickCtx) -> bool {
        let d = distance(self.loc, loc);
        match self.nl.get_mut(sender) {
            Some(e) => {
                e.a = classify_attitude(e.d, d, self.cfg.attitude_eps_m);
                e.loc = loc;
                e.q = QualityFlag::fresh();
                e.h = 1;
                e.d = d;
                e.last_update_slot = ctx.slot;
                false
            }
            None => {
                self.nl.insert(NeighborEntry {
                    id: sender,
                    last_update_slot: ctx.slot,
                    loc,
                    q: QualityFlag::fresh(),
                    h: 1,
                    a: Attitude::Static,
                    d,
                    s: NeighborState::Honest,
                });
                true
            }
        }
    }

    fn notify_one_hop(&mut self, target: UavId, state: SnState, ctx: &TickCtx) -> Vec<Outbound> {
        let dests = self.nl.one_hop_ids();
        dests
            .into_iter()
            .map(|dest| {
                self.counters.sent.bump(MessageKind::StateNotification);
                Outbound::Unicast(
                    dest,
                    Message {
                        sender: self.id,
                        sent_at: ctx.now,
                        body: MessageBody::StateNotification { target, state },
                    },
                )
            })
            .collect()
    }

    fn flush_announce(&mut self, ctx: &TickCtx) -> Vec<Outbound> {
        if self.announce_pending {
            self.announce_pending = false;
            if self.last_hm_slot != Some(ctx.slot) {
                self.last_hm_slot = Some(ctx.slot);
                return vec![self.make_broadcast_hello(ctx)];
            }
        }
        Vec::new()
    }

    fn make_broadcast_hello(&mut self, ctx: &TickCtx) -> Outbound {
        self.counters.sent.bump(MessageKind::Hello);
        Outbound::Broadcast(Message {
            sender: self.id,
            sent_at: ctx.now,
            body: MessageBody::Hello {
                loc: self.loc,
                nl: self.nl.payload_snapshot(),
            },
        })
    }

    fn make_identification(&mut self, dest: UavId, ctx: &TickCtx) -> Outbound {
        self.counters.sent.bump(MessageKind::Identification);
        Outbound::Unicast(
            dest,
            Message {
                sender: self.id,
                sent_at: ctx.now,
                body: MessageBody::Identification {
                    loc: self.loc,
                    nl: self.nl.payload_snapshot(),
                },
            },
        )
    }
}
