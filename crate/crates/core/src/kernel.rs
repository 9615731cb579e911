//! Deterministic discrete-event scheduler with a range-gated radio.
//!
//! Events dispatch in (time, sequence) order; the sequence counter breaks
//! ties in insertion order, so identical configurations and seeds replay
//! identically. Radio reachability is a pure range cutoff evaluated at
//! send time, with configurable loss probability and delivery latency.
//! Every random concern (placement/mobility, loss, latency, adversary)
//! draws from its own stream derived from the master seed, so toggling
//! one feature does not perturb the others.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{
    AdversaryConfig, Detector, DetectorConfig, DetectorMode, Falsifier, Verdict,
};
use crate::mobility::{AreaBounds, MobilityState};
use crate::model::{in_range, Location3D, Message, MessageBody, MessageKind, SlotConfig, UavId};
use crate::protocol::{NodeState, Outbound, ProtocolConfig, TickCtx};
use crate::trace::{
    NeighborSnap, NodeFrame, SimTrace, SlotFrame, TmSendRecord, UpdateRecord, VerdictTally,
};

/// Delivery latency rule for the radio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyRule {
    Zero,
    Uniform { min_s: f64, max_s: f64 },
}

impl LatencyRule {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            LatencyRule::Zero => 0.0,
            LatencyRule::Uniform { min_s, max_s } => {
                if min_s == max_s {
                    min_s
                } else {
                    rng.gen_range(min_s..max_s)
                }
            }
        }
    }
}

impl Default for LatencyRule {
    fn default() -> Self {
        // Brackets observed single-hop delays without modeling MAC
        // contention.
        LatencyRule::Uniform {
            min_s: 5e-5,
            max_s: 5e-3,
        }
    }
}

/// Radio parameters: pure range cutoff plus loss and latency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub range_m: f64,
    pub loss_prob: f64,
    pub latency: LatencyRule,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            range_m: 115.0,
            loss_prob: 0.0,
            latency: LatencyRule::default(),
        }
    }
}

/// Initial node placement.
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    UniformRandom,
    Explicit(Vec<Location3D>),
}

/// Fully resolved parameters for one run.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub n_uavs: usize,
    pub bounds: AreaBounds,
    pub altitude_m: f64,
    pub speed_mps: f64,
    pub slot: SlotConfig,
    pub radio: RadioConfig,
    pub protocol: ProtocolConfig,
    pub adversary: AdversaryConfig,
    pub detector: DetectorConfig,
    pub sim_time_s: f64,
    pub seed: u64,
    pub placement: Placement,
}

impl SimulationConfig {
    /// Paper-scale defaults: 40 UAVs over 1.5 km x 1.5 km at 300 ft,
    /// 20 m/s, 115 m range, 1.5 s slots, 1200 s missions.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            n_uavs: 40,
            bounds: AreaBounds::new(0.0, 1500.0, 0.0, 1500.0),
            altitude_m: 91.44,
            speed_mps: 20.0,
            slot: SlotConfig::default(),
            radio: RadioConfig::default(),
            protocol: ProtocolConfig::default(),
            adversary: AdversaryConfig::default(),
            detector: DetectorConfig::default(),
            sim_time_s: 1200.0,
            seed,
            placement: Placement::UniformRandom,
        }
    }
}

/// What the kernel dispatches.
#[derive(Debug, Clone)]
pub enum EventKind {
    NodeStart(UavId),
    NodeStop(UavId),
    MoveStep,
    SlotTick,
    Deliver {
        dest: UavId,
        msg: Message,
        /// The sender's true position at send time; ground truth for the
        /// oracle detector.
        true_sender_loc: Location3D,
    },
}

#[derive(Debug, Clone)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("event at {event} s predates current time {now} s")]
    PastDated { event: f64, now: f64 },
}

struct QueuedEvent {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

/// Pending-event queue with stable (time, insertion) ordering.
pub struct EventQueue {
    heap: BinaryHeap<Reverse<QueuedEvent>>,
    next_seq: u64,
    now: f64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: 0.0,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, event: SimEvent) -> Result<(), ScheduleError> {
        if event.time < self.now {
            return Err(ScheduleError::PastDated {
                event: event.time,
                now: self.now,
            });
        }
        self.heap.push(Reverse(QueuedEvent {
            time: event.time,
            seq: self.next_seq,
            kind: event.kind,
        }));
        self.next_seq += 1;
        Ok(())
    }

    fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop().map(|Reverse(e)| {
            debug_assert!(e.time >= self.now, "event times must be non-decreasing");
            self.now = e.time;
            SimEvent {
                time: e.time,
                kind: e.kind,
            }
        })
    }
}

impl Default for EventQueue {
    fn default() -> Self {
        Self::new()
    }
}

struct NodeInstance {
    state: NodeState,
    mobility: MobilityState,
    detector: Detector,
    falsifier: Option<Falsifier>,
    active: bool,
}

/// One simulation run in progress.
pub struct Simulation {
    cfg: SimulationConfig,
    queue: EventQueue,
    nodes: Vec<NodeInstance>,
    current_slot: u64,
    mobility_rng: ChaCha8Rng,
    loss_rng: ChaCha8Rng,
    latency_rng: ChaCha8Rng,
    // Trace under construction.
    slots: Vec<SlotFrame>,
    updates: Vec<UpdateRecord>,
    tm_sends: Vec<TmSendRecord>,
    verdicts: std::collections::BTreeMap<(UavId, UavId), VerdictTally>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Simulation {
    pub fn new(cfg: SimulationConfig) -> Self {
        assert!(cfg.radio.range_m > 0.0, "radio range must be positive");
        assert!(cfg.slot.is_valid(), "invalid slot configuration");
        let mut mobility_rng = stream_rng(cfg.seed, 1);
        let loss_rng = stream_rng(cfg.seed, 2);
        let latency_rng = stream_rng(cfg.seed, 3);

        let mut nodes = Vec::with_capacity(cfg.n_uavs);
        for i in 0..cfg.n_uavs {
            let id = UavId(i as u32);
            let pos = match &cfg.placement {
                Placement::UniformRandom => cfg.bounds.sample(cfg.altitude_m, &mut mobility_rng),
                Placement::Explicit(locs) => locs[i],
            };
            // Each malicious node lies from its own stream, keyed by id,
            // so the honest streams stay untouched.
            let falsifier = cfg.adversary.malicious_ids.contains(&id).then(|| {
                Falsifier::new(
                    cfg.adversary.strategy,
                    cfg.bounds,
                    cfg.radio.range_m,
                    stream_rng(cfg.seed, 1000 + id.0 as u64),
                )
            });
            nodes.push(NodeInstance {
                state: NodeState::new(id, pos, cfg.protocol),
                mobility: MobilityState::new(pos, cfg.speed_mps, cfg.bounds),
                detector: Detector::new(cfg.detector),
                falsifier,
                active: true,
            });
        }

        Self {
            cfg,
            queue: EventQueue::new(),
            nodes,
            current_slot: 0,
            mobility_rng,
            loss_rng,
            latency_rng,
            slots: Vec::new(),
            updates: Vec::new(),
            tm_sends: Vec::new(),
            verdicts: std::collections::BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.cfg
    }

    /// Expose scheduling for scripted tests.
    pub fn schedule(&mut self, event: SimEvent) -> Result<(), ScheduleError> {
        self.queue.schedule(event)
    }

    /// Run the whole scenario: start every node at t = 0, step movement
    /// and protocol slots every lambda, and dispatch deliveries until the
    /// clock passes `until`. Returns the complete trace.
    pub fn run(mut self, until: f64) -> SimTrace {
        for i in 0..self.nodes.len() {
            self.queue
                .schedule(SimEvent {
                    time: 0.0,
                    kind: EventKind::NodeStart(UavId(i as u32)),
                })
                .expect("initial events schedule at t=0");
        }
        let lambda = self.cfg.slot.lambda_s;
        let mut k = 1u64;
        while (k as f64) * lambda < until {
            let t = k as f64 * lambda;
            self.queue
                .schedule(SimEvent {
                    time: t,
                    kind: EventKind::MoveStep,
                })
                .unwrap();
            self.queue
                .schedule(SimEvent {
                    time: t,
                    kind: EventKind::SlotTick,
                })
                .unwrap();
            k += 1;
        }

        while let Some(t) = self.queue.peek_time() {
            if t > until {
                break;
            }
            let ev = self.queue.pop().expect("peeked event exists");
            self.dispatch(ev);
        }
        // Close out the slot in progress.
        self.record_slot_frame();
        self.finish()
    }

    fn dispatch(&mut self, ev: SimEvent) {
        match ev.kind {
            EventKind::NodeStart(id) => {
                let ctx = self.ctx(ev.time);
                self.nodes[id.index()].active = true;
                let out = self.nodes[id.index()].state.on_start(&ctx);
                self.route(id, out, ev.time);
            }
            EventKind::NodeStop(id) => {
                self.nodes[id.index()].active = false;
            }
            EventKind::MoveStep => {
                // The boundary closes the previous slot: capture it before
                // anybody moves.
                self.record_slot_frame();
                self.current_slot += 1;
                let dt = self.cfg.slot.lambda_s;
                for node in self.nodes.iter_mut() {
                    if node.active && node.mobility.speed > 0.0 {
                        node.mobility.step(dt, &mut self.mobility_rng);
                    }
                }
            }
            EventKind::SlotTick => {
                let ctx = self.ctx(ev.time);
                for i in 0..self.nodes.len() {
                    if !self.nodes[i].active {
                        continue;
                    }
                    let id = UavId(i as u32);
                    let new_pos = self.nodes[i].mobility.pos;
                    // Movement first so every outgoing claim carries the
                    // current position, then freshness decay and the
                    // discovery fallback.
                    if new_pos != self.nodes[i].state.loc {
                        let out = self.nodes[i].state.on_location_change(new_pos, &ctx);
                        self.route(id, out, ev.time);
                    }
                    let out = self.nodes[i].state.on_slot_tick(&ctx);
                    self.route(id, out, ev.time);
                }
            }
            EventKind::Deliver {
                dest,
                msg,
                true_sender_loc,
            } => {
                if !self.nodes[dest.index()].active {
                    return;
                }
                self.deliver(dest, msg, true_sender_loc, ev.time);
            }
        }
    }

    fn deliver(&mut self, dest: UavId, msg: Message, true_sender_loc: Location3D, now: f64) {
        let ctx = self.ctx(now);
        let verdict = msg.claimed_loc().map(|claimed| {
            let node = &mut self.nodes[dest.index()];
            let truth = (node.detector.config().mode == DetectorMode::Oracle)
                .then_some(true_sender_loc);
            let v = node.detector.evaluate(msg.sender, claimed, msg.sent_at, truth);
            let tally = self.verdicts.entry((dest, msg.sender)).or_default();
            if tally.evaluated == 0 {
                tally.first_flagged = v == Verdict::False;
            }
            tally.evaluated += 1;
            if v == Verdict::False {
                tally.flagged += 1;
            }
            v
        });

        let outcome = self.nodes[dest.index()]
            .state
            .handle_delivery(&msg, verdict, &ctx);
        if outcome.processed {
            if let Some(claimed) = msg.claimed_loc() {
                self.updates.push(UpdateRecord {
                    receiver: dest,
                    sender: msg.sender,
                    kind: msg.kind(),
                    sent_at: msg.sent_at,
                    recv_at: now,
                    claimed,
                    newly_inserted: outcome.sender_newly_inserted,
                });
            }
        }
        self.route(dest, outcome.outbound, now);
    }

    /// Hand a node's outgoing messages to the radio. Malicious senders
    /// inside their active window get the location fields of their
    /// messages rewritten here; the node's own state keeps the truth.
    fn route(&mut self, sender: UavId, outbound: Vec<Outbound>, now: f64) {
        for item in outbound {
            let (dest, mut msg) = match item {
                Outbound::Broadcast(m) => (None, m),
                Outbound::Unicast(d, m) => (Some(d), m),
            };
            self.apply_falsification(sender, &mut msg, now);
            if msg.kind() == MessageKind::Trap {
                if let Some(d) = dest {
                    self.tm_sends.push(TmSendRecord {
                        sender,
                        dest: d,
                        detected_at: msg.sent_at,
                    });
                }
            }
            match dest {
                Some(d) => self.unicast(sender, d, msg, now),
                None => self.broadcast(sender, msg, now),
            }
        }
    }

    fn apply_falsification(&mut self, sender: UavId, msg: &mut Message, now: f64) {
        if now < self.cfg.adversary.active_from || now > self.cfg.adversary.active_until {
            return;
        }
        let Some(falsifier) = self.nodes[sender.index()].falsifier.as_mut() else {
            return;
        };
        match &mut msg.body {
            MessageBody::Hello { loc, .. }
            | MessageBody::Identification { loc, .. }
            | MessageBody::Trap { loc, .. } => {
                *loc = falsifier.falsify(*loc, now);
            }
            MessageBody::StateNotification { .. } => {}
        }
    }

    /// Range-gated broadcast: every other active node inside coverage at
    /// send time receives the message, subject to loss and latency.
    fn broadcast(&mut self, sender: UavId, msg: Message, now: f64) {
        let sender_pos = self.nodes[sender.index()].mobility.pos;
        for i in 0..self.nodes.len() {
            let dest = UavId(i as u32);
            if dest == sender || !self.nodes[i].active {
                continue;
            }
            let dest_pos = self.nodes[i].mobility.pos;
            if !in_range(sender_pos, dest_pos, self.cfg.radio.range_m) {
                continue;
            }
            self.try_deliver(sender_pos, dest, msg.clone(), now);
        }
    }

    /// Range check at send time only; a receiver that drifts out of range
    /// while the message is in flight still gets it.
    fn unicast(&mut self, sender: UavId, dest: UavId, msg: Message, now: f64) {
        if dest == sender {
            return;
        }
        let sender_pos = self.nodes[sender.index()].mobility.pos;
        let node = &self.nodes[dest.index()];
        if !node.active || !in_range(sender_pos, node.mobility.pos, self.cfg.radio.range_m) {
            return;
        }
        self.try_deliver(sender_pos, dest, msg, now);
    }

    fn try_deliver(&mut self, sender_pos: Location3D, dest: UavId, msg: Message, now: f64) {
        let lost: f64 = self.loss_rng.gen();
        if lost < self.cfg.radio.loss_prob {
            return;
        }
        let latency = self.cfg.radio.latency.sample(&mut self.latency_rng);
        self.queue
            .schedule(SimEvent {
                time: now + latency,
                kind: EventKind::Deliver {
                    dest,
                    msg,
                    true_sender_loc: sender_pos,
                },
            })
            .expect("deliveries never predate the send");
    }

    fn ctx(&self, now: f64) -> TickCtx {
        TickCtx {
            now,
            slot: self.current_slot,
        }
    }

    fn record_slot_frame(&mut self) {
        let frame = SlotFrame {
            start_time: self.current_slot as f64 * self.cfg.slot.lambda_s,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeFrame {
                    pos: n.mobility.pos,
                    neighbors: n
                        .state
                        .nl
                        .iter()
                        .map(|e| NeighborSnap {
                            id: e.id,
                            h: e.h,
                            q: e.q.value(),
                        })
                        .collect(),
                    sent: n.state.counters.sent,
                    received: n.state.counters.received,
                })
                .collect(),
        };
        self.slots.push(frame);
    }

    fn finish(self) -> SimTrace {
        SimTrace {
            lambda_s: self.cfg.slot.lambda_s,
            sim_time_s: self.cfg.sim_time_s,
            range_m: self.cfg.radio.range_m,
            node_ids: (0..self.nodes.len() as u32).map(UavId).collect(),
            malicious: self.cfg.adversary.malicious_ids.clone(),
            slots: self.slots,
            updates: self.updates,
            tm_sends: self.tm_sends,
            verdicts: self.verdicts,
            final_counters: self.nodes.iter().map(|n| n.state.counters).collect(),
        }
    }
}
