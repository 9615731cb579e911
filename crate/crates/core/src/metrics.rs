//! Evaluation pipeline: every quantity is pure post-processing over an
//! immutable trace, judged against omniscient ground truth.
//!
//! A node is spatially aware in a slot when its perceived one-hop set
//! exactly equals the set of nodes truly inside its coverage area. The
//! signed neighbor-discovery error gamma is the perceived count minus the
//! true count; set equality is stricter on purpose, since a zero count
//! difference with the wrong membership would overstate awareness.

use std::collections::BTreeSet;

use crate::model::{distance, in_range, UavId};
use crate::protocol::MessageCounters;
use crate::trace::SimTrace;

#[derive(Debug, Clone, Copy, Default)]
pub struct MetricsOptions {
    /// Exclude malicious ids from ground truth, mirroring the framing in
    /// which a correctly segregated liar should not count against
    /// awareness. Off by default: a liar still physically occupies
    /// airspace, so ignoring it is charged as unawareness.
    pub gt_excludes_blocked: bool,
}

/// For every slot and node: the ids truly inside coverage.
pub struct GroundTruthView {
    sets: Vec<Vec<BTreeSet<UavId>>>,
}

impl GroundTruthView {
    pub fn build(trace: &SimTrace, opts: &MetricsOptions) -> Self {
        let n = trace.node_count();
        let sets = trace
            .slots
            .iter()
            .map(|frame| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .filter(|&i| i != j)
                            .map(|i| UavId(i as u32))
                            .filter(|&i| {
                                !(opts.gt_excludes_blocked && trace.malicious.contains(&i))
                            })
                            .filter(|&i| {
                                in_range(
                                    frame.nodes[j].pos,
                                    frame.nodes[i.index()].pos,
                                    trace.range_m,
                                )
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { sets }
    }

    pub fn set(&self, slot: usize, node: UavId) -> &BTreeSet<UavId> {
        &self.sets[slot][node.index()]
    }
}

/// The ids a node believes are its direct neighbors in a slot.
pub fn perceived_one_hop(trace: &SimTrace, slot: usize, node: UavId) -> BTreeSet<UavId> {
    trace.slots[slot].nodes[node.index()].one_hop_ids().collect()
}

/// Signed neighbor-discovery error: perceived one-hop count minus true
/// in-range count. Positive means false positives dominate.
pub fn gamma(trace: &SimTrace, gt: &GroundTruthView, node: UavId, slot: usize) -> i64 {
    let perceived = trace.slots[slot].nodes[node.index()]
        .one_hop_ids()
        .count() as i64;
    perceived - gt.set(slot, node).len() as i64
}

pub fn gamma_series(trace: &SimTrace, gt: &GroundTruthView, node: UavId) -> Vec<i64> {
    (0..trace.slot_count())
        .map(|s| gamma(trace, gt, node, s))
        .collect()
}

/// Awareness in a slot: exact set equality between perception and truth.
pub fn is_aware(trace: &SimTrace, gt: &GroundTruthView, node: UavId, slot: usize) -> bool {
    &perceived_one_hop(trace, slot, node) == gt.set(slot, node)
}

/// Spatial awareness time: total duration of slots with exact awareness.
pub fn psi(trace: &SimTrace, gt: &GroundTruthView, node: UavId) -> f64 {
    let aware = (0..trace.slot_count())
        .filter(|&s| is_aware(trace, gt, node, s))
        .count();
    aware as f64 * trace.lambda_s
}

/// Age of incorrect information: the maximal intervals over which
/// awareness fails, which partition the mission time together with psi.
#[derive(Debug, Clone, Default)]
pub struct AoiiStats {
    pub total_s: f64,
    pub intervals_s: Vec<f64>,
}

impl AoiiStats {
    pub fn mean_s(&self) -> f64 {
        mean(&self.intervals_s)
    }

    pub fn max_s(&self) -> f64 {
        self.intervals_s.iter().copied().fold(0.0, f64::max)
    }
}

pub fn aoii(trace: &SimTrace, gt: &GroundTruthView, node: UavId) -> AoiiStats {
    let mut stats = AoiiStats::default();
    let mut run = 0usize;
    for slot in 0..trace.slot_count() {
        if is_aware(trace, gt, node, slot) {
            if run > 0 {
                stats.intervals_s.push(run as f64 * trace.lambda_s);
                run = 0;
            }
        } else {
            run += 1;
        }
    }
    if run > 0 {
        stats.intervals_s.push(run as f64 * trace.lambda_s);
    }
    stats.total_s = stats.intervals_s.iter().sum();
    stats
}

/// Time-average age of information. The age grows linearly from zero and
/// resets to the in-flight latency of each accepted location-bearing
/// message; a node that never hears anything averages half the mission.
pub fn aoi(trace: &SimTrace, node: UavId) -> f64 {
    let tau = trace.tau();
    if tau <= 0.0 {
        return 0.0;
    }
    let mut integral = 0.0;
    let mut t_prev = 0.0;
    let mut age_prev = 0.0;
    for u in trace.updates.iter().filter(|u| u.receiver == node) {
        let dt = u.recv_at - t_prev;
        if dt > 0.0 {
            integral += age_prev * dt + dt * dt / 2.0;
        }
        t_prev = u.recv_at;
        age_prev = u.recv_at - u.sent_at;
    }
    let dt = tau - t_prev;
    if dt > 0.0 {
        integral += age_prev * dt + dt * dt / 2.0;
    }
    integral / tau
}

/// Location error per recognition: when a node first registers a
/// neighbor, the absolute gap between the distance implied by the stored
/// claim and the distance to the neighbor's actual position at that
/// moment.
pub fn omega_samples(trace: &SimTrace, node: UavId) -> Vec<f64> {
    trace
        .updates
        .iter()
        .filter(|u| u.receiver == node && u.newly_inserted)
        .map(|u| {
            let slot = trace.slot_of_time(u.recv_at);
            let own = trace.position(slot, node);
            let d_r = distance(own, u.claimed);
            let d_m = distance(own, trace.position(slot, u.sender));
            (d_r - d_m).abs()
        })
        .collect()
}

/// Recognition delay per trap delivery: time from the sender detecting a
/// location change to the receiver's list reflecting an update at least
/// that recent. A lost trap is matched by the next accepted message; a
/// change the receiver never learns about is excluded and counted.
#[derive(Debug, Clone, Default)]
pub struct UpsilonStats {
    pub per_receiver: Vec<Vec<f64>>,
    pub unmatched: u64,
}

pub fn upsilon(trace: &SimTrace) -> UpsilonStats {
    use std::collections::BTreeMap;
    // (receiver, sender) -> updates sorted by send time with suffix-min
    // of receive times.
    let mut index: BTreeMap<(UavId, UavId), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for u in &trace.updates {
        index
            .entry((u.receiver, u.sender))
            .or_default()
            .0
            .push(u.sent_at);
    }
    for ((receiver, sender), (sents, mins)) in index.iter_mut() {
        let mut recvs: Vec<(f64, f64)> = trace
            .updates
            .iter()
            .filter(|u| u.receiver == *receiver && u.sender == *sender)
            .map(|u| (u.sent_at, u.recv_at))
            .collect();
        recvs.sort_by(|a, b| a.0.total_cmp(&b.0));
        *sents = recvs.iter().map(|r| r.0).collect();
        *mins = vec![0.0; recvs.len()];
        let mut best = f64::INFINITY;
        for i in (0..recvs.len()).rev() {
            best = best.min(recvs[i].1);
            mins[i] = best;
        }
    }

    let mut stats = UpsilonStats {
        per_receiver: vec![Vec::new(); trace.node_count()],
        unmatched: 0,
    };
    for tm in &trace.tm_sends {
        match index.get(&(tm.dest, tm.sender)) {
            None => stats.unmatched += 1,
            Some((sents, mins)) => {
                let i = sents.partition_point(|&s| s < tm.detected_at - 1e-12);
                if i < sents.len() {
                    stats.per_receiver[tm.dest.index()].push(mins[i] - tm.detected_at);
                } else {
                    stats.unmatched += 1;
                }
            }
        }
    }
    stats
}

/// Convergence rounds: location-bearing messages a node sent during
/// slots in which it lacked awareness.
pub fn phi(trace: &SimTrace, gt: &GroundTruthView, node: UavId) -> u64 {
    let mut total = 0u64;
    let mut prev = 0u64;
    for slot in 0..trace.slot_count() {
        let cum = trace.slots[slot].nodes[node.index()].sent.location_bearing();
        let in_slot = cum - prev;
        prev = cum;
        if !is_aware(trace, gt, node, slot) {
            total += in_slot;
        }
    }
    total
}

/// Frequency matrix of (true neighbor count, perceived neighbor count)
/// pairs across all slots. The diagonal is correct discovery; mass above
/// it is false positives, below it false negatives.
#[derive(Debug, Clone)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
}

impl ConfusionMatrix {
    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// Row-normalized frequencies: P(perceived | true count).
    pub fn row_stochastic(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let sum: u64 = row.iter().sum();
                if sum == 0 {
                    vec![0.0; row.len()]
                } else {
                    row.iter().map(|&c| c as f64 / sum as f64).collect()
                }
            })
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.dim()).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total.max(1) as f64
    }

    pub fn fp_rate(&self) -> f64 {
        let mut fp = 0u64;
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                if p > t {
                    fp += c;
                }
            }
        }
        fp as f64 / self.total.max(1) as f64
    }

    pub fn fn_rate(&self) -> f64 {
        let mut fneg = 0u64;
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                if p < t {
                    fneg += c;
                }
            }
        }
        fneg as f64 / self.total.max(1) as f64
    }

    /// Fraction of correct-discovery slots whose true neighbor count is
    /// at most `k`.
    pub fn diagonal_mass_at_or_below(&self, k: usize) -> f64 {
        let diag: Vec<u64> = (0..self.dim()).map(|i| self.counts[i][i]).collect();
        let total: u64 = diag.iter().sum();
        if total == 0 {
            return 0.0;
        }
        let low: u64 = diag.iter().take(k + 1).sum();
        low as f64 / total as f64
    }

    /// Accuracy restricted to slots whose true count falls in the range.
    pub fn accuracy_for_true_counts(&self, range: std::ops::RangeInclusive<usize>) -> Option<f64> {
        let mut hit = 0u64;
        let mut tot = 0u64;
        for t in range {
            if t >= self.dim() {
                break;
            }
            hit += self.counts[t][t];
            tot += self.counts[t].iter().sum::<u64>();
        }
        (tot > 0).then(|| hit as f64 / tot as f64)
    }
}

pub fn gamma_confusion(trace: &SimTrace, gt: &GroundTruthView, node: UavId) -> ConfusionMatrix {
    let mut pairs = Vec::with_capacity(trace.slot_count());
    let mut dim = 0usize;
    for slot in 0..trace.slot_count() {
        let perceived = trace.slots[slot].nodes[node.index()].one_hop_ids().count();
        let truth = gt.set(slot, node).len();
        dim = dim.max(perceived.max(truth) + 1);
        pairs.push((truth, perceived));
    }
    let mut counts = vec![vec![0u64; dim]; dim];
    for (t, p) in &pairs {
        counts[*t][*p] += 1;
    }
    ConfusionMatrix {
        counts,
        total: pairs.len() as u64,
    }
}

/// Running sum of |gamma| per slot; flat segments certify awareness.
pub fn accumulated_gamma(series: &[i64]) -> Vec<u64> {
    let mut acc = 0u64;
    series
        .iter()
        .map(|g| {
            acc += g.unsigned_abs();
            acc
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Everything the harness reports per node.
#[derive(Debug, Clone)]
pub struct NodeMetrics {
    pub node: UavId,
    pub psi_s: f64,
    pub aoii_mean_s: f64,
    pub aoii_max_s: f64,
    pub aoi_mean_s: f64,
    pub omega_mean_m: f64,
    /// Mean absolute neighbor-discovery error across slots.
    pub gamma_mean: f64,
    pub phi: u64,
    pub upsilon_mean_ms: f64,
    pub counters: MessageCounters,
}

#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub nodes: Vec<NodeMetrics>,
    pub upsilon_unmatched: u64,
}

pub fn compute_run_metrics(trace: &SimTrace, opts: &MetricsOptions) -> RunMetrics {
    let gt = GroundTruthView::build(trace, opts);
    let ups = upsilon(trace);
    let nodes = trace
        .node_ids
        .iter()
        .map(|&id| {
            let gammas = gamma_series(trace, &gt, id);
            let aoii_stats = aoii(trace, &gt, id);
            let omegas = omega_samples(trace, id);
            NodeMetrics {
                node: id,
                psi_s: psi(trace, &gt, id),
                aoii_mean_s: aoii_stats.mean_s(),
                aoii_max_s: aoii_stats.max_s(),
                aoi_mean_s: aoi(trace, id),
                omega_mean_m: mean(&omegas),
                gamma_mean: mean(
                    &gammas
                        .iter()
                        .map(|g| g.unsigned_abs() as f64)
                        .collect::<Vec<_>>(),
                ),
                phi: phi(trace, &gt, id),
                upsilon_mean_ms: mean(&ups.per_receiver[id.index()]) * 1e3,
                counters: trace.final_counters[id.index()],
            }
        })
        .collect();
    RunMetrics {
        nodes,
        upsilon_unmatched: ups.unmatched,
    }
}
