//! Malicious-UAV behavior (false-location injection) and the
//! receiver-side verdict function the message guard consumes.
//!
//! A malicious node follows the honest protocol in every respect except
//! the location fields of its outgoing messages. Detection is pluggable:
//! an oracle mode compares claims against ground truth and isolates the
//! protocol's counter behavior, while a kinematic mode flags claims that
//! imply a physically impossible speed.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mobility::AreaBounds;
use crate::model::{distance, Location3D, UavId};

/// How a malicious node fabricates its claimed location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FalsifyStrategy {
    /// Add a fixed planar offset to the true position.
    Offset { dx: f64, dy: f64 },
    /// Claim a uniformly random point inside the flight area.
    UniformInArea,
    /// Claim a point farther than twice the radio range from the true
    /// position, alternating sides so consecutive claims are far apart.
    TeleportFar,
}

/// Which nodes lie, how, and when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub malicious_ids: BTreeSet<UavId>,
    pub strategy: FalsifyStrategy,
    /// Seconds from which the node starts lying.
    pub active_from: f64,
    /// Seconds after which the node reverts to honest reports.
    pub active_until: f64,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            malicious_ids: BTreeSet::new(),
            strategy: FalsifyStrategy::UniformInArea,
            active_from: 0.0,
            active_until: f64::INFINITY,
        }
    }
}

/// Per-node lying state with its own random stream, so lies never
/// perturb the honest draws. All messages a node emits at the same
/// timestamp carry the same fabricated location, so its lie is
/// self-consistent within a slot.
#[derive(Debug, Clone)]
pub struct Falsifier {
    strategy: FalsifyStrategy,
    bounds: AreaBounds,
    range_m: f64,
    rng: rand_chacha::ChaCha8Rng,
    /// Base direction for teleport claims, fixed per node.
    base_heading: f64,
    lie_count: u64,
    cached: Option<(f64, Location3D)>,
}

impl Falsifier {
    pub fn new(
        strategy: FalsifyStrategy,
        bounds: AreaBounds,
        range_m: f64,
        mut rng: rand_chacha::ChaCha8Rng,
    ) -> Self {
        Self {
            strategy,
            bounds,
            range_m,
            base_heading: rng.gen_range(0.0..std::f64::consts::TAU),
            rng,
            lie_count: 0,
            cached: None,
        }
    }

    /// Fabricate a location for a message stamped `now`. Repeated calls
    /// with the same timestamp return the same claim.
    pub fn falsify(&mut self, true_loc: Location3D, now: f64) -> Location3D {
        if let Some((t, loc)) = self.cached {
            if t == now {
                return loc;
            }
        }
        let fake = match self.strategy {
            FalsifyStrategy::Offset { dx, dy } => {
                Location3D::new(true_loc.x + dx, true_loc.y + dy, true_loc.z)
            }
            FalsifyStrategy::UniformInArea => loop {
                let p = self.bounds.sample(true_loc.z, &mut self.rng);
                if p != true_loc {
                    break p;
                }
            },
            FalsifyStrategy::TeleportFar => {
                // Alternate between opposite sides of the true position so
                // consecutive claims are separated by far more than any
                // plausible flight displacement.
                let far = 3.0 * self.range_m;
                let theta = self.base_heading
                    + if self.lie_count % 2 == 0 {
                        0.0
                    } else {
                        std::f64::consts::PI
                    };
                Location3D::new(
                    true_loc.x + far * theta.cos(),
                    true_loc.y + far * theta.sin(),
                    true_loc.z,
                )
            }
        };
        self.lie_count += 1;
        self.cached = Some((now, fake));
        fake
    }
}

/// Detector selection: ground-truth comparison or plausibility of the
/// implied speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    Oracle,
    Kinematic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub mode: DetectorMode,
    /// Maximum plausible speed in m/s for the kinematic test.
    pub vmax: f64,
    /// Fractional slack on top of `vmax`.
    pub slack: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            mode: DetectorMode::Oracle,
            vmax: 20.0,
            slack: 0.15,
        }
    }
}

/// Outcome of evaluating one claimed location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Honest,
    False,
}

#[derive(Debug, Error, PartialEq)]
pub enum VerdictError {
    #[error("claim at {now} s does not postdate prior sample at {prior} s")]
    NonIncreasingTime { prior: f64, now: f64 },
    #[error("oracle mode requires the sender's true location")]
    MissingOracleTruth,
}

/// Judge one claimed location.
///
/// Oracle mode flags any claim that differs from the sender's true
/// position. Kinematic mode flags a claim whose implied speed from the
/// prior sample exceeds `vmax * (1 + slack)`; with no prior sample there
/// is insufficient evidence and the claim passes.
pub fn verdict(
    prior: Option<(Location3D, f64)>,
    claimed: Location3D,
    now: f64,
    cfg: &DetectorConfig,
    oracle_truth: Option<Location3D>,
) -> Result<Verdict, VerdictError> {
    match cfg.mode {
        DetectorMode::Oracle => {
            let truth = oracle_truth.ok_or(VerdictError::MissingOracleTruth)?;
            if claimed == truth {
                Ok(Verdict::Honest)
            } else {
                Ok(Verdict::False)
            }
        }
        DetectorMode::Kinematic => match prior {
            None => Ok(Verdict::Honest),
            Some((prior_loc, t_prior)) => {
                if now <= t_prior {
                    return Err(VerdictError::NonIncreasingTime {
                        prior: t_prior,
                        now,
                    });
                }
                let speed = distance(prior_loc, claimed) / (now - t_prior);
                if speed > cfg.vmax * (1.0 + cfg.slack) {
                    Ok(Verdict::False)
                } else {
                    Ok(Verdict::Honest)
                }
            }
        },
    }
}

#[derive(Debug, Clone, Copy)]
struct SenderRecord {
    loc: Location3D,
    t: f64,
    last: Verdict,
}

/// Receiver-side detector state: the last observed claim per sender plus
/// the configured test.
#[derive(Debug, Clone)]
pub struct Detector {
    cfg: DetectorConfig,
    history: BTreeMap<UavId, SenderRecord>,
}

impl Detector {
    pub fn new(cfg: DetectorConfig) -> Self {
        Self {
            cfg,
            history: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// Judge a claim and record it for the next comparison. Messages that
    /// re-state an already-evaluated timestamp (a hello and a trap emitted
    /// in the same slot carry the same claim) reuse the prior verdict.
    pub fn evaluate(
        &mut self,
        sender: UavId,
        claimed: Location3D,
        sent_at: f64,
        oracle_truth: Option<Location3D>,
    ) -> Verdict {
        if let Some(rec) = self.history.get(&sender) {
            if sent_at <= rec.t {
                return rec.last;
            }
        }
        let prior = self.history.get(&sender).map(|r| (r.loc, r.t));
        let v = verdict(prior, claimed, sent_at, &self.cfg, oracle_truth)
            .expect("monotone timestamps checked above");
        self.history.insert(
            sender,
            SenderRecord {
                loc: claimed,
                t: sent_at,
                last: v,
            },
        );
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kin() -> DetectorConfig {
        DetectorConfig {
            mode: DetectorMode::Kinematic,
            vmax: 20.0,
            slack: 0.15,
        }
    }

    #[test]
    fn kinematic_flags_implausible_speed() {
        // 100 m in 1.5 s = 66.7 m/s, far over the 23 m/s allowance.
        let prior = (Location3D::new(0.0, 0.0, 91.44), 0.0);
        let claimed = Location3D::new(100.0, 0.0, 91.44);
        assert_eq!(
            verdict(Some(prior), claimed, 1.5, &kin(), None),
            Ok(Verdict::False)
        );
    }

    #[test]
    fn kinematic_accepts_plausible_speed() {
        // 30 m in 1.5 s = 20 m/s, inside the 23 m/s allowance.
        let prior = (Location3D::new(0.0, 0.0, 91.44), 0.0);
        let claimed = Location3D::new(30.0, 0.0, 91.44);
        assert_eq!(
            verdict(Some(prior), claimed, 1.5, &kin(), None),
            Ok(Verdict::Honest)
        );
    }

    #[test]
    fn kinematic_without_history_passes() {
        let claimed = Location3D::new(1000.0, 0.0, 91.44);
        assert_eq!(verdict(None, claimed, 0.0, &kin(), None), Ok(Verdict::Honest));
    }

    #[test]
    fn kinematic_rejects_non_increasing_time() {
        let prior = (Location3D::new(0.0, 0.0, 91.44), 1.5);
        let claimed = Location3D::new(1.0, 0.0, 91.44);
        assert!(verdict(Some(prior), claimed, 1.5, &kin(), None).is_err());
    }

    #[test]
    fn oracle_matches_truth() {
        let cfg = DetectorConfig::default();
        let truth = Location3D::new(5.0, 5.0, 91.44);
        assert_eq!(
            verdict(None, truth, 0.0, &cfg, Some(truth)),
            Ok(Verdict::Honest)
        );
        let lie = Location3D::new(6.0, 5.0, 91.44);
        assert_eq!(verdict(None, lie, 0.0, &cfg, Some(truth)), Ok(Verdict::False));
    }

    #[test]
    fn detector_reuses_verdict_for_same_timestamp() {
        let mut det = Detector::new(kin());
        let a = Location3D::new(0.0, 0.0, 91.44);
        let far = Location3D::new(500.0, 0.0, 91.44);
        assert_eq!(det.evaluate(UavId(1), a, 0.0, None), Verdict::Honest);
        assert_eq!(det.evaluate(UavId(1), far, 1.5, None), Verdict::False);
        // Same slot, same claim arriving via a second message kind.
        assert_eq!(det.evaluate(UavId(1), far, 1.5, None), Verdict::False);
    }

    #[test]
    fn offset_strategy_is_additive() {
        let b = AreaBounds::new(0.0, 1500.0, 0.0, 1500.0);
        let mut f = Falsifier::new(
            FalsifyStrategy::Offset { dx: 100.0, dy: 0.0 },
            b,
            115.0,
            ChaCha8Rng::seed_from_u64(9),
        );
        let fake = f.falsify(Location3D::new(500.0, 500.0, 91.44), 0.0);
        assert_eq!(fake, Location3D::new(600.0, 500.0, 91.44));
    }

    #[test]
    fn uniform_strategy_stays_in_area() {
        let b = AreaBounds::new(0.0, 1500.0, 0.0, 1500.0);
        let mut f = Falsifier::new(
            FalsifyStrategy::UniformInArea,
            b,
            115.0,
            ChaCha8Rng::seed_from_u64(10),
        );
        for i in 0..100 {
            let fake = f.falsify(Location3D::new(500.0, 500.0, 91.44), i as f64);
            assert!(b.contains(fake));
            assert_ne!(fake, Location3D::new(500.0, 500.0, 91.44));
        }
    }

    #[test]
    fn teleport_far_exceeds_twice_range() {
        let b = AreaBounds::new(0.0, 1500.0, 0.0, 1500.0);
        let mut f = Falsifier::new(
            FalsifyStrategy::TeleportFar,
            b,
            115.0,
            ChaCha8Rng::seed_from_u64(11),
        );
        let true_loc = Location3D::new(750.0, 750.0, 91.44);
        for i in 0..50 {
            let fake = f.falsify(true_loc, i as f64);
            assert!(distance(fake, true_loc) > 230.0);
        }
    }

    #[test]
    fn teleport_far_consecutive_claims_are_far_apart() {
        let b = AreaBounds::new(0.0, 1500.0, 0.0, 1500.0);
        let mut f = Falsifier::new(
            FalsifyStrategy::TeleportFar,
            b,
            115.0,
            ChaCha8Rng::seed_from_u64(12),
        );
        let mut prev: Option<Location3D> = None;
        for i in 0..50 {
            // True position drifts 30 m per slot, worst case.
            let true_loc = Location3D::new(100.0 + 30.0 * i as f64, 100.0, 91.44);
            let fake = f.falsify(true_loc, i as f64);
            if let Some(p) = prev {
                assert!(distance(p, fake) > 600.0);
            }
            prev = Some(fake);
        }
    }

    #[test]
    fn falsify_is_stable_within_a_timestamp() {
        let b = AreaBounds::new(0.0, 1500.0, 0.0, 1500.0);
        let mut f = Falsifier::new(
            FalsifyStrategy::UniformInArea,
            b,
            115.0,
            ChaCha8Rng::seed_from_u64(13),
        );
        let t = Location3D::new(500.0, 500.0, 91.44);
        let a = f.falsify(t, 4.5);
        let b2 = f.falsify(t, 4.5);
        assert_eq!(a, b2);
    }
}
