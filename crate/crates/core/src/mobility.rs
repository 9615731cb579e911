//! 2D random-walk mobility at fixed altitude with reflective area
//! boundaries.
//!
//! Headings are resampled uniformly at the start of every slot-aligned
//! step, so motion is diffusive rather than ballistic. Boundaries reflect
//! (angle of incidence equals angle of reflection), which keeps the swarm
//! density stable inside the survey area.

use rand::Rng;
use thiserror::Error;

use crate::model::Location3D;

/// Rectangular flight area in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl AreaBounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        assert!(x_min < x_max && y_min < y_max, "degenerate area bounds");
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn contains(&self, p: Location3D) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Uniform sample inside the area at the given altitude.
    pub fn sample<R: Rng>(&self, altitude: f64, rng: &mut R) -> Location3D {
        let x = rng.gen_range(self.x_min..=self.x_max);
        let y = rng.gen_range(self.y_min..=self.y_max);
        Location3D::new(x, y, altitude)
    }
}

/// Mobility state of one UAV. Speed and altitude are constant for the run.
#[derive(Debug, Clone)]
pub struct MobilityState {
    pub pos: Location3D,
    pub heading: f64,
    pub speed: f64,
    pub bounds: AreaBounds,
    pub altitude: f64,
}

impl MobilityState {
    pub fn new(pos: Location3D, speed: f64, bounds: AreaBounds) -> Self {
        assert!(bounds.contains(pos), "initial position outside bounds");
        Self {
            altitude: pos.z,
            pos,
            heading: 0.0,
            speed,
            bounds,
        }
    }

    /// Advance one step of `dt` seconds: resample the heading, move
    /// `speed * dt` along it and reflect off the area walls. The altitude
    /// never changes.
    pub fn step<R: Rng>(&mut self, dt: f64, rng: &mut R) {
        assert!(dt > 0.0, "step requires dt > 0");
        self.heading = rng.gen_range(0.0..std::f64::consts::TAU);
        let len = self.speed * dt;
        let x = self.pos.x + len * self.heading.cos();
        let y = self.pos.y + len * self.heading.sin();
        self.pos = Location3D::new(
            reflect_into(x, self.bounds.x_min, self.bounds.x_max),
            reflect_into(y, self.bounds.y_min, self.bounds.y_max),
            self.altitude,
        );
    }
}

/// Fold a coordinate back into [lo, hi] by mirror reflection. Handles
/// paths long enough to bounce several times.
fn reflect_into(u: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    let period = 2.0 * span;
    let mut m = (u - lo) % period;
    if m < 0.0 {
        m += period;
    }
    if m <= span {
        lo + m
    } else {
        lo + (period - m)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("no waypoint recorded for slot {0}")]
    UnknownSlot(u64),
}

/// Exact waypoint lookup in a recorded trajectory. There is no
/// interpolation between slots: positions are piecewise constant.
pub fn position_at(
    trajectory: &[(u64, Location3D)],
    t_slot: u64,
) -> Result<Location3D, TrajectoryError> {
    trajectory
        .binary_search_by_key(&t_slot, |(slot, _)| *slot)
        .map(|i| trajectory[i].1)
        .map_err(|_| TrajectoryError::UnknownSlot(t_slot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::distance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bounds() -> AreaBounds {
        AreaBounds::new(0.0, 1500.0, 0.0, 1500.0)
    }

    #[test]
    fn free_space_step_displaces_speed_times_dt() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Center start: a 30 m step cannot reach a wall.
        let mut st = MobilityState::new(Location3D::new(750.0, 750.0, 91.44), 20.0, bounds());
        let before = st.pos;
        st.step(1.5, &mut rng);
        assert!((distance(before, st.pos) - 30.0).abs() < 1e-9);
    }

    #[test]
    fn tiny_step_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut st = MobilityState::new(Location3D::new(750.0, 750.0, 91.44), 20.0, bounds());
        let before = st.pos;
        st.step(1e-6, &mut rng);
        assert!((distance(before, st.pos) - 2e-5).abs() < 1e-9);
    }

    #[test]
    #[should_panic]
    fn zero_dt_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut st = MobilityState::new(Location3D::new(750.0, 750.0, 91.44), 20.0, bounds());
        st.step(0.0, &mut rng);
    }

    #[test]
    fn reflection_keeps_position_in_bounds() {
        // Heading straight at a wall 10 m away with a 30 m step must end
        // 20 m inside the area.
        assert_eq!(reflect_into(1510.0, 0.0, 1500.0), 1490.0);
        assert_eq!(reflect_into(-20.0, 0.0, 1500.0), 20.0);
        // Long paths fold repeatedly.
        let folded = reflect_into(3010.0, 0.0, 1500.0);
        assert!((0.0..=1500.0).contains(&folded));
    }

    #[test]
    fn fuzz_many_steps_never_leave_bounds_and_z_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = AreaBounds::new(0.0, 100.0, 0.0, 100.0);
        let mut st = MobilityState::new(Location3D::new(50.0, 50.0, 91.44), 20.0, b);
        for _ in 0..1_000_000 {
            st.step(1.5, &mut rng);
            assert!(b.contains(st.pos));
            assert_eq!(st.pos.z, 91.44);
        }
    }

    #[test]
    fn trajectory_lookup() {
        let a = Location3D::new(0.0, 0.0, 1.0);
        let b = Location3D::new(1.0, 0.0, 1.0);
        let traj = vec![(0u64, a), (1u64, b)];
        assert_eq!(position_at(&traj, 1), Ok(b));
        assert_eq!(position_at(&[(0, a)], 0), Ok(a));
        assert_eq!(
            position_at(&[(0, a)], 5),
            Err(TrajectoryError::UnknownSlot(5))
        );
    }
}
