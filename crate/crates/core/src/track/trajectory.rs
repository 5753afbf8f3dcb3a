use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Point2, Vec2};

/// Default slack on the per-slot displacement cap, meters.
pub const DEFAULT_STEP_EPS: f64 = 0.05;

/// Positions sampled once per slot.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub positions: Vec<Point2>,
    pub slot_duration: f64,
}

impl Trajectory {
    pub fn new(positions: Vec<Point2>, slot_duration: f64) -> Self {
        Self {
            positions,
            slot_duration,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn prefix(&self, len: usize) -> Trajectory {
        Trajectory::new(self.positions[..len.min(self.len())].to_vec(), self.slot_duration)
    }

    /// Largest displacement between consecutive slots, meters.
    pub fn max_step(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| w[0].distance(w[1]))
            .fold(0.0, f64::max)
    }

    /// Whether every step stays under `v_max · slot + eps_step`.
    pub fn respects_speed_cap(&self, v_max: f64, eps_step: f64) -> bool {
        self.max_step() <= v_max * self.slot_duration + eps_step
    }
}

/// Backward differences `(p_t - p_{t-1}) / slot`, with the first velocity
/// copied from the second.
pub fn diff_velocities(trace: &Trajectory) -> Result<Vec<Vec2>> {
    let p = &trace.positions;
    if p.len() < 2 {
        return Err(Error::TooShort(p.len()));
    }
    let dt = trace.slot_duration;
    let mut v = Vec::with_capacity(p.len());
    v.push((p[1] - p[0]) / dt);
    v.extend(p.windows(2).map(|w| (w[1] - w[0]) / dt));
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differencing() {
        let t = Trajectory::new(alloc::vec![Point2::ZERO, Point2::new(0.1, 0.0)], 0.1);
        let v = diff_velocities(&t).unwrap();
        assert_eq!(v.len(), 2);
        for vi in v {
            assert!((vi.x - 1.0).abs() < 1e-12 && vi.y == 0.0);
        }
        let still = Trajectory::new(alloc::vec![Point2::new(1.0, 2.0); 5], 0.1);
        assert!(diff_velocities(&still).unwrap().iter().all(|v| *v == Vec2::ZERO));
        let single = Trajectory::new(alloc::vec![Point2::ZERO], 0.1);
        assert_eq!(diff_velocities(&single), Err(Error::TooShort(1)));
    }
}
