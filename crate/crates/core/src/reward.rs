//! Per-tick reward with per-component bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub goal: f64,
    pub collision: f64,
    pub smoothness: f64,
    pub progress: f64,
    pub total: f64,
}

impl RewardBreakdown {
    fn new(goal: f64, collision: f64, smoothness: f64, progress: f64) -> Self {
        RewardBreakdown {
            goal,
            collision,
            smoothness,
            progress,
            total: goal + collision + smoothness + progress,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RewardEvents {
    pub reached_goal: bool,
    /// First collision of any kind (vehicle, pedestrian or leaving the road).
    pub first_collision: bool,
}

/// Reward for one tick.
///
/// `prev_accel` and `accel` are the selected acceleration values before any
/// per-agent rating scaling, so their difference is at most `2 · a_max`.
pub fn compute_reward(
    prev_accel: f64,
    accel: f64,
    events: RewardEvents,
    goal_dist_now: f64,
    goal_dist_init: f64,
    horizon: u32,
    a_max: f64,
) -> RewardBreakdown {
    let inv_t = 1.0 / horizon as f64;
    let goal = if events.reached_goal { 1.0 } else { 0.0 };
    let collision = if events.first_collision { -1.0 } else { 0.0 };
    let smoothness = -inv_t * ((accel - prev_accel).abs() / (2.0 * a_max));
    let progress = -inv_t * (goal_dist_now / goal_dist_init).clamp(0.0, 1.0);
    RewardBreakdown::new(goal, collision, smoothness, progress)
}

/// Undiscounted per-component sums over one agent-episode.
pub fn episode_return(breakdowns: &[RewardBreakdown]) -> Result<RewardBreakdown> {
    let mut s = RewardBreakdown::default();
    for b in breakdowns {
        s.goal += b.goal;
        s.collision += b.collision;
        s.smoothness += b.smoothness;
        s.progress += b.progress;
        s.total += b.total;
    }
    // Float summation of T terms of 1/T may land a few ulps past the bound.
    let tol = 1e-9;
    let ok = (s.goal == 0.0 || s.goal == 1.0)
        && (s.collision == 0.0 || s.collision == -1.0)
        && (-1.0 - tol..=0.0).contains(&s.smoothness)
        && (-1.0 - tol..=0.0).contains(&s.progress);
    if !ok {
        return Err(Error::Contract(format!("episode reward components out of bounds: {s:?}")));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const NONE: RewardEvents = RewardEvents {
        reached_goal: false,
        first_collision: false,
    };

    #[test]
    fn worked_examples() {
        let r = compute_reward(1.0, 1.0, RewardEvents { reached_goal: true, ..NONE }, 0.0, 50.0, 200, 2.5);
        assert_eq!(r.total, 1.0);
        let r = compute_reward(0.0, 0.0, RewardEvents { first_collision: true, ..NONE }, 25.0, 50.0, 200, 2.5);
        assert_abs_diff_eq!(r.total, -1.0025, epsilon = 1e-15);
        let r = compute_reward(-2.5, 2.5, NONE, 50.0, 50.0, 200, 2.5);
        assert_eq!(r.smoothness, -1.0 / 200.0);
        assert_eq!(r.progress, -1.0 / 200.0);
        assert_abs_diff_eq!(r.total, -0.01, epsilon = 1e-15);
    }

    #[test]
    fn progress_ratio_clamped() {
        let r = compute_reward(0.0, 0.0, NONE, 80.0, 50.0, 100, 2.5);
        assert_eq!(r.progress, -0.01);
    }

    #[test]
    fn stationary_episode_sums_to_minus_one() {
        let steps: Vec<_> = (0..200).map(|_| compute_reward(0.0, 0.0, NONE, 10.0, 10.0, 200, 2.5)).collect();
        let s = episode_return(&steps).unwrap();
        assert_abs_diff_eq!(s.progress, -1.0, epsilon = 1e-12);
        assert_eq!(s.smoothness, 0.0);
    }

    #[test]
    fn immediate_collision() {
        let s = episode_return(&[compute_reward(0.0, 0.0, RewardEvents { first_collision: true, ..NONE }, 10.0, 10.0, 200, 2.5)])
            .unwrap();
        assert_abs_diff_eq!(s.total, -1.0 - 1.0 / 200.0, epsilon = 1e-15);
    }

    #[test]
    fn double_goal_is_a_violation() {
        let g = compute_reward(0.0, 0.0, RewardEvents { reached_goal: true, ..NONE }, 0.0, 1.0, 10, 2.5);
        assert!(episode_return(&[g, g]).is_err());
    }
}
