use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Waiting time per frame under a single worker that processes every frame
/// in arrival order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyProfile {
    pub fps: f64,
    /// Arrival time `t / fps` of each frame.
    pub arrival: Vec<f64>,
    /// Time at which each frame's box becomes available.
    pub completion: Vec<f64>,
    /// `completion - arrival`.
    pub delay: Vec<f64>,
}

pub fn latency_profile(costs: &[f64], fps: f64) -> Result<LatencyProfile, MetricsError> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(MetricsError::Fps(fps));
    }
    let mut arrival = Vec::with_capacity(costs.len());
    let mut completion = Vec::with_capacity(costs.len());
    let mut delay = Vec::with_capacity(costs.len());
    let mut done = 0.0f64;
    for (t, &cost) in costs.iter().enumerate() {
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(MetricsError::Cost { frame: t, cost });
        }
        let a = t as f64 / fps;
        done = done.max(a) + cost;
        arrival.push(a);
        completion.push(done);
        delay.push(done - a);
    }
    Ok(LatencyProfile { fps, arrival, completion, delay })
}

impl LatencyProfile {
    pub fn makespan(&self) -> f64 {
        self.completion.last().copied().unwrap_or(0.0)
    }

    /// Delay of the frame found at each fraction of the sequence.
    pub fn delay_at_fractions(&self, fractions: &[f64]) -> Vec<f64> {
        if self.delay.is_empty() {
            return vec![0.0; fractions.len()];
        }
        let last = self.delay.len() - 1;
        fractions
            .iter()
            .map(|&q| self.delay[((q.clamp(0.0, 1.0) * last as f64).round() as usize).min(last)])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fast_tracker_has_no_backlog() {
        let p = latency_profile(&[0.01; 100], 30.0).unwrap();
        assert!(p.delay.iter().all(|&d| (d - 0.01).abs() < 1e-12));
    }

    #[test]
    fn permanent_backlog_closed_form() {
        let p = latency_profile(&[0.05; 100], 30.0).unwrap();
        assert!((p.delay[99] - 1.7).abs() < 1e-9, "{}", p.delay[99]);
        assert!((p.makespan() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(latency_profile(&[0.1], 0.0).is_err());
        assert!(matches!(latency_profile(&[0.1, -1.0], 30.0), Err(MetricsError::Cost { frame: 1, .. })));
    }

    #[test]
    fn fractions() {
        let p = latency_profile(&[0.05; 101], 30.0).unwrap();
        let d = p.delay_at_fractions(&[0.0, 0.5, 1.0]);
        assert_eq!(d[0], p.delay[0]);
        assert_eq!(d[1], p.delay[50]);
        assert_eq!(d[2], p.delay[100]);
    }

    proptest! {
        #[test]
        fn delay_bounds(costs in prop::collection::vec(0.0..0.2f64, 1..200), fps in 5.0..60.0f64) {
            let p = latency_profile(&costs, fps).unwrap();
            for (d, c) in p.delay.iter().zip(&costs) {
                prop_assert!(*d >= *c - 1e-12);
            }
            if costs.iter().all(|&c| c <= 1.0 / fps) {
                for (d, c) in p.delay.iter().zip(&costs) {
                    prop_assert!((d - c).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn makespan_ignores_order_of_equal_costs(n in 1usize..100, fps in 5.0..60.0f64, cost in 0.0..0.2f64, rot in 0usize..100) {
            // equal costs under any rotation
            let mut costs = vec![cost; n];
            costs.rotate_left(rot % n);
            let a = latency_profile(&costs, fps).unwrap().makespan();
            let b = latency_profile(&vec![cost; n], fps).unwrap().makespan();
            prop_assert_eq!(a, b);
        }
    }
}
