//! Per-episode metrics and their aggregation across trials.

use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Mean of `((v1 - v0)^2 + (w1 - w0)^2) / dt` over consecutive `(t, v, w)`
/// samples.
pub fn unsmoothness(commands: &[(f64, f64, f64)]) -> Result<f64, HarnessError> {
    if commands.len() < 2 {
        return Err(HarnessError::Metric("unsmoothness needs at least two commands".into()));
    }
    let mut total = 0.0;
    for w in commands.windows(2) {
        let ((t0, v0, w0), (t1, v1, w1)) = (w[0], w[1]);
        let dt = t1 - t0;
        if !(dt > 0.0) {
            return Err(HarnessError::Metric("timestamps must increase".into()));
        }
        total += ((v1 - v0).powi(2) + (w1 - w0).powi(2)) / dt;
    }
    Ok(total / (commands.len() - 1) as f64)
}

/// Nearest-rank percentile of unsorted samples; 0 for an empty slice.
pub fn percentile(samples: &[f64], p: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * s.len() as f64).ceil().max(1.0) as usize;
    s[rank.min(s.len()) - 1]
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success: bool,
    /// Ground-truth contacts.
    pub collisions: usize,
    pub cycles: usize,
    /// Mean `|v|` of the motion applied each cycle.
    pub average_speed: f64,
    /// Path length from consecutive poses.
    pub distance: f64,
    /// Braking activations; consecutive braking cycles count once.
    pub max_braking_count: usize,
    /// Cycles on which the current motion was predicted to collide within
    /// the avoidance horizon.
    pub intervention_cycles: usize,
    pub unsmoothness: f64,
    /// Mean action cost of the executed command over intervention cycles.
    pub avg_action_cost: f64,
    pub latency_ms_mean: f64,
    pub latency_ms_p95: f64,
    pub candidates_mean: f64,
}

/// Builds [`EpisodeMetrics`] one control cycle at a time.
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    speeds: Vec<f64>,
    commands: Vec<(f64, f64, f64)>,
    latencies_ms: Vec<f64>,
    candidates: Vec<f64>,
    costs: Vec<f64>,
    braking_events: usize,
    last_sigma: u8,
    intervention_cycles: usize,
    distance: f64,
    collisions: usize,
}

pub struct CycleSample {
    pub t: f64,
    /// Speed the pose advanced with this cycle.
    pub applied_v: f64,
    pub command_v: f64,
    pub command_omega: f64,
    pub sigma: u8,
    pub intervention: bool,
    pub executed_cost: f64,
    pub latency_ms: f64,
    pub candidates: usize,
    pub step_distance: f64,
    pub collided: bool,
}

impl MetricsAccumulator {
    pub fn push(&mut self, c: &CycleSample) {
        self.speeds.push(c.applied_v.abs());
        self.commands.push((c.t, c.command_v, c.command_omega));
        self.latencies_ms.push(c.latency_ms);
        self.candidates.push(c.candidates as f64);
        if c.sigma == 1 && self.last_sigma == 0 {
            self.braking_events += 1;
        }
        self.last_sigma = c.sigma;
        if c.intervention {
            self.intervention_cycles += 1;
            self.costs.push(c.executed_cost);
        }
        self.distance += c.step_distance;
        if c.collided {
            self.collisions += 1;
        }
    }

    pub fn latencies_ms(&self) -> &[f64] {
        &self.latencies_ms
    }

    pub fn finish(&self, success: bool) -> EpisodeMetrics {
        EpisodeMetrics {
            success,
            collisions: self.collisions,
            cycles: self.speeds.len(),
            average_speed: mean(&self.speeds),
            distance: self.distance,
            max_braking_count: self.braking_events,
            intervention_cycles: self.intervention_cycles,
            unsmoothness: unsmoothness(&self.commands).unwrap_or(0.0),
            avg_action_cost: mean(&self.costs),
            latency_ms_mean: mean(&self.latencies_ms),
            latency_ms_p95: percentile(&self.latencies_ms, 95.0),
            candidates_mean: mean(&self.candidates),
        }
    }
}
