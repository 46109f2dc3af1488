//! Seeded trial batches and the CSV report.

use std::io::Write;

use serde::{Deserialize, Serialize};

use safer_core::SaferConfig;
use safer_rl::policy::PolicyMode;
use safer_rl::shared::PolicyStore;

use crate::driver::SpecDriver;
use crate::methods::{MethodId, MethodStack};
use crate::metrics::{mean, percentile};
use crate::scenario::LoadedScenario;
use crate::sim::{simulate, EpisodeResult, SimOptions};
use crate::HarnessError;

/// Seed of trial `i` under `master`.
pub fn trial_seed(master: u64, i: usize) -> u64 {
    // splitmix64 over the pair keeps neighbouring trials decorrelated.
    let mut z = master ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_episode(
    method: MethodId,
    scenario: &LoadedScenario,
    cfg: &SaferConfig,
    seed: u64,
    policy: Option<&PolicyStore>,
    options: SimOptions,
) -> Result<EpisodeResult, HarnessError> {
    let mut stack = MethodStack::new(method, cfg, policy.cloned(), PolicyMode::Deterministic, seed)?;
    let mut driver = SpecDriver::new(scenario.scenario.driver.clone(), cfg.limits);
    simulate(scenario, cfg, &mut stack, &mut driver, seed, options, None)
}

/// One CSV row; column order is the documented report format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub method: String,
    pub scenario: String,
    pub trials: usize,
    pub successes: usize,
    pub collisions: usize,
    pub avg_speed_mps: f64,
    pub max_braking: usize,
    pub latency_ms_mean: f64,
    pub latency_ms_p95: f64,
    pub unsmoothness: f64,
    pub avg_action_cost: f64,
    pub seed: u64,
}

/// Aggregates not in the CSV.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialExtras {
    pub intervention_cycles: usize,
    pub cycles: usize,
    pub candidates_mean: f64,
}

impl TrialExtras {
    /// Braking activations per 100 intervention cycles.
    pub fn braking_rate(&self, max_braking: usize) -> f64 {
        if self.intervention_cycles == 0 {
            0.0
        } else {
            100.0 * max_braking as f64 / self.intervention_cycles as f64
        }
    }
}

pub struct TrialReport {
    pub row: TrialRow,
    pub extras: TrialExtras,
    pub episodes: Vec<EpisodeResult>,
}

pub fn aggregate(
    method: MethodId,
    scenario: &str,
    seed: u64,
    episodes: &[EpisodeResult],
) -> (TrialRow, TrialExtras) {
    let m: Vec<_> = episodes.iter().map(|e| &e.metrics).collect();
    let latencies: Vec<f64> = episodes.iter().flat_map(|e| e.latencies_ms.iter().copied()).collect();
    let interventions: usize = m.iter().map(|x| x.intervention_cycles).sum();
    // Pooled over intervention cycles, matching the per-episode definition.
    let cost_total: f64 = m
        .iter()
        .map(|x| x.avg_action_cost * x.intervention_cycles as f64)
        .sum();
    let row = TrialRow {
        method: method.to_string(),
        scenario: scenario.to_string(),
        trials: episodes.len(),
        successes: m.iter().filter(|x| x.success).count(),
        collisions: m.iter().map(|x| x.collisions).sum(),
        avg_speed_mps: mean(&m.iter().map(|x| x.average_speed).collect::<Vec<_>>()),
        max_braking: m.iter().map(|x| x.max_braking_count).sum(),
        latency_ms_mean: mean(&latencies),
        latency_ms_p95: percentile(&latencies, 95.0),
        unsmoothness: mean(&m.iter().map(|x| x.unsmoothness).collect::<Vec<_>>()),
        avg_action_cost: if interventions == 0 {
            0.0
        } else {
            cost_total / interventions as f64
        },
        seed,
    };
    let extras = TrialExtras {
        intervention_cycles: interventions,
        cycles: m.iter().map(|x| x.cycles).sum(),
        candidates_mean: mean(&m.iter().map(|x| x.candidates_mean).collect::<Vec<_>>()),
    };
    (row, extras)
}

/// Runs `n` episodes with seeds derived from `master_seed`, in trial order.
pub fn run_trials(
    method: MethodId,
    scenario: &LoadedScenario,
    cfg: &SaferConfig,
    n: usize,
    master_seed: u64,
    policy: Option<&PolicyStore>,
    options: SimOptions,
) -> Result<TrialReport, HarnessError> {
    if n == 0 {
        return Err(HarnessError::Scenario("trial count must be at least 1".into()));
    }
    let episodes = (0..n)
        .map(|i| run_episode(method, scenario, cfg, trial_seed(master_seed, i), policy, options))
        .collect::<Result<Vec<_>, _>>()?;
    let (row, extras) = aggregate(method, &scenario.scenario.name, master_seed, &episodes);
    Ok(TrialReport {
        row,
        extras,
        episodes,
    })
}

pub fn write_csv<W: Write>(out: W, rows: &[TrialRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok(())
}

pub fn csv_string(rows: &[TrialRow]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8 csv")
}
