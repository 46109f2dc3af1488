//! Local training: SAFER episodes with a stochastic policy feed a trainer,
//! and every publish is installed in the shared policy store.

use safer_core::SaferConfig;
use safer_rl::policy::PolicyMode;
use safer_rl::replay::Experience;
use safer_rl::shared::PolicyStore;
use safer_rl::trainer::Trainer;
use safer_rl::OBS_DIM;

use crate::collect::ExperienceCollector;
use crate::driver::SpecDriver;
use crate::methods::{MethodId, MethodStack};
use crate::scenario::LoadedScenario;
use crate::sim::{simulate, EpisodeResult, SimOptions};
use crate::trials::trial_seed;
use crate::HarnessError;

/// Training episodes stop after this many cycles held at rest; the gate
/// cannot release a stationary robot from braking.
pub const STALL_CYCLES: usize = 20;

/// Runs one data-collection episode with the current policy.
pub fn collect_episode(
    scenario: &LoadedScenario,
    cfg: &SaferConfig,
    store: &PolicyStore,
    seed: u64,
) -> Result<(EpisodeResult, Vec<Experience>), HarnessError> {
    let mut stack = MethodStack::new(MethodId::Safer, cfg, Some(store.clone()), PolicyMode::Stochastic, seed)?;
    let mut driver = SpecDriver::new(scenario.scenario.driver.clone(), cfg.limits);
    let mut collector = ExperienceCollector::new(cfg);
    let result = simulate(
        scenario,
        cfg,
        &mut stack,
        &mut driver,
        seed,
        SimOptions {
            stall_cycles: Some(STALL_CYCLES),
            ..SimOptions::untimed()
        },
        Some(&mut collector),
    )?;
    Ok((result, collector.take()))
}

#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub env_steps: usize,
    pub episodes: usize,
    pub experiences: usize,
    pub updates: u64,
    pub collisions: usize,
    pub successes: usize,
}

/// Trains until `env_steps` simulated cycles have been collected, cycling
/// through `scenarios`.
pub fn train_offline(
    cfg: &SaferConfig,
    scenarios: &[LoadedScenario],
    env_steps: usize,
    seed: u64,
    progress: impl FnMut(&TrainingLog),
) -> Result<(Trainer, PolicyStore, TrainingLog), HarnessError> {
    let mut sac = cfg.sac.clone();
    sac.seed = seed;
    let trainer = Trainer::new(OBS_DIM, sac, cfg.schedule)?;
    continue_training(trainer, cfg, scenarios, env_steps, seed, progress)
}

/// [`train_offline`] starting from an existing trainer.
pub fn continue_training(
    mut trainer: Trainer,
    cfg: &SaferConfig,
    scenarios: &[LoadedScenario],
    env_steps: usize,
    seed: u64,
    mut progress: impl FnMut(&TrainingLog),
) -> Result<(Trainer, PolicyStore, TrainingLog), HarnessError> {
    if scenarios.is_empty() {
        return Err(HarnessError::Scenario("no training scenarios".into()));
    }
    let store = PolicyStore::new(trainer.snapshot());
    let mut log = TrainingLog::default();
    while log.env_steps < env_steps {
        let scenario = &scenarios[log.episodes % scenarios.len()];
        let (result, exps) = collect_episode(scenario, cfg, &store, trial_seed(seed, log.episodes))?;
        log.env_steps += result.metrics.cycles;
        log.episodes += 1;
        log.experiences += exps.len();
        log.collisions += result.metrics.collisions;
        log.successes += usize::from(result.metrics.success);
        let report = trainer.ingest(exps)?;
        log.updates += report.updates;
        if let Some(snap) = trainer.take_publish() {
            store.publish(snap);
        }
        progress(&log);
    }
    store.publish(trainer.publish());
    Ok((trainer, store, log))
}
