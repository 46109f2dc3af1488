//! Replay ingestion, update scheduling and actor publishing around
//! [`sac_update`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use safer_core::config::{SacConfig, ScheduleSection};

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::mlp::ShapeError;
use crate::replay::{Experience, ReplayBuffer};
use crate::sac::{sac_update, Losses, SacError, SacState};
use crate::shared::PolicySnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainReport {
    pub ingested: usize,
    pub updates: u64,
    pub skipped: u64,
    pub losses: Option<Losses>,
}

#[derive(Debug, Clone)]
pub struct Trainer {
    pub state: SacState,
    pub buffer: ReplayBuffer,
    pub config: SacConfig,
    pub schedule: ScheduleSection,
    rng: ChaCha8Rng,
    version: u64,
    since_publish: u64,
    /// Fractional updates carried between ingests.
    credit: f64,
}

impl Trainer {
    pub fn new(obs_dim: usize, config: SacConfig, schedule: ScheduleSection) -> Result<Self, ShapeError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let state = SacState::new(obs_dim, &config, &mut rng)?;
        Ok(Self::with_state(state, 0, config, schedule))
    }

    pub fn with_state(state: SacState, version: u64, config: SacConfig, schedule: ScheduleSection) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed ^ state.step.rotate_left(17));
        let buffer = ReplayBuffer::new(config.buffer_capacity.max(1)).expect("positive capacity");
        Self {
            state,
            buffer,
            config,
            schedule,
            rng,
            version,
            since_publish: 0,
            credit: 0.0,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint, schedule: ScheduleSection) -> Result<Self, CheckpointError> {
        Ok(Self::with_state(ck.to_state()?, ck.actor_version, ck.config.clone(), schedule))
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot {
            version: self.version,
            actor: self.state.actor.clone(),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_state(&self.state, self.version, &self.config)
    }

    /// Runs `n` gradient steps if the buffer holds at least `warmup`
    /// transitions. Steps with non-finite losses are skipped and counted.
    pub fn train(&mut self, n: u64) -> Result<TrainReport, SacError> {
        let mut report = TrainReport::default();
        if self.buffer.len() < self.schedule.warmup.max(1) {
            return Ok(report);
        }
        for _ in 0..n {
            let batch = self
                .buffer
                .sample(self.config.batch_size, &mut self.rng)
                .expect("non-empty buffer");
            match sac_update(&mut self.state, &batch, &self.config, &mut self.rng) {
                Ok(l) => {
                    report.updates += 1;
                    report.losses = Some(l);
                    self.since_publish += 1;
                }
                Err(SacError::NonFinite(what)) => {
                    tracing::warn!(what, "skipping update");
                    report.skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(report)
    }

    /// Stores `batch` and runs the scheduled number of updates for it.
    pub fn ingest(&mut self, batch: impl IntoIterator<Item = Experience>) -> Result<TrainReport, SacError> {
        let mut ingested = 0;
        for e in batch {
            self.buffer.push(e);
            ingested += 1;
        }
        let mut report = if self.buffer.len() >= self.schedule.warmup.max(1) {
            self.credit += ingested as f64 * self.schedule.updates_per_experience;
            let n = self.credit.floor();
            self.credit -= n;
            self.train(n as u64)?
        } else {
            TrainReport::default()
        };
        report.ingested = ingested;
        Ok(report)
    }

    /// A new snapshot when `publish_every` updates have accumulated.
    pub fn take_publish(&mut self) -> Option<PolicySnapshot> {
        if self.since_publish >= self.schedule.publish_every {
            Some(self.publish())
        } else {
            None
        }
    }

    /// Bumps the version and returns the current actor.
    pub fn publish(&mut self) -> PolicySnapshot {
        self.version += 1;
        self.since_publish = 0;
        self.snapshot()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::Observation;

    fn exp(i: usize) -> Experience {
        Experience::new(
            Observation(vec![i as f64 * 0.1, 0.5]),
            [0.1, -0.1],
            Observation(vec![i as f64 * 0.1 + 0.05, 0.5]),
            i % 5 == 4,
            0,
            0.3,
            35.0,
            10.0,
        )
        .unwrap()
    }

    fn trainer(publish_every: u64) -> Trainer {
        let cfg = SacConfig {
            hidden: vec![8],
            batch_size: 4,
            buffer_capacity: 100,
            ..SacConfig::default()
        };
        let schedule = ScheduleSection {
            publish_every,
            warmup: 4,
            ..ScheduleSection::default()
        };
        Trainer::new(2, cfg, schedule).unwrap()
    }

    #[test]
    fn warmup_then_one_update_per_experience() {
        let mut t = trainer(5);
        let r = t.ingest((0..3).map(exp)).unwrap();
        assert_eq!((r.ingested, r.updates), (3, 0));
        let r = t.ingest((3..6).map(exp)).unwrap();
        assert_eq!(r.updates, 3);
        assert!(t.take_publish().is_none());
        t.ingest((6..8).map(exp)).unwrap();
        let snap = t.take_publish().unwrap();
        assert_eq!(snap.version, 1);
        assert_eq!(snap.actor, t.state.actor);
    }

    #[test]
    fn replays_identically() {
        let run = || {
            let mut t = trainer(2);
            for k in 0..4 {
                t.ingest((k * 3..k * 3 + 3).map(exp)).unwrap();
                t.take_publish();
            }
            t.checkpoint()
        };
        assert_eq!(run(), run());
    }
}
