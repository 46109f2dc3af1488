//! Recorded operator sessions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use safer_harness::MethodId;

use crate::bridge::TickInput;
use crate::TeleopError;

pub const TAPE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapeEvent {
    pub tick: u64,
    #[serde(flatten)]
    pub input: TickInput,
}

/// Every input a session received, keyed by the tick it took effect on.
/// Ticks without an event ran with no new input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tape {
    pub version: u32,
    pub seed: u64,
    /// Method in force at tick 0.
    pub method: MethodId,
    /// Plant model the session ran with.
    #[serde(default = "yes")]
    pub accel_limited_base: bool,
    pub ticks: u64,
    pub events: Vec<TapeEvent>,
}

fn yes() -> bool {
    true
}

impl Tape {
    pub fn new(seed: u64, method: MethodId) -> Self {
        Self {
            version: TAPE_VERSION,
            seed,
            method,
            accel_limited_base: true,
            ticks: 0,
            events: Vec::new(),
        }
    }

    pub fn check_version(&self) -> Result<(), TeleopError> {
        if self.version == TAPE_VERSION {
            Ok(())
        } else {
            Err(TeleopError::TapeVersion {
                found: self.version,
                expected: TAPE_VERSION,
            })
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TeleopError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TeleopError> {
        let tape: Tape = serde_json::from_slice(&std::fs::read(path)?)?;
        tape.check_version()?;
        if tape.events.windows(2).any(|w| w[0].tick >= w[1].tick) || tape.events.last().is_some_and(|e| e.tick >= tape.ticks) {
            return Err(TeleopError::BadTape("events must have increasing ticks below the tick count".into()));
        }
        Ok(tape)
    }
}
