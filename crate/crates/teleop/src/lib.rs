//! Bridge between a human operator and the simulated stack: the operator's
//! throttle/turn stream is the upstream reference, the gate runs each tick and
//! every tick is reported as a telemetry frame.

pub mod bridge;
pub mod server;
pub mod tape;

use thiserror::Error;

pub use bridge::{replay, Bridge, BridgeOptions, OperatorCommand, TelemetryFrame, TickInput};
pub use server::{serve_teleop, start_teleop, ClientMessage, ServerMessage, TeleopConfig, TeleopHandle};
pub use tape::{Tape, TapeEvent, TAPE_VERSION};

#[derive(Debug, Error)]
pub enum TeleopError {
    #[error("command: {0}")]
    BadCommand(String),
    #[error("tape version {found}, expected {expected}")]
    TapeVersion { found: u32, expected: u32 },
    #[error("tape: {0}")]
    BadTape(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Harness(#[from] safer_harness::HarnessError),
    #[error(transparent)]
    Core(#[from] safer_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("task failed: {0}")]
    Join(String),
}
