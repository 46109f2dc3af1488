//! JSON checkpoint container. Parameters and optimizer moments are stored as
//! base64 little-endian `f64` so a save/load round trip is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use safer_core::config::SacConfig;

use crate::codec::{decode_f64s, encode_f64s, CodecError};
use crate::mlp::{Activation, Mlp, ShapeError};
use crate::sac::{Adam, SacState};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("unsupported checkpoint format {0}")]
    Format(u32),
    #[error("layer shapes do not chain: {0:?}")]
    Shapes(Vec<[usize; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkBlob {
    /// `[in, out]` per layer.
    pub layer_shapes: Vec<[usize; 2]>,
    pub activation: Activation,
    pub params: String,
}

impl NetworkBlob {
    pub fn encode(net: &Mlp) -> Self {
        Self {
            layer_shapes: net.layer_shapes().into_iter().map(|(i, o)| [i, o]).collect(),
            activation: net.activation,
            params: encode_f64s(&net.params),
        }
    }

    pub fn decode(&self) -> Result<Mlp, CheckpointError> {
        let sizes = sizes_from_shapes(&self.layer_shapes)?;
        Ok(Mlp::from_params(
            &sizes,
            self.activation,
            decode_f64s(&self.params)?,
        )?)
    }
}

pub fn sizes_from_shapes(shapes: &[[usize; 2]]) -> Result<Vec<usize>, CheckpointError> {
    if shapes.is_empty() || shapes.windows(2).any(|w| w[0][1] != w[1][0]) {
        return Err(CheckpointError::Shapes(shapes.to_vec()));
    }
    Ok(std::iter::once(shapes[0][0])
        .chain(shapes.iter().map(|s| s[1]))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamBlob {
    pub t: u64,
    pub m: String,
    pub v: String,
}

impl AdamBlob {
    fn encode(a: &Adam) -> Self {
        Self {
            t: a.t,
            m: encode_f64s(&a.m),
            v: encode_f64s(&a.v),
        }
    }

    fn decode(&self) -> Result<Adam, CheckpointError> {
        Ok(Adam {
            m: decode_f64s(&self.m)?,
            v: decode_f64s(&self.v)?,
            t: self.t,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Published actor version at save time.
    pub actor_version: u64,
    pub step: u64,
    pub log_alpha: String,
    pub actor: NetworkBlob,
    pub critic1: NetworkBlob,
    pub critic2: NetworkBlob,
    pub target1: NetworkBlob,
    pub target2: NetworkBlob,
    pub actor_opt: AdamBlob,
    pub critic1_opt: AdamBlob,
    pub critic2_opt: AdamBlob,
    pub alpha_opt: AdamBlob,
    pub config: SacConfig,
}

impl Checkpoint {
    pub fn from_state(state: &SacState, actor_version: u64, config: &SacConfig) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            actor_version,
            step: state.step,
            log_alpha: encode_f64s(&[state.log_alpha]),
            actor: NetworkBlob::encode(&state.actor),
            critic1: NetworkBlob::encode(&state.critic1),
            critic2: NetworkBlob::encode(&state.critic2),
            target1: NetworkBlob::encode(&state.target1),
            target2: NetworkBlob::encode(&state.target2),
            actor_opt: AdamBlob::encode(&state.actor_opt),
            critic1_opt: AdamBlob::encode(&state.critic1_opt),
            critic2_opt: AdamBlob::encode(&state.critic2_opt),
            alpha_opt: AdamBlob::encode(&state.alpha_opt),
            config: config.clone(),
        }
    }

    pub fn to_state(&self) -> Result<SacState, CheckpointError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Format(self.format_version));
        }
        let log_alpha = decode_f64s(&self.log_alpha)?
            .first()
            .copied()
            .ok_or(CheckpointError::Codec(CodecError::Length(0)))?;
        Ok(SacState {
            actor: self.actor.decode()?,
            critic1: self.critic1.decode()?,
            critic2: self.critic2.decode()?,
            target1: self.target1.decode()?,
            target2: self.target2.decode()?,
            log_alpha,
            actor_opt: self.actor_opt.decode()?,
            critic1_opt: self.critic1_opt.decode()?,
            critic2_opt: self.critic2_opt.decode()?,
            alpha_opt: self.alpha_opt.decode()?,
            step: self.step,
        })
    }

    pub fn actor(&self) -> Result<Mlp, CheckpointError> {
        self.actor.decode()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Format(ck.format_version));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
