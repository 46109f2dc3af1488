//! Policy input: 360 lidar ranges, three ultrasonic ranges, the current
//! velocity and the upstream reference.

use serde::{Deserialize, Serialize};

use safer_core::kinematics::{ControlCommand, KinematicLimits, RobotState};
use safer_core::sensors::{SensorScan, LIDAR_BEAMS};

pub const OBS_DIM: usize = LIDAR_BEAMS + 3 + 4;
pub const ACTION_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Scaling applied identically when collecting experience and at inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationScaling {
    pub max_range: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub normalize: bool,
}

impl ObservationScaling {
    pub fn new(max_range: f64, limits: &KinematicLimits, normalize: bool) -> Self {
        Self {
            max_range,
            v_max: limits.v_max,
            omega_max: limits.omega_max,
            normalize,
        }
    }

    pub fn raw(max_range: f64) -> Self {
        Self {
            max_range,
            v_max: 1.0,
            omega_max: 1.0,
            normalize: false,
        }
    }
}

pub fn build_observation(
    scan: &SensorScan,
    state: &RobotState,
    upstream: &ControlCommand,
    scaling: &ObservationScaling,
) -> Observation {
    let (range_k, v_k, w_k) = if scaling.normalize {
        (
            1.0 / scaling.max_range,
            1.0 / scaling.v_max,
            1.0 / scaling.omega_max,
        )
    } else {
        (1.0, 1.0, 1.0)
    };
    let clip = |r: f64| r.min(scaling.max_range) * range_k;
    let mut values = Vec::with_capacity(OBS_DIM);
    values.extend(scan.lidar.iter().map(|r| clip(*r)));
    values.extend(scan.ultrasonic.iter().map(|r| clip(*r)));
    values.extend([
        state.v * v_k,
        state.omega * w_k,
        upstream.v * v_k,
        upstream.omega * w_k,
    ]);
    debug_assert_eq!(values.len(), OBS_DIM);
    Observation(values)
}
