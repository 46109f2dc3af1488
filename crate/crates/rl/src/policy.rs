//! Tanh-squashed Gaussian policy head.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use safer_core::kinematics::KinematicLimits;

use crate::mlp::{Mlp, ShapeError};
use crate::observation::{Observation, ACTION_DIM};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Keeps the tanh log-Jacobian finite at saturation.
pub const TANH_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub throttle: f64,
    pub turn: f64,
}

impl Action {
    pub fn new(throttle: f64, turn: f64) -> Self {
        Self { throttle, turn }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.throttle, self.turn]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    Stochastic,
    Deterministic,
}

/// `(throttle * v_max, turn * omega_max)`.
pub fn scale_action(a: Action, limits: &KinematicLimits) -> (f64, f64) {
    (a.throttle * limits.v_max, a.turn * limits.omega_max)
}

/// One reparameterized sample per batch row, with what the actor gradient
/// needs.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    /// `batch x 2` squashed actions.
    pub actions: Vec<f64>,
    /// `batch x 2` standard normal noise.
    pub eps: Vec<f64>,
    /// `batch x 2` clamped log standard deviations.
    pub log_std: Vec<f64>,
    /// Whether the raw log-std head was clamped.
    pub clamped: Vec<bool>,
    /// Per-row log-probability of `actions`.
    pub log_prob: Vec<f64>,
}

/// Splits raw actor outputs (`batch x 4`: mean then log-std) and samples.
/// `eps` drawn from `rng` is replaced by zeros in deterministic mode.
pub fn sample_squashed<R: Rng + ?Sized>(
    head: &[f64],
    batch: usize,
    mode: PolicyMode,
    rng: &mut R,
) -> SquashedSample {
    let n = batch * ACTION_DIM;
    let mut s = SquashedSample {
        actions: Vec::with_capacity(n),
        eps: Vec::with_capacity(n),
        log_std: Vec::with_capacity(n),
        clamped: Vec::with_capacity(n),
        log_prob: Vec::with_capacity(batch),
    };
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    for row in head.chunks_exact(2 * ACTION_DIM) {
        let mut lp = 0.0;
        for k in 0..ACTION_DIM {
            let mean = row[k];
            let raw = row[ACTION_DIM + k];
            let log_std = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let eps: f64 = match mode {
                PolicyMode::Stochastic => rng.sample(StandardNormal),
                PolicyMode::Deterministic => 0.0,
            };
            let u = mean + log_std.exp() * eps;
            let a = u.tanh();
            lp += -0.5 * eps * eps - log_std - half_log_2pi - (1.0 - a * a + TANH_EPS).ln();
            s.actions.push(a);
            s.eps.push(eps);
            s.log_std.push(log_std);
            s.clamped.push(raw != log_std);
        }
        s.log_prob.push(lp);
    }
    s
}

/// Runs the actor on one observation.
pub fn policy_forward<R: Rng + ?Sized>(
    actor: &Mlp,
    obs: &Observation,
    mode: PolicyMode,
    rng: &mut R,
) -> Result<Action, ShapeError> {
    let head = actor.predict(obs.as_slice())?;
    if head.len() != 2 * ACTION_DIM {
        return Err(ShapeError::OutputGrad {
            expected: 2 * ACTION_DIM,
            got: head.len(),
        });
    }
    let s = sample_squashed(&head, 1, mode, rng);
    Ok(Action::new(s.actions[0], s.actions[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::Activation;
    use crate::observation::OBS_DIM;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_is_centered() {
        let actor = Mlp::zeros(&[OBS_DIM, 8, 4], Activation::Silu).unwrap();
        let obs = Observation(vec![0.5; OBS_DIM]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = policy_forward(&actor, &obs, PolicyMode::Deterministic, &mut rng).unwrap();
        assert_eq!(a, Action::new(0.0, 0.0));
    }

    #[test]
    fn outputs_in_range_and_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let actor = Mlp::new(&[OBS_DIM, 16, 4], Activation::Silu, &mut rng).unwrap();
        let obs = Observation((0..OBS_DIM).map(|i| (i as f64 * 0.37).sin() * 50.0).collect());
        for mode in [PolicyMode::Stochastic, PolicyMode::Deterministic] {
            let a = policy_forward(&actor, &obs, mode, &mut rng).unwrap();
            assert!(a.throttle.abs() <= 1.0 && a.turn.abs() <= 1.0);
        }
        let draw = |seed| {
            policy_forward(
                &actor,
                &obs,
                PolicyMode::Stochastic,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .unwrap()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn scaling_examples() {
        let l = KinematicLimits {
            v_max: 0.5,
            omega_max: 1.0,
            ..KinematicLimits::default()
        };
        assert_eq!(scale_action(Action::new(1.0, -1.0), &l), (0.5, -1.0));
        assert_eq!(scale_action(Action::new(0.0, 0.0), &l), (0.0, 0.0));
        assert_eq!(scale_action(Action::new(0.5, 0.5), &l), (0.25, 0.5));
    }

    #[test]
    fn log_prob_matches_density() {
        // Single-dimension check of the change of variables against a
        // numerically integrated density of tanh(N(mu, sigma^2)).
        let (mu, log_std) = (0.3f64, -0.5f64);
        let head = [mu, mu, log_std, log_std];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = sample_squashed(&head, 1, PolicyMode::Stochastic, &mut rng);
        let sigma = log_std.exp();
        let density = |a: f64| {
            let u = a.atanh();
            let z = (u - mu) / sigma;
            (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()) / (1.0 - a * a)
        };
        let expect: f64 = s.actions.iter().map(|a| density(*a).ln()).sum();
        assert!((s.log_prob[0] - expect).abs() < 1e-4);
    }
}
