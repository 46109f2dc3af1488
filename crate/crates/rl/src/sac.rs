//! Soft actor-critic: twin critics with Polyak-averaged targets, a
//! reparameterized squashed-Gaussian actor and an automatically tuned
//! entropy temperature.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use safer_core::config::SacConfig;

use crate::mlp::{Mlp, ShapeError};
use crate::observation::ACTION_DIM;
use crate::policy::{sample_squashed, PolicyMode, SquashedSample, TANH_EPS};
use crate::replay::Experience;

#[derive(Debug, Error, PartialEq)]
pub enum SacError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite {0}; step skipped")]
    NonFinite(&'static str),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let c2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacState {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
    pub log_alpha: f64,
    pub actor_opt: Adam,
    pub critic1_opt: Adam,
    pub critic2_opt: Adam,
    pub alpha_opt: Adam,
    /// Completed gradient steps.
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Losses {
    /// Mean squared TD error averaged over both critics.
    pub critic: f64,
    pub actor: f64,
    pub alpha: f64,
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input)
        .chain(hidden.iter().copied())
        .chain(std::iter::once(output))
        .collect()
}

impl SacState {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, cfg: &SacConfig, rng: &mut R) -> Result<Self, ShapeError> {
        let actor = Mlp::new(
            &layer_sizes(obs_dim, &cfg.hidden, 2 * ACTION_DIM),
            cfg.activation,
            rng,
        )?;
        let critic_sizes = layer_sizes(obs_dim + ACTION_DIM, &cfg.hidden, 1);
        let critic1 = Mlp::new(&critic_sizes, cfg.activation, rng)?;
        let critic2 = Mlp::new(&critic_sizes, cfg.activation, rng)?;
        Ok(Self {
            actor_opt: Adam::new(actor.params.len()),
            critic1_opt: Adam::new(critic1.params.len()),
            critic2_opt: Adam::new(critic2.params.len()),
            alpha_opt: Adam::new(1),
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor,
            critic1,
            critic2,
            log_alpha: cfg.initial_alpha.ln(),
            step: 0,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }
}

/// `target <- tau * source + (1 - tau) * target`.
pub fn polyak_update(target: &mut Mlp, source: &Mlp, tau: f64) {
    for (t, s) in target.params.iter_mut().zip(&source.params) {
        *t = tau * s + (1.0 - tau) * *t;
    }
}

fn stack_obs<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * dim);
    for r in rows {
        out.extend_from_slice(r);
    }
    out
}

fn with_actions(obs: &[f64], actions: &[f64], obs_dim: usize) -> Vec<f64> {
    let n = actions.len() / ACTION_DIM;
    let mut out = Vec::with_capacity(n * (obs_dim + ACTION_DIM));
    for (o, a) in obs.chunks_exact(obs_dim).zip(actions.chunks_exact(ACTION_DIM)) {
        out.extend_from_slice(o);
        out.extend_from_slice(a);
    }
    out
}

fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|v| v.is_finite())
}

/// Soft TD target `r + discount * (1 - done) * (min target Q - alpha log pi)`
/// for every row.
pub fn td_targets<R: Rng + ?Sized>(
    state: &SacState,
    batch: &[&Experience],
    discount: f64,
    rng: &mut R,
) -> Result<Vec<f64>, SacError> {
    let n = batch.len();
    let dim = state.obs_dim();
    let next = stack_obs(batch.iter().map(|e| e.s_next.as_slice()), dim, n);
    let head = state.actor.forward(&next, n)?;
    let sample = sample_squashed(head.output(), n, PolicyMode::Stochastic, rng);
    let input = with_actions(&next, &sample.actions, dim);
    let q1 = state.target1.forward(&input, n)?;
    let q2 = state.target2.forward(&input, n)?;
    let alpha = state.alpha();
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if e.done {
                e.r
            } else {
                let soft = q1.output()[i].min(q2.output()[i]) - alpha * sample.log_prob[i];
                e.r + discount * soft
            }
        })
        .collect())
}

/// One gradient step on both critics, the actor and the temperature,
/// followed by the target update. All gradients are computed from the
/// pre-step parameters; nothing changes if any loss or gradient is not
/// finite.
pub fn sac_update<R: Rng + ?Sized>(
    state: &mut SacState,
    batch: &[&Experience],
    cfg: &SacConfig,
    rng: &mut R,
) -> Result<Losses, SacError> {
    let n = batch.len();
    if n == 0 {
        return Err(SacError::EmptyBatch);
    }
    let dim = state.obs_dim();
    let nf = n as f64;

    // Critics.
    let y = td_targets(state, batch, cfg.discount, rng)?;
    let obs = stack_obs(batch.iter().map(|e| e.s.as_slice()), dim, n);
    let taken: Vec<f64> = batch.iter().flat_map(|e| e.a).collect();
    let sa = with_actions(&obs, &taken, dim);
    let mut critic_loss = 0.0;
    let mut critic_grads = Vec::with_capacity(2);
    for critic in [&state.critic1, &state.critic2] {
        let cache = critic.forward(&sa, n)?;
        let diff: Vec<f64> = cache.output().iter().zip(&y).map(|(q, t)| q - t).collect();
        critic_loss += diff.iter().map(|d| d * d).sum::<f64>() / nf;
        let up: Vec<f64> = diff.iter().map(|d| d / nf).collect();
        critic_grads.push(critic.backward(&cache, &up)?.0);
    }

    // Actor.
    let actor = actor_gradient(state, &obs, n, rng)?;
    let (actor_loss, actor_grad) = (actor.loss, actor.grad);
    let s = actor.sample;

    // Temperature.
    let entropy_gap = s.log_prob.iter().map(|lp| lp + cfg.target_entropy).sum::<f64>() / nf;
    let alpha_loss = -state.log_alpha * entropy_gap;
    let alpha_grad = [-entropy_gap];

    if !(critic_loss.is_finite() && all_finite(&critic_grads[0]) && all_finite(&critic_grads[1])) {
        return Err(SacError::NonFinite("critic loss"));
    }
    if !(actor_loss.is_finite() && all_finite(&actor_grad)) {
        return Err(SacError::NonFinite("actor loss"));
    }
    if !(alpha_loss.is_finite() && alpha_grad[0].is_finite()) {
        return Err(SacError::NonFinite("temperature loss"));
    }

    state
        .critic1_opt
        .step(&mut state.critic1.params, &critic_grads[0], cfg.lr_critic);
    state
        .critic2_opt
        .step(&mut state.critic2.params, &critic_grads[1], cfg.lr_critic);
    state
        .actor_opt
        .step(&mut state.actor.params, &actor_grad, cfg.lr_actor);
    let mut la = [state.log_alpha];
    state.alpha_opt.step(&mut la, &alpha_grad, cfg.lr_alpha);
    state.log_alpha = la[0];
    polyak_update(&mut state.target1, &state.critic1, cfg.tau);
    polyak_update(&mut state.target2, &state.critic2, cfg.tau);
    state.step += 1;

    Ok(Losses {
        critic: critic_loss / 2.0,
        actor: actor_loss,
        alpha: alpha_loss,
    })
}

/// Reparameterized actor loss `mean(alpha log pi(a|s) - min Q(s, a))` and its
/// gradient with respect to the actor parameters, for `n` stacked
/// observations.
pub struct ActorGradient {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub sample: SquashedSample,
}

pub fn actor_gradient<R: Rng + ?Sized>(
    state: &SacState,
    obs: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<ActorGradient, SacError> {
    let dim = state.obs_dim();
    let nf = n as f64;
    let alpha = state.alpha();
    let head_cache = state.actor.forward(obs, n)?;
    let s = sample_squashed(head_cache.output(), n, PolicyMode::Stochastic, rng);
    let sa_pi = with_actions(obs, &s.actions, dim);
    let c1 = state.critic1.forward(&sa_pi, n)?;
    let c2 = state.critic2.forward(&sa_pi, n)?;
    let use_first: Vec<bool> = c1.output().iter().zip(c2.output()).map(|(a, b)| a <= b).collect();
    let q_min: Vec<f64> = c1
        .output()
        .iter()
        .zip(c2.output())
        .map(|(a, b)| a.min(*b))
        .collect();
    let mask = |first: bool| -> Vec<f64> {
        use_first
            .iter()
            .map(|u| if *u == first { 1.0 } else { 0.0 })
            .collect()
    };
    let (_, dx1) = state.critic1.backward(&c1, &mask(true))?;
    let (_, dx2) = state.critic2.backward(&c2, &mask(false))?;
    let width = dim + ACTION_DIM;
    let mut head_grad = vec![0.0; n * 2 * ACTION_DIM];
    for i in 0..n {
        let dq = &if use_first[i] { &dx1 } else { &dx2 }[i * width + dim..(i + 1) * width];
        for k in 0..ACTION_DIM {
            let j = i * ACTION_DIM + k;
            let a = s.actions[j];
            let one_minus = 1.0 - a * a;
            let du = (alpha * 2.0 * a / (one_minus + TANH_EPS) - dq[k]) * one_minus / nf;
            head_grad[i * 2 * ACTION_DIM + k] = du;
            head_grad[i * 2 * ACTION_DIM + ACTION_DIM + k] = if s.clamped[j] {
                0.0
            } else {
                du * s.log_std[j].exp() * s.eps[j] - alpha / nf
            };
        }
    }
    let loss = s
        .log_prob
        .iter()
        .zip(&q_min)
        .map(|(lp, q)| alpha * lp - q)
        .sum::<f64>()
        / nf;
    let (grad, _) = state.actor.backward(&head_cache, &head_grad)?;
    Ok(ActorGradient {
        loss,
        grad,
        sample: s,
    })
}


/// `Q1(s, a)` and `Q2(s, a)` for one transition.
pub fn q_values(state: &SacState, e: &Experience) -> Result<(f64, f64), ShapeError> {
    let input = with_actions(e.s.as_slice(), &e.a, state.obs_dim());
    Ok((
        state.critic1.predict(&input)?[0],
        state.critic2.predict(&input)?[0],
    ))
}
