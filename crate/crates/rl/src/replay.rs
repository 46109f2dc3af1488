//! Transitions and the fixed-capacity replay ring buffer.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::observation::Observation;
use crate::reward::{compute_reward, NonFiniteCost};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub s: Observation,
    /// Normalized `(throttle, turn)`.
    pub a: [f64; 2],
    pub r: f64,
    pub s_next: Observation,
    pub done: bool,
    pub sigma_next: u8,
    /// Action cost the reward was computed from.
    pub cost: f64,
}

impl Experience {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        s: Observation,
        a: [f64; 2],
        s_next: Observation,
        done: bool,
        sigma_next: u8,
        cost: f64,
        lambda1: f64,
        lambda2: f64,
    ) -> Result<Self, NonFiniteCost> {
        let r = compute_reward(sigma_next, cost, lambda1, lambda2)?;
        Ok(Self {
            s,
            a,
            r,
            s_next,
            done,
            sigma_next,
            cost,
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("cannot sample from an empty replay buffer")]
    Empty,
    #[error("replay capacity must be positive")]
    ZeroCapacity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Experience>,
    /// Slot overwritten by the next push once full.
    next: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self, ReplayError> {
        if capacity == 0 {
            return Err(ReplayError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            next: 0,
            pushed: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total pushes since creation, including evicted ones.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.next] = e;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.next
        };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform sampling with replacement.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch: usize,
        rng: &mut R,
    ) -> Result<Vec<&Experience>, ReplayError> {
        if self.items.is_empty() {
            return Err(ReplayError::Empty);
        }
        Ok((0..batch)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(tag: f64) -> Experience {
        Experience::new(
            Observation(vec![tag]),
            [0.0, 0.0],
            Observation(vec![tag]),
            false,
            0,
            tag,
            35.0,
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn ring_eviction() {
        let mut buf = ReplayBuffer::new(2).unwrap();
        for i in 0..3 {
            buf.push(exp(i as f64));
        }
        assert_eq!(buf.len(), 2);
        let tags: Vec<f64> = buf.iter().map(|e| e.cost).collect();
        assert_eq!(tags, vec![1.0, 2.0]);
    }

    #[test]
    fn seeded_sampling_repeats() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        (0..10).for_each(|i| buf.push(exp(i as f64)));
        let a = buf.sample(32, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = buf.sample(32, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_and_zero_capacity() {
        assert_eq!(ReplayBuffer::new(0).unwrap_err(), ReplayError::ZeroCapacity);
        let buf = ReplayBuffer::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(buf.sample(1, &mut rng).unwrap_err(), ReplayError::Empty);
    }

    #[test]
    fn stored_reward_recomputes_bitwise() {
        let e = exp(0.34);
        let r = compute_reward(e.sigma_next, e.cost, 35.0, 10.0).unwrap();
        assert_eq!(r.to_bits(), e.r.to_bits());
    }
}
