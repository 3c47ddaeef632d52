use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{Error, Result};
use crate::metrics::WeightVector;

/// One stored step of experience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub o_prev: Observation,
    pub a_final: WeightVector,
    pub a_rl: WeightVector,
    pub o_next: Observation,
    pub reward: f64,
}

/// Bounded ring of transitions; the oldest entry is overwritten once full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be positive".into()));
        }
        Ok(Self {
            items: Vec::new(),
            capacity,
            next: 0,
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

    pub fn push(&mut self, transition: Transition) -> Result<()> {
        if !transition.reward.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.next] = transition;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample of distinct transitions.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if batch_size == 0 || batch_size > self.items.len() {
            return Err(Error::InsufficientBuffer {
                needed: batch_size.max(1),
                available: self.items.len(),
            });
        }
        Ok(index::sample(rng, self.items.len(), batch_size)
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}
