use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::{Action, ACTION_DIM};

/// Ornstein-Uhlenbeck process with zero mean, one per action component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    pub value: Action,
}

impl OuNoise {
    pub fn new(theta: f64, sigma: f64) -> Self {
        Self {
            theta,
            sigma,
            value: [0.0; ACTION_DIM],
        }
    }

    pub fn reset(&mut self) {
        self.value = [0.0; ACTION_DIM];
    }

    /// Euler-Maruyama step: `x ← x − θ·x·dt + σ·√dt·N(0, I)`.
    pub fn sample<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> Action {
        let diffusion = self.sigma * libm::sqrt(dt);
        for x in self.value.iter_mut() {
            let n: f64 = StandardNormal.sample(rng);
            *x += -self.theta * *x * dt + diffusion * n;
        }
        self.value
    }
}
