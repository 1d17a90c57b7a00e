//! Action-robust DDPG.
//!
//! During training the executed action comes from the actor with
//! probability `1 − α` and from an adversary otherwise. The critic bootstraps
//! from the same mixture,
//!
//! ```text
//! Q̃ = (1 − α)·Q′(s′, π′(s′)) + α·Q′(s′, π̄′(s′))
//! y = r + γ·(1 − d)·Q̃
//! ```
//!
//! the actor ascends `(1 − α)·mean Q(s, π(s))` and the adversary descends
//! `α·mean Q(s, π̄(s))`. Plain DDPG is the same loop without an adversary.

mod buffer;
mod noise;
mod train;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::env::{Action, Observation, ACTION_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{adam_step, Activation, AdamConfig, AdamState, Gradients, MlpParams, MlpShape};

pub use buffer::{Batch, ReplayBuffer, Transition};
pub use noise::OuNoise;
pub use train::{train, LogRow, Phase, TrainOutcome, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Algorithm {
    ArDdpg,
    /// No adversary; `α` is treated as zero.
    Ddpg,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Hyperparams {
    pub algorithm: Algorithm,
    /// Environment-step budget, babbling included.
    pub total_iterations: u64,
    pub lr_actor: f64,
    /// Used for the adversary as well.
    pub lr_adversary: f64,
    pub lr_critic: f64,
    pub gamma: f64,
    pub batch_size: usize,
    /// Probability that the adversary acts.
    pub alpha: f64,
    pub buffer_capacity: usize,
    /// Actor/critic update pairs per environment step.
    pub policy_steps: usize,
    /// Second critic update after the adversary update.
    pub outer_critic_update: bool,
    pub tau: f64,
    pub babble_episodes: u64,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    /// `σ` is annealed linearly to this value over the budget.
    pub ou_sigma_final: f64,
    pub ou_dt: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Environment steps between evaluations; 0 disables them.
    pub eval_interval: u64,
    pub eval_episodes: u32,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::ArDdpg,
            total_iterations: 2_000_000,
            lr_actor: 2e-5,
            lr_adversary: 2e-5,
            lr_critic: 2e-4,
            gamma: 0.95,
            batch_size: 64,
            alpha: 0.1,
            buffer_capacity: 800_000,
            policy_steps: 20,
            outer_critic_update: true,
            tau: 0.005,
            babble_episodes: 500,
            ou_theta: 0.15,
            ou_sigma: 0.2,
            ou_sigma_final: 0.05,
            ou_dt: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            eval_interval: 5_000,
            eval_episodes: 10,
        }
    }
}

impl Hyperparams {
    pub fn effective_alpha(&self) -> f64 {
        match self.algorithm {
            Algorithm::ArDdpg => self.alpha,
            Algorithm::Ddpg => 0.0,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(self.gamma.is_finite() && (0.0..1.0).contains(&self.gamma)) {
            return Err(Error::config("hp.gamma", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("hp.alpha", "must lie in [0, 1]"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config("hp.tau", "must lie in (0, 1]"));
        }
        if self.policy_steps < 1 {
            return Err(Error::config("hp.policy_steps", "must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("hp.batch_size", "must be >= 1"));
        }
        if self.buffer_capacity < 1 {
            return Err(Error::config("hp.buffer_capacity", "must be >= 1"));
        }
        for (name, v) in [
            ("hp.lr_actor", self.lr_actor),
            ("hp.lr_adversary", self.lr_adversary),
            ("hp.lr_critic", self.lr_critic),
            ("hp.ou_theta", self.ou_theta),
            ("hp.ou_dt", self.ou_dt),
            ("hp.adam_eps", self.adam_eps),
        ] {
            if !positive(v) {
                return Err(Error::config(name, "must be > 0"));
            }
        }
        for (name, v) in [
            ("hp.ou_sigma", self.ou_sigma),
            ("hp.ou_sigma_final", self.ou_sigma_final),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, "must be >= 0"));
            }
        }
        for (name, v) in [
            ("hp.adam_beta1", self.adam_beta1),
            ("hp.adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(name, "must lie in [0, 1)"));
            }
        }
        Ok(())
    }
}

/// Network architecture.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NetConfig {
    /// Hidden widths of the actor and the adversary.
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Layer whose input receives the action; 0 concatenates it with the state.
    pub critic_action_layer: usize,
    pub hidden_activation: Activation,
    /// Extra factor on the initial range of the policy output layer.
    pub policy_final_scale: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            critic_action_layer: 0,
            hidden_activation: Activation::Tanh,
            policy_final_scale: 1e-3,
        }
    }
}

impl NetConfig {
    pub fn policy_shape(&self) -> MlpShape {
        let mut dims = vec![OBS_DIM];
        dims.extend_from_slice(&self.actor_hidden);
        dims.push(ACTION_DIM);
        MlpShape::new(dims, self.hidden_activation, Activation::Tanh)
    }

    pub fn critic_shape(&self) -> MlpShape {
        let mut dims = vec![OBS_DIM];
        dims.extend_from_slice(&self.critic_hidden);
        dims.push(1);
        MlpShape::new(dims, self.hidden_activation, Activation::Linear)
            .with_aux(self.critic_action_layer, ACTION_DIM)
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .actor_hidden
            .iter()
            .chain(&self.critic_hidden)
            .any(|&w| w == 0)
        {
            return Err(Error::config("net.*_hidden", "widths must be >= 1"));
        }
        if self.critic_action_layer > self.critic_hidden.len() {
            return Err(Error::config(
                "net.critic_action_layer",
                "must not exceed the number of critic hidden layers",
            ));
        }
        if !(self.policy_final_scale.is_finite() && self.policy_final_scale > 0.0) {
            return Err(Error::config("net.policy_final_scale", "must be > 0"));
        }
        Ok(())
    }
}

/// Role of a network inside a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Actor,
    Adversary,
    Critic,
    ActorTarget,
    AdversaryTarget,
    CriticTarget,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Actor,
        Role::Adversary,
        Role::Critic,
        Role::ActorTarget,
        Role::AdversaryTarget,
        Role::CriticTarget,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Role> {
        Role::ALL.get(tag as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Actor => "actor",
            Role::Adversary => "adversary",
            Role::Critic => "critic",
            Role::ActorTarget => "actor_target",
            Role::AdversaryTarget => "adversary_target",
            Role::CriticTarget => "critic_target",
        }
    }
}

/// All trainable networks and their target copies.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks {
    pub actor: MlpParams,
    pub critic: MlpParams,
    pub adversary: Option<MlpParams>,
    pub actor_target: MlpParams,
    pub critic_target: MlpParams,
    pub adversary_target: Option<MlpParams>,
}

impl Networks {
    pub fn get(&self, role: Role) -> Option<&MlpParams> {
        match role {
            Role::Actor => Some(&self.actor),
            Role::Adversary => self.adversary.as_ref(),
            Role::Critic => Some(&self.critic),
            Role::ActorTarget => Some(&self.actor_target),
            Role::AdversaryTarget => self.adversary_target.as_ref(),
            Role::CriticTarget => Some(&self.critic_target),
        }
    }

    /// Present networks in role order.
    pub fn entries(&self) -> Vec<(Role, &MlpParams)> {
        Role::ALL
            .iter()
            .filter_map(|&r| self.get(r).map(|n| (r, n)))
            .collect()
    }

    /// Inverse of [`entries`](Self::entries). Actor, critic and both of their
    /// targets are required; the adversary pair is all-or-nothing.
    pub fn from_entries(entries: Vec<(Role, MlpParams)>) -> Result<Networks> {
        let mut slots: [Option<MlpParams>; 6] = Default::default();
        for (role, net) in entries {
            slots[role as usize] = Some(net);
        }
        let [actor, adversary, critic, actor_target, adversary_target, critic_target] = slots;
        let missing =
            |r: Role| Error::config("checkpoint", alloc::format!("missing {} network", r.name()));
        if adversary.is_some() != adversary_target.is_some() {
            return Err(Error::config(
                "checkpoint",
                "adversary without its target (or vice versa)",
            ));
        }
        Ok(Networks {
            actor: actor.ok_or_else(|| missing(Role::Actor))?,
            critic: critic.ok_or_else(|| missing(Role::Critic))?,
            adversary,
            actor_target: actor_target.ok_or_else(|| missing(Role::ActorTarget))?,
            critic_target: critic_target.ok_or_else(|| missing(Role::CriticTarget))?,
            adversary_target,
        })
    }
}

fn policy_action(policy: &MlpParams, s: &Observation) -> Result<Action> {
    let out = policy.predict(&s.0)?;
    let mut a = [0.0; ACTION_DIM];
    if out.len() != ACTION_DIM {
        return Err(Error::Dimension {
            context: "policy output",
            expected: ACTION_DIM,
            got: out.len(),
        });
    }
    a.copy_from_slice(&out);
    Ok(a)
}

/// Deterministic action of `policy` at `s`.
pub fn act(policy: &MlpParams, s: &Observation) -> Result<Action> {
    policy_action(policy, s)
}

/// Which network produced a mixed action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Actor {
    Protagonist,
    Adversary,
}

/// Adversary with probability `α`, actor otherwise. Exactly one uniform draw.
pub fn mixed_action<R: Rng + ?Sized>(
    s: &Observation,
    actor: &MlpParams,
    adversary: &MlpParams,
    alpha: f64,
    rng: &mut R,
) -> Result<(Action, Actor)> {
    if rng.random::<f64>() < alpha {
        Ok((policy_action(adversary, s)?, Actor::Adversary))
    } else {
        Ok((policy_action(actor, s)?, Actor::Protagonist))
    }
}

fn q_values(critic: &MlpParams, states: &[f64], actions: &[f64], batch: usize) -> Result<Vec<f64>> {
    let cache = critic.forward(states, Some(actions), batch)?;
    Ok(cache.output().to_vec())
}

/// Bootstrapped critic targets computed with target networks only.
///
/// Without an adversary the mixture reduces to the DDPG target.
pub fn critic_target(
    batch: &Batch,
    actor_target: &MlpParams,
    adversary_target: Option<&MlpParams>,
    critic_target: &MlpParams,
    alpha: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    let n = batch.len();
    let next_actions = actor_target.forward(&batch.next_states, None, n)?;
    let q_actor = q_values(critic_target, &batch.next_states, next_actions.output(), n)?;
    let q_mixed = match adversary_target {
        Some(adv) => {
            let adv_actions = adv.forward(&batch.next_states, None, n)?;
            let q_adv = q_values(critic_target, &batch.next_states, adv_actions.output(), n)?;
            q_actor
                .iter()
                .zip(&q_adv)
                .map(|(qa, qb)| (1.0 - alpha) * qa + alpha * qb)
                .collect()
        }
        None => q_actor,
    };
    Ok(bellman_targets(
        &batch.rewards,
        &batch.dones,
        &q_mixed,
        gamma,
    ))
}

/// `y = r + γ·(1 − d)·q`; terminal entries return `r` untouched.
pub fn bellman_targets(rewards: &[f64], dones: &[bool], q: &[f64], gamma: f64) -> Vec<f64> {
    rewards
        .iter()
        .zip(dones)
        .zip(q)
        .map(|((&r, &d), &q)| if d { r } else { r + gamma * q })
        .collect()
}

/// Gradient of `weight · mean_B Q(s, π(s))` with respect to the policy
/// parameters, and the objective value. The critic is read only.
pub fn policy_gradient(
    policy: &MlpParams,
    critic: &MlpParams,
    states: &[f64],
    batch: usize,
    weight: f64,
) -> Result<(Gradients, f64)> {
    let actions = policy.forward(states, None, batch)?;
    let q_cache = critic.forward(states, Some(actions.output()), batch)?;
    let scale = weight / batch as f64;
    let objective = scale * q_cache.output().iter().sum::<f64>();
    let dq = vec![scale; batch];
    let through_critic = critic.input_gradient(&q_cache, &dq)?;
    let bp = policy.backward(&actions, &through_critic.aux)?;
    Ok((bp.params, objective))
}

/// Descent gradient for the actor: `−∇ (1 − α)·mean Q(s, π(s))`.
pub fn actor_gradient(
    actor: &MlpParams,
    critic: &MlpParams,
    batch: &Batch,
    alpha: f64,
) -> Result<(Gradients, f64)> {
    let (mut g, objective) =
        policy_gradient(actor, critic, &batch.states, batch.len(), 1.0 - alpha)?;
    g.scale(-1.0);
    Ok((g, objective))
}

/// Descent gradient for the adversary: `∇ α·mean Q(s, π̄(s))`.
pub fn adversary_gradient(
    adversary: &MlpParams,
    critic: &MlpParams,
    batch: &Batch,
    alpha: f64,
) -> Result<(Gradients, f64)> {
    policy_gradient(adversary, critic, &batch.states, batch.len(), alpha)
}

/// One Adam step of gradient ascent on the actor objective; returns it.
pub fn actor_update(
    actor: &mut MlpParams,
    adam: &mut AdamState,
    critic: &MlpParams,
    batch: &Batch,
    alpha: f64,
    lr: f64,
) -> Result<f64> {
    let (g, objective) = actor_gradient(actor, critic, batch, alpha)?;
    adam_step(actor, &g, adam, lr)?;
    Ok(objective)
}

/// One Adam step of gradient descent on the adversary objective; returns it.
pub fn adversary_update(
    adversary: &mut MlpParams,
    adam: &mut AdamState,
    critic: &MlpParams,
    batch: &Batch,
    alpha: f64,
    lr: f64,
) -> Result<f64> {
    let (g, objective) = adversary_gradient(adversary, critic, batch, alpha)?;
    adam_step(adversary, &g, adam, lr)?;
    Ok(objective)
}

/// Gradient of `mean_B (Q(s, a) − y)²` and the loss value.
pub fn critic_gradient(
    critic: &MlpParams,
    batch: &Batch,
    targets: &[f64],
) -> Result<(Gradients, f64)> {
    let n = batch.len();
    if targets.len() != n {
        return Err(Error::Dimension {
            context: "critic targets",
            expected: n,
            got: targets.len(),
        });
    }
    let cache = critic.forward(&batch.states, Some(&batch.actions), n)?;
    let inv = 1.0 / n as f64;
    let diff: Vec<f64> = cache
        .output()
        .iter()
        .zip(targets)
        .map(|(q, y)| q - y)
        .collect();
    let loss = inv * diff.iter().map(|d| d * d).sum::<f64>();
    if !loss.is_finite() {
        return Err(Error::NonFinite("critic loss"));
    }
    let dq: Vec<f64> = diff.iter().map(|d| 2.0 * inv * d).collect();
    let bp = critic.backward(&cache, &dq)?;
    Ok((bp.params, loss))
}

/// One Adam step on the mean squared Bellman error; returns the loss.
pub fn critic_update(
    critic: &mut MlpParams,
    adam: &mut AdamState,
    batch: &Batch,
    targets: &[f64],
    lr: f64,
) -> Result<f64> {
    let (g, loss) = critic_gradient(critic, batch, targets)?;
    adam_step(critic, &g, adam, lr)?;
    Ok(loss)
}
