use alloc::vec::Vec;

use rand::Rng;

use super::{
    act, actor_update, adversary_update, critic_target, critic_update, mixed_action, Hyperparams,
    NetConfig, Networks, OuNoise, ReplayBuffer, Transition,
};
use crate::env::{
    env_step, observe, reset, Action, EnvConfig, EpisodeState, Observation, PerturbConfig,
};
use crate::error::{Error, Result};
use crate::eval::episode_return;
use crate::nn::{soft_update, AdamState, MlpParams};
use crate::rng::{self, domain, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Uniform random actions, no updates.
    Babble,
    Train,
    /// Noise-free evaluation of the current actor.
    Eval,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Babble => "babble",
            Phase::Train => "train",
            Phase::Eval => "eval",
        }
    }
}

/// One row of the training log. Episode rows carry the training return and
/// the mean losses of the updates made during the episode; evaluation rows
/// carry the mean evaluation return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub phase: Phase,
    pub step: u64,
    pub episode: u64,
    pub ret: f64,
    pub critic_loss: Option<f64>,
    pub actor_objective: Option<f64>,
    pub adversary_objective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub networks: Networks,
    pub log: Vec<LogRow>,
    pub steps: u64,
    pub episodes: u64,
    /// Actions that reached the simulator outside `[-1, 1]`; should stay 0.
    pub clamped_actions: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Running {
    critic_loss: f64,
    critic_n: u64,
    actor: f64,
    actor_n: u64,
    adversary: f64,
    adversary_n: u64,
}

fn mean(sum: f64, n: u64) -> Option<f64> {
    (n > 0).then(|| sum / n as f64)
}

struct Optimisers {
    actor: AdamState,
    critic: AdamState,
    adversary: Option<AdamState>,
}

/// Single-threaded training loop. Every source of randomness has its own
/// stream (see [`crate::rng`]), so the trajectory is a pure function of the
/// configuration and the seed.
pub struct Trainer {
    hp: Hyperparams,
    env: EnvConfig,
    seed: u64,
    nets: Networks,
    opt: Optimisers,
    buffer: ReplayBuffer,
    noise: OuNoise,
    env_rng: StreamRng,
    explore_rng: StreamRng,
    mix_rng: StreamRng,
    replay_rng: StreamRng,
    state: EpisodeState,
    obs: Observation,
    step: u64,
    episode: u64,
    episode_return: f64,
    evaluations: u64,
    running: Running,
    log: Vec<LogRow>,
    clamped_actions: u64,
}

impl Trainer {
    pub fn new(hp: Hyperparams, net: &NetConfig, env: EnvConfig, seed: u64) -> Result<Self> {
        hp.validate()?;
        net.validate()?;
        env.validate()?;
        let policy = net.policy_shape();
        let actor = MlpParams::init(
            policy.clone(),
            net.policy_final_scale,
            &mut rng::stream(seed, domain::INIT_ACTOR, 0, 0),
        )?;
        let critic = MlpParams::init(
            net.critic_shape(),
            1.0,
            &mut rng::stream(seed, domain::INIT_CRITIC, 0, 0),
        )?;
        let adversary = match hp.algorithm {
            super::Algorithm::ArDdpg => Some(MlpParams::init(
                policy,
                net.policy_final_scale,
                &mut rng::stream(seed, domain::INIT_ADVERSARY, 0, 0),
            )?),
            super::Algorithm::Ddpg => None,
        };
        let nets = Networks {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            adversary_target: adversary.clone(),
            actor,
            critic,
            adversary,
        };
        let adam = hp.adam();
        let opt = Optimisers {
            actor: AdamState::new(&nets.actor, adam),
            critic: AdamState::new(&nets.critic, adam),
            adversary: nets.adversary.as_ref().map(|a| AdamState::new(a, adam)),
        };

        let mut env_rng = rng::stream(seed, domain::ENV, 0, 0);
        let quad = reset(&env.task, &mut env_rng);
        let state = EpisodeState::new(quad, &env.quad);
        let obs = observe(&quad, &env.task);
        Ok(Self {
            buffer: ReplayBuffer::new(hp.buffer_capacity),
            noise: OuNoise::new(hp.ou_theta, hp.ou_sigma),
            explore_rng: rng::stream(seed, domain::EXPLORATION, 0, 0),
            mix_rng: rng::stream(seed, domain::MIXING, 0, 0),
            replay_rng: rng::stream(seed, domain::REPLAY, 0, 0),
            env_rng,
            hp,
            env,
            seed,
            nets,
            opt,
            state,
            obs,
            step: 0,
            episode: 0,
            episode_return: 0.0,
            evaluations: 0,
            running: Running::default(),
            log: Vec::new(),
            clamped_actions: 0,
        })
    }

    pub fn networks(&self) -> &Networks {
        &self.nets
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.hp.total_iterations
    }

    fn babbling(&self) -> bool {
        self.episode < self.hp.babble_episodes
    }

    fn exploration_sigma(&self) -> f64 {
        let total = self.hp.total_iterations.max(1) as f64;
        let progress = (self.step as f64 / total).min(1.0);
        self.hp.ou_sigma + (self.hp.ou_sigma_final - self.hp.ou_sigma) * progress
    }

    fn choose_action(&mut self) -> Result<Action> {
        if self.babbling() {
            let mut a = [0.0; 4];
            for v in a.iter_mut() {
                *v = 2.0 * self.explore_rng.random::<f64>() - 1.0;
            }
            return Ok(a);
        }
        let base = match &self.nets.adversary {
            Some(adv) => {
                mixed_action(
                    &self.obs,
                    &self.nets.actor,
                    adv,
                    self.hp.alpha,
                    &mut self.mix_rng,
                )?
                .0
            }
            None => act(&self.nets.actor, &self.obs)?,
        };
        self.noise.sigma = self.exploration_sigma();
        let noise = self.noise.sample(self.hp.ou_dt, &mut self.explore_rng);
        let mut a = base;
        for (x, n) in a.iter_mut().zip(noise) {
            *x = (*x + n).clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// Advances training by one environment step (and its updates).
    pub fn step_once(&mut self) -> Result<()> {
        let babbling = self.babbling();
        let action = self.choose_action()?;
        let out = env_step(
            &self.state,
            &action,
            &PerturbConfig::NOMINAL,
            &self.env,
            &mut self.env_rng,
        );
        self.clamped_actions += u64::from(out.clamped_inputs);
        self.buffer.push(Transition {
            s: self.obs,
            a: action,
            s_next: out.obs,
            r: out.reward,
            d: out.done,
        });
        self.step += 1;
        self.episode_return += out.reward;

        if !babbling {
            self.learn().map_err(|e| match e {
                Error::NonFinite(context) => Error::Divergence {
                    context,
                    step: self.step,
                },
                other => other,
            })?;
        }

        if out.done {
            let r = core::mem::take(&mut self.running);
            self.log.push(LogRow {
                phase: if babbling {
                    Phase::Babble
                } else {
                    Phase::Train
                },
                step: self.step,
                episode: self.episode,
                ret: self.episode_return,
                critic_loss: mean(r.critic_loss, r.critic_n),
                actor_objective: mean(r.actor, r.actor_n),
                adversary_objective: mean(r.adversary, r.adversary_n),
            });
            self.episode += 1;
            self.episode_return = 0.0;
            let quad = reset(&self.env.task, &mut self.env_rng);
            self.state = EpisodeState::new(quad, &self.env.quad);
            self.obs = observe(&quad, &self.env.task);
            self.noise.reset();
        } else {
            self.state = out.next;
            self.obs = out.obs;
        }

        let interval = self.hp.eval_interval;
        if !babbling && interval > 0 && (self.step.is_multiple_of(interval) || self.is_done()) {
            self.evaluate()?;
        }
        Ok(())
    }

    fn evaluate(&mut self) -> Result<()> {
        let n = self.hp.eval_episodes.max(1);
        let mut total = 0.0;
        for k in 0..n {
            let mut r = rng::stream(
                self.seed,
                domain::TRAIN_EVAL,
                self.evaluations,
                u64::from(k),
            );
            total += episode_return(&self.nets.actor, &PerturbConfig::NOMINAL, &self.env, &mut r)?;
        }
        self.evaluations += 1;
        self.log.push(LogRow {
            phase: Phase::Eval,
            step: self.step,
            episode: self.episode,
            ret: total / f64::from(n),
            critic_loss: None,
            actor_objective: None,
            adversary_objective: None,
        });
        Ok(())
    }

    fn critic_step(&mut self, batch: &super::Batch) -> Result<()> {
        let alpha = self.hp.effective_alpha();
        let y = critic_target(
            batch,
            &self.nets.actor_target,
            self.nets.adversary_target.as_ref(),
            &self.nets.critic_target,
            alpha,
            self.hp.gamma,
        )?;
        let loss = critic_update(
            &mut self.nets.critic,
            &mut self.opt.critic,
            batch,
            &y,
            self.hp.lr_critic,
        )?;
        self.running.critic_loss += loss;
        self.running.critic_n += 1;
        Ok(())
    }

    fn learn(&mut self) -> Result<()> {
        let alpha = self.hp.effective_alpha();
        let size = self.hp.batch_size;
        for _ in 0..self.hp.policy_steps {
            let batch = self.buffer.sample(size, &mut self.replay_rng)?;
            let objective = actor_update(
                &mut self.nets.actor,
                &mut self.opt.actor,
                &self.nets.critic,
                &batch,
                alpha,
                self.hp.lr_actor,
            )?;
            self.running.actor += objective;
            self.running.actor_n += 1;
            self.critic_step(&batch)?;
        }

        // The outer batch is drawn even without an adversary so that the
        // replay stream stays aligned between the two algorithms.
        let batch = self.buffer.sample(size, &mut self.replay_rng)?;
        if let (Some(adv), Some(opt)) = (self.nets.adversary.as_mut(), self.opt.adversary.as_mut())
        {
            let objective = adversary_update(
                adv,
                opt,
                &self.nets.critic,
                &batch,
                alpha,
                self.hp.lr_adversary,
            )?;
            self.running.adversary += objective;
            self.running.adversary_n += 1;
        }
        if self.hp.outer_critic_update {
            self.critic_step(&batch)?;
        }

        let tau = self.hp.tau;
        soft_update(&mut self.nets.actor_target, &self.nets.actor, tau)?;
        soft_update(&mut self.nets.critic_target, &self.nets.critic, tau)?;
        if let (Some(t), Some(s)) = (
            self.nets.adversary_target.as_mut(),
            self.nets.adversary.as_ref(),
        ) {
            soft_update(t, s, tau)?;
        }
        if !(self.nets.actor.is_finite() && self.nets.critic.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(())
    }

    /// Runs until the step budget is exhausted.
    pub fn run(&mut self) -> Result<()> {
        while !self.is_done() {
            self.step_once()?;
        }
        Ok(())
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome {
            networks: self.nets,
            log: self.log,
            steps: self.step,
            episodes: self.episode,
            clamped_actions: self.clamped_actions,
        }
    }
}

/// Trains from scratch for `hp.total_iterations` environment steps.
pub fn train(hp: Hyperparams, net: &NetConfig, env: EnvConfig, seed: u64) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(hp, net, env, seed)?;
    trainer.run()?;
    Ok(trainer.finish())
}
