//! Actor, adversary and critic update rules on small hand-built networks.

use rq_core::agent::{
    actor_gradient, actor_update, adversary_gradient, adversary_update, critic_gradient,
    critic_update, Batch, NetConfig,
};
use rq_core::nn::{Activation, AdamConfig, AdamState, MlpParams, MlpShape};
use rq_core::rng::{self, domain};

/// One-dimensional critic `Q(s, a) = tanh(c + a) + tanh(c − a)`: even in `a`,
/// peaked at `a = 0` and blind to the state.
fn peaked_critic() -> MlpParams {
    let shape = MlpShape::new(vec![1, 2, 1], Activation::Tanh, Activation::Linear).with_aux(0, 1);
    // Layer 0 rows are [w_s, w_a] per hidden unit, then two biases.
    let values = vec![0.0, 1.0, 0.0, -1.0, 0.5, 0.5, 1.0, 1.0, 0.0];
    MlpParams::from_values(shape, values).unwrap()
}

/// Policy `a = tanh(w·s + b)`.
fn scalar_policy(w: f64, b: f64) -> MlpParams {
    let shape = MlpShape::new(vec![1, 1], Activation::Linear, Activation::Tanh);
    MlpParams::from_values(shape, vec![w, b]).unwrap()
}

fn scalar_batch(states: &[f64]) -> Batch {
    let n = states.len();
    Batch {
        states: states.to_vec(),
        actions: vec![0.0; n],
        next_states: vec![0.0; n],
        rewards: vec![0.0; n],
        dones: vec![false; n],
    }
}

fn mean_abs_action(policy: &MlpParams, batch: &Batch) -> f64 {
    let out = policy.forward(&batch.states, None, batch.len()).unwrap();
    out.output().iter().map(|a| a.abs()).sum::<f64>() / batch.len() as f64
}

#[test]
fn actor_moves_toward_the_critic_peak() {
    let critic = peaked_critic();
    let mut actor = scalar_policy(0.3, 0.6);
    let mut adam = AdamState::new(&actor, AdamConfig::default());
    let batch = scalar_batch(&[-0.5, 0.0, 0.5, 1.0]);
    let before = mean_abs_action(&actor, &batch);
    for _ in 0..200 {
        actor_update(&mut actor, &mut adam, &critic, &batch, 0.1, 1e-2).unwrap();
    }
    let after = mean_abs_action(&actor, &batch);
    assert!(after < 0.2 * before, "{before} -> {after}");
    assert_eq!(critic, peaked_critic());
}

#[test]
fn adversary_moves_away_from_the_critic_peak() {
    let critic = peaked_critic();
    let mut adversary = scalar_policy(0.3, 0.2);
    let mut adam = AdamState::new(&adversary, AdamConfig::default());
    let batch = scalar_batch(&[-0.5, 0.0, 0.5, 1.0]);
    let before = mean_abs_action(&adversary, &batch);
    for _ in 0..200 {
        adversary_update(&mut adversary, &mut adam, &critic, &batch, 0.1, 1e-2).unwrap();
    }
    let after = mean_abs_action(&adversary, &batch);
    assert!(after > before + 0.3, "{before} -> {after}");
}

#[test]
fn vanishing_weights_leave_policies_unchanged() {
    let critic = peaked_critic();
    let batch = scalar_batch(&[0.1, 0.7]);
    let mut actor = scalar_policy(0.3, 0.6);
    let mut adam = AdamState::new(&actor, AdamConfig::default());
    actor_update(&mut actor, &mut adam, &critic, &batch, 1.0, 1e-2).unwrap();
    assert_eq!(actor, scalar_policy(0.3, 0.6));

    let mut adversary = scalar_policy(-0.2, 0.1);
    let mut adam = AdamState::new(&adversary, AdamConfig::default());
    adversary_update(&mut adversary, &mut adam, &critic, &batch, 0.0, 1e-2).unwrap();
    assert_eq!(adversary, scalar_policy(-0.2, 0.1));
}

#[test]
fn adversary_gradient_is_scaled_negated_actor_gradient() {
    let net = NetConfig {
        actor_hidden: vec![16, 16],
        critic_hidden: vec![16, 16],
        policy_final_scale: 1.0,
        ..Default::default()
    };
    let mut r = rng::stream(11, domain::INIT_ACTOR, 0, 0);
    let policy = MlpParams::init(net.policy_shape(), 1.0, &mut r).unwrap();
    let critic = MlpParams::init(net.critic_shape(), 1.0, &mut r).unwrap();
    let n = 8;
    let states: Vec<f64> = (0..18 * n).map(|i| ((i * 7) as f64 * 0.37).sin()).collect();
    let batch = Batch {
        states,
        actions: vec![0.0; 4 * n],
        next_states: vec![0.0; 18 * n],
        rewards: vec![0.0; n],
        dones: vec![false; n],
    };
    for alpha in [0.1, 0.25, 0.5, 0.9] {
        let (ga, _) = actor_gradient(&policy, &critic, &batch, alpha).unwrap();
        let (gb, _) = adversary_gradient(&policy, &critic, &batch, alpha).unwrap();
        let k = -alpha / (1.0 - alpha);
        let scale = ga.max_abs();
        for (a, b) in ga.0.iter().zip(&gb.0) {
            assert!(
                (b - k * a).abs() <= 1e-12 * scale,
                "alpha {alpha}: {b} vs {}",
                k * a
            );
        }
    }
}

#[test]
fn frozen_critic_objective_rises_under_actor_updates() {
    let net = NetConfig {
        actor_hidden: vec![16],
        critic_hidden: vec![16],
        policy_final_scale: 1.0,
        ..Default::default()
    };
    let mut r = rng::stream(5, domain::INIT_ACTOR, 0, 0);
    let mut actor = MlpParams::init(net.policy_shape(), 1.0, &mut r).unwrap();
    let critic = MlpParams::init(net.critic_shape(), 1.0, &mut r).unwrap();
    let n = 16;
    let batch = Batch {
        states: (0..18 * n).map(|i| ((i * 3) as f64 * 0.21).cos()).collect(),
        actions: vec![0.0; 4 * n],
        next_states: vec![0.0; 18 * n],
        rewards: vec![0.0; n],
        dones: vec![false; n],
    };
    let objective = |a: &MlpParams| actor_gradient(a, &critic, &batch, 0.1).unwrap().1;
    let mut adam = AdamState::new(&actor, AdamConfig::default());
    let mut last = objective(&actor);
    for _ in 0..50 {
        actor_update(&mut actor, &mut adam, &critic, &batch, 0.1, 1e-4).unwrap();
        let now = objective(&actor);
        assert!(now >= last, "{last} -> {now}");
        last = now;
    }
}

fn linear_critic(w: [f64; 3]) -> MlpParams {
    // Q(s, a) = w0·s + w1·a + w2
    let shape = MlpShape::new(vec![1, 1], Activation::Linear, Activation::Linear).with_aux(0, 1);
    MlpParams::from_values(shape, w.to_vec()).unwrap()
}

#[test]
fn linear_critic_gradient_is_hand_derived() {
    let critic = linear_critic([0.5, -1.5, 0.25]);
    let batch = Batch {
        states: vec![2.0],
        actions: vec![0.4],
        next_states: vec![0.0],
        rewards: vec![0.0],
        dones: vec![false],
    };
    let y = 3.0;
    let q = 0.5 * 2.0 - 1.5 * 0.4 + 0.25;
    let (g, loss) = critic_gradient(&critic, &batch, &[y]).unwrap();
    let k = 2.0 * (q - y);
    assert_eq!(loss, (q - y) * (q - y));
    let expected = [k * 2.0, k * 0.4, k];
    for (a, b) in g.0.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15, "{a} vs {b}");
    }
}

#[test]
fn exact_critic_is_a_fixed_point() {
    let mut critic = linear_critic([0.5, -1.5, 0.25]);
    let batch = Batch {
        states: vec![2.0, -1.0],
        actions: vec![0.5, 0.0],
        next_states: vec![0.0; 2],
        rewards: vec![0.0; 2],
        dones: vec![false; 2],
    };
    let y = [0.5 * 2.0 - 1.5 * 0.5 + 0.25, -0.5 + 0.25];
    let mut adam = AdamState::new(&critic, AdamConfig::default());
    let loss = critic_update(&mut critic, &mut adam, &batch, &y, 1e-2).unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(critic, linear_critic([0.5, -1.5, 0.25]));
}

#[test]
fn critic_loss_decreases_on_a_fixed_batch() {
    let net = NetConfig::default();
    let mut r = rng::stream(8, domain::INIT_CRITIC, 0, 0);
    let mut critic = MlpParams::init(net.critic_shape(), 1.0, &mut r).unwrap();
    let n = 32;
    let batch = Batch {
        states: (0..18 * n).map(|i| (i as f64 * 0.13).sin()).collect(),
        actions: (0..4 * n).map(|i| (i as f64 * 0.71).cos()).collect(),
        next_states: vec![0.0; 18 * n],
        rewards: vec![0.0; n],
        dones: vec![false; n],
    };
    let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.5).sin()).collect();
    let mut adam = AdamState::new(&critic, AdamConfig::default());
    let mut last = critic_gradient(&critic, &batch, &y).unwrap().1;
    for _ in 0..50 {
        critic_update(&mut critic, &mut adam, &batch, &y, 1e-4).unwrap();
        let now = critic_gradient(&critic, &batch, &y).unwrap().1;
        assert!(now < last, "{last} -> {now}");
        last = now;
    }
}

#[test]
fn non_finite_targets_are_rejected() {
    let mut critic = linear_critic([0.5, -1.5, 0.25]);
    let batch = Batch {
        states: vec![1.0],
        actions: vec![0.0],
        next_states: vec![0.0],
        rewards: vec![0.0],
        dones: vec![false],
    };
    let mut adam = AdamState::new(&critic, AdamConfig::default());
    assert!(critic_update(&mut critic, &mut adam, &batch, &[f64::NAN], 1e-2).is_err());
    assert_eq!(critic, linear_critic([0.5, -1.5, 0.25]));
}
