use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starris_core::agents::ddpg::{self, actor_objective_grad, mse_loss_grad};
use starris_core::agents::sac::{self, actor_loss_grad};
use starris_core::agents::*;
use starris_core::convex::ClarabelBackend;
use starris_core::env::*;
use starris_core::model::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Central finite differences of `f` at `p`, compared entrywise with `g`.
fn fd_check(p: &ApproximatorParams, g: &[f64], f: impl Fn(&ApproximatorParams) -> f64) {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..p.len() {
        let mut a = p.clone();
        let mut b = p.clone();
        a.values[k] += h;
        b.values[k] -= h;
        let fd = (f(&a) - f(&b)) / (2.0 * h);
        let err = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-3);
        worst = worst.max(err);
    }
    assert!(worst <= 1e-4, "worst relative gradient error {worst:e}");
}

/// Fixed analytic critic used by the toy problems.
struct Quadratic {
    target: f64,
}

impl QFunction for Quadratic {
    fn q(&self, _s: &DMatrix<f64>, a: &DMatrix<f64>) -> Vec<f64> {
        a.column_iter().map(|c| -c.iter().map(|x| (x - self.target).powi(2)).sum::<f64>()).collect()
    }
    fn q_and_action_grad(&self, s: &DMatrix<f64>, a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        (self.q(s, a), a.map(|x| -2.0 * (x - self.target)))
    }
}

struct Constant(f64);

impl QFunction for Constant {
    fn q(&self, s: &DMatrix<f64>, _a: &DMatrix<f64>) -> Vec<f64> {
        vec![self.0; s.ncols()]
    }
    fn q_and_action_grad(&self, s: &DMatrix<f64>, a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        (self.q(s, a), DMatrix::zeros(a.nrows(), a.ncols()))
    }
}

// ---------------------------------------------------------------- networks

#[test]
fn backprop_matches_finite_differences() {
    let mut r = rng(1);
    for out in [Activation::Identity, Activation::Tanh] {
        let net = ApproximatorParams::init(Architecture::mlp(3, &[5, 4], 2, out), &mut r);
        // a non-trivial output layer so every parameter matters
        let mut net = net;
        let n = net.len();
        for v in &mut net.values[n - 10..] {
            *v = r.random_range(-0.5..0.5);
        }
        let x = rand_mat(3, 6, &mut r);
        let w = rand_mat(2, 6, &mut r);
        let loss = |p: &ApproximatorParams| p.forward(&x).component_mul(&w).sum();
        let trace = net.forward_trace(&x);
        let (g, gin) = net.backward(&trace, &w);
        fd_check(&net, &g, loss);
        // input gradient
        for i in 0..3 {
            for j in 0..6 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[(i, j)] += 1e-6;
                xm[(i, j)] -= 1e-6;
                let fd = (net.forward(&xp).component_mul(&w).sum() - net.forward(&xm).component_mul(&w).sum()) / 2e-6;
                assert!((fd - gin[(i, j)]).abs() <= 1e-6 * fd.abs().max(1.0));
            }
        }
    }
}

#[test]
fn parameter_count_follows_the_descriptor() {
    let arch = Architecture::mlp(7, &[64, 64], 8, Activation::Tanh);
    assert_eq!(arch.param_count(), 7 * 64 + 64 + 64 * 64 + 64 + 64 * 8 + 8);
    let net = ApproximatorParams::init(arch, &mut rng(0));
    assert_eq!(net.len(), net.arch.param_count());
}

#[test]
fn copy_then_update_leaves_the_source() {
    let net = ApproximatorParams::init(Architecture::mlp(2, &[3], 1, Activation::Identity), &mut rng(0));
    let snapshot = net.clone();
    let mut copy = net.clone();
    copy.axpy(0.5, &vec![1.0; copy.len()]);
    assert_eq!(net, snapshot);
    assert_ne!(copy, net);
}

#[test]
fn soft_update_examples() {
    let arch = Architecture::mlp(2, &[3], 1, Activation::Identity);
    let online = ApproximatorParams::init(arch.clone(), &mut rng(1));
    let target = ApproximatorParams::init(arch, &mut rng(2));
    let mut t = target.clone();
    t.soft_update(&online, 1.0);
    assert_eq!(t, online);
    let mut t = target.clone();
    t.soft_update(&online, 0.0);
    assert_eq!(t, target);
    let mut t = target.clone();
    t.soft_update(&online, 0.5);
    for k in 0..t.len() {
        assert!((t.values[k] - 0.5 * (online.values[k] + target.values[k])).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn target_lag_shrinks_monotonically(seed in 0u64..1000, tau in 0.001f64..0.999) {
        let arch = Architecture::mlp(3, &[4], 2, Activation::Tanh);
        let online = ApproximatorParams::init(arch.clone(), &mut rng(seed));
        let mut target = ApproximatorParams::init(arch, &mut rng(seed + 1));
        let mut prev = target.distance(&online);
        for _ in 0..20 {
            target.soft_update(&online, tau);
            let d = target.distance(&online);
            prop_assert!(d <= (1.0 - tau) * prev * (1.0 + 1e-9) + 1e-12);
            prev = d;
        }
    }
}

// ---------------------------------------------------------------- deterministic head

fn toy_critic(p: [f64; 2]) -> ApproximatorParams {
    ApproximatorParams { arch: Architecture::mlp(1, &[], 1, Activation::Identity), values: p.to_vec() }
}

#[test]
fn critic_loss_examples() {
    // batch of one, residual 0.5
    let net = toy_critic([1.0, 0.0]);
    let x = DMatrix::from_element(1, 1, 2.0);
    let (loss, _) = mse_loss_grad(&net, &x, &[1.5]);
    assert_eq!(loss, 0.25);
    // q ≡ y
    let x = DMatrix::from_row_slice(1, 3, &[0.1, -0.4, 2.0]);
    let y: Vec<f64> = x.iter().map(|v| 1.0 * v).collect();
    let (loss, g) = mse_loss_grad(&net, &x, &y);
    assert_eq!(loss, 0.0);
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn critic_gradient_on_two_parameter_toy() {
    let net = toy_critic([0.7, -0.2]);
    let x = DMatrix::from_row_slice(1, 4, &[0.3, -1.0, 0.5, 2.0]);
    let y = [0.1, 0.4, -0.3, 1.2];
    let (_, g) = mse_loss_grad(&net, &x, &y);
    fd_check(&net, &g, |p| mse_loss_grad(p, &x, &y).0);
}

#[test]
fn critic_gradient_on_two_layer_network() {
    let mut r = rng(3);
    let net = ApproximatorParams::init(Architecture::mlp(4, &[6, 5], 1, Activation::Identity), &mut r);
    let x = rand_mat(4, 8, &mut r);
    let y: Vec<f64> = (0..8).map(|_| r.random_range(-1.0..1.0)).collect();
    let (_, g) = mse_loss_grad(&net, &x, &y);
    fd_check(&net, &g, |p| mse_loss_grad(p, &x, &y).0);
}

#[test]
fn critic_step_descends_and_rejects_divergence() {
    let mut net = toy_critic([0.7, -0.2]);
    let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, 2);
    let s = DMatrix::zeros(0, 3);
    let a = DMatrix::from_row_slice(1, 3, &[0.3, -1.0, 0.5]);
    let y = [1.0, 0.0, -1.0];
    let l0 = ddpg::critic_step(&mut net, &mut opt, &s, &a, &y).unwrap();
    let l1 = mse_loss_grad(&net, &a, &y).0;
    assert!(l1 < l0);
    let err = ddpg::critic_step(&mut net, &mut opt, &s, &a, &[f64::NAN, 0.0, 0.0]).unwrap_err();
    assert!(matches!(err, AgentError::Diverged(_)));
}

fn ddpg_nets(d: usize, m: usize, seed: u64) -> DdpgNets {
    let mut r = rng(seed);
    let actor = ApproximatorParams::init(Architecture::mlp(d, &[5], m, Activation::Tanh), &mut r);
    let critic = ApproximatorParams::init(Architecture::mlp(d + m, &[5], 1, Activation::Identity), &mut r);
    DdpgNets { target_actor: actor.clone(), target_critic: critic.clone(), actor, critic }
}

#[test]
fn ddpg_target_examples() {
    let mut nets = ddpg_nets(2, 3, 0);
    // target critic outputs 2 everywhere
    nets.target_critic = ApproximatorParams::zeros(Architecture::mlp(5, &[], 1, Activation::Identity));
    *nets.target_critic.values.last_mut().unwrap() = 2.0;
    let s = DMatrix::from_row_slice(2, 2, &[0.1, 0.5, -0.3, 0.2]);
    assert_eq!(ddpg_targets(&nets, &[1.0, 0.0], &s, 0.9), vec![2.8, 1.8]);
    let nets = ddpg_nets(2, 3, 1);
    assert_eq!(ddpg_targets(&nets, &[0.3, -0.7], &s, 0.0), vec![0.3, -0.7]);
    // rows are independent
    let y = ddpg_targets(&nets, &[0.3, -0.7], &s, 0.95);
    let mut sw = s.clone();
    sw.swap_columns(0, 1);
    let ys = ddpg_targets(&nets, &[-0.7, 0.3], &sw, 0.95);
    assert_eq!((y[0], y[1]), (ys[1], ys[0]));
}

#[test]
fn ddpg_targets_ignore_online_networks() {
    let nets = ddpg_nets(2, 2, 4);
    let s = rand_mat(2, 5, &mut rng(9));
    let r = [0.1, 0.2, 0.3, 0.4, 0.5];
    let mut other = nets.clone();
    other.actor = ApproximatorParams::init(other.actor.arch.clone(), &mut rng(77));
    other.critic = ApproximatorParams::init(other.critic.arch.clone(), &mut rng(78));
    assert_eq!(ddpg_targets(&nets, &r, &s, 0.9), ddpg_targets(&other, &r, &s, 0.9));
}

#[test]
fn actor_gradient_matches_finite_differences() {
    let nets = ddpg_nets(3, 2, 5);
    let mut critic = nets.critic.clone();
    let n = critic.len();
    for v in &mut critic.values[n - 6..] {
        *v = 0.4;
    }
    let s = rand_mat(3, 7, &mut rng(6));
    let (_, g) = actor_objective_grad(&nets.actor, &critic, &s);
    fd_check(&nets.actor, &g, |p| actor_objective_grad(p, &critic, &s).0);
}

#[test]
fn constant_critic_gives_zero_actor_gradient() {
    let nets = ddpg_nets(3, 2, 5);
    let s = rand_mat(3, 4, &mut rng(6));
    let (_, g) = actor_objective_grad(&nets.actor, &Constant(1.7), &s);
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn deterministic_actor_reaches_the_critic_optimum() {
    let mut actor = ApproximatorParams::init(Architecture::mlp(1, &[4], 1, Activation::Identity), &mut rng(2));
    let mut opt = Optimizer::new(OptimizerKind::Adam, 0.05, actor.len());
    let s = DMatrix::from_element(1, 8, 1.0);
    let critic = Quadratic { target: 3.0 };
    let mut steps = 0;
    while steps < 500 {
        ddpg::actor_step(&mut actor, &mut opt, &critic, &s).unwrap();
        steps += 1;
        if (actor.forward_one(&[1.0])[0] - 3.0).abs() < 1e-2 {
            break;
        }
    }
    assert!((actor.forward_one(&[1.0])[0] - 3.0).abs() < 1e-2, "after {steps} steps");
}

#[test]
fn actor_objective_does_not_decrease_for_small_steps() {
    let nets = ddpg_nets(3, 2, 8);
    let s = rand_mat(3, 16, &mut rng(8));
    let mut actor = nets.actor.clone();
    let mut lr = 1e-2;
    let mut opt = Optimizer::new(OptimizerKind::Sgd, lr, actor.len());
    let mut last = actor_objective_grad(&actor, &nets.critic, &s).0;
    for _ in 0..20 {
        // backtrack until the step is an ascent step
        loop {
            let mut trial = actor.clone();
            opt.lr = lr;
            ddpg::actor_step(&mut trial, &mut opt, &nets.critic, &s).unwrap();
            let j = actor_objective_grad(&trial, &nets.critic, &s).0;
            if j >= last {
                actor = trial;
                last = j;
                break;
            }
            lr *= 0.5;
            assert!(lr > 1e-12);
        }
    }
}

// ---------------------------------------------------------------- stochastic head

fn sac_nets(d: usize, k: usize, seed: u64) -> SacNets {
    let mut r = rng(seed);
    let actor = ApproximatorParams::init(Architecture::mlp(d, &[6], 2 * k, Activation::Identity), &mut r);
    let mut c = || ApproximatorParams::init(Architecture::mlp(d + k, &[6], 1, Activation::Identity), &mut r);
    let (c1, c2) = (c(), c());
    SacNets { actor, target_critic1: c1.clone(), target_critic2: c2.clone(), critic1: c1, critic2: c2 }
}

fn const_net(input: usize, value: f64) -> ApproximatorParams {
    let mut n = ApproximatorParams::zeros(Architecture::mlp(input, &[], 1, Activation::Identity));
    *n.values.last_mut().unwrap() = value;
    n
}

#[test]
fn sac_target_takes_the_smaller_critic() {
    let mut nets = sac_nets(2, 2, 0);
    nets.target_critic1 = const_net(4, 1.0);
    nets.target_critic2 = const_net(4, 2.0);
    let s = rand_mat(2, 3, &mut rng(1));
    let eps = rand_mat(2, 3, &mut rng(2));
    let y = sac_targets(&nets, &[0.0; 3], &s, &eps, 1.0, 0.0);
    assert_eq!(y, vec![1.0; 3]);
    // λ > 0 subtracts λ·log π of the sampled next action
    let p = policy_sample(&nets.actor, &s, &eps);
    let y = sac_targets(&nets, &[0.5; 3], &s, &eps, 0.9, 0.2);
    for l in 0..3 {
        assert!((y[l] - (0.5 + 0.9 * (1.0 - 0.2 * p.log_prob[l]))).abs() < 1e-12);
    }
}

#[test]
fn sac_critic_losses_vanish_on_exact_fit() {
    let s = rand_mat(2, 4, &mut rng(3));
    let a = rand_mat(2, 4, &mut rng(4));
    let c = const_net(4, 0.6);
    let (l, g) = mse_loss_grad(&c, &ddpg_stack(&s, &a), &[0.6; 4]);
    assert_eq!(l, 0.0);
    assert!(g.iter().all(|&v| v == 0.0));
}

fn ddpg_stack(s: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(s.nrows() + a.nrows(), s.ncols());
    x.rows_mut(0, s.nrows()).copy_from(s);
    x.rows_mut(s.nrows(), a.nrows()).copy_from(a);
    x
}

#[test]
fn log_density_matches_change_of_variables() {
    let nets = sac_nets(2, 3, 5);
    let s = rand_mat(2, 4, &mut rng(6));
    let eps = rand_mat(3, 4, &mut rng(7));
    let p = policy_sample(&nets.actor, &s, &eps);
    for j in 0..4 {
        let mut lp = 0.0;
        for k in 0..3 {
            let sigma = p.log_std[(k, j)].exp();
            let u = p.mean[(k, j)] + sigma * eps[(k, j)];
            let gauss = (-0.5 * ((u - p.mean[(k, j)]) / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            lp += (gauss / (1.0 - u.tanh().powi(2))).ln();
        }
        assert!((lp - p.log_prob[j]).abs() < 1e-9, "{lp} vs {}", p.log_prob[j]);
    }
}

#[test]
fn zero_spread_sample_equals_the_mean() {
    let mut nets = sac_nets(2, 2, 5);
    // force the log-σ outputs far below the clamp
    let arch = nets.actor.arch.clone();
    let n = nets.actor.len();
    let k = 2;
    for o in 0..k {
        nets.actor.values[n - k + o] = -100.0;
    }
    let _ = arch;
    let s = rand_mat(2, 3, &mut rng(1));
    let eps = rand_mat(2, 3, &mut rng(2));
    let p = policy_sample(&nets.actor, &s, &eps);
    let m = policy_mean(&nets.actor, &s);
    assert!(p.log_std.iter().all(|&v| v == sac::LOG_STD_MIN));
    for (a, b) in p.action.iter().zip(m.iter()) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn policy_gradient_matches_finite_differences() {
    let nets = sac_nets(3, 2, 11);
    let s = rand_mat(3, 5, &mut rng(12));
    let eps = rand_mat(2, 5, &mut rng(13));
    for lambda in [0.0, 0.2, 1.0] {
        let (_, g) = actor_loss_grad(&nets.actor, (&nets.critic1, &nets.critic2), &s, &eps, lambda);
        fd_check(&nets.actor, &g, |p| actor_loss_grad(p, (&nets.critic1, &nets.critic2), &s, &eps, lambda).0);
    }
}

#[test]
fn twin_critic_order_is_irrelevant() {
    let nets = sac_nets(3, 2, 14);
    let s = rand_mat(3, 5, &mut rng(15));
    let eps = rand_mat(2, 5, &mut rng(16));
    let (l12, _) = actor_loss_grad(&nets.actor, (&nets.critic1, &nets.critic2), &s, &eps, 0.3);
    let (l21, _) = actor_loss_grad(&nets.actor, (&nets.critic2, &nets.critic1), &s, &eps, 0.3);
    assert_eq!(l12, l21);
    let mut swapped = nets.clone();
    std::mem::swap(&mut swapped.target_critic1, &mut swapped.target_critic2);
    let r = [0.1; 5];
    assert_eq!(sac_targets(&nets, &r, &s, &eps, 0.9, 0.3), sac_targets(&swapped, &r, &s, &eps, 0.9, 0.3));
}

#[test]
fn no_entropy_and_flat_critics_give_zero_policy_gradient() {
    let nets = sac_nets(3, 2, 17);
    let s = rand_mat(3, 5, &mut rng(18));
    let eps = rand_mat(2, 5, &mut rng(19));
    let (_, g) = actor_loss_grad(&nets.actor, (&Constant(1.0), &Constant(2.0)), &s, &eps, 0.0);
    assert!(g.iter().all(|&v| v == 0.0));
}

/// Trains a one-dimensional squashed Gaussian against a fixed quadratic
/// critic; returns (tanh(mean), σ).
fn train_toy_policy(lambda: f64, target: f64, steps: usize) -> (f64, f64) {
    let mut actor = ApproximatorParams::zeros(Architecture::mlp(1, &[], 2, Activation::Identity));
    let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, actor.len());
    let critic = Quadratic { target };
    let s = DMatrix::from_element(1, 256, 1.0);
    let mut r = rng(21);
    for _ in 0..steps {
        let eps = DMatrix::from_fn(1, 256, |_, _| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut r));
        sac::actor_step(&mut actor, &mut opt, (&critic, &critic), &s, &eps, lambda).unwrap();
    }
    let out = actor.forward_one(&[1.0]);
    (out[0].tanh(), out[1].exp())
}

#[test]
fn policy_mean_reaches_the_critic_argmax() {
    let (mean, _) = train_toy_policy(1e-4, 0.5, 3000);
    assert!((mean - 0.5).abs() < 1e-2, "mean action {mean}");
}

#[test]
fn larger_entropy_weight_widens_the_policy() {
    let (_, s1) = train_toy_policy(0.05, 0.2, 3000);
    let (_, s2) = train_toy_policy(0.1, 0.2, 3000);
    assert!(s2 > s1, "σ {s1} → {s2}");
}

// ---------------------------------------------------------------- agent

fn tiny_params() -> SystemParams {
    SystemParams::uniform(2, 4, 3, 1, 1, 1.0, 1e-15)
}

fn tiny_hyper(seed: u64) -> AgentHyper {
    AgentHyper { hidden: vec![32, 32], batch_size: 16, buffer_capacity: 5000, seed, ..Default::default() }
}

fn tiny_env(t: usize) -> StarRisEnv {
    StarRisEnv::new(EnvConfig::new(tiny_params(), EhModel::NonLinear(EhParams::table_one()), t)).unwrap()
}

fn tiny_agent(env: &StarRisEnv, seed: u64) -> MdsAgent {
    MdsAgent::new(env.state_dim(), env.action_m(), tiny_hyper(seed)).unwrap()
}

#[test]
fn hyperparameter_validation() {
    for h in [
        AgentHyper { discount: 0.0, ..Default::default() },
        AgentHyper { discount: 1.2, ..Default::default() },
        AgentHyper { entropy_weight: -0.1, ..Default::default() },
        AgentHyper { hidden: vec![], ..Default::default() },
        AgentHyper { batch_size: 0, ..Default::default() },
    ] {
        assert!(MdsAgent::new(10, 2, h).is_err());
    }
    let d = AgentHyper::default();
    assert_eq!((d.discount, d.tau, d.entropy_weight, d.batch_size), (0.95, 0.005, 0.2, 64));
    assert_eq!((d.lr_critic, d.lr_actor, d.buffer_capacity), (1e-3, 1e-4, 100_000));
    assert_eq!(d.hidden, vec![256, 256]);
}

#[test]
fn targets_start_as_copies() {
    let a = MdsAgent::new(10, 3, tiny_hyper(0)).unwrap();
    assert_eq!(a.ddpg.actor, a.ddpg.target_actor);
    assert_eq!(a.ddpg.critic, a.ddpg.target_critic);
    assert_eq!(a.sac.critic1, a.sac.target_critic1);
    assert_eq!(a.sac.critic2, a.sac.target_critic2);
    assert_ne!(a.sac.critic1, a.sac.critic2);
    assert_eq!(a.sac.actor.arch.output_dim(), 2 * 12);
}

#[test]
fn action_selection_contract() {
    let mut a = MdsAgent::new(10, 3, tiny_hyper(0)).unwrap();
    let s: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    let g1 = a.select_action(&s, false).unwrap();
    let g2 = a.select_action(&s, false).unwrap();
    assert_eq!(g1, g2);
    assert_eq!((g1.discrete_raw.len(), g1.continuous_raw.len()), (3, 12));
    let e = a.select_action(&s, true).unwrap();
    assert!(e.discrete_raw.iter().chain(&e.continuous_raw).all(|v| v.abs() <= 1.0));
    a.noise_std = 0.0;
    let e = a.select_action(&s, true).unwrap();
    assert_eq!(e.discrete_raw, g1.discrete_raw);
    assert!(a.select_action(&s[..9], true).is_err());
}

fn filled_buffer(env: &mut StarRisEnv, agent: &mut MdsAgent, n: usize) -> ReplayBuffer {
    let mut buf = ReplayBuffer::new(1000);
    let mut s = env.reset(&TaskSpec::new(0, 1, 1)).unwrap();
    for _ in 0..n {
        let a = agent.select_action(&s.obs, true).unwrap();
        let (next, r, _) = env.step(&a).unwrap();
        buf.push(Transition { state: s.obs, action: a, reward: r, next_state: next.obs.clone() });
        s = next;
    }
    buf
}

#[test]
fn updates_are_isolated_per_network() {
    let mut env = tiny_env(50);
    let mut agent = tiny_agent(&env, 3);
    let buf = filled_buffer(&mut env, &mut agent, 40);
    let batch = Batch::from_transitions(&buf.iter().take(16).collect::<Vec<_>>());
    let noise = agent.draw_noise(16);
    let (g, _) = agent.gradients(&batch, &noise).unwrap();
    let zero = |v: &Vec<f64>| vec![0.0; v.len()];
    let critic_only = AgentGrads {
        actor: zero(&g.actor),
        critic: g.critic.clone(),
        sac_actor: zero(&g.sac_actor),
        critic1: g.critic1.clone(),
        critic2: g.critic2.clone(),
    };
    let fresh = agent.clone();
    let before = agent.clone();
    agent.apply(&critic_only);
    assert_eq!(agent.ddpg.actor, before.ddpg.actor);
    assert_eq!(agent.sac.actor, before.sac.actor);
    assert_ne!(agent.ddpg.critic, before.ddpg.critic);
    let actor_only = AgentGrads {
        actor: g.actor.clone(),
        critic: zero(&g.critic),
        sac_actor: g.sac_actor.clone(),
        critic1: zero(&g.critic1),
        critic2: zero(&g.critic2),
    };
    // fresh optimiser moments, so the critics see exactly zero steps
    let mut agent = fresh;
    let before = agent.clone();
    agent.apply(&actor_only);
    assert_eq!(agent.ddpg.critic, before.ddpg.critic);
    assert_eq!(agent.sac.critic1, before.sac.critic1);
    assert_eq!(agent.sac.critic2, before.sac.critic2);
    assert_ne!(agent.ddpg.actor, before.ddpg.actor);
    // computing gradients alone changes nothing
    let frozen = agent.clone();
    agent.gradients(&batch, &noise).unwrap();
    assert!(agent.same_parameters(&frozen));
}

#[test]
fn zero_episodes_returns_the_untrained_agent() {
    let mut env = tiny_env(5);
    let agent = tiny_agent(&env, 0);
    let init = agent.clone();
    let (log, out) = mds_train(&mut env, &ClarabelBackend::default(), agent, &TaskSpec::new(0, 1, 1), &TrainOptions::new(0)).unwrap();
    assert!(log.records.is_empty());
    assert!(out.same_parameters(&init));
}

#[test]
fn mismatched_agent_is_rejected() {
    let mut env = tiny_env(5);
    let agent = MdsAgent::new(env.state_dim() + 1, env.action_m(), tiny_hyper(0)).unwrap();
    let err = mds_train(&mut env, &ClarabelBackend::default(), agent, &TaskSpec::new(0, 1, 1), &TrainOptions::new(1));
    assert!(matches!(err, Err(AgentError::Usage(_))));
}

#[test]
fn training_is_bit_reproducible() {
    let run = || {
        let mut env = tiny_env(8);
        let agent = tiny_agent(&env, 42);
        let (log, agent) =
            mds_train(&mut env, &ClarabelBackend::default(), agent, &TaskSpec::new(0, 5, 6), &TrainOptions::new(6)).unwrap();
        (log, Checkpoint::from_agent(&agent, 6).digest())
    };
    let (l1, d1) = run();
    let (l2, d2) = run();
    assert_eq!(l1, l2);
    assert_eq!(l1.digest(), l2.digest());
    assert_eq!(d1, d2);
    assert_eq!(l1.records.len(), 6);
    assert!(l1.records.iter().skip(2).all(|r| r.updates > 0));
    assert_eq!(TrainLog::from_jsonl(&l1.to_jsonl()).unwrap(), l1);
}

#[test]
fn checkpoint_round_trip_and_tamper_detection() {
    let env = tiny_env(5);
    let agent = tiny_agent(&env, 7);
    let cp = Checkpoint::from_agent(&agent, 0);
    let dir = std::env::temp_dir().join(format!("starris-cp-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cp.json");
    cp.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, cp);
    assert!(back.to_agent().unwrap().same_parameters(&agent));
    assert_eq!(back.networks.len(), 9);

    let text = std::fs::read_to_string(&path).unwrap();
    let tampered = text.replacen("\"values\":[", "\"values\":[1.0,", 1);
    std::fs::write(&path, tampered).unwrap();
    assert!(matches!(Checkpoint::load(&path), Err(AgentError::Checkpoint(_))));

    let mut wrong = cp.clone();
    wrong.version = 99;
    assert!(wrong.validate().is_err());
    let mut missing = cp;
    missing.networks.remove("omega2_bar");
    assert!(missing.to_agent().is_err());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn snapshots_are_written_at_the_configured_cadence() {
    let mut env = tiny_env(4);
    let agent = tiny_agent(&env, 1);
    let dir = std::env::temp_dir().join(format!("starris-snap-{}", std::process::id()));
    let opts = TrainOptions { snapshot_every: Some(2), snapshot_dir: Some(dir.clone()), ..TrainOptions::new(5) };
    mds_train(&mut env, &ClarabelBackend::default(), agent, &TaskSpec::new(0, 1, 1), &opts).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, vec!["checkpoint_e00002.json", "checkpoint_e00004.json"]);
    assert_eq!(Checkpoint::load(&dir.join(&names[1])).unwrap().episodes_trained, 4);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn infeasible_convex_stage_is_tagged_not_fatal() {
    let mut params = tiny_params();
    params.gamma_min_r = vec![1e6];
    let mut env = StarRisEnv::new(EnvConfig::new(params, EhModel::NonLinear(EhParams::table_one()), 3)).unwrap();
    let agent = tiny_agent(&env, 0);
    let (log, _) =
        mds_train(&mut env, &ClarabelBackend::default(), agent, &TaskSpec::new(0, 1, 1), &TrainOptions::new(2)).unwrap();
    assert!(log.records.iter().all(|r| r.infeasible && r.convex_status == "fallback"));
}

#[test]
fn tiny_instance_learning_is_directional() {
    // M = 4, N_t = 2, 1+1 users, 300 episodes
    let params = SystemParams::uniform(2, 4, 3, 1, 1, 1.0, 1e-15);
    let mut env = StarRisEnv::new(EnvConfig::new(params, EhModel::NonLinear(EhParams::table_one()), 10)).unwrap();
    let hyper = AgentHyper { hidden: vec![64, 64], batch_size: 32, buffer_capacity: 10_000, seed: 5, ..Default::default() };
    let agent = MdsAgent::new(env.state_dim(), env.action_m(), hyper).unwrap();
    let (log, _) =
        mds_train(&mut env, &ClarabelBackend::default(), agent, &TaskSpec::new(0, 3, 4), &TrainOptions::new(300)).unwrap();
    let first = log.mean_reward(0..30);
    let last = log.mean_reward(270..300);
    assert!(last > first, "first 10% {first}, last 10% {last}");
}
