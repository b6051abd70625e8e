#![allow(dead_code)]

pub mod oracle;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starris_core::linalg::CMatrix;
use starris_core::model::{BeamformingSet, ChannelSet, PowerSplitSet, StarRisConfig, SystemParams};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rvec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Complex64> {
    (0..n).map(|_| c(rng.random_range(-1.0..1.0) * scale, rng.random_range(-1.0..1.0) * scale)).collect()
}

/// A random small instance with O(1)-scaled channels and noise levels chosen
/// so that every term of the SINR denominator matters.
pub struct Instance {
    pub params: SystemParams,
    pub ch: ChannelSet,
    pub ris: StarRisConfig,
    pub bf: BeamformingSet,
    pub ps: PowerSplitSet,
}

pub fn random_instance(seed: u64, max_m: usize, max_nt: usize, max_users: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=max_m);
    let nt = rng.random_range(1..=max_nt);
    let u_r = rng.random_range(0..=max_users);
    let u_t = rng.random_range(if u_r == 0 { 1 } else { 0 }..=max_users);
    let mut params = SystemParams::uniform(nt, m, m, u_r, u_t, 1.0, 0.0);
    params.sigma2_ris_r = rng.random_range(0.01..0.2);
    params.sigma2_ris_t = rng.random_range(0.01..0.2);
    for v in params.sigma2_awgn_r.iter_mut().chain(params.sigma2_awgn_t.iter_mut()) {
        *v = rng.random_range(0.01..0.2);
    }
    for v in params.delta2_r.iter_mut().chain(params.delta2_t.iter_mut()) {
        *v = rng.random_range(0.01..0.2);
    }
    let g = CMatrix::from_fn(m, nt, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let ch = ChannelSet {
        g_bs_ris: g,
        h_direct_r: (0..u_r).map(|_| rvec(&mut rng, nt, 0.5)).collect(),
        h_direct_t: (0..u_t).map(|_| rvec(&mut rng, nt, 0.5)).collect(),
        h_ris_r: (0..u_r).map(|_| rvec(&mut rng, m, 1.0)).collect(),
        h_ris_t: (0..u_t).map(|_| rvec(&mut rng, m, 1.0)).collect(),
    };
    let ris = StarRisConfig::new(
        (0..m).map(|_| rng.random_range(0.0..params.a_max)).collect(),
        (0..m).map(|_| rng.random_bool(0.7)).collect(),
        (0..m).map(|_| rng.random_range(0.0..1.0)).collect(),
        (0..m).map(|_| rng.random_range(0.0..6.28)).collect(),
        (0..m).map(|_| rng.random_range(0.0..6.28)).collect(),
    )
    .unwrap();
    let bf = BeamformingSet {
        w_r: (0..u_r).map(|_| rvec(&mut rng, nt, 1.0)).collect(),
        w_t: (0..u_t).map(|_| rvec(&mut rng, nt, 1.0)).collect(),
    };
    let ps = PowerSplitSet {
        rho_r: (0..u_r).map(|_| rng.random_range(0.05..0.95)).collect(),
        rho_t: (0..u_t).map(|_| rng.random_range(0.05..0.95)).collect(),
    };
    Instance { params, ch, ris, bf, ps }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
