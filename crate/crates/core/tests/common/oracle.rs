//! Independent scalar-loop expansions of the physical-layer formulas.

use super::{c, Instance};
use num_complex::Complex64;
use starris_core::model::Side;

/// Scalar expansion of h̄^H_n = conj(hd_n) + Σ_m conj(h_m)·a_m f_m √β_m e^{jφ_m}·G_mn.
pub fn oracle_hbar_h(inst: &Instance, side: Side, k: usize) -> Vec<Complex64> {
    let (g, m, nt) = (&inst.ch.g_bs_ris, inst.params.m_elements, inst.params.n_tx);
    let mut out = Vec::new();
    for n in 0..nt {
        let mut acc = inst.ch.direct(side)[k][n].conj();
        for mm in 0..m {
            let f = if inst.ris.on()[mm] { 1.0 } else { 0.0 };
            let amp = inst.ris.gain()[mm] * f * inst.ris.beta(side)[mm].sqrt();
            let ph = inst.ris.phi(side)[mm];
            let coef = c(amp * ph.cos(), amp * ph.sin());
            acc += inst.ch.ris(side)[k][mm].conj() * coef * g.get(mm, n);
        }
        out.push(acc);
    }
    out
}

pub fn oracle_gain(hh: &[Complex64], w: &[Complex64]) -> f64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for n in 0..hh.len() {
        re += hh[n].re * w[n].re - hh[n].im * w[n].im;
        im += hh[n].re * w[n].im + hh[n].im * w[n].re;
    }
    re * re + im * im
}

pub fn oracle_ris_norm(inst: &Instance, side: Side, k: usize) -> f64 {
    let mut s = 0.0;
    for mm in 0..inst.params.m_elements {
        if inst.ris.on()[mm] {
            s += inst.ch.ris(side)[k][mm].norm_sqr() * inst.ris.gain()[mm].powi(2) * inst.ris.beta(side)[mm];
        }
    }
    s
}

pub fn sigma_z(inst: &Instance, side: Side) -> f64 {
    match side {
        Side::R => inst.params.sigma2_ris_r,
        Side::T => inst.params.sigma2_ris_t,
    }
}

pub fn oracle_sinr(inst: &Instance, side: Side, k: usize) -> f64 {
    let hh = oracle_hbar_h(inst, side, k);
    let ws = inst.bf.side(side);
    let rho = inst.ps.side(side)[k];
    let mut interf = 0.0;
    for (l, w) in ws.iter().enumerate() {
        if l != k {
            interf += oracle_gain(&hh, w);
        }
    }
    let noise = sigma_z(inst, side) * oracle_ris_norm(inst, side, k) + inst.params.sigma2_awgn(side)[k];
    rho * oracle_gain(&hh, &ws[k]) / (rho * (interf + noise) + inst.params.delta2(side)[k])
}

pub fn oracle_rf(inst: &Instance, side: Side, k: usize) -> f64 {
    let hh = oracle_hbar_h(inst, side, k);
    let total: f64 = inst.bf.side(side).iter().map(|w| oracle_gain(&hh, w)).sum();
    (1.0 - inst.ps.side(side)[k]) * (total + sigma_z(inst, side) * oracle_ris_norm(inst, side, k))
}

pub fn oracle_p_out(inst: &Instance) -> f64 {
    let (g, m, nt) = (&inst.ch.g_bs_ris, inst.params.m_elements, inst.params.n_tx);
    let mut p = 0.0;
    for side in Side::BOTH {
        for w in inst.bf.side(side) {
            for mm in 0..m {
                if !inst.ris.on()[mm] {
                    continue;
                }
                let mut gw = c(0.0, 0.0);
                for n in 0..nt {
                    gw += g.get(mm, n) * w[n];
                }
                p += inst.ris.gain()[mm].powi(2) * inst.ris.beta(side)[mm] * gw.norm_sqr();
            }
        }
        for mm in 0..m {
            if inst.ris.on()[mm] {
                p += sigma_z(inst, side) * inst.ris.gain()[mm].powi(2) * inst.ris.beta(side)[mm];
            }
        }
    }
    p
}

pub fn oracle_total(inst: &Instance) -> f64 {
    let p = &inst.params;
    let mut tx = 0.0;
    for w in inst.bf.w_r.iter().chain(&inst.bf.w_t) {
        for x in w {
            tx += x.re * x.re + x.im * x.im;
        }
    }
    let on = inst.ris.on().iter().filter(|f| **f).count() as f64;
    tx + p.p_cir_bs + (p.u_r + p.u_t) as f64 * p.p_cir_user + on * (p.p_c + p.p_dc) + p.zeta * oracle_p_out(inst)
}

