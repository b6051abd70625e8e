//! Conic model of the surrogate sub-problem and of the phase-1 feasibility
//! problem.
//!
//! Variables: each W_l (N_t² reals: diagonal, then Re/Im of the strict upper
//! triangle), q_k = 1/ρ_k ≥ 1, an exponential-cone epigraph u_k for every log
//! term of f, and t_k ≥ 1/(q_k − 1) for users with an energy floor, so that
//! P(E_min)/(1 − ρ) = P(E_min)(1 + 1/(q − 1)) ≤ P(E_min)(1 + t).

use num_complex::Complex64;
use std::f64::consts::{LN_2, SQRT_2};

use super::conic::{svec_index, AffineRow, Cone, ConicBackend, ConicProblem, ConicStatus};
use super::dc::{eval_f, lifted_output_power, lifted_power, lifted_transmit_power, SdpIterate, Surrogate};
use super::lifted::{tr_re, HMat, LiftedConstants};
use super::ConvexError;
use crate::model::Side;

/// Relative tightening applied to C1–C6 inside the conic model so that the
/// rank-one vector recovered afterwards still passes the model's checks.
pub const SAFETY: f64 = 1e-5;

/// Offsets of each variable group.
struct Layout {
    n: usize,
    users: usize,
    t_index: Vec<Option<usize>>,
    n_vars: usize,
}

impl Layout {
    fn new(lc: &LiftedConstants, with_u: bool) -> Self {
        let n = lc.n_tx;
        let users = lc.n_users();
        let mut next = users * n * n + users + if with_u { users } else { 0 };
        let t_index = lc
            .users
            .iter()
            .map(|u| {
                (u.rf_floor > 0.0).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        Self { n, users, t_index, n_vars: next }
    }

    fn w(&self, u: usize) -> usize {
        u * self.n * self.n
    }

    fn q(&self, u: usize) -> usize {
        self.users * self.n * self.n + u
    }

    fn u(&self, u: usize) -> usize {
        self.users * self.n * self.n + self.users + u
    }

    fn diag(&self, i: usize) -> usize {
        i
    }

    /// (Re, Im) offsets of W_ij for i < j.
    fn pair(&self, i: usize, j: usize) -> (usize, usize) {
        let n = self.n;
        // index of (i, j) among strictly-upper pairs in row-major order
        let p = i * n - i * (i + 1) / 2 + (j - i - 1);
        (n + 2 * p, n + 2 * p + 1)
    }
}

/// Coefficients of Re tr(M W_u) in terms of the flat variables.
fn trace_coeffs(lay: &Layout, m: &HMat, u: usize, scale: f64) -> Vec<(usize, f64)> {
    let base = lay.w(u);
    let mut out = Vec::with_capacity(lay.n * lay.n);
    for i in 0..lay.n {
        out.push((base + lay.diag(i), scale * m[(i, i)].re));
        for j in i + 1..lay.n {
            let (a, b) = lay.pair(i, j);
            out.push((base + a, 2.0 * scale * m[(i, j)].re));
            out.push((base + b, 2.0 * scale * m[(i, j)].im));
        }
    }
    out
}

/// PSD constraint on the real embedding [[A, −B], [B, A]] of W_u.
fn psd_rows(lay: &Layout, u: usize) -> Vec<AffineRow> {
    let n = lay.n;
    let base = lay.w(u);
    let dim = 2 * n;
    let mut rows = vec![AffineRow::constant(0.0); dim * (dim + 1) / 2];
    for c in 0..dim {
        for r in 0..=c {
            let s = if r == c { 1.0 } else { SQRT_2 };
            // (variable, sign) for entry (r, c) of the embedding
            let entry: Option<(usize, f64)> = match (r < n, c < n) {
                (true, true) | (false, false) => {
                    let (i, j) = (r % n, c % n);
                    if i == j {
                        Some((lay.diag(i), 1.0))
                    } else {
                        Some((lay.pair(i, j).0, 1.0))
                    }
                }
                (true, false) => {
                    // −B_{r, c−n}; B_ij = Im W_ij, antisymmetric
                    let (i, j) = (r, c - n);
                    if i < j {
                        Some((lay.pair(i, j).1, -1.0))
                    } else if i > j {
                        Some((lay.pair(j, i).1, 1.0))
                    } else {
                        None
                    }
                }
                (false, true) => unreachable!("upper triangle only"),
            };
            if let Some((v, sign)) = entry {
                rows[svec_index(r, c)] = AffineRow::slack([(base + v, sign * s)], 0.0);
            }
        }
    }
    rows
}

fn read_iterate(lc: &LiftedConstants, lay: &Layout, x: &[f64], mu: f64) -> SdpIterate {
    let n = lay.n;
    let mut it = SdpIterate {
        w_mat_r: vec![],
        w_mat_t: vec![],
        rho_r: vec![],
        rho_t: vec![],
        mu,
        surrogate_point: None,
    };
    for (u, user) in lc.users.iter().enumerate() {
        let base = lay.w(u);
        let mut w = HMat::zeros(n, n);
        for i in 0..n {
            w[(i, i)] = Complex64::new(x[base + lay.diag(i)], 0.0);
            for j in i + 1..n {
                let (a, b) = lay.pair(i, j);
                let z = Complex64::new(x[base + a], x[base + b]);
                w[(i, j)] = z;
                w[(j, i)] = z.conj();
            }
        }
        let rho = lc.fixed_rho.unwrap_or_else(|| 1.0 / x[lay.q(u)].max(1.0));
        it.w_mut(user.side).push(w);
        it.rho_mut(user.side).push(rho);
    }
    it
}

/// Rows shared by the sub-problem and phase 1. With `slack_vars`, every
/// requirement row gets its own violation variable added to its slack.
struct Requirement {
    label: String,
    row: AffineRow,
}

fn requirements(lc: &LiftedConstants, lay: &Layout) -> (Vec<Requirement>, Vec<(Cone, Vec<AffineRow>, String)>) {
    let mut reqs = Vec::new();
    let mut blocks = Vec::new();
    for (u, user) in lc.users.iter().enumerate() {
        let tag = format!("{}[{}]", user.side.name(), user.index);
        let side_users: Vec<(usize, &crate::convex::lifted::UserLift)> = lc.side_users(user.side).collect();
        let s = user.noise() + user.delta2;
        match lc.fixed_rho {
            Some(rho) => blocks.push((Cone::Zero(1), vec![AffineRow::slack([(lay.q(u), 1.0)], -1.0 / rho)], format!("rho{tag}"))),
            // q ≥ 1
            None => blocks.push((Cone::Nonneg(1), vec![AffineRow::slack([(lay.q(u), 1.0)], -1.0)], format!("rho{tag}"))),
        }
        if user.gamma_min > 0.0 {
            // tr(H W_k)/γ − Σ_{l≠k} tr(H W_l) − δ² q − noise ≥ 0
            let g = user.gamma_min * (1.0 + SAFETY);
            let mut coeffs = Vec::new();
            for &(l, _) in &side_users {
                let w = if l == u { 1.0 / g } else { -1.0 };
                coeffs.extend(trace_coeffs(lay, &user.h_outer, l, w / s));
            }
            coeffs.push((lay.q(u), -user.delta2 / s));
            let c = if user.side == Side::R { 1 } else { 2 };
            reqs.push(Requirement { label: format!("C{c}{tag}"), row: AffineRow::slack(coeffs, -user.noise() / s) });
        }
        if let Some(t) = lay.t_index[u] {
            let p = user.rf_floor * (1.0 + SAFETY);
            let mut coeffs = Vec::new();
            for &(l, _) in &side_users {
                coeffs.extend(trace_coeffs(lay, &user.h_outer, l, 1.0 / p));
            }
            coeffs.push((t, -1.0));
            let c = if user.side == Side::R { 3 } else { 4 };
            reqs.push(Requirement { label: format!("C{c}{tag}"), row: AffineRow::slack(coeffs, user.ris_noise / p - 1.0) });
            // t (q − 1) ≥ 1  ⇔  ‖(t − q + 1, 2)‖ ≤ t + q − 1
            blocks.push((
                Cone::Soc(3),
                vec![
                    AffineRow::slack([(t, 1.0), (lay.q(u), 1.0)], -1.0),
                    AffineRow::slack([(t, 1.0), (lay.q(u), -1.0)], 1.0),
                    AffineRow::constant(2.0),
                ],
                format!("eh-epigraph{tag}"),
            ));
        }
    }
    // C5
    let p = lc.p_bs_max;
    let eye = HMat::identity(lay.n, lay.n);
    let mut c5 = Vec::new();
    for u in 0..lay.users {
        c5.extend(trace_coeffs(lay, &eye, u, -1.0 / p));
    }
    blocks.push((Cone::Nonneg(1), vec![AffineRow::slack(c5, 1.0 - SAFETY)], "C5".into()));
    // C6
    if lc.enforce_c6 {
        let p = lc.p_i_max;
        let mut c6 = Vec::new();
        for (u, user) in lc.users.iter().enumerate() {
            c6.extend(trace_coeffs(lay, lc.out_weight(user.side), u, -1.0 / p));
        }
        reqs.push(Requirement { label: "C6".into(), row: AffineRow::slack(c6, 1.0 - SAFETY - lc.out_const / p) });
    }
    for u in 0..lay.users {
        blocks.push((Cone::PsdTriangle(2 * lay.n), psd_rows(lay, u), format!("psd[{u}]")));
    }
    (reqs, blocks)
}

/// Outcome of one surrogate sub-problem.
#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub iterate: SdpIterate,
    /// f − g̃ − μP at the returned point (constants included).
    pub objective: f64,
}

/// Maximises f − g̃ − μ·P over the lifted feasible set.
pub fn solve_inner_sdp(
    lc: &LiftedConstants,
    surrogate: &Surrogate,
    mu: f64,
    backend: &dyn ConicBackend,
) -> Result<InnerSolution, ConvexError> {
    let lay = Layout::new(lc, true);
    let mut prob = ConicProblem::new(lay.n_vars);
    let (reqs, blocks) = requirements(lc, &lay);
    if !reqs.is_empty() {
        let (labels, rows): (Vec<_>, Vec<_>) = reqs.into_iter().map(|r| (r.label, r.row)).unzip();
        prob.push(Cone::Nonneg(rows.len()), rows, labels.join(","));
    }
    for (cone, rows, label) in blocks {
        prob.push(cone, rows, label);
    }
    // u_k ≤ ln((Σ_l tr(H W_l) + noise + δ² q)/s_k)
    for (u, user) in lc.users.iter().enumerate() {
        let s = user.noise() + user.delta2;
        let mut coeffs = Vec::new();
        for (l, _) in lc.side_users(user.side) {
            coeffs.extend(trace_coeffs(&lay, &user.h_outer, l, 1.0 / s));
        }
        coeffs.push((lay.q(u), user.delta2 / s));
        prob.push(
            Cone::Exp,
            vec![
                AffineRow::slack([(lay.u(u), 1.0)], 0.0),
                AffineRow::constant(1.0),
                AffineRow::slack(coeffs, user.noise() / s),
            ],
            format!("log[{u}]"),
        );
    }
    // minimise −(Σ u/ln2 − Σ tr(∇g W) − Σ ∂g/∂q·q − μ Σ tr(Q W))
    for (u, user) in lc.users.iter().enumerate() {
        prob.c[lay.u(u)] -= 1.0 / LN_2;
        let grad = &surrogate.grad_w(user.side)[user.index];
        for (j, v) in trace_coeffs(&lay, grad, u, 1.0) {
            prob.c[j] += v;
        }
        for (j, v) in trace_coeffs(&lay, lc.power_weight(user.side), u, mu) {
            prob.c[j] += v;
        }
        prob.c[lay.q(u)] += surrogate.grad_q(user.side)[user.index];
    }
    let sol = backend.solve(&prob)?;
    match sol.status {
        ConicStatus::Optimal | ConicStatus::Inaccurate => {}
        ConicStatus::Infeasible => return Err(ConvexError::Infeasible { certificate: vec!["surrogate sub-problem".into()] }),
        ConicStatus::Failed(msg) => return Err(ConvexError::Backend(msg)),
    }
    let mut iterate = read_iterate(lc, &lay, &sol.x, mu);
    iterate.surrogate_point = Some(Box::new(surrogate.expansion.clone()));
    let objective = eval_f(lc, &iterate)? - surrogate.eval(&iterate) - mu * lifted_power(lc, &iterate);
    Ok(InnerSolution { iterate, objective })
}

/// Minimises the total violation of the requirement rows. Returns a feasible
/// lifted point, or the labels of the requirements that cannot be met.
pub fn phase_one(lc: &LiftedConstants, backend: &dyn ConicBackend) -> Result<SdpIterate, ConvexError> {
    let base = Layout::new(lc, false);
    let (reqs, blocks) = requirements(lc, &base);
    let n_slack = reqs.len();
    let mut prob = ConicProblem::new(base.n_vars + n_slack);
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (i, r) in reqs.into_iter().enumerate() {
        let mut row = r.row;
        row.coeffs.push((base.n_vars + i, -1.0));
        rows.push(row);
        labels.push(r.label);
        prob.c[base.n_vars + i] = 1.0;
    }
    if n_slack > 0 {
        prob.push(Cone::Nonneg(n_slack), rows, "requirements");
        prob.push(
            Cone::Nonneg(n_slack),
            (0..n_slack).map(|i| AffineRow::slack([(base.n_vars + i, 1.0)], 0.0)).collect(),
            "violation",
        );
    }
    for (cone, rows, label) in blocks {
        prob.push(cone, rows, label);
    }
    // keep q bounded so the problem has a finite optimum
    for u in 0..base.users {
        prob.push(Cone::Nonneg(1), vec![AffineRow::slack([(base.q(u), -1.0)], 1e6)], "q-cap");
    }
    for t in base.t_index.iter().flatten() {
        prob.push(Cone::Nonneg(1), vec![AffineRow::slack([(*t, -1.0)], 1e6)], "t-cap");
    }
    let sol = backend.solve(&prob)?;
    match sol.status {
        ConicStatus::Optimal | ConicStatus::Inaccurate => {}
        ConicStatus::Infeasible => return Err(ConvexError::Infeasible { certificate: vec!["structural".into()] }),
        ConicStatus::Failed(msg) => return Err(ConvexError::Backend(msg)),
    }
    let violated: Vec<String> = labels
        .iter()
        .enumerate()
        .filter(|(i, _)| sol.x[base.n_vars + i] > 1e-7)
        .map(|(_, l)| l.clone())
        .collect();
    if !violated.is_empty() {
        return Err(ConvexError::Infeasible { certificate: violated });
    }
    Ok(read_iterate(lc, &base, &sol.x[..base.n_vars], 0.0))
}

/// Labels of lifted requirements the point violates (beyond `tol`, relative).
pub fn lifted_violations(lc: &LiftedConstants, it: &SdpIterate, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    for user in &lc.users {
        let tag = format!("{}[{}]", user.side.name(), user.index);
        let ws = it.w(user.side);
        let rho = it.rho(user.side)[user.index];
        if !(rho > 0.0 && rho <= 1.0) || lc.fixed_rho.is_some_and(|f| f != rho) {
            out.push(format!("rho{tag}"));
            continue;
        }
        let all: f64 = ws.iter().map(|w| tr_re(&user.h_outer, w)).sum();
        let own = tr_re(&user.h_outer, &ws[user.index]);
        if user.gamma_min > 0.0 {
            let need = (all - own + user.noise() + user.delta2 / rho) * user.gamma_min * (1.0 + SAFETY);
            if own < need * (1.0 - tol) {
                out.push(format!("C{}{tag}", if user.side == Side::R { 1 } else { 2 }));
            }
        }
        if user.rf_floor > 0.0 {
            let have = (1.0 - rho) * (all + user.ris_noise);
            if have < user.rf_floor * (1.0 + SAFETY) * (1.0 - tol) {
                out.push(format!("C{}{tag}", if user.side == Side::R { 3 } else { 4 }));
            }
        }
    }
    if lifted_transmit_power(it) > lc.p_bs_max * (1.0 - SAFETY) * (1.0 + tol) {
        out.push("C5".into());
    }
    if lc.enforce_c6 && lifted_output_power(lc, it) > lc.p_i_max * (1.0 - SAFETY) * (1.0 + tol) {
        out.push("C6".into());
    }
    out
}
