//! Rank-one recovery of the lifted beamformers.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::dc::SdpIterate;
use super::lifted::HMat;
use super::ConvexError;
use crate::linalg::CVector;
use crate::model::{
    check_with_metrics, BeamformingSet, ChannelSet, EhModel, Metrics, PowerSplitSet, Side, StarRisConfig,
    SystemParams,
};

/// Eigenvalues (descending) and matching eigenvectors of a Hermitian matrix.
fn eigen_desc(w: &HMat) -> (Vec<f64>, Vec<CVector>) {
    let eig = SymmetricEigen::new(w.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    (vals, vecs)
}

/// √λ₁·u₁ when W is numerically rank one (λ₂/λ₁ ≤ `rank_tol`), else `None`.
/// A zero matrix yields the zero vector.
pub fn recover_rank1(w_mat: &HMat, rank_tol: f64) -> Option<CVector> {
    let (vals, vecs) = eigen_desc(w_mat);
    let l1 = vals.first().copied().unwrap_or(0.0).max(0.0);
    if l1 <= 0.0 {
        return Some(vec![Complex64::new(0.0, 0.0); w_mat.nrows()]);
    }
    let l2 = vals.get(1).copied().unwrap_or(0.0).max(0.0);
    (l2 / l1 <= rank_tol).then(|| vecs[0].iter().map(|z| z * l1.sqrt()).collect())
}

/// A vector with covariance W: W^{1/2}·z, z ~ CN(0, I).
fn draw(w: &HMat, rng: &mut impl Rng) -> CVector {
    let (vals, vecs) = eigen_desc(w);
    let n = w.nrows();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (l, v) in vals.iter().zip(&vecs) {
        if *l <= 0.0 {
            continue;
        }
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let z = Complex64::new(re, im) * (l / 2.0).sqrt();
        for (o, x) in out.iter_mut().zip(v) {
            *o += x * z;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct Recovered {
    pub bf: BeamformingSet,
    pub ps: PowerSplitSet,
    pub metrics: Metrics,
    /// True if every W was numerically rank one.
    pub exact: bool,
    /// Number of randomisation candidates that passed the constraints.
    pub feasible_candidates: usize,
}

fn c1_to_c6_hold(m: &Metrics, ris: &StarRisConfig, ps: &PowerSplitSet, params: &SystemParams) -> bool {
    let rep = check_with_metrics(m, ris, ps, params);
    (1..=8).all(|c| rep.holds(c))
}

/// Scales a candidate set down uniformly until C5 and C6 hold.
fn fit_budgets(bf: &mut BeamformingSet, ch: &ChannelSet, ris: &StarRisConfig, params: &SystemParams) {
    let tx = bf.transmit_power();
    let mut alpha2: f64 = 1.0;
    if tx > params.p_bs_max {
        alpha2 = alpha2.min(params.p_bs_max / tx);
    }
    if params.surface == crate::model::SurfaceMode::Active {
        let zero = BeamformingSet { w_r: bf.w_r.iter().map(|w| vec![Complex64::new(0.0, 0.0); w.len()]).collect(), w_t: bf.w_t.iter().map(|w| vec![Complex64::new(0.0, 0.0); w.len()]).collect() };
        let floor = crate::model::ris_output_power(ch, ris, &zero, params).unwrap_or(0.0);
        let full = crate::model::ris_output_power(ch, ris, bf, params).unwrap_or(0.0);
        let quad = full - floor;
        if full > params.p_i_max && quad > 0.0 {
            alpha2 = alpha2.min(((params.p_i_max - floor) / quad).max(0.0));
        }
    }
    if alpha2 < 1.0 {
        let a = alpha2.sqrt() * (1.0 - 1e-9);
        for w in bf.w_r.iter_mut().chain(bf.w_t.iter_mut()) {
            for x in w.iter_mut() {
                *x *= a;
            }
        }
    }
}

/// Recovers beamforming vectors from a lifted iterate: directly if every W is
/// rank one, otherwise by Gaussian randomisation, keeping the feasible
/// candidate of highest energy efficiency.
#[allow(clippy::too_many_arguments)]
pub fn recover_solution(
    it: &SdpIterate,
    ch: &ChannelSet,
    ris: &StarRisConfig,
    params: &SystemParams,
    eh: &EhModel,
    rank_tol: f64,
    candidates: usize,
    rng: &mut impl Rng,
    bound: f64,
) -> Result<Recovered, ConvexError> {
    let ps = PowerSplitSet { rho_r: it.rho_r.clone(), rho_t: it.rho_t.clone() };
    let direct: Option<Vec<Vec<CVector>>> = Side::BOTH
        .iter()
        .map(|&s| it.w(s).iter().map(|w| recover_rank1(w, rank_tol)).collect::<Option<Vec<_>>>())
        .collect();
    let mut best: Option<(f64, BeamformingSet, Metrics)> = None;
    let mut feasible = 0;
    if let Some(mut sides) = direct {
        let w_t = sides.pop().unwrap();
        let w_r = sides.pop().unwrap();
        let bf = BeamformingSet { w_r, w_t };
        let m = Metrics::evaluate(ch, ris, &bf, &ps, params, eh)?;
        if c1_to_c6_hold(&m, ris, &ps, params) {
            return Ok(Recovered { bf, ps, metrics: m, exact: true, feasible_candidates: 1 });
        }
    }
    // principal eigenvectors first, then random draws
    for c in 0..=candidates {
        let mut bf = BeamformingSet { w_r: vec![], w_t: vec![] };
        for side in Side::BOTH {
            for w in it.w(side) {
                let v = if c == 0 {
                    let (vals, vecs) = eigen_desc(w);
                    let l1 = vals[0].max(0.0);
                    vecs[0].iter().map(|z| z * l1.sqrt()).collect()
                } else {
                    let mut v = draw(w, rng);
                    let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                    let target = w.trace().re.max(0.0);
                    if norm2 > 0.0 {
                        let s = (target / norm2).sqrt();
                        v.iter_mut().for_each(|z| *z *= s);
                    }
                    v
                };
                bf.side_mut(side).push(v);
            }
        }
        fit_budgets(&mut bf, ch, ris, params);
        let m = Metrics::evaluate(ch, ris, &bf, &ps, params, eh)?;
        if c1_to_c6_hold(&m, ris, &ps, params) {
            feasible += 1;
            if best.as_ref().is_none_or(|(ee, _, _)| m.ee > *ee) {
                best = Some((m.ee, bf, m));
            }
        }
    }
    match best {
        Some((_, bf, metrics)) => Ok(Recovered { bf, ps, metrics, exact: false, feasible_candidates: feasible }),
        None => Err(ConvexError::RecoveryFailed { bound }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_matrix_returns_its_vector() {
        let v = vec![Complex64::new(1.0, 0.5), Complex64::new(-0.3, 2.0)];
        let w = super::super::lifted::outer(&v);
        let r = recover_rank1(&w, 1e-6).unwrap();
        // equal up to a global phase
        let phase = r[0] / v[0];
        assert!((phase.norm() - 1.0).abs() < 1e-10);
        for (a, b) in r.iter().zip(&v) {
            assert!((a - b * phase).norm() < 1e-10);
        }
    }

    #[test]
    fn identity_is_not_rank_one() {
        assert!(recover_rank1(&HMat::identity(3, 3), 1e-6).is_none());
    }

    #[test]
    fn zero_matrix_recovers_zero() {
        let r = recover_rank1(&HMat::zeros(2, 2), 1e-6).unwrap();
        assert!(r.iter().all(|z| z.norm() == 0.0));
    }
}
