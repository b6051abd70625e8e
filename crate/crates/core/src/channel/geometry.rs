use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::ChannelError;

pub type Point3 = [f64; 3];

/// Deployment: BS, surface, the two user disks and (once sampled) the users.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub bs_pos: Point3,
    pub ris_pos: Point3,
    pub center_r: Point3,
    pub center_t: Point3,
    pub radius_r: f64,
    pub radius_t: f64,
    #[serde(default)]
    pub user_pos_r: Vec<Point3>,
    #[serde(default)]
    pub user_pos_t: Vec<Point3>,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            bs_pos: [0.0, 0.0, 15.0],
            ris_pos: [0.0, 20.0, 15.0],
            center_r: [0.0, 16.0, 0.0],
            center_t: [0.0, 24.0, 0.0],
            radius_r: 3.0,
            radius_t: 3.0,
            user_pos_r: vec![],
            user_pos_t: vec![],
        }
    }
}

fn disk_point(center: Point3, radius: f64, rng: &mut impl Rng) -> Point3 {
    let r = radius * rng.random::<f64>().sqrt();
    let t = rng.random::<f64>() * TAU;
    [center[0] + r * t.cos(), center[1] + r * t.sin(), 0.0]
}

/// Area-uniform user placement on each disk (r = R·√U), at ground level.
pub fn sample_positions(geom: &Geometry, u_r: usize, u_t: usize, rng: &mut impl Rng) -> Result<Geometry, ChannelError> {
    for (name, r) in [("radius_r", geom.radius_r), ("radius_t", geom.radius_t)] {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(ChannelError::Invalid { name, reason: "must be finite and non-negative".into() });
        }
    }
    let mut out = geom.clone();
    out.user_pos_r = (0..u_r).map(|_| disk_point(geom.center_r, geom.radius_r, rng)).collect();
    out.user_pos_t = (0..u_t).map(|_| disk_point(geom.center_t, geom.radius_t, rng)).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{stream_rng, Stream};

    #[test]
    fn zero_radius_puts_users_at_center() {
        let g = Geometry { radius_r: 0.0, ..Geometry::default() };
        let placed = sample_positions(&g, 3, 0, &mut stream_rng(0, Stream::Positions)).unwrap();
        assert!(placed.user_pos_r.iter().all(|p| *p == [0.0, 16.0, 0.0]));
    }

    #[test]
    fn reproducible_placement() {
        let g = Geometry::default();
        let a = sample_positions(&g, 3, 3, &mut stream_rng(4, Stream::Positions)).unwrap();
        let b = sample_positions(&g, 3, 3, &mut stream_rng(4, Stream::Positions)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mean_radius_is_two_thirds() {
        let g = Geometry::default();
        let placed = sample_positions(&g, 100_000, 0, &mut stream_rng(5, Stream::Positions)).unwrap();
        let mean = placed
            .user_pos_r
            .iter()
            .map(|p| (p[0].powi(2) + (p[1] - 16.0).powi(2)).sqrt())
            .sum::<f64>()
            / 1e5;
        assert!((mean / 2.0 - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn disk_ks_uniformity() {
        let g = Geometry::default();
        let placed = sample_positions(&g, 0, 10_000, &mut stream_rng(6, Stream::Positions)).unwrap();
        let mut u: Vec<f64> =
            placed.user_pos_t.iter().map(|p| (p[0].powi(2) + (p[1] - 24.0).powi(2)) / 9.0).collect();
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        let d = u
            .iter()
            .enumerate()
            .map(|(i, x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max);
        // asymptotic KS critical value at α = 0.01
        assert!(d < 1.628 / n.sqrt(), "D = {d}");
    }
}
