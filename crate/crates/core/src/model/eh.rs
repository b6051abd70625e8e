use serde::{Deserialize, Serialize};

use super::ModelError;

/// Logistic energy-harvesting circuit constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EhParams {
    /// Saturation power M (W).
    pub m_sat: f64,
    /// Steepness a (1/W).
    pub a_curve: f64,
    /// Turn-on point b (W).
    pub b_curve: f64,
}

impl EhParams {
    pub fn table_one() -> Self {
        Self { m_sat: 0.02, a_curve: 6400.0, b_curve: 0.003 }
    }

    /// Ω = 1/(1 + e^{ab}), the logistic output at zero input.
    pub fn omega(&self) -> f64 {
        1.0 / (1.0 + (self.a_curve * self.b_curve).exp())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [("m_sat", self.m_sat), ("a_curve", self.a_curve), ("b_curve", self.b_curve)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::InvalidParam { name, reason: "must be finite and positive".into() });
            }
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Harvested DC power for RF input `p_in`:
/// E = (Ψ − MΩ)/(1 − Ω), Ψ = M / (1 + e^{−a(p−b)}).
///
/// Near the origin this is evaluated as M·σ(−ab)·σ(a(b−p))·expm1(ap)/σ(ab),
/// which is exactly zero at zero input and keeps full relative precision for
/// microwatt-level inputs.
pub fn nonlinear_eh(p_in: f64, eh: &EhParams) -> f64 {
    let p = p_in.max(0.0);
    let (m, a, b) = (eh.m_sat, eh.a_curve, eh.b_curve);
    let ap = a * p;
    let frac = if ap < 30.0 {
        // σ(x) − σ(y) = σ(y)·σ(−x)·(e^{x−y} − 1) with x = a(p−b), y = −ab
        sigmoid(-a * b) * sigmoid(-a * (p - b)) * ap.exp_m1() / sigmoid(a * b)
    } else {
        (sigmoid(a * (p - b)) - sigmoid(-a * b)) / sigmoid(a * b)
    };
    (m * frac).clamp(0.0, m)
}

/// RF input power needed to harvest `e_target`.
///
/// With u = E/M the closed form P = b − ln((M−Ψ)/Ψ)/a simplifies to
/// P = [ln(1 + u·e^{ab}) − ln(1 − u)]/a, which is exactly 0 at u = 0.
pub fn inverse_eh(e_target: f64, eh: &EhParams) -> Result<f64, ModelError> {
    if !(e_target >= 0.0) {
        return Err(ModelError::InvalidParam { name: "e_target", reason: "must be non-negative".into() });
    }
    if e_target >= eh.m_sat {
        return Err(ModelError::InfeasibleTarget { target: e_target, m_sat: eh.m_sat });
    }
    let (a, b) = (eh.a_curve, eh.b_curve);
    let u = e_target / eh.m_sat;
    let eab = (a * b).exp();
    if eab.is_finite() {
        Ok(((u * eab).ln_1p() - (-u).ln_1p()) / a)
    } else {
        let omega = eh.omega();
        let psi = e_target * (1.0 - omega) + eh.m_sat * omega;
        Ok(b - ((eh.m_sat - psi) / psi).ln() / a)
    }
}

/// Which harvester law converts RF to DC power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EhModel {
    NonLinear(EhParams),
    /// E = efficiency · P.
    Linear { efficiency: f64 },
}

impl EhModel {
    pub fn harvest(&self, p_in: f64) -> f64 {
        match self {
            EhModel::NonLinear(eh) => nonlinear_eh(p_in, eh),
            EhModel::Linear { efficiency } => efficiency * p_in.max(0.0),
        }
    }

    /// RF floor that guarantees `e_target` of harvested power.
    pub fn required_rf(&self, e_target: f64) -> Result<f64, ModelError> {
        match self {
            EhModel::NonLinear(eh) => inverse_eh(e_target, eh),
            EhModel::Linear { efficiency } => {
                if !(e_target >= 0.0) {
                    return Err(ModelError::InvalidParam { name: "e_target", reason: "must be non-negative".into() });
                }
                if !(*efficiency > 0.0) {
                    return Err(ModelError::InvalidParam { name: "efficiency", reason: "must be positive".into() });
                }
                Ok(e_target / efficiency)
            }
        }
    }

    /// Largest harvestable power, if bounded.
    pub fn saturation(&self) -> Option<f64> {
        match self {
            EhModel::NonLinear(eh) => Some(eh.m_sat),
            EhModel::Linear { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct transcription of the printed curve, used as the oracle.
    fn textbook(p: f64, eh: &EhParams) -> f64 {
        let psi = eh.m_sat / (1.0 + (-eh.a_curve * (p - eh.b_curve)).exp());
        let omega = eh.omega();
        (psi - eh.m_sat * omega) / (1.0 - omega)
    }

    #[test]
    fn zero_in_zero_out() {
        assert_eq!(nonlinear_eh(0.0, &EhParams::table_one()), 0.0);
        assert_eq!(inverse_eh(0.0, &EhParams::table_one()).unwrap(), 0.0);
    }

    #[test]
    fn midpoint() {
        let eh = EhParams::table_one();
        let e = nonlinear_eh(eh.b_curve, &eh);
        assert!((e - 0.01).abs() < 1e-8, "{e}");
        let omega = eh.omega();
        let e_mid = (0.01 - 0.02 * omega) / (1.0 - omega);
        assert!((inverse_eh(e_mid, &eh).unwrap() - eh.b_curve).abs() < 1e-12);
    }

    #[test]
    fn saturation_from_below() {
        let eh = EhParams::table_one();
        let e = nonlinear_eh(1.0, &eh);
        assert!(e <= eh.m_sat && eh.m_sat - e < 1e-12);
        assert!(matches!(inverse_eh(0.02, &eh), Err(ModelError::InfeasibleTarget { .. })));
    }

    #[test]
    fn matches_textbook_form() {
        let eh = EhParams::table_one();
        for k in 0..200 {
            let p = k as f64 * 5e-5;
            let (got, want) = (nonlinear_eh(p, &eh), textbook(p, &eh));
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-9), "p={p}: {got} vs {want}");
        }
    }

    #[test]
    fn round_trip_grid() {
        let eh = EhParams::table_one();
        for f in [0.1, 0.5, 0.9] {
            let e = f * eh.m_sat;
            let back = nonlinear_eh(inverse_eh(e, &eh).unwrap(), &eh);
            assert!((back - e).abs() <= 1e-9);
        }
    }

    #[test]
    fn linear_model() {
        let m = EhModel::Linear { efficiency: 0.5 };
        assert_eq!(m.harvest(0.2), 0.1);
        assert_eq!(m.required_rf(0.1).unwrap(), 0.2);
    }

    proptest! {
        #[test]
        fn strictly_increasing(p in 0.0f64..0.006, dp in 1e-7f64..1e-3) {
            let eh = EhParams::table_one();
            prop_assert!(nonlinear_eh(p + dp, &eh) > nonlinear_eh(p, &eh));
        }

        // Past a(p − b) ≈ 37 the curve is flat to double precision.
        #[test]
        fn nondecreasing_everywhere(p in 0.0f64..10.0, dp in 0.0f64..1.0) {
            let eh = EhParams::table_one();
            prop_assert!(nonlinear_eh(p + dp, &eh) >= nonlinear_eh(p, &eh));
        }

        #[test]
        fn inverse_is_exact(u in 0.0f64..0.999) {
            let eh = EhParams::table_one();
            let e = u * eh.m_sat;
            let back = nonlinear_eh(inverse_eh(e, &eh).unwrap(), &eh);
            prop_assert!((back - e).abs() <= 1e-9);
        }

        #[test]
        fn small_targets_invert_relatively(exp in -16.0f64..-3.0) {
            let eh = EhParams::table_one();
            let e = 10f64.powf(exp);
            let back = nonlinear_eh(inverse_eh(e, &eh).unwrap(), &eh);
            prop_assert!((back - e).abs() <= 1e-9 * e);
        }
    }
}
