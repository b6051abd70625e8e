mod common;

use common::{random_instance, rel_close};
use proptest::prelude::*;
use starris_core::model::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn surface_path_is_linear_in_gain(seed in 0u64..10_000, scale in 0.0f64..3.0) {
        let inst = random_instance(seed, 3, 2, 2);
        let mut scaled = inst.ris.clone();
        for m in 0..scaled.len() {
            scaled.set_gain(m, inst.ris.gain()[m] * scale);
        }
        for side in Side::BOTH {
            for k in 0..inst.params.users(side) {
                let h0 = effective_channel(&inst.ch, &inst.ris, &inst.params, side, k).unwrap();
                let h1 = effective_channel(&inst.ch, &scaled, &inst.params, side, k).unwrap();
                let d = &inst.ch.direct(side)[k];
                for n in 0..d.len() {
                    let want = (h0[n] - d[n]) * scale;
                    prop_assert!(((h1[n] - d[n]) - want).norm() <= 1e-12 * (1.0 + want.norm()));
                }
            }
        }
    }

    #[test]
    fn sinr_increases_with_rho(seed in 0u64..10_000, r1 in 0.01f64..0.99, dr in 1e-3f64..0.5) {
        let inst = random_instance(seed, 3, 2, 2);
        let r2 = (r1 + dr).min(1.0);
        for side in Side::BOTH {
            for k in 0..inst.params.users(side) {
                let mut lo = inst.ps.clone();
                lo.side_mut(side)[k] = r1;
                let mut hi = inst.ps.clone();
                hi.side_mut(side)[k] = r2;
                let a = sinr(&inst.ch, &inst.ris, &inst.bf, &lo, &inst.params, side, k).unwrap();
                let b = sinr(&inst.ch, &inst.ris, &inst.bf, &hi, &inst.params, side, k).unwrap();
                prop_assert!(b > a || (a == 0.0 && b == 0.0));
            }
        }
    }

    #[test]
    fn metrics_are_nonnegative(seed in 0u64..10_000) {
        let inst = random_instance(seed, 3, 2, 2);
        let m = Metrics::evaluate(&inst.ch, &inst.ris, &inst.bf, &inst.ps, &inst.params,
            &EhModel::NonLinear(EhParams::table_one())).unwrap();
        prop_assert!(m.sum_rate >= 0.0 && m.ris_output_power >= 0.0);
        prop_assert!(m.total_power >= inst.params.p_cir_total());
        prop_assert!(rel_close(m.ee, m.sum_rate / m.total_power, 1e-15));
        let rep = check_with_metrics(&m, &inst.ris, &inst.ps, &inst.params);
        prop_assert_eq!(rep.violation_count, rep.satisfied.iter().filter(|s| !**s).count());
        // decoded-style configurations always meet the surface constraints
        for c in 9..=13 {
            prop_assert!(rep.holds(c), "C{} violated", c);
        }
    }
}
