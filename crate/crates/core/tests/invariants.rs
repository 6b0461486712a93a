use chainstat::bounds::{connect_fidelity, decay_fidelity, dejmps_werner};
use chainstat::innsbruck::{dejmps, swap, werner_state, BellDiagonalState};
use chainstat::lumping::lumped_section_matrix;
use chainstat::pmf_series;
use proptest::prelude::*;

fn state() -> impl Strategy<Value = BellDiagonalState> {
    (0.01f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b, c, d)| {
        let s = a + b + c + d;
        BellDiagonalState::new(a / s, b / s, c / s, d / s)
    })
}

fn valid(s: &BellDiagonalState) -> bool {
    (s.trace() - 1.0).abs() < 1e-12 && s.coefficients().iter().all(|&x| x >= 0.0)
}

proptest! {
    #[test]
    fn state_operations_preserve_trace(r1 in state(), r2 in state(), eps in 0.0f64..=1.0) {
        prop_assert!(valid(&r1.decay(eps)));
        prop_assert!(valid(&swap(&r1, &r2)));
        if let Ok((out, n)) = dejmps(&r1, &r2) {
            prop_assert!(valid(&out));
            prop_assert!(n > 0.0 && n <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn distillation_improves_distillable_werner_states(f in 0.5001f64..1.0) {
        let w = werner_state(f);
        let (out, _) = dejmps(&w, &w).unwrap();
        prop_assert!(out.fidelity() >= f);
    }

    #[test]
    fn fidelity_maps_stay_in_range(f in 0.25f64..=1.0, g in 0.25f64..=1.0, eps in 0.0f64..1.0, k in 0.0f64..50.0) {
        for x in [decay_fidelity(f, eps, k), dejmps_werner(f), connect_fidelity(f, g, eps)] {
            prop_assert!((0.25 - 1e-12..=1.0 + 1e-12).contains(&x));
        }
    }

    #[test]
    fn section_pmf_is_max_of_geometrics(q in 1usize..=5, p in 0.05f64..=1.0) {
        let pmf = pmf_series(&lumped_section_matrix(q, p, "w"), 30);
        let cdf = |t: i32| (1.0 - (1.0 - p).powi(t)).powi(q as i32);
        for t in 1..=30 {
            prop_assert!((pmf[t] - (cdf(t as i32) - cdf(t as i32 - 1))).abs() < 1e-12);
        }
    }
}
