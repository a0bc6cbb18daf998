use num_complex::Complex64;
use proptest::prelude::*;
use wavetorus::dalembert::{apply_box, solve_box, DEFAULT_RESONANT_TOL};
use wavetorus::nonlinearity::{make_nonlinearity, NonlinearitySpec};
use wavetorus::norms::{norm_lp_normalized, norm_lq};
use wavetorus::solver::{translation_correlation, PenalizedProblem, Sign};
use wavetorus::spectral::{field_from_json, field_to_json, project, random_field, time_translate};
use wavetorus::{ModeIndex, SpectralField, SubspaceTag};

fn field() -> impl Strategy<Value = SpectralField> {
    (any::<u64>(), 2usize..14, 0.0f64..0.8).prop_map(|(s, m, d)| random_field(s, m, SubspaceTag::All, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn box_inverts_on_eperp(u in field()) {
        let f = project(&u, SubspaceTag::Eperp);
        let w = solve_box(&f, DEFAULT_RESONANT_TOL).unwrap().w;
        let err = (&apply_box(&w) - &f).l2_norm();
        prop_assert!(err <= 1e-12 * f.l2_norm().max(1e-300));
    }

    #[test]
    fn hausdorff_young_holds(u in field(), p in 1.05f64..2.0) {
        let q = p / (p - 1.0);
        prop_assert!(norm_lq(&u, q) <= norm_lp_normalized(&u, p, 4) * (1.0 + 1e-6));
    }

    #[test]
    fn json_round_trip_is_exact(u in field()) {
        prop_assert_eq!(field_from_json(&field_to_json(&u).unwrap()).unwrap(), u);
    }

    #[test]
    fn translates_correlate_fully(u in field(), theta in 0.0f64..std::f64::consts::TAU) {
        prop_assume!(u.l2_norm() > 0.0);
        let c = translation_correlation(&time_translate(&u, theta), &u);
        prop_assert!((c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn functional_is_translation_invariant(seed in any::<u64>(), k in 0usize..8) {
        let m = 8;
        let nl = make_nonlinearity(NonlinearitySpec::default_cubic()).unwrap();
        let p = PenalizedProblem::new(m, 1e-2, Sign::Plus, nl).unwrap();
        let u = random_field(seed, m, SubspaceTag::All, 0.4);
        let (_, nt) = p.grid_dims();
        let shifted = time_translate(&u, k as f64 * 2.0 * std::f64::consts::PI / nt as f64);
        let (a, b) = (p.functional_i(&u), p.functional_i(&shifted));
        prop_assert!((a - b).abs() <= 1e-11 * (1.0 + a.abs()));
    }

    #[test]
    fn subspaces_partition_the_lattice(u in field()) {
        let parts = [SubspaceTag::Kernel, SubspaceTag::Eplus, SubspaceTag::Eminus]
            .map(|t| project(&u, t));
        let sum = &(&parts[0] + &parts[1]) + &parts[2];
        prop_assert_eq!(sum, u);
    }
}

#[test]
fn resonant_input_is_refused() {
    let f = SpectralField::from_mode_pair(6, ModeIndex::new(1, -2), Complex64::new(0.5, 0.0));
    assert!(solve_box(&f, DEFAULT_RESONANT_TOL).is_err());
}
