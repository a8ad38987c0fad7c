use matembed_core::linalg::{self, expm};
use matembed_core::positive_embed::{construct_positive_2x2, decide_positive_2x2, decide_unipotent3, necessary_battery};
use matembed_core::real_embed::{decide_real_embeddable, jordan_block_power};
use matembed_core::verify::{run_probe, DEFAULT_SEED};
use matembed_core::{Matrix, Tolerances, Verdict, C64};
use proptest::prelude::*;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn real2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
    Matrix::from_real_rows(&[[a, b], [c, d]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn positive_2x2_follows_determinant(a in 0.0..4.0f64, b in 0.0..4.0f64, c in 0.0..4.0f64, d in 0.0..4.0f64) {
        let t = real2(a, b, c, d);
        let det = a * d - b * c;
        prop_assume!(det.abs() > 1e-6);
        let verdict = decide_positive_2x2(&t, &tol()).unwrap().verdict;
        prop_assert_eq!(verdict == Verdict::Embeddable, det > 0.0);
        if det > 0.0 {
            let cert = construct_positive_2x2(&t, &tol()).unwrap();
            prop_assert!(cert.residual <= 1e-8);
            prop_assert!(cert.generator[(0, 1)].re >= -1e-12 && cert.generator[(1, 0)].re >= -1e-12);
        }
    }

    #[test]
    fn unipotent_threshold(a in 0.0..3.0f64, b in 0.0..3.0f64, c in 0.0..6.0f64) {
        prop_assume!((c - a * b / 2.0).abs() > 1e-6);
        let verdict = decide_unipotent3(a, b, c, &tol()).unwrap().verdict;
        prop_assert_eq!(verdict == Verdict::Embeddable, c >= a * b / 2.0);
    }

    #[test]
    fn block_power_is_a_group(d in 1usize..6, t in -3.0..3.0f64, s in -3.0..3.0f64, lambda in 0.2..3.0f64) {
        let pt = jordan_block_power(lambda, d, t).unwrap();
        let ps = jordan_block_power(lambda, d, s).unwrap();
        let pts = jordan_block_power(lambda, d, t + s).unwrap();
        let scale = (linalg::opnorm(&pt) * linalg::opnorm(&ps)).max(1.0);
        prop_assert!(linalg::opnorm(&(&pts - &pt.matmul(&ps))) <= 1e-10 * scale);
    }

    #[test]
    fn metzler_flow_passes_battery(entries in proptest::collection::vec(-1.0..1.0f64, 9)) {
        let a = Matrix::from_fn(3, 3, |i, j| {
            let v = entries[3 * i + j];
            C64::new(if i == j { v } else { v.abs() }, 0.0)
        });
        let t = expm(&a);
        prop_assert!(t.min_real_entry() >= -1e-12);
        let r = necessary_battery(&t, &tol()).unwrap();
        prop_assert!(r.violations().next().is_none());
    }

    #[test]
    fn exponentials_of_small_real_matrices_are_real_embeddable(entries in proptest::collection::vec(-0.5..0.5f64, 4)) {
        let a = Matrix::from_fn(2, 2, |i, j| C64::new(entries[2 * i + j], 0.0));
        let r = decide_real_embeddable(&expm(&a), &tol()).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Embeddable);
    }
}

#[test]
fn jordan_decomposition_agrees_with_oracle() {
    let p = run_probe("jordan-oracle", DEFAULT_SEED, None, &tol()).unwrap();
    assert!(p.trials >= 1000);
    assert_eq!(p.failures, 0, "{:?}", p.failure_note);
}
