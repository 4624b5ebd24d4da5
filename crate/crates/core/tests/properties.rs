use proptest::prelude::*;
use tvpwl::io::{decode_image, encode_image, ImageFormat};
use tvpwl::{
    gaussian_smooth, psnr, solve_tgv2, solve_tv, solve_tvpwl, ssim, tv, tvpwl, Formulation, GridSpacing, ScalarField,
    SolverParams, TgvParams,
};

fn field(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = ScalarField> {
    prop::collection::vec(lo..hi, rows * cols).prop_map(move |v| ScalarField::from_vec(rows, cols, v).unwrap())
}

fn sized_field(max: usize, lo: f64, hi: f64) -> impl Strategy<Value = ScalarField> {
    (1..=max, 1..=max).prop_flat_map(move |(m, n)| field(m, n, lo, hi))
}

fn quick() -> SolverParams {
    SolverParams { record_history: false, ..SolverParams::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_are_feasible_and_in_range(f in sized_field(12, 0.0, 255.0), frac in 0.05f64..0.9, g in 0.0f64..40.0) {
        let delta = frac * (f.sub(&ScalarField::filled(f.rows(), f.cols(), f.mean())).unwrap().l2_norm());
        let gamma = ScalarField::filled(f.rows(), f.cols(), g);
        let eps = 1e-6 * (f.max() - f.min()) + 1e-9;
        for r in [solve_tv(&f, delta, &quick()).unwrap(), solve_tvpwl(&f, &gamma, delta, &quick()).unwrap()] {
            prop_assert!(r.final_u.sub(&f).unwrap().l2_norm() <= delta * (1.0 + 1e-9) + 1e-12);
            if r.converged {
                prop_assert!(r.final_u.min() >= f.min() - eps && r.final_u.max() <= f.max() + eps);
            }
        }
        let r = solve_tgv2(&f, delta, &TgvParams::default(), &quick()).unwrap();
        prop_assert!(r.final_u.sub(&f).unwrap().l2_norm() <= delta * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn solving_does_not_increase_regulariser(f in sized_field(12, 0.0, 255.0), frac in 0.1f64..0.5) {
        let delta = frac * f.l2_norm();
        let r = solve_tv(&f, delta, &quick()).unwrap();
        prop_assume!(r.converged);
        let h = GridSpacing::UNIT;
        prop_assert!(tv(&r.final_u, h) <= tv(&f, h) * (1.0 + 1e-3) + 1e-6);
        let gamma = ScalarField::filled(f.rows(), f.cols(), 5.0);
        let r = solve_tvpwl(&f, &gamma, delta, &quick()).unwrap();
        prop_assume!(r.converged);
        let before = tvpwl(&f, &gamma, h, Formulation::ClosedForm).unwrap().value;
        let after = tvpwl(&r.final_u, &gamma, h, Formulation::ClosedForm).unwrap().value;
        prop_assert!(after <= before * (1.0 + 1e-3) + 1e-6);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded(a in field(16, 13, 0.0, 255.0), b in field(16, 13, 0.0, 255.0)) {
        let ab = ssim(&a, &b, 255.0).unwrap();
        let ba = ssim(&b, &a, 255.0).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ssim(&a, &a, 255.0).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn psnr_is_symmetric_and_shift_sensitive(a in field(8, 8, 0.0, 255.0), c in 0.5f64..50.0) {
        let b = a.map(|v| v + c);
        let p = psnr(&a, &b, 255.0).unwrap();
        prop_assert!((p - psnr(&b, &a, 255.0).unwrap()).abs() <= 1e-12);
        prop_assert!((p - 20.0 * (255.0 / c).log10()).abs() <= 1e-9);
        prop_assert_eq!(psnr(&a, &a, 255.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn smoothing_keeps_constants_and_bounds(r in sized_field(20, -50.0, 50.0), rho in 0.3f64..4.0, c in -100.0f64..100.0) {
        let flat = ScalarField::filled(r.rows(), r.cols(), c);
        let s = gaussian_smooth(&flat, rho).unwrap();
        prop_assert!(s.as_slice().iter().all(|v| (v - c).abs() <= 1e-9 * (1.0 + c.abs())));
        let s = gaussian_smooth(&r, rho).unwrap();
        prop_assert!(s.min() >= r.min() - 1e-9 && s.max() <= r.max() + 1e-9);
    }

    #[test]
    fn raw_round_trip_is_exact(f in sized_field(9, -1e6, 1e6)) {
        let bytes = encode_image(&f, ImageFormat::Raw).unwrap();
        let g = decode_image(&bytes).unwrap();
        prop_assert_eq!(g.shape(), f.shape());
        prop_assert_eq!(g.as_slice(), f.as_slice());
    }

    #[test]
    fn eight_bit_formats_round_trip_quantised_values(f in sized_field(9, -20.0, 280.0)) {
        for fmt in [ImageFormat::Png, ImageFormat::Pgm] {
            let g = decode_image(&encode_image(&f, fmt).unwrap()).unwrap();
            for (a, b) in f.as_slice().iter().zip(g.as_slice()) {
                prop_assert!(*b >= 0.0 && *b <= 255.0 && b.fract() == 0.0);
                prop_assert!((a.clamp(0.0, 255.0) - b).abs() <= 0.5);
            }
        }
    }
}
