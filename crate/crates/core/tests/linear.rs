use proptest::prelude::*;

use vstate::continuation::{jacobian_rcond, velocity_check};
use vstate::linear::{discriminant, eigenvalues, find_bstar, kernel_data, matrix_mn, Sign};
use vstate::{PatchState, ResidualOperator, SpectralGrid};

#[test]
fn degenerate_radii() {
    assert!((find_bstar(3).unwrap() - 0.5).abs() < 1e-12);
    assert!((find_bstar(4).unwrap() - (2f64.sqrt() - 1.0).sqrt()).abs() < 1e-12);
    for m in 3..=8 {
        let b = find_bstar(m).unwrap();
        assert!(discriminant(m, b).unwrap().abs() < 1e-11, "m = {m}");
        assert!(discriminant(m, b - 1e-3).unwrap() > 0.0);
        assert!(discriminant(m, b + 1e-3).unwrap() < 0.0);
    }
}

#[test]
fn jacobian_is_singular_exactly_at_the_eigenvalues() {
    let (m, b) = (4, 0.63);
    let ev = eigenvalues(m, b).unwrap();
    let op = ResidualOperator::new(SpectralGrid::new(6, m).unwrap()).unwrap();
    let rc = |lambda: f64| jacobian_rcond(&PatchState::annulus(m, b, lambda, 6).unwrap(), &op, 1e-6).unwrap();
    assert!(rc(ev.plus) < 1e-10 && rc(ev.minus) < 1e-10);
    assert!(rc(0.5 * (ev.plus + ev.minus)) > 1e-4);
    assert!(rc(0.2) > 1e-3);
}

#[test]
fn kernel_perturbation_of_the_annulus_is_not_a_solution() {
    let k = kernel_data(4, 0.63, Sign::Plus).unwrap();
    let mut c = vec![0.0; 8];
    c[0] = 0.02 * k.v1;
    c[1] = 0.02 * k.v2;
    let off = PatchState::from_interleaved(4, 0.63, 0.2, &c).unwrap();
    assert!(velocity_check(&off, 100).unwrap() > 1e-2);
}

proptest! {
    #[test]
    fn eigenvalues_are_roots_of_the_determinant(m in 3usize..9, frac in 0.05f64..0.999) {
        let b = frac * find_bstar(m).unwrap();
        let ev = eigenvalues(m, b).unwrap();
        for lambda in [ev.minus, ev.plus] {
            let blk = matrix_mn(m, lambda, b).unwrap();
            let e = blk.entries;
            let scale = e.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
            prop_assert!((e[0][0] * e[1][1] - e[0][1] * e[1][0]).abs() < 1e-12 * scale * scale.max(1.0));
        }
    }

    #[test]
    fn kernel_vector_is_annihilated(m in 3usize..9, frac in 0.05f64..0.999, plus in any::<bool>()) {
        let sign = if plus { Sign::Plus } else { Sign::Minus };
        let b = frac * find_bstar(m).unwrap();
        let k = kernel_data(m, b, sign).unwrap();
        let blk = matrix_mn(m, k.lambda_star, b).unwrap();
        let v = k.v();
        let r = blk.apply(v);
        // relative to the size of the terms that cancel, inside the entries included
        let (mf, l) = (m as f64, k.lambda_star.abs());
        let size = [
            (mf * l + 1.0 + mf * b * b) * v[0].abs() + b.powi(m as i32 + 1) * v[1].abs(),
            b.powi(m as i32) * v[0].abs() + b * (mf * l + mf + 1.0) * v[1].abs(),
        ];
        for i in 0..2 {
            prop_assert!(r[i].abs() < 1e-14 * size[i], "row {}: {:e} of {:e}", i, r[i], size[i]);
        }
        let w = k.what_hat;
        prop_assert!(((w[0] * w[0] + w[1] * w[1]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn annulus_is_an_exact_solution(m in 2usize..7, b in 0.1f64..0.9, lambda in -1.0f64..2.0) {
        let op = ResidualOperator::new(SpectralGrid::new(8, m).unwrap()).unwrap();
        let s = PatchState::annulus(m, b, lambda, 8).unwrap();
        prop_assert!(op.residual(&s).unwrap().sup_norm < 1e-12);
    }

    #[test]
    fn residual_respects_the_rotation_by_pi_over_m(
        m in 3usize..6,
        coeffs in prop::collection::vec(-5e-3f64..5e-3, 8),
        lambda in 0.3f64..0.9,
    ) {
        // a_{j,n} -> (-1)^n a_{j,n} rotates the patch; residual modes flip the same way
        let op = ResidualOperator::new(SpectralGrid::new(4, m).unwrap()).unwrap();
        let s = PatchState::from_interleaved(m, 0.5, lambda, &coeffs).unwrap();
        let flipped: Vec<f64> = coeffs.iter().enumerate().map(|(i, a)| if (i / 2) % 2 == 0 { -a } else { *a }).collect();
        let r = op.residual(&s).unwrap().interleaved();
        let rf = op.residual(&PatchState::from_interleaved(m, 0.5, lambda, &flipped).unwrap()).unwrap().interleaved();
        for i in 0..r.len() {
            let sign = if (i / 2) % 2 == 0 { -1.0 } else { 1.0 };
            prop_assert!((rf[i] - sign * r[i]).abs() < 1e-14);
        }
    }
}
