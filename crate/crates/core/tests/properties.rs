use blsmo::descriptor::{compute_t, verify_structure_identity};
use blsmo::linalg::{self, Mat, Vector};
use blsmo::observer::injection_term;
use blsmo::reconstruction::{filter_signal, Kernel, KernelKind};
use proptest::collection::vec;
use proptest::prelude::*;

fn matrix(r: usize, c: usize) -> impl Strategy<Value = Mat> {
    vec(-2.0..2.0f64, r * c).prop_map(move |v| Mat::from_row_slice(r, c, &v))
}

/// `(E_bar, A_bar, C_bar, L1)` with `n_x <= 6`, `n_y >= m_y`.
fn descriptor_data() -> impl Strategy<Value = (Mat, Mat, Mat, Mat)> {
    (1usize..=6, 1usize..=3)
        .prop_flat_map(|(n_x, m_y)| (Just(n_x), Just(m_y), m_y..=m_y + 3))
        .prop_flat_map(|(n_x, m_y, n_y)| {
            (
                matrix(n_x, n_x),
                matrix(n_y, n_x),
                matrix(n_y, m_y),
                matrix(n_x + m_y, n_y),
                Just((n_x, m_y)),
            )
        })
        .prop_filter("D must have full column rank", |(_, _, d, _, _)| {
            linalg::singular_values(d).min() > 1e-3
        })
        .prop_map(|(a, c, d, l1, (n_x, m_y))| {
            let e = linalg::hstack(&Mat::identity(n_x, n_x), &Mat::zeros(n_x, m_y));
            (
                e,
                linalg::hstack(&a, &Mat::zeros(n_x, m_y)),
                linalg::hstack(&c, &d),
                l1 * 20.0,
            )
        })
}

proptest! {
    #[test]
    fn left_inverse_identity((e, _a, c, _l1) in descriptor_data()) {
        let (t1, t2, _) = compute_t(&e, &c).unwrap();
        let n = e.ncols();
        prop_assert!(linalg::max_abs(&(&t1 * &e - &t2 * &c - Mat::identity(n, n))) <= 1e-10);
    }

    #[test]
    fn structure_identity_any_l1((e, a, c, l1) in descriptor_data()) {
        let (t1, t2, _) = compute_t(&e, &c).unwrap();
        prop_assert!(verify_structure_identity(&t1, &t2, &a, &c, &l1).unwrap() <= 1e-9);
    }

    #[test]
    fn injection_bounded_and_continuous(
        f in matrix(2, 3),
        e in vec(-5.0..5.0f64, 3),
        rho in 0.0..500.0f64,
        log_eta in -6.0..0.0f64,
    ) {
        let eta = 10f64.powf(log_eta);
        let e = Vector::from_vec(e);
        let v = injection_term(&f, &e, rho, eta);
        prop_assert!(v.norm() <= rho + 1e-12);
        // at the layer boundary both branches give the same value
        let s = &f * &e;
        if s.norm() > 0.0 {
            let on = &e * (eta / s.norm());
            let a = injection_term(&f, &on, rho, eta);
            let b = (&f * &on) * (rho / eta);
            prop_assert!((a - b).amax() <= 1e-9 * (1.0 + rho));
        }
    }

    #[test]
    fn filter_is_linear(
        s1 in vec(-3.0..3.0f64, 400),
        s2 in vec(-3.0..3.0f64, 400),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let k = Kernel::new(KernelKind::StandardBump);
        let (step, beta) = (1e-2, 0.3);
        let mix: Vec<f64> = s1.iter().zip(&s2).map(|(x, y)| a * x + b * y).collect();
        let f1 = filter_signal(&s1, beta, &k, step).unwrap();
        let f2 = filter_signal(&s2, beta, &k, step).unwrap();
        let fm = filter_signal(&mix, beta, &k, step).unwrap();
        for i in 0..fm.values.len() {
            prop_assert!((fm.values[i] - (a * f1.values[i] + b * f2.values[i])).abs() <= 1e-10);
        }
    }

    #[test]
    fn filter_preserves_constants(c in -100.0..100.0f64, beta in 0.05..0.5f64) {
        let k = Kernel::new(KernelKind::PolynomialBump);
        let out = filter_signal(&[c; 300], beta, &k, 1e-2).unwrap();
        prop_assert!(out.values.iter().all(|v| (v - c).abs() <= 1e-6 * (1.0 + c.abs())));
    }
}
