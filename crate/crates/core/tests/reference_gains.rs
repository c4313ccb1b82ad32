//! Checks against a fixed reference set of gains for the two examples.

use blsmo::descriptor::verify_structure_identity;
use blsmo::linalg::{self, Mat, Vector};
use blsmo::observer::{observer_rhs, Observer};
use blsmo::pipeline::descriptor_of;
use blsmo::scenario::{example1, example2};
use blsmo::synthesis::{verify_gains, ObserverGains};

fn m(r: usize, c: usize, v: &[f64]) -> Mat {
    Mat::from_row_slice(r, c, v)
}

fn example1_gains() -> ObserverGains {
    ObserverGains {
        p: m(
            5,
            5,
            &[
                25.55, -6.01, -10.51, -8.53, -2.32, //
                -6.01, 1.61, 2.76, 2.26, 0.52, //
                -10.51, 2.76, 15.74, 7.67, -1.54, //
                -8.53, 2.26, 7.67, 5.19, -1.43, //
                -2.32, 0.52, -1.54, -1.43, 3.81,
            ],
        ),
        l1: m(
            5,
            3,
            &[
                1.58, -0.43, -0.21, //
                29.81, -75.99, -37.99, //
                5.33, -14.25, -7.12, //
                -20.95, 62.13, 31.06, //
                -9.29, 27.93, 13.97,
            ],
        ),
        l2: m(1, 3, &[-16.55, -90.07, 80.54]),
        f: m(1, 3, &[1.32, 0.21, 0.2]),
        rho: 100.0,
        eta: 1e-4,
        mu: 18.5268,
        alpha: 0.5,
        m: m(2, 2, &[0.09, 0.0, 0.0, -0.09]),
        zeta: Some(0.09),
    }
}

#[test]
fn example1_shapes() {
    let d = descriptor_of(&example1()).unwrap();
    assert_eq!(d.e_bar.shape(), (4, 5));
    assert_eq!(d.a_bar.shape(), (4, 5));
    assert_eq!(d.c_bar.shape(), (3, 5));
    assert_eq!(d.t1.shape(), (5, 4));
    assert_eq!(d.t2.shape(), (5, 3));
    assert!(d.identity_residual() <= 1e-10);
}

#[test]
fn example1_structure_identity_with_reference_l1() {
    let d = descriptor_of(&example1()).unwrap();
    let g = example1_gains();
    let r = verify_structure_identity(&d.t1, &d.t2, &d.a_bar, &d.c_bar, &g.l1).unwrap();
    assert!(r <= 1e-9, "{r}");
}

#[test]
fn example1_observer_rhs_at_start_is_finite() {
    let c = example1();
    let d = descriptor_of(&c).unwrap();
    let x0 = Vector::from_column_slice(c.simulation.x0.as_ref().unwrap());
    let y = d.plant.output(&x0, &d.plant.w_y.eval(0.0));
    let obs = Observer::new(d, example1_gains()).unwrap();
    let z_dot = observer_rhs(&obs, 0.0, &Vector::zeros(5), &y, &Vector::zeros(0)).unwrap();
    assert_eq!(z_dot.len(), 5);
    assert!(z_dot.iter().all(|v| v.is_finite()));
}

#[test]
fn reference_gains_are_positive_definite_and_nearly_matching() {
    // two-decimal rounding leaves residuals of rounding size, not exact feasibility
    let d = descriptor_of(&example1()).unwrap();
    let v = verify_gains(&d, &example1_gains(), 1.0);
    assert!(v.p_min_eigenvalue > 0.0);
    assert!(v.matching < 0.05, "{v:?}");
}

#[test]
fn example2_t1g_full_rank() {
    let d = descriptor_of(&example2()).unwrap();
    let t1g = &d.t1 * &d.plant.m.g;
    assert_eq!(linalg::rank(&t1g), 2);
    assert!(d.identity_residual() <= 1e-10);
}
