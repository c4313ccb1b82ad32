//! Descriptor form of the plant over the augmented state `[x; w_y]` and the
//! `(T1, T2)` left-inverse split with `T1 E - T2 C = I`.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::plant::PlantModel;

/// Normal equations with a condition number above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct DescriptorSystem {
    /// `[I 0]`, n_x x (n_x + m_y)
    pub e_bar: Mat,
    /// `[A 0]`
    pub a_bar: Mat,
    /// `[C D]`
    pub c_bar: Mat,
    pub t1: Mat,
    pub t2: Mat,
    /// Condition number of `V^T V` with `V = [E; -C]`.
    pub normal_condition: f64,
    pub plant: PlantModel,
}

impl DescriptorSystem {
    pub fn n_x(&self) -> usize {
        self.e_bar.nrows()
    }

    /// Dimension of the augmented state, `n_x + m_y`.
    pub fn n_aug(&self) -> usize {
        self.e_bar.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c_bar.nrows()
    }

    /// `max |T1 E - T2 C - I|`.
    pub fn identity_residual(&self) -> f64 {
        let r = &self.t1 * &self.e_bar - &self.t2 * &self.c_bar - Mat::identity(self.n_aug(), self.n_aug());
        linalg::max_abs(&r)
    }

    /// `T1 A_bar - L1 C_bar`.
    pub fn q_matrix(&self, l1: &Mat) -> Mat {
        &self.t1 * &self.a_bar - l1 * &self.c_bar
    }

    /// `C_q E_bar`, mapping the augmented state to the nonlinearity argument.
    pub fn cq_e(&self) -> Mat {
        &self.plant.m.c_q * &self.e_bar
    }
}

pub fn build_descriptor(plant: &PlantModel) -> Result<DescriptorSystem> {
    plant.validate()?;
    let n_x = plant.n_x();
    let m_y = plant.m_y();
    let n = n_x + m_y;
    let mut e_bar = Mat::zeros(n_x, n);
    e_bar.view_mut((0, 0), (n_x, n_x)).fill_with_identity();
    let mut a_bar = Mat::zeros(n_x, n);
    a_bar.view_mut((0, 0), (n_x, n_x)).copy_from(&plant.m.a);
    let c_bar = linalg::hstack(&plant.m.c, &plant.m.d);
    let (t1, t2, normal_condition) = compute_t(&e_bar, &c_bar)?;
    Ok(DescriptorSystem {
        e_bar,
        a_bar,
        c_bar,
        t1,
        t2,
        normal_condition,
        plant: plant.clone(),
    })
}

/// Splits the Moore–Penrose left inverse of `V = [E; -C]` into
/// `T1` (first n_x columns) and `T2` (last n_y columns).
///
/// Also returns the condition number of `V^T V`.
pub fn compute_t(e_bar: &Mat, c_bar: &Mat) -> Result<(Mat, Mat, f64)> {
    if e_bar.ncols() != c_bar.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "E has {} columns, C has {}",
            e_bar.ncols(),
            c_bar.ncols()
        )));
    }
    let n_x = e_bar.nrows();
    let v = linalg::vstack(e_bar, &(-c_bar));
    let vtv = v.transpose() * &v;
    let cond = linalg::condition_number(&vtv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::SingularNormalEquations { cond });
    }
    let vl = linalg::pseudo_inverse(&v);
    let t1 = vl.columns(0, n_x).into_owned();
    let t2 = vl.columns(n_x, c_bar.nrows()).into_owned();
    Ok((t1, t2, cond))
}

/// Max-abs entry of `T1 A - Q T2 C - R C - Q` with `Q = T1 A - L1 C` and
/// `R = L1 - Q T2`. Zero up to rounding for any `L1`.
pub fn verify_structure_identity(t1: &Mat, t2: &Mat, a_bar: &Mat, c_bar: &Mat, l1: &Mat) -> Result<f64> {
    let n = t1.nrows();
    if a_bar.nrows() != t1.ncols()
        || a_bar.ncols() != n
        || c_bar.ncols() != n
        || t2.nrows() != n
        || t2.ncols() != c_bar.nrows()
        || l1.nrows() != n
        || l1.ncols() != c_bar.nrows()
    {
        return Err(Error::DimensionMismatch("T1, T2, A, C and L1 are not conformal".into()));
    }
    let q = t1 * a_bar - l1 * c_bar;
    let r = l1 - &q * t2;
    let resid = t1 * a_bar - &q * t2 * c_bar - &r * c_bar - &q;
    Ok(linalg::max_abs(&resid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{KnownNonlinearity, KnownNonlinearitySpec, StateNonlinearity, StateNonlinearitySpec};
    use crate::plant::{Disturbance, PlantMatrices};

    fn m(r: usize, c: usize, v: &[f64]) -> Mat {
        Mat::from_row_slice(r, c, v)
    }

    fn scalar_plant() -> PlantModel {
        PlantModel::new(
            PlantMatrices {
                a: m(1, 1, &[1.0]),
                b_f: m(1, 1, &[0.0]),
                b_g: m(1, 1, &[0.0]),
                g: m(1, 1, &[1.0]),
                c: m(1, 1, &[1.0]),
                d: m(1, 1, &[1.0]),
                c_q: m(1, 1, &[1.0]),
            },
            StateNonlinearity::from_spec(&StateNonlinearitySpec::Zero { dim: 1 }),
            KnownNonlinearity::from_spec(&KnownNonlinearitySpec::Zero { dim: 1 }),
            0.0,
            Disturbance::zeros(1),
            Disturbance::zeros(1),
        )
        .unwrap()
    }

    #[test]
    fn scalar_blocks() {
        let d = build_descriptor(&scalar_plant()).unwrap();
        assert_eq!(d.e_bar, m(1, 2, &[1.0, 0.0]));
        assert_eq!(d.a_bar, m(1, 2, &[1.0, 0.0]));
        assert_eq!(d.c_bar, m(1, 2, &[1.0, 1.0]));
    }

    #[test]
    fn scalar_t_matches_hand_inverse() {
        // V = [[1, 0], [-1, -1]] is square, so its left inverse is V^-1 = V.
        let d = build_descriptor(&scalar_plant()).unwrap();
        let expect_t1 = m(2, 1, &[1.0, -1.0]);
        let expect_t2 = m(2, 1, &[0.0, -1.0]);
        assert!(linalg::max_abs(&(&d.t1 - expect_t1)) < 1e-14);
        assert!(linalg::max_abs(&(&d.t2 - expect_t2)) < 1e-14);
        assert!(d.identity_residual() < 1e-15);
    }

    #[test]
    fn structure_identity_scalar_zero_gain() {
        let d = build_descriptor(&scalar_plant()).unwrap();
        let l1 = Mat::zeros(2, 1);
        let r = verify_structure_identity(&d.t1, &d.t2, &d.a_bar, &d.c_bar, &l1).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn structure_identity_rejects_bad_gain_shape() {
        let d = build_descriptor(&scalar_plant()).unwrap();
        let l1 = Mat::zeros(3, 1);
        assert!(matches!(
            verify_structure_identity(&d.t1, &d.t2, &d.a_bar, &d.c_bar, &l1),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn compute_t_rejects_column_mismatch() {
        assert!(compute_t(&Mat::zeros(1, 2), &Mat::zeros(1, 3)).is_err());
    }

    #[test]
    fn compute_t_rejects_singular_normal_equations() {
        // D = 0 makes the last column of V zero.
        let e = m(1, 2, &[1.0, 0.0]);
        let c = m(1, 2, &[1.0, 0.0]);
        assert!(matches!(compute_t(&e, &c), Err(Error::SingularNormalEquations { .. })));
    }

    #[test]
    fn build_is_deterministic() {
        let p = scalar_plant();
        let a = build_descriptor(&p).unwrap();
        let b = build_descriptor(&p).unwrap();
        assert_eq!(a.t1, b.t1);
        assert_eq!(a.t2, b.t2);
    }
}
