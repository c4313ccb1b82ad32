//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular-value threshold `max(rows, cols) * eps * sigma_max`.
pub fn rank_tolerance(m: &Mat, sigma_max: f64) -> f64 {
    m.nrows().max(m.ncols()) as f64 * f64::EPSILON * sigma_max
}

pub fn singular_values(m: &Mat) -> Vector {
    if m.is_empty() {
        return Vector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

pub fn rank(m: &Mat) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let tol = rank_tolerance(m, smax);
    sv.iter().filter(|&&s| s > tol).count()
}

pub fn has_full_column_rank(m: &Mat) -> bool {
    rank(m) == m.ncols()
}

/// 2-norm condition number; infinite when the smallest singular value is zero.
pub fn condition_number(m: &Mat) -> f64 {
    let sv = singular_values(m);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Moore–Penrose pseudoinverse through the SVD, truncating singular values
/// below the rank tolerance.
pub fn pseudo_inverse(m: &Mat) -> Mat {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = rank_tolerance(m, smax);
    svd.pseudo_inverse(tol).expect("SVD was computed with both U and V^T")
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &Mat) -> f64 {
    singular_values(m).iter().cloned().fold(0.0, f64::max)
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &Mat) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    symmetrize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &Mat) -> f64 {
    symmetrize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Builds a matrix from row-major nested rows. All rows must have equal length.
pub fn from_rows(rows: &[Vec<f64>]) -> Option<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// `[[a, b], [c, d]]` block assembly.
pub fn block2x2(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let (r1, c1) = a.shape();
    let (r2, c2) = d.shape();
    assert_eq!(b.shape(), (r1, c2));
    assert_eq!(c.shape(), (r2, c1));
    let mut out = Mat::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((0, c1), (r1, c2)).copy_from(b);
    out.view_mut((r1, 0), (r2, c1)).copy_from(c);
    out.view_mut((r1, c1), (r2, c2)).copy_from(d);
    out
}

pub fn hstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn vstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

/// Serde adapter writing a matrix as row-major nested arrays.
pub mod rows {
    use super::{from_rows, to_rows, Mat};
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).ok_or_else(|| D::Error::custom("ragged matrix rows"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_full_column_rank_is_left_inverse() {
        let v = Mat::from_row_slice(3, 2, &[1.0, 0.0, -1.0, -1.0, 0.5, 2.0]);
        let vl = pseudo_inverse(&v);
        let id = &vl * &v;
        assert!(max_abs(&(id - Mat::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn rank_of_zero_column() {
        let d = Mat::from_row_slice(3, 1, &[0.0, 0.0, 0.0]);
        assert_eq!(rank(&d), 0);
        assert!(!has_full_column_rank(&d));
    }

    #[test]
    fn block_assembly() {
        let a = Mat::identity(2, 2);
        let b = Mat::zeros(2, 1);
        let c = Mat::zeros(1, 2);
        let d = Mat::from_element(1, 1, -1.0);
        let m = block2x2(&a, &b, &c, &d);
        assert_eq!(m.shape(), (3, 3));
        assert_eq!(m[(2, 2)], -1.0);
        assert_eq!(m[(1, 1)], 1.0);
    }
}
