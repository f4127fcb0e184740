//! Small dense helpers on top of `nalgebra`: tolerance-based rank, null
//! spaces, and minimum-norm least squares.

use nalgebra::{DMatrix, DVector};

/// Singular values below `REL_RANK_TOL * max(largest, 1)` count as zero.
pub const REL_RANK_TOL: f64 = 1e-9;

fn threshold(singular: &DVector<f64>, rel_tol: f64) -> f64 {
    let largest = singular.iter().cloned().fold(0.0_f64, f64::max);
    rel_tol * largest.max(1.0)
}

/// Numerical rank under the relative tolerance.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.singular_values();
    let thr = threshold(&sv, rel_tol);
    sv.iter().filter(|s| **s > thr).count()
}

/// Orthonormal basis (as columns) of the right null space of `a`.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // Pad with zero rows so the thin SVD returns a full right basis.
    let rows = a.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors");
    let thr = threshold(&svd.singular_values, rel_tol);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= thr)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis of `{y : yᵀ a = 0}`.
pub fn left_null_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    null_space(&a.transpose(), rel_tol)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let thr = threshold(&svd.singular_values, rel_tol);
    svd.solve(b, thr).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Dimension of the intersection of two column spans.
pub fn intersection_dim(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.ncols() == 0 || b.ncols() == 0 {
        return 0;
    }
    let ra = rank(a, rel_tol);
    let rb = rank(b, rel_tol);
    let joined = DMatrix::from_fn(a.nrows(), a.ncols() + b.ncols(), |i, j| {
        if j < a.ncols() {
            a[(i, j)]
        } else {
            b[(i, j - a.ncols())]
        }
    });
    ra + rb - rank(&joined, rel_tol)
}

/// Reduced row echelon form with partial pivoting. Entries within `1e-10`
/// of an integer are snapped to it so exact structure prints cleanly.
pub fn rref(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let mut m = a.clone();
    let (rows, cols) = m.shape();
    let scale = m.amax().max(1.0);
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (piv, val) = (r..rows)
            .map(|i| (i, m[(i, c)].abs()))
            .fold((r, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if val <= rel_tol * scale {
            continue;
        }
        m.swap_rows(r, piv);
        let p = m[(r, c)];
        for j in 0..cols {
            m[(r, j)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = m[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        m[(i, j)] -= f * m[(r, j)];
                    }
                }
            }
        }
        r += 1;
    }
    for v in m.iter_mut() {
        let k = v.round();
        if (*v - k).abs() < 1e-10 {
            *v = if k == 0.0 { 0.0 } else { k };
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_respects_tolerance() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-12]);
        assert_eq!(rank(&a, REL_RANK_TOL), 1);
        assert_eq!(rank(&DMatrix::zeros(3, 3), REL_RANK_TOL), 0);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&a, REL_RANK_TOL);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-14);
        assert!((ns.transpose() * &ns - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn left_null_space_of_tall_matrix() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 0.0]);
        let ln = left_null_space(&a, REL_RANK_TOL);
        assert_eq!(ln.ncols(), 2);
        assert!((ln.transpose() * &a).norm() < 1e-14);
    }

    #[test]
    fn min_norm_solution() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = min_norm_solve(&a, &DVector::from_vec(vec![2.0]), REL_RANK_TOL);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let zero = min_norm_solve(&DMatrix::zeros(2, 2), &DVector::from_vec(vec![1.0, 1.0]), REL_RANK_TOL);
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn rref_of_scaled_basis() {
        let a = DMatrix::from_row_slice(2, 3, &[0.0, 0.5, 0.5, 0.3, 0.0, 0.3]);
        let r = rref(&a, REL_RANK_TOL);
        assert_eq!(r, DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]));
    }

    #[test]
    fn intersection_of_planes() {
        let xy = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let yz = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(intersection_dim(&xy, &yz, REL_RANK_TOL), 1);
    }
}
