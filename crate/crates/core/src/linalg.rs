//! Dense linear-algebra helpers built on nalgebra: numerical rank, null
//! spaces, pseudoinverse solves and symmetric eigenproblems.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

/// Relative factor in the default rank tolerance `max(m,n)·σ_max·1e-12`.
pub const RANK_FACTOR: f64 = 1e-12;

/// Outcome of a rank-revealing SVD.
#[derive(Debug, Clone)]
pub struct RankInfo {
    pub rank: usize,
    pub tol: f64,
    /// Singular values in descending order, `min`-padded to the column count.
    pub sigma: Vec<f64>,
    /// Orthonormal basis of the right null space, one column per vector.
    pub null: DMatrix<f64>,
    /// Orthonormal basis of the row space.
    pub row_space: DMatrix<f64>,
}

/// Default rank tolerance for an `m × n` matrix with largest singular value `smax`.
pub fn default_rank_tol(m: usize, n: usize, smax: f64) -> f64 {
    m.max(n) as f64 * smax * RANK_FACTOR
}

fn svd_sorted(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        v.set_column(c, &vt.row(i).transpose());
    }
    (sigma, v)
}

/// Numerical rank and right null space of `a`. `tol` overrides the default
/// threshold on singular values when given.
pub fn right_null(a: &DMatrix<f64>, tol: Option<f64>) -> RankInfo {
    let (m, n) = a.shape();
    if n == 0 {
        return RankInfo {
            rank: 0,
            tol: 0.0,
            sigma: vec![],
            null: DMatrix::zeros(0, 0),
            row_space: DMatrix::zeros(0, 0),
        };
    }
    let (sigma, v) = svd_sorted(a);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let tol = tol.unwrap_or_else(|| default_rank_tol(m, n, smax));
    let rank = sigma.iter().filter(|&&s| s > tol).count();
    let mut null = v.columns(rank, n - rank).into_owned();
    for mut c in null.column_iter_mut() {
        canonical_sign_slice(c.as_mut_slice());
    }
    let row_space = v.columns(0, rank).into_owned();
    RankInfo {
        rank,
        tol,
        sigma,
        null,
        row_space,
    }
}

/// Left null space of `a` (right null space of its transpose).
pub fn left_null(a: &DMatrix<f64>, tol: Option<f64>) -> RankInfo {
    right_null(&a.transpose(), tol)
}

/// Numerical rank of `a`.
pub fn rank(a: &DMatrix<f64>, tol: Option<f64>) -> usize {
    right_null(a, tol).rank
}

/// Minimum-norm least-squares solution `a⁺ b`.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>, tol: Option<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    if n == 0 {
        return DVector::zeros(0);
    }
    if m == 0 {
        return DVector::zeros(n);
    }
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.max();
    let eps = tol.unwrap_or_else(|| default_rank_tol(m, n, smax));
    svd.solve(b, eps.max(f64::MIN_POSITIVE))
        .expect("u and v_t computed")
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues ascending.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        canonical_sign_slice(col.as_mut_slice());
        vecs.set_column(c, &col);
    }
    (vals, vecs)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigen_sorted(m).0.first().copied().unwrap_or(f64::INFINITY)
}

/// Flip the sign so that the entry of largest magnitude is positive.
pub fn canonical_sign_slice(v: &mut [f64]) {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Orthonormal basis of the column space of `a`.
pub fn orthonormal_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    let info = right_null(&a.transpose(), None);
    info.row_space
}

/// Principal angles (radians) between the column spaces of `a` and `b`,
/// ascending. Dimensions beyond the smaller space count as right angles.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = orthonormal_columns(a);
    let qb = orthonormal_columns(b);
    if qa.ncols() == 0 || qb.ncols() == 0 {
        return vec![std::f64::consts::FRAC_PI_2; qa.ncols().max(qb.ncols())];
    }
    let c = qa.transpose() * &qb;
    let svd = SVD::new(c, false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut angles: Vec<f64> = (0..svd.singular_values.len())
        .map(|k| {
            let cos = svd.singular_values[k].min(1.0);
            // sines are better conditioned for small angles
            let v = &qb * vt.row(k).transpose();
            let sin = (&v - &qa * (qa.transpose() * &v)).norm().min(1.0);
            if sin < std::f64::consts::FRAC_1_SQRT_2 {
                sin.asin()
            } else {
                cos.acos()
            }
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    angles.resize(qa.ncols().max(qb.ncols()), std::f64::consts::FRAC_PI_2);
    angles
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let info = right_null(&a, None);
        assert_eq!(info.rank, 1);
        assert_eq!(info.null.ncols(), 2);
        assert!((&a * &info.null).abs().max() < 1e-14);
    }

    #[test]
    fn zero_matrix_has_full_null_space() {
        let a = DMatrix::<f64>::zeros(2, 3);
        let info = right_null(&a, None);
        assert_eq!(info.rank, 0);
        assert_eq!(info.null.ncols(), 3);
    }

    #[test]
    fn principal_angles_of_same_space_vanish() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0]);
        let b = DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 3.0, 2.0, 2.0, 2.0]);
        for ang in principal_angles(&a, &b) {
            assert!(ang < 1e-12, "{ang}");
        }
    }

    #[test]
    fn pinv_gives_minimum_norm() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = pinv_solve(&a, &DVector::from_vec(vec![2.0]), None);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
