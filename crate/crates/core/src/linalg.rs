//! Small dense helpers on top of nalgebra used throughout the crate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Eigenvalues of the symmetric part of `m`, sorted ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vector {
    if m.nrows() == 0 {
        return Vector::zeros(0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    Vector::from_vec(vals)
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `(m + mᵀ) / 2`; bitwise symmetric.
pub fn symmetrize(m: &Mat) -> Mat {
    let mut out = m.clone();
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `M + Mᵀ`.
pub fn symm(m: &Mat) -> Mat {
    m + m.transpose()
}

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    (0..n).all(|j| (0..j).all(|i| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Condition number of a symmetric positive definite matrix, or `None` if
/// it has a non-positive eigenvalue.
pub fn spd_condition(m: &Mat) -> Option<f64> {
    let eig = sym_eigenvalues(m);
    let lo = eig[0];
    let hi = eig[eig.len() - 1];
    (lo > 0.0).then(|| hi / lo)
}

/// Inverse of a symmetric positive definite matrix through its Cholesky
/// factor, rejecting condition numbers above `max_cond`.
pub fn spd_inverse(m: &Mat, what: &str, max_cond: f64) -> Result<Mat> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Shape(format!("{what} must be square and non-empty")));
    }
    if !is_symmetric(m, 1e-12 * (1.0 + m.amax())) {
        return Err(Error::NotPositiveDefinite(what.to_string()));
    }
    let cond = spd_condition(m).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))?;
    if cond > max_cond {
        return Err(Error::IllConditioned {
            what: what.to_string(),
            cond,
        });
    }
    let chol = symmetrize(m)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))?;
    Ok(symmetrize(&chol.inverse()))
}

/// `P^{-1/2}` for symmetric positive definite `P`.
pub fn inv_sqrt_spd(p: &Mat) -> Result<Mat> {
    let eig = SymmetricEigen::new(symmetrize(p));
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite("ellipsoid matrix".into()));
    }
    let d = Mat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(symmetrize(&(&eig.eigenvectors * d * eig.eigenvectors.transpose())))
}

/// Scaled vectorization of a symmetric matrix: upper triangle in
/// column-major order, off-diagonal entries multiplied by √2, so that
/// `svec(A)·svec(B) = ⟨A, B⟩_F`.
pub fn svec(m: &Mat) -> Vector {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                out.push(m[(i, i)]);
            } else {
                out.push(std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
    }
    Vector::from_vec(out)
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], n: usize) -> Mat {
    debug_assert_eq!(v.len(), n * (n + 1) / 2);
    let mut m = Mat::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                m[(i, i)] = v[idx];
            } else {
                let x = v[idx] / std::f64::consts::SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            idx += 1;
        }
    }
    m
}

/// Matrix with rows given by nested row-major data.
pub fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<Mat> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Vertical concatenation of equally wide blocks.
pub fn vstack(blocks: &[Mat], ncols: usize) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, ncols);
    let mut r0 = 0;
    for b in blocks {
        out.view_mut((r0, 0), (b.nrows(), ncols)).copy_from(b);
        r0 += b.nrows();
    }
    out
}
