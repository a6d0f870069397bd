//! Dense linear algebra helpers over `nalgebra`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vect = DVector<f64>;

/// Solves `m·x = b` for symmetric positive (semi-)definite `m`.
///
/// Uses Cholesky when it succeeds. Otherwise falls back to a symmetric
/// eigendecomposition with eigenvalues floored at `1e-12·max|λ|`.
pub fn solve_spd(m: &Mat, b: &Mat) -> Result<Mat> {
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if max == 0.0 || !max.is_finite() {
        return Err(Error::SingularSystem);
    }
    let floor = 1e-12 * max;
    let inv: Vect = eig.eigenvalues.map(|l| 1.0 / l.max(floor));
    let vt_b = eig.eigenvectors.transpose() * b;
    let scaled = Mat::from_fn(vt_b.nrows(), vt_b.ncols(), |i, j| vt_b[(i, j)] * inv[i]);
    Ok(&eig.eigenvectors * scaled)
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(m: &Mat) -> Result<Mat> {
    solve_spd(m, &Mat::identity(m.nrows(), m.ncols()))
}

/// Moore–Penrose pseudo-inverse with relative singular value cutoff `rcond`.
pub fn pinv(m: &Mat, rcond: f64) -> Mat {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &x| a.max(x));
    let cut = rcond * smax;
    let u = svd.u.expect("computed");
    let vt = svd.v_t.expect("computed");
    let k = svd.singular_values.len();
    let mut out = Mat::zeros(m.ncols(), m.nrows());
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cut && s > 0.0 {
            out += (vt.row(i).transpose() * u.column(i).transpose()) / s;
        }
    }
    out
}

/// Numerical rank using the NumPy default tolerance.
pub fn rank(m: &Mat) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(0.0f64, |a, &x| a.max(x));
    let tol = smax * (m.nrows().max(m.ncols()) as f64) * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Indices of columns that do not increase the rank when added left to right.
pub fn dependent_columns(m: &Mat) -> Vec<usize> {
    let mut basis: Vec<Vect> = Vec::new();
    let mut out = Vec::new();
    let scale = m.column_iter().map(|c| c.norm()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    for (j, col) in m.column_iter().enumerate() {
        let mut r: Vect = col.into_owned();
        // Two passes of Gram–Schmidt for stability.
        for _ in 0..2 {
            for q in &basis {
                let p = q.dot(&r);
                r -= q * p;
            }
        }
        let n = r.norm();
        if n <= 1e-10 * scale * libm::sqrt(m.nrows() as f64) {
            out.push(j);
        } else {
            basis.push(r / n);
        }
    }
    out
}

/// Symmetric square root factor `L` with `L·Lᵀ = m` for PSD `m`.
///
/// Tries Cholesky, then Cholesky with jitter `1e-12·trace/n`, then an
/// eigendecomposition with negative eigenvalues clipped when they are
/// within round-off of zero.
pub fn psd_factor(m: &Mat) -> Result<Mat> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.l());
    }
    let jitter = 1e-12 * m.trace() / n as f64;
    if jitter > 0.0 {
        if let Some(ch) = (m + Mat::identity(n, n) * jitter).cholesky() {
            return Ok(ch.l());
        }
    }
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * max.max(f64::MIN_POSITIVE)) || !max.is_finite() {
        return Err(Error::NonPsdCov);
    }
    let sq = eig.eigenvalues.map(|l| libm::sqrt(l.max(0.0)));
    Ok(Mat::from_fn(n, n, |i, j| eig.eigenvectors[(i, j)] * sq[j]))
}

/// Least-squares solution of `g·b = y` via SVD.
pub fn lstsq(g: &Mat, y: &Mat) -> Mat {
    pinv(g, 1e-15 * g.nrows().max(g.ncols()) as f64) * y
}
