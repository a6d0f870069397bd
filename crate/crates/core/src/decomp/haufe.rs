//! Forward spatial patterns from backward weights.

use crate::error::{Error, Result};
use crate::linalg::{pinv, Mat};

/// `A = C·W·pinv(WᵀCW)` with `C` the sample covariance of centred `x`.
pub fn spatial_pattern_from_weights(x: &Mat, w: &Mat) -> Result<Mat> {
    let (n, f) = x.shape();
    if w.nrows() != f {
        return Err(Error::ShapeMismatch(alloc::format!("{f} features but weights have {} rows", w.nrows())));
    }
    if n < 2 {
        return Err(Error::ShapeMismatch("need at least two samples".into()));
    }
    let mut xc = x.clone();
    for mut col in xc.column_iter_mut() {
        let m = col.sum() / n as f64;
        col.add_scalar_mut(-m);
    }
    let c = xc.transpose() * &xc / (n as f64 - 1.0);
    let cw = &c * w;
    let cs = w.transpose() * &cw;
    if !(cs.amax() > 0.0) || !cs.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateCs);
    }
    Ok(cw * pinv(&cs, 1e-12))
}
