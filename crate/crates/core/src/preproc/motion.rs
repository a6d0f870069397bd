//! Motion artifact correction: derivative repair and spline correction.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::signal::{butter, default_padlen, is_regular, sampling_rate, Band};
use crate::stats::{median, MAD_SCALE};
use crate::tensor::{truthy, BinOp, LabeledTensor};

pub const TDDR_SPLIT_HZ: f64 = 0.5;
pub const TUKEY_C: f64 = 4.685;
const TDDR_MAX_ITER: usize = 50;

/// Temporal derivative distribution repair along `time`.
///
/// The low-frequency part of each lane has its first differences
/// re-weighted by an iterated Tukey biweight, is re-integrated, and the
/// residual high-frequency part is added back. The output keeps the input mean.
pub fn tddr(od: &LabeledTensor) -> Result<LabeledTensor> {
    let time = od.coord_f64("time")?;
    if !is_regular(time) {
        return Err(Error::IrregularSampling);
    }
    let fs = sampling_rate(time)?;
    let n = time.len();
    od.map_lanes("time", n, vec![], |lane, out| {
        out.copy_from_slice(&tddr_lane(lane, fs)?);
        Ok(())
    })
}

/// Single-lane derivative repair.
pub fn tddr_lane(x: &[f64], fs: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Ok(x.to_vec());
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let low = if fs > 2.0 * TDDR_SPLIT_HZ {
        let sos = butter(3, Band::Lowpass(TDDR_SPLIT_HZ), fs)?;
        sos.filtfilt(&centred, default_padlen(3, 0.0, fs, n))
    } else {
        centred.clone()
    };
    let d: Vec<f64> = low.windows(2).map(|w| w[1] - w[0]).collect();
    let (w, mu) = tukey_weights(&d);
    let mut acc = 0.0;
    let mut rebuilt = Vec::with_capacity(n);
    rebuilt.push(0.0);
    for (di, wi) in d.iter().zip(&w) {
        acc += wi * (di - mu);
        rebuilt.push(acc);
    }
    let rm = rebuilt.iter().sum::<f64>() / n as f64;
    let mut out: Vec<f64> = (0..n).map(|i| rebuilt[i] - rm + (centred[i] - low[i])).collect();
    let om = out.iter().sum::<f64>() / n as f64;
    for v in &mut out {
        *v += mean - om;
    }
    Ok(out)
}

/// Tukey biweight IRLS location estimate; returns the weights and location.
fn tukey_weights(d: &[f64]) -> (Vec<f64>, f64) {
    let mut mu = 0.0;
    let mut w = vec![1.0; d.len()];
    for _ in 0..TDDR_MAX_ITER {
        let dev: Vec<f64> = d.iter().map(|x| (x - mu).abs()).collect();
        let sigma = MAD_SCALE * median(&dev);
        if !(sigma > 0.0) {
            for (wi, &dv) in w.iter_mut().zip(&dev) {
                *wi = if dv == 0.0 { 1.0 } else { 0.0 };
            }
            break;
        }
        for (wi, &dv) in w.iter_mut().zip(&dev) {
            let r = dv / (TUKEY_C * sigma);
            *wi = if r < 1.0 { (1.0 - r * r) * (1.0 - r * r) } else { 0.0 };
        }
        let sw: f64 = w.iter().sum();
        let prev = mu;
        mu = if sw > 0.0 { w.iter().zip(d).map(|(a, b)| a * b).sum::<f64>() / sw } else { mu };
        if (mu - prev).abs() < 1e-8 * sigma {
            break;
        }
    }
    (w, mu)
}

pub const SPLINE_P: f64 = 0.99;

/// Smoothing cubic spline fit at the samples of `y` on the sample-index
/// abscissa (unit spacing), minimizing `p·Σ(y−g)² + (1−p)·∫g''²`.
pub fn smoothing_spline(y: &[f64], p: f64) -> Vec<f64> {
    let n = y.len();
    if n <= 2 {
        return y.to_vec();
    }
    let h = 1.0;
    let lambda = (1.0 - p) / p;
    let m = n - 2;
    // Qᵀ has rows [1/h, −2/h, 1/h]; R is tridiagonal with 2h/3 and h/6.
    let q = [1.0 / h, -2.0 / h, 1.0 / h];
    let qtq = [6.0 / (h * h), -4.0 / (h * h), 1.0 / (h * h)];
    let diag = vec![2.0 * h / 3.0 + lambda * qtq[0]; m];
    let off1 = vec![h / 6.0 + lambda * qtq[1]; m.saturating_sub(1)];
    let off2 = vec![lambda * qtq[2]; m.saturating_sub(2)];
    let rhs: Vec<f64> = (0..m).map(|i| q[0] * y[i] + q[1] * y[i + 1] + q[2] * y[i + 2]).collect();
    let gamma = solve_penta_spd(&diag, &off1, &off2, rhs);
    let mut g = y.to_vec();
    for (i, &gi) in gamma.iter().enumerate() {
        for (k, &qk) in q.iter().enumerate() {
            g[i + k] -= lambda * qk * gi;
        }
    }
    g
}

/// Cholesky solve of a symmetric banded system with bandwidth 2.
fn solve_penta_spd(diag: &[f64], off1: &[f64], off2: &[f64], mut b: Vec<f64>) -> Vec<f64> {
    let m = diag.len();
    // Lower factor L with L[i][i], L[i][i-1], L[i][i-2].
    let mut l0 = vec![0.0; m];
    let mut l1 = vec![0.0; m];
    let mut l2 = vec![0.0; m];
    for i in 0..m {
        if i >= 2 {
            l2[i] = off2[i - 2] / l0[i - 2];
        }
        if i >= 1 {
            let extra = if i >= 2 { l2[i] * l1[i - 1] } else { 0.0 };
            l1[i] = (off1[i - 1] - extra) / l0[i - 1];
        }
        let s = diag[i] - l1[i] * l1[i] - l2[i] * l2[i];
        l0[i] = libm::sqrt(s.max(f64::MIN_POSITIVE));
    }
    for i in 0..m {
        let mut s = b[i];
        if i >= 1 {
            s -= l1[i] * b[i - 1];
        }
        if i >= 2 {
            s -= l2[i] * b[i - 2];
        }
        b[i] = s / l0[i];
    }
    for i in (0..m).rev() {
        let mut s = b[i];
        if i + 1 < m {
            s -= l1[i + 1] * b[i + 1];
        }
        if i + 2 < m {
            s -= l2[i + 2] * b[i + 2];
        }
        b[i] = s / l0[i];
    }
    b
}

/// Spline motion correction driven by a mask (TAINTED = false marks motion).
///
/// Each tainted run has its smoothing spline subtracted; then every segment
/// after the first is shifted so its leading mean matches the trailing mean
/// of its predecessor, over `min(⌈len/3⌉, round(2·fs))` samples per side.
/// A run covering the whole series leaves the spline residual.
pub fn spline_correct(od: &LabeledTensor, mask: &LabeledTensor) -> Result<LabeledTensor> {
    let time = od.coord_f64("time")?;
    let fs = sampling_rate(time)?;
    let n = time.len();
    let ones = od.map(|_| 1.0).with_unit(mask.unit().clone());
    let full = ones.binary(mask, BinOp::Mul)?;
    let order: Vec<&str> = od.dims().iter().map(|s| s.as_str()).collect();
    if full.dims().len() != od.dims().len() {
        return Err(Error::DimMismatch("mask has dims absent from the series".into()));
    }
    let full = full.transpose(&order)?;
    let masks = full.lanes("time")?;
    let span = libm::round(2.0 * fs).max(1.0) as usize;
    let mut k = 0;
    od.map_lanes("time", n, vec![], |lane, out| {
        let clean: Vec<bool> = masks[k].iter().map(|&v| truthy(v)).collect();
        k += 1;
        out.copy_from_slice(&spline_lane(lane, &clean, span));
        Ok(())
    })
}

/// Single-lane spline correction; `span` caps the re-leveling window.
pub fn spline_lane(y: &[f64], clean: &[bool], span: usize) -> Vec<f64> {
    let mut out = y.to_vec();
    let mut segs: Vec<(usize, usize, bool)> = Vec::new();
    let mut s = 0;
    for i in 1..=y.len() {
        if i == y.len() || clean[i] != clean[s] {
            segs.push((s, i, clean[s]));
            s = i;
        }
    }
    if segs.iter().all(|g| g.2) {
        return out;
    }
    for &(a, b, ok) in &segs {
        if !ok {
            let fit = smoothing_spline(&y[a..b], SPLINE_P);
            for (o, f) in out[a..b].iter_mut().zip(fit) {
                *o -= f;
            }
        }
    }
    let win = |len: usize| ((len + 2) / 3).min(span).max(1);
    for w in 1..segs.len() {
        let (pa, pb, _) = segs[w - 1];
        let (a, b, _) = segs[w];
        let wp = win(pb - pa);
        let wc = win(b - a);
        let prev = out[pb - wp..pb].iter().sum::<f64>() / wp as f64;
        let cur = out[a..a + wc].iter().sum::<f64>() / wc as f64;
        let shift = prev - cur;
        for o in &mut out[a..b] {
            *o += shift;
        }
    }
    out
}
