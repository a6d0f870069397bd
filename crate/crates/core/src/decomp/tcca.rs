//! Temporally embedded CCA: `x` is augmented with forward-shifted copies.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::cca::{as_matrix, check_features, fit_matrices, latent_tensor, CcaParams, FitDims, Standardizer};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, Mat};
use crate::signal::sampling_rate;
use crate::stats::pearson;
use crate::tensor::{Coord, LabeledTensor};
use crate::units::Unit;

#[derive(Debug, Clone, PartialEq)]
pub struct TccaModel {
    pub params: CcaParams,
    pub dims: FitDims,
    pub features_x: Vec<String>,
    pub features_y: Vec<String>,
    /// Shifts in seconds, sorted and starting at 0.
    pub time_shifts: Vec<f64>,
    /// Shifts in samples.
    pub offsets: Vec<usize>,
    pub fs: f64,
    /// `(shift·channel) × component`, shift-major rows.
    pub wx: Mat,
    pub wy: Mat,
    pub std_x: Standardizer,
    pub std_y: Standardizer,
    pub correlations: Vec<f64>,
    /// Seconds, one per component.
    pub optimal_shift: Vec<f64>,
    pub shift_source: bool,
    pub warnings: Vec<String>,
}

/// Sorted, deduplicated shifts with 0 added, rounded to whole samples.
fn prepare_shifts(shifts: &[f64], fs: f64, n: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    let duration = n as f64 / fs;
    let mut s: Vec<f64> = shifts.to_vec();
    s.push(0.0);
    for &v in &s {
        if !(v >= 0.0) || v >= duration {
            return Err(Error::ShiftOutOfRange(v));
        }
    }
    let mut off: Vec<usize> = s.iter().map(|&v| libm::round(v * fs) as usize).collect();
    off.sort_unstable();
    off.dedup();
    if off.last().is_some_and(|&k| k >= n) {
        return Err(Error::ShiftOutOfRange(off[off.len() - 1] as f64 / fs));
    }
    Ok((off.iter().map(|&k| libm::round(k as f64 / fs * 1e9) / 1e9).collect(), off))
}

/// `x̃[t, (k, c)] = x[t + offset_k, c]`, zero past the end.
fn embed(x: &Mat, offsets: &[usize]) -> Mat {
    let (n, f) = x.shape();
    Mat::from_fn(n, f * offsets.len(), |t, j| {
        let (k, c) = (j / f, j % f);
        let s = t + offsets[k];
        if s < n { x[(s, c)] } else { 0.0 }
    })
}

/// Largest correlation between `sy` and any projection of one shifted block,
/// over the rows free of zero padding.
fn best_lag_correlation(block: &Mat, sy: &[f64], offset: usize) -> f64 {
    let keep = block.nrows() - offset;
    let b = block.rows(0, keep).into_owned();
    let target = Mat::from_column_slice(keep, 1, &sy[..keep]);
    let w = lstsq(&b, &target);
    let fit = &b * w;
    pearson(fit.as_slice(), &sy[..keep])
}

fn time_axis(t: &LabeledTensor, sample: &str) -> Result<f64> {
    sampling_rate(t.coord_f64(sample)?)
}

/// Fits plain CCA on the embedded `x` and estimates the source lag.
///
/// The lag of a component is the shift whose single copy of `x` best
/// reconstructs that component's `y` source.
pub fn fit_tcca(
    x: &LabeledTensor,
    y: &LabeledTensor,
    params: &CcaParams,
    dims: &FitDims,
    time_shifts: &[f64],
    shift_source: bool,
) -> Result<TccaModel> {
    let (xm, features_x) = as_matrix(x, &dims.sample, &dims.feature_x)?;
    let (ym, features_y) = as_matrix(y, &dims.sample, &dims.feature_y)?;
    let fs = time_axis(x, &dims.sample)?;
    if x.coord_f64(&dims.sample)? != y.coord_f64(&dims.sample)? {
        return Err(Error::ShapeMismatch("x and y sample grids differ".into()));
    }
    let (shifts, offsets) = prepare_shifts(time_shifts, fs, xm.nrows())?;
    let std_x = Standardizer::fit(&xm, params.scale);
    let std_y = Standardizer::fit(&ym, params.scale);
    let xs = embed(&std_x.apply(&xm), &offsets);
    let ys = std_y.apply(&ym);
    let (wx, wy, correlations, warnings) = fit_matrices(&xs, &ys, params)?;
    let f = xm.ncols();
    let mut optimal_shift = Vec::with_capacity(wx.ncols());
    for c in 0..wx.ncols() {
        let sy = &ys * wy.column(c);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for (k, &s) in shifts.iter().enumerate() {
            let r = best_lag_correlation(&xs.columns(k * f, f).into_owned(), sy.as_slice(), offsets[k]);
            if r.is_finite() && r > best.0 {
                best = (r, s);
            }
        }
        optimal_shift.push(best.1);
    }
    Ok(TccaModel {
        params: params.clone(),
        dims: dims.clone(),
        features_x,
        features_y,
        time_shifts: shifts,
        offsets,
        fs,
        wx,
        wy,
        std_x,
        std_y,
        correlations,
        optimal_shift,
        shift_source,
        warnings,
    })
}

impl TccaModel {
    /// Samples dropped from the end of transformed outputs.
    pub fn truncation(&self) -> usize {
        if !self.shift_source {
            return 0;
        }
        let s = self.optimal_shift.iter().fold(0.0f64, |a, &b| a.max(b));
        libm::round(s * self.fs) as usize
    }

    /// Weights as `(time_shift, channel, latent)`.
    pub fn wx_tensor(&self) -> Result<LabeledTensor> {
        let (nk, f, k) = (self.offsets.len(), self.features_x.len(), self.wx.ncols());
        let mut data = Vec::with_capacity(nk * f * k);
        for s in 0..nk {
            for c in 0..f {
                data.extend(self.wx.row(s * f + c).iter());
            }
        }
        let latent = self.params.latent_x();
        let fd = self.dims.feature_x.as_str();
        LabeledTensor::new(
            vec!["time_shift".into(), fd.into(), latent.clone()],
            vec![nk, f, k],
            data,
            vec![
                Coord::f64("time_shift", "time_shift", self.time_shifts.clone()),
                Coord::strings(fd, fd, self.features_x.clone()),
                Coord::strings(&latent, &latent, (1..=k).map(|i| alloc::format!("Sx{i}")).collect()),
            ],
            Unit::unitless(),
        )
    }
}

pub fn transform_tcca(model: &TccaModel, x: &LabeledTensor, y: &LabeledTensor) -> Result<(LabeledTensor, LabeledTensor)> {
    let d = &model.dims;
    let (xm, fx) = as_matrix(x, &d.sample, &d.feature_x)?;
    let (ym, fy) = as_matrix(y, &d.sample, &d.feature_y)?;
    check_features(&model.features_x, &fx, "x")?;
    check_features(&model.features_y, &fy, "y")?;
    let n = xm.nrows();
    if ym.nrows() != n {
        return Err(Error::ShapeMismatch(alloc::format!("{n} vs {} samples", ym.nrows())));
    }
    let cut = model.truncation();
    if cut >= n {
        return Err(Error::ShiftOutOfRange(cut as f64 / model.fs));
    }
    let keep = n - cut;
    let sx = embed(&model.std_x.apply(&xm), &model.offsets) * &model.wx;
    let sy = model.std_y.apply(&ym) * &model.wy;
    let xt = x.transpose(&[d.sample.as_str(), d.feature_x.as_str()])?.isel(&d.sample, &(0..keep).collect::<Vec<_>>())?;
    let yt = y.transpose(&[d.sample.as_str(), d.feature_y.as_str()])?.isel(&d.sample, &(0..keep).collect::<Vec<_>>())?;
    Ok((
        latent_tensor(&sx.rows(0, keep).into_owned(), &xt, &d.sample, &model.params.latent_x(), "Sx")?,
        latent_tensor(&sy.rows(0, keep).into_owned(), &yt, &d.sample, &model.params.latent_y(), "Sy")?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::cca::fit_cca;
    use crate::sim::{preprocess_toy, simulate_bimodal_toy, ToyConfig};

    fn toy_train(seed: u64) -> (LabeledTensor, LabeledTensor) {
        let ds = simulate_bimodal_toy(&ToyConfig { dt: 2.0, seed, ..ToyConfig::default() }).unwrap();
        let sp = preprocess_toy(&ds, 0.8).unwrap();
        (sp.x_power.train, sp.y.train)
    }

    #[test]
    fn zero_shift_is_plain_cca() {
        let (x, y) = toy_train(1);
        let p = CcaParams::cca(1);
        let a = fit_cca(&x, &y, &p, &FitDims::default()).unwrap();
        let b = fit_tcca(&x, &y, &p, &FitDims::default(), &[0.0], true).unwrap();
        assert!((a.correlations[0] - b.correlations[0]).abs() < 1e-9);
        assert!((&a.wx - &b.wx).norm() < 1e-9);
        assert_eq!(b.optimal_shift, vec![0.0]);
    }

    #[test]
    fn recovers_toy_lag() {
        let (x, y) = toy_train(137);
        let m = fit_tcca(&x, &y, &CcaParams::cca(1), &FitDims::default(), &[0.0, 1.0, 2.0, 3.0, 4.0], true).unwrap();
        assert_eq!(m.optimal_shift, vec![2.0]);
        let (sx, sy) = transform_tcca(&m, &x, &y).unwrap();
        let n = x.size("time").unwrap();
        assert_eq!(sx.size("time").unwrap(), n - libm::round(2.0 * m.fs) as usize);
        assert_eq!(sy.size("time").unwrap(), sx.size("time").unwrap());
        let w = m.wx_tensor().unwrap();
        assert_eq!(w.dims(), &["time_shift", "channel", "CCA_X"]);
        assert_eq!(w.shape(), &[5, 32, 1]);
    }

    #[test]
    fn shift_validation() {
        let (x, y) = toy_train(2);
        let dims = FitDims::default();
        assert!(matches!(fit_tcca(&x, &y, &CcaParams::cca(1), &dims, &[-1.0], true), Err(Error::ShiftOutOfRange(_))));
        assert!(matches!(fit_tcca(&x, &y, &CcaParams::cca(1), &dims, &[1e6], true), Err(Error::ShiftOutOfRange(_))));
        let m = fit_tcca(&x, &y, &CcaParams::cca(1), &dims, &[2.0, 1.0, 1.02], false).unwrap();
        assert_eq!(m.time_shifts, vec![0.0, 1.0, 2.0]);
        assert_eq!(m.truncation(), 0);
    }
}
