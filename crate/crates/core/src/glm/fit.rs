//! Least-squares fits per channel and signal index.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::glm::design::{signal_dim, DesignMatrix};
use crate::linalg::{dependent_columns, rank, spd_inverse, Mat};
use crate::tensor::{Coord, LabeledTensor};
use crate::units::Unit;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Ols,
    /// OLS, then Yule–Walker AR(p) on the residuals, prewhitening and a refit.
    ArGls { p: usize },
}

impl NoiseModel {
    pub fn name(&self) -> String {
        match self {
            NoiseModel::Ols => "ols".into(),
            NoiseModel::ArGls { p } => alloc::format!("ar_gls({p})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// `(channel, S, regressor)` in the unit of the series.
    pub params: LabeledTensor,
    /// `(channel, S, regressor, regressor2)`.
    pub cov: LabeledTensor,
    /// `(channel, S)`.
    pub dof: LabeledTensor,
    /// `(channel, S)`.
    pub sigma2: LabeledTensor,
    pub noise_model: String,
}

impl FitResult {
    pub fn regressors(&self) -> &[String] {
        self.params.coord_str("regressor").expect("fit has regressor labels")
    }

    pub fn beta(&self, ch: usize, s: usize) -> Vec<f64> {
        let p = self.params.shape()[2];
        let ns = self.params.shape()[1];
        self.params.data()[(ch * ns + s) * p..(ch * ns + s + 1) * p].to_vec()
    }

    pub fn cov_matrix(&self, ch: usize, s: usize) -> Mat {
        let p = self.params.shape()[2];
        let ns = self.params.shape()[1];
        let off = (ch * ns + s) * p * p;
        Mat::from_row_slice(p, p, &self.cov.data()[off..off + p * p])
    }
}

/// One fitted system: coefficients, covariance, dof and residual variance.
pub struct Solved {
    pub beta: Vec<f64>,
    pub cov: Mat,
    pub dof: f64,
    pub sigma2: f64,
}

/// OLS by the normal equations with full-rank checking.
pub fn ols(g: &Mat, y: &[f64], labels: &[String]) -> Result<Solved> {
    let n = g.nrows();
    let p = g.ncols();
    let r = rank(g);
    if r < p {
        let bad = dependent_columns(g).into_iter().map(|j| labels[j].clone()).collect();
        return Err(Error::RankDeficient(bad));
    }
    if n <= r {
        return Err(Error::TooShort(alloc::format!("{n} samples for {r} regressors")));
    }
    let gtg = g.transpose() * g;
    let inv = spd_inverse(&gtg)?;
    let yv = Mat::from_column_slice(n, 1, y);
    let beta = &inv * (g.transpose() * &yv);
    let resid = &yv - g * &beta;
    let dof = (n - r) as f64;
    let sigma2 = resid.iter().map(|e| e * e).sum::<f64>() / dof;
    Ok(Solved { beta: beta.iter().copied().collect(), cov: inv * sigma2, dof, sigma2 })
}

/// Yule–Walker AR(p) coefficients `φ` from biased autocovariances.
pub fn yule_walker(e: &[f64], p: usize) -> Result<Vec<f64>> {
    let n = e.len();
    if p == 0 {
        return Ok(Vec::new());
    }
    if n <= p {
        return Err(Error::TooShort("AR order exceeds series".into()));
    }
    let m = e.iter().sum::<f64>() / n as f64;
    let r: Vec<f64> = (0..=p).map(|k| (k..n).map(|i| (e[i] - m) * (e[i - k] - m)).sum::<f64>() / n as f64).collect();
    if r[0] == 0.0 {
        return Ok(vec![0.0; p]);
    }
    let toe = Mat::from_fn(p, p, |i, j| r[i.abs_diff(j)]);
    let rhs = Mat::from_fn(p, 1, |i, _| r[i + 1]);
    let phi = crate::linalg::solve_spd(&toe, &rhs)?;
    Ok(phi.iter().copied().collect())
}

/// Applies `x_t − Σ φ_i x_{t−i}` for `t ≥ p`, dropping the first `p` rows.
fn whiten_rows(x: &Mat, phi: &[f64]) -> Mat {
    let p = phi.len();
    Mat::from_fn(x.nrows() - p, x.ncols(), |i, j| {
        let t = i + p;
        x[(t, j)] - phi.iter().enumerate().map(|(k, f)| f * x[(t - k - 1, j)]).sum::<f64>()
    })
}

pub fn solve(g: &Mat, y: &[f64], labels: &[String], model: NoiseModel) -> Result<Solved> {
    let first = ols(g, y, labels)?;
    match model {
        NoiseModel::Ols => Ok(first),
        NoiseModel::ArGls { p } => {
            let b = Mat::from_column_slice(first.beta.len(), 1, &first.beta);
            let yv = Mat::from_column_slice(y.len(), 1, y);
            let resid = &yv - g * b;
            let phi = yule_walker(resid.as_slice(), p)?;
            let gw = whiten_rows(g, &phi);
            let yw = whiten_rows(&yv, &phi);
            ols(&gw, yw.as_slice(), labels)
        }
    }
}

/// Fits every `(channel, S)` lane of `ts` independently against its design columns.
pub fn fit(ts: &LabeledTensor, dm: &DesignMatrix, model: NoiseModel) -> Result<FitResult> {
    let sdim = signal_dim(ts)?;
    let t = ts.transpose(&["channel", &sdim, "time"])?;
    let (nch, ns, nt) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    if let Some(grid) = dm.time() {
        let time = t.coord_f64("time")?;
        if grid.len() != nt || grid.iter().zip(time).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(Error::GridMismatch("design and series time differ".into()));
        }
    }
    let labels = dm.labels();
    let p = labels.len();
    let channels = t.coord_str("channel")?.to_vec();
    let mut params = vec![0.0; nch * ns * p];
    let mut cov = vec![0.0; nch * ns * p * p];
    let mut dof = vec![0.0; nch * ns];
    let mut sigma2 = vec![0.0; nch * ns];
    for (c, ch) in channels.iter().enumerate() {
        for s in 0..ns {
            let (_, g) = dm.columns(ch, s)?;
            let y = &t.data()[(c * ns + s) * nt..(c * ns + s + 1) * nt];
            let sol = solve(&g, y, &labels, model)?;
            let k = c * ns + s;
            params[k * p..(k + 1) * p].copy_from_slice(&sol.beta);
            for i in 0..p {
                for j in 0..p {
                    // Symmetrize against round-off.
                    cov[k * p * p + i * p + j] = 0.5 * (sol.cov[(i, j)] + sol.cov[(j, i)]);
                }
            }
            dof[k] = sol.dof;
            sigma2[k] = sol.sigma2;
        }
    }
    let mut base: Vec<Coord> = t.coords_on("channel").cloned().collect();
    base.extend(t.coords_on(&sdim).cloned());
    let reg = Coord::strings("regressor", "regressor", labels.clone());
    let reg2 = Coord::strings("regressor2", "regressor2", labels);
    let mk = |dims: Vec<&str>, shape: Vec<usize>, data: Vec<f64>, extra: Vec<Coord>, unit: Unit| {
        let mut coords = base.clone();
        coords.extend(extra);
        LabeledTensor::new(dims.into_iter().map(|d| d.to_string()).collect(), shape, data, coords, unit)
    };
    let unit = ts.unit().clone();
    let unit2 = unit.mul(&unit);
    Ok(FitResult {
        params: mk(vec!["channel", &sdim, "regressor"], vec![nch, ns, p], params, vec![reg.clone()], unit.clone())?,
        cov: mk(vec!["channel", &sdim, "regressor", "regressor2"], vec![nch, ns, p, p], cov, vec![reg, reg2], unit2.clone())?,
        dof: mk(vec!["channel", &sdim], vec![nch, ns], dof, vec![], Unit::unitless())?,
        sigma2: mk(vec!["channel", &sdim], vec![nch, ns], sigma2, vec![], unit2)?,
        noise_model: model.name(),
    })
}

/// `G_subset·β_subset` per channel and signal index, in the dim order of `ts`.
/// `subset = None` uses all regressors; an empty subset yields zeros.
pub fn predict(ts: &LabeledTensor, fit: &FitResult, dm: &DesignMatrix, subset: Option<&[String]>) -> Result<LabeledTensor> {
    let sdim = signal_dim(ts)?;
    let t = ts.transpose(&["channel", &sdim, "time"])?;
    let (nch, ns, nt) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let fitted = fit.regressors().to_vec();
    let channels = t.coord_str("channel")?.to_vec();
    let fit_channels = fit.params.coord_str("channel")?;
    let mut out = vec![0.0; nch * ns * nt];
    for (c, ch) in channels.iter().enumerate() {
        let fc = fit_channels.iter().position(|x| x == ch).ok_or_else(|| Error::ChannelMismatch(ch.clone()))?;
        for s in 0..ns {
            let (labels, g) = dm.columns(ch, s)?;
            let beta = fit.beta(fc, s);
            let lane = &mut out[(c * ns + s) * nt..(c * ns + s + 1) * nt];
            for (j, l) in labels.iter().enumerate() {
                if subset.is_some_and(|sub| !sub.contains(l)) {
                    continue;
                }
                let Some(k) = fitted.iter().position(|f| f == l) else { continue };
                for (i, v) in lane.iter_mut().enumerate().take(g.nrows()) {
                    *v += g[(i, j)] * beta[k];
                }
            }
        }
    }
    let pred = t.with_data(out)?;
    let order: Vec<&str> = ts.dims().iter().map(|s| s.as_str()).collect();
    pred.transpose(&order)
}

/// `1 − SS_res/SS_tot`.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let ss_tot: f64 = y.iter().map(|a| (a - m) * (a - m)).sum();
    1.0 - ss_res / ss_tot
}

/// Median absolute residual.
pub fn mar(y: &[f64], yhat: &[f64]) -> f64 {
    let r: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).collect();
    crate::stats::median(&r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::design::tests::conc_ts;
    use crate::linalg::pinv;
    use crate::rng::Rng;

    fn random_design(rng: &mut Rng, n: usize, p: usize) -> (Mat, Vec<String>) {
        let g = Mat::from_fn(n, p, |_, _| rng.normal());
        (g, (0..p).map(|j| alloc::format!("r{j}")).collect())
    }

    #[test]
    fn exact_recovery() {
        let mut rng = Rng::new(1);
        let (g, l) = random_design(&mut rng, 50, 4);
        let b0 = [1.0, -2.0, 0.5, 3.0];
        let y: Vec<f64> = (0..50).map(|i| (0..4).map(|j| g[(i, j)] * b0[j]).sum()).collect();
        let s = ols(&g, &y, &l).unwrap();
        for (a, b) in s.beta.iter().zip(b0) {
            assert!((a - b).abs() <= 1e-8 * b.abs());
        }
    }

    #[test]
    fn constant_regressor_gives_mean() {
        let mut rng = Rng::new(2);
        let y = rng.normals(100);
        let g = Mat::from_element(100, 1, 1.0);
        let s = ols(&g, &y, &["c".into()]).unwrap();
        assert!((s.beta[0] - crate::stats::mean(&y)).abs() < 1e-14);
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let mut g = Mat::from_fn(20, 3, |i, j| (i * (j + 1)) as f64 + if j == 0 { 1.0 } else { 0.0 });
        for i in 0..20 {
            g[(i, 2)] = 2.0 * g[(i, 1)];
        }
        let l: Vec<String> = ["a", "b", "b2"].iter().map(|s| s.to_string()).collect();
        assert_eq!(ols(&g, &[0.0; 20], &l).err(), Some(Error::RankDeficient(vec!["b2".into()])));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn matches_pinv_oracle_and_orthogonal(seed in 0u64..10_000) {
            let mut rng = Rng::new(seed);
            let (g, l) = random_design(&mut rng, 200, 10);
            let y = rng.normals(200);
            let s = ols(&g, &y, &l).unwrap();
            let yv = Mat::from_column_slice(200, 1, &y);
            let oracle = pinv(&g, 1e-14) * &yv;
            for (a, b) in s.beta.iter().zip(oracle.iter()) {
                proptest::prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-3));
            }
            let e = &yv - &g * Mat::from_column_slice(10, 1, &s.beta);
            let gte = g.transpose() * &e;
            for j in 0..10 {
                proptest::prop_assert!(gte[j].abs() <= 1e-8 * yv.norm() * g.column(j).norm());
            }
        }
    }

    #[test]
    fn ar_gls_recovers_coefficients() {
        let mut rng = Rng::new(4);
        let n = 4000;
        let g = Mat::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i as f64 * 0.01).sin() });
        let mut e = vec![0.0; n];
        for i in 1..n {
            e[i] = 0.8 * e[i - 1] + rng.normal();
        }
        let y: Vec<f64> = (0..n).map(|i| 2.0 + 3.0 * g[(i, 1)] + e[i]).collect();
        let l: Vec<String> = vec!["c".into(), "s".into()];
        let phi = yule_walker(&e, 1).unwrap();
        assert!((phi[0] - 0.8).abs() < 0.05);
        let s = solve(&g, &y, &l, NoiseModel::ArGls { p: 1 }).unwrap();
        assert!((s.beta[1] - 3.0).abs() < 0.5);
        assert_eq!(s.dof, (n - 1 - 2) as f64);
    }

    #[test]
    fn fit_predict_roundtrip() {
        let fs = 2.0;
        let n = 300;
        let ts0 = conc_ts(2, n, fs, None);
        let dm = crate::glm::design::drift_regressors(&ts0, crate::glm::design::Drift::Poly { order: 2 }).unwrap();
        let mut rng = Rng::new(8);
        let (_, g) = dm.columns("S1D1", 0).unwrap();
        let mut data = Vec::new();
        for _ in 0..4 {
            let b: Vec<f64> = rng.normals(3);
            data.extend((0..n).map(|i| (0..3).map(|j| g[(i, j)] * b[j]).sum::<f64>()));
        }
        let ts = ts0.with_data(data).unwrap();
        let f = fit(&ts, &dm, NoiseModel::Ols).unwrap();
        assert_eq!(f.params.dims(), &["channel", "chromo", "regressor"]);
        let full = predict(&ts, &f, &dm, None).unwrap();
        for (a, b) in full.data().iter().zip(ts.data()) {
            assert!((a - b).abs() < 1e-9);
        }
        let empty = predict(&ts, &f, &dm, Some(&[])).unwrap();
        assert!(empty.data().iter().all(|&x| x == 0.0));
        let a = predict(&ts, &f, &dm, Some(&["Drift 0".into()])).unwrap();
        let b = predict(&ts, &f, &dm, Some(&["Drift 1".into(), "Drift 2".into()])).unwrap();
        for i in 0..a.len() {
            assert!((a.data()[i] + b.data()[i] - full.data()[i]).abs() < 1e-9);
        }
        assert!((r_squared(ts.data(), full.data()) - 1.0).abs() < 1e-9);
        assert!(mar(ts.data(), full.data()) < 1e-9);
    }
}
