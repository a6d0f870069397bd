//! Contrasts, t-tests and HRF extraction with parameter uncertainty.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::glm::basis::Basis;
use crate::glm::design::{hrf_regressors, signal_dim, DesignMatrix};
use crate::glm::fit::FitResult;
use crate::linalg::{psd_factor, Mat};
use crate::recording::{StimEvent, StimTable};
use crate::rng::Rng;
use crate::stats::{t_two_sided_p, trapezoid};
use crate::tensor::{Coord, LabeledTensor};

fn is_hrf_of(label: &str, cond: &str) -> bool {
    let head = alloc::format!("HRF {cond}");
    label == head || label.strip_prefix(&head).is_some_and(|r| r.starts_with(' '))
}

/// Contrast weights over `dm.labels()`: `+∫ r·m₁ dt` for HRF regressors of
/// `cond1`, `−∫ r·m₂ dt` for those of `cond2`, where `m` is 1 inside
/// `[onset+tmin, onset+tmax]` of the condition's events. Each run of the
/// mask is integrated by the trapezoid rule over its own samples. Common regressors
/// at the first signal index are used; other entries are 0.
pub fn auc_contrast(dm: &DesignMatrix, stim: &StimTable, cond1: &str, cond2: &str, tmin: f64, tmax: f64) -> Result<Vec<f64>> {
    let labels = dm.labels();
    let mut c = vec![0.0; labels.len()];
    let Some(common) = dm.common.as_ref() else { return Ok(c) };
    let time = common.coord_f64("time")?;
    let (nt, nr, ns) = (common.shape()[0], common.shape()[1], common.shape()[2]);
    let mask = |cond: &str| -> Vec<f64> {
        time.iter()
            .map(|&t| if stim.of_type(cond).any(|e| t >= e.onset + tmin && t <= e.onset + tmax) { 1.0 } else { 0.0 })
            .collect()
    };
    for (cond, sign) in [(cond1, 1.0), (cond2, -1.0)] {
        let m = mask(cond);
        let runs = mask_runs(&m);
        for r in 0..nr {
            if !is_hrf_of(&labels[r], cond) {
                continue;
            }
            let y: Vec<f64> = (0..nt).map(|t| common.data()[(t * nr + r) * ns]).collect();
            c[r] += sign * runs.iter().map(|rg| trapezoid(&y[rg.clone()], &time[rg.clone()])).sum::<f64>();
        }
    }
    Ok(c)
}

/// Maximal runs of ones, integrated separately so the window edges are exact.
fn mask_runs(m: &[f64]) -> Vec<core::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &v) in m.iter().chain(core::iter::once(&0.0)).enumerate() {
        match (v > 0.0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Per `(channel, S, hypothesis)` estimate, standard error, t statistic and two-sided p.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastResult {
    pub estimate: LabeledTensor,
    pub stderr: LabeledTensor,
    pub stat: LabeledTensor,
    pub p_value: LabeledTensor,
}

pub fn t_test(fit: &FitResult, hypotheses: &[(String, Vec<f64>)]) -> Result<ContrastResult> {
    let (nch, ns, p) = (fit.params.shape()[0], fit.params.shape()[1], fit.params.shape()[2]);
    let nh = hypotheses.len();
    if let Some((name, _)) = hypotheses.iter().find(|(_, c)| c.len() != p) {
        return Err(Error::ShapeMismatch(alloc::format!("contrast `{name}` length differs from {p} regressors")));
    }
    let mut est = vec![0.0; nch * ns * nh];
    let mut se = vec![0.0; nch * ns * nh];
    let mut st = vec![0.0; nch * ns * nh];
    let mut pv = vec![0.0; nch * ns * nh];
    for ch in 0..nch {
        for s in 0..ns {
            let beta = fit.beta(ch, s);
            let cov = fit.cov_matrix(ch, s);
            let dof = fit.dof.data()[ch * ns + s];
            for (h, (_, c)) in hypotheses.iter().enumerate() {
                let cv = Mat::from_column_slice(p, 1, c);
                let e: f64 = c.iter().zip(&beta).map(|(a, b)| a * b).sum();
                let var = (cv.transpose() * &cov * &cv)[(0, 0)];
                let sd = libm::sqrt(var.max(0.0));
                let t = e / sd;
                let k = (ch * ns + s) * nh + h;
                est[k] = e;
                se[k] = sd;
                st[k] = t;
                pv[k] = if t.is_nan() { f64::NAN } else { t_two_sided_p(t, dof) };
            }
        }
    }
    let sdim = fit.params.dims()[1].clone();
    let mut coords: Vec<Coord> = fit.params.coords_on("channel").cloned().collect();
    coords.extend(fit.params.coords_on(&sdim).cloned());
    coords.push(Coord::strings("hypothesis", "hypothesis", hypotheses.iter().map(|h| h.0.clone()).collect()));
    let dims = vec!["channel".to_string(), sdim, "hypothesis".into()];
    let mk = |d: Vec<f64>, u: crate::units::Unit| LabeledTensor::new(dims.clone(), vec![nch, ns, nh], d, coords.clone(), u);
    let unit = fit.params.unit().clone();
    Ok(ContrastResult {
        estimate: mk(est, unit.clone())?,
        stderr: mk(se, unit)?,
        stat: mk(st, crate::units::Unit::unitless())?,
        p_value: mk(pv, crate::units::Unit::unitless())?,
    })
}

/// Design over a single-trial grid `reltime` with one event per trial type
/// at onset 0, for HRF extraction.
pub fn extraction_design(like: &LabeledTensor, basis: &Basis, trial_types: &[String], duration: f64, reltime: &[f64]) -> Result<DesignMatrix> {
    let sdim = signal_dim(like)?;
    let ns = like.size(&sdim)?;
    let n = reltime.len();
    let mut coords: Vec<Coord> = like.coords_on(&sdim).cloned().collect();
    coords.push(Coord::f64("time", "time", reltime.to_vec()));
    coords.push(Coord::str("channel", "channel", &["extract"]));
    let grid = LabeledTensor::new(vec!["channel".into(), sdim, "time".into()], vec![1, ns, n], vec![0.0; ns * n], coords, like.unit().clone())?;
    let stim = StimTable::new(trial_types.iter().map(|t| StimEvent::new(0.0, duration, 1.0, t)).collect())?;
    hrf_regressors(&grid, &stim, basis)
}

/// Mean and standard deviation (ddof 1) of predictions on `dm_extract` over
/// `n_samples` draws `β ~ N(β̂, Σ_β)` with unselected entries zeroed.
/// Outputs have dims `(channel, S, time)`.
pub fn predict_with_uncertainty(
    fit: &FitResult,
    dm_extract: &DesignMatrix,
    selector: &[String],
    n_samples: usize,
    seed: u64,
) -> Result<(LabeledTensor, LabeledTensor)> {
    if n_samples < 2 {
        return Err(Error::BadParam("need at least two samples".into()));
    }
    let labels = fit.regressors().to_vec();
    let (nch, ns, p) = (fit.params.shape()[0], fit.params.shape()[1], fit.params.shape()[2]);
    let time = dm_extract.time().ok_or_else(|| Error::BadParam("empty extraction design".into()))?.to_vec();
    let nt = time.len();
    let channels = fit.params.coord_str("channel")?.to_vec();
    let mut rng = Rng::new(seed);
    let mut mean = vec![0.0; nch * ns * nt];
    let mut std = vec![0.0; nch * ns * nt];
    for (ch, name) in channels.iter().enumerate() {
        for s in 0..ns {
            let (xl, x) = dm_extract.columns(if dm_extract.channel_wise.is_empty() { "" } else { name }, s)?;
            // Map extraction columns to fitted parameter indices, selected only.
            let map: Vec<Option<usize>> =
                xl.iter().map(|l| if selector.contains(l) { labels.iter().position(|f| f == l) } else { None }).collect();
            let beta = fit.beta(ch, s);
            let l = psd_factor(&fit.cov_matrix(ch, s))?;
            // Welford accumulation; identical draws give an exact zero spread.
            let mut m = vec![0.0; nt];
            let mut m2 = vec![0.0; nt];
            let mut d = vec![0.0; nt];
            for draw in 1..=n_samples {
                let z = Mat::from_fn(p, 1, |_, _| rng.normal());
                let b = &l * z;
                d.iter_mut().for_each(|v| *v = 0.0);
                for (j, mk) in map.iter().enumerate() {
                    if let Some(k) = mk {
                        let bk = beta[*k] + b[*k];
                        for (t, v) in d.iter_mut().enumerate() {
                            *v += x[(t, j)] * bk;
                        }
                    }
                }
                for t in 0..nt {
                    let delta = d[t] - m[t];
                    m[t] += delta / draw as f64;
                    m2[t] += delta * (d[t] - m[t]);
                }
            }
            let k = (ch * ns + s) * nt;
            for t in 0..nt {
                mean[k + t] = m[t];
                std[k + t] = libm::sqrt(m2[t] / (n_samples - 1) as f64);
            }
        }
    }
    let sdim = fit.params.dims()[1].clone();
    let mut coords: Vec<Coord> = fit.params.coords_on("channel").cloned().collect();
    coords.extend(fit.params.coords_on(&sdim).cloned());
    coords.push(Coord::f64("time", "time", time));
    let dims = vec!["channel".to_string(), sdim, "time".into()];
    let unit = fit.params.unit().clone();
    Ok((
        LabeledTensor::new(dims.clone(), vec![nch, ns, nt], mean, coords.clone(), unit.clone())?,
        LabeledTensor::new(dims, vec![nch, ns, nt], std, coords, unit)?,
    ))
}
