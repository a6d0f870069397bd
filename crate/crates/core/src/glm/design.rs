//! Design matrices: HRF, drift and short-channel regressors.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::glm::basis::Basis;
use crate::linalg::Mat;
use crate::recording::StimTable;
use crate::stats::zscore;
use crate::tensor::{Coord, LabeledTensor, Reduction};
use crate::units::Unit;

/// Regressors shared by all channels (`common`, dims `(time, regressor, S)`)
/// and per-channel regressors (`channel_wise`, dims `(time, regressor, S,
/// channel)`), where `S` is the signal dim (`chromo` or `wavelength`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DesignMatrix {
    pub common: Option<LabeledTensor>,
    pub channel_wise: Vec<LabeledTensor>,
}

/// The non-channel, non-time dim of a `(channel, S, time)` series.
pub fn signal_dim(ts: &LabeledTensor) -> Result<String> {
    for d in ["chromo", "wavelength"] {
        if ts.has_dim(d) {
            return Ok(d.to_string());
        }
    }
    Err(Error::DimMismatch("series needs a chromo or wavelength dim".into()))
}

/// Builds `(time, regressor, S)` by repeating `columns` (one per label) over `S`.
fn common_from_columns(ts: &LabeledTensor, labels: Vec<String>, columns: &[Vec<f64>]) -> Result<LabeledTensor> {
    let sdim = signal_dim(ts)?;
    let time = ts.coord_f64("time")?.to_vec();
    let ns = ts.size(&sdim)?;
    let (nt, nr) = (time.len(), labels.len());
    let mut data = vec![0.0; nt * nr * ns];
    for t in 0..nt {
        for r in 0..nr {
            for s in 0..ns {
                data[(t * nr + r) * ns + s] = columns[r][t];
            }
        }
    }
    let mut coords = vec![Coord::f64("time", "time", time), Coord::strings("regressor", "regressor", labels)];
    coords.extend(ts.coords_on(&sdim).cloned());
    LabeledTensor::new(
        vec!["time".into(), "regressor".into(), sdim],
        vec![nt, nr, ns],
        data,
        coords,
        Unit::unitless(),
    )
}

impl DesignMatrix {
    pub fn from_common(common: LabeledTensor) -> Self {
        DesignMatrix { common: Some(common), channel_wise: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.common.is_none() && self.channel_wise.is_empty()
    }

    /// All regressor labels: common first, then channel-wise in order.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in self.common.iter().chain(self.channel_wise.iter()) {
            out.extend(t.coord_str("regressor").map(|s| s.to_vec()).unwrap_or_default());
        }
        out
    }

    pub fn common_labels(&self) -> Vec<String> {
        self.common.as_ref().and_then(|c| c.coord_str("regressor").ok()).map(|s| s.to_vec()).unwrap_or_default()
    }

    pub fn time(&self) -> Option<&[f64]> {
        self.common.iter().chain(self.channel_wise.iter()).next().and_then(|t| t.coord_f64("time").ok())
    }

    fn parts(&self) -> impl Iterator<Item = &LabeledTensor> {
        self.common.iter().chain(self.channel_wise.iter())
    }

    /// Concatenates regressors; labels must be unique and time grids identical.
    pub fn combine(&self, other: &DesignMatrix) -> Result<DesignMatrix> {
        if let (Some(a), Some(b)) = (self.time(), other.time()) {
            if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.to_bits() != y.to_bits()) {
                return Err(Error::GridMismatch("design matrices differ in time".into()));
            }
        }
        let mine = self.labels();
        if let Some(dup) = other.labels().into_iter().find(|l| mine.contains(l)) {
            return Err(Error::DuplicateRegressor(dup));
        }
        let common = match (&self.common, &other.common) {
            (Some(a), Some(b)) => Some(LabeledTensor::concat(&[a.clone(), b.clone()], "regressor")?),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        let mut channel_wise = self.channel_wise.clone();
        channel_wise.extend(other.channel_wise.iter().cloned());
        Ok(DesignMatrix { common, channel_wise })
    }

    /// Design columns for one channel and signal index; `G` is `N × P`.
    pub fn columns(&self, channel: &str, s: usize) -> Result<(Vec<String>, Mat)> {
        let mut labels = Vec::new();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for part in self.parts() {
            let nt = part.shape()[0];
            let nr = part.shape()[1];
            let ns = part.shape()[2];
            let names = part.coord_str("regressor")?;
            let (ch, nch) = if part.has_dim("channel") {
                let idx = part
                    .coord_str("channel")?
                    .iter()
                    .position(|c| c == channel)
                    .ok_or_else(|| Error::ChannelMismatch(channel.to_string()))?;
                (idx, part.shape()[3])
            } else {
                (0, 1)
            };
            for r in 0..nr {
                labels.push(names[r].clone());
                cols.push((0..nt).map(|t| part.data()[((t * nr + r) * ns + s) * nch + ch]).collect());
            }
        }
        let n = cols.first().map(|c| c.len()).unwrap_or(0);
        Ok((labels, Mat::from_fn(n, cols.len(), |i, j| cols[j][i])))
    }
}

/// HRF regressors: for every trial type (sorted) and basis component,
/// `r(t) = Σ_events value·b(t − onset)`.
pub fn hrf_regressors(ts: &LabeledTensor, stim: &StimTable, basis: &Basis) -> Result<DesignMatrix> {
    basis.validate()?;
    if stim.is_empty() {
        return Err(Error::EmptyStim);
    }
    let time = ts.coord_f64("time")?;
    let k = basis.n_components();
    let mut labels = Vec::new();
    let mut columns = Vec::new();
    for tt in stim.trial_types() {
        let events: Vec<_> = stim.of_type(&tt).collect();
        let mut cols = vec![vec![0.0; time.len()]; k];
        for ev in events {
            let peak = basis.peak(ev.duration);
            for (n, &t) in time.iter().enumerate() {
                let u = t - ev.onset;
                for (j, col) in cols.iter_mut().enumerate() {
                    col[n] += ev.value * basis.eval_scaled(j, u, ev.duration, peak);
                }
            }
        }
        labels.extend(basis.labels(&tt));
        columns.extend(cols);
    }
    Ok(DesignMatrix::from_common(common_from_columns(ts, labels, &columns)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drift {
    /// `K = max(floor(2·T·fmax), 1)` cosines `cos(π·k·t/T)` with `t` from the
    /// first sample and `T = N·Δt`.
    Cosine { fmax: f64 },
    /// `(t − t₀)^k` for `k ≤ order`, each scaled to max-abs 1.
    Poly { order: usize },
}

pub fn drift_regressors(ts: &LabeledTensor, kind: Drift) -> Result<DesignMatrix> {
    let time = ts.coord_f64("time")?;
    let n = time.len();
    if n < 2 {
        return Err(Error::TooShort("drift needs two samples".into()));
    }
    let dt = 1.0 / crate::signal::sampling_rate(time)?;
    let t0 = time[0];
    let (labels, columns): (Vec<String>, Vec<Vec<f64>>) = match kind {
        Drift::Cosine { fmax } => {
            if !(fmax >= 0.0) {
                return Err(Error::BadParam("cosine fmax must be ≥ 0".into()));
            }
            let total = n as f64 * dt;
            let k = (libm::floor(2.0 * total * fmax) as usize).max(1);
            (0..k)
                .map(|j| {
                    let col = time.iter().map(|&t| libm::cos(core::f64::consts::PI * j as f64 * (t - t0) / total)).collect();
                    (alloc::format!("Drift Cos {j}"), col)
                })
                .unzip()
        }
        Drift::Poly { order } => (0..=order)
            .map(|j| {
                let mut col: Vec<f64> = time.iter().map(|&t| libm::pow(t - t0, j as f64)).collect();
                let m = col.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
                if m > 0.0 {
                    col.iter_mut().for_each(|x| *x /= m);
                }
                (alloc::format!("Drift {j}"), col)
            })
            .unzip(),
    };
    Ok(DesignMatrix::from_common(common_from_columns(ts, labels, &columns)?))
}

/// One common regressor "short": the mean over short channels, z-scored per signal index.
pub fn short_channel_regressor(short_ts: &LabeledTensor) -> Result<DesignMatrix> {
    if !short_ts.has_dim("channel") || short_ts.size("channel")? == 0 {
        return Err(Error::NoShortChannels);
    }
    let sdim = signal_dim(short_ts)?;
    let m = short_ts.reduce("channel", Reduction::Mean)?.transpose(&["time", &sdim])?;
    let (nt, ns) = (m.shape()[0], m.shape()[1]);
    let mut data = vec![0.0; nt * ns];
    for s in 0..ns {
        let mut lane: Vec<f64> = (0..nt).map(|t| m.data()[t * ns + s]).collect();
        if !zscore(&mut lane) {
            return Err(Error::BadParam("short-channel mean has zero variance".into()));
        }
        for t in 0..nt {
            data[t * ns + s] = lane[t];
        }
    }
    let mut coords = vec![Coord::f64("time", "time", short_ts.coord_f64("time")?.to_vec()), Coord::str("regressor", "regressor", &["short"])];
    coords.extend(short_ts.coords_on(&sdim).cloned());
    let t = LabeledTensor::new(vec!["time".into(), "regressor".into(), sdim], vec![nt, 1, ns], data, coords, Unit::unitless())?;
    Ok(DesignMatrix::from_common(t))
}
