//! Bimodal EEG/fNIRS toy data from a random linear mixing model.
//!
//! Each channel-space term (background, target, sensor noise) is scaled to
//! unit Frobenius norm before weighting, so `20·log10(γ)` is the
//! target-to-background ratio in dB.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::signal::{butter, Band, Sos};
use crate::tensor::{Coord, LabeledTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub nx: usize,
    pub ny: usize,
    pub ns_all: usize,
    pub ns_target: usize,
    pub t: f64,
    pub t_epoch: f64,
    pub rate: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub dt: f64,
    pub gamma: f64,
    pub gamma_e: f64,
    pub ellx: f64,
    pub elly: f64,
    pub sigma_noise: f64,
    pub invert_sy: bool,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            nx: 32,
            ny: 28,
            ns_all: 100,
            ns_target: 1,
            t: 300.0,
            t_epoch: 0.1,
            rate: 100.0,
            f_min: 8.0,
            f_max: 12.0,
            dt: 0.0,
            gamma: 0.6,
            gamma_e: 0.5,
            ellx: 0.5,
            elly: 0.2,
            sigma_noise: 0.1,
            invert_sy: false,
            seed: 137,
        }
    }
}

impl ToyConfig {
    pub fn snr_db(&self) -> f64 {
        20.0 * libm::log10(self.gamma)
    }

    fn samples_per_epoch(&self) -> usize {
        libm::round(self.t_epoch * self.rate) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadConfig(m.into()));
        if self.nx == 0 || self.ny == 0 {
            return bad("channel counts must be positive");
        }
        if self.ns_target == 0 || self.ns_target > self.ns_all {
            return bad("need 1 <= Ns_target <= Ns_all");
        }
        if !(self.rate > 0.0 && self.f_min > 0.0 && self.f_min < self.f_max && self.f_max < self.rate / 2.0) {
            return bad("need 0 < f_min < f_max < rate/2");
        }
        let spe = self.t_epoch * self.rate;
        if !(spe >= 1.0) || (spe - libm::round(spe)).abs() > 1e-9 {
            return bad("T_epoch·rate must be a positive integer");
        }
        if !(self.t > 0.0) || libm::floor(self.t * self.rate / spe) < 2.0 {
            return bad("T must span at least two epochs");
        }
        if !(self.dt >= 0.0 && self.dt < self.t) {
            return bad("need 0 <= dT < T");
        }
        if !(self.gamma >= 0.0 && self.gamma_e >= 0.0 && self.sigma_noise >= 0.0) {
            return bad("gamma, gamma_e and sigma_noise must be non-negative");
        }
        if !(self.ellx > 0.0 && self.elly > 0.0) {
            return bad("RBF widths must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    /// `(time, channel)` at `rate`.
    pub x: LabeledTensor,
    /// `(time, channel)` band power per epoch.
    pub x_power: LabeledTensor,
    /// `(time, channel)` at the epoch rate.
    pub y: LabeledTensor,
    /// Target EEG sources `(time, source)` at `rate`.
    pub sx: LabeledTensor,
    /// Band power of `sx` per epoch.
    pub sx_power: LabeledTensor,
    /// Target fNIRS sources `(time, source)` per epoch.
    pub sy: LabeledTensor,
    /// Mixing `(channel, source)`; target sources come first.
    pub ax: LabeledTensor,
    pub ay: LabeledTensor,
    /// 1-D montage positions in `[0, 1]`.
    pub x_positions: Vec<f64>,
    pub y_positions: Vec<f64>,
}

struct Filters {
    envelope: Sos,
    band: Sos,
    /// Burn-in samples discarded on each side of slow envelopes.
    margin: usize,
}

fn envelope(rng: &mut Rng, f: &Filters, n: usize) -> Vec<f64> {
    let m = n + 2 * f.margin;
    let raw = rng.normals(m);
    let rect: Vec<f64> = f.envelope.filtfilt(&raw, 0).iter().map(|x| x.abs()).collect();
    let mut e = f.envelope.filtfilt(&rect, 0)[f.margin..f.margin + n].to_vec();
    let m = e.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    for x in e.iter_mut() {
        *x = (*x / m).max(0.05);
    }
    e
}

fn carrier(rng: &mut Rng, f: &Filters, n: usize) -> Vec<f64> {
    let mut c = f.band.filtfilt(&rng.normals(n), n - 1);
    let s = crate::stats::std(&c, 0);
    c.iter_mut().for_each(|x| *x /= s);
    c
}

fn epoch_mean(x: &[f64], spe: usize, e: usize) -> Vec<f64> {
    (0..e).map(|k| x[k * spe..(k + 1) * spe].iter().sum::<f64>() / spe as f64).collect()
}

fn epoch_power(x: &[f64], f: &Filters, spe: usize, e: usize) -> Vec<f64> {
    let b = f.band.filtfilt(x, x.len() - 1);
    (0..e).map(|k| crate::stats::var(&b[k * spe..(k + 1) * spe], 0)).collect()
}

fn grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// `sum_k a[c][k]·s[k][t]`, returned as rows over time of length `nc`.
fn mix(a: &[Vec<f64>], s: &[Vec<f64>], n: usize) -> Vec<f64> {
    let nc = a.len();
    let mut out = vec![0.0; n * nc];
    for (c, row) in a.iter().enumerate() {
        for (k, src) in s.iter().enumerate() {
            let w = row[k];
            for (t, &v) in src.iter().enumerate() {
                out[t * nc + c] += w * v;
            }
        }
    }
    out
}

fn unit_frobenius(x: &mut [f64]) {
    let n = libm::sqrt(x.iter().map(|v| v * v).sum::<f64>());
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

fn table(data: Vec<f64>, n: usize, labels: Vec<String>, time: Vec<f64>, dim: &str) -> Result<LabeledTensor> {
    let m = labels.len();
    LabeledTensor::new(
        vec!["time".into(), dim.into()],
        vec![n, m],
        data,
        vec![Coord::f64("time", "time", time), Coord::strings(dim, dim, labels)],
        crate::units::Unit::unitless(),
    )
}

fn rows_to_time_major(s: &[Vec<f64>]) -> Vec<f64> {
    let n = s.first().map_or(0, |v| v.len());
    let mut out = vec![0.0; n * s.len()];
    for (k, v) in s.iter().enumerate() {
        for (t, &x) in v.iter().enumerate() {
            out[t * s.len() + k] = x;
        }
    }
    out
}

pub fn simulate_bimodal_toy(cfg: &ToyConfig) -> Result<ToyDataset> {
    cfg.validate()?;
    let spe = cfg.samples_per_epoch();
    let e = libm::floor(cfg.t * cfg.rate / spe as f64) as usize;
    let n = e * spe;
    let f = Filters { envelope: butter(4, Band::Lowpass(0.1), cfg.rate)?, band: butter(4, Band::Bandpass(cfg.f_min, cfg.f_max), cfg.rate)?, margin: libm::ceil(60.0 * cfg.rate) as usize };
    let mut rng = Rng::new(cfg.seed);
    let (nt, nb) = (cfg.ns_target, cfg.ns_all - cfg.ns_target);
    let lag = libm::round(cfg.dt * cfg.rate) as usize;

    let shared: Vec<Vec<f64>> = (0..nt).map(|_| envelope(&mut rng, &f, n)).collect();
    let mut sx_fast: Vec<Vec<f64>> = Vec::with_capacity(cfg.ns_all);
    for env in &shared {
        let c = carrier(&mut rng, &f, n);
        sx_fast.push((0..n).map(|t| c[t] * if t >= lag { env[t - lag] } else { 0.0 }).collect());
    }
    for _ in 0..nb {
        let env = envelope(&mut rng, &f, n);
        let c = carrier(&mut rng, &f, n);
        sx_fast.push(c.iter().zip(&env).map(|(a, b)| a * b).collect());
    }
    let sign = if cfg.invert_sy { -1.0 } else { 1.0 };
    let mut sy: Vec<Vec<f64>> = shared.iter().map(|env| epoch_mean(env, spe, e).iter().map(|v| sign * v).collect()).collect();
    for _ in 0..nb {
        sy.push(epoch_mean(&envelope(&mut rng, &f, n), spe, e));
    }

    let xp = grid(cfg.nx);
    let yp = grid(cfg.ny);
    let mut ax: Vec<Vec<f64>> = vec![vec![0.0; cfg.ns_all]; cfg.nx];
    let mut ay: Vec<Vec<f64>> = vec![vec![0.0; cfg.ns_all]; cfg.ny];
    for k in 0..nt {
        let center = rng.uniform();
        for (i, &p) in xp.iter().enumerate() {
            ax[i][k] = libm::exp(-(p - center) * (p - center) / (2.0 * cfg.ellx * cfg.ellx)) + cfg.sigma_noise * rng.normal();
        }
        for (i, &p) in yp.iter().enumerate() {
            ay[i][k] = libm::exp(-(p - center) * (p - center) / (2.0 * cfg.elly * cfg.elly)) + cfg.sigma_noise * rng.normal();
        }
    }
    for row in ax.iter_mut().chain(ay.iter_mut()) {
        for v in row[nt..].iter_mut() {
            *v = rng.normal();
        }
    }

    let combine = |a: &[Vec<f64>], s: &[Vec<f64>], len: usize, noise: Vec<f64>| -> Vec<f64> {
        let take = |lo: usize, hi: usize| -> Vec<Vec<f64>> { a.iter().map(|r| r[lo..hi].to_vec()).collect() };
        let mut bg = mix(&take(nt, cfg.ns_all), &s[nt..], len);
        let mut tg = mix(&take(0, nt), &s[..nt], len);
        let mut nz = noise;
        unit_frobenius(&mut bg);
        unit_frobenius(&mut tg);
        unit_frobenius(&mut nz);
        (0..bg.len()).map(|i| bg[i] + cfg.gamma * tg[i] + cfg.gamma_e * nz[i]).collect()
    };
    let x = combine(&ax, &sx_fast, n, rng.normals(n * cfg.nx));
    let y = combine(&ay, &sy, e, rng.normals(e * cfg.ny));

    let mut x_power = vec![0.0; e * cfg.nx];
    for c in 0..cfg.nx {
        let lane: Vec<f64> = (0..n).map(|t| x[t * cfg.nx + c]).collect();
        for (k, v) in epoch_power(&lane, &f, spe, e).into_iter().enumerate() {
            x_power[k * cfg.nx + c] = v;
        }
    }
    let sx_power: Vec<Vec<f64>> = sx_fast[..nt].iter().map(|s| epoch_power(s, &f, spe, e)).collect();

    let fast_t: Vec<f64> = (0..n).map(|i| i as f64 / cfg.rate).collect();
    let epoch_t: Vec<f64> = (0..e).map(|k| (k + 1) as f64 * cfg.t_epoch).collect();
    let labels = |p: &str, m: usize| -> Vec<String> { (1..=m).map(|i| alloc::format!("{p}{i}")).collect() };
    let mixing = |a: &[Vec<f64>], ch: Vec<String>| -> Result<LabeledTensor> {
        let nc = a.len();
        LabeledTensor::new(
            vec!["channel".into(), "source".into()],
            vec![nc, cfg.ns_all],
            a.iter().flatten().copied().collect(),
            vec![Coord::strings("channel", "channel", ch), Coord::strings("source", "source", labels("S", cfg.ns_all))],
            crate::units::Unit::unitless(),
        )
    };
    Ok(ToyDataset {
        x: table(x, n, labels("X", cfg.nx), fast_t.clone(), "channel")?,
        x_power: table(x_power, e, labels("X", cfg.nx), epoch_t.clone(), "channel")?,
        y: table(y, e, labels("Y", cfg.ny), epoch_t.clone(), "channel")?,
        sx: table(rows_to_time_major(&sx_fast[..nt]), n, labels("S", nt), fast_t, "source")?,
        sx_power: table(rows_to_time_major(&sx_power), e, labels("S", nt), epoch_t.clone(), "source")?,
        sy: table(rows_to_time_major(&sy[..nt]), e, labels("S", nt), epoch_t, "source")?,
        ax: mixing(&ax, labels("X", cfg.nx))?,
        ay: mixing(&ay, labels("Y", cfg.ny))?,
        x_positions: xp,
        y_positions: yp,
    })
}

/// Train and test parts of one standardized table.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: LabeledTensor,
    pub test: LabeledTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySplit {
    pub x: Split,
    pub x_power: Split,
    pub y: Split,
    pub sx: Split,
    pub sx_power: Split,
    pub sy: Split,
}

/// Splits at `n_train` rows and standardizes each column with the train part's mean and std.
fn standardize_split(t: &LabeledTensor, n_train: usize) -> Result<Split> {
    let n = t.size("time")?;
    let m = t.len() / n;
    let d = t.data();
    let mut out = d.to_vec();
    for c in 0..m {
        let col: Vec<f64> = (0..n_train).map(|i| d[i * m + c]).collect();
        let mu = crate::stats::mean(&col);
        let sd = crate::stats::std(&col, 0);
        let sd = if sd > 0.0 { sd } else { 1.0 };
        for i in 0..n {
            out[i * m + c] = (d[i * m + c] - mu) / sd;
        }
    }
    let s = t.with_data(out)?;
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..n).collect();
    Ok(Split { train: s.isel("time", &train)?, test: s.isel("time", &test)? })
}

/// First `⌊split·E⌋` epochs train, the rest test; statistics from train only.
pub fn preprocess_toy(ds: &ToyDataset, split: f64) -> Result<ToySplit> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::BadConfig(alloc::format!("split must lie in (0, 1), got {split}")));
    }
    let e = ds.y.size("time")?;
    let et = libm::floor(split * e as f64) as usize;
    if et == 0 || et == e {
        return Err(Error::BadConfig("split leaves an empty part".into()));
    }
    let spe = ds.x.size("time")? / e;
    Ok(ToySplit {
        x: standardize_split(&ds.x, et * spe)?,
        x_power: standardize_split(&ds.x_power, et)?,
        y: standardize_split(&ds.y, et)?,
        sx: standardize_split(&ds.sx, et * spe)?,
        sx_power: standardize_split(&ds.sx_power, et)?,
        sy: standardize_split(&ds.sy, et)?,
    })
}
