//! Unit artifact shapes and their injection into time series.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::preproc::{conc2od, ExtinctionTable, CHROMOPHORES};
use crate::recording::{LabeledPoints, StimTable};
use crate::signal::sampling_rate;
use crate::stats::median;
use crate::tensor::{BinOp, Coord, LabeledTensor};
use crate::units::{Quantity, Unit};

/// `(time, onset, duration) → unit artifact`.
pub type Generator = fn(&[f64], f64, f64) -> Result<Vec<f64>>;

fn check_onset(time: &[f64], onset: f64) -> Result<()> {
    match (time.first(), time.last()) {
        (Some(&a), Some(&b)) if onset >= a && onset <= b => Ok(()),
        _ => Err(Error::OnsetOutOfRange(onset)),
    }
}

/// 0 before `onset`, 1 from it on.
pub fn gen_bl_shift(time: &[f64], onset: f64, _duration: f64) -> Result<Vec<f64>> {
    check_onset(time, onset)?;
    Ok(time.iter().map(|&t| if t >= onset { 1.0 } else { 0.0 }).collect())
}

/// Gaussian centred at `onset + duration/2` with `σ = duration/6`.
pub fn gen_spike(time: &[f64], onset: f64, duration: f64) -> Result<Vec<f64>> {
    check_onset(time, onset)?;
    if !(duration > 0.0) {
        return Err(Error::BadParam(alloc::format!("spike duration must be positive, got {duration}")));
    }
    let c = onset + duration / 2.0;
    let s = duration / 6.0;
    Ok(time.iter().map(|&t| libm::exp(-(t - c) * (t - c) / (2.0 * s * s))).collect())
}

/// Named artifact generators.
#[derive(Debug, Clone)]
pub struct Generators(BTreeMap<String, Generator>);

impl Default for Generators {
    fn default() -> Self {
        let mut m: BTreeMap<String, Generator> = BTreeMap::new();
        m.insert("bl_shift".into(), gen_bl_shift);
        m.insert("spike".into(), gen_spike);
        Generators(m)
    }
}

impl Generators {
    pub fn empty() -> Self {
        Generators(BTreeMap::new())
    }

    pub fn insert(&mut self, name: &str, g: Generator) {
        self.0.insert(name.to_string(), g);
    }

    pub fn get(&self, name: &str) -> Result<Generator> {
        self.0.get(name).copied().ok_or_else(|| Error::UnknownGenerator(name.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    /// Amplitude `α·scale` with `α` estimated from the signal.
    Auto,
    /// Amplitude `scale`.
    Manual,
}

/// Median half peak-to-peak over 10 s windows that contain sample `at`, stepped by 1 s.
pub fn auto_alpha(lane: &[f64], fs: f64, at: usize) -> f64 {
    let n = lane.len();
    let w = (libm::round(10.0 * fs) as usize).clamp(1, n);
    let step = (libm::round(fs) as usize).max(1);
    let lo = at.saturating_sub(w - 1).min(n - w);
    let hi = at.min(n - w);
    let mut half: Vec<f64> = Vec::new();
    let mut s = lo;
    loop {
        let seg = &lane[s..s + w];
        let mx = seg.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mn = seg.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        half.push((mx - mn) / 2.0);
        if s >= hi {
            break;
        }
        s = (s + step).min(hi);
    }
    median(&half)
}

fn nearest(time: &[f64], t: f64) -> usize {
    let j = time.partition_point(|&x| x < t);
    if j == 0 {
        0
    } else if j == time.len() || t - time[j - 1] <= time[j] - t {
        j - 1
    } else {
        j
    }
}

/// Adds every timing event to the listed channels (all when empty) on every lane.
pub fn add_artifacts(
    ts: &LabeledTensor,
    timing: &StimTable,
    generators: &Generators,
    mode: ScaleMode,
    scale: f64,
) -> Result<LabeledTensor> {
    let gens: Vec<Generator> = timing.rows.iter().map(|r| generators.get(&r.trial_type)).collect::<Result<_>>()?;
    if timing.is_empty() {
        return Ok(ts.clone());
    }
    let order: Vec<&str> = ts.dims().iter().map(|s| s.as_str()).collect();
    let t = ts.move_to_last("time")?;
    let time = t.coord_f64("time")?.to_vec();
    let fs = sampling_rate(&time)?;
    let n = time.len();
    let labels = t.coord_str("channel")?.to_vec();
    let ax = t.axis("channel")?;
    let inner: usize = t.shape()[ax + 1..t.shape().len() - 1].iter().product();
    let mut data = t.data().to_vec();
    for (ev, g) in timing.rows.iter().zip(&gens) {
        let art = g(&time, ev.onset, ev.duration)?;
        let at = nearest(&time, ev.onset);
        for (l, lane) in data.chunks_mut(n).enumerate() {
            let ch = (l / inner) % labels.len();
            if !ev.applies_to(&labels[ch]) {
                continue;
            }
            let amp = match mode {
                ScaleMode::Manual => scale,
                ScaleMode::Auto => auto_alpha(&t.data()[l * n..(l + 1) * n], fs, at) * scale,
            };
            for (x, a) in lane.iter_mut().zip(&art) {
                *x += amp * a;
            }
        }
    }
    t.with_data(data)?.transpose(&order)
}

/// Injects artifacts defined in concentration space, `amp` on both HbO and HbR,
/// into optical density via the forward Beer–Lambert map.
pub fn add_chromo_artifacts_to_od(
    od: &LabeledTensor,
    timing: &StimTable,
    generators: &Generators,
    geo3d: &LabeledPoints,
    dpf: &[f64],
    ext: &ExtinctionTable,
    amp: &Quantity,
) -> Result<LabeledTensor> {
    let gens: Vec<Generator> = timing.rows.iter().map(|r| generators.get(&r.trial_type)).collect::<Result<_>>()?;
    let a = amp.to_str("uM")?;
    let time = od.coord_f64("time")?.to_vec();
    let labels = od.coord_str("channel")?.to_vec();
    let (nch, n) = (labels.len(), time.len());
    let mut data = vec![0.0; nch * 2 * n];
    for (ev, g) in timing.rows.iter().zip(&gens) {
        let art = g(&time, ev.onset, ev.duration)?;
        for (c, lab) in labels.iter().enumerate() {
            if !ev.applies_to(lab) {
                continue;
            }
            for k in 0..2 {
                let lane = &mut data[(c * 2 + k) * n..(c * 2 + k + 1) * n];
                for (x, v) in lane.iter_mut().zip(&art) {
                    *x += a * v;
                }
            }
        }
    }
    let mut coords: Vec<Coord> = od.coords_on("channel").cloned().collect();
    coords.extend(od.coords_on("time").cloned());
    coords.push(Coord::str("chromo", "chromo", &CHROMOPHORES));
    let conc = LabeledTensor::new(
        vec!["channel".into(), "chromo".into(), "time".into()],
        vec![nch, 2, n],
        data,
        coords,
        Unit::parse("uM")?,
    )?;
    let wl = od.coord_f64("wavelength")?.to_vec();
    let delta = conc2od(&conc, geo3d, dpf, ext, &wl)?;
    let order: Vec<&str> = od.dims().iter().map(|s| s.as_str()).collect();
    od.binary(&delta.transpose(&order)?, BinOp::Add)
}
