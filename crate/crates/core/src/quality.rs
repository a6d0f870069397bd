//! Channel quality metrics and boolean quality masks.
//!
//! Masks follow the convention CLEAN = true (1.0) and TAINTED = false (0.0).

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::recording::LabeledPoints;
use crate::signal::{butter, default_padlen, sampling_rate, Band};
use crate::stats::{mad, median, MAD_SCALE};
use crate::tensor::{truthy, Coord, LabeledTensor, Logic, Reduction};
use crate::units::Unit;

pub const CLEAN: f64 = 1.0;
pub const TAINTED: f64 = 0.0;

/// Band-pass applied before SCI and PSP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CardiacBand {
    pub fmin: f64,
    pub fmax: f64,
    pub order: usize,
}

impl Default for CardiacBand {
    fn default() -> Self {
        CardiacBand { fmin: 0.5, fmax: 2.5, order: 4 }
    }
}

/// A per-window metric with its window length and threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedMetric {
    /// Dims `(channel, time)`; `time` holds window left edges.
    pub metric: LabeledTensor,
    pub window_length: f64,
    pub threshold: f64,
}

/// Euclidean source–detector distance per channel, in the geometry's unit.
pub fn channel_distances(ts: &LabeledTensor, geo3d: &LabeledPoints) -> Result<LabeledTensor> {
    let src = ts.coord_str("source")?;
    let det = ts.coord_str("detector")?;
    let d: Vec<f64> = src.iter().zip(det).map(|(s, d)| geo3d.distance(s, d)).collect::<Result<_>>()?;
    let n = d.len();
    let coords: Vec<Coord> = ts.coords_on("channel").cloned().collect();
    LabeledTensor::new(vec!["channel".into()], vec![n], d, coords, geo3d.unit().clone())
}

/// Signal-to-noise ratio `mean/std` over time and the mask `snr > threshold`.
pub fn snr(amp: &LabeledTensor, threshold: f64) -> Result<(LabeledTensor, LabeledTensor)> {
    let m = amp.reduce("time", Reduction::Mean)?;
    let s = amp.reduce("time", Reduction::Std)?;
    let data = m
        .data()
        .iter()
        .zip(s.data())
        .map(|(&m, &s)| if s == 0.0 { f64::INFINITY } else { m / s })
        .collect();
    let metric = m.with_data(data)?.with_unit(Unit::unitless());
    let mask = metric.map(|x| if x > threshold { CLEAN } else { TAINTED });
    Ok((metric, mask))
}

struct Windows {
    starts: Vec<usize>,
    len: usize,
}

impl Windows {
    fn range(&self, w: usize, n: usize) -> core::ops::Range<usize> {
        let s = self.starts[w];
        s..(s + self.len).min(n)
    }
}

/// Non-overlapping windows of `round(window_length·fs)` samples. A trailing
/// partial window is kept when it holds at least four samples.
fn windows(n: usize, fs: f64, window_length: f64) -> Result<Windows> {
    let len = libm::round(window_length * fs) as usize;
    if len < 4 {
        return Err(Error::WindowTooShort(len));
    }
    let mut starts = Vec::new();
    let mut s = 0;
    while s < n {
        if n - s >= len || n - s >= 4 {
            starts.push(s);
        }
        s += len;
    }
    Ok(Windows { starts, len })
}

/// Channel lanes of both wavelengths, band-passed to the cardiac band.
fn cardiac_pairs(amp: &LabeledTensor, band: CardiacBand) -> Result<(Vec<(Vec<f64>, Vec<f64>)>, f64, f64)> {
    let nwl = amp.size("wavelength")?;
    if nwl != 2 {
        return Err(Error::NeedTwoWavelengths(nwl));
    }
    let t = amp.transpose(&["channel", "wavelength", "time"])?;
    let time = t.coord_f64("time")?;
    let fs = sampling_rate(time)?;
    let nyq = fs / 2.0;
    let n = time.len();
    // An upper edge at or above Nyquist degenerates to a high-pass.
    let (filter, fmax) = if band.fmax < nyq {
        (butter(band.order, Band::Bandpass(band.fmin, band.fmax), fs)?, band.fmax)
    } else {
        (butter(band.order, Band::Highpass(band.fmin), fs)?, nyq)
    };
    let pad = default_padlen(band.order, band.fmin, fs, n);
    let nch = t.shape()[0];
    let mut out = Vec::with_capacity(nch);
    for c in 0..nch {
        let a = &t.data()[(2 * c) * n..(2 * c + 1) * n];
        let b = &t.data()[(2 * c + 1) * n..(2 * c + 2) * n];
        out.push((filter.filtfilt(a, pad), filter.filtfilt(b, pad)));
    }
    Ok((out, fs, fmax))
}

fn windowed_tensor(amp: &LabeledTensor, win: &Windows, data: Vec<f64>) -> Result<LabeledTensor> {
    let time = amp.coord_f64("time")?;
    let nch = amp.size("channel")?;
    let mut coords: Vec<Coord> = amp.coords_on("channel").cloned().collect();
    coords.push(Coord::f64("time", "time", win.starts.iter().map(|&s| time[s]).collect()));
    coords.push(Coord::i64("samples", "time", win.starts.iter().map(|&s| s as i64).collect()));
    LabeledTensor::new(vec!["channel".into(), "time".into()], vec![nch, win.starts.len()], data, coords, Unit::unitless())
}

fn threshold_mask(metric: &LabeledTensor, threshold: f64) -> LabeledTensor {
    metric.map(|x| if x > threshold { CLEAN } else { TAINTED })
}

/// Scalp coupling index with the default cardiac band.
pub fn sci(amp: &LabeledTensor, window_length: f64, threshold: f64) -> Result<(WindowedMetric, LabeledTensor)> {
    sci_with_band(amp, window_length, threshold, CardiacBand::default())
}

/// Zero-lag Pearson correlation between the two band-passed wavelength
/// signals in each window. The band-pass runs over the whole series before
/// windowing.
pub fn sci_with_band(
    amp: &LabeledTensor,
    window_length: f64,
    threshold: f64,
    band: CardiacBand,
) -> Result<(WindowedMetric, LabeledTensor)> {
    let (pairs, fs, _) = cardiac_pairs(amp, band)?;
    let n = amp.size("time")?;
    let win = windows(n, fs, window_length)?;
    let mut data = Vec::with_capacity(pairs.len() * win.starts.len());
    for (a, b) in &pairs {
        for w in 0..win.starts.len() {
            let r = win.range(w, n);
            data.push(window_corr(&a[r.clone()], &b[r]));
        }
    }
    let metric = windowed_tensor(amp, &win, data)?;
    let mask = threshold_mask(&metric, threshold);
    Ok((WindowedMetric { metric, window_length, threshold }, mask))
}

fn window_corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / libm::sqrt(saa * sbb)
}

/// Peak spectral power with the default cardiac band.
pub fn psp(amp: &LabeledTensor, window_length: f64, threshold: f64) -> Result<(WindowedMetric, LabeledTensor)> {
    psp_with_band(amp, window_length, threshold, CardiacBand::default())
}

/// Peak of the power spectrum of the normalized cross-correlation of the
/// two band-passed wavelength signals, searched over the cardiac band.
///
/// For window length `n`, `c_k = Σ_i a_i·b_{i+k} / (n·σ_a·σ_b)` for
/// `|k| < n` with zero-mean `a, b` and population standard deviations.
/// The spectrum is `|DFT(c)|² / n²` on the `2n−1` point grid, which is
/// bounded by 1.
pub fn psp_with_band(
    amp: &LabeledTensor,
    window_length: f64,
    threshold: f64,
    band: CardiacBand,
) -> Result<(WindowedMetric, LabeledTensor)> {
    let (pairs, fs, fmax) = cardiac_pairs(amp, band)?;
    let n = amp.size("time")?;
    let win = windows(n, fs, window_length)?;
    let mut data = Vec::with_capacity(pairs.len() * win.starts.len());
    for (a, b) in &pairs {
        for w in 0..win.starts.len() {
            let r = win.range(w, n);
            data.push(window_psp(&a[r.clone()], &b[r], fs, band.fmin, fmax));
        }
    }
    let metric = windowed_tensor(amp, &win, data)?;
    let mask = threshold_mask(&metric, threshold);
    Ok((WindowedMetric { metric, window_length, threshold }, mask))
}

fn window_psp(a: &[f64], b: &[f64], fs: f64, fmin: f64, fmax: f64) -> f64 {
    let n = a.len();
    let nf = n as f64;
    let ma = a.iter().sum::<f64>() / nf;
    let mb = b.iter().sum::<f64>() / nf;
    let a: Vec<f64> = a.iter().map(|x| x - ma).collect();
    let b: Vec<f64> = b.iter().map(|x| x - mb).collect();
    let sa = libm::sqrt(a.iter().map(|x| x * x).sum::<f64>() / nf);
    let sb = libm::sqrt(b.iter().map(|x| x * x).sum::<f64>() / nf);
    if sa == 0.0 || sb == 0.0 {
        return 0.0;
    }
    let len = 2 * n - 1;
    let mut c = vec![0.0; len];
    for (idx, slot) in c.iter_mut().enumerate() {
        let k = idx as isize - (n as isize - 1);
        let mut s = 0.0;
        for i in 0..n as isize {
            let j = i + k;
            if j >= 0 && (j as usize) < n {
                s += a[i as usize] * b[j as usize];
            }
        }
        *slot = s / (nf * sa * sb);
    }
    let mut best = 0.0f64;
    for (j, f) in crate::signal::freqs_for(len, fs) {
        if f >= fmin && f <= fmax {
            best = best.max(crate::signal::dft_power_bin(&c, j, len) / (nf * nf));
        }
    }
    best
}

/// Global variance of the temporal derivative and its default-threshold mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Gvtd {
    /// Dims `(time)`.
    pub metric: LabeledTensor,
    pub mask: LabeledTensor,
    pub threshold: f64,
}

/// Default GVTD threshold `median + 10·1.4826·MAD`.
pub fn gvtd_default_threshold(g: &[f64]) -> f64 {
    median(g) + 10.0 * MAD_SCALE * mad(g)
}

pub fn gvtd(ts: &LabeledTensor, threshold: Option<f64>) -> Result<Gvtd> {
    let n = ts.size("time")?;
    if n < 2 {
        return Err(Error::TooShort("GVTD needs at least two samples".into()));
    }
    let lanes = ts.lanes("time")?;
    let k = lanes.len() as f64;
    let mut g = vec![0.0; n];
    for i in 0..n - 1 {
        let s: f64 = lanes.iter().map(|l| (l[i + 1] - l[i]) * (l[i + 1] - l[i])).sum();
        g[i] = libm::sqrt(s / k);
    }
    g[n - 1] = g[n - 2];
    let threshold = threshold.unwrap_or_else(|| gvtd_default_threshold(&g));
    let coords: Vec<Coord> = ts.coords_on("time").cloned().collect();
    let metric = LabeledTensor::new(vec!["time".into()], vec![n], g, coords, ts.unit().clone())?;
    let mask = metric.map(|x| if x < threshold { CLEAN } else { TAINTED }).with_unit(Unit::unitless());
    Ok(Gvtd { metric, mask, threshold })
}

/// Folds masks with logical AND/OR under name-based broadcasting.
pub fn combine_masks(masks: &[&LabeledTensor], op: Logic) -> Result<LabeledTensor> {
    let (first, rest) = masks.split_first().ok_or_else(|| Error::BadParam("no masks to combine".into()))?;
    let mut acc = (*first).clone();
    for m in rest {
        acc = acc.logical(m, op)?;
    }
    Ok(acc)
}

/// Maximal runs of TAINTED samples as `(first_time, last_time)`.
pub fn mask_to_segments(mask: &LabeledTensor) -> Result<Vec<(f64, f64)>> {
    if mask.dims().len() != 1 || mask.dims()[0] != "time" {
        return Err(Error::DimMismatch("segments need a mask over time only".into()));
    }
    let time = mask.coord_f64("time")?;
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &v) in mask.data().iter().enumerate() {
        match (truthy(v), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((time[s], time[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((time[s], time[time.len() - 1]));
    }
    Ok(out)
}

/// Per-channel verdict: each mask is collapsed over its non-channel dims
/// with `flag` (`All` or `Any`), then the masks are AND-ed.
pub fn channel_verdict(ts: &LabeledTensor, masks: &[&LabeledTensor], flag: Reduction) -> Result<Vec<bool>> {
    if !matches!(flag, Reduction::All | Reduction::Any) {
        return Err(Error::BadParam("prune flag must be all or any".into()));
    }
    let labels = ts.coord_str("channel")?;
    let mut keep = vec![true; labels.len()];
    for m in masks {
        let mut r = (*m).clone();
        let others: Vec<String> = r.dims().iter().filter(|d| *d != "channel").cloned().collect();
        for d in others {
            r = r.reduce(&d, flag)?;
        }
        if !r.has_dim("channel") {
            return Err(Error::CoordMismatch("mask lacks a channel dimension".into()));
        }
        let mlabels = r.coord_str("channel").map_err(|_| Error::CoordMismatch("channel".into()))?;
        for (i, l) in labels.iter().enumerate() {
            let j = mlabels.iter().position(|x| x == l).ok_or_else(|| Error::CoordMismatch(l.clone()))?;
            keep[i] &= truthy(r.data()[j]);
        }
    }
    Ok(keep)
}

/// Restricts `ts` to channels judged CLEAN; returns the dropped labels.
pub fn prune_channels(ts: &LabeledTensor, masks: &[&LabeledTensor], flag: Reduction) -> Result<(LabeledTensor, Vec<String>)> {
    let keep = channel_verdict(ts, masks, flag)?;
    let labels = ts.coord_str("channel")?;
    let dropped = labels.iter().zip(&keep).filter(|(_, k)| !**k).map(|(l, _)| l.to_string()).collect();
    let idx: Vec<usize> = keep.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i).collect();
    Ok((ts.isel("channel", &idx)?, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::PointType;
    use crate::rng::Rng;
    use crate::tensor::CmpOp;
    use core::f64::consts::PI;

    pub(crate) fn amp_tensor(nch: usize, fs: f64, data: &[Vec<[f64; 2]>]) -> LabeledTensor {
        let n = data[0].len();
        let mut v = Vec::with_capacity(nch * 2 * n);
        for ch in data {
            for w in 0..2 {
                v.extend(ch.iter().map(|p| p[w]));
            }
        }
        let labels: Vec<String> = (0..nch).map(|i| alloc::format!("S{}D{}", i + 1, i + 1)).collect();
        LabeledTensor::build(&["channel", "wavelength", "time"], &[nch, 2, n], v, "V")
            .unwrap()
            .with_coords([
                Coord::strings("channel", "channel", labels.clone()),
                Coord::strings("source", "channel", (0..nch).map(|i| alloc::format!("S{}", i + 1)).collect()),
                Coord::strings("detector", "channel", (0..nch).map(|i| alloc::format!("D{}", i + 1)).collect()),
                Coord::f64("wavelength", "wavelength", vec![760.0, 850.0]),
                Coord::f64("time", "time", (0..n).map(|i| i as f64 / fs).collect()),
            ])
            .unwrap()
    }

    fn sine_pair(n: usize, fs: f64, f: f64, sign: f64) -> Vec<[f64; 2]> {
        (0..n)
            .map(|i| {
                let s = libm::sin(2.0 * PI * f * i as f64 / fs);
                [1.0 + s, 1.0 + sign * s]
            })
            .collect()
    }

    #[test]
    fn distances_345() {
        let geo = LabeledPoints::new(
            vec!["S1".into(), "D1".into()],
            vec![PointType::Source, PointType::Detector],
            "digitized",
            vec![[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]],
            Unit::parse("mm").unwrap(),
        )
        .unwrap();
        let amp = amp_tensor(1, 10.0, &[sine_pair(20, 10.0, 1.0, 1.0)]);
        let d = channel_distances(&amp, &geo).unwrap();
        assert_eq!(d.data(), &[5.0]);
        assert_eq!(d.unit().to_string(), "mm");
    }

    #[test]
    fn sci_identical_and_flipped() {
        let fs = 10.0;
        let amp = amp_tensor(2, fs, &[sine_pair(600, fs, 1.0, 1.0), sine_pair(600, fs, 1.0, -1.0)]);
        let (m, mask) = sci(&amp, 10.0, 0.75).unwrap();
        assert_eq!(m.metric.shape(), &[2, 6]);
        for w in 0..6 {
            assert!((m.metric.get(&[0, w]) - 1.0).abs() < 1e-9);
            assert!((m.metric.get(&[1, w]) + 1.0).abs() < 1e-9);
            assert_eq!(mask.get(&[0, w]), CLEAN);
            assert_eq!(mask.get(&[1, w]), TAINTED);
        }
        assert_eq!(m.metric.coord_f64("time").unwrap()[1], 10.0);
    }

    #[test]
    fn sci_affine_invariance() {
        let fs = 10.0;
        let mut rng = Rng::new(3);
        let base: Vec<[f64; 2]> = (0..400).map(|_| [rng.normal(), rng.normal()]).collect();
        let scaled: Vec<[f64; 2]> = base.iter().map(|p| [3.0 * p[0] + 7.0, p[1]]).collect();
        let negated: Vec<[f64; 2]> = base.iter().map(|p| [-2.0 * p[0] + 1.0, p[1]]).collect();
        let amp = amp_tensor(3, fs, &[base, scaled, negated]);
        let (m, _) = sci(&amp, 10.0, 0.75).unwrap();
        for w in 0..4 {
            let r = m.metric.get(&[0, w]);
            assert!((m.metric.get(&[1, w]) - r).abs() < 1e-9);
            assert!((m.metric.get(&[2, w]) + r).abs() < 1e-9);
        }
    }

    #[test]
    fn window_errors() {
        let amp = amp_tensor(1, 10.0, &[sine_pair(100, 10.0, 1.0, 1.0)]);
        assert!(matches!(sci(&amp, 0.2, 0.75), Err(Error::WindowTooShort(2))));
        let one = amp.isel("wavelength", &[0]).unwrap();
        assert!(matches!(sci(&one, 10.0, 0.75), Err(Error::NeedTwoWavelengths(1))));
    }

    #[test]
    fn psp_sine_zero_and_noisy() {
        let fs = 10.0;
        let n = 300;
        let mut rng = Rng::new(11);
        let noisy: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let s = libm::sin(2.0 * PI * i as f64 / fs);
                // Amplitude SNR of 10 relative to unit-variance-scaled noise.
                [s + 0.1 * rng.normal(), s + 0.1 * rng.normal()]
            })
            .collect();
        let zeros: Vec<[f64; 2]> = vec![[0.0, 0.0]; n];
        let amp = amp_tensor(3, fs, &[sine_pair(n, fs, 1.0, 1.0), zeros, noisy]);
        let (a, mask) = psp(&amp, 10.0, 0.03).unwrap();
        let (b, _) = psp(&amp, 10.0, 0.03).unwrap();
        assert_eq!(a, b);
        for w in 0..3 {
            let v = a.metric.get(&[0, w]);
            assert!(v > 0.03 && v <= 1.0, "{v}");
            assert_eq!(a.metric.get(&[1, w]), 0.0);
            assert_eq!(mask.get(&[1, w]), TAINTED);
            assert!(a.metric.get(&[2, w]) > 0.1);
        }
    }

    fn step_series(steps: &[f64], n: usize, at: usize) -> LabeledTensor {
        let mut v = Vec::new();
        for &a in steps {
            v.extend((0..n).map(|i| if i >= at { a } else { 0.0 }));
        }
        LabeledTensor::build(&["channel", "time"], &[steps.len(), n], v, "")
            .unwrap()
            .with_coord(Coord::f64("time", "time", (0..n).map(|i| i as f64).collect()))
            .unwrap()
    }

    #[test]
    fn gvtd_constant_and_steps() {
        let c = step_series(&[0.0, 0.0], 10, 5);
        assert!(gvtd(&c, None).unwrap().metric.data().iter().all(|&x| x == 0.0));
        let one = gvtd(&step_series(&[1.0], 10, 5), None).unwrap();
        let nz: Vec<f64> = one.metric.data().iter().copied().filter(|&x| x != 0.0).collect();
        assert_eq!(nz, [1.0]);
        let steps = [0.5, -2.0, 3.0];
        let g = gvtd(&step_series(&steps, 10, 5), None).unwrap();
        let oracle = libm::sqrt(steps.iter().map(|a| a * a).sum::<f64>() / 3.0);
        assert_eq!(g.metric.data()[4], oracle);
        assert_eq!(g.mask.data()[4], TAINTED);
    }

    #[test]
    fn segments() {
        let m = LabeledTensor::build(&["time"], &[6], vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0], "")
            .unwrap()
            .with_coord(Coord::f64("time", "time", (0..6).map(|i| i as f64).collect()))
            .unwrap();
        assert_eq!(mask_to_segments(&m).unwrap(), vec![(2.0, 3.0)]);
        let clean = m.map(|_| 1.0);
        assert!(mask_to_segments(&clean).unwrap().is_empty());
    }

    #[test]
    fn prune_by_fraction() {
        let labels = ["S1D1", "S13D26", "S14D28", "S2D3"];
        let frac = LabeledTensor::build(&["channel"], &[4], vec![1.0, 0.815, 0.91, 0.97], "")
            .unwrap()
            .with_coord(Coord::str("channel", "channel", &labels))
            .unwrap();
        let mask = frac.compare_quantity(&crate::units::Quantity::new(0.95, "").unwrap(), CmpOp::Ge).unwrap();
        let ts = LabeledTensor::build(&["channel", "time"], &[4, 2], vec![0.0; 8], "")
            .unwrap()
            .with_coord(Coord::str("channel", "channel", &labels))
            .unwrap();
        let (p, dropped) = prune_channels(&ts, &[&mask], Reduction::All).unwrap();
        assert_eq!(dropped, vec!["S13D26".to_string(), "S14D28".to_string()]);
        assert_eq!(p.coord_str("channel").unwrap(), &["S1D1".to_string(), "S2D3".to_string()]);
        let none = mask.map(|_| 0.0);
        let (p, dropped) = prune_channels(&ts, &[&none], Reduction::All).unwrap();
        assert_eq!(p.size("channel").unwrap(), 0);
        assert_eq!(dropped.len(), 4);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn metric_ranges(seed in 0u64..1000, f in 0.6f64..2.4) {
            let fs = 10.0;
            let mut rng = Rng::new(seed);
            let ch: Vec<[f64; 2]> = (0..250)
                .map(|i| {
                    let s = libm::sin(2.0 * PI * f * i as f64 / fs);
                    [s + rng.normal(), 0.5 * s + rng.normal()]
                })
                .collect();
            let amp = amp_tensor(1, fs, &[ch]);
            let (s, _) = sci(&amp, 5.0, 0.75).unwrap();
            let (p, _) = psp(&amp, 5.0, 0.1).unwrap();
            proptest::prop_assert!(s.metric.data().iter().all(|x| (-1.0 - 1e-12..=1.0 + 1e-12).contains(x)));
            proptest::prop_assert!(p.metric.data().iter().all(|x| (0.0..=1.0 + 1e-12).contains(x)));
            let g = gvtd(&amp, None).unwrap();
            proptest::prop_assert!(g.metric.data().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn clean_fraction_formula() {
        let m = LabeledTensor::build(&["channel", "time"], &[1, 4], vec![1.0, 0.0, 1.0, 1.0], "").unwrap();
        let s = m.reduce("time", Reduction::Sum).unwrap();
        assert_eq!(s.data()[0] / 4.0, 0.75);
    }
}
