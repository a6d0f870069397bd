//! Zero-phase frequency filtering and long/short channel separation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::quality::channel_distances;
use crate::recording::LabeledPoints;
use crate::signal::{butter, default_padlen, sampling_rate, Band};
use crate::tensor::LabeledTensor;
use crate::units::Quantity;

/// Band for `fmin`/`fmax` in Hz: `fmin = 0` gives a low-pass, `fmax = 0` a high-pass.
pub fn band_for(fmin: f64, fmax: f64, fs: f64) -> Result<Band> {
    let nyq = fs / 2.0;
    if !(fmin >= 0.0 && fmax >= 0.0) || (fmin == 0.0 && fmax == 0.0) || fmin >= nyq || fmax >= nyq {
        return Err(Error::BadBand(alloc::format!("[{fmin}, {fmax}] Hz at fs {fs} Hz")));
    }
    match (fmin > 0.0, fmax > 0.0) {
        (false, true) => Ok(Band::Lowpass(fmax)),
        (true, false) => Ok(Band::Highpass(fmin)),
        _ if fmin < fmax => Ok(Band::Bandpass(fmin, fmax)),
        _ => Err(Error::BadBand(alloc::format!("fmin {fmin} ≥ fmax {fmax}"))),
    }
}

/// Forward-backward Butterworth filter along `time`.
pub fn freq_filter(ts: &LabeledTensor, fmin: f64, fmax: f64, order: usize) -> Result<LabeledTensor> {
    let time = ts.coord_f64("time")?;
    let fs = sampling_rate(time)?;
    let band = band_for(fmin, fmax, fs)?;
    let sos = butter(order, band, fs)?;
    let n = time.len();
    let pad = default_padlen(order, fmin, fs, n);
    ts.map_lanes("time", n, vec![], |lane, out| {
        out.copy_from_slice(&sos.filtfilt(lane, pad));
        Ok(())
    })
}

/// Splits channels at `threshold`; a distance equal to it counts as long.
pub fn split_long_short(
    ts: &LabeledTensor,
    geo3d: &LabeledPoints,
    threshold: &Quantity,
) -> Result<(LabeledTensor, LabeledTensor)> {
    let d = channel_distances(ts, geo3d)?.convert_to(&threshold.unit)?;
    let (long, short): (Vec<usize>, Vec<usize>) = (0..d.len()).partition(|&i| d.data()[i] >= threshold.value);
    Ok((ts.isel("channel", &long)?, ts.isel("channel", &short)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preproc::mbll::tests::two_channel_geo;
    use crate::rng::Rng;
    use crate::tensor::Coord;
    use core::f64::consts::PI;

    fn series(fs: f64, x: Vec<f64>) -> LabeledTensor {
        let n = x.len();
        LabeledTensor::build(&["time"], &[n], x, "")
            .unwrap()
            .with_coord(Coord::f64("time", "time", (0..n).map(|i| i as f64 / fs).collect()))
            .unwrap()
    }

    fn interior_rms(x: &[f64]) -> f64 {
        let m = &x[x.len() / 4..3 * x.len() / 4];
        libm::sqrt(m.iter().map(|v| v * v).sum::<f64>() / m.len() as f64)
    }

    #[test]
    fn dc_rejected_tone_kept() {
        let fs = 10.0;
        let n = 20_000;
        let dc = freq_filter(&series(fs, vec![1.0; n]), 0.01, 0.5, 4).unwrap();
        assert!(interior_rms(dc.data()) < 1e-2);
        let tone: Vec<f64> = (0..n).map(|i| libm::sin(2.0 * PI * 0.1 * i as f64 / fs)).collect();
        let out = freq_filter(&series(fs, tone.clone()), 0.01, 0.5, 4).unwrap();
        let ratio = interior_rms(out.data()) / interior_rms(&tone);
        assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn bad_bands() {
        let s = series(10.0, vec![0.0; 100]);
        assert!(matches!(freq_filter(&s, 0.0, 0.0, 4), Err(Error::BadBand(_))));
        assert!(matches!(freq_filter(&s, 0.0, 6.0, 4), Err(Error::BadBand(_))));
        assert!(matches!(freq_filter(&s, 0.6, 0.5, 4), Err(Error::BadBand(_))));
        assert!(freq_filter(&s, 0.0, 1.0, 4).is_ok());
        assert!(freq_filter(&s, 1.0, 0.0, 4).is_ok());
    }

    #[test]
    fn superposition() {
        let fs = 5.0;
        let mut rng = Rng::new(9);
        let a = rng.normals(500);
        let b = rng.normals(500);
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        let fa = freq_filter(&series(fs, a), 0.05, 1.0, 4).unwrap();
        let fb = freq_filter(&series(fs, b), 0.05, 1.0, 4).unwrap();
        let fab = freq_filter(&series(fs, ab), 0.05, 1.0, 4).unwrap();
        for i in 0..500 {
            assert!((fab.data()[i] - (2.0 * fa.data()[i] - 0.5 * fb.data()[i])).abs() < 1e-8);
        }
    }

    #[test]
    fn split_at_threshold() {
        let geo = two_channel_geo();
        let ts = crate::preproc::mbll::tests::od_tensor(1, 4);
        let (l, s) = split_long_short(&ts, &geo, &Quantity::parse("22.5 mm").unwrap()).unwrap();
        assert_eq!(l.coord_str("channel").unwrap(), &["S1D1"]);
        assert_eq!(s.coord_str("channel").unwrap(), &["S2D2"]);
        let (l, s) = split_long_short(&ts, &geo, &Quantity::parse("3 cm").unwrap()).unwrap();
        assert_eq!(l.size("channel").unwrap(), 1);
        assert_eq!(s.size("channel").unwrap(), 1);
        let (l, _) = split_long_short(&ts, &geo, &Quantity::parse("40 mm").unwrap()).unwrap();
        assert_eq!(l.size("channel").unwrap(), 0);
    }
}
