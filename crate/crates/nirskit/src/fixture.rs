//! Small synthetic recording: four channels on a line, one of them short.

use std::f64::consts::PI;

use nirskit_core::glm::Basis;
use nirskit_core::imgrecon::{SensitivityMatrix, TriSurface};
use nirskit_core::preproc::{conc2od, ExtinctionTable, CHROMOPHORES};
use nirskit_core::rng::Rng;
use nirskit_core::{Coord, LabeledPoints, LabeledTensor, PointType, Recording, StimEvent, StimTable, Unit};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureConfig {
    pub fs: f64,
    pub duration: f64,
    /// Peak HbO response in µM on the long channels.
    pub hbo_peak: f64,
    pub noise: f64,
    /// OD amplitude of the Mayer-wave and respiratory oscillations.
    pub physio: f64,
    pub seed: u64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig { fs: 10.0, duration: 300.0, hbo_peak: 1.0, noise: 0.002, physio: 0.05, seed: 0 }
    }
}

pub const TRIAL_TYPES: [&str; 2] = ["FTapping/Left", "FTapping/Right"];
const WAVELENGTHS: [f64; 2] = [760.0, 850.0];
/// (channel, source, detector, gain for each trial type).
const CHANNELS: [(&str, &str, &str, [f64; 2]); 4] = [
    ("S1D1", "S1", "D1", [1.0, 0.2]),
    ("S2D1", "S2", "D1", [0.6, 0.6]),
    ("S2D2", "S2", "D2", [0.2, 1.0]),
    ("S1D3", "S1", "D3", [0.0, 0.0]),
];

pub fn fixture_geometry() -> Result<LabeledPoints> {
    let pts: [(&str, PointType, [f64; 3]); 5] = [
        ("S1", PointType::Source, [0.0, 0.0, 0.0]),
        ("S2", PointType::Source, [60.0, 0.0, 0.0]),
        ("D1", PointType::Detector, [30.0, 0.0, 0.0]),
        ("D2", PointType::Detector, [90.0, 0.0, 0.0]),
        ("D3", PointType::Detector, [8.0, 0.0, 0.0]),
    ];
    Ok(LabeledPoints::new(
        pts.iter().map(|p| p.0.to_string()).collect(),
        pts.iter().map(|p| p.1).collect(),
        "digitized",
        pts.iter().map(|p| p.2).collect(),
        Unit::parse("mm")?,
    )?)
}

/// Alternating 10 s blocks separated by 20–30 s of rest.
pub fn fixture_stim(duration: f64, rng: &mut Rng) -> Result<StimTable> {
    let mut rows = Vec::new();
    let mut t = 15.0;
    let mut k = 0;
    while t + 30.0 < duration {
        rows.push(StimEvent::new(t, 10.0, 1.0, TRIAL_TYPES[k % 2]));
        t += 10.0 + rng.uniform_range(20.0, 30.0);
        k += 1;
    }
    Ok(StimTable::new(rows)?)
}

fn channel_coords(time: &[f64]) -> Vec<Coord> {
    vec![
        Coord::strings("channel", "channel", CHANNELS.iter().map(|c| c.0.to_string()).collect()),
        Coord::strings("source", "channel", CHANNELS.iter().map(|c| c.1.to_string()).collect()),
        Coord::strings("detector", "channel", CHANNELS.iter().map(|c| c.2.to_string()).collect()),
        Coord::f64("time", "time", time.to_vec()),
    ]
}

/// Raw amplitudes with block responses, cardiac, Mayer-wave and respiratory
/// oscillations, slow drift and white noise.
pub fn synthetic_recording(cfg: &FixtureConfig) -> Result<Recording> {
    let mut rng = Rng::new(cfg.seed);
    let n = (cfg.duration * cfg.fs).round() as usize;
    let time: Vec<f64> = (0..n).map(|i| i as f64 / cfg.fs).collect();
    let stim = fixture_stim(cfg.duration, &mut rng)?;
    let geo = fixture_geometry()?;
    let basis = Basis::Gamma { tau: 0.0, sigma: 3.0, t: 10.0 };
    let mut conc = Vec::with_capacity(CHANNELS.len() * 2 * n);
    for (_, _, _, gain) in CHANNELS {
        let mut hbo = vec![0.0; n];
        for ev in &stim.rows {
            let g = gain[TRIAL_TYPES.iter().position(|t| *t == ev.trial_type).unwrap_or(0)];
            for (h, &t) in hbo.iter_mut().zip(&time) {
                *h += g * cfg.hbo_peak * ev.value * basis.eval(0, t - ev.onset, ev.duration);
            }
        }
        conc.extend(hbo.iter().copied());
        conc.extend(hbo.iter().map(|x| -0.4 * x));
    }
    let mut coords = channel_coords(&time);
    coords.push(Coord::str("chromo", "chromo", &CHROMOPHORES));
    let conc = LabeledTensor::new(
        vec!["channel".into(), "chromo".into(), "time".into()],
        vec![CHANNELS.len(), 2, n],
        conc,
        coords,
        Unit::parse("uM")?,
    )?;
    let od = conc2od(&conc, &geo, &[6.0, 6.0], &ExtinctionTable::prahl(), &WAVELENGTHS)?
        .transpose(&["channel", "wavelength", "time"])?;
    let phase = rng.uniform_range(0.0, 2.0 * PI);
    let mut amp = Vec::with_capacity(od.len());
    for (lane, chunk) in od.data().chunks(n).enumerate() {
        let base = 0.5 + 0.1 * lane as f64;
        for (i, &d) in chunk.iter().enumerate() {
            let t = time[i];
            let extra = 0.01 * (2.0 * PI * 1.1 * t + phase).sin()
                + cfg.physio * (0.5 * (2.0 * PI * 0.1 * t + 2.0 * phase).sin() + 0.3 * (2.0 * PI * 0.25 * t).sin())
                + 0.005 * (2.0 * PI * t / cfg.duration).sin();
            amp.push(base * (-(d + extra)).exp() * (1.0 + cfg.noise * rng.normal()));
        }
    }
    let amp = LabeledTensor::new(
        vec!["channel".into(), "wavelength".into(), "time".into()],
        vec![CHANNELS.len(), 2, n],
        amp,
        od.coords().to_vec(),
        Unit::parse("V")?,
    )?;
    let mut rec = Recording::default();
    rec.timeseries.insert("amp", amp);
    rec.geo3d = geo;
    rec.stim = stim;
    rec.meta.insert("generator".into(), "nirskit synthetic fixture".into());
    rec.meta.insert("seed".into(), cfg.seed.to_string());
    rec.validate()?;
    Ok(rec)
}

/// Gaussian sensitivity footprints: channel `c` sees vertex `v` with weight
/// `gain·exp(−|v − centre_c|²/(2·width²))` mm at every wavelength.
pub fn synthetic_sensitivity(
    surface: &TriSurface,
    channels: &[String],
    centres: &[[f64; 3]],
    width: f64,
    gain: f64,
    wavelengths: &[f64],
) -> Result<SensitivityMatrix> {
    let nv = surface.n_vertices();
    let nl = wavelengths.len();
    let mut data = Vec::with_capacity(channels.len() * nv * nl);
    for c in centres {
        for v in &surface.vertices {
            let d2: f64 = (0..3).map(|k| (v[k] - c[k]).powi(2)).sum();
            let a = gain * (-d2 / (2.0 * width * width)).exp();
            data.extend(std::iter::repeat(a).take(nl));
        }
    }
    let mut t = LabeledTensor::build(&["channel", "vertex", "wavelength"], &[channels.len(), nv, nl], data, "mm")?
        .with_coords([
            Coord::strings("channel", "channel", channels.to_vec()),
            Coord::f64("wavelength", "wavelength", wavelengths.to_vec()),
            Coord::bool("is_brain", "vertex", vec![true; nv]),
        ])?;
    if let Some(p) = &surface.parcels {
        t = t.with_coord(Coord::strings("parcel", "vertex", p.clone()))?;
    }
    Ok(SensitivityMatrix::new(&t)?)
}

/// A 2 mm grid under the fixture montage, with two parcels split at x = 45 mm,
/// and footprints centred on each channel midpoint.
pub fn fixture_forward() -> Result<(TriSurface, SensitivityMatrix)> {
    let mut s = TriSurface::grid(51, 11, 2.0);
    for v in &mut s.vertices {
        v[0] -= 5.0;
        v[1] -= 10.0;
        v[2] = 10.0;
    }
    s.crs = "digitized".into();
    let parcels = s.vertices.iter().map(|v| if v[0] < 45.0 { "left" } else { "right" }.to_string()).collect();
    let s = s.with_parcels(parcels)?;
    let geo = fixture_geometry()?;
    let pos = |l: &str| geo.position(l).expect("fixture optode");
    let centres: Vec<[f64; 3]> = CHANNELS
        .iter()
        .map(|c| {
            let (a, b) = (pos(c.1), pos(c.2));
            [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, 10.0]
        })
        .collect();
    let names: Vec<String> = CHANNELS.iter().map(|c| c.0.to_string()).collect();
    let a = synthetic_sensitivity(&s, &names, &centres, 8.0, 1.0, &WAVELENGTHS)?;
    Ok((s, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_valid_and_seeded() {
        let cfg = FixtureConfig { duration: 120.0, ..FixtureConfig::default() };
        let a = synthetic_recording(&cfg).unwrap();
        let b = synthetic_recording(&cfg).unwrap();
        assert_eq!(a, b);
        let amp = a.timeseries.get("amp").unwrap();
        assert_eq!(amp.shape(), &[4, 2, 1200]);
        assert!(amp.data().iter().all(|&x| x > 0.0));
        assert!(a.stim.len() >= 3);
        let c = synthetic_recording(&FixtureConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.timeseries.get("amp"), c.timeseries.get("amp"));
    }
}
