//! Simulation subcommands: toy datasets, fixtures, and activation injection.

use std::path::Path;

use nirskit_core::glm::Basis;
use nirskit_core::imgrecon::{
    assemble_inverse_operator, forward_project, geodesic_distance, reconstruct, ImageReconConfig, SensitivityMatrix, TriSurface,
};
use nirskit_core::preproc::{int2od, ExtinctionTable};
use nirskit_core::sim::{build_spatial_activation, build_synthetic_hrf_timeseries, simulate_bimodal_toy, ToyConfig};
use nirskit_core::{BinOp, Coord, LabeledTensor, Quantity, Recording, Reduction};
use serde::Deserialize;

use crate::container::{write_bundle, Bundle};
use crate::error::{Error, Result};
use crate::forward::surface_bundle;
use crate::reports::table_csv;

/// Toy configuration file; absent keys keep the defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyFile {
    nx: Option<usize>,
    ny: Option<usize>,
    ns_all: Option<usize>,
    ns_target: Option<usize>,
    #[serde(rename = "T")]
    t: Option<f64>,
    t_epoch: Option<f64>,
    rate: Option<f64>,
    f_min: Option<f64>,
    f_max: Option<f64>,
    #[serde(rename = "dT")]
    dt: Option<f64>,
    gamma: Option<f64>,
    gamma_e: Option<f64>,
    ellx: Option<f64>,
    elly: Option<f64>,
    sigma_noise: Option<f64>,
    invert_sy: Option<bool>,
    seed: Option<u64>,
}

impl ToyFile {
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(ToyFile::default());
        }
        serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_config(&self) -> ToyConfig {
        let d = ToyConfig::default();
        ToyConfig {
            nx: self.nx.unwrap_or(d.nx),
            ny: self.ny.unwrap_or(d.ny),
            ns_all: self.ns_all.unwrap_or(d.ns_all),
            ns_target: self.ns_target.unwrap_or(d.ns_target),
            t: self.t.unwrap_or(d.t),
            t_epoch: self.t_epoch.unwrap_or(d.t_epoch),
            rate: self.rate.unwrap_or(d.rate),
            f_min: self.f_min.unwrap_or(d.f_min),
            f_max: self.f_max.unwrap_or(d.f_max),
            dt: self.dt.unwrap_or(d.dt),
            gamma: self.gamma.unwrap_or(d.gamma),
            gamma_e: self.gamma_e.unwrap_or(d.gamma_e),
            ellx: self.ellx.unwrap_or(d.ellx),
            elly: self.elly.unwrap_or(d.elly),
            sigma_noise: self.sigma_noise.unwrap_or(d.sigma_noise),
            invert_sy: self.invert_sy.unwrap_or(d.invert_sy),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

/// Simulates the toy dataset and returns it as a bundle of named tensors.
pub fn toy_bundle(cfg: &ToyConfig) -> Result<Bundle> {
    cfg.validate()?;
    let ds = simulate_bimodal_toy(cfg)?;
    let mut b = Bundle::default();
    for (name, t) in [
        ("x", &ds.x),
        ("x_power", &ds.x_power),
        ("y", &ds.y),
        ("sx", &ds.sx),
        ("sx_power", &ds.sx_power),
        ("sy", &ds.sy),
        ("ax", &ds.ax),
        ("ay", &ds.ay),
    ] {
        b.tensors.insert(name, t.clone());
    }
    let meta = &mut b.recording.meta;
    meta.insert("toy.seed".into(), cfg.seed.to_string());
    meta.insert("toy.gamma".into(), cfg.gamma.to_string());
    meta.insert("toy.dT".into(), cfg.dt.to_string());
    meta.insert("toy.snr_db".into(), format!("{:.2}", cfg.snr_db()));
    Ok(b)
}

/// Parameters of an activation injection.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectParams {
    /// Seed vertex; `None` picks the vertex with the largest total sensitivity.
    pub seed_vertex: Option<usize>,
    pub spatial_scale: Quantity,
    pub intensity: Quantity,
    pub hbr_scale: f64,
    pub trial_types: Option<Vec<String>>,
    pub basis: Basis,
    pub alpha_meas: f64,
}

impl Default for InjectParams {
    fn default() -> Self {
        InjectParams {
            seed_vertex: None,
            spatial_scale: Quantity::new(20.0, "mm").expect("registered unit"),
            intensity: Quantity::new(1.0, "uM").expect("registered unit"),
            hbr_scale: -0.4,
            trial_types: None,
            basis: Basis::Gamma { tau: 0.0, sigma: 3.0, t: 10.0 },
            alpha_meas: 0.01,
        }
    }
}

/// Ground-truth comparison of one reconstructed activation.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectMetrics {
    pub trial_type: String,
    pub seed_vertex: usize,
    pub argmax_vertex: usize,
    pub geodesic_error_mm: f64,
    pub peak_hbo: f64,
    pub peak_hbr: f64,
    pub hbr_hbo_ratio: f64,
}

pub fn best_covered_vertex(a: &SensitivityMatrix) -> Result<usize> {
    let total = a.tensor().reduce("channel", Reduction::Sum)?.reduce("wavelength", Reduction::Sum)?;
    let d = total.data();
    Ok((0..d.len()).fold(0, |b, i| if d[i] > d[b] { i } else { b }))
}

/// Channel-space optical density of an image `(vertex, chromo)`.
pub fn activation_od(a: &SensitivityMatrix, image: &LabeledTensor, ext: &ExtinctionTable) -> Result<LabeledTensor> {
    Ok(forward_project(a, image, ext)?)
}

/// Reconstructs a noise-free channel pattern and compares it with the truth.
pub fn closure_metrics(
    surface: &TriSurface,
    a: &SensitivityMatrix,
    seed: usize,
    od_pattern: &LabeledTensor,
    alpha_meas: f64,
    ext: &ExtinctionTable,
    trial_type: &str,
) -> Result<InjectMetrics> {
    let cfg = ImageReconConfig { alpha_meas, ..ImageReconConfig::default() };
    let op = assemble_inverse_operator(a, &cfg, ext)?;
    let img = reconstruct(&op, od_pattern)?.transpose(&["chromo", "vertex"])?;
    let nv = img.shape()[1];
    let hbo = &img.data()[..nv];
    let hbr = &img.data()[nv..];
    let argmax = (0..nv).fold(0, |b, i| if hbo[i] > hbo[b] { i } else { b });
    let d = geodesic_distance(surface, seed)?;
    let hbr_peak = hbr.iter().fold(0.0f64, |m, &x| if x.abs() > m.abs() { x } else { m });
    Ok(InjectMetrics {
        trial_type: trial_type.to_string(),
        seed_vertex: seed,
        argmax_vertex: argmax,
        geodesic_error_mm: d[argmax],
        peak_hbo: hbo[argmax],
        peak_hbr: hbr_peak,
        hbr_hbo_ratio: hbr_peak / hbo[argmax],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Injected {
    pub recording: Recording,
    pub metrics: Vec<InjectMetrics>,
}

/// Adds a synthetic cortical activation per trial type to the recording's
/// optical density. The augmented series is stored as `od`; the amplitude
/// series is kept. With `reconstruct`, each spatial pattern is inverted and
/// compared with its ground truth.
pub fn inject_activation(
    rec: &Recording,
    surface: &TriSurface,
    a: &SensitivityMatrix,
    p: &InjectParams,
    reconstruct_images: bool,
) -> Result<Injected> {
    let ext = ExtinctionTable::prahl();
    let amp = rec.timeseries.get("amp").ok_or_else(|| Error::Schema("recording has no amp series".into()))?;
    let od = int2od(amp)?.transpose(&["channel", "wavelength", "time"])?;
    let seed = match p.seed_vertex {
        Some(v) if v < surface.n_vertices() => v,
        Some(v) => return Err(Error::Core(nirskit_core::Error::BadSeed(v))),
        None => best_covered_vertex(a)?,
    };
    let image = build_spatial_activation(surface, seed, &p.spatial_scale, &p.intensity, p.hbr_scale)?;
    let pattern = activation_od(a, &image, &ext)?;
    if pattern.coord_str("channel")? != od.coord_str("channel")? {
        return Err(Error::Schema("sensitivity channels differ from the recording's".into()));
    }
    let tts = p.trial_types.clone().unwrap_or_else(|| rec.stim.trial_types());
    let parts: Vec<LabeledTensor> = tts.iter().map(|_| pattern.expand_dims("trial_type", 0)).collect::<nirskit_core::Result<_>>()?;
    let spatial = LabeledTensor::concat(&parts, "trial_type")?.with_coord(Coord::strings("trial_type", "trial_type", tts.clone()))?;
    let resp = build_synthetic_hrf_timeseries(&od, &rec.stim, &p.basis, &spatial)?;
    let summed = resp.reduce("trial_type", Reduction::Sum)?.transpose(&["channel", "wavelength", "time"])?;
    let augmented = od.binary(&summed, BinOp::Add)?;
    let mut out = rec.clone();
    out.timeseries.insert("od", augmented);
    out.meta.insert("inject.seed_vertex".into(), seed.to_string());
    out.meta.insert("inject.spatial_scale".into(), p.spatial_scale.to_string());
    out.meta.insert("inject.intensity".into(), p.intensity.to_string());
    out.meta.insert("inject.hbr_scale".into(), p.hbr_scale.to_string());
    let metrics = if reconstruct_images {
        tts.iter().map(|tt| closure_metrics(surface, a, seed, &pattern, p.alpha_meas, &ext, tt)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(Injected { recording: out, metrics })
}

pub fn metrics_csv(m: &[InjectMetrics]) -> Result<String> {
    table_csv(
        &["trial_type", "seed_vertex", "argmax_vertex", "geodesic_error_mm", "peak_hbo_uM", "peak_hbr_uM", "hbr_hbo_ratio"],
        m.iter()
            .map(|r| {
                vec![
                    r.trial_type.clone(),
                    r.seed_vertex.to_string(),
                    r.argmax_vertex.to_string(),
                    r.geodesic_error_mm.to_string(),
                    r.peak_hbo.to_string(),
                    r.peak_hbr.to_string(),
                    r.hbr_hbo_ratio.to_string(),
                ]
            })
            .collect(),
    )
}

/// Writes the fixture forward model: sensitivity `A` plus surface arrays.
pub fn write_forward(surface: &TriSurface, a: &SensitivityMatrix, path: &Path) -> Result<()> {
    let mut b = surface_bundle(surface)?;
    b.tensors.insert(crate::forward::SENSITIVITY, a.tensor().clone());
    write_bundle(&b, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{fixture_forward, synthetic_recording, FixtureConfig};

    #[test]
    fn toy_file_overrides() {
        let c = ToyFile::parse("dT: 2\nseed: 5\ngamma: 0.6\n").unwrap().to_config();
        assert_eq!((c.dt, c.seed, c.nx), (2.0, 5, 32));
        assert!(ToyFile::parse("bogus: 1\n").is_err());
    }

    #[test]
    fn fixture_injection_round_trip() {
        let rec = synthetic_recording(&FixtureConfig { duration: 120.0, ..FixtureConfig::default() }).unwrap();
        let (s, a) = fixture_forward().unwrap();
        let inj = inject_activation(&rec, &s, &a, &InjectParams::default(), true).unwrap();
        assert_eq!(inj.metrics.len(), 2);
        let m = &inj.metrics[0];
        assert!((m.hbr_hbo_ratio + 0.4).abs() < 0.04, "{m:?}");
        let od = inj.recording.timeseries.get("od").unwrap();
        let base = int2od(rec.timeseries.get("amp").unwrap()).unwrap().transpose(&["channel", "wavelength", "time"]).unwrap();
        let diff: f64 = od.data().iter().zip(base.data()).map(|(a, b)| (a - b).abs()).sum();
        assert!(diff > 0.0);
    }
}
