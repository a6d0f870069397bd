//! Ground-truth activation images and synthetic channel-space responses.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::glm::Basis;
use crate::imgrecon::{geodesic_distance, TriSurface};
use crate::preproc::{od2conc, ExtinctionTable, CHROMOPHORES};
use crate::recording::{LabeledPoints, StimTable};
use crate::tensor::{Coord, LabeledTensor};
use crate::units::Quantity;

/// Gaussian blob of geodesic radius `spatial_scale` around `seed`, dims `(vertex, chromo)`.
///
/// HbO peaks at `intensity` and HbR is `hbr_scale·HbO`. The unit is the intensity's.
pub fn build_spatial_activation(
    brain: &TriSurface,
    seed: usize,
    spatial_scale: &Quantity,
    intensity: &Quantity,
    hbr_scale: f64,
) -> Result<LabeledTensor> {
    let s = spatial_scale.to_str("mm")?;
    if !(s > 0.0) {
        return Err(Error::BadParam(alloc::format!("spatial scale must be positive, got {spatial_scale}")));
    }
    let d = geodesic_distance(brain, seed)?;
    let mut data = Vec::with_capacity(2 * d.len());
    for &x in &d {
        let hbo = intensity.value * libm::exp(-x * x / (2.0 * s * s));
        data.push(hbo);
        data.push(hbr_scale * hbo);
    }
    let mut t = LabeledTensor::new(
        vec!["vertex".into(), "chromo".into()],
        vec![d.len(), 2],
        data,
        vec![Coord::str("chromo", "chromo", &CHROMOPHORES)],
        intensity.unit.clone(),
    )?;
    if let Some(p) = &brain.parcels {
        t = t.with_coord(Coord::strings("parcel", "vertex", p.clone()))?;
    }
    Ok(t)
}

fn signal_dim(t: &LabeledTensor) -> Result<&'static str> {
    if t.has_dim("wavelength") {
        Ok("wavelength")
    } else if t.has_dim("chromo") {
        Ok("chromo")
    } else {
        Err(Error::UnknownDim("wavelength or chromo".into()))
    }
}

/// `out[tt, λ, ch, t] = spatial_chan[tt, λ, ch]·temporal_tt(t)`.
///
/// `temporal_tt` is the sum of `value·b(t − onset)` over the trial type's
/// events, scaled to a peak magnitude of one. `basis` must have one component.
pub fn build_synthetic_hrf_timeseries(
    ts: &LabeledTensor,
    stim: &StimTable,
    basis: &Basis,
    spatial_chan: &LabeledTensor,
) -> Result<LabeledTensor> {
    basis.validate()?;
    if basis.n_components() != 1 {
        return Err(Error::BadParam("synthetic responses need a single-component basis".into()));
    }
    let sig = signal_dim(spatial_chan)?;
    let sp = spatial_chan.transpose(&["trial_type", sig, "channel"])?;
    if ts.coord_str("channel")? != sp.coord_str("channel")? {
        return Err(Error::GridMismatch("channel labels differ".into()));
    }
    let time = ts.coord_f64("time")?;
    let tts: Vec<String> = sp.coord_str("trial_type")?.to_vec();
    let n = time.len();
    let per_tt = sp.size(sig)? * sp.size("channel")?;
    let mut data = Vec::with_capacity(tts.len() * per_tt * n);
    for (k, tt) in tts.iter().enumerate() {
        let mut temporal = vec![0.0; n];
        for ev in stim.of_type(tt) {
            let peak = basis.peak(ev.duration);
            for (i, &t) in time.iter().enumerate() {
                temporal[i] += ev.value * basis.eval_scaled(0, t - ev.onset, ev.duration, peak);
            }
        }
        let m = temporal.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if m > 0.0 {
            temporal.iter_mut().for_each(|x| *x /= m);
        }
        for &w in &sp.data()[k * per_tt..(k + 1) * per_tt] {
            data.extend(temporal.iter().map(|x| w * x));
        }
    }
    let mut shape = sp.shape().to_vec();
    shape.push(n);
    let mut coords: Vec<Coord> = sp.coords().to_vec();
    coords.extend(ts.coords_on("time").cloned());
    LabeledTensor::new(
        vec!["trial_type".into(), sig.into(), "channel".into(), "time".into()],
        shape,
        data,
        coords,
        sp.unit().clone(),
    )
}

/// Rescales an OD pattern `(…, channel, wavelength)` so that its largest
/// HbO concentration, after conversion, equals `target`. Each trial type
/// is scaled separately when that dim is present.
pub fn scale_to_peak_conc(
    spatial_od: &LabeledTensor,
    geo3d: &LabeledPoints,
    dpf: &[f64],
    ext: &ExtinctionTable,
    target: &Quantity,
) -> Result<LabeledTensor> {
    let goal = target.to_str("uM")?;
    let scale_one = |t: &LabeledTensor| -> Result<LabeledTensor> {
        let c = od2conc(t, geo3d, dpf, ext)?;
        let hbo = c.isel("chromo", &[c.label_index("chromo", "HbO")?])?;
        let peak = hbo.data().iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if peak == 0.0 {
            return Err(Error::BadParam("pattern has no HbO signal".into()));
        }
        Ok(t.map(|x| x * goal / peak))
    };
    if !spatial_od.has_dim("trial_type") {
        return scale_one(spatial_od);
    }
    let n = spatial_od.size("trial_type")?;
    let parts: Vec<LabeledTensor> = (0..n)
        .map(|i| scale_one(&spatial_od.isel("trial_type", &[i])?))
        .collect::<Result<_>>()?;
    let out = LabeledTensor::concat(&parts, "trial_type")?;
    let order: Vec<&str> = spatial_od.dims().iter().map(|s| s.as_str()).collect();
    out.transpose(&order)
}
