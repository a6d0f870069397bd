//! Intensity, optical density and concentration conversions.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{pinv, rank, Mat};
use crate::quality::channel_distances;
use crate::recording::LabeledPoints;
use crate::tensor::{Coord, LabeledTensor, Reduction};
use crate::units::Unit;

pub const CHROMOPHORES: [&str; 2] = ["HbO", "HbR"];

/// Molar extinction coefficients in 1/(M·mm), natural-log base.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionTable {
    pub name: String,
    /// `(wavelength_nm, eps_hbo, eps_hbr)` with strictly increasing wavelengths.
    rows: Vec<(f64, f64, f64)>,
}

const PRAHL_CSV: &str = include_str!("../../data/prahl.csv");

impl ExtinctionTable {
    pub fn new(name: &str, rows: Vec<(f64, f64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::BadParam("empty extinction table".into()));
        }
        if rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::BadParam("extinction wavelengths must increase strictly".into()));
        }
        if rows.iter().any(|r| !(r.1 > 0.0 && r.2 > 0.0)) {
            return Err(Error::BadParam("extinction coefficients must be positive".into()));
        }
        Ok(ExtinctionTable { name: name.to_string(), rows })
    }

    /// Parses `wavelength_nm,eps_hbo_per_M_mm,eps_hbr_per_M_mm` with a header line.
    pub fn parse_csv(name: &str, text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if i == 0 || line.is_empty() {
                continue;
            }
            let f: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(alloc::format!("line {}: {line}", i + 1))))
                .collect::<Result<_>>()?;
            if f.len() != 3 {
                return Err(Error::Parse(alloc::format!("line {}: expected 3 fields", i + 1)));
            }
            rows.push((f[0], f[1], f[2]));
        }
        Self::new(name, rows)
    }

    /// The bundled hemoglobin tabulation.
    pub fn prahl() -> Self {
        Self::parse_csv("prahl", PRAHL_CSV).expect("bundled table is valid")
    }

    pub fn rows(&self) -> &[(f64, f64, f64)] {
        &self.rows
    }

    /// Linearly interpolated `(eps_hbo, eps_hbr)` at `wl` nm.
    pub fn lookup(&self, wl: f64) -> Result<(f64, f64)> {
        let first = self.rows[0].0;
        let last = self.rows[self.rows.len() - 1].0;
        if !(wl >= first && wl <= last) {
            return Err(Error::BadRange(alloc::format!("{wl} nm outside [{first}, {last}]")));
        }
        let j = self.rows.partition_point(|r| r.0 < wl);
        if self.rows[j].0 == wl {
            return Ok((self.rows[j].1, self.rows[j].2));
        }
        let (a, b) = (self.rows[j - 1], self.rows[j]);
        let t = (wl - a.0) / (b.0 - a.0);
        Ok((a.1 + t * (b.1 - a.1), a.2 + t * (b.2 - a.2)))
    }

    /// `nλ × 2` matrix of coefficients at the given wavelengths.
    pub fn matrix(&self, wavelengths: &[f64]) -> Result<Mat> {
        let mut m = Mat::zeros(wavelengths.len(), 2);
        for (i, &w) in wavelengths.iter().enumerate() {
            let (o, r) = self.lookup(w)?;
            m[(i, 0)] = o;
            m[(i, 1)] = r;
        }
        Ok(m)
    }
}

/// Optical density `−ln(amp / mean_t amp)`.
pub fn int2od(amp: &LabeledTensor) -> Result<LabeledTensor> {
    if amp.data().iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NonPositiveAmplitude);
    }
    amp.map_lanes("time", amp.size("time")?, vec![], |lane, out| {
        let m = lane.iter().sum::<f64>() / lane.len() as f64;
        for (o, &a) in out.iter_mut().zip(lane) {
            *o = -libm::log(a / m);
        }
        Ok(())
    })
    .map(|t| t.with_unit(Unit::unitless()))
}

/// Inverse of [`int2od`] given the per-lane mean intensity.
pub fn od2int(od: &LabeledTensor, mean_amp: &LabeledTensor) -> Result<LabeledTensor> {
    let e = od.map(|x| libm::exp(-x)).with_unit(Unit::unitless());
    let out = mean_amp.binary(&e, crate::tensor::BinOp::Mul)?;
    let order: Vec<&str> = od.dims().iter().map(|s| s.as_str()).collect();
    out.transpose(&order)
}

/// Mean intensity over time, the baseline that [`od2int`] multiplies back.
pub fn mean_intensity(amp: &LabeledTensor) -> Result<LabeledTensor> {
    amp.reduce("time", Reduction::Mean)
}

/// Raises values below `eps·mean_t` of their lane to that floor.
pub fn clamp_amplitude(amp: &LabeledTensor, eps: f64) -> Result<LabeledTensor> {
    amp.map_lanes("time", amp.size("time")?, vec![], |lane, out| {
        let m = lane.iter().sum::<f64>() / lane.len() as f64;
        let floor = eps * m.abs();
        for (o, &a) in out.iter_mut().zip(lane) {
            *o = if a < floor { floor } else { a };
        }
        Ok(())
    })
}

/// Channel distances in millimetres.
fn distances_mm(ts: &LabeledTensor, geo3d: &LabeledPoints) -> Result<Vec<f64>> {
    let d = channel_distances(ts, geo3d)?.convert_to(&Unit::parse("mm")?)?;
    Ok(d.data().to_vec())
}

/// Replaces the `from` dim by `to` of length `new_len`, applying a per-channel
/// linear map `maps[ch]` (`new_len × old_len`) to every lane along `from`.
fn apply_channel_maps(
    t: &LabeledTensor,
    from: &str,
    to: &str,
    new_coords: Vec<Coord>,
    maps: &[Mat],
    unit: Unit,
) -> Result<LabeledTensor> {
    let axis = t.axis(from)?;
    let ch_axis = t.axis("channel")?;
    let strides = t.strides();
    let n_old = t.shape()[axis];
    let n_new = maps.first().map(|m| m.nrows()).unwrap_or(0);
    let outer: usize = t.shape()[..axis].iter().product();
    let inner: usize = t.shape()[axis + 1..].iter().product();
    let mut data = vec![0.0; outer * n_new * inner];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * n_old * inner + i;
            let ch = (base / strides[ch_axis]) % t.shape()[ch_axis];
            let m = &maps[ch];
            for r in 0..n_new {
                let mut s = 0.0;
                for k in 0..n_old {
                    s += m[(r, k)] * t.data()[base + k * inner];
                }
                data[(o * n_new + r) * inner + i] = s;
            }
        }
    }
    let mut dims = t.dims().to_vec();
    dims[axis] = to.to_string();
    let mut shape = t.shape().to_vec();
    shape[axis] = n_new;
    let mut coords: Vec<Coord> = t.coords().iter().filter(|c| c.dim != from).cloned().collect();
    coords.extend(new_coords);
    LabeledTensor::new(dims, shape, data, coords, unit)
}

fn check_extinction(eps: &Mat) -> Result<()> {
    if eps.nrows() < 2 || rank(eps) < 2 {
        return Err(Error::SingularExtinction);
    }
    Ok(())
}

/// Per-channel forward matrices `E[λ, c] = ε_c(λ)·L_ch·DPF(λ)`.
fn forward_matrices(eps: &Mat, dist_mm: &[f64], dpf: &[f64]) -> Vec<Mat> {
    dist_mm
        .iter()
        .map(|&l| Mat::from_fn(eps.nrows(), 2, |i, c| eps[(i, c)] * l * dpf[i]))
        .collect()
}

fn check_dpf(dpf: &[f64], nwl: usize) -> Result<()> {
    if dpf.len() != nwl {
        return Err(Error::ShapeMismatch(alloc::format!("{} DPF values for {nwl} wavelengths", dpf.len())));
    }
    if dpf.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::BadParam("DPF must be positive".into()));
    }
    Ok(())
}

/// Modified Beer–Lambert conversion of optical density to concentration
/// change in µM. The `wavelength` dim is replaced in place by `chromo`.
pub fn od2conc(od: &LabeledTensor, geo3d: &LabeledPoints, dpf: &[f64], ext: &ExtinctionTable) -> Result<LabeledTensor> {
    let wl = od.coord_f64("wavelength")?.to_vec();
    check_dpf(dpf, wl.len())?;
    let eps = ext.matrix(&wl)?;
    check_extinction(&eps)?;
    let dist = distances_mm(od, geo3d)?;
    let maps: Vec<Mat> = forward_matrices(&eps, &dist, dpf)
        .iter()
        .map(|e| pinv(e, 1e-15 * e.nrows() as f64) * 1e6)
        .collect();
    apply_channel_maps(od, "wavelength", "chromo", vec![Coord::str("chromo", "chromo", &CHROMOPHORES)], &maps, Unit::parse("uM")?)
}

/// Forward model from concentration change to optical density at `wavelengths` (nm).
pub fn conc2od(
    conc: &LabeledTensor,
    geo3d: &LabeledPoints,
    dpf: &[f64],
    ext: &ExtinctionTable,
    wavelengths: &[f64],
) -> Result<LabeledTensor> {
    check_dpf(dpf, wavelengths.len())?;
    let labels = conc.coord_str("chromo")?;
    if labels != CHROMOPHORES {
        return Err(Error::CoordMismatch("chromo must be [HbO, HbR]".into()));
    }
    let molar = conc.convert_to(&Unit::parse("M")?)?;
    let eps = ext.matrix(wavelengths)?;
    let dist = distances_mm(conc, geo3d)?;
    let maps = forward_matrices(&eps, &dist, dpf);
    apply_channel_maps(
        &molar,
        "chromo",
        "wavelength",
        vec![Coord::f64("wavelength", "wavelength", wavelengths.to_vec())],
        &maps,
        Unit::unitless(),
    )
}
