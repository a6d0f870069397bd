//! Regularized inversion of the sensitivity matrix.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::basis::SpatialBasis;
use crate::error::{Error, Result};
use crate::linalg::{pinv, solve_spd, Mat};
use crate::preproc::{ExtinctionTable, CHROMOPHORES};
use crate::tensor::{Coord, LabeledTensor};
use crate::units::Unit;

/// Channel × vertex × wavelength forward operator in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    a: LabeledTensor,
    channels: Vec<String>,
    wavelengths: Vec<f64>,
    is_brain: Vec<bool>,
}

impl SensitivityMatrix {
    /// Needs `channel` and `wavelength` coords. A bool `is_brain` coord on
    /// `vertex` is optional; without it every vertex counts as brain.
    pub fn new(a: &LabeledTensor) -> Result<Self> {
        let a = a.transpose(&["channel", "vertex", "wavelength"])?.convert_to(&Unit::parse("mm")?)?;
        if a.data().iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::BadParam("sensitivity entries must be non-negative".into()));
        }
        let channels = a.coord_str("channel")?.to_vec();
        let wavelengths = a.coord_f64("wavelength")?.to_vec();
        let nv = a.size("vertex")?;
        let is_brain = match a.coord("is_brain") {
            Some(_) => a.coord_bool("is_brain")?.to_vec(),
            None => vec![true; nv],
        };
        Ok(SensitivityMatrix { a, channels, wavelengths, is_brain })
    }

    pub fn tensor(&self) -> &LabeledTensor {
        &self.a
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn is_brain(&self) -> &[bool] {
        &self.is_brain
    }

    pub fn n_vertices(&self) -> usize {
        self.is_brain.len()
    }

    /// `nch × nv` block for wavelength index `l`.
    pub fn block(&self, l: usize) -> Mat {
        let (nch, nv, nl) = (self.channels.len(), self.n_vertices(), self.wavelengths.len());
        let d = self.a.data();
        Mat::from_fn(nch, nv, |c, v| d[(c * nv + v) * nl + l])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconMode {
    /// Both chromophores from one stacked system.
    Direct,
    /// Absorption per wavelength, then a per-vertex spectral solve.
    Mua2Conc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageReconConfig {
    pub recon_mode: ReconMode,
    pub brain_only: bool,
    pub alpha_meas: f64,
    pub alpha_spatial: Option<f64>,
    pub apply_c_meas: bool,
    /// Per-channel variance, length `nch` or `nλ·nch` (wavelength major).
    pub c_meas: Option<Vec<f64>>,
    pub spatial_basis: Option<SpatialBasis>,
}

impl Default for ImageReconConfig {
    fn default() -> Self {
        ImageReconConfig {
            recon_mode: ReconMode::Mua2Conc,
            brain_only: false,
            alpha_meas: 0.01,
            alpha_spatial: None,
            apply_c_meas: false,
            c_meas: None,
            spatial_basis: None,
        }
    }
}

impl ImageReconConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_meas > 0.0) {
            return Err(Error::BadParam(alloc::format!("alpha_meas must be positive, got {}", self.alpha_meas)));
        }
        if let Some(a) = self.alpha_spatial {
            if !(a >= 0.0) {
                return Err(Error::BadParam(alloc::format!("alpha_spatial must be non-negative, got {a}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseOperator {
    pub mode: ReconMode,
    pub channels: Vec<String>,
    pub wavelengths: Vec<f64>,
    /// Indices into the sensitivity matrix's vertices that are reconstructed.
    pub vertices: Vec<usize>,
    vertex_coords: Vec<Coord>,
    /// Direct: one `(2·nv) × (nλ·nch)` matrix. Mua2conc: one `nv × nch` per wavelength.
    pub w: Vec<Mat>,
    /// `2 × nλ` spectral pseudo-inverse used by mua2conc.
    pub spectral: Mat,
}

/// Tikhonov inverse `W` with optional depth compensation.
///
/// `ℓ_v = sqrt(d_v + α_s·max d)` with `d = diag(AᵀA)`, `Ã = A·diag(1/ℓ)`,
/// `M = ÃÃᵀ + α·max diag(ÃÃᵀ)·C`, `W = diag(1/ℓ)·Ãᵀ·M⁻¹`.
pub fn tikhonov(a: &Mat, alpha_meas: f64, alpha_spatial: Option<f64>, c_meas: Option<&[f64]>) -> Result<Mat> {
    let (m, n) = a.shape();
    let inv_l: Vec<f64> = match alpha_spatial {
        None => vec![1.0; n],
        Some(s) => {
            let d: Vec<f64> = (0..n).map(|j| a.column(j).norm_squared()).collect();
            let max = d.iter().fold(0.0f64, |x, &y| x.max(y));
            d.iter()
                .map(|&x| {
                    let l = libm::sqrt(x + s * max);
                    if l > 0.0 { 1.0 / l } else { 0.0 }
                })
                .collect()
        }
    };
    let mut at = a.clone();
    for (j, &s) in inv_l.iter().enumerate() {
        at.column_mut(j).scale_mut(s);
    }
    let mut mm = &at * at.transpose();
    let max = (0..m).map(|i| mm[(i, i)]).fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::SingularSystem);
    }
    for i in 0..m {
        mm[(i, i)] += alpha_meas * max * c_meas.map_or(1.0, |c| c[i]);
    }
    // W = (M⁻¹·Ã·diag(1/ℓ))ᵀ since M is symmetric.
    let mut rhs = at;
    for (j, &s) in inv_l.iter().enumerate() {
        rhs.column_mut(j).scale_mut(s);
    }
    Ok(solve_spd(&mm, &rhs)?.transpose())
}

fn with_basis(block: &Mat, basis: Option<&SpatialBasis>) -> Mat {
    match basis {
        None => block.clone(),
        Some(b) => {
            let mut out = Mat::zeros(block.nrows(), b.n_basis());
            for (k, col) in b.columns.iter().enumerate() {
                for &(v, w) in col {
                    out.column_mut(k).axpy(w, &block.column(v), 1.0);
                }
            }
            out
        }
    }
}

/// Maps rows of a basis-space inverse back to the selected vertices.
fn expand_rows(w: &Mat, rows: &[Vec<(usize, f64)>], vertices: &[usize], blocks: usize, nb: usize) -> Mat {
    let nout = vertices.len();
    let mut out = Mat::zeros(blocks * nout, w.ncols());
    for c in 0..blocks {
        for (i, &v) in vertices.iter().enumerate() {
            for &(k, b) in &rows[v] {
                for j in 0..w.ncols() {
                    out[(c * nout + i, j)] += b * w[(c * nb + k, j)];
                }
            }
        }
    }
    out
}

fn select_rows(w: &Mat, vertices: &[usize], blocks: usize, nv: usize) -> Mat {
    let nout = vertices.len();
    Mat::from_fn(blocks * nout, w.ncols(), |r, j| w[((r / nout) * nv + vertices[r % nout], j)])
}

pub fn assemble_inverse_operator(
    a: &SensitivityMatrix,
    cfg: &ImageReconConfig,
    ext: &ExtinctionTable,
) -> Result<InverseOperator> {
    cfg.validate()?;
    let (nch, nv, nl) = (a.channels.len(), a.n_vertices(), a.wavelengths.len());
    let e = ext.matrix(&a.wavelengths)?;
    let basis = cfg.spatial_basis.as_ref();
    if let Some(b) = basis {
        if b.n_vertices() != nv {
            return Err(Error::DimMismatch(alloc::format!("basis has {} vertices, sensitivity {nv}", b.n_vertices())));
        }
    }
    let c_meas: Option<Vec<f64>> = if cfg.apply_c_meas {
        let c = cfg.c_meas.clone().unwrap_or_else(|| vec![1.0; nch]);
        let c = match c.len() {
            x if x == nch => (0..nl).flat_map(|_| c.iter().copied()).collect(),
            x if x == nch * nl => c,
            x => return Err(Error::ShapeMismatch(alloc::format!("c_meas has {x} entries for {nch} channels"))),
        };
        if c.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::BadParam("c_meas entries must be positive".into()));
        }
        Some(c)
    } else {
        None
    };
    let vertices: Vec<usize> = (0..nv).filter(|&v| !cfg.brain_only || a.is_brain[v]).collect();
    let blocks: Vec<Mat> = (0..nl).map(|l| with_basis(&a.block(l), basis)).collect();
    let ncol = blocks[0].ncols();
    let rows = basis.map(|b| b.rows());
    let back = |w: &Mat, nblocks: usize| match &rows {
        Some(r) => expand_rows(w, r, &vertices, nblocks, ncol),
        None => select_rows(w, &vertices, nblocks, nv),
    };
    let w = match cfg.recon_mode {
        ReconMode::Direct => {
            let mut ac = Mat::zeros(nl * nch, 2 * ncol);
            for (l, blk) in blocks.iter().enumerate() {
                for c in 0..2 {
                    ac.view_mut((l * nch, c * ncol), (nch, ncol)).copy_from(&(blk * e[(l, c)]));
                }
            }
            vec![back(&tikhonov(&ac, cfg.alpha_meas, cfg.alpha_spatial, c_meas.as_deref())?, 2)]
        }
        ReconMode::Mua2Conc => blocks
            .iter()
            .enumerate()
            .map(|(l, blk)| {
                let c = c_meas.as_ref().map(|c| &c[l * nch..(l + 1) * nch]);
                Ok(back(&tikhonov(blk, cfg.alpha_meas, cfg.alpha_spatial, c)?, 1))
            })
            .collect::<Result<_>>()?,
    };
    let vertex_coords = a.a.isel("vertex", &vertices)?.coords_on("vertex").cloned().collect();
    Ok(InverseOperator {
        mode: cfg.recon_mode,
        channels: a.channels.clone(),
        wavelengths: a.wavelengths.clone(),
        vertices,
        vertex_coords,
        w,
        spectral: pinv(&e, 1e-15 * nl.max(2) as f64),
    })
}

fn extra_dims(t: &LabeledTensor, skip: &[&str]) -> Vec<String> {
    t.dims().iter().filter(|d| !skip.contains(&d.as_str())).cloned().collect()
}

fn row_major(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}

/// Aligns `y` to the operator's channel and wavelength order.
fn align(y: &LabeledTensor, channels: &[String], wavelengths: &[f64]) -> Result<LabeledTensor> {
    let labels = y.coord_str("channel")?;
    if labels.len() != channels.len() {
        return Err(Error::ChannelMismatch(alloc::format!("{} channels vs {}", labels.len(), channels.len())));
    }
    let idx: Vec<usize> = channels
        .iter()
        .map(|c| labels.iter().position(|x| x == c).ok_or_else(|| Error::ChannelMismatch(c.clone())))
        .collect::<Result<_>>()?;
    let wl = y.coord_f64("wavelength")?;
    let widx: Vec<usize> = wavelengths
        .iter()
        .map(|w| {
            wl.iter()
                .position(|x| (x - w).abs() < 1e-6)
                .ok_or_else(|| Error::ChannelMismatch(alloc::format!("wavelength {w} nm")))
        })
        .collect::<Result<_>>()?;
    if wl.len() != wavelengths.len() {
        return Err(Error::ChannelMismatch(alloc::format!("{} wavelengths vs {}", wl.len(), wavelengths.len())));
    }
    y.isel("channel", &idx)?.isel("wavelength", &widx)
}

/// Optical density `(channel, wavelength, …)` to an image `(chromo, vertex, …)` in µM.
pub fn reconstruct(op: &InverseOperator, y: &LabeledTensor) -> Result<LabeledTensor> {
    if !y.unit().is_unitless() {
        return Err(Error::UnitMismatch(y.unit().to_string(), "1".into()));
    }
    let y = align(y, &op.channels, &op.wavelengths)?;
    let extras = extra_dims(&y, &["channel", "wavelength"]);
    let mut order = vec!["wavelength", "channel"];
    order.extend(extras.iter().map(|s| s.as_str()));
    let yt = y.transpose(&order)?;
    let (nch, nl, nout) = (op.channels.len(), op.wavelengths.len(), op.vertices.len());
    let k: usize = extras.iter().map(|d| y.size(d)).product::<Result<usize>>()?;
    let ym = Mat::from_row_slice(nl * nch, k, yt.data());
    let x = match op.mode {
        ReconMode::Direct => &op.w[0] * &ym,
        ReconMode::Mua2Conc => {
            let mut x = Mat::zeros(2 * nout, k);
            for (l, wl) in op.w.iter().enumerate() {
                let mua = wl * ym.rows(l * nch, nch);
                for c in 0..2 {
                    let mut dst = x.rows_mut(c * nout, nout);
                    dst += &mua * op.spectral[(c, l)];
                }
            }
            x
        }
    };
    let data: Vec<f64> = row_major(&x).into_iter().map(|v| v * 1e6).collect();
    let mut dims = vec!["chromo".to_string(), "vertex".to_string()];
    dims.extend(extras.iter().cloned());
    let mut shape = vec![2, nout];
    for d in &extras {
        shape.push(y.size(d)?);
    }
    let mut coords = vec![Coord::str("chromo", "chromo", &CHROMOPHORES)];
    coords.extend(op.vertex_coords.iter().cloned());
    coords.extend(y.coords().iter().filter(|c| extras.contains(&c.dim)).cloned());
    LabeledTensor::new(dims, shape, data, coords, Unit::parse("uM")?)
}

/// Image `(chromo, vertex, …)` to optical density `(channel, wavelength, …)`.
///
/// The image may cover all vertices or exactly the brain vertices.
pub fn forward_project(a: &SensitivityMatrix, image: &LabeledTensor, ext: &ExtinctionTable) -> Result<LabeledTensor> {
    let (nch, nv, nl) = (a.channels.len(), a.n_vertices(), a.wavelengths.len());
    let nvi = image.size("vertex")?;
    let verts: Vec<usize> = if nvi == nv {
        (0..nv).collect()
    } else {
        let b: Vec<usize> = (0..nv).filter(|&v| a.is_brain[v]).collect();
        if b.len() != nvi {
            return Err(Error::DimMismatch(alloc::format!("image has {nvi} vertices, sensitivity {nv}")));
        }
        b
    };
    let chromo = image.coord_str("chromo")?;
    let cidx: Vec<usize> = CHROMOPHORES
        .iter()
        .map(|c| chromo.iter().position(|x| x == c).ok_or_else(|| Error::DimMismatch(alloc::format!("missing chromo {c}"))))
        .collect::<Result<_>>()?;
    let image = image.isel("chromo", &cidx)?.convert_to(&Unit::parse("M")?)?;
    let extras = extra_dims(&image, &["chromo", "vertex"]);
    let mut order = vec!["chromo", "vertex"];
    order.extend(extras.iter().map(|s| s.as_str()));
    let it = image.transpose(&order)?;
    let k: usize = extras.iter().map(|d| image.size(d)).product::<Result<usize>>()?;
    let x = Mat::from_row_slice(2 * nvi, k, it.data());
    let e = ext.matrix(&a.wavelengths)?;
    let mut data = vec![0.0; nch * nl * k];
    for l in 0..nl {
        let z = x.rows(0, nvi) * e[(l, 0)] + x.rows(nvi, nvi) * e[(l, 1)];
        let blk = a.block(l);
        let sub = Mat::from_fn(nch, nvi, |c, i| blk[(c, verts[i])]);
        let yl = sub * z;
        for c in 0..nch {
            for j in 0..k {
                data[(c * nl + l) * k + j] = yl[(c, j)];
            }
        }
    }
    let mut dims = vec!["channel".to_string(), "wavelength".to_string()];
    dims.extend(extras.iter().cloned());
    let mut shape = vec![nch, nl];
    for d in &extras {
        shape.push(image.size(d)?);
    }
    let mut coords: Vec<Coord> = a.a.coords_on("channel").cloned().collect();
    coords.extend(a.a.coords_on("wavelength").cloned());
    coords.extend(image.coords().iter().filter(|c| extras.contains(&c.dim)).cloned());
    LabeledTensor::new(dims, shape, data, coords, Unit::unitless())
}

/// Unweighted mean over vertices sharing a `parcel` label; parcels sorted.
pub fn parcel_average(image: &LabeledTensor) -> Result<LabeledTensor> {
    let labels = match image.coord("parcel") {
        Some(c) if c.dim == "vertex" => image.coord_str("parcel")?,
        _ => return Err(Error::NoParcelCoord),
    };
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (v, l) in labels.iter().enumerate() {
        groups.entry(l.as_str()).or_default().push(v);
    }
    let names: Vec<String> = groups.keys().map(|s| s.to_string()).collect();
    let members: Vec<Vec<usize>> = groups.into_values().collect();
    let stripped = image.clone().without_coord("parcel");
    let stripped = stripped
        .coords()
        .iter()
        .filter(|c| c.dim == "vertex")
        .map(|c| c.name.clone())
        .collect::<Vec<_>>()
        .iter()
        .fold(stripped, |t, n| t.without_coord(n));
    stripped
        .map_lanes("vertex", names.len(), vec![Coord::strings("parcel", "vertex", names)], |x, out| {
            for (o, m) in out.iter_mut().zip(&members) {
                *o = m.iter().map(|&v| x[v]).sum::<f64>() / m.len() as f64;
            }
            Ok(())
        })?
        .rename_dim("vertex", "parcel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgrecon::mesh::TriSurface;
    use crate::rng::Rng;
    use proptest::prelude::*;

    pub(crate) fn identity_ext() -> ExtinctionTable {
        ExtinctionTable::new("id", vec![(760.0, 1.0, 1e-300), (850.0, 1e-300, 1.0)]).unwrap()
    }

    pub(crate) fn sens(nch: usize, nv: usize, data: Vec<f64>, brain: Option<Vec<bool>>) -> SensitivityMatrix {
        let mut t = LabeledTensor::build(&["channel", "vertex", "wavelength"], &[nch, nv, 2], data, "mm")
            .unwrap()
            .with_coords([
                Coord::strings("channel", "channel", (0..nch).map(|i| alloc::format!("S{}D1", i + 1)).collect()),
                Coord::f64("wavelength", "wavelength", vec![760.0, 850.0]),
            ])
            .unwrap();
        if let Some(b) = brain {
            t = t.with_coord(Coord::bool("is_brain", "vertex", b)).unwrap();
        }
        SensitivityMatrix::new(&t).unwrap()
    }

    fn random_sens(seed: u64, nch: usize, nv: usize, same: bool) -> SensitivityMatrix {
        let mut r = Rng::new(seed);
        let base: Vec<f64> = (0..nch * nv).map(|_| r.uniform()).collect();
        let other: Vec<f64> = (0..nch * nv).map(|_| r.uniform()).collect();
        let mut d = vec![0.0; nch * nv * 2];
        for i in 0..nch * nv {
            d[2 * i] = base[i];
            d[2 * i + 1] = if same { base[i] } else { other[i] };
        }
        sens(nch, nv, d, None)
    }

    fn od(nch: usize, k: usize, data: Vec<f64>) -> LabeledTensor {
        LabeledTensor::build(&["channel", "wavelength", "time"], &[nch, 2, k], data, "1")
            .unwrap()
            .with_coords([
                Coord::strings("channel", "channel", (0..nch).map(|i| alloc::format!("S{}D1", i + 1)).collect()),
                Coord::f64("wavelength", "wavelength", vec![760.0, 850.0]),
                Coord::f64("time", "time", (0..k).map(|i| i as f64).collect()),
            ])
            .unwrap()
    }

    fn cfg(mode: ReconMode, alpha: f64) -> ImageReconConfig {
        ImageReconConfig { recon_mode: mode, alpha_meas: alpha, ..Default::default() }
    }

    #[test]
    fn identity_limit() {
        let a = Mat::identity(4, 4);
        let w = tikhonov(&a, 1e-12, None, None).unwrap();
        assert!((w - Mat::identity(4, 4)).abs().max() < 1e-6);
    }

    #[test]
    fn push_through_identity() {
        let mut r = Rng::new(3);
        for _ in 0..10 {
            let a = Mat::from_fn(10, 30, |_, _| r.normal());
            let alpha = 0.05;
            let w = tikhonov(&a, alpha, None, None).unwrap();
            let mx = (&a * a.transpose()).diagonal().max();
            let y = Mat::from_fn(10, 1, |_, _| r.normal());
            let lhs = (a.transpose() * &a + Mat::identity(30, 30) * (alpha * mx)) * (&w * &y);
            let rhs = a.transpose() * &y;
            assert!((lhs - &rhs).norm() <= 1e-9 * rhs.norm() * mx);
        }
    }

    #[test]
    fn large_alpha_spatial_is_plain() {
        let mut r = Rng::new(5);
        let a = Mat::from_fn(8, 20, |_, _| r.uniform());
        let plain = tikhonov(&a, 0.1, None, None).unwrap();
        let sv = tikhonov(&a, 0.1, Some(1e12), None).unwrap();
        // ℓ is constant, so W differs only by the scale that cancels in M.
        let s = plain.norm() / sv.norm();
        assert!((plain - sv * s).norm() < 1e-6 * s);
    }

    #[test]
    fn zero_in_zero_out_and_shapes() {
        let a = random_sens(1, 6, 12, false);
        for mode in [ReconMode::Direct, ReconMode::Mua2Conc] {
            let op = assemble_inverse_operator(&a, &cfg(mode, 0.01), &ExtinctionTable::prahl()).unwrap();
            let x = reconstruct(&op, &od(6, 3, vec![0.0; 36])).unwrap();
            assert_eq!(x.dims(), &["chromo", "vertex", "time"]);
            assert_eq!(x.shape(), &[2, 12, 3]);
            assert_eq!(x.unit().to_string(), "uM");
            assert!(x.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn square_system_solves() {
        let a = random_sens(2, 4, 4, false);
        let op = assemble_inverse_operator(&a, &cfg(ReconMode::Direct, 1e-12), &ExtinctionTable::prahl()).unwrap();
        let mut r = Rng::new(9);
        let y = od(4, 1, (0..8).map(|_| r.normal() * 0.01).collect());
        let x = reconstruct(&op, &y).unwrap();
        let back = forward_project(&a, &x, &ExtinctionTable::prahl()).unwrap();
        let num: f64 = back.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        let den: f64 = y.data().iter().map(|b| b * b).sum();
        assert!(libm::sqrt(num / den) <= 1e-3);
    }

    #[test]
    fn mua2conc_matches_direct_for_identity_spectra() {
        let a = random_sens(4, 5, 9, true);
        let mut r = Rng::new(1);
        let y = od(5, 2, (0..20).map(|_| r.normal()).collect());
        for alpha_s in [None, Some(0.1)] {
            let mut c = cfg(ReconMode::Direct, 0.01);
            c.alpha_spatial = alpha_s;
            let d = reconstruct(&assemble_inverse_operator(&a, &c, &identity_ext()).unwrap(), &y).unwrap();
            c.recon_mode = ReconMode::Mua2Conc;
            let m = reconstruct(&assemble_inverse_operator(&a, &c, &identity_ext()).unwrap(), &y).unwrap();
            for (p, q) in d.data().iter().zip(m.data()) {
                assert!((p - q).abs() <= 1e-9 * p.abs().max(1.0), "{p} {q}");
            }
        }
    }

    #[test]
    fn brain_only_and_channel_checks() {
        let mut r = Rng::new(6);
        let a = sens(4, 6, (0..48).map(|_| r.uniform()).collect(), Some(vec![true, true, false, true, false, false]));
        let mut c = cfg(ReconMode::Mua2Conc, 0.01);
        c.brain_only = true;
        let op = assemble_inverse_operator(&a, &c, &ExtinctionTable::prahl()).unwrap();
        let x = reconstruct(&op, &od(4, 1, vec![0.1; 8])).unwrap();
        assert_eq!(x.size("vertex").unwrap(), 3);
        assert_eq!(x.coord_bool("is_brain").unwrap(), &[true, true, true]);
        assert!(forward_project(&a, &x, &ExtinctionTable::prahl()).is_ok());
        assert!(matches!(reconstruct(&op, &od(3, 1, vec![0.0; 6])), Err(Error::ChannelMismatch(_))));
    }

    #[test]
    fn shape_law_with_extra_dims() {
        let a = random_sens(8, 3, 10, false);
        let op = assemble_inverse_operator(&a, &ImageReconConfig::default(), &ExtinctionTable::prahl()).unwrap();
        let y = LabeledTensor::zeros(&["trial_type", "channel", "wavelength", "reltime"], &[2, 3, 2, 7], Unit::unitless())
            .unwrap()
            .with_coords([
                Coord::str("trial_type", "trial_type", &["A", "B"]),
                Coord::str("channel", "channel", &["S3D1", "S1D1", "S2D1"]),
                Coord::f64("wavelength", "wavelength", vec![850.0, 760.0]),
            ])
            .unwrap();
        let x = reconstruct(&op, &y).unwrap();
        assert_eq!(x.dims(), &["chromo", "vertex", "trial_type", "reltime"]);
        assert_eq!(x.shape(), &[2, 10, 2, 7]);
        assert_eq!(x.coord_str("trial_type").unwrap(), &["A", "B"]);
    }

    #[test]
    fn single_vertex_forward() {
        let a = random_sens(7, 4, 5, false);
        let mut img = vec![0.0; 10];
        img[2] = 1.0;
        let x = LabeledTensor::build(&["chromo", "vertex"], &[2, 5], img, "M")
            .unwrap()
            .with_coord(Coord::str("chromo", "chromo", &CHROMOPHORES))
            .unwrap();
        let ext = ExtinctionTable::prahl();
        let y = forward_project(&a, &x, &ext).unwrap();
        let e = ext.matrix(&[760.0, 850.0]).unwrap();
        for l in 0..2 {
            let b = a.block(l);
            for c in 0..4 {
                assert!((y.get(&[c, l]) - e[(l, 0)] * b[(c, 2)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaling_a_keeps_round_trip() {
        let a = random_sens(8, 6, 15, false);
        let data2: Vec<f64> = a.tensor().data().iter().map(|x| 2.0 * x).collect();
        let a2 = SensitivityMatrix::new(&a.tensor().with_data(data2).unwrap()).unwrap();
        let mut r = Rng::new(2);
        let img = LabeledTensor::build(&["chromo", "vertex"], &[2, 15], (0..30).map(|_| r.normal()).collect(), "uM")
            .unwrap()
            .with_coord(Coord::str("chromo", "chromo", &CHROMOPHORES))
            .unwrap();
        let ext = ExtinctionTable::prahl();
        let c = ImageReconConfig { alpha_spatial: Some(0.01), ..cfg(ReconMode::Direct, 0.01) };
        let r1 = reconstruct(&assemble_inverse_operator(&a, &c, &ext).unwrap(), &forward_project(&a, &img, &ext).unwrap()).unwrap();
        let r2 = reconstruct(&assemble_inverse_operator(&a2, &c, &ext).unwrap(), &forward_project(&a2, &img, &ext).unwrap()).unwrap();
        for (p, q) in r1.data().iter().zip(r2.data()) {
            assert!((p - q).abs() < 1e-8 * p.abs().max(1.0));
        }
    }

    #[test]
    fn basis_round_trip_on_grid() {
        let s = TriSurface::grid(8, 8, 2.0);
        let b = crate::imgrecon::build_spatial_basis(
            &s,
            None,
            &crate::imgrecon::BasisPreset { brain_spacing: 4.0, brain_sigma: 3.0, scalp_spacing: 4.0, scalp_sigma: 3.0 },
        )
        .unwrap();
        let a = random_sens(10, 20, 64, false);
        let c = ImageReconConfig { spatial_basis: Some(b), ..cfg(ReconMode::Mua2Conc, 0.01) };
        let op = assemble_inverse_operator(&a, &c, &ExtinctionTable::prahl()).unwrap();
        assert_eq!(op.w[0].shape(), (64, 20));
        let x = reconstruct(&op, &od(20, 1, vec![0.01; 40])).unwrap();
        assert_eq!(x.shape(), &[2, 64, 1]);
    }

    #[test]
    fn parcels() {
        let img = LabeledTensor::build(&["chromo", "vertex"], &[2, 4], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], "uM")
            .unwrap()
            .with_coords([
                Coord::str("chromo", "chromo", &CHROMOPHORES),
                Coord::str("parcel", "vertex", &["b", "a", "b", "c"]),
                Coord::i64("vertex", "vertex", vec![0, 1, 2, 3]),
            ])
            .unwrap();
        let p = parcel_average(&img).unwrap();
        assert_eq!(p.dims(), &["chromo", "parcel"]);
        assert_eq!(p.coord_str("parcel").unwrap(), &["a", "b", "c"]);
        assert_eq!(p.data(), &[2.0, 2.0, 4.0, 6.0, 6.0, 8.0]);
        let same = img.clone().with_coord(Coord::str("parcel", "vertex", &["x"; 4])).unwrap();
        assert_eq!(parcel_average(&same).unwrap().data(), &[2.5, 6.5]);
        let one = img.clone().with_coord(Coord::str("parcel", "vertex", &["p0", "p1", "p2", "p3"])).unwrap();
        assert_eq!(parcel_average(&one).unwrap().data(), img.data());
        assert!(matches!(parcel_average(&img.without_coord("parcel")), Err(Error::NoParcelCoord)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn reconstruction_is_linear(seed in 0u64..1000, s in -3.0f64..3.0) {
            let a = random_sens(seed, 5, 11, false);
            let op = assemble_inverse_operator(&a, &cfg(ReconMode::Direct, 0.05), &ExtinctionTable::prahl()).unwrap();
            let mut r = Rng::new(seed + 1);
            let y1: Vec<f64> = (0..20).map(|_| r.normal()).collect();
            let y2: Vec<f64> = (0..20).map(|_| r.normal()).collect();
            let ys: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + s * b).collect();
            let x1 = reconstruct(&op, &od(5, 2, y1)).unwrap();
            let x2 = reconstruct(&op, &od(5, 2, y2)).unwrap();
            let xs = reconstruct(&op, &od(5, 2, ys)).unwrap();
            let scale = xs.data().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..xs.len() {
                prop_assert!((xs.data()[i] - x1.data()[i] - s * x2.data()[i]).abs() <= 1e-8 * scale);
            }
        }
    }
}
