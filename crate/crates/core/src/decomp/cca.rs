//! Regularized canonical correlation by alternating power iteration.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, Mat, Vect};
use crate::tensor::{Coord, LabeledTensor};
use crate::units::Unit;

#[derive(Debug, Clone, PartialEq)]
pub struct CcaParams {
    /// Model name; latent dims are `<name>_X` and `<name>_Y`.
    pub name: String,
    pub n_components: usize,
    pub l1_reg: (f64, f64),
    pub l2_reg: (f64, f64),
    /// Identity auto-covariances (covariance instead of correlation).
    pub pls: bool,
    /// Structure matrices replacing the identity in the L2 penalty.
    pub lx: Option<Mat>,
    pub ly: Option<Mat>,
    pub max_iter: usize,
    pub tol: f64,
    /// Unit-variance scaling of every feature.
    pub scale: bool,
}

impl CcaParams {
    fn base(name: &str, n: usize) -> Self {
        CcaParams {
            name: name.into(),
            n_components: n,
            l1_reg: (0.0, 0.0),
            l2_reg: (0.0, 0.0),
            pls: false,
            lx: None,
            ly: None,
            max_iter: 1000,
            tol: 1e-6,
            scale: true,
        }
    }

    pub fn cca(n: usize) -> Self {
        Self::base("CCA", n)
    }

    pub fn elastic_net(n: usize, l1: (f64, f64), l2: (f64, f64)) -> Self {
        CcaParams { l1_reg: l1, l2_reg: l2, ..Self::base("ElasticNetCCA", n) }
    }

    pub fn sparse(n: usize, l1: (f64, f64)) -> Self {
        CcaParams { l1_reg: l1, ..Self::base("SparseCCA", n) }
    }

    pub fn ridge(n: usize, l2: (f64, f64)) -> Self {
        CcaParams { l2_reg: l2, ..Self::base("RidgeCCA", n) }
    }

    pub fn structured_sparse(n: usize, l1: (f64, f64), l2: (f64, f64), lx: Mat, ly: Mat) -> Self {
        CcaParams { l1_reg: l1, l2_reg: l2, lx: Some(lx), ly: Some(ly), ..Self::base("StructuredSparseCCA", n) }
    }

    pub fn pls(n: usize) -> Self {
        CcaParams { pls: true, ..Self::base("PLS", n) }
    }

    pub fn sparse_pls(n: usize, l1: (f64, f64)) -> Self {
        CcaParams { pls: true, l1_reg: l1, ..Self::base("SparsePLS", n) }
    }

    pub fn validate(&self) -> Result<()> {
        for l in [self.l1_reg.0, self.l1_reg.1] {
            if !(0.0..0.5).contains(&l) {
                return Err(Error::BadReg);
            }
        }
        for l in [self.l2_reg.0, self.l2_reg.1] {
            if !(l >= 0.0) {
                return Err(Error::BadParam(alloc::format!("l2 regularization must be non-negative, got {l}")));
            }
        }
        if self.n_components == 0 || self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::BadParam("n_components, max_iter and tol must be positive".into()));
        }
        Ok(())
    }

    pub fn latent_x(&self) -> String {
        alloc::format!("{}_X", self.name)
    }

    pub fn latent_y(&self) -> String {
        alloc::format!("{}_Y", self.name)
    }
}

/// Dimension names of the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FitDims {
    pub sample: String,
    pub feature_x: String,
    pub feature_y: String,
}

impl Default for FitDims {
    fn default() -> Self {
        FitDims { sample: "time".into(), feature_x: "channel".into(), feature_y: "channel".into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Mat, scale: bool) -> Self {
        let n = x.nrows() as f64;
        let mean: Vec<f64> = x.column_iter().map(|c| c.sum() / n).collect();
        let scale = x
            .column_iter()
            .zip(&mean)
            .map(|(c, &m)| {
                if !scale {
                    return 1.0;
                }
                let s = libm::sqrt(c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n);
                if s > 0.0 { s } else { 1.0 }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &Mat) -> Mat {
        Mat::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mean[j]) / self.scale[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcaModel {
    pub params: CcaParams,
    pub dims: FitDims,
    pub features_x: Vec<String>,
    pub features_y: Vec<String>,
    /// `featureX × component` on standardized data.
    pub wx: Mat,
    pub wy: Mat,
    pub std_x: Standardizer,
    pub std_y: Standardizer,
    /// Training correlation of each component pair.
    pub correlations: Vec<f64>,
    /// Notes about early stops.
    pub warnings: Vec<String>,
}

/// Two-dimensional `(sample, feature)` view as a matrix plus feature labels.
pub(crate) fn as_matrix(t: &LabeledTensor, sample: &str, feature: &str) -> Result<(Mat, Vec<String>)> {
    if t.dims().len() != 2 {
        return Err(Error::ShapeMismatch(alloc::format!("expected 2 dims, got {:?}", t.dims())));
    }
    let t = t.transpose(&[sample, feature])?;
    let (n, f) = (t.shape()[0], t.shape()[1]);
    let labels = match t.coord(feature) {
        Some(c) if c.dim == feature => t.coord_str(feature)?.to_vec(),
        _ => (0..f).map(|i| i.to_string()).collect(),
    };
    Ok((Mat::from_row_slice(n, f, t.data()), labels))
}

fn soft_threshold(u: &mut Vect, l1: f64) {
    if l1 == 0.0 {
        return;
    }
    let t = l1 * u.amax();
    u.apply(|x| *x = x.signum() * (x.abs() - t).max(0.0));
}

fn metric(c: &Mat, l2: f64, l: Option<&Mat>, pls: bool) -> Mat {
    let n = c.nrows();
    let base = if pls { Mat::identity(n, n) } else { c.clone() };
    match l {
        Some(l) => base + l * l2,
        None => base + Mat::identity(n, n) * l2,
    }
}

fn normalize(u: &mut Vect, m: &Mat) -> bool {
    let q = u.dot(&(m * &*u));
    if !(q > 0.0) {
        return false;
    }
    *u /= libm::sqrt(q);
    true
}

/// Flips a pair so the largest-magnitude entry of `u` is positive.
fn canonical_sign(u: &mut Vect, v: &mut Vect) {
    let i = u.iamax();
    if u[i] < 0.0 {
        *u = -&*u;
        *v = -&*v;
    }
}

/// Fits on centred/scaled matrices. Returns weights and correlations.
pub(crate) fn fit_matrices(x: &Mat, y: &Mat, p: &CcaParams) -> Result<(Mat, Mat, Vec<f64>, Vec<String>)> {
    p.validate()?;
    let (n, fx, fy) = (x.nrows(), x.ncols(), y.ncols());
    if y.nrows() != n {
        return Err(Error::ShapeMismatch(alloc::format!("{n} vs {} samples", y.nrows())));
    }
    if p.n_components > fx.min(fy) {
        return Err(Error::BadParam(alloc::format!("{} components for {fx} and {fy} features", p.n_components)));
    }
    for (l, f) in [(&p.lx, fx), (&p.ly, fy)] {
        if let Some(l) = l {
            if l.shape() != (f, f) {
                return Err(Error::ShapeMismatch(alloc::format!("structure matrix {:?} for {f} features", l.shape())));
            }
        }
    }
    let d = (n as f64 - 1.0).max(1.0);
    let cx = x.transpose() * x / d;
    let cy = y.transpose() * y / d;
    let mut k = x.transpose() * y / d;
    let mx = metric(&cx, p.l2_reg.0, p.lx.as_ref(), p.pls);
    let my = metric(&cy, p.l2_reg.1, p.ly.as_ref(), p.pls);
    let ix = spd_inverse(&mx)?;
    let iy = spd_inverse(&my)?;
    let mut wx = Mat::zeros(fx, 0);
    let mut wy = Mat::zeros(fy, 0);
    let mut corr = Vec::new();
    let mut warnings = Vec::new();
    for comp in 0..p.n_components {
        let svd = k.clone().svd(false, true);
        let j = svd.singular_values.imax();
        let mut v: Vect = svd.v_t.expect("computed").row(j).transpose();
        let mut u = Vect::zeros(fx);
        if !normalize(&mut v, &my) {
            warnings.push(alloc::format!("component {comp}: no cross-covariance left"));
            break;
        }
        let mut converged = false;
        let mut collapsed = false;
        for _ in 0..p.max_iter {
            let mut nu: Vect = &ix * (&k * &v);
            soft_threshold(&mut nu, p.l1_reg.0);
            let mut nv: Vect = &iy * (k.transpose() * &nu);
            soft_threshold(&mut nv, p.l1_reg.1);
            if !normalize(&mut nu, &mx) || !normalize(&mut nv, &my) {
                collapsed = true;
                break;
            }
            let delta = (&nu - &u).norm() + (&nv - &v).norm();
            u = nu;
            v = nv;
            if delta < p.tol {
                converged = true;
                break;
            }
        }
        if collapsed {
            warnings.push(alloc::format!("component {comp} collapsed to zero"));
            break;
        }
        if !converged {
            return Err(Error::NonConvergence(comp));
        }
        canonical_sign(&mut u, &mut v);
        let (su, sv) = (x * &u, y * &v);
        corr.push(crate::stats::pearson(su.as_slice(), sv.as_slice()));
        // Rank-one deflation of the cross-covariance in the metric.
        let rho = u.dot(&(&k * &v));
        k -= (&mx * &u) * (&my * &v).transpose() * rho;
        wx = wx.insert_column(comp, 0.0);
        wx.set_column(comp, &u);
        wy = wy.insert_column(comp, 0.0);
        wy.set_column(comp, &v);
    }
    Ok((wx, wy, corr, warnings))
}

pub fn fit_cca(x: &LabeledTensor, y: &LabeledTensor, params: &CcaParams, dims: &FitDims) -> Result<CcaModel> {
    let (xm, features_x) = as_matrix(x, &dims.sample, &dims.feature_x)?;
    let (ym, features_y) = as_matrix(y, &dims.sample, &dims.feature_y)?;
    let std_x = Standardizer::fit(&xm, params.scale);
    let std_y = Standardizer::fit(&ym, params.scale);
    let (wx, wy, correlations, warnings) = fit_matrices(&std_x.apply(&xm), &std_y.apply(&ym), params)?;
    Ok(CcaModel { params: params.clone(), dims: dims.clone(), features_x, features_y, wx, wy, std_x, std_y, correlations, warnings })
}

pub(crate) fn latent_tensor(
    s: &Mat,
    like: &LabeledTensor,
    sample: &str,
    latent: &str,
    prefix: &str,
) -> Result<LabeledTensor> {
    let (n, k) = s.shape();
    let data: Vec<f64> = (0..n).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| s[(i, j)]).collect();
    let mut coords: Vec<Coord> = like.coords_on(sample).map(|c| {
        let mut c = c.clone();
        c.values = c.values.take(&(0..n).collect::<Vec<_>>());
        c
    }).collect();
    coords.push(Coord::strings(latent, latent, (1..=k).map(|i| alloc::format!("{prefix}{i}")).collect()));
    LabeledTensor::new(vec![sample.into(), latent.into()], vec![n, k], data, coords, Unit::unitless())
}

impl CcaModel {
    pub fn n_components(&self) -> usize {
        self.wx.ncols()
    }

    /// Weights as a `(feature, latent)` tensor.
    pub fn wx_tensor(&self) -> Result<LabeledTensor> {
        weights(&self.wx, &self.dims.feature_x, &self.features_x, &self.params.latent_x(), "Sx")
    }

    pub fn wy_tensor(&self) -> Result<LabeledTensor> {
        weights(&self.wy, &self.dims.feature_y, &self.features_y, &self.params.latent_y(), "Sy")
    }
}

fn weights(w: &Mat, feature: &str, labels: &[String], latent: &str, prefix: &str) -> Result<LabeledTensor> {
    let (f, k) = w.shape();
    let data: Vec<f64> = (0..f).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| w[(i, j)]).collect();
    LabeledTensor::new(
        vec![feature.into(), latent.into()],
        vec![f, k],
        data,
        vec![
            Coord::strings(feature, feature, labels.to_vec()),
            Coord::strings(latent, latent, (1..=k).map(|i| alloc::format!("{prefix}{i}")).collect()),
        ],
        Unit::unitless(),
    )
}

pub(crate) fn check_features(want: &[String], got: &[String], what: &str) -> Result<()> {
    if want != got {
        return Err(Error::FeatureMismatch(alloc::format!("{what}: expected {} features {:?}…", want.len(), want.first())));
    }
    Ok(())
}

/// Projects new data with the training standardization.
pub fn transform_cca(model: &CcaModel, x: &LabeledTensor, y: &LabeledTensor) -> Result<(LabeledTensor, LabeledTensor)> {
    let d = &model.dims;
    let (xm, fx) = as_matrix(x, &d.sample, &d.feature_x).map_err(|e| match e {
        Error::UnknownDim(m) => Error::FeatureMismatch(m),
        e => e,
    })?;
    let (ym, fy) = as_matrix(y, &d.sample, &d.feature_y).map_err(|e| match e {
        Error::UnknownDim(m) => Error::FeatureMismatch(m),
        e => e,
    })?;
    check_features(&model.features_x, &fx, "x")?;
    check_features(&model.features_y, &fy, "y")?;
    if xm.nrows() != ym.nrows() {
        return Err(Error::ShapeMismatch(alloc::format!("{} vs {} samples", xm.nrows(), ym.nrows())));
    }
    let sx = model.std_x.apply(&xm) * &model.wx;
    let sy = model.std_y.apply(&ym) * &model.wy;
    Ok((
        latent_tensor(&sx, x, &d.sample, &model.params.latent_x(), "Sx")?,
        latent_tensor(&sy, y, &d.sample, &model.params.latent_y(), "Sy")?,
    ))
}

/// Canonical correlations from the generalized eigenproblem, largest first.
pub fn closed_form_correlations(x: &Mat, y: &Mat) -> Vec<f64> {
    let n = x.nrows() as f64;
    let center = |m: &Mat| {
        let mu: Vec<f64> = m.column_iter().map(|c| c.sum() / n).collect();
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - mu[j])
    };
    let (x, y) = (center(x), center(y));
    let cx = x.transpose() * &x;
    let cy = y.transpose() * &y;
    let cxy = x.transpose() * &y;
    let ix = spd_inverse(&cx).unwrap_or_else(|_| Mat::zeros(cx.nrows(), cx.ncols()));
    let iy = spd_inverse(&cy).unwrap_or_else(|_| Mat::zeros(cy.nrows(), cy.ncols()));
    let m = &ix * &cxy * &iy * cxy.transpose();
    let mut ev: Vec<f64> = m.complex_eigenvalues().iter().map(|c| libm::sqrt(c.re.max(0.0))).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}
