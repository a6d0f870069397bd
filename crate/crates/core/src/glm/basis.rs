//! Temporal basis functions for hemodynamic responses.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Basis {
    /// `h(u) = (u/σ)²·exp(−u/σ)` for `u = t − τ ≥ 0`, box-convolved over
    /// width `T` (or the event duration when `T = 0`), peak-normalized.
    Gamma { tau: f64, sigma: f64, t: f64 },
    /// Peak-normalized Gaussians with centres `−t_pre + k·t_delta`,
    /// `k < floor((t_pre + t_post)/t_delta)`, supported on `[−t_pre, t_post]`.
    GaussianKernels { t_pre: f64, t_post: f64, t_delta: f64, t_std: f64 },
}

impl Basis {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Basis::Gamma { tau, sigma, t } => sigma > 0.0 && tau.is_finite() && t >= 0.0,
            Basis::GaussianKernels { t_pre, t_post, t_delta, t_std } => {
                t_pre >= 0.0 && t_post >= 0.0 && t_delta > 0.0 && t_std > 0.0 && t_pre + t_post >= t_delta
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BadParam(alloc::format!("invalid basis {self:?}")))
        }
    }

    pub fn n_components(&self) -> usize {
        match *self {
            Basis::Gamma { .. } => 1,
            Basis::GaussianKernels { t_pre, t_post, t_delta, .. } => {
                // Guard against (t_pre + t_post)/t_delta landing a hair below an integer.
                libm::floor((t_pre + t_post) / t_delta + 1e-9) as usize
            }
        }
    }

    /// Component labels for a trial type.
    pub fn labels(&self, trial_type: &str) -> Vec<alloc::string::String> {
        match self {
            Basis::Gamma { .. } => alloc::vec![alloc::format!("HRF {trial_type}")],
            Basis::GaussianKernels { .. } => {
                (0..self.n_components()).map(|j| alloc::format!("HRF {trial_type} {j:02}")).collect()
            }
        }
    }

    /// Value of component `j` at time `u` after onset for an event of `duration`.
    pub fn eval(&self, j: usize, u: f64, duration: f64) -> f64 {
        self.eval_scaled(j, u, duration, self.peak(duration))
    }

    /// Normalizer of the unscaled kernel for an event of `duration`.
    pub fn peak(&self, duration: f64) -> f64 {
        match *self {
            Basis::Gamma { sigma, t, .. } => gamma_peak(sigma, if t > 0.0 { t } else { duration.max(0.0) }),
            Basis::GaussianKernels { .. } => 1.0,
        }
    }

    /// [`Basis::eval`] with a precomputed [`Basis::peak`].
    pub fn eval_scaled(&self, j: usize, u: f64, duration: f64, peak: f64) -> f64 {
        match *self {
            Basis::Gamma { tau, sigma, t } => {
                let w = if t > 0.0 { t } else { duration.max(0.0) };
                gamma_box(u - tau, sigma, w) / peak
            }
            Basis::GaussianKernels { t_pre, t_post, t_delta, t_std } => {
                if u < -t_pre || u > t_post {
                    return 0.0;
                }
                let c = -t_pre + j as f64 * t_delta;
                let z = (u - c) / t_std;
                libm::exp(-0.5 * z * z)
            }
        }
    }

    /// Samples every component on `reltime`; rows are time, columns components.
    pub fn sample(&self, reltime: &[f64], duration: f64) -> Vec<Vec<f64>> {
        let peak = self.peak(duration);
        reltime
            .iter()
            .map(|&u| (0..self.n_components()).map(|j| self.eval_scaled(j, u, duration, peak)).collect())
            .collect()
    }
}

fn gamma_raw(u: f64, sigma: f64) -> f64 {
    if u < 0.0 {
        0.0
    } else {
        let z = u / sigma;
        z * z * libm::exp(-z)
    }
}

/// `∫₀^x (u/σ)²·exp(−u/σ) du / σ`.
fn gamma_cdf(x: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let z = x / sigma;
    2.0 - libm::exp(-z) * (z * z + 2.0 * z + 2.0)
}

/// Gamma kernel convolved with a unit box of width `w`, scaled so that
/// `w → 0` recovers the raw kernel.
fn gamma_box(u: f64, sigma: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return gamma_raw(u, sigma);
    }
    sigma * (gamma_cdf(u, sigma) - gamma_cdf(u - w, sigma)) / w
}

fn gamma_peak(sigma: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return gamma_raw(2.0 * sigma, sigma);
    }
    // Unimodal on [0, w + 2σ]; golden-section search for the maximum.
    let (mut a, mut b) = (0.0, w + 2.0 * sigma);
    let g = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if gamma_box(c, sigma, w) > gamma_box(d, sigma, w) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    gamma_box(0.5 * (a + b), sigma, w)
}
