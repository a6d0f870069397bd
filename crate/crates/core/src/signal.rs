//! Butterworth filter design, zero-phase filtering and sampling helpers.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct C {
    pub re: f64,
    pub im: f64,
}

impl C {
    pub fn new(re: f64, im: f64) -> Self {
        C { re, im }
    }
    pub fn real(re: f64) -> Self {
        C { re, im: 0.0 }
    }
    fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
    fn sqrt(self) -> C {
        let r = libm::sqrt(libm::sqrt(self.norm_sqr()));
        let th = 0.5 * libm::atan2(self.im, self.re);
        C::new(r * libm::cos(th), r * libm::sin(th))
    }
    fn expi(th: f64) -> C {
        C::new(libm::cos(th), libm::sin(th))
    }
}

impl Add for C {
    type Output = C;
    fn add(self, o: C) -> C {
        C::new(self.re + o.re, self.im + o.im)
    }
}
impl Sub for C {
    type Output = C;
    fn sub(self, o: C) -> C {
        C::new(self.re - o.re, self.im - o.im)
    }
}
impl Mul for C {
    type Output = C;
    fn mul(self, o: C) -> C {
        C::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}
impl Div for C {
    type Output = C;
    fn div(self, o: C) -> C {
        let d = o.norm_sqr();
        C::new((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)
    }
}
impl Neg for C {
    type Output = C;
    fn neg(self) -> C {
        C::new(-self.re, -self.im)
    }
}
impl Mul<f64> for C {
    type Output = C;
    fn mul(self, o: f64) -> C {
        C::new(self.re * o, self.im * o)
    }
}

/// Filter response type with cutoffs in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    Lowpass(f64),
    Highpass(f64),
    Bandpass(f64, f64),
}

/// Cascade of second-order sections `[b0, b1, b2, a1, a2]` (`a0 = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<[f64; 5]>,
}

/// Digital Butterworth design by bilinear transform of the analog prototype.
pub fn butter(order: usize, band: Band, fs: f64) -> Result<Sos> {
    if order == 0 {
        return Err(Error::BadBand("filter order must be positive".into()));
    }
    let nyq = fs / 2.0;
    let check = |f: f64| {
        if !(f > 0.0 && f < nyq) {
            Err(Error::BadBand(alloc::format!("cutoff {f} Hz outside (0, {nyq}) Hz")))
        } else {
            Ok(())
        }
    };
    let warp = |f: f64| 2.0 * fs * libm::tan(PI * f / fs);
    let n = order as i64;
    let proto: Vec<C> = (0..order as i64).map(|k| -C::expi(PI * (2 * k - n + 1) as f64 / (2 * n) as f64)).collect();

    let (zeros, poles, gain): (Vec<C>, Vec<C>, f64) = match band {
        Band::Lowpass(fc) => {
            check(fc)?;
            let w = warp(fc);
            (Vec::new(), proto.iter().map(|&p| p * w).collect(), libm::pow(w, order as f64))
        }
        Band::Highpass(fc) => {
            check(fc)?;
            let w = warp(fc);
            let poles = proto.iter().map(|&p| C::real(w) / p).collect();
            let mut prod = C::real(1.0);
            for &p in &proto {
                prod = prod * (-p);
            }
            (vec![C::real(0.0); order], poles, (C::real(1.0) / prod).re)
        }
        Band::Bandpass(lo, hi) => {
            check(lo)?;
            check(hi)?;
            if lo >= hi {
                return Err(Error::BadBand(alloc::format!("lower cutoff {lo} ≥ upper cutoff {hi}")));
            }
            let (w1, w2) = (warp(lo), warp(hi));
            let bw = w2 - w1;
            let wo2 = C::real(w1 * w2);
            let mut poles = Vec::with_capacity(2 * order);
            for &p in &proto {
                let pl = p * (bw / 2.0);
                let s = (pl * pl - wo2).sqrt();
                poles.push(pl + s);
                poles.push(pl - s);
            }
            (vec![C::real(0.0); order], poles, libm::pow(bw, order as f64))
        }
    };

    // Bilinear transform.
    let fs2 = C::real(2.0 * fs);
    let mut num = C::real(1.0);
    let mut den = C::real(1.0);
    let zd: Vec<C> = zeros.iter().map(|&z| {
        num = num * (fs2 - z);
        (fs2 + z) / (fs2 - z)
    }).collect();
    let pd: Vec<C> = poles.iter().map(|&p| {
        den = den * (fs2 - p);
        (fs2 + p) / (fs2 - p)
    }).collect();
    let k = gain * (num / den).re;
    let mut zd = zd;
    zd.extend(core::iter::repeat(C::real(-1.0)).take(pd.len() - zeros.len()));

    Ok(zpk_to_sos(&zd, &pd, k))
}

fn zpk_to_sos(zeros: &[C], poles: &[C], k: f64) -> Sos {
    // Group poles: conjugate pairs, then real poles two at a time.
    let mut cplx: Vec<C> = poles.iter().copied().filter(|p| p.im > 1e-12 * (1.0 + p.re.abs())).collect();
    cplx.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= 1e-12 * (1.0 + p.re.abs())).map(|p| p.re).collect();
    real.sort_by(f64::total_cmp);
    let mut den: Vec<(usize, [f64; 2])> = Vec::new();
    for p in &cplx {
        den.push((2, [-2.0 * p.re, p.norm_sqr()]));
    }
    let mut it = real.chunks(2);
    for pair in &mut it {
        if pair.len() == 2 {
            den.push((2, [-(pair[0] + pair[1]), pair[0] * pair[1]]));
        } else {
            den.push((1, [-pair[0], 0.0]));
        }
    }

    // Zeros are real (±1 or 0 mapped to 1); alternate the two kinds so each
    // band-pass section receives one of each.
    let mut pos: Vec<f64> = zeros.iter().filter(|z| z.re > 0.0).map(|z| z.re).collect();
    let mut neg: Vec<f64> = zeros.iter().filter(|z| z.re <= 0.0).map(|z| z.re).collect();
    let mut zs = Vec::with_capacity(zeros.len());
    while !pos.is_empty() || !neg.is_empty() {
        if let Some(z) = pos.pop() {
            zs.push(z);
        }
        if let Some(z) = neg.pop() {
            zs.push(z);
        }
    }

    let mut zi = zs.into_iter();
    let mut sections = Vec::with_capacity(den.len());
    for (i, (np, a)) in den.into_iter().enumerate() {
        let b = if np == 2 {
            let (z1, z2) = (zi.next().unwrap_or(0.0), zi.next().unwrap_or(0.0));
            [1.0, -(z1 + z2), z1 * z2]
        } else {
            let z1 = zi.next().unwrap_or(0.0);
            [1.0, -z1, 0.0]
        };
        let g = if i == 0 { k } else { 1.0 };
        sections.push([b[0] * g, b[1] * g, b[2] * g, a[0], a[1]]);
    }
    Sos { sections }
}

impl Sos {
    /// Complex frequency response at `f` Hz.
    pub fn response(&self, f: f64, fs: f64) -> (f64, f64) {
        let w = 2.0 * PI * f / fs;
        let z1 = C::expi(-w);
        let z2 = z1 * z1;
        let mut h = C::real(1.0);
        for s in &self.sections {
            let num = C::real(s[0]) + z1 * s[1] + z2 * s[2];
            let den = C::real(1.0) + z1 * s[3] + z2 * s[4];
            h = h * (num / den);
        }
        (h.re, h.im)
    }

    /// Steady-state initial conditions for a unit step input.
    fn zi(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        let mut out = Vec::with_capacity(self.sections.len());
        for s in &self.sections {
            let [b0, b1, b2, a1, a2] = *s;
            // Solve [[1+a1, -1], [a2, 1]] z = [b1 - a1 b0, b2 - a2 b0].
            let r0 = b1 - a1 * b0;
            let r1 = b2 - a2 * b0;
            let det = (1.0 + a1) + a2;
            let z0 = (r0 + r1) / det;
            let z1 = r1 - a2 * z0;
            out.push([z0 * scale, z1 * scale]);
            scale *= (b0 + b1 + b2) / (1.0 + a1 + a2);
        }
        out
    }

    /// Causal filtering in transposed direct form II.
    pub fn filter(&self, x: &mut [f64], zi: Option<&[[f64; 2]]>) {
        for (i, s) in self.sections.iter().enumerate() {
            let [b0, b1, b2, a1, a2] = *s;
            let (mut z0, mut z1) = zi.map(|z| (z[i][0], z[i][1])).unwrap_or((0.0, 0.0));
            for v in x.iter_mut() {
                let xin = *v;
                let y = b0 * xin + z0;
                z0 = b1 * xin - a1 * y + z1;
                z1 = b2 * xin - a2 * y;
                *v = y;
            }
        }
    }

    /// Zero-phase forward-backward filtering with odd reflection padding.
    pub fn filtfilt(&self, x: &[f64], padlen: usize) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = padlen.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        let zi = self.zi();
        let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();
        let z = scaled(ext[0]);
        self.filter(&mut ext, Some(&z));
        ext.reverse();
        let z = scaled(ext[0]);
        self.filter(&mut ext, Some(&z));
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Padding length `3·order·fs/fmin` capped at `n − 1`; `n − 1` for low-pass.
pub fn default_padlen(order: usize, fmin: f64, fs: f64, n: usize) -> usize {
    let cap = n.saturating_sub(1);
    if fmin <= 0.0 {
        return cap;
    }
    let p = libm::ceil(3.0 * order as f64 * fs / fmin);
    if p >= cap as f64 {
        cap
    } else {
        p as usize
    }
}

/// Sampling rate `1 / median(diff(time))`.
pub fn sampling_rate(time: &[f64]) -> Result<f64> {
    if time.len() < 2 {
        return Err(Error::TooShort("need at least two time samples".into()));
    }
    let d: Vec<f64> = time.windows(2).map(|w| w[1] - w[0]).collect();
    let m = crate::stats::median(&d);
    if !(m > 0.0) {
        return Err(Error::IrregularSampling);
    }
    Ok(1.0 / m)
}

/// True when every step is within 1% of the median step.
pub fn is_regular(time: &[f64]) -> bool {
    if time.len() < 2 {
        return true;
    }
    let d: Vec<f64> = time.windows(2).map(|w| w[1] - w[0]).collect();
    let m = crate::stats::median(&d);
    m > 0.0 && d.iter().all(|x| (x - m).abs() <= 0.01 * m)
}

/// Squared magnitude of the DFT of `x` at bin `j` of an `len`-point grid.
pub fn dft_power_bin(x: &[f64], j: usize, len: usize) -> f64 {
    let w = -2.0 * PI * j as f64 / len as f64;
    let mut re = 0.0;
    let mut im = 0.0;
    for (k, &v) in x.iter().enumerate() {
        let th = w * k as f64;
        re += v * libm::cos(th);
        im += v * libm::sin(th);
    }
    re * re + im * im
}

pub fn freqs_for(len: usize, fs: f64) -> impl Iterator<Item = (usize, f64)> {
    (0..=len / 2).map(move |j| (j, j as f64 * fs / len as f64))
}
