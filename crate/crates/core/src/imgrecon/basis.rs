//! Gaussian spatial basis functions placed by farthest-point sampling.

use alloc::vec;
use alloc::vec::Vec;

use super::mesh::{geodesic_on, TriSurface};
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Sparse vertex × basis weights. Brain vertices come first, then scalp.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialBasis {
    n_vertices: usize,
    /// Nonzero `(vertex, weight)` pairs per basis function.
    pub columns: Vec<Vec<(usize, f64)>>,
    pub centers: Vec<usize>,
    pub sigma: Vec<f64>,
    pub on_brain: Vec<bool>,
}

/// Spacing and width in mm for brain and scalp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisPreset {
    pub brain_spacing: f64,
    pub brain_sigma: f64,
    pub scalp_spacing: f64,
    pub scalp_sigma: f64,
}

impl BasisPreset {
    pub const DENSE: BasisPreset =
        BasisPreset { brain_spacing: 10.0, brain_sigma: 10.0, scalp_spacing: 20.0, scalp_sigma: 20.0 };
}

impl SpatialBasis {
    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_basis(&self) -> usize {
        self.columns.len()
    }

    pub fn to_dense(&self) -> Mat {
        let mut b = Mat::zeros(self.n_vertices, self.columns.len());
        for (k, col) in self.columns.iter().enumerate() {
            for &(v, w) in col {
                b[(v, k)] = w;
            }
        }
        b
    }

    /// Nonzero `(basis, weight)` pairs per vertex.
    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.n_vertices];
        for (k, col) in self.columns.iter().enumerate() {
            for &(v, w) in col {
                rows[v].push((k, w));
            }
        }
        rows
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n_vertices];
        for col in &self.columns {
            for &(v, w) in col {
                s[v] += w;
            }
        }
        s
    }

    /// Rescales each covered vertex so its weights sum to one.
    pub fn normalized(&self) -> SpatialBasis {
        let s = self.row_sums();
        let mut out = self.clone();
        for col in &mut out.columns {
            for (v, w) in col.iter_mut() {
                *w /= s[*v];
            }
        }
        out
    }
}

/// Builds kernels on the brain surface and, optionally, the scalp.
pub fn build_spatial_basis(
    brain: &TriSurface,
    scalp: Option<&TriSurface>,
    preset: &BasisPreset,
) -> Result<SpatialBasis> {
    if brain.n_vertices() == 0 || scalp.is_some_and(|s| s.n_vertices() == 0) {
        return Err(Error::EmptySurface);
    }
    for x in [preset.brain_spacing, preset.scalp_spacing] {
        if !(x > 0.0) {
            return Err(Error::BadParam(alloc::format!("spacing must be positive, got {x}")));
        }
    }
    for x in [preset.brain_sigma, preset.scalp_sigma] {
        if !(x >= 0.0) {
            return Err(Error::BadParam(alloc::format!("sigma must be non-negative, got {x}")));
        }
    }
    let n_brain = brain.n_vertices();
    let n_total = n_brain + scalp.map_or(0, |s| s.n_vertices());
    let mut out = SpatialBasis { n_vertices: n_total, columns: Vec::new(), centers: Vec::new(), sigma: Vec::new(), on_brain: Vec::new() };
    place(&mut out, brain, 0, preset.brain_spacing, preset.brain_sigma, true)?;
    if let Some(s) = scalp {
        place(&mut out, s, n_brain, preset.scalp_spacing, preset.scalp_sigma, false)?;
    }
    Ok(out)
}

fn place(out: &mut SpatialBasis, surface: &TriSurface, offset: usize, spacing: f64, sigma: f64, on_brain: bool) -> Result<()> {
    let adj = surface.adjacency();
    let mut nearest = vec![f64::INFINITY; surface.n_vertices()];
    let mut seed = 0;
    loop {
        let d = geodesic_on(&adj, seed, f64::INFINITY)?;
        let cut = 3.0 * sigma;
        let col: Vec<(usize, f64)> = d
            .iter()
            .enumerate()
            .filter(|&(_, &x)| x <= cut)
            .map(|(v, &x)| (v + offset, if sigma > 0.0 { libm::exp(-x * x / (2.0 * sigma * sigma)) } else { 1.0 }))
            .collect();
        out.columns.push(col);
        out.centers.push(seed + offset);
        out.sigma.push(sigma);
        out.on_brain.push(on_brain);
        for (n, x) in nearest.iter_mut().zip(&d) {
            *n = n.min(*x);
        }
        let (far, &fd) = nearest
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| b.0.cmp(&a.0)))
            .expect("non-empty surface");
        if fd <= spacing {
            return Ok(());
        }
        seed = far;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgrecon::mesh::geodesic_distance;

    fn preset(spacing: f64, sigma: f64) -> BasisPreset {
        BasisPreset { brain_spacing: spacing, brain_sigma: sigma, scalp_spacing: spacing, scalp_sigma: sigma }
    }

    #[test]
    fn one_center_for_wide_spacing() {
        let s = TriSurface::grid(11, 11, 1.0);
        let b = build_spatial_basis(&s, None, &preset(100.0, 3.0)).unwrap();
        assert_eq!(b.n_basis(), 1);
    }

    #[test]
    fn centers_respect_spacing() {
        let s = TriSurface::grid(31, 31, 1.0);
        let b = build_spatial_basis(&s, None, &preset(6.0, 3.0)).unwrap();
        assert!(b.n_basis() > 4);
        for (i, &c) in b.centers.iter().enumerate() {
            let d = geodesic_distance(&s, c).unwrap();
            for &o in &b.centers[i + 1..] {
                assert!(d[o] >= 6.0);
            }
        }
        assert!(b.columns.iter().all(|c| c.iter().map(|x| x.1).sum::<f64>() > 0.0));
    }

    #[test]
    fn zero_sigma_is_indicator() {
        let s = TriSurface::grid(9, 9, 1.0);
        let b = build_spatial_basis(&s, None, &preset(3.0, 0.0)).unwrap();
        for (k, col) in b.columns.iter().enumerate() {
            assert_eq!(col, &vec![(b.centers[k], 1.0)]);
        }
    }

    #[test]
    fn partition_of_unity() {
        let s = TriSurface::grid(21, 21, 1.0);
        let b = build_spatial_basis(&s, None, &preset(5.0, 3.0)).unwrap().normalized();
        for x in b.row_sums() {
            assert!(x == 0.0 || (x - 1.0).abs() < 1e-6);
        }
        assert!(b.row_sums().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn scalp_offsets_and_membership() {
        let brain = TriSurface::grid(5, 5, 1.0);
        let scalp = TriSurface::grid(4, 4, 1.0);
        let b = build_spatial_basis(&brain, Some(&scalp), &preset(100.0, 1.0)).unwrap();
        assert_eq!(b.n_vertices(), 41);
        assert_eq!(b.on_brain, vec![true, false]);
        assert_eq!(b.centers, vec![0, 25]);
        assert!(b.columns[1].iter().all(|&(v, _)| v >= 25));
        let empty = TriSurface::new(vec![], vec![], "x").unwrap();
        assert!(matches!(build_spatial_basis(&empty, None, &BasisPreset::DENSE), Err(Error::EmptySurface)));
    }
}
