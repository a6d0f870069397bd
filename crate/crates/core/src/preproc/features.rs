//! Scalar per-epoch features for classification.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::stats::trapezoid;
use crate::tensor::{Coord, CoordValues, LabeledTensor};
use crate::units::Unit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Slope,
    Mean,
    Max,
    Min,
    Auc,
}

impl Feature {
    pub const ALL: [Feature; 5] = [Feature::Slope, Feature::Mean, Feature::Max, Feature::Min, Feature::Auc];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::Slope => "slope",
            Feature::Mean => "mean",
            Feature::Max => "max",
            Feature::Min => "min",
            Feature::Auc => "auc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::BadParam(alloc::format!("unknown feature `{s}`")))
    }
}

/// A feature and an optional inclusive reltime slice it is computed over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSpec {
    pub kind: Feature,
    pub slice: Option<(f64, f64)>,
}

impl FeatureSpec {
    pub fn new(kind: Feature) -> Self {
        FeatureSpec { kind, slice: None }
    }
}

fn compute(kind: Feature, y: &[f64], t: &[f64]) -> f64 {
    let n = y.len() as f64;
    match kind {
        Feature::Mean => y.iter().sum::<f64>() / n,
        Feature::Max => y.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Feature::Min => y.iter().copied().fold(f64::INFINITY, f64::min),
        Feature::Auc => trapezoid(y, t),
        Feature::Slope => {
            let mt = t.iter().sum::<f64>() / n;
            let my = y.iter().sum::<f64>() / n;
            let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
            let sxx: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
            sxy / sxx
        }
    }
}

/// Computes each requested feature for every epoch and every combination of
/// the non-epoch, non-reltime dims, stacked into a `feature` dim ordered by
/// feature first, then the remaining dims in their tensor order. Coords of
/// the flattened dims are repeated onto `feature`.
pub fn epoch_features(ep: &LabeledTensor, specs: &[FeatureSpec]) -> Result<LabeledTensor> {
    let rest: Vec<String> = ep.dims().iter().filter(|d| *d != "epoch" && *d != "reltime").cloned().collect();
    let mut order = vec!["epoch"];
    order.extend(rest.iter().map(|s| s.as_str()));
    order.push("reltime");
    let t = ep.transpose(&order)?;
    let rt = t.coord_f64("reltime")?.to_vec();
    let ne = t.shape()[0];
    let nr = rt.len();
    let nflat: usize = t.shape()[1..t.shape().len() - 1].iter().product();
    let mut ranges = Vec::with_capacity(specs.len());
    for s in specs {
        let (lo, hi) = s.slice.unwrap_or((rt[0], rt[nr - 1]));
        if lo > hi || lo < rt[0] - 1e-9 || hi > rt[nr - 1] + 1e-9 {
            return Err(Error::BadSlice(alloc::format!("[{lo}, {hi}] outside reltime")));
        }
        let idx: Vec<usize> = (0..nr).filter(|&i| rt[i] >= lo && rt[i] <= hi).collect();
        let need = if matches!(s.kind, Feature::Slope | Feature::Auc) { 2 } else { 1 };
        if idx.len() < need {
            return Err(Error::BadSlice(alloc::format!("[{lo}, {hi}] holds {} samples", idx.len())));
        }
        ranges.push(idx[0]..idx[idx.len() - 1] + 1);
    }
    let nfeat = specs.len() * nflat;
    let mut data = vec![0.0; ne * nfeat];
    for e in 0..ne {
        for (si, s) in specs.iter().enumerate() {
            let r = ranges[si].clone();
            for f in 0..nflat {
                let lane = &t.data()[(e * nflat + f) * nr..(e * nflat + f + 1) * nr];
                data[e * nfeat + si * nflat + f] = compute(s.kind, &lane[r.clone()], &rt[r.clone()]);
            }
        }
    }
    let mut coords: Vec<Coord> = t.coords_on("epoch").cloned().collect();
    let kinds: Vec<String> = specs.iter().flat_map(|s| core::iter::repeat(s.kind.as_str().to_string()).take(nflat)).collect();
    coords.push(Coord::strings("feature_type", "feature", kinds));
    // Expand coords of each flattened dim over the full feature index.
    let sizes: Vec<usize> = rest.iter().map(|d| t.size(d)).collect::<Result<_>>()?;
    for (di, d) in rest.iter().enumerate() {
        let inner: usize = sizes[di + 1..].iter().product();
        let idx: Vec<usize> = (0..nfeat).map(|k| ((k % nflat) / inner) % sizes[di]).collect();
        for c in t.coords_on(d) {
            let values: CoordValues = c.values.take(&idx);
            coords.push(Coord { name: c.name.clone(), dim: "feature".into(), values });
        }
    }
    let unit = Unit::unitless();
    LabeledTensor::new(vec!["epoch".into(), "feature".into()], vec![ne, nfeat], data, coords, unit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn epochs(ne: usize, nch: usize, nr: usize, f: impl Fn(usize, usize, usize, f64) -> f64) -> LabeledTensor {
        let rt: Vec<f64> = (0..nr).map(|i| -1.0 + 0.5 * i as f64).collect();
        let mut d = Vec::new();
        for e in 0..ne {
            for c in 0..nch {
                for h in 0..2 {
                    d.extend(rt.iter().map(|&t| f(e, c, h, t)));
                }
            }
        }
        LabeledTensor::build(&["epoch", "channel", "chromo", "reltime"], &[ne, nch, 2, nr], d, "uM")
            .unwrap()
            .with_coords([
                Coord::strings("trial_type", "epoch", (0..ne).map(|_| "A".to_string()).collect()),
                Coord::strings("channel", "channel", (0..nch).map(|c| alloc::format!("C{c}")).collect()),
                Coord::str("chromo", "chromo", &["HbO", "HbR"]),
                Coord::f64("reltime", "reltime", rt),
            ])
            .unwrap()
    }

    fn all_specs() -> Vec<FeatureSpec> {
        Feature::ALL.iter().map(|&k| FeatureSpec::new(k)).collect()
    }

    #[test]
    fn constant_epoch() {
        let ep = epochs(1, 1, 9, |_, _, _, _| 3.0);
        let f = epoch_features(&ep, &all_specs()).unwrap();
        let span = 4.0;
        let want = [0.0, 0.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0 * span, 3.0 * span];
        for (a, b) in f.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_slope() {
        let ep = epochs(2, 2, 11, |e, _, _, t| (e as f64 + 1.5) * t);
        let f = epoch_features(&ep, &[FeatureSpec { kind: Feature::Slope, slice: Some((0.0, 2.0)) }]).unwrap();
        for e in 0..2 {
            for k in 0..4 {
                assert!((f.get(&[e, k]) - (e as f64 + 1.5)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn layout_and_count() {
        let ep = epochs(3, 44, 5, |e, c, h, t| e as f64 + 10.0 * c as f64 + 0.5 * h as f64 + t);
        let f = epoch_features(&ep, &all_specs()).unwrap();
        assert_eq!(f.shape(), &[3, 440]);
        assert_eq!(f.coord_str("feature_type").unwrap()[88], "mean");
        assert_eq!(f.coord_str("channel").unwrap()[88 + 3], "C1");
        assert_eq!(f.coord_str("chromo").unwrap()[88 + 3], "HbR");
        let mean = 2.0 + 10.0 + 0.5 + 0.0;
        assert!((f.get(&[2, 88 + 3]) - mean).abs() < 1e-12);
    }

    #[test]
    fn bad_slices() {
        let ep = epochs(1, 1, 5, |_, _, _, t| t);
        assert!(matches!(
            epoch_features(&ep, &[FeatureSpec { kind: Feature::Mean, slice: Some((0.0, 9.0)) }]),
            Err(Error::BadSlice(_))
        ));
        assert!(matches!(
            epoch_features(&ep, &[FeatureSpec { kind: Feature::Slope, slice: Some((0.1, 0.2)) }]),
            Err(Error::BadSlice(_))
        ));
    }
}
