//! Sensitivity matrices and triangle surfaces stored as containers.
//!
//! A sensitivity container holds one tensor `A` with dims exactly
//! `(channel, vertex, wavelength)`. A surface container holds `vertices`
//! with dims `(vertex, <crs>)` and `faces` with dims `(face, corner)`;
//! parcel labels ride on the vertex dim of `vertices`.

use std::path::Path;

use nirskit_core::imgrecon::{SensitivityMatrix, TriSurface};
use nirskit_core::{Coord, LabeledTensor, Unit};

use crate::container::{inspect, read_bundle, write_bundle, ArrayInfo, Bundle, Kind};
use crate::error::{Error, Result};

pub const SENSITIVITY: &str = "A";
const SENS_DIMS: [&str; 3] = ["channel", "vertex", "wavelength"];

/// A loaded value plus non-fatal notes raised while loading it.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

fn check_sens_dims(dims: &[String]) -> Result<()> {
    if dims.iter().map(String::as_str).ne(SENS_DIMS) {
        return Err(Error::Schema(format!("sensitivity dims must be {SENS_DIMS:?}, got {dims:?}")));
    }
    Ok(())
}

pub fn sensitivity_from_tensor(t: &LabeledTensor) -> Result<Loaded<SensitivityMatrix>> {
    check_sens_dims(t.dims())?;
    let mut warnings = Vec::new();
    let t = match t.coord("is_brain") {
        Some(_) => t.clone(),
        None => {
            warnings.push("sensitivity has no is_brain coord; all vertices treated as brain".to_string());
            let nv = t.size("vertex")?;
            t.clone().with_coords([Coord::bool("is_brain", "vertex", vec![true; nv])])?
        }
    };
    Ok(Loaded { value: SensitivityMatrix::new(&t)?, warnings })
}

pub fn read_sensitivity(path: &Path) -> Result<Loaded<SensitivityMatrix>> {
    let b = read_bundle(path)?;
    let t = b
        .tensors
        .get(SENSITIVITY)
        .ok_or_else(|| Error::Schema(format!("{} has no tensor {SENSITIVITY:?}", path.display())))?;
    sensitivity_from_tensor(t)
}

pub fn write_sensitivity(a: &SensitivityMatrix, path: &Path) -> Result<()> {
    let mut b = Bundle::default();
    b.tensors.insert(SENSITIVITY, a.tensor().clone());
    write_bundle(&b, path)
}

/// Header of the sensitivity array; data files are not read.
pub fn inspect_sensitivity(path: &Path) -> Result<ArrayInfo> {
    let info = inspect(path)?
        .into_iter()
        .find(|a| a.name == SENSITIVITY && a.kind == Kind::Tensor)
        .ok_or_else(|| Error::Schema(format!("{} has no tensor {SENSITIVITY:?}", path.display())))?;
    check_sens_dims(&info.dims.iter().map(|d| d.0.clone()).collect::<Vec<_>>())?;
    Ok(info)
}

pub fn surface_bundle(s: &TriSurface) -> Result<Bundle> {
    let nv = s.vertices.len();
    let verts = LabeledTensor::build(&["vertex", &s.crs], &[nv, 3], s.vertices.iter().flatten().copied().collect(), "mm")?;
    let verts = match &s.parcels {
        Some(p) => verts.with_coords([Coord::strings("parcel", "vertex", p.clone())])?,
        None => verts,
    };
    let faces = LabeledTensor::build(
        &["face", "corner"],
        &[s.faces.len(), 3],
        s.faces.iter().flatten().map(|&i| i as f64).collect(),
        "1",
    )?;
    let mut b = Bundle::default();
    b.tensors.insert("vertices", verts);
    b.tensors.insert("faces", faces);
    Ok(b)
}

pub fn surface_from_bundle(b: &Bundle) -> Result<TriSurface> {
    let get = |n: &str| b.tensors.get(n).ok_or_else(|| Error::Schema(format!("surface has no {n:?} array")));
    let v = get("vertices")?;
    let f = get("faces")?;
    if v.dims().len() != 2 || v.dims()[0] != "vertex" || v.shape()[1] != 3 {
        return Err(Error::Schema(format!("vertices must be (vertex, crs) with 3 columns, got {:?} {:?}", v.dims(), v.shape())));
    }
    if f.dims() != ["face", "corner"] || f.shape()[1] != 3 {
        return Err(Error::Schema(format!("faces must be (face, corner) with 3 columns, got {:?} {:?}", f.dims(), f.shape())));
    }
    let v = v.convert_to(&Unit::parse("mm")?)?;
    let vertices = v.data().chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let faces = f
        .data()
        .chunks_exact(3)
        .map(|c| {
            let mut out = [0usize; 3];
            for (o, &x) in out.iter_mut().zip(c) {
                if !(x >= 0.0 && x.fract() == 0.0) {
                    return Err(Error::Schema(format!("face index {x} is not a non-negative integer")));
                }
                *o = x as usize;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let s = TriSurface::new(vertices, faces, &v.dims()[1])?;
    match v.coord("parcel") {
        Some(_) => Ok(s.with_parcels(v.coord_str("parcel")?.to_vec())?),
        None => Ok(s),
    }
}

pub fn read_surface(path: &Path) -> Result<TriSurface> {
    surface_from_bundle(&read_bundle(path)?)
}

pub fn write_surface(s: &TriSurface, path: &Path) -> Result<()> {
    write_bundle(&surface_bundle(s)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sens(with_brain: bool) -> LabeledTensor {
        let t = LabeledTensor::build(&SENS_DIMS, &[2, 4, 2], (0..16).map(|i| i as f64 * 0.5).collect(), "mm")
            .unwrap()
            .with_coords([
                Coord::strings("channel", "channel", vec!["S1D1".into(), "S1D2".into()]),
                Coord::f64("wavelength", "wavelength", vec![760.0, 850.0]),
            ])
            .unwrap();
        if with_brain {
            t.with_coords([Coord::bool("is_brain", "vertex", vec![true, true, false, false])]).unwrap()
        } else {
            t
        }
    }

    #[test]
    fn sensitivity_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sens");
        let a = sensitivity_from_tensor(&small_sens(true)).unwrap();
        assert!(a.warnings.is_empty());
        write_sensitivity(&a.value, &p).unwrap();
        let back = read_sensitivity(&p).unwrap();
        assert_eq!(back.value, a.value);
        assert_eq!(back.value.is_brain(), &[true, true, false, false]);
        assert_eq!(back.value.tensor().unit().to_string(), "mm");
    }

    #[test]
    fn missing_is_brain_defaults_with_warning() {
        let a = sensitivity_from_tensor(&small_sens(false)).unwrap();
        assert_eq!(a.value.is_brain(), &[true; 4]);
        assert_eq!(a.warnings.len(), 1);
    }

    #[test]
    fn wrong_dims_are_schema_errors() {
        let t = small_sens(true).transpose(&["vertex", "channel", "wavelength"]).unwrap();
        assert!(matches!(sensitivity_from_tensor(&t), Err(Error::Schema(_))));
    }

    #[test]
    fn surface_round_trip_with_parcels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("surf");
        let s = TriSurface::grid(3, 3, 2.0);
        let labels: Vec<String> = (0..s.n_vertices()).map(|i| format!("P{}", i % 2)).collect();
        let s = s.with_parcels(labels).unwrap();
        write_surface(&s, &p).unwrap();
        assert_eq!(read_surface(&p).unwrap(), s);
    }
}
