use std::fs;
use std::path::Path;

use nirskit::container::{inspect, read_bundle, read_container, render, write_bundle, write_container, Bundle, Kind};
use nirskit::error::Error;
use nirskit::fixture::{synthetic_recording, FixtureConfig};
use nirskit::forward::{inspect_sensitivity, read_sensitivity};
use nirskit_core::{Coord, LabeledTensor};
use proptest::prelude::*;
use serde_json::json;

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn small_recording() -> nirskit_core::Recording {
    synthetic_recording(&FixtureConfig { duration: 30.0, ..FixtureConfig::default() }).unwrap()
}

#[test]
fn write_read_write_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let rec = small_recording();
    write_container(&rec, &a).unwrap();
    let back = read_container(&a).unwrap();
    assert_eq!(back, rec);
    write_container(&back, &b).unwrap();
    assert_eq!(files(&a), files(&b));
}

#[test]
fn channel_coords_survive_as_strings() {
    let dir = tempfile::tempdir().unwrap();
    let rec = small_recording();
    write_container(&rec, dir.path()).unwrap();
    let back = read_container(dir.path()).unwrap();
    let (x, y) = (rec.timeseries.get("amp").unwrap(), back.timeseries.get("amp").unwrap());
    for c in ["channel", "source", "detector"] {
        assert_eq!(x.coord_str(c).unwrap(), y.coord_str(c).unwrap());
    }
}

#[test]
fn corrupted_data_is_rejected_whole() {
    let dir = tempfile::tempdir().unwrap();
    write_container(&small_recording(), dir.path()).unwrap();
    let p = dir.path().join("amp.f64");
    let mut bytes = fs::read(&p).unwrap();
    bytes[3] ^= 1;
    fs::write(&p, bytes).unwrap();
    assert!(matches!(read_container(dir.path()), Err(Error::Checksum { .. })));
}

#[test]
fn manifest_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_container(&small_recording(), dir.path()).unwrap();
    let mp = dir.path().join("manifest.json");
    let text = fs::read_to_string(&mp).unwrap();
    fs::write(&mp, text.replace("\"schema_version\": \"1\"", "\"schema_version\": \"9\"")).unwrap();
    assert!(matches!(read_container(dir.path()), Err(Error::Manifest(_))));
    fs::write(&mp, "{").unwrap();
    assert!(matches!(read_container(dir.path()), Err(Error::Manifest(_))));
}

#[test]
fn shape_mismatch_between_manifest_and_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = Bundle::default();
    b.tensors.insert("x", LabeledTensor::build(&["a"], &[3], vec![1.0, 2.0, 3.0], "mm").unwrap());
    write_bundle(&b, dir.path()).unwrap();
    let mp = dir.path().join("manifest.json");
    let text = fs::read_to_string(&mp).unwrap();
    fs::write(&mp, text.replace("\"size\": 3", "\"size\": 4")).unwrap();
    assert!(matches!(read_bundle(dir.path()), Err(Error::Core(nirskit_core::Error::DimMismatch(_)))));
}

#[test]
fn rewrite_replaces_previous_contents() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c");
    let mut b = Bundle::default();
    b.tensors.insert("old", LabeledTensor::build(&["a"], &[1], vec![1.0], "1").unwrap());
    write_bundle(&b, &p).unwrap();
    let mut b2 = Bundle::default();
    b2.tensors.insert("new", LabeledTensor::build(&["a"], &[1], vec![2.0], "1").unwrap());
    write_bundle(&b2, &p).unwrap();
    let names: Vec<String> = files(&p).into_iter().map(|f| f.0).collect();
    assert_eq!(names, ["manifest.json", "new.f64", "stim.csv"]);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1, "no temporary directory left behind");
}

/// Header with the forward-model shape, data file deliberately absent.
#[test]
fn large_sensitivity_header_inspects_without_data() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = json!({
        "schema_version": "1",
        "arrays": [{
            "name": "A", "kind": "tensor",
            "dims": [{"name": "channel", "size": 100}, {"name": "vertex", "size": 25052}, {"name": "wavelength", "size": 2}],
            "unit": "mm", "data_file": "A.f64", "sha256": "00", "coords": []
        }],
        "meta": {}, "stim_file": "stim.csv", "stim_sha256": "00"
    });
    fs::write(dir.path().join("manifest.json"), serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    let info = inspect_sensitivity(dir.path()).unwrap();
    let shape: Vec<usize> = info.dims.iter().map(|d| d.1).collect();
    assert_eq!(shape, [100, 25052, 2]);
    assert_eq!(info.unit, "mm");
    assert_eq!(inspect(dir.path()).unwrap()[0].kind, Kind::Tensor);
    assert!(matches!(read_sensitivity(dir.path()), Err(Error::Io { .. })));
}

fn tensor_strategy() -> impl Strategy<Value = LabeledTensor> {
    (1usize..4, 1usize..5).prop_flat_map(|(a, b)| {
        (
            prop::collection::vec(prop_oneof![any::<f64>(), Just(f64::NAN), Just(-0.0)], a * b),
            prop::collection::vec("[a-z;, \"]{0,6}", a),
            prop::collection::vec(prop_oneof![any::<f64>(), Just(f64::INFINITY)], b),
        )
            .prop_map(move |(data, labels, tick)| {
                LabeledTensor::build(&["row", "col"], &[a, b], data, "uM")
                    .unwrap()
                    .with_coords([Coord::strings("label", "row", labels), Coord::f64("tick", "col", tick)])
                    .unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_tensors_round_trip_bitwise(t in tensor_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let mut b = Bundle::default();
        b.tensors.insert("t", t.clone());
        write_bundle(&b, dir.path()).unwrap();
        let back = read_bundle(dir.path()).unwrap();
        let u = back.tensors.get("t").unwrap();
        let bits = |x: &LabeledTensor| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(u), bits(&t));
        prop_assert!(u.coord("tick").unwrap().values.identical(&t.coord("tick").unwrap().values));
        prop_assert_eq!(u.coord_str("label").unwrap(), t.coord_str("label").unwrap());
        prop_assert_eq!(render(&back).unwrap(), render(&b).unwrap());
    }
}
