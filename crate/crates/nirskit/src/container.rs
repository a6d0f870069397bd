//! Directory container: `manifest.json`, one raw `.f64` file per array and `stim.csv`.
//!
//! Arrays are little-endian IEEE-754 doubles in row-major order. The
//! manifest is canonical JSON with sorted keys, so writing the same content
//! twice produces identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use nirskit_core::recording::OrderedMap;
use nirskit_core::{Coord, CoordValues, LabeledPoints, LabeledTensor, Recording, Unit};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::stim_csv::{format_stim_csv, parse_stim_csv};

pub const SCHEMA_VERSION: &str = "1";
pub const MANIFEST: &str = "manifest.json";
pub const STIM_FILE: &str = "stim.csv";

/// Role of an array inside a container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Timeseries,
    Aux,
    Mask,
    Geo3d,
    Tensor,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Timeseries => "timeseries",
            Kind::Aux => "aux",
            Kind::Mask => "mask",
            Kind::Geo3d => "geo3d",
            Kind::Tensor => "tensor",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "timeseries" => Kind::Timeseries,
            "aux" => Kind::Aux,
            "mask" => Kind::Mask,
            "geo3d" => Kind::Geo3d,
            "tensor" => Kind::Tensor,
            _ => return Err(Error::Manifest(format!("unknown array kind {s:?}"))),
        })
    }
}

/// A recording plus free-standing named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    pub recording: Recording,
    pub tensors: OrderedMap<LabeledTensor>,
}

/// Array metadata read from a manifest without touching data files.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayInfo {
    pub name: String,
    pub kind: Kind,
    pub dims: Vec<(String, usize)>,
    pub unit: String,
    pub data_file: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn check_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name != "manifest"
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !name.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::Manifest(format!("array name {name:?} is not a portable file name")))
    }
}

fn float_json(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("NaN")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn json_float(v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Manifest(format!("bad number {n}"))),
        Value::String(s) if s == "NaN" => Ok(f64::NAN),
        Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        Value::String(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        _ => Err(Error::Manifest(format!("expected a float, got {v}"))),
    }
}

fn coord_json(c: &Coord) -> Value {
    let (dtype, values): (&str, Vec<Value>) = match &c.values {
        CoordValues::F64(v) => ("f64", v.iter().map(|&x| float_json(x)).collect()),
        CoordValues::Str(v) => ("str", v.iter().map(|x| json!(x)).collect()),
        CoordValues::Bool(v) => ("bool", v.iter().map(|x| json!(x)).collect()),
        CoordValues::I64(v) => ("i64", v.iter().map(|x| json!(x)).collect()),
    };
    json!({ "name": c.name, "dim": c.dim, "dtype": dtype, "values": values })
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Manifest(format!("missing field {key:?}")))
}

fn str_field<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    field(v, key)?.as_str().ok_or_else(|| Error::Manifest(format!("field {key:?} must be a string")))
}

fn array_field<'a>(v: &'a Value, key: &str) -> Result<&'a Vec<Value>> {
    field(v, key)?.as_array().ok_or_else(|| Error::Manifest(format!("field {key:?} must be an array")))
}

fn json_coord(v: &Value) -> Result<Coord> {
    let name = str_field(v, "name")?;
    let dim = str_field(v, "dim")?;
    let vals = array_field(v, "values")?;
    let bad = |what: &str| Error::Manifest(format!("coord {name}: expected {what} values"));
    let values = match str_field(v, "dtype")? {
        "f64" => CoordValues::F64(vals.iter().map(json_float).collect::<Result<_>>()?),
        "str" => CoordValues::Str(vals.iter().map(|x| x.as_str().map(String::from).ok_or_else(|| bad("string"))).collect::<Result<_>>()?),
        "bool" => CoordValues::Bool(vals.iter().map(|x| x.as_bool().ok_or_else(|| bad("bool"))).collect::<Result<_>>()?),
        "i64" => CoordValues::I64(vals.iter().map(|x| x.as_i64().ok_or_else(|| bad("integer"))).collect::<Result<_>>()?),
        d => return Err(Error::Manifest(format!("coord {name}: unknown dtype {d:?}"))),
    };
    Ok(Coord { name: name.into(), dim: dim.into(), values })
}

fn encode(t: &LabeledTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(t.len() * 8);
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn unit_string(u: &Unit) -> String {
    if u.is_unitless() {
        "1".into()
    } else {
        u.to_string()
    }
}

struct Entry<'a> {
    kind: Kind,
    name: &'a str,
    tensor: LabeledTensor,
}

fn entries(b: &Bundle) -> Result<Vec<Entry<'_>>> {
    let r = &b.recording;
    let mut out: Vec<Entry> = Vec::new();
    for (n, t) in r.timeseries.iter() {
        out.push(Entry { kind: Kind::Timeseries, name: n, tensor: t.clone() });
    }
    for (n, t) in r.aux_ts.iter() {
        out.push(Entry { kind: Kind::Aux, name: n, tensor: t.clone() });
    }
    for (n, t) in r.masks.iter() {
        out.push(Entry { kind: Kind::Mask, name: n, tensor: t.clone() });
    }
    if !r.geo3d.is_empty() {
        out.push(Entry { kind: Kind::Geo3d, name: "geo3d", tensor: r.geo3d.to_tensor()? });
    }
    for (n, t) in b.tensors.iter() {
        out.push(Entry { kind: Kind::Tensor, name: n, tensor: t.clone() });
    }
    let mut seen = std::collections::BTreeSet::new();
    for e in &out {
        check_name(e.name)?;
        if !seen.insert(e.name) {
            return Err(Error::Manifest(format!("array name {:?} used twice", e.name)));
        }
    }
    Ok(out)
}

/// Serialized files of a bundle, manifest first.
pub fn render(b: &Bundle) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    let mut arrays = Vec::new();
    for e in entries(b)? {
        let bytes = encode(&e.tensor);
        let data_file = format!("{}.f64", e.name);
        let dims: Vec<Value> = e.tensor.dims().iter().zip(e.tensor.shape()).map(|(d, s)| json!({ "name": d, "size": s })).collect();
        arrays.push(json!({
            "name": e.name,
            "kind": e.kind.as_str(),
            "dims": dims,
            "unit": unit_string(e.tensor.unit()),
            "data_file": data_file,
            "sha256": sha256_hex(&bytes),
            "coords": e.tensor.coords().iter().map(coord_json).collect::<Vec<_>>(),
        }));
        files.push((data_file, bytes));
    }
    let meta: Map<String, Value> = b.recording.meta.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let stim = format_stim_csv(&b.recording.stim)?.into_bytes();
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "arrays": arrays,
        "meta": meta,
        "stim_file": STIM_FILE,
        "stim_sha256": sha256_hex(&stim),
    });
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Manifest(e.to_string()))?;
    text.push('\n');
    files.insert(0, (MANIFEST.to_string(), text.into_bytes()));
    files.push((STIM_FILE.to_string(), stim));
    Ok(files)
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "container".into());
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Writes into a temporary sibling directory, then renames it into place.
pub fn write_bundle(b: &Bundle, path: &Path) -> Result<()> {
    let files = render(b)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    let tmp = temp_sibling(path);
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(Error::io(&tmp))?;
    }
    fs::create_dir(&tmp).map_err(Error::io(&tmp))?;
    for (name, bytes) in &files {
        let p = tmp.join(name);
        fs::write(&p, bytes).map_err(Error::io(&p))?;
    }
    if path.exists() {
        fs::remove_dir_all(path).map_err(Error::io(path))?;
    }
    fs::rename(&tmp, path).map_err(Error::io(path))
}

pub fn write_container(rec: &Recording, path: &Path) -> Result<()> {
    write_bundle(&Bundle { recording: rec.clone(), tensors: OrderedMap::new() }, path)
}

fn load_manifest(path: &Path) -> Result<Value> {
    let p = path.join(MANIFEST);
    let text = fs::read_to_string(&p).map_err(Error::io(&p))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
    match v.get("schema_version").and_then(Value::as_str) {
        Some(SCHEMA_VERSION) => Ok(v),
        other => Err(Error::Manifest(format!("unsupported schema_version {other:?}"))),
    }
}

fn array_info(a: &Value) -> Result<ArrayInfo> {
    let dims = array_field(a, "dims")?
        .iter()
        .map(|d| {
            let size = field(d, "size")?.as_u64().ok_or_else(|| Error::Manifest("dim size must be a non-negative integer".into()))?;
            Ok((str_field(d, "name")?.to_string(), size as usize))
        })
        .collect::<Result<_>>()?;
    Ok(ArrayInfo {
        name: str_field(a, "name")?.into(),
        kind: Kind::parse(str_field(a, "kind")?)?,
        dims,
        unit: str_field(a, "unit")?.into(),
        data_file: str_field(a, "data_file")?.into(),
        sha256: str_field(a, "sha256")?.into(),
    })
}

/// Array headers only; data files are not opened.
pub fn inspect(path: &Path) -> Result<Vec<ArrayInfo>> {
    array_field(&load_manifest(path)?, "arrays")?.iter().map(array_info).collect()
}

fn read_checked(dir: &Path, file: &str, expected: &str) -> Result<Vec<u8>> {
    if file.contains('/') || file.contains('\\') || file.starts_with('.') {
        return Err(Error::Manifest(format!("data file {file:?} escapes the container")));
    }
    let p = dir.join(file);
    let bytes = fs::read(&p).map_err(Error::io(&p))?;
    let actual = sha256_hex(&bytes);
    if actual != expected {
        return Err(Error::Checksum { file: file.into(), expected: expected.into(), actual });
    }
    Ok(bytes)
}

fn parse_unit(s: &str) -> Result<Unit> {
    if s == "1" || s == "unitless" {
        Ok(Unit::unitless())
    } else {
        Ok(Unit::parse(s)?)
    }
}

fn load_array(dir: &Path, a: &Value) -> Result<(ArrayInfo, LabeledTensor)> {
    let info = array_info(a)?;
    let bytes = read_checked(dir, &info.data_file, &info.sha256)?;
    let n: usize = info.dims.iter().map(|d| d.1).product();
    if bytes.len() != n * 8 {
        return Err(Error::Core(nirskit_core::Error::DimMismatch(format!(
            "{}: {} bytes for {} values",
            info.name,
            bytes.len(),
            n
        ))));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let coords = array_field(a, "coords")?.iter().map(json_coord).collect::<Result<_>>()?;
    let t = LabeledTensor::new(
        info.dims.iter().map(|d| d.0.clone()).collect(),
        info.dims.iter().map(|d| d.1).collect(),
        data,
        coords,
        parse_unit(&info.unit)?,
    )?;
    Ok((info, t))
}

/// Reads and validates every array; any failure aborts the whole load.
pub fn read_bundle(path: &Path) -> Result<Bundle> {
    let m = load_manifest(path)?;
    let mut b = Bundle::default();
    for a in array_field(&m, "arrays")? {
        let (info, t) = load_array(path, a)?;
        let r = &mut b.recording;
        match info.kind {
            Kind::Timeseries => drop(r.timeseries.insert(&info.name, t)),
            Kind::Aux => drop(r.aux_ts.insert(&info.name, t)),
            Kind::Mask => drop(r.masks.insert(&info.name, t)),
            Kind::Geo3d => r.geo3d = LabeledPoints::from_tensor(&t)?,
            Kind::Tensor => drop(b.tensors.insert(&info.name, t)),
        }
    }
    if let Some(meta) = m.get("meta") {
        let meta = meta.as_object().ok_or_else(|| Error::Manifest("meta must be an object".into()))?;
        for (k, v) in meta {
            let v = v.as_str().ok_or_else(|| Error::Manifest(format!("meta {k:?} must be a string")))?;
            b.recording.meta.insert(k.clone(), v.to_string());
        }
    }
    let stim_file = str_field(&m, "stim_file")?;
    let stim = read_checked(path, stim_file, str_field(&m, "stim_sha256")?)?;
    let text = String::from_utf8(stim).map_err(|e| Error::Parse(e.to_string()))?;
    b.recording.stim = parse_stim_csv(&text)?;
    b.recording.validate()?;
    Ok(b)
}

pub fn read_container(path: &Path) -> Result<Recording> {
    Ok(read_bundle(path)?.recording)
}

/// Hash over the manifest, which itself pins every data file and the stim table.
pub fn container_hash(path: &Path) -> Result<String> {
    let p = path.join(MANIFEST);
    Ok(sha256_hex(&fs::read(&p).map_err(Error::io(&p))?))
}
