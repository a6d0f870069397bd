//! Validates and runs a pipeline configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nirskit_core::recording::OrderedMap;
use nirskit_core::Recording;
use serde_json::{json, Value as Json};

use crate::config::{PipelineConfig, StepConfig};
use crate::container::{read_bundle, render, sha256_hex, write_bundle, Bundle};
use crate::error::{Error, Result};
use crate::forward::{sensitivity_from_tensor, SENSITIVITY};
use crate::registry::{Step, Ty, Value};
use crate::reports::write_betas_csv;
use crate::stim_csv::format_stim_csv;

pub const REPORT: &str = "run_report.json";
/// Names a pipeline can read from its input container.
pub const INPUT_NAMES: [&str; 4] = ["amp", "stim", "geo3d", "A"];
const INPUT_TYPES: [Ty; 4] = [Ty::Series, Ty::Stim, Ty::Geo, Ty::Sens];

/// A validated step in execution order.
#[derive(Debug, Clone)]
pub struct Planned {
    pub index: usize,
    pub op: String,
    pub step: Step,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub out_types: Vec<Ty>,
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub steps: Vec<Planned>,
    pub needs_input: bool,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Step { .. } => 3,
        _ => 1,
    }
}

fn check_out_name(name: &str) -> Result<()> {
    let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-'));
    if ok && !["manifest", "stim", "run_report", "geo3d"].contains(&name) {
        Ok(())
    } else {
        Err(Error::Config(format!("output name {name:?} is reserved or not a portable file name")))
    }
}

/// Parses every step, checks names and types, and orders the steps so that
/// each runs after the producers of its inputs.
pub fn plan(cfg: &PipelineConfig) -> Result<Plan> {
    let parsed: Vec<(usize, &StepConfig, Step)> = cfg
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Step::parse(&s.op, &s.params)
                .map(|st| (i, s, st))
                .map_err(|e| Error::Config(format!("step {i} ({}): {}", s.op, e.to_string().trim_start_matches("config error: "))))
        })
        .collect::<Result<_>>()?;
    let mut producer: BTreeMap<&str, (usize, Ty)> = BTreeMap::new();
    for (i, s, st) in &parsed {
        let sig = st.signature();
        let n = s.out.0.len();
        if n < sig.min_out || n > sig.outputs.len() {
            return Err(Error::Config(format!(
                "step {i} ({}): expects {}..={} outputs, got {n}",
                s.op,
                sig.min_out,
                sig.outputs.len()
            )));
        }
        for (name, ty) in s.out.0.iter().zip(sig.outputs) {
            check_out_name(name)?;
            if INPUT_NAMES.contains(&name.as_str()) || producer.insert(name, (*i, *ty)).is_some() {
                return Err(Error::Config(format!("step {i}: output {name:?} is defined twice")));
            }
        }
    }
    let mut deps: Vec<Vec<usize>> = vec![Vec::new(); parsed.len()];
    let mut needs_input = false;
    for (i, s, st) in &parsed {
        let sig = st.signature();
        let n = s.inputs.0.len();
        if n < sig.inputs.len() || (sig.variadic.is_none() && n > sig.inputs.len()) {
            return Err(Error::Config(format!("step {i} ({}): expects {} inputs, got {n}", s.op, sig.inputs.len())));
        }
        for (k, name) in s.inputs.0.iter().enumerate() {
            let slot = sig.inputs.get(k).copied().or(sig.variadic).expect("arity checked");
            let ty = if let Some(j) = INPUT_NAMES.iter().position(|x| x == name) {
                needs_input = true;
                INPUT_TYPES[j]
            } else if let Some(&(p, ty)) = producer.get(name.as_str()) {
                deps[*i].push(p);
                ty
            } else {
                return Err(Error::Config(format!("step {i} ({}): input {name:?} is neither an input nor a step output", s.op)));
            };
            if !ty.fits(slot) {
                return Err(Error::Config(format!("step {i} ({}): input {name:?} is {ty:?}, expected {slot:?}", s.op)));
            }
        }
    }
    // Kahn's algorithm, lowest index first, so the listed order is kept when valid.
    let mut done = vec![false; parsed.len()];
    let mut order = Vec::with_capacity(parsed.len());
    while order.len() < parsed.len() {
        let next = (0..parsed.len()).find(|&i| !done[i] && deps[i].iter().all(|&d| done[d]));
        match next {
            Some(i) => {
                done[i] = true;
                order.push(i);
            }
            None => return Err(Error::Config("steps form a cycle".into())),
        }
    }
    let steps = order
        .into_iter()
        .map(|i| {
            let (_, s, st) = &parsed[i];
            let out_types = st.signature().outputs[..s.out.0.len()].to_vec();
            Planned { index: i, op: s.op.clone(), step: st.clone(), inputs: s.inputs.0.clone(), outputs: s.out.0.clone(), out_types }
        })
        .collect();
    Ok(Plan { steps, needs_input })
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dry_run: bool,
}

/// Summary of a finished (or dry) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub report: Json,
    /// Hash of the output manifest, `None` when nothing was written.
    pub container_hash: Option<String>,
}

pub fn threads() -> usize {
    std::env::var("NIRSKIT_THREADS").ok().and_then(|s| s.parse().ok()).filter(|&n| n > 0).unwrap_or(1)
}

fn load_inputs(path: Option<&Path>, needed: bool) -> Result<(BTreeMap<String, Value>, Recording)> {
    let mut values = BTreeMap::new();
    let Some(path) = path else {
        if needed {
            return Err(Error::Config("the pipeline reads inputs but no input container was given".into()));
        }
        return Ok((values, Recording::default()));
    };
    let b = read_bundle(path).map_err(|e| Error::Config(format!("cannot load input {}: {e}", path.display())))?;
    let amp = b.recording.timeseries.get("amp").or_else(|| b.recording.timeseries.values().next());
    if let Some(a) = amp {
        values.insert("amp".into(), Value::Series(a.clone()));
    }
    values.insert("stim".into(), Value::Stim(b.recording.stim.clone()));
    if !b.recording.geo3d.is_empty() {
        values.insert("geo3d".into(), Value::Geo(b.recording.geo3d.clone()));
    }
    if let Some(a) = b.tensors.get(SENSITIVITY) {
        let s = sensitivity_from_tensor(a).map_err(|e| Error::Config(format!("input sensitivity: {e}")))?;
        values.insert("A".into(), Value::Sens(s.value));
    }
    Ok((values, b.recording))
}

/// Validates, then (unless dry) executes and writes outputs.
pub fn run_pipeline(cfg: &PipelineConfig, ov: &Overrides) -> Result<RunSummary> {
    let plan = plan(cfg)?;
    let input = ov.input.clone().or_else(|| cfg.input.clone());
    let output = ov.output.clone().or_else(|| cfg.output.clone());
    let seed = ov.seed.unwrap_or(cfg.seed);
    let (mut values, input_rec) = load_inputs(input.as_deref(), plan.needs_input)?;
    for p in &plan.steps {
        for name in &p.inputs {
            if INPUT_NAMES.contains(&name.as_str()) && !values.contains_key(name) {
                return Err(Error::Config(format!("step {} ({}): input container has no {name:?}", p.index, p.op)));
            }
        }
    }
    let output = output.ok_or_else(|| Error::Config("no output directory given".into()))?;
    let base = json!({
        "seed": seed,
        "threads": threads(),
        "dry_run": ov.dry_run,
        "steps": plan.steps.iter().map(|p| json!({"index": p.index, "op": p.op, "in": p.inputs, "out": p.outputs})).collect::<Vec<_>>(),
    });
    if ov.dry_run {
        return Ok(RunSummary { report: base, container_hash: None });
    }
    let mut step_reports = Vec::new();
    for p in &plan.steps {
        let args: Vec<&Value> = p.inputs.iter().map(|n| &values[n]).collect();
        let started = Instant::now();
        let step_seed = seed.wrapping_add(p.index as u64);
        let (outs, notes) = p
            .step
            .run(&args, p.outputs.len(), step_seed)
            .map_err(|e| Error::Step { step: p.index, op: p.op.clone(), source: Box::new(e) })?;
        let wall = started.elapsed().as_secs_f64();
        let hashes: BTreeMap<&str, String> = p.outputs.iter().zip(&outs).map(|(n, v)| (n.as_str(), value_hash(v))).collect();
        step_reports.push(json!({
            "index": p.index,
            "op": p.op,
            "in": p.inputs,
            "out": p.outputs,
            "wall_time_s": wall,
            "output_sha256": hashes,
            "notes": notes,
        }));
        for (n, v) in p.outputs.iter().zip(outs) {
            values.insert(n.clone(), v);
        }
    }
    let container_hash = if plan.steps.is_empty() {
        std::fs::create_dir_all(&output).map_err(Error::io(&output))?;
        None
    } else {
        Some(write_outputs(&plan, &values, &input_rec, seed, &output)?)
    };
    let mut report = base;
    report["steps"] = Json::Array(step_reports);
    report["container_sha256"] = json!(container_hash);
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Manifest(e.to_string()))? + "\n";
    let rp = output.join(REPORT);
    std::fs::write(&rp, text).map_err(Error::io(&rp))?;
    Ok(RunSummary { report, container_hash })
}

fn value_hash(v: &Value) -> String {
    let mut b = Bundle::default();
    match v {
        Value::Series(t) | Value::Mask(t) | Value::Tensor(t) => drop(b.tensors.insert("x", t.clone())),
        Value::Fit(f) => drop(b.tensors.insert("x", f.params.clone())),
        Value::Stim(s) => return sha256_hex(format_stim_csv(s).unwrap_or_default().as_bytes()),
        Value::Geo(g) => return g.to_tensor().map(|t| sha256_hex(&t.data().iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<_>>())).unwrap_or_default(),
        Value::Sens(a) => drop(b.tensors.insert("x", a.tensor().clone())),
    }
    // Manifest hash covers data, dims, coords and unit.
    render(&b).map(|f| sha256_hex(&f[0].1)).unwrap_or_default()
}

/// Writes the output container, then side files for fits and stim tables.
fn write_outputs(plan: &Plan, values: &BTreeMap<String, Value>, input: &Recording, seed: u64, out: &Path) -> Result<String> {
    let mut rec = Recording { geo3d: input.geo3d.clone(), stim: input.stim.clone(), meta: input.meta.clone(), ..Recording::default() };
    rec.meta.insert("pipeline.seed".into(), seed.to_string());
    let mut tensors = OrderedMap::new();
    let mut side: Vec<(String, Vec<u8>)> = Vec::new();
    for p in &plan.steps {
        for name in &p.outputs {
            match &values[name] {
                Value::Series(t) => drop(rec.timeseries.insert(name, t.clone())),
                Value::Mask(t) => drop(rec.masks.insert(name, t.clone())),
                Value::Tensor(t) => drop(tensors.insert(name, t.clone())),
                Value::Fit(f) => {
                    tensors.insert(name, f.params.clone());
                    tensors.insert(&format!("{name}_cov"), f.cov.clone());
                    side.push((format!("{name}_betas.csv"), write_betas_csv(f)?.into_bytes()));
                }
                Value::Stim(s) => side.push((format!("{name}.csv"), format_stim_csv(s)?.into_bytes())),
                Value::Geo(_) | Value::Sens(_) => {}
            }
        }
    }
    let b = Bundle { recording: rec, tensors };
    b.recording.validate()?;
    write_bundle(&b, out)?;
    for (name, bytes) in side {
        let p = out.join(name);
        std::fs::write(&p, bytes).map_err(Error::io(&p))?;
    }
    crate::container::container_hash(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(y: &str) -> PipelineConfig {
        PipelineConfig::parse(y).unwrap()
    }

    #[test]
    fn orders_by_dependency() {
        let p = plan(&cfg("steps:\n  - {op: tddr, in: od, out: od_t}\n  - {op: int2od, in: amp, out: od}\n")).unwrap();
        let ops: Vec<&str> = p.steps.iter().map(|s| s.op.as_str()).collect();
        assert_eq!(ops, ["int2od", "tddr"]);
        assert!(p.needs_input);
    }

    #[test]
    fn config_errors() {
        for y in [
            "steps:\n  - {op: frobnicate, in: amp, out: x}\n",
            "steps:\n  - {op: tddr, in: nowhere, out: x}\n",
            "steps:\n  - {op: tddr, in: a, out: b}\n  - {op: tddr, in: b, out: a}\n",
            "steps:\n  - {op: int2od, in: amp, out: x}\n  - {op: tddr, in: x, out: x}\n",
            "steps:\n  - {op: int2od, in: stim, out: x}\n",
            "steps:\n  - {op: int2od, in: amp, out: [x, y]}\n",
            "steps:\n  - {op: int2od, in: amp, out: ../x}\n",
        ] {
            assert!(matches!(plan(&cfg(y)), Err(Error::Config(_))), "{y}");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        let e = Error::Step { step: 0, op: "tddr".into(), source: Box::new(Error::Parse("x".into())) };
        assert_eq!(exit_code(&e), 3);
    }
}
