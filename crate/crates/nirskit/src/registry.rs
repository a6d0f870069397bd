//! Pipeline operations, one per module function.
//!
//! Each op parses its parameters and declares its input and output types
//! up front so a whole pipeline can be checked before any step runs.

use std::collections::BTreeSet;

use nirskit_core::glm::{self, Basis, DesignMatrix, Drift, FitResult, NoiseModel};
use nirskit_core::imgrecon::{assemble_inverse_operator, reconstruct, ImageReconConfig, ReconMode, SensitivityMatrix};
use nirskit_core::preproc::{self, ExtinctionTable};
use nirskit_core::sim::{add_artifacts, random_events_perc, Generators, ScaleMode};
use nirskit_core::{quality, LabeledPoints, LabeledTensor, Quantity, Reduction, StimTable};
use serde_json::{Map, Value as Json};

use crate::error::{Error, Result};

/// Runtime value flowing between steps.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Series(LabeledTensor),
    Mask(LabeledTensor),
    Tensor(LabeledTensor),
    Stim(StimTable),
    Geo(LabeledPoints),
    Sens(SensitivityMatrix),
    Fit(Box<FitResult>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Series,
    Mask,
    Tensor,
    Stim,
    Geo,
    Sens,
    Fit,
}

impl Ty {
    /// Whether a value of type `self` may fill a slot of type `slot`.
    pub fn fits(self, slot: Ty) -> bool {
        self == slot || (slot == Ty::Tensor && matches!(self, Ty::Series | Ty::Mask))
    }
}

impl Value {
    pub fn ty(&self) -> Ty {
        match self {
            Value::Series(_) => Ty::Series,
            Value::Mask(_) => Ty::Mask,
            Value::Tensor(_) => Ty::Tensor,
            Value::Stim(_) => Ty::Stim,
            Value::Geo(_) => Ty::Geo,
            Value::Sens(_) => Ty::Sens,
            Value::Fit(_) => Ty::Fit,
        }
    }

    fn tensor(&self) -> &LabeledTensor {
        match self {
            Value::Series(t) | Value::Mask(t) | Value::Tensor(t) => t,
            _ => unreachable!("type checked before running"),
        }
    }
}

/// Typed parameter access; every key must be consumed.
struct Params<'a> {
    op: &'a str,
    map: &'a Map<String, Json>,
    used: BTreeSet<&'a str>,
}

impl<'a> Params<'a> {
    fn new(op: &'a str, map: &'a Map<String, Json>) -> Self {
        Params { op, map, used: BTreeSet::new() }
    }

    fn err(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        Error::Config(format!("{}: parameter {key:?} {msg}", self.op))
    }

    fn get(&mut self, key: &'a str) -> Option<&'a Json> {
        self.used.insert(key);
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn f64(&mut self, key: &'a str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| self.err(key, "must be a number")),
        }
    }

    /// A number in `unit` or a string such as `"22.5 mm"`.
    fn quantity(&mut self, key: &'a str, unit: &str, default: Option<f64>) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(default),
            Some(Json::Number(n)) => Ok(n.as_f64()),
            Some(Json::String(s)) => {
                let q = Quantity::parse(s).map_err(|e| self.err(key, e))?;
                q.to_str(unit).map(Some).map_err(|e| self.err(key, e))
            }
            Some(_) => Err(self.err(key, format!("must be a number or a quantity in {unit}"))),
        }
    }

    fn req_quantity(&mut self, key: &'a str, unit: &str) -> Result<f64> {
        self.quantity(key, unit, None)?.ok_or_else(|| self.err(key, "is required"))
    }

    fn usize(&mut self, key: &'a str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_u64().map(|x| x as usize).ok_or_else(|| self.err(key, "must be a non-negative integer")),
        }
    }

    fn bool(&mut self, key: &'a str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| self.err(key, "must be a boolean")),
        }
    }

    fn str(&mut self, key: &'a str, default: &str) -> Result<String> {
        match self.get(key) {
            None => Ok(default.to_string()),
            Some(v) => v.as_str().map(String::from).ok_or_else(|| self.err(key, "must be a string")),
        }
    }

    fn strings(&mut self, key: &'a str) -> Result<Option<Vec<String>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Json::String(s)) => Ok(Some(vec![s.clone()])),
            Some(Json::Array(a)) => a
                .iter()
                .map(|x| x.as_str().map(String::from).ok_or_else(|| self.err(key, "must hold strings")))
                .collect::<Result<_>>()
                .map(Some),
            Some(_) => Err(self.err(key, "must be a string or a list of strings")),
        }
    }

    fn f64s(&mut self, key: &'a str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(Json::Array(a)) => a.iter().map(|x| x.as_f64().ok_or_else(|| self.err(key, "must hold numbers"))).collect(),
            Some(_) => Err(self.err(key, "must be a list of numbers")),
        }
    }

    fn sub(&mut self, key: &'a str) -> Result<Option<&'a Map<String, Json>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Json::Object(m)) => Ok(Some(m)),
            Some(_) => Err(self.err(key, "must be a mapping")),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().find(|k| !self.used.contains(k.as_str())) {
            Some(k) => Err(Error::Config(format!("{}: unknown parameter {k:?}", self.op))),
            None => Ok(()),
        }
    }
}

fn reduction(s: &str) -> Result<Reduction> {
    match s {
        "all" => Ok(Reduction::All),
        "any" => Ok(Reduction::Any),
        _ => Err(Error::Config(format!("reduction must be \"all\" or \"any\", got {s:?}"))),
    }
}

fn extinction(name: &str) -> Result<ExtinctionTable> {
    match name {
        "prahl" => Ok(ExtinctionTable::prahl()),
        _ => Err(Error::Config(format!("unknown extinction table {name:?}"))),
    }
}

fn parse_basis(m: Option<&Map<String, Json>>) -> Result<Basis> {
    let Some(m) = m else {
        return Ok(Basis::Gamma { tau: 0.0, sigma: 3.0, t: 0.0 });
    };
    let mut p = Params::new("fit_glm.basis", m);
    let b = match p.str("type", "gamma")?.as_str() {
        "gamma" => Basis::Gamma {
            tau: p.quantity("tau", "s", Some(0.0))?.unwrap_or(0.0),
            sigma: p.quantity("sigma", "s", Some(3.0))?.unwrap_or(3.0),
            t: p.quantity("T", "s", Some(0.0))?.unwrap_or(0.0),
        },
        "gaussian_kernels" => Basis::GaussianKernels {
            t_pre: p.req_quantity("t_pre", "s")?,
            t_post: p.req_quantity("t_post", "s")?,
            t_delta: p.req_quantity("t_delta", "s")?,
            t_std: p.req_quantity("t_std", "s")?,
        },
        other => return Err(Error::Config(format!("fit_glm: unknown basis type {other:?}"))),
    };
    p.finish()?;
    b.validate()?;
    Ok(b)
}

fn parse_drift(m: Option<&Map<String, Json>>) -> Result<Option<Drift>> {
    let Some(m) = m else {
        return Ok(Some(Drift::Poly { order: 1 }));
    };
    let mut p = Params::new("fit_glm.drift", m);
    let d = match p.str("type", "poly")?.as_str() {
        "none" => None,
        "poly" => Some(Drift::Poly { order: p.usize("order", 1)? }),
        "cosine" => Some(Drift::Cosine { fmax: p.req_quantity("fmax", "Hz")? }),
        other => return Err(Error::Config(format!("fit_glm: unknown drift type {other:?}"))),
    };
    p.finish()?;
    Ok(d)
}

fn parse_noise(s: &str, order: usize) -> Result<NoiseModel> {
    match s {
        "ols" => Ok(NoiseModel::Ols),
        "ar_gls" | "ar_irls" => Ok(NoiseModel::ArGls { p: order }),
        _ => Err(Error::Config(format!("fit_glm: unknown noise_model {s:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Int2Od,
    Od2Conc { dpf: Vec<f64>, ext: ExtinctionTable },
    Tddr,
    FreqFilter { fmin: f64, fmax: f64, order: usize },
    Sci { window_length: f64, threshold: f64 },
    Psp { window_length: f64, threshold: f64 },
    Snr { threshold: f64 },
    Gvtd { threshold: Option<f64> },
    Prune { flag: Reduction },
    BlockAverage { trial_types: Option<Vec<String>>, before: f64, after: f64, baseline: bool },
    FitGlm { basis: Basis, drift: Option<Drift>, noise: NoiseModel },
    Reconstruct { cfg: ImageReconConfig, ext: ExtinctionTable },
    InjectArtifacts { fraction: f64, types: Vec<String>, mode: ScaleMode, scale: f64 },
}

pub const OPS: [&str; 13] = [
    "int2od",
    "od2conc",
    "tddr",
    "freq_filter",
    "sci",
    "psp",
    "snr",
    "gvtd",
    "prune",
    "block_average",
    "fit_glm",
    "reconstruct",
    "inject_artifacts",
];

/// Declared inputs: fixed slots, then an optional variadic tail.
pub struct Signature {
    pub inputs: &'static [Ty],
    pub variadic: Option<Ty>,
    /// Output types; the first `min_out` are required.
    pub outputs: &'static [Ty],
    pub min_out: usize,
}

impl Step {
    pub fn parse(op: &str, params: &Map<String, Json>) -> Result<Step> {
        let mut p = Params::new(op, params);
        let step = match op {
            "int2od" => Step::Int2Od,
            "od2conc" => Step::Od2Conc { dpf: p.f64s("dpf", &[6.0, 6.0])?, ext: extinction(&p.str("extinction", "prahl")?)? },
            "tddr" => Step::Tddr,
            "freq_filter" => Step::FreqFilter {
                fmin: p.quantity("fmin", "Hz", Some(0.0))?.unwrap_or(0.0),
                fmax: p.quantity("fmax", "Hz", Some(0.0))?.unwrap_or(0.0),
                order: p.usize("order", 4)?,
            },
            "sci" => Step::Sci {
                window_length: p.quantity("window_length", "s", Some(10.0))?.unwrap_or(10.0),
                threshold: p.f64("threshold", 0.75)?,
            },
            "psp" => Step::Psp {
                window_length: p.quantity("window_length", "s", Some(10.0))?.unwrap_or(10.0),
                threshold: p.f64("threshold", 0.03)?,
            },
            "snr" => Step::Snr { threshold: p.f64("threshold", 10.0)? },
            "gvtd" => Step::Gvtd { threshold: p.get("threshold").map(|v| v.as_f64().ok_or_else(|| Error::Config("gvtd: threshold must be a number".into()))).transpose()? },
            "prune" => Step::Prune { flag: reduction(&p.str("flag", "all")?)? },
            "block_average" => Step::BlockAverage {
                trial_types: p.strings("trial_types")?,
                before: p.quantity("before", "s", Some(5.0))?.unwrap_or(5.0),
                after: p.quantity("after", "s", Some(30.0))?.unwrap_or(30.0),
                baseline: p.bool("baseline", true)?,
            },
            "fit_glm" => {
                let basis = parse_basis(p.sub("basis")?)?;
                let drift = parse_drift(p.sub("drift")?)?;
                let order = p.usize("ar_order", 10)?;
                Step::FitGlm { basis, drift, noise: parse_noise(&p.str("noise_model", "ols")?, order)? }
            }
            "reconstruct" => {
                let mode = match p.str("recon_mode", "mua2conc")?.as_str() {
                    "mua2conc" => ReconMode::Mua2Conc,
                    "direct" => ReconMode::Direct,
                    m => return Err(Error::Config(format!("reconstruct: unknown recon_mode {m:?}"))),
                };
                let cfg = ImageReconConfig {
                    recon_mode: mode,
                    brain_only: p.bool("brain_only", false)?,
                    alpha_meas: p.f64("alpha_meas", 0.01)?,
                    alpha_spatial: p.get("alpha_spatial").map(|v| v.as_f64().ok_or_else(|| Error::Config("reconstruct: alpha_spatial must be a number".into()))).transpose()?,
                    ..ImageReconConfig::default()
                };
                cfg.validate()?;
                Step::Reconstruct { cfg, ext: extinction(&p.str("extinction", "prahl")?)? }
            }
            "inject_artifacts" => {
                let types = p.strings("types")?.unwrap_or_else(|| vec!["spike".into(), "bl_shift".into()]);
                let gens = Generators::default();
                for t in &types {
                    gens.get(t).map_err(|e| Error::Config(format!("inject_artifacts: {e}")))?;
                }
                let mode = match p.str("mode", "auto")?.as_str() {
                    "auto" => ScaleMode::Auto,
                    "manual" => ScaleMode::Manual,
                    m => return Err(Error::Config(format!("inject_artifacts: unknown mode {m:?}"))),
                };
                let fraction = p.f64("fraction", 0.05)?;
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(Error::Config(format!("inject_artifacts: fraction {fraction} outside [0, 1]")));
                }
                Step::InjectArtifacts { fraction, types, mode, scale: p.f64("scale", 1.0)? }
            }
            _ => return Err(Error::Config(format!("unknown op {op:?}; known ops: {}", OPS.join(", ")))),
        };
        p.finish()?;
        Ok(step)
    }

    pub fn signature(&self) -> Signature {
        use Ty::*;
        let (inputs, variadic, outputs, min_out): (&'static [Ty], Option<Ty>, &'static [Ty], usize) = match self {
            Step::Int2Od | Step::Tddr | Step::FreqFilter { .. } => (&[Series], None, &[Series], 1),
            Step::Od2Conc { .. } => (&[Series, Geo], None, &[Series], 1),
            Step::Sci { .. } | Step::Psp { .. } | Step::Snr { .. } | Step::Gvtd { .. } => (&[Series], None, &[Mask, Tensor], 1),
            Step::Prune { .. } => (&[Series, Mask], Some(Mask), &[Series], 1),
            Step::BlockAverage { .. } => (&[Series, Stim], None, &[Tensor], 1),
            Step::FitGlm { .. } => (&[Series, Stim], None, &[Fit], 1),
            Step::Reconstruct { .. } => (&[Series, Sens], None, &[Tensor], 1),
            Step::InjectArtifacts { .. } => (&[Series], None, &[Series, Stim], 1),
        };
        Signature { inputs, variadic, outputs, min_out }
    }

    /// Runs the step; `seed` feeds the seeded ops. Returns one value per
    /// declared output slot (`n_out` of them) plus notes for the report.
    pub fn run(&self, inputs: &[&Value], n_out: usize, seed: u64) -> Result<(Vec<Value>, Vec<String>)> {
        let t0 = || inputs[0].tensor();
        let mut notes = Vec::new();
        let mut out = match self {
            Step::Int2Od => vec![Value::Series(preproc::int2od(t0())?)],
            Step::Od2Conc { dpf, ext } => {
                let Value::Geo(g) = inputs[1] else { unreachable!() };
                vec![Value::Series(preproc::od2conc(t0(), g, dpf, ext)?)]
            }
            Step::Tddr => vec![Value::Series(preproc::tddr(t0())?)],
            Step::FreqFilter { fmin, fmax, order } => vec![Value::Series(preproc::freq_filter(t0(), *fmin, *fmax, *order)?)],
            Step::Sci { window_length, threshold } => {
                let (m, mask) = quality::sci(t0(), *window_length, *threshold)?;
                vec![Value::Mask(mask), Value::Tensor(m.metric)]
            }
            Step::Psp { window_length, threshold } => {
                let (m, mask) = quality::psp(t0(), *window_length, *threshold)?;
                vec![Value::Mask(mask), Value::Tensor(m.metric)]
            }
            Step::Snr { threshold } => {
                let (m, mask) = quality::snr(t0(), *threshold)?;
                vec![Value::Mask(mask), Value::Tensor(m)]
            }
            Step::Gvtd { threshold } => {
                let g = quality::gvtd(t0(), *threshold)?;
                notes.push(format!("gvtd threshold {}", g.threshold));
                vec![Value::Mask(g.mask), Value::Tensor(g.metric)]
            }
            Step::Prune { flag } => {
                let masks: Vec<&LabeledTensor> = inputs[1..].iter().map(|v| v.tensor()).collect();
                let (ts, dropped) = quality::prune_channels(t0(), &masks, *flag)?;
                if !dropped.is_empty() {
                    notes.push(format!("dropped channels: {}", dropped.join(", ")));
                }
                vec![Value::Series(ts)]
            }
            Step::BlockAverage { trial_types, before, after, baseline } => {
                let Value::Stim(stim) = inputs[1] else { unreachable!() };
                let tts = match trial_types {
                    Some(t) => t.clone(),
                    None => {
                        let mut t: Vec<String> = stim.rows.iter().map(|r| r.trial_type.clone()).collect();
                        t.sort();
                        t.dedup();
                        t
                    }
                };
                let ep = preproc::to_epochs(t0(), stim, &tts, *before, *after)?;
                if ep.skipped > 0 {
                    notes.push(format!("{} epochs outside the record skipped", ep.skipped));
                }
                let ep = if *baseline { preproc::baseline_correct(&ep.tensor)? } else { ep.tensor };
                vec![Value::Tensor(preproc::block_average(&ep)?)]
            }
            Step::FitGlm { basis, drift, noise } => {
                let Value::Stim(stim) = inputs[1] else { unreachable!() };
                let ts = t0();
                let mut dm: DesignMatrix = glm::hrf_regressors(ts, stim, basis)?;
                if let Some(d) = drift {
                    dm = dm.combine(&glm::drift_regressors(ts, *d)?)?;
                }
                vec![Value::Fit(Box::new(glm::fit(ts, &dm, *noise)?))]
            }
            Step::Reconstruct { cfg, ext } => {
                let Value::Sens(a) = inputs[1] else { unreachable!() };
                let op = assemble_inverse_operator(a, cfg, ext)?;
                vec![Value::Tensor(reconstruct(&op, t0())?)]
            }
            Step::InjectArtifacts { fraction, types, mode, scale } => {
                let ts = t0();
                let time = ts.coord_f64("time")?;
                let channels = ts.coord_str("channel")?.to_vec();
                let timing = random_events_perc(time, *fraction, types, &channels, seed)?;
                let aug = add_artifacts(ts, &timing, &Generators::default(), *mode, *scale)?;
                vec![Value::Series(aug), Value::Stim(timing)]
            }
        };
        out.truncate(n_out);
        Ok((out, notes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn params(v: Json) -> Map<String, Json> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn every_op_parses_with_defaults() {
        for op in OPS {
            let s = Step::parse(op, &Map::new()).unwrap();
            let sig = s.signature();
            assert!(sig.min_out >= 1 && sig.min_out <= sig.outputs.len(), "{op}");
        }
    }

    #[test]
    fn quantities_and_unknown_keys() {
        let s = Step::parse("freq_filter", &params(json!({"fmin": "0.01 Hz", "fmax": 0.5}))).unwrap();
        assert_eq!(s, Step::FreqFilter { fmin: 0.01, fmax: 0.5, order: 4 });
        assert!(matches!(Step::parse("freq_filter", &params(json!({"fmn": 1}))), Err(Error::Config(_))));
        assert!(matches!(Step::parse("freq_filter", &params(json!({"fmin": "3 mm"}))), Err(Error::Config(_))));
        assert!(matches!(Step::parse("nope", &Map::new()), Err(Error::Config(_))));
        assert!(matches!(Step::parse("inject_artifacts", &params(json!({"types": ["wobble"]}))), Err(Error::Config(_))));
    }

    #[test]
    fn glm_basis_parsing() {
        let s = Step::parse(
            "fit_glm",
            &params(json!({"basis": {"type": "gaussian_kernels", "t_pre": "2 s", "t_post": 15, "t_delta": 1.5, "t_std": 2},
                           "drift": {"type": "cosine", "fmax": "0.02 Hz"}, "noise_model": "ar_irls", "ar_order": 3})),
        )
        .unwrap();
        let Step::FitGlm { basis, drift, noise } = s else { panic!() };
        assert_eq!(basis.n_components(), 11);
        assert_eq!(drift, Some(Drift::Cosine { fmax: 0.02 }));
        assert_eq!(noise, NoiseModel::ArGls { p: 3 });
    }

    #[test]
    fn type_slots() {
        assert!(Ty::Series.fits(Ty::Tensor));
        assert!(Ty::Mask.fits(Ty::Tensor));
        assert!(!Ty::Tensor.fits(Ty::Series));
        assert!(!Ty::Stim.fits(Ty::Tensor));
    }
}
