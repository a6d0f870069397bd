//! Event-locked segmentation, baseline removal and block averaging.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::recording::StimTable;
use crate::signal::sampling_rate;
use crate::tensor::{Coord, LabeledTensor, Reduction};

/// Epochs with dims `(epoch, …, reltime)` and the number of events skipped
/// because their window left the recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Epochs {
    pub tensor: LabeledTensor,
    pub skipped: usize,
}

/// Index of the sample nearest to `t`; ties go to the earlier sample.
pub fn nearest_index(time: &[f64], t: f64) -> usize {
    let j = time.partition_point(|&x| x < t);
    if j == 0 {
        0
    } else if j == time.len() {
        time.len() - 1
    } else if (time[j] - t) < (t - time[j - 1]) {
        j
    } else {
        j - 1
    }
}

/// Cuts `[onset − before, onset + after]` windows around every event of the
/// requested trial types, ordered by onset. The window spans
/// `round(before·fs) + round(after·fs) + 1` samples on a shared grid.
pub fn to_epochs(ts: &LabeledTensor, stim: &StimTable, trial_types: &[String], before: f64, after: f64) -> Result<Epochs> {
    if !(before >= 0.0 && after >= 0.0) {
        return Err(Error::BadParam("before/after must be non-negative".into()));
    }
    let time = ts.coord_f64("time")?.to_vec();
    let fs = sampling_rate(&time)?;
    let nb = libm::round(before * fs) as usize;
    let na = libm::round(after * fs) as usize;
    let len = nb + na + 1;
    let mut parts = Vec::new();
    let mut types = Vec::new();
    let mut onsets = Vec::new();
    let mut skipped = 0;
    for ev in stim.sorted_by_onset().rows.iter().filter(|e| trial_types.contains(&e.trial_type)) {
        let i = nearest_index(&time, ev.onset);
        if i < nb || i + na >= time.len() || ev.onset < time[0] || ev.onset > time[time.len() - 1] {
            skipped += 1;
            continue;
        }
        let idx: Vec<usize> = (i - nb..i - nb + len).collect();
        parts.push(ts.isel("time", &idx)?.without_coord("time"));
        types.push(ev.trial_type.clone());
        onsets.push(ev.onset);
    }
    if parts.is_empty() {
        return Err(Error::NoMatchingEvents);
    }
    let dt = 1.0 / fs;
    let reltime: Vec<f64> = (0..len).map(|k| (k as f64 - nb as f64) * dt).collect();
    let stacked = LabeledTensor::stack(
        &parts,
        "epoch",
        vec![Coord::strings("trial_type", "epoch", types), Coord::f64("onset", "epoch", onsets)],
    )?;
    let stacked = stacked.rename_dim("time", "reltime")?.with_coord(Coord::f64("reltime", "reltime", reltime))?;
    Ok(Epochs { tensor: stacked, skipped })
}

/// Subtracts per-epoch means over `reltime < 0`; unchanged without a pre-onset part.
pub fn baseline_correct(ep: &LabeledTensor) -> Result<LabeledTensor> {
    let rt = ep.coord_f64("reltime")?.to_vec();
    let pre: Vec<usize> = (0..rt.len()).filter(|&i| rt[i] < 0.0).collect();
    if pre.is_empty() {
        return Ok(ep.clone());
    }
    ep.map_lanes("reltime", rt.len(), vec![], |lane, out| {
        let m = pre.iter().map(|&i| lane[i]).sum::<f64>() / pre.len() as f64;
        for (o, &v) in out.iter_mut().zip(lane) {
            *o = v - m;
        }
        Ok(())
    })
}

/// Mean over epochs per trial type, lexicographically ordered, as a new
/// leading `trial_type` dim.
pub fn block_average(ep: &LabeledTensor) -> Result<LabeledTensor> {
    let tt = ep.coord_str("trial_type")?.to_vec();
    let mut kinds = tt.clone();
    kinds.sort();
    kinds.dedup();
    let mut parts = Vec::with_capacity(kinds.len());
    for k in &kinds {
        let idx: Vec<usize> = (0..tt.len()).filter(|&i| &tt[i] == k).collect();
        parts.push(ep.isel("epoch", &idx)?.reduce("epoch", Reduction::Mean)?);
    }
    LabeledTensor::stack(&parts, "trial_type", vec![Coord::strings("trial_type", "trial_type", kinds)])
}

/// Trial types in an epoch tensor, in epoch order.
pub fn epoch_trial_types(ep: &LabeledTensor) -> Result<Vec<String>> {
    Ok(ep.coord_str("trial_type")?.iter().map(|s| s.to_string()).collect())
}
