//! Random stimulus and artifact timing tables.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::recording::{StimEvent, StimTable};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialOrder {
    Random,
    Alternating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimParams {
    pub max_time: f64,
    pub trial_types: Vec<String>,
    pub min_interval: f64,
    pub max_interval: f64,
    pub min_stim_dur: f64,
    pub max_stim_dur: f64,
    pub min_stim_value: f64,
    pub max_stim_value: f64,
    pub order: TrialOrder,
}

fn check_range(name: &str, lo: f64, hi: f64) -> Result<()> {
    if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::BadRange(alloc::format!("{name}: [{lo}, {hi}]")));
    }
    Ok(())
}

/// Sequential onsets: `onset₀ = U(interval)`, `onsetᵢ₊₁ = onsetᵢ + durᵢ + U(interval)`.
///
/// Generation stops at the first event that would end after `max_time`.
pub fn build_stim_df(p: &StimParams, seed: u64) -> Result<StimTable> {
    check_range("interval", p.min_interval, p.max_interval)?;
    check_range("duration", p.min_stim_dur, p.max_stim_dur)?;
    if !(p.max_stim_value >= p.min_stim_value) {
        return Err(Error::BadRange(alloc::format!("value: [{}, {}]", p.min_stim_value, p.max_stim_value)));
    }
    if p.trial_types.is_empty() {
        return Err(Error::BadRange("no trial types".into()));
    }
    if p.max_interval == 0.0 && p.max_stim_dur == 0.0 {
        return Err(Error::BadRange("interval and duration are both zero".into()));
    }
    let mut rng = Rng::new(seed);
    let mut rows = Vec::new();
    let mut onset = rng.uniform_range(p.min_interval, p.max_interval);
    loop {
        let dur = rng.uniform_range(p.min_stim_dur, p.max_stim_dur);
        if onset + dur > p.max_time {
            break;
        }
        let value = rng.uniform_range(p.min_stim_value, p.max_stim_value);
        let tt = match p.order {
            TrialOrder::Random => &p.trial_types[rng.below(p.trial_types.len())],
            TrialOrder::Alternating => &p.trial_types[rows.len() % p.trial_types.len()],
        };
        rows.push(StimEvent::new(onset, dur, value, tt));
        onset += dur + rng.uniform_range(p.min_interval, p.max_interval);
    }
    StimTable::new(rows)
}

/// Events of one type from `(onset, duration)` pairs on `channels` (empty = all).
pub fn add_event_timing(events: &[(f64, f64)], trial_type: &str, channels: &[String]) -> Result<StimTable> {
    StimTable::new(
        events
            .iter()
            .map(|&(o, d)| StimEvent { channels: Some(channels.to_vec()), ..StimEvent::new(o, d, 1.0, trial_type) })
            .collect(),
    )
}

/// Random short events until their total duration reaches `fraction` of the record.
///
/// Durations are `U(0.1, 0.4)` s, onsets `U(0, T − dur)`, types uniform.
pub fn random_events_perc(
    time: &[f64],
    fraction: f64,
    types: &[String],
    channels: &[String],
    seed: u64,
) -> Result<StimTable> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::BadRange(alloc::format!("fraction {fraction}")));
    }
    if types.is_empty() {
        return Err(Error::BadRange("no artifact types".into()));
    }
    let (t0, t1) = match (time.first(), time.last()) {
        (Some(&a), Some(&b)) if b - a > 0.4 => (a, b),
        _ => return Err(Error::TooShort("time axis shorter than 0.4 s".into())),
    };
    let total = t1 - t0;
    let mut rng = Rng::new(seed);
    let mut rows = Vec::new();
    let mut acc = 0.0;
    while acc < fraction * total {
        let dur = rng.uniform_range(0.1, 0.4);
        let onset = t0 + rng.uniform_range(0.0, total - dur);
        let tt = &types[rng.below(types.len())];
        rows.push(StimEvent { channels: Some(channels.to_vec()), ..StimEvent::new(onset, dur, 1.0, tt) });
        acc += dur;
    }
    StimTable::new(rows)
}
