//! Recording container types: probe geometry, stimulus tables and the
//! named collections of time series.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Coord, LabeledTensor};
use crate::units::Unit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointType {
    Source,
    Detector,
    Landmark,
    Unknown,
}

impl PointType {
    pub fn as_str(self) -> &'static str {
        match self {
            PointType::Source => "SOURCE",
            PointType::Detector => "DETECTOR",
            PointType::Landmark => "LANDMARK",
            PointType::Unknown => "UNKNOWN",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "SOURCE" => PointType::Source,
            "DETECTOR" => PointType::Detector,
            "LANDMARK" => PointType::Landmark,
            "UNKNOWN" => PointType::Unknown,
            _ => return Err(Error::Parse(alloc::format!("point type `{s}`"))),
        })
    }
}

/// Labeled 3-D points in a named coordinate reference system.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoints {
    labels: Vec<String>,
    types: Vec<PointType>,
    crs: String,
    positions: Vec<[f64; 3]>,
    unit: Unit,
}

impl LabeledPoints {
    pub fn new(labels: Vec<String>, types: Vec<PointType>, crs: &str, positions: Vec<[f64; 3]>, unit: Unit) -> Result<Self> {
        if labels.len() != types.len() || labels.len() != positions.len() {
            return Err(Error::DimMismatch("labels, types and positions differ in length".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::BadParam(alloc::format!("duplicate point label `{l}`")));
            }
        }
        if crs.is_empty() {
            return Err(Error::BadParam("empty crs".into()));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::BadParam("non-finite point position".into()));
        }
        if unit.dimension() != Unit::parse("m")?.dimension() {
            return Err(Error::UnitMismatch(unit.to_string(), "m".into()));
        }
        Ok(LabeledPoints { labels, types, crs: crs.to_string(), positions, unit })
    }

    pub fn empty() -> Self {
        LabeledPoints {
            labels: Vec::new(),
            types: Vec::new(),
            crs: "unknown".into(),
            positions: Vec::new(),
            unit: Unit::parse("mm").expect("registered"),
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn types(&self) -> &[PointType] {
        &self.types
    }

    pub fn crs(&self) -> &str {
        &self.crs
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn unit(&self) -> &Unit {
        &self.unit
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn position(&self, label: &str) -> Result<[f64; 3]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.positions[i])
            .ok_or_else(|| Error::MissingOptode(label.to_string()))
    }

    /// Euclidean distance between two labeled points, in this set's unit.
    pub fn distance(&self, a: &str, b: &str) -> Result<f64> {
        let (p, q) = (self.position(a)?, self.position(b)?);
        Ok(libm::sqrt((0..3).map(|i| (p[i] - q[i]) * (p[i] - q[i])).sum()))
    }

    /// Tensor view with dims `(label, <crs>)`.
    pub fn to_tensor(&self) -> Result<LabeledTensor> {
        let data = self.positions.iter().flatten().copied().collect();
        LabeledTensor::new(
            alloc::vec!["label".into(), self.crs.clone()],
            alloc::vec![self.len(), 3],
            data,
            alloc::vec![
                Coord::strings("label", "label", self.labels.clone()),
                Coord::strings("type", "label", self.types.iter().map(|t| t.as_str().to_string()).collect()),
            ],
            self.unit.clone(),
        )
    }

    pub fn from_tensor(t: &LabeledTensor) -> Result<Self> {
        if t.dims().len() != 2 || t.dims()[0] != "label" || t.shape()[1] != 3 {
            return Err(Error::DimMismatch("points tensor must be (label, crs) with 3 columns".into()));
        }
        let labels = t.coord_str("label")?.to_vec();
        let types = t.coord_str("type")?.iter().map(|s| PointType::parse(s)).collect::<Result<_>>()?;
        let positions = t.data().chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        LabeledPoints::new(labels, types, &t.dims()[1], positions, t.unit().clone())
    }
}

/// One stimulus or artifact event.
#[derive(Debug, Clone, PartialEq)]
pub struct StimEvent {
    pub onset: f64,
    pub duration: f64,
    pub value: f64,
    pub trial_type: String,
    /// Affected channels; `None` or an empty list means all channels.
    pub channels: Option<Vec<String>>,
}

impl StimEvent {
    pub fn new(onset: f64, duration: f64, value: f64, trial_type: &str) -> Self {
        StimEvent { onset, duration, value, trial_type: trial_type.to_string(), channels: None }
    }

    pub fn applies_to(&self, channel: &str) -> bool {
        match &self.channels {
            None => true,
            Some(c) if c.is_empty() => true,
            Some(c) => c.iter().any(|x| x == channel),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StimTable {
    pub rows: Vec<StimEvent>,
}

impl StimTable {
    pub fn new(rows: Vec<StimEvent>) -> Result<Self> {
        for r in &rows {
            if !(r.onset >= 0.0) || !(r.duration >= 0.0) {
                return Err(Error::BadParam(alloc::format!("event at {} has negative onset or duration", r.onset)));
            }
        }
        Ok(StimTable { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows ordered by onset; ties keep their original order.
    pub fn sorted_by_onset(&self) -> StimTable {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| a.onset.total_cmp(&b.onset));
        StimTable { rows }
    }

    /// Distinct trial types in lexicographic order.
    pub fn trial_types(&self) -> Vec<String> {
        let mut v: Vec<String> = self.rows.iter().map(|r| r.trial_type.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn of_type(&self, trial_type: &str) -> impl Iterator<Item = &StimEvent> + '_ {
        let tt = trial_type.to_string();
        self.rows.iter().filter(move |r| r.trial_type == tt)
    }

    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.rows.iter().filter(|r| r.trial_type.starts_with(prefix)).count()
    }

    /// Replaces mapped trial-type labels, keeping row order.
    ///
    /// In strict mode every mapping key must occur in the table.
    pub fn rename_events(&self, mapping: &BTreeMap<String, String>, strict: bool) -> Result<StimTable> {
        if strict {
            if let Some(k) = mapping.keys().find(|k| !self.rows.iter().any(|r| &r.trial_type == *k)) {
                return Err(Error::UnknownTrialType(k.clone()));
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                if let Some(new) = mapping.get(&r.trial_type) {
                    r.trial_type = new.clone();
                }
                r
            })
            .collect();
        Ok(StimTable { rows })
    }
}

/// Insertion-ordered map from names to values.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedMap<V> {
    entries: Vec<(String, V)>,
}

impl<V> Default for OrderedMap<V> {
    fn default() -> Self {
        OrderedMap { entries: Vec::new() }
    }
}

impl<V> OrderedMap<V> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces; a replaced entry keeps its position.
    pub fn insert(&mut self, name: &str, value: V) -> Option<V> {
        match self.entries.iter_mut().find(|(k, _)| k == name) {
            Some(slot) => Some(core::mem::replace(&mut slot.1, value)),
            None => {
                self.entries.push((name.to_string(), value));
                None
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&V> {
        self.entries.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    pub fn remove(&mut self, name: &str) -> Option<V> {
        let i = self.entries.iter().position(|(k, _)| k == name)?;
        Some(self.entries.remove(i).1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &V)> {
        self.entries.iter().map(|(k, v)| (k, v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.entries.iter().map(|(k, _)| k)
    }

    pub fn values(&self) -> impl Iterator<Item = &V> {
        self.entries.iter().map(|(_, v)| v)
    }
}

/// Named time series with probe geometry, events and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub timeseries: OrderedMap<LabeledTensor>,
    pub geo3d: LabeledPoints,
    pub stim: StimTable,
    pub aux_ts: OrderedMap<LabeledTensor>,
    pub masks: OrderedMap<LabeledTensor>,
    pub meta: BTreeMap<String, String>,
}

impl Default for Recording {
    fn default() -> Self {
        Recording {
            timeseries: OrderedMap::new(),
            geo3d: LabeledPoints::empty(),
            stim: StimTable::default(),
            aux_ts: OrderedMap::new(),
            masks: OrderedMap::new(),
            meta: BTreeMap::new(),
        }
    }
}

impl Recording {
    /// Checks the channel layout of every series that has a channel dim.
    pub fn validate(&self) -> Result<()> {
        for (name, ts) in self.timeseries.iter() {
            if !ts.has_dim("channel") {
                continue;
            }
            if !ts.has_dim("time") {
                return Err(Error::UnknownDim(alloc::format!("{name}: time")));
            }
            for c in ["channel", "source", "detector"] {
                match ts.coord(c) {
                    Some(coord) if coord.dim == "channel" => {}
                    _ => return Err(Error::UnknownCoord(alloc::format!("{name}: {c}"))),
                }
            }
        }
        for (name, m) in self.masks.iter() {
            for c in m.coords() {
                for ts in self.timeseries.values() {
                    if let Some(tc) = ts.coord(&c.name) {
                        if tc.dim == c.dim && tc.values.len() == c.values.len() && !tc.values.identical(&c.values) {
                            return Err(Error::CoordMismatch(alloc::format!("mask {name}: {}", c.name)));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Channel label convention `S<i>D<j>`.
pub fn channel_label(source: &str, detector: &str) -> String {
    alloc::format!("{source}{detector}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(types: &[&str]) -> StimTable {
        StimTable::new(types.iter().enumerate().map(|(i, t)| StimEvent::new(i as f64, 1.0, 1.0, t)).collect()).unwrap()
    }

    #[test]
    fn rename_replaces_only_mapped() {
        let t = table(&["1", "2", "3", "2"]);
        let mut m = BTreeMap::new();
        m.insert("2".to_string(), "FTapping/Left".to_string());
        let r = t.rename_events(&m, true).unwrap();
        let got: Vec<&str> = r.rows.iter().map(|e| e.trial_type.as_str()).collect();
        assert_eq!(got, ["1", "FTapping/Left", "3", "FTapping/Left"]);
        assert_eq!(t.rename_events(&BTreeMap::new(), true).unwrap(), t);
    }

    #[test]
    fn rename_strict_unknown() {
        let t = table(&["1"]);
        let mut m = BTreeMap::new();
        m.insert("9".to_string(), "x".to_string());
        assert!(matches!(t.rename_events(&m, true), Err(Error::UnknownTrialType(_))));
        assert_eq!(t.rename_events(&m, false).unwrap(), t);
    }

    #[test]
    fn prefix_count_after_rename() {
        let mut types = Vec::new();
        for (code, n) in [("1", 65), ("2", 16), ("3", 16), ("4", 17), ("5", 16)] {
            types.extend(core::iter::repeat(code).take(n));
        }
        let t = table(&types);
        let mut m = BTreeMap::new();
        for (k, v) in [
            ("1", "Rest"),
            ("2", "FTapping/Left"),
            ("3", "FTapping/Right"),
            ("4", "BallSqueezing/Left"),
            ("5", "BallSqueezing/Right"),
        ] {
            m.insert(k.to_string(), v.to_string());
        }
        assert_eq!(t.rename_events(&m, true).unwrap().count_prefix("BallSqueezing"), 33);
    }

    #[test]
    fn points_distance_and_tensor_round_trip() {
        let p = LabeledPoints::new(
            alloc::vec!["S1".into(), "D1".into()],
            alloc::vec![PointType::Source, PointType::Detector],
            "digitized",
            alloc::vec![[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]],
            Unit::parse("mm").unwrap(),
        )
        .unwrap();
        assert_eq!(p.distance("S1", "D1").unwrap(), 5.0);
        assert!(matches!(p.distance("S1", "D9"), Err(Error::MissingOptode(_))));
        assert_eq!(LabeledPoints::from_tensor(&p.to_tensor().unwrap()).unwrap(), p);
    }

    #[test]
    fn negative_onset_rejected() {
        assert!(StimTable::new(alloc::vec![StimEvent::new(-1.0, 1.0, 1.0, "a")]).is_err());
    }
}
