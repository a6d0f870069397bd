//! Stimulus tables as RFC 4180 CSV.
//!
//! Header `onset,duration,value,trial_type,channels`. The channels column
//! is optional on input; its cells hold `;`-joined labels, empty for all.

use std::path::Path;

use nirskit_core::{StimEvent, StimTable};

use crate::error::{Error, Result};

const HEADER: [&str; 5] = ["onset", "duration", "value", "trial_type", "channels"];

pub fn parse_stim_csv(text: &str) -> Result<StimTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h.trim() == name);
    let (Some(on), Some(du), Some(va), Some(tt)) = (col("onset"), col("duration"), col("value"), col("trial_type")) else {
        return Err(Error::Parse(format!("stim header must contain onset,duration,value,trial_type; got {header:?}")));
    };
    let ch = col("channels");
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let num = |j: usize, what: &str| -> Result<f64> {
            let cell = rec.get(j).unwrap_or("").trim();
            cell.parse::<f64>().map_err(|_| Error::Parse(format!("row {}: bad {what} {cell:?}", i + 1)))
        };
        let channels = match ch.and_then(|j| rec.get(j)).map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(s.split(';').map(|c| c.trim().to_string()).collect()),
        };
        rows.push(StimEvent {
            onset: num(on, "onset")?,
            duration: num(du, "duration")?,
            value: num(va, "value")?,
            trial_type: rec.get(tt).unwrap_or("").to_string(),
            channels,
        });
    }
    Ok(StimTable::new(rows)?)
}

pub fn read_stim_csv(path: &Path) -> Result<StimTable> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_stim_csv(&text)
}

pub fn format_stim_csv(stim: &StimTable) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(HEADER).map_err(|e| Error::Parse(e.to_string()))?;
    for r in &stim.rows {
        let channels = r.channels.as_ref().map(|c| c.join(";")).unwrap_or_default();
        w.write_record([
            r.onset.to_string(),
            r.duration.to_string(),
            r.value.to_string(),
            r.trial_type.clone(),
            channels,
        ])
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_stim_csv(stim: &StimTable, path: &Path) -> Result<()> {
    std::fs::write(path, format_stim_csv(stim)?).map_err(Error::io(path))
}
