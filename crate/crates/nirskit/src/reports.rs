//! CSV reports: GLM betas and per-channel quality.

use nirskit_core::glm::FitResult;
use nirskit_core::quality::{psp, sci, snr, CLEAN};
use nirskit_core::{CoordValues, LabeledTensor, Logic};

use crate::error::{Error, Result};

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// `channel,<signal>,regressor,beta,stderr,unit` with one row per coefficient.
pub fn write_betas_csv(fit: &FitResult) -> Result<String> {
    let p = &fit.params;
    let sdim = p.dims()[1].clone();
    let channels = p.coord_str("channel")?;
    let signal: Vec<String> = match p.coord(&sdim) {
        Some(c) => match &c.values {
            CoordValues::Str(v) => v.clone(),
            CoordValues::F64(v) => v.iter().map(f64::to_string).collect(),
            CoordValues::I64(v) => v.iter().map(i64::to_string).collect(),
            CoordValues::Bool(v) => v.iter().map(bool::to_string).collect(),
        },
        None => (0..p.shape()[1]).map(|i| i.to_string()).collect(),
    };
    let regs = fit.regressors();
    let unit = p.unit().to_string();
    let mut rows = vec![vec!["channel".into(), sdim, "regressor".into(), "beta".into(), "stderr".into(), "unit".into()]];
    for (c, ch) in channels.iter().enumerate() {
        for (s, sig) in signal.iter().enumerate() {
            let beta = fit.beta(c, s);
            let cov = fit.cov_matrix(c, s);
            for (r, reg) in regs.iter().enumerate() {
                rows.push(vec![
                    ch.clone(),
                    sig.clone(),
                    reg.clone(),
                    beta[r].to_string(),
                    cov[(r, r)].max(0.0).sqrt().to_string(),
                    unit.clone(),
                ]);
            }
        }
    }
    csv_string(rows)
}

fn clean_fraction(mask: &LabeledTensor, ch: usize) -> Result<f64> {
    let m = mask.transpose(&["channel", "time"])?;
    let n = m.shape()[1];
    let lane = &m.data()[ch * n..(ch + 1) * n];
    Ok(lane.iter().filter(|&&x| x == CLEAN).count() as f64 / n.max(1) as f64)
}

/// Per-channel SNR (worst wavelength) and clean-window fractions of SCI, PSP
/// and their conjunction, with the default thresholds.
pub fn quality_report(amp: &LabeledTensor) -> Result<String> {
    let (snr_v, _) = snr(amp, 10.0)?;
    let (_, sci_mask) = sci(amp, 10.0, 0.75)?;
    let (_, psp_mask) = psp(amp, 10.0, 0.03)?;
    let both = sci_mask.logical(&psp_mask, Logic::And)?;
    let s = snr_v.transpose(&["channel", "wavelength"])?;
    let nl = s.shape()[1];
    let mut rows = vec![["channel", "snr_min", "sci_clean", "psp_clean", "sci_psp_clean"].map(String::from).to_vec()];
    for (c, ch) in amp.coord_str("channel")?.iter().enumerate() {
        let worst = s.data()[c * nl..(c + 1) * nl].iter().fold(f64::INFINITY, |a, &b| a.min(b));
        rows.push(vec![
            ch.clone(),
            worst.to_string(),
            clean_fraction(&sci_mask, c)?.to_string(),
            clean_fraction(&psp_mask, c)?.to_string(),
            clean_fraction(&both, c)?.to_string(),
        ]);
    }
    csv_string(rows)
}

/// Generic CSV from a header and string rows.
pub fn table_csv(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut all = vec![header.iter().map(|s| s.to_string()).collect()];
    all.extend(rows);
    csv_string(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{synthetic_recording, FixtureConfig};

    #[test]
    fn quality_report_has_a_row_per_channel() {
        let rec = synthetic_recording(&FixtureConfig { duration: 60.0, ..FixtureConfig::default() }).unwrap();
        let text = quality_report(rec.timeseries.get("amp").unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "channel,snr_min,sci_clean,psp_clean,sci_psp_clean");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("S1D1,"));
    }
}
