//! TDL-C power-delay profile: normalized tap table scaled by an RMS
//! delay spread and aggregated onto the sample grid.

use super::PowerDelayProfile;
use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Tap table shipped with the crate (see `data/tdl_c.txt` for the version
/// header). Two columns: normalized delay, power in dB.
const TDL_C_RAW: &str = include_str!("../../data/tdl_c.txt");

/// Parse a two-column delay/power table. Lines starting with `#` and
/// blank lines are skipped.
pub fn parse_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut taps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split_whitespace();
        let (Some(d), Some(p)) = (cols.next(), cols.next()) else {
            return Err(Error::InvalidParameter(format!(
                "tap table line {}: expected two columns",
                lineno + 1
            )));
        };
        let delay: f64 = d
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("tap table line {}: bad delay", lineno + 1)))?;
        let power: f64 = p
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("tap table line {}: bad power", lineno + 1)))?;
        if delay < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tap table line {}: negative delay",
                lineno + 1
            )));
        }
        taps.push((delay, power));
    }
    if taps.is_empty() {
        return Err(Error::InvalidParameter("empty tap table".into()));
    }
    Ok(taps)
}

/// The shipped TDL-C table: (normalized delay, power dB) rows.
pub fn tdlc_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| parse_table(TDL_C_RAW).expect("shipped TDL-C table parses"))
}

/// Build a normalized sampled PDP from the TDL-C model.
///
/// Tap delays are the normalized table values scaled by `rms_delay_ns`,
/// rounded to the nearest sample of `sample_rate_hz`; powers landing in
/// the same bin add in the linear domain and the result is renormalized
/// to unit total gain. Collapsing every tap into bin 0 (tiny delay spread
/// or low rate) is a legitimate single-tap channel, not an error.
pub fn tdlc_pdp(rms_delay_ns: f64, sample_rate_hz: f64) -> Result<PowerDelayProfile> {
    if rms_delay_ns <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "RMS delay spread must be positive, got {rms_delay_ns} ns"
        )));
    }
    if sample_rate_hz <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "sample rate must be positive, got {sample_rate_hz} Hz"
        )));
    }
    let table = tdlc_table();
    let max_bin = table
        .iter()
        .map(|&(d, _)| (d * rms_delay_ns * 1e-9 * sample_rate_hz).round() as usize)
        .max()
        .unwrap_or(0);
    let mut taps = vec![0.0; max_bin + 1];
    for &(delay, power_db) in table {
        let bin = (delay * rms_delay_ns * 1e-9 * sample_rate_hz).round() as usize;
        taps[bin] += 10f64.powf(power_db / 10.0);
    }
    let total: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= total;
    }
    PowerDelayProfile::new(taps)
}
