//! Versioned JSON envelopes and CSV tables for command output.

use constmoran_core::significance::{CalibrationReport, TestReport, VarianceReport};
use serde::Serialize;

/// Bumped whenever a field is renamed or removed from a report.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    #[serde(flatten)]
    pub body: T,
}

pub fn to_json<T: Serialize>(command: &str, body: T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        body,
    })?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct MoranRow {
    pub variable: String,
    pub moran_i: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MoranBody {
    pub n_sites: usize,
    pub ranked: bool,
    pub results: Vec<MoranRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthBody {
    pub rows: usize,
    pub cols: usize,
    pub beta: f64,
    pub seed: u64,
    pub moran_i: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestBody {
    pub x: String,
    pub y: String,
    pub n_sites: usize,
    pub ranked: bool,
    /// Two-sided Student-t p-value, reported for Pearson only.
    pub naive_p_value: Option<f64>,
    pub report: TestReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceBody {
    pub numerator: String,
    pub denominator: String,
    pub n_sites: usize,
    pub report: VarianceReport,
}

pub fn moran_text(body: &MoranBody) -> String {
    let mut out = String::from("variable\tmoran_i\n");
    for row in &body.results {
        out.push_str(&format!("{}\t{:.6}\n", row.variable, row.moran_i));
    }
    out
}

pub fn test_text(body: &TestBody) -> String {
    let r = &body.report;
    let mut out = format!(
        "{} vs {} ({} sites)\nstatistic: {} = {:.6}\nmethod: {}\np-value: {:.6} ({} null values)\n",
        body.x,
        body.y,
        body.n_sites,
        r.stat,
        r.observed_stat,
        r.method.kind().name(),
        r.p_value,
        r.null_sample_count,
    );
    if let Some(p) = body.naive_p_value {
        out.push_str(&format!("naive t-test p-value: {p:.6e}\n"));
    }
    out.push_str(&format!(
        "null: mean {:.6} sd {:.6} [{:.6}, {:.6}]\n",
        r.null_summary.mean, r.null_summary.sd, r.null_summary.q025, r.null_summary.q975
    ));
    if r.non_converged > 0 {
        out.push_str(&format!("non-converged resamples: {}\n", r.non_converged));
    }
    out
}

pub fn variance_text(body: &VarianceBody) -> String {
    let r = &body.report;
    format!(
        "mean {}/{}: {:.6}\nresampled ({}): {:.6} +/- {:.6} [{:.6}, {:.6}]\n",
        body.numerator,
        body.denominator,
        r.observed_mean_ratio,
        r.method.kind().name(),
        r.resampled.mean,
        r.resampled.sd,
        r.resampled.q025,
        r.resampled.q975,
    )
}

#[derive(Debug, Serialize)]
struct CalibrationRow<'a> {
    method: &'a str,
    stat: &'a str,
    alpha: f64,
    observed_rate: f64,
    lower: f64,
    upper: f64,
    trials: usize,
}

/// One row per nominal level per method/statistic curve.
pub fn calibration_csv(report: &CalibrationReport) -> csv::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for curve in &report.curves {
        for p in &curve.points {
            w.serialize(CalibrationRow {
                method: curve.method.name(),
                stat: curve.stat.name(),
                alpha: p.alpha,
                observed_rate: p.observed_rate,
                lower: p.lower,
                upper: p.upper,
                trials: report.trials,
            })?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_carries_version() {
        let body = SynthBody {
            rows: 2,
            cols: 2,
            beta: 0.0,
            seed: 1,
            moran_i: -0.25,
        };
        let v: serde_json::Value = serde_json::from_str(&to_json("synth", body).unwrap()).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["command"], "synth");
        assert_eq!(v["moran_i"], -0.25);
    }
}
