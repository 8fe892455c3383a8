//! Evaluation rows and the metrics CSV.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub const CSV_HEADER: &str =
    "run_id,seed,env,algo,env_steps,episodes,loss,test_return_mean,test_return_std,task_metric_name,task_metric_value";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: u64,
    pub env: String,
    pub algo: String,
    pub env_steps: u64,
    pub episodes: u64,
    /// `None` before the first update.
    pub loss: Option<f64>,
    pub return_mean: f64,
    pub return_std: f64,
    pub metric_name: String,
    pub metric_value: f64,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.run_id,
            self.seed,
            self.env,
            self.algo,
            self.env_steps,
            self.episodes,
            self.loss.map_or_else(|| "nan".to_string(), fmt_g),
            fmt_g(self.return_mean),
            fmt_g(self.return_std),
            self.metric_name,
            fmt_g(self.metric_value),
        )
    }
}

/// Formats like C's `%g`: 6 significant digits, trailing zeros removed.
pub fn fmt_g(x: f64) -> String {
    const P: i32 = 6;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Appends one row, creating the file with its header first if needed. Each
/// row is a single `write` call on an append-mode handle.
pub fn append_row(path: &Path, row: &MetricsRow) -> Result<()> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = String::new();
    if fresh {
        line.push_str(CSV_HEADER);
        line.push('\n');
    }
    line.push_str(&row.to_csv());
    line.push('\n');
    f.write_all(line.as_bytes())?;
    f.sync_data()?;
    Ok(())
}
