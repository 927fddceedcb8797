//! Report rows and their CSV/JSON encodings.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`) so that every
//! double round-trips exactly and repeated runs produce bit-identical
//! output. Optional cells are empty in CSV and `null` in JSON.

use serde::Serialize;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// One level of one bound; shared by `analyze` and `compare`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub label: String,
    pub n: usize,
    pub scheme: &'static str,
    pub direction: &'static str,
    pub level: usize,
    pub bound: f64,
    pub exact: Option<f64>,
    pub ratio: Option<f64>,
}

impl BoundRow {
    pub const HEADER: &'static str = "label,n,scheme,direction,level,bound,exact,ratio";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.label,
            self.n,
            self.scheme,
            self.direction,
            self.level,
            fmt_float(self.bound),
            fmt_opt(self.exact),
            fmt_opt(self.ratio),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShortcutRow {
    pub label: String,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub ratio: f64,
    pub epsilon: f64,
}

impl ShortcutRow {
    pub const HEADER: &'static str = "label,n,k,l,ratio,epsilon";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.label,
            self.n,
            self.k,
            self.l,
            fmt_float(self.ratio),
            fmt_float(self.epsilon),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateRow {
    pub label: String,
    pub n: usize,
    pub start_level: usize,
    pub runs: u64,
    pub mean: f64,
    pub stddev: f64,
    pub exact: Option<f64>,
    pub z_score: Option<f64>,
}

impl SimulateRow {
    pub const HEADER: &'static str = "label,n,start_level,runs,mean,stddev,exact,z_score";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.label,
            self.n,
            self.start_level,
            self.runs,
            fmt_float(self.mean),
            fmt_float(self.stddev),
            fmt_opt(self.exact),
            fmt_opt(self.z_score),
        )
    }
}

/// One record of the oracle cross-check: `record = "q"` rows compare one
/// level-transition entry, `record = "m"` rows compare one level's hitting
/// time. Unused cells stay empty so the column count never varies.
#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    pub label: String,
    pub n: usize,
    pub record: &'static str,
    pub k: usize,
    pub l: Option<usize>,
    pub q_model: Option<f64>,
    pub q_oracle: Option<f64>,
    pub q_diff: Option<f64>,
    pub m_oracle: Option<f64>,
    pub m_model: Option<f64>,
    pub m_rel_diff: Option<f64>,
}

impl OracleRow {
    pub const HEADER: &'static str =
        "label,n,record,k,l,q_model,q_oracle,q_diff,m_oracle,m_model,m_rel_diff";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.label,
            self.n,
            self.record,
            self.k,
            self.l.map(|v| v.to_string()).unwrap_or_default(),
            fmt_opt(self.q_model),
            fmt_opt(self.q_oracle),
            fmt_opt(self.q_diff),
            fmt_opt(self.m_oracle),
            fmt_opt(self.m_model),
            fmt_opt(self.m_rel_diff),
        )
    }
}

/// Renders rows as a CSV document (header + one line per row) or a JSON
/// array, depending on the selected format.
pub fn render<R: Serialize>(
    rows: &[R],
    header: &str,
    csv_line: impl Fn(&R) -> String,
    json: bool,
) -> String {
    if json {
        let mut text = serde_json::to_string_pretty(rows).expect("rows serialize");
        text.push('\n');
        text
    } else {
        let mut text = String::with_capacity(rows.len() * 64 + header.len() + 1);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(&csv_line(row));
            text.push('\n');
        }
        text
    }
}
