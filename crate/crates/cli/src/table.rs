//! Long-format result table shared by every experiment.

use geophase::diagnostics::flag_string;
use geophase::Warning;

pub const HEADER: &str = "experiment,x_name,x_value,series,y_name,y_value,flag";

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub series: String,
    pub x_name: String,
    pub x_value: f64,
    pub y_name: String,
    pub y_value: f64,
    pub flag: String,
}

/// Rows in insertion order.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub rows: Vec<Row>,
}

impl Table {
    pub fn push(&mut self, series: &str, x_name: &str, x_value: f64, y_name: &str, y_value: f64, warnings: &[Warning]) {
        self.push_flag(series, x_name, x_value, y_name, y_value, flag_string(warnings));
    }

    pub fn push_flag(&mut self, series: &str, x_name: &str, x_value: f64, y_name: &str, y_value: f64, flag: String) {
        self.rows.push(Row {
            series: series.to_string(),
            x_name: x_name.to_string(),
            x_value,
            y_name: y_name.to_string(),
            y_value,
            flag,
        });
    }

    pub fn extend(&mut self, other: Table) {
        self.rows.extend(other.rows);
    }

    /// `(x, y)` pairs of one series and observable, in row order.
    pub fn curve(&self, series: &str, y_name: &str) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.series == series && r.y_name == y_name).map(|r| (r.x_value, r.y_value)).collect()
    }

    pub fn to_csv(&self, experiment: &str) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                experiment,
                r.x_name,
                number(r.x_value),
                r.series,
                r.y_name,
                number(r.y_value),
                r.flag
            ));
        }
        out
    }
}

/// 17 significant digits, exponent form; round-trips every `f64`.
pub fn number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}
