//! Plot-ready artifacts: comma-delimited tables with `#` metadata lines and
//! a column header row, JSON summaries of fitted quantities with
//! uncertainties, and a plain-text run log. All rendering is deterministic:
//! identical inputs give byte-identical files.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// One reported quantity with a one-sigma (possibly asymmetric) uncertainty.
#[derive(Debug, Clone, Copy)]
pub struct Quantity {
    pub value: f64,
    pub err_lo: f64,
    pub err_hi: f64,
}

impl Quantity {
    pub fn symmetric(value: f64, err: f64) -> Self {
        Quantity {
            value,
            err_lo: err,
            err_hi: err,
        }
    }

    /// A model value reported without uncertainty.
    pub fn exact(value: f64) -> Self {
        Quantity::symmetric(value, 0.0)
    }
}

/// CSV table builder. Metadata renders as `# key: value` lines before the
/// header row; data cells use a fixed 9-decimal format (columns listed in
/// `int_columns` render as integers).
#[derive(Debug, Clone)]
pub struct CsvTable {
    meta: Vec<(String, String)>,
    columns: Vec<String>,
    int_columns: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable {
            meta: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            int_columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn int_column(&mut self, index: usize) -> &mut Self {
        self.int_columns.push(index);
        self
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::InvalidParameter(format!(
                "row width {} does not match {} columns",
                values.len(),
                self.columns.len()
            )));
        }
        self.rows.push(values.to_vec());
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if self.int_columns.contains(&i) {
                        format!("{v:.0}")
                    } else {
                        format!("{v:.9}")
                    }
                })
                .collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }
}

/// JSON summary builder: string metadata first, then a flat map of
/// quantities, each `{value, err_lo, err_hi}`. Insertion order is preserved;
/// non-finite numbers render as null.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    meta: Vec<(String, String)>,
    entries: Vec<(String, Quantity)>,
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn json_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "null".into()
    }
}

impl Summary {
    pub fn new() -> Self {
        Summary::default()
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, name: &str, q: Quantity) -> &mut Self {
        self.entries.push((name.to_string(), q));
        self
    }

    pub fn render(&self) -> String {
        let mut body = Vec::new();
        for (k, v) in &self.meta {
            body.push(format!("  \"{}\": \"{}\"", json_escape(k), json_escape(v)));
        }
        for (k, q) in &self.entries {
            body.push(format!(
                "  \"{}\": {{\"value\": {}, \"err_lo\": {}, \"err_hi\": {}}}",
                json_escape(k),
                json_num(q.value),
                json_num(q.err_lo),
                json_num(q.err_hi)
            ));
        }
        format!("{{\n{}\n}}\n", body.join(",\n"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }
}

/// Writes a text file, creating parent directories as needed.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}

/// Appends one line to the run log in `dir`.
pub fn append_run_log(dir: &Path, line: &str) -> Result<()> {
    use std::io::Write as _;
    std::fs::create_dir_all(dir)?;
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join("run.log"))?;
    writeln!(f, "{line}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_renders_metadata_header_and_fixed_precision_rows() {
        let mut t = CsvTable::new(&["power_db", "p_b", "p_b_err"]);
        t.meta("command", "scurve").meta("seed", 7);
        t.row(&[-39.0, 0.002, 0.001]).unwrap();
        t.row(&[-35.5, 0.5, 0.011]).unwrap();
        let s = t.render();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# command: scurve");
        assert_eq!(lines[1], "# seed: 7");
        assert_eq!(lines[2], "power_db,p_b,p_b_err");
        assert_eq!(lines[3], "-39.000000000,0.002000000,0.001000000");
        assert_eq!(lines.len(), 5);
        assert!(t.row(&[1.0]).is_err());
        // Integer column formatting.
        let mut tr = CsvTable::new(&["t_ns", "level"]);
        tr.int_column(1);
        tr.row(&[0.85, 2.0]).unwrap();
        assert_eq!(tr.render().lines().last().unwrap(), "0.850000000,2");
    }

    #[test]
    fn summary_renders_flat_quantity_map() {
        let mut s = Summary::new();
        s.meta("command", "rabi");
        s.push("visibility", Quantity::symmetric(0.936, 0.012));
        s.push("tphi_hi_ns", Quantity {
            value: 1.0,
            err_lo: 0.1,
            err_hi: f64::INFINITY,
        });
        let text = s.render();
        assert!(text.contains("\"command\": \"rabi\""));
        assert!(text.contains(
            "\"visibility\": {\"value\": 0.936, \"err_lo\": 0.012, \"err_hi\": 0.012}"
        ));
        assert!(text.contains("\"err_hi\": null"));
        // Valid JSON (parses back).
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["visibility"]["value"], 0.936);
    }
}
