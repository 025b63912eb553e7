//! CSV tables with fixed numeric formatting.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Six significant digits in the style of C's `%g`: fixed notation for
/// exponents in `-4..6`, scientific otherwise, trailing zeros removed.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn format_opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

/// A header plus string rows.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Usage(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut line = |cells: &[String]| {
            let quoted: Vec<String> = cells.iter().map(|c| quote(c)).collect();
            out.push_str(&quoted.join(","));
            out.push('\n');
        };
        line(&self.header);
        for row in &self.rows {
            line(row);
        }
        out
    }

    /// Parses CSV text written by [`to_csv`](Self::to_csv).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = split(lines.next().ok_or_else(|| Error::Usage("empty CSV".into()))?);
        let mut t = Table {
            header,
            rows: Vec::new(),
        };
        for l in lines {
            t.push(split(l))?;
        }
        Ok(t)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)
                .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        }
        fs::write(path, self.to_csv()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

fn split(line: &str) -> Vec<String> {
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut in_quotes = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, in_quotes) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => in_quotes = !in_quotes,
            (',', false) => cells.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    cells.push(cur);
    cells
}

/// Writes a table, creating parent directories.
pub fn emit_report(table: &Table, path: &Path) -> Result<()> {
    table.write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_style() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (94.2345678, "94.2346"),
            (0.5, "0.5"),
            (123456.7, "123457"),
            (1234567.0, "1.23457e+06"),
            (0.0001234, "0.0001234"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (1e-12, "1e-12"),
            (99999.95, "99999.9"),
        ];
        for (x, s) in cases {
            assert_eq!(format_number(x), s, "{x}");
        }
    }

    #[test]
    fn csv_roundtrip() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["x,y".into(), "1".into()]).unwrap();
        t.push(vec!["say \"hi\"".into(), "".into()]).unwrap();
        assert_eq!(Table::parse(&t.to_csv()).unwrap(), t);
        assert!(t.push(vec!["1".into()]).is_err());
        assert_eq!(Table::new(["h"]).to_csv(), "h\n");
    }
}
