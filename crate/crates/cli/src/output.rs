//! Output files. Floats are written with 17 significant digits so that they
//! read back to the same `f64`.

use std::path::Path;

use serde::Serialize;

use crate::failure::Failure;

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A CSV file held in memory until it is written.
#[derive(Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()
            .map_err(|e| Failure::io(&path.display().to_string(), e))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::new("cli.io", e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::io(&path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [1.0 / 3.0, 0.0, -2.5e-300, 1e300, 0.1 + 0.2] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(num(f64::NAN), "NaN");
        assert_eq!(opt(None), "");
    }

    #[test]
    fn names_with_commas_are_quoted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["name", "x"]);
        t.row(vec!["a,b".into(), num(1.0)]);
        t.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "name,x\n\"a,b\",1.0000000000000000e0\n");
    }
}
