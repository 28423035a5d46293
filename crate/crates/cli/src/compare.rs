//! Numeric comparison of two run directories.
//!
//! Outputs are paired by task position and by position within the task, so a
//! `moments` run can be set against an `ergodic` run of the same network.
//! CSV files are compared on the columns they share; when either side has a
//! `<column>_se` column the deviation is also reported in standard errors.
//! JSON files must have the same keys. Differing row counts or array
//! lengths are reported as differences and the common prefix is compared.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::failure::Failure;
use crate::manifest::Manifest;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Difference {
    pub file: String,
    pub location: String,
    pub a: String,
    pub b: String,
    /// `None` for non-numeric cells that differ.
    pub deviation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileSummary {
    pub file_a: String,
    pub file_b: String,
    pub compared: usize,
    pub max_deviation: f64,
    pub max_deviation_at: Option<String>,
    /// Largest deviation in units of the reported standard error.
    pub max_z: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tolerance: f64,
    pub files: Vec<FileSummary>,
    pub differences: Vec<Difference>,
}

fn schema(msg: impl Into<String>) -> Failure {
    Failure::new("cli.schema_mismatch", msg)
}

pub fn compare(a: &Path, b: &Path, tolerance: f64) -> Result<Report, Failure> {
    if !(tolerance >= 0.0) {
        return Err(Failure::new(
            "cli.invalid_argument",
            format!("tolerance must be non-negative, got {tolerance}"),
        ));
    }
    let (ma, mb) = (Manifest::read(a)?, Manifest::read(b)?);
    if ma.tasks.len() != mb.tasks.len() {
        return Err(schema(format!(
            "{} tasks against {}",
            ma.tasks.len(),
            mb.tasks.len()
        )));
    }
    let mut report = Report {
        tolerance,
        files: Vec::new(),
        differences: Vec::new(),
    };
    for (ta, tb) in ma.tasks.iter().zip(&mb.tasks) {
        if ta.outputs.len() != tb.outputs.len() {
            return Err(schema(format!(
                "task {} wrote {} files, task {} wrote {}",
                ta.index,
                ta.outputs.len(),
                tb.index,
                tb.outputs.len()
            )));
        }
        for (fa, fb) in ta.outputs.iter().zip(&tb.outputs) {
            let mut cmp = FileCompare::new(fa, fb, tolerance);
            match (extension(fa), extension(fb)) {
                ("csv", "csv") => cmp.csv(&a.join(fa), &b.join(fb))?,
                ("json", "json") => {
                    let (va, vb) = (read_json(&a.join(fa))?, read_json(&b.join(fb))?);
                    cmp.json("$", &va, &vb)?
                }
                _ => return Err(schema(format!("cannot compare {fa} with {fb}"))),
            }
            report.differences.extend(cmp.differences);
            report.files.push(cmp.summary);
        }
    }
    Ok(report)
}

fn extension(name: &str) -> &str {
    Path::new(name)
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::io(&path.display().to_string(), e))?;
    serde_json::from_str(&text)
        .map_err(|e| schema(format!("{}: {e}", path.display())))
}

/// `|a - b|`, with equal infinities and paired NaNs counting as equal.
fn deviation(a: f64, b: f64) -> f64 {
    if a == b || (a.is_nan() && b.is_nan()) {
        0.0
    } else {
        let d = (a - b).abs();
        if d.is_nan() {
            f64::INFINITY
        } else {
            d
        }
    }
}

struct FileCompare {
    tolerance: f64,
    label: String,
    summary: FileSummary,
    differences: Vec<Difference>,
}

impl FileCompare {
    fn new(fa: &str, fb: &str, tolerance: f64) -> Self {
        FileCompare {
            tolerance,
            label: if fa == fb {
                fa.to_string()
            } else {
                format!("{fa} | {fb}")
            },
            summary: FileSummary {
                file_a: fa.into(),
                file_b: fb.into(),
                compared: 0,
                max_deviation: 0.0,
                max_deviation_at: None,
                max_z: None,
            },
            differences: Vec::new(),
        }
    }

    fn number(&mut self, location: String, a: f64, b: f64, se: Option<f64>) {
        let d = deviation(a, b);
        self.summary.compared += 1;
        if d > self.summary.max_deviation {
            self.summary.max_deviation = d;
            self.summary.max_deviation_at = Some(location.clone());
        }
        if let Some(se) = se.filter(|s| *s > 0.0) {
            let z = d / se;
            self.summary.max_z = Some(self.summary.max_z.map_or(z, |m| m.max(z)));
        }
        if d > self.tolerance {
            self.differences.push(Difference {
                file: self.label.clone(),
                location,
                a: a.to_string(),
                b: b.to_string(),
                deviation: Some(d),
            });
        }
    }

    /// Unequal row or element counts; the common prefix is still compared.
    fn length(&mut self, what: &str, a: usize, b: usize) {
        self.differences.push(Difference {
            file: self.label.clone(),
            location: what.to_string(),
            a: a.to_string(),
            b: b.to_string(),
            deviation: None,
        });
    }

    fn text(&mut self, location: String, a: &str, b: &str) {
        self.summary.compared += 1;
        if a != b {
            self.differences.push(Difference {
                file: self.label.clone(),
                location,
                a: a.into(),
                b: b.into(),
                deviation: None,
            });
        }
    }

    fn csv(&mut self, pa: &Path, pb: &Path) -> Result<(), Failure> {
        let (ha, ra) = read_csv(pa)?;
        let (hb, rb) = read_csv(pb)?;
        let col = |h: &[String], name: &str| h.iter().position(|c| c == name);
        let common: Vec<(String, usize, usize)> = ha
            .iter()
            .enumerate()
            .filter_map(|(i, c)| col(&hb, c).map(|j| (c.clone(), i, j)))
            .collect();
        if common.is_empty() {
            return Err(schema(format!("{} has no columns in common", self.label)));
        }
        if ra.len() != rb.len() {
            self.length("rows", ra.len(), rb.len());
        }
        let se_cols: Vec<(Option<usize>, Option<usize>)> = common
            .iter()
            .map(|(c, _, _)| {
                let se = format!("{c}_se");
                (col(&ha, &se), col(&hb, &se))
            })
            .collect();
        for (r, (row_a, row_b)) in ra.iter().zip(&rb).enumerate() {
            for ((c, i, j), (sa, sb)) in common.iter().zip(&se_cols) {
                let location = format!("row {r}, column {c}");
                let (a, b) = (row_a[*i].as_str(), row_b[*j].as_str());
                match (a.parse::<f64>(), b.parse::<f64>()) {
                    (Ok(x), Ok(y)) => {
                        let cell = |row: &[String], k: Option<usize>| {
                            k.and_then(|k| row[k].parse::<f64>().ok())
                        };
                        let se = cell(row_b, *sb).or_else(|| cell(row_a, *sa));
                        self.number(location, x, y, se)
                    }
                    _ => self.text(location, a, b),
                }
            }
        }
        Ok(())
    }

    fn json(&mut self, path: &str, a: &Value, b: &Value) -> Result<(), Failure> {
        match (a, b) {
            (Value::Object(oa), Value::Object(ob)) => {
                if oa.len() != ob.len() || oa.keys().any(|k| !ob.contains_key(k)) {
                    return Err(schema(format!("{}: keys differ at {path}", self.label)));
                }
                for (k, va) in oa {
                    self.json(&format!("{path}.{k}"), va, &ob[k])?;
                }
            }
            (Value::Array(xa), Value::Array(xb)) => {
                if xa.len() != xb.len() {
                    self.length(&format!("length of {path}"), xa.len(), xb.len());
                }
                for (i, (va, vb)) in xa.iter().zip(xb).enumerate() {
                    self.json(&format!("{path}[{i}]"), va, vb)?;
                }
            }
            (Value::Number(_) | Value::Null, Value::Number(_) | Value::Null) => {
                // serde_json writes NaN as null
                let f = |v: &Value| v.as_f64().unwrap_or(f64::NAN);
                self.number(path.to_string(), f(a), f(b), None);
            }
            (Value::String(x), Value::String(y)) => self.text(path.to_string(), x, y),
            (Value::Bool(x), Value::Bool(y)) => {
                self.text(path.to_string(), &x.to_string(), &y.to_string())
            }
            _ => return Err(schema(format!("{}: types differ at {path}", self.label))),
        }
        Ok(())
    }
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), Failure> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}
