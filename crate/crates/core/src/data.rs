//! Observed data `(Y, A, W)` and its CSV representation.
//!
//! The CSV layout is a header row `y,a,w1,...,wp` followed by one row per
//! observation. `a` must be 0 or 1. Values are written with the shortest
//! representation that parses back to the same bits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    a: Vec<bool>,
    /// Row-major n×p covariates.
    w: Vec<f64>,
    p: usize,
}

impl Dataset {
    pub fn new(y: Vec<f64>, a: Vec<bool>, w: Vec<f64>, p: usize) -> Result<Self> {
        let n = y.len();
        if a.len() != n || w.len() != n * p {
            return Err(Error::Shape(format!(
                "y has {n} rows, a has {}, W has {} values for p = {p}",
                a.len(),
                w.len()
            )));
        }
        if y.iter().chain(&w).any(|v| !v.is_finite()) {
            return Err(Error::Schema("dataset contains non-finite values".into()));
        }
        Ok(Self { y, a, w, p })
    }

    /// Convenience constructor from covariate columns.
    pub fn from_columns(y: Vec<f64>, a: Vec<bool>, columns: &[Vec<f64>]) -> Result<Self> {
        let n = y.len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("covariate columns differ in length from y".into()));
        }
        let p = columns.len();
        let mut w = Vec::with_capacity(n * p);
        for i in 0..n {
            w.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(y, a, w, p)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.p
    }

    pub fn outcome(&self) -> &[f64] {
        &self.y
    }

    pub fn treatment(&self) -> &[bool] {
        &self.a
    }

    pub fn treatment_f64(&self) -> Vec<f64> {
        self.a.iter().map(|&t| f64::from(u8::from(t))).collect()
    }

    /// Row-major covariate block.
    pub fn covariates(&self) -> &[f64] {
        &self.w
    }

    pub fn covariate(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.p + j]
    }

    pub fn covariate_column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.covariate(i, j)).collect()
    }

    pub fn n_treated(&self) -> usize {
        self.a.iter().filter(|&&t| t).count()
    }

    /// Same data with the outcome replaced.
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(y, self.a.clone(), self.w.clone(), self.p)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut w = Vec::with_capacity(rows.len() * self.p);
        for &i in rows {
            w.extend_from_slice(&self.w[i * self.p..(i + 1) * self.p]);
        }
        Self {
            y: rows.iter().map(|&i| self.y[i]).collect(),
            a: rows.iter().map(|&i| self.a[i]).collect(),
            w,
            p: self.p,
        }
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().collect();
        if names.len() < 2 || names[0] != "y" || names[1] != "a" {
            return Err(Error::Schema(format!(
                "header must start with `y,a`, found `{}`",
                names.join(",")
            )));
        }
        for (j, name) in names[2..].iter().enumerate() {
            let expected = format!("w{}", j + 1);
            if *name != expected {
                return Err(Error::Schema(format!(
                    "covariate column {} must be named `{expected}`, found `{name}`",
                    j + 3
                )));
            }
        }
        let p = names.len() - 2;
        let (mut y, mut a, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |pos| pos.line());
                Error::Parse {
                    line,
                    message: e.to_string(),
                }
            })?;
            let line = record.position().map_or(0, |pos| pos.line());
            let field = |k: usize| -> Result<f64> {
                let raw = &record[k];
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("column `{}`: `{raw}` is not a finite number", names[k]),
                    })
            };
            y.push(field(0)?);
            a.push(match &record[1] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Schema(format!(
                        "line {line}: treatment `a` must be 0 or 1, found `{other}`"
                    )))
                }
            });
            for k in 0..p {
                w.push(field(k + 2)?);
            }
        }
        if y.is_empty() {
            return Err(Error::EmptyInput);
        }
        Self::new(y, a, w, p)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_csv_writer(&mut file).map_err(|e| match e {
            Error::Csv(c) => Error::io(path, std::io::Error::other(c.to_string())),
            other => other,
        })?;
        file.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["y".to_string(), "a".to_string()];
        header.extend((1..=self.p).map(|j| format!("w{j}")));
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = Vec::with_capacity(self.p + 2);
            row.push(self.y[i].to_string());
            row.push(if self.a[i] { "1" } else { "0" }.to_string());
            row.extend(self.w[i * self.p..(i + 1) * self.p].iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}
