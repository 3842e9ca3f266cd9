//! Response/predictor container and its CSV form.
//!
//! The CSV layout is a header `y,z1,...,zd` followed by one row per
//! observation. Numbers are written with 17 significant digits so a
//! write/read cycle is lossless. Lines starting with `#` are comments.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::num::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    z: Matrix,
}

impl Dataset {
    pub fn new(y: Vec<f64>, z: Matrix) -> Result<Self> {
        if y.len() != z.rows() {
            return Err(Error::DimensionMismatch { expected: z.rows(), found: y.len() });
        }
        if y.iter().any(|v| !v.is_finite()) || z.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(Self { y, z })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &Matrix {
        &self.z
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of predictors.
    pub fn d(&self) -> usize {
        self.z.cols()
    }

    /// The observations at `rows`, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let d = self.d();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            data.extend_from_slice(self.z.row(r));
        }
        Dataset {
            y: rows.iter().map(|&r| self.y[r]).collect(),
            z: Matrix::new(rows.len(), d, data).expect("subset of a valid matrix"),
        }
    }

    /// Multiplies every predictor by `c`.
    pub fn with_scaled_predictors(&self, c: f64) -> Dataset {
        Dataset { y: self.y.clone(), z: self.z.scaled(c) }
    }

    pub fn with_scaled_response(&self, c: f64) -> Dataset {
        Dataset { y: self.y.iter().map(|v| v * c).collect(), z: self.z.clone() }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("y");
        for j in 1..=self.d() {
            header.push_str(&format!(",z{j}"));
        }
        writeln!(out, "{header}")?;
        for i in 0..self.n() {
            let mut line = fmt_f64(self.y[i]);
            for &v in self.z.row(i) {
                line.push(',');
                line.push_str(&fmt_f64(v));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Dataset> {
        let mut d: Option<usize> = None;
        let mut y = Vec::new();
        let mut z = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            let Some(width) = d else {
                check_header(&fields, lineno)?;
                d = Some(fields.len() - 1);
                continue;
            };
            if fields.len() != width + 1 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {} fields, found {}", width + 1, fields.len()),
                });
            }
            let mut parsed = fields.iter().map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse { line: lineno, message: format!("not a finite number: {f:?}") })
            });
            y.push(parsed.next().expect("nonempty row")?);
            for v in parsed {
                z.push(v?);
            }
        }
        let d = d.ok_or_else(|| Error::Parse { line: 0, message: "missing header".into() })?;
        let n = y.len();
        Dataset::new(y, Matrix::new(n, d, z)?)
    }
}

fn check_header(fields: &[&str], line: usize) -> Result<()> {
    let ok = fields.first() == Some(&"y") && fields[1..].iter().enumerate().all(|(j, f)| *f == format!("z{}", j + 1));
    if ok {
        Ok(())
    } else {
        Err(Error::Parse { line, message: format!("expected header y,z1,...,zd, found {:?}", fields.join(",")) })
    }
}

/// 17 significant digits, locale independent.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
