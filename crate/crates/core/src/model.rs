//! Candidate models: which predictor columns enter the linear quantile fit.

use std::cmp::Ordering;
use std::fmt;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::num::Matrix;

/// A subset of predictors (1-based, strictly increasing) plus an optional
/// intercept, which always occupies the first design column.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    indices: Vec<usize>,
    intercept: bool,
}

impl ModelSpec {
    pub fn new(indices: Vec<usize>, intercept: bool) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::InvalidInput("predictor indices are 1-based".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!("predictor indices must be strictly increasing, got {indices:?}")));
        }
        Ok(Self { indices, intercept })
    }

    /// Sorts and deduplicates `indices` before building the model.
    pub fn from_unsorted(mut indices: Vec<usize>, intercept: bool) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(indices, intercept)
    }

    pub fn intercept_only() -> Self {
        Self { indices: Vec::new(), intercept: true }
    }

    /// Intercept plus predictors `1..=j`.
    pub fn leading(j: usize) -> Self {
        Self { indices: (1..=j).collect(), intercept: true }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    /// Number of predictors, not counting the intercept.
    pub fn size(&self) -> usize {
        self.indices.len()
    }

    /// Number of fitted coefficients.
    pub fn n_params(&self) -> usize {
        self.indices.len() + usize::from(self.intercept)
    }

    pub fn is_subset_of(&self, other: &ModelSpec) -> bool {
        (!self.intercept || other.intercept) && self.indices.iter().all(|i| other.indices.binary_search(i).is_ok())
    }

    pub fn check_dimension(&self, d: usize) -> Result<()> {
        match self.indices.last() {
            Some(&max) if max > d => {
                Err(Error::InvalidInput(format!("model uses predictor {max} but the data has only {d}")))
            }
            _ => Ok(()),
        }
    }

    /// Design row for one predictor vector `z` (length `d`).
    pub fn design_row(&self, z: &[f64]) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.n_params());
        if self.intercept {
            row.push(1.0);
        }
        row.extend(self.indices.iter().map(|&j| z[j - 1]));
        row
    }

    /// Design matrix over all observations of `data`.
    pub fn design(&self, data: &Dataset) -> Result<Matrix> {
        self.check_dimension(data.d())?;
        let n = data.n();
        let mut out = Vec::with_capacity(n * self.n_params());
        for i in 0..n {
            let z = data.z().row(i);
            if self.intercept {
                out.push(1.0);
            }
            out.extend(self.indices.iter().map(|&j| z[j - 1]));
        }
        Matrix::new(n, self.n_params(), out)
    }

    /// Column labels in design order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_params());
        if self.intercept {
            names.push("intercept".to_string());
        }
        names.extend(self.indices.iter().map(|j| format!("z{j}")));
        names
    }

    /// Selection order: smaller models first, then lexicographic indices.
    pub fn size_then_lex(&self, other: &ModelSpec) -> Ordering {
        self.size()
            .cmp(&other.size())
            .then_with(|| self.indices.cmp(&other.indices))
            .then_with(|| self.intercept.cmp(&other.intercept))
    }
}

impl fmt::Display for ModelSpec {
    /// `intercept+z1+z3`, `intercept`, or `empty`; contains no commas.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.column_names();
        if names.is_empty() {
            write!(f, "empty")
        } else {
            write!(f, "{}", names.join("+"))
        }
    }
}

/// Parses a comma-separated column list such as `1,2,3` or `1-4,7`.
/// An empty string yields no columns.
pub fn parse_columns(text: &str) -> Result<Vec<usize>> {
    let mut cols = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::InvalidInput(format!("bad column specification {part:?}"));
        if let Some((a, b)) = part.split_once('-') {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            cols.extend(a..=b);
        } else {
            cols.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(cols)
}
