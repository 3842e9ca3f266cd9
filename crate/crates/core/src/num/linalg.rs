//! Small dense linear algebra: row-major matrices, pivoted Cholesky, SPD
//! solves and symmetric eigenvalue extremes.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(k: usize) -> Self {
        Self::from_diag(&vec![1.0; k])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let k = diag.len();
        let mut m = Self::zeros(k, k);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, found: bad.len() });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(l);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_i w_i x_i x_iᵀ` over the rows `x_i` of `x`.
///
/// Rows with zero weight are skipped.
pub fn weighted_gram(x: &Matrix, weights: &[f64]) -> Matrix {
    assert_eq!(x.rows(), weights.len());
    let k = x.cols();
    let mut g = Matrix::zeros(k, k);
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = x.row(i);
        for j in 0..k {
            let a = w * row[j];
            let dst = &mut g.data[j * k + j..(j + 1) * k];
            for (d, &b) in dst.iter_mut().zip(&row[j..]) {
                *d += a * b;
            }
        }
    }
    for j in 0..k {
        for l in 0..j {
            g.data[j * k + l] = g.data[l * k + j];
        }
    }
    g
}

/// Cholesky factorization with symmetric (diagonal) pivoting:
/// `Pᵀ A P = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
    perm: Vec<usize>,
}

impl Cholesky {
    /// Fails with the original index of the first pivot whose remaining
    /// diagonal is not safely positive.
    pub fn factor(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
        }
        let k = a.rows();
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..k).collect();
        let max_diag = (0..k).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
        let tol = max_diag * f64::EPSILON * k as f64;

        for j in 0..k {
            let mut p = j;
            for i in j + 1..k {
                if w[(i, i)] > w[(p, p)] {
                    p = i;
                }
            }
            let pivot = w[(p, p)];
            if !(pivot > tol) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: perm[p], value: pivot });
            }
            if p != j {
                swap_sym(&mut w, j, p);
                perm.swap(j, p);
            }
            let d = w[(j, j)].sqrt();
            w[(j, j)] = d;
            for i in j + 1..k {
                w[(i, j)] /= d;
            }
            // Full trailing update: later pivoting swaps read both triangles.
            let col: Vec<f64> = (j + 1..k).map(|i| w[(i, j)]).collect();
            for (a, i) in (j + 1..k).enumerate() {
                let lij = col[a];
                if lij == 0.0 {
                    continue;
                }
                let row = &mut w.data[i * k + j + 1..(i + 1) * k];
                for (dst, &lcj) in row.iter_mut().zip(&col) {
                    *dst -= lij * lcj;
                }
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                w[(i, j)] = 0.0;
            }
        }
        Ok(Self { l: w, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// `P L g`: maps i.i.d. standard normals `g` to a draw with covariance `A`.
    pub fn correlate(&self, g: &[f64]) -> Vec<f64> {
        let k = self.dim();
        assert_eq!(g.len(), k);
        let mut x = vec![0.0; k];
        for i in 0..k {
            x[self.perm[i]] = dot(&self.l.row(i)[..=i], &g[..=i]);
        }
        x
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let k = self.dim();
        assert_eq!(b.len(), k);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..k {
            let s = dot(&self.l.row(i)[..i], &y[..i]);
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|r| self.l[(r, i)] * y[r]).sum();
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        let mut x = vec![0.0; k];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: b.rows() });
        }
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve_vec(&b.column(j));
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

fn swap_sym(w: &mut Matrix, a: usize, b: usize) {
    let k = w.rows();
    for c in 0..k {
        let (x, y) = (w[(a, c)], w[(b, c)]);
        w[(a, c)] = y;
        w[(b, c)] = x;
    }
    for r in 0..k {
        let (x, y) = (w[(r, a)], w[(r, b)]);
        w[(r, a)] = y;
        w[(r, b)] = x;
    }
}

/// Solves `A X = B` for symmetric positive-definite `A`.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    Cholesky::factor(a)?.solve(b)
}

/// `tr(A⁻¹ B)` through one factorization and `k` solves; no inverse is formed.
pub fn trace_solve(a: &Matrix, b: &Matrix) -> Result<f64> {
    let chol = Cholesky::factor(a)?;
    if b.rows() != a.rows() || !b.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: b.rows() });
    }
    Ok((0..b.cols()).map(|j| chol.solve_vec(&b.column(j))[j]).sum())
}

/// Solves the square system `A x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot falls below `rel_tol` times the
/// largest entry of `A`.
pub fn solve_square(a: &Matrix, b: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    let k = a.rows();
    assert!(a.is_square() && b.len() == k);
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let tol = rel_tol * a.max_abs();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))?;
        if !(m[(piv, col)].abs() > tol) {
            return None;
        }
        if piv != col {
            for c in 0..k {
                let t = m[(col, c)];
                m[(col, c)] = m[(piv, c)];
                m[(piv, c)] = t;
            }
            rhs.swap(col, piv);
        }
        for r in col + 1..k {
            let f = m[(r, col)] / m[(col, col)];
            if f == 0.0 {
                continue;
            }
            for c in col..k {
                m[(r, c)] -= f * m[(col, c)];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| m[(r, c)] * x[c]).sum();
        x[r] = (rhs[r] - s) / m[(r, r)];
    }
    Some(x)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eig_extremes(a: &Matrix) -> Result<(f64, f64)> {
    let eig = symmetric_eigenvalues(a)?;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}

/// All eigenvalues (unordered) via Householder tridiagonalization and the
/// implicit QL iteration.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut w = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut w, &mut d, &mut e);
    tql(&mut d, &mut e)?;
    Ok(d)
}

fn tridiagonalize(a: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[(j, k)] * a[(i, k)];
                    }
                    for k in j + 1..=l {
                        g += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[(j, k)] -= f * e[k] + g * a[(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    for i in 0..n {
        d[i] = a[(i, i)];
    }
}

fn tql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NonConvergence { iterations: iter, gap: e[l].abs() });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
