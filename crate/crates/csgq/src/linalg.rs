//! Minimal dense linear algebra.
//!
//! The problem sizes here are small (hundreds of rows/columns), so a plain
//! row-major matrix with hand-rolled kernels is simpler and faster to
//! build against than pulling in a full linear-algebra stack. Everything
//! operates on `f64` and is deterministic.

use crate::error::{CsgqError, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(CsgqError::InvalidArgument("ragged row lengths".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// out = A x
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    /// out += Aᵀ y  (row-major friendly: walks rows once)
    pub fn matvec_t_add(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                axpy(yi, self.row(i), out);
            }
        }
    }

    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.matvec_t_add(y, &mut out);
        out
    }

    /// C = A B
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(CsgqError::InvalidArgument(format!(
                "matmul shape mismatch: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a != 0.0 {
                    let src = other.row(l);
                    let dst = out.row_mut(i);
                    axpy(a, src, dst);
                }
            }
        }
        Ok(out)
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.row(i));
        }
        out
    }

    pub fn select_cols(&self, indices: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, indices.len());
        for i in 0..self.rows {
            let src = self.row(i);
            for (c, &j) in indices.iter().enumerate() {
                out.set(i, c, src[j]);
            }
        }
        out
    }

    /// Gram matrix AᵀA (cols × cols).
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let row = self.row(i);
            for a in 0..self.cols {
                let ra = row[a];
                if ra != 0.0 {
                    for b in a..self.cols {
                        g.data[a * self.cols + b] += ra * row[b];
                    }
                }
            }
        }
        for a in 0..self.cols {
            for b in 0..a {
                g.data[a * self.cols + b] = g.data[b * self.cols + a];
            }
        }
        g
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Least squares min ‖Ax − b‖₂ via Householder QR, for A with full column
/// rank and rows ≥ cols. Returns `RankDeficient` when a pivot collapses.
pub fn lstsq(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (a.rows, a.cols);
    if b.len() != m {
        return Err(CsgqError::InvalidArgument(
            "lstsq: rhs length != rows".into(),
        ));
    }
    if m < n {
        return Err(CsgqError::InvalidArgument(
            "lstsq: underdetermined system".into(),
        ));
    }
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    let mut col_scale: f64 = 0.0;
    for j in 0..n {
        // Householder reflector annihilating column j below the diagonal.
        let mut norm_sq = 0.0;
        for i in j..m {
            let v = r.get(i, j);
            norm_sq += v * v;
        }
        let norm = norm_sq.sqrt();
        col_scale = col_scale.max(norm);
        if norm <= 1e-13 * col_scale.max(1e-300) {
            return Err(CsgqError::RankDeficient);
        }
        let pivot = r.get(j, j);
        let alpha = if pivot >= 0.0 { -norm } else { norm };
        // v = x - alpha e1 over the column tail.
        let mut v = vec![0.0; m - j];
        v[0] = pivot - alpha;
        for i in (j + 1)..m {
            v[i - j] = r.get(i, j);
        }
        let vnorm_sq = dot(&v, &v);
        if vnorm_sq == 0.0 {
            continue;
        }
        // Apply H = I - 2 v vᵀ / (vᵀv) to trailing columns and to the rhs.
        let scale = 2.0 / vnorm_sq;
        for col in j..n {
            let mut proj = 0.0;
            for i in j..m {
                proj += v[i - j] * r.get(i, col);
            }
            proj *= scale;
            for i in j..m {
                let cur = r.get(i, col);
                r.set(i, col, cur - proj * v[i - j]);
            }
        }
        let mut proj = 0.0;
        for i in j..m {
            proj += v[i - j] * rhs[i];
        }
        proj *= scale;
        for i in j..m {
            rhs[i] -= proj * v[i - j];
        }
    }
    // Back substitution on the upper-triangular factor.
    let mut x = vec![0.0; n];
    let diag_max = (0..n).map(|j| r.get(j, j).abs()).fold(0.0_f64, f64::max);
    for j in (0..n).rev() {
        let mut s = rhs[j];
        for l in (j + 1)..n {
            s -= r.get(j, l) * x[l];
        }
        let d = r.get(j, j);
        if d.abs() <= 1e-13 * diag_max.max(1e-300) {
            return Err(CsgqError::RankDeficient);
        }
        x[j] = s / d;
    }
    Ok(x)
}

/// Eigenvalues of a small symmetric matrix via cyclic Jacobi rotations.
pub fn sym_eigenvalues(g: &Matrix) -> Result<Vec<f64>> {
    if g.rows != g.cols {
        return Err(CsgqError::InvalidArgument("eigenvalues: not square".into()));
    }
    let n = g.rows;
    let mut a = g.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q).abs();
            }
        }
        if off < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    Ok((0..n).map(|i| a.get(i, i)).collect())
}

/// Largest eigenvalue of a symmetric positive semidefinite operator
/// `apply: v ↦ S v`, estimated by a fixed number of power-iteration steps
/// from a deterministic start vector.
pub fn power_iteration<F: FnMut(&[f64], &mut [f64])>(
    dim: usize,
    steps: usize,
    mut apply: F,
) -> f64 {
    // Slight ramp avoids a start vector orthogonal to the top eigenvector.
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + i as f64 / (dim as f64 + 1.0)).collect();
    let norm = norm2(&v);
    for x in v.iter_mut() {
        *x /= norm;
    }
    let mut out = vec![0.0; dim];
    let mut lambda = 0.0;
    for _ in 0..steps {
        apply(&v, &mut out);
        lambda = norm2(&out);
        if lambda <= 1e-300 {
            return 0.0;
        }
        for (vi, oi) in v.iter_mut().zip(&out) {
            *vi = oi / lambda;
        }
    }
    lambda
}
