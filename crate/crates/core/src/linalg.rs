//! Dense real linear algebra.
//!
//! Everything downstream needs one symmetric eigendecomposition (LDG, PCA)
//! or a generalized one (FDA). The symmetric solver is Householder
//! tridiagonalization followed by implicit QL, which keeps the eigenvectors
//! orthonormal to working precision on any symmetric input.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{Error, Result};

/// Relative asymmetry accepted by the eigensolvers before symmetrizing.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
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

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Builds a matrix from row-major storage.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "matrix storage",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension {
                    context: "matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension {
                context: "matrix product",
                expected: self.cols,
                found: rhs.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * rhs` without materializing the transpose.
    pub fn tr_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(Error::Dimension {
                context: "transposed matrix product",
                expected: self.rows,
                found: rhs.rows,
            });
        }
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let b_row = rhs.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension {
                context: "matrix-vector product",
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }

    /// Entrywise `self + scale * rhs`.
    pub fn add_scaled(&self, rhs: &Matrix, scale: f64) -> Result<Matrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Dimension {
                context: "matrix sum",
                expected: self.rows * self.cols,
                found: rhs.rows * rhs.cols,
            });
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + scale * b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Induced infinity norm (largest absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut dev = 0.0f64;
        for r in 0..self.rows {
            for c in r + 1..self.cols {
                dev = dev.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        dev
    }

    /// `(S + Sᵀ) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        let n = self.rows;
        let mut out = self.clone();
        for r in 0..n {
            for c in r + 1..n {
                let v = 0.5 * (self.get(r, c) + self.get(c, r));
                out.set(r, c, v);
                out.set(c, r, v);
            }
        }
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.rows);
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(idx.iter().map(|&c| row[c]));
        }
        Matrix {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    /// First `n` columns.
    pub fn leading_columns(&self, n: usize) -> Matrix {
        let idx: Vec<usize> = (0..n.min(self.cols)).collect();
        self.select_columns(&idx)
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows > 0 && other.rows > 0 && self.cols != other.cols {
            return Err(Error::Dimension {
                context: "row concatenation",
                expected: self.cols,
                found: other.cols,
            });
        }
        let cols = if self.rows > 0 { self.cols } else { other.cols };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols,
            data,
        })
    }

    /// `‖BᵀB − I‖` in max-abs norm.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.tr_matmul(self).expect("gram shape");
        let mut dev = 0.0f64;
        for r in 0..gram.rows {
            for c in 0..gram.cols {
                let target = if r == c { 1.0 } else { 0.0 };
                dev = dev.max((gram.get(r, c) - target).abs());
            }
        }
        dev
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            t * t
        })
        .sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Eigenpairs with `vectors` column `c` pairing with `values[c]`.
///
/// [`sym_eig`] returns values ascending with orthonormal vectors;
/// [`gen_sym_eig`] returns values descending with vectors orthonormal in the
/// metric of the regularized right-hand matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenResult {
    pub fn vector(&self, c: usize) -> Vec<f64> {
        self.vectors.column(c)
    }
}

fn check_symmetric_input(s: &Matrix, context: &'static str) -> Result<Matrix> {
    if !s.is_square() {
        return Err(Error::Dimension {
            context,
            expected: s.rows(),
            found: s.cols(),
        });
    }
    if !s.is_finite() {
        return Err(Error::NonFinite { context });
    }
    let deviation = s.asymmetry();
    if deviation > SYMMETRY_TOLERANCE * (1.0 + s.max_abs()) {
        return Err(Error::Asymmetric { deviation });
    }
    Ok(s.symmetrized())
}

/// Flips `v` so its largest-magnitude entry is positive (first such entry on ties).
pub fn normalize_sign(v: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Values come back ascending. Each eigenvector is scaled so its
/// largest-magnitude entry is positive; exactly equal eigenvalues are ordered
/// by the lexicographic order of their vectors.
pub fn sym_eig(s: &Matrix) -> Result<EigenResult> {
    let a = check_symmetric_input(s, "symmetric eigendecomposition")?;
    let n = a.rows();
    if n == 0 {
        return Ok(EigenResult {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let mut v = a.into_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    // QL works on eigenvector columns; store them as rows for contiguous access.
    let mut w = transpose_square(n, &v);
    tridiagonal_ql(n, &mut w, &mut d, &mut e)?;

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|i| {
            let mut vec_i = w[i * n..(i + 1) * n].to_vec();
            normalize_sign(&mut vec_i);
            (d[i], vec_i)
        })
        .collect();
    pairs.sort_by(|(la, va), (lb, vb)| la.total_cmp(lb).then_with(|| lexicographic(va, vb)));

    let mut vectors = Matrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (c, (lambda, vec_c)) in pairs.into_iter().enumerate() {
        values.push(lambda);
        for (r, x) in vec_c.into_iter().enumerate() {
            vectors.set(r, c, x);
        }
    }
    Ok(EigenResult { values, vectors })
}

fn transpose_square(n: usize, v: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[j * n + i] = v[i * n + j];
        }
    }
    w
}

/// Householder reduction to tridiagonal form (EISPACK `tred2`).
/// On exit `v` holds the accumulated orthogonal transform, `d` the diagonal
/// and `e[1..]` the subdiagonal.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal form (EISPACK `tql2`). `w` holds the
/// eigenvectors as rows.
fn tridiagonal_ql(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    const MAX_ITER_PER_VALUE: usize = 60;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] is zero, so m < n always holds here.
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_ITER_PER_VALUE {
                    return Err(Error::NoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let wi = &mut lo[i * n..];
                    let wi1 = &mut hi[..n];
                    for (a, b) in wi.iter_mut().zip(wi1.iter_mut()) {
                        let hk = *b;
                        *b = s * *a + c * hk;
                        *a = c * *a - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Cholesky factor `L` (lower triangular, row-major) of an SPD matrix.
pub fn cholesky(s: &Matrix) -> Result<Matrix> {
    let n = s.rows();
    let mut l = Matrix::zeros(n, n);
    let scale = (0..n).map(|i| s.get(i, i).abs()).fold(0.0, f64::max);
    let threshold = (n as f64) * f64::EPSILON * scale;
    for j in 0..n {
        let mut diag = s.get(j, j);
        for k in 0..j {
            diag -= l.get(j, k) * l.get(j, k);
        }
        if !(diag > threshold) {
            return Err(Error::Singular { pivot: diag });
        }
        let ljj = libm::sqrt(diag);
        l.set(j, j, ljj);
        for i in j + 1..n {
            let mut v = s.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / ljj);
        }
    }
    Ok(l)
}

/// Solves `L X = B` for lower-triangular `L`.
fn forward_substitute(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    let mut x = b.clone();
    for i in 0..n {
        let lii = l.get(i, i);
        for k in 0..i {
            let lik = l.get(i, k);
            if lik == 0.0 {
                continue;
            }
            for c in 0..x.cols() {
                let v = x.get(i, c) - lik * x.get(k, c);
                x.set(i, c, v);
            }
        }
        for c in 0..x.cols() {
            let v = x.get(i, c) / lii;
            x.set(i, c, v);
        }
    }
    x
}

/// Solves `Lᵀ X = B` for lower-triangular `L`.
fn backward_substitute_transposed(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let lii = l.get(i, i);
        for k in i + 1..n {
            let lki = l.get(k, i);
            if lki == 0.0 {
                continue;
            }
            for c in 0..x.cols() {
                let v = x.get(i, c) - lki * x.get(k, c);
                x.set(i, c, v);
            }
        }
        for c in 0..x.cols() {
            let v = x.get(i, c) / lii;
            x.set(i, c, v);
        }
    }
    x
}

/// Default ridge for [`gen_sym_eig`]: `1e-6 * trace(S_w) / d`.
pub fn default_ridge(s_w: &Matrix) -> f64 {
    let d = s_w.rows().max(1) as f64;
    1e-6 * s_w.trace() / d
}

/// Generalized symmetric eigenproblem `S_b v = ν (S_w + ridge·I) v`.
///
/// Values come back descending. Vectors are sign-normalized and satisfy
/// `Vᵀ (S_w + ridge·I) V = I`.
pub fn gen_sym_eig(s_b: &Matrix, s_w: &Matrix, ridge: f64) -> Result<EigenResult> {
    let s_b = check_symmetric_input(s_b, "generalized eigendecomposition (left)")?;
    let mut s_w = check_symmetric_input(s_w, "generalized eigendecomposition (right)")?;
    if s_b.rows() != s_w.rows() {
        return Err(Error::Dimension {
            context: "generalized eigendecomposition",
            expected: s_b.rows(),
            found: s_w.rows(),
        });
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::param("ridge", "must be finite and non-negative"));
    }
    let n = s_w.rows();
    for i in 0..n {
        let v = s_w.get(i, i) + ridge;
        s_w.set(i, i, v);
    }
    let l = cholesky(&s_w)?;
    // C = L⁻¹ S_b L⁻ᵀ
    let x = forward_substitute(&l, &s_b);
    let c = forward_substitute(&l, &x.transpose()).symmetrized();
    let eig = sym_eig(&c)?;

    let mut vectors = backward_substitute_transposed(&l, &eig.vectors);
    let mut values = eig.values;
    values.reverse();
    let mut out = Matrix::zeros(n, n);
    for (dst, src) in (0..n).rev().enumerate() {
        let mut col = vectors.column(src);
        normalize_sign(&mut col);
        for (r, x) in col.into_iter().enumerate() {
            out.set(r, dst, x);
        }
    }
    vectors = out;
    Ok(EigenResult { values, vectors })
}

/// Modified Gram–Schmidt on the columns, in order. Columns that become
/// numerically dependent on earlier ones are rejected.
pub fn orthonormalize_columns(m: &Matrix) -> Result<Matrix> {
    let mut cols: Vec<Vec<f64>> = (0..m.cols()).map(|c| m.column(c)).collect();
    for c in 0..cols.len() {
        let original = norm(&cols[c]);
        for p in 0..c {
            let (done, rest) = cols.split_at_mut(c);
            let proj = dot(&done[p], &rest[0]);
            for (x, q) in rest[0].iter_mut().zip(&done[p]) {
                *x -= proj * q;
            }
        }
        // Second pass keeps orthogonality at working precision.
        for p in 0..c {
            let (done, rest) = cols.split_at_mut(c);
            let proj = dot(&done[p], &rest[0]);
            for (x, q) in rest[0].iter_mut().zip(&done[p]) {
                *x -= proj * q;
            }
        }
        let nrm = norm(&cols[c]);
        if !(nrm > 1e-12 * original.max(f64::MIN_POSITIVE)) {
            return Err(Error::Capability(alloc::format!(
                "column {c} is linearly dependent on the preceding columns"
            )));
        }
        for x in cols[c].iter_mut() {
            *x /= nrm;
        }
    }
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for (c, col) in cols.iter().enumerate() {
        for (r, &x) in col.iter().enumerate() {
            out.set(r, c, x);
        }
    }
    Ok(out)
}

/// Maps each row `x` of `x_rows` to `Bᵀx`.
pub fn project(basis: &Matrix, x_rows: &Matrix) -> Result<Matrix> {
    if basis.rows() != x_rows.cols() {
        return Err(Error::Dimension {
            context: "projection",
            expected: basis.rows(),
            found: x_rows.cols(),
        });
    }
    x_rows.matmul(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(n: usize, seed: u64) -> Matrix {
        let mut state = seed;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = next();
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    fn reconstruct(e: &EigenResult) -> Matrix {
        let lam = Matrix::from_diag(&e.values);
        e.vectors.matmul(&lam).unwrap().matmul(&e.vectors.transpose()).unwrap()
    }

    #[test]
    fn diagonal_spectrum_sorted() {
        let e = sym_eig(&Matrix::from_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(e.vector(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(e.vector(1), vec![0.0, 0.0, 1.0]);
        assert_eq!(e.vector(2), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_by_two() {
        let s = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = sym_eig(&s).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let v0 = e.vector(0);
        let v1 = e.vector(1);
        assert!((v0[0].abs() - h).abs() < 1e-14 && (v0[0] + v0[1]).abs() < 1e-14);
        assert!((v1[0] - h).abs() < 1e-14 && (v1[1] - h).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction() {
        for seed in 0..20 {
            let s = lcg_matrix(5, seed);
            let e = sym_eig(&s).unwrap();
            let err = reconstruct(&e).add_scaled(&s, -1.0).unwrap().max_abs();
            assert!(err <= 1e-8 * (1.0 + s.norm_inf()), "seed {seed}: {err}");
            assert!(e.vectors.orthonormality_error() <= 1e-10);
            for w in e.values.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let rect = Matrix::zeros(2, 3);
        assert!(matches!(sym_eig(&rect), Err(Error::Dimension { .. })));
        let mut nan = Matrix::identity(2);
        nan.set(0, 1, f64::NAN);
        assert!(matches!(sym_eig(&nan), Err(Error::NonFinite { .. })));
        let asym = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&asym), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn tiny_asymmetry_is_absorbed() {
        let s = Matrix::from_rows(&[[2.0, 1.0 + 1e-13], [1.0, 2.0]]).unwrap();
        let e = sym_eig(&s).unwrap();
        assert!((e.values[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_by_one_and_empty() {
        let e = sym_eig(&Matrix::from_diag(&[-4.0])).unwrap();
        assert_eq!(e.values, vec![-4.0]);
        assert_eq!(e.vector(0), vec![1.0]);
        assert!(sym_eig(&Matrix::zeros(0, 0)).unwrap().values.is_empty());
    }

    #[test]
    fn identity_pencil() {
        let e = gen_sym_eig(&Matrix::identity(3), &Matrix::identity(3), 0.0).unwrap();
        for v in e.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_pencil() {
        let e = gen_sym_eig(&Matrix::from_diag(&[4.0, 1.0]), &Matrix::identity(2), 0.0).unwrap();
        assert!((e.values[0] - 4.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        assert_eq!(e.vector(0), vec![1.0, 0.0]);
        assert_eq!(e.vector(1), vec![0.0, 1.0]);
    }

    #[test]
    fn random_spd_pencil_residual() {
        for seed in 0..10 {
            let b = lcg_matrix(4, seed);
            let r = lcg_matrix(4, seed + 100);
            let w = r
                .matmul(&r.transpose())
                .unwrap()
                .add_scaled(&Matrix::identity(4), 0.5)
                .unwrap();
            let e = gen_sym_eig(&b, &w, 0.0).unwrap();
            for c in 0..4 {
                let v = e.vector(c);
                let lhs = b.mul_vec(&v).unwrap();
                let rhs = w.mul_vec(&v).unwrap();
                for (x, y) in lhs.iter().zip(&rhs) {
                    assert!((x - e.values[c] * y).abs() <= 1e-7, "seed {seed}");
                }
            }
            for w2 in e.values.windows(2) {
                assert!(w2[0] >= w2[1]);
            }
        }
    }

    #[test]
    fn singular_pencil_reports_pivot() {
        let w = Matrix::from_diag(&[1.0, 0.0]);
        match gen_sym_eig(&Matrix::identity(2), &w, 0.0) {
            Err(Error::Singular { pivot }) => assert!(pivot <= 0.0),
            other => panic!("expected singular error, got {other:?}"),
        }
        assert!(gen_sym_eig(&Matrix::identity(2), &w, 1e-3).is_ok());
    }

    #[test]
    fn projection_selects_coordinates() {
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let b = Matrix::identity(3).leading_columns(2);
        let y = project(&b, &x).unwrap();
        assert_eq!(y, Matrix::from_rows(&[[1.0, 2.0], [4.0, 5.0]]).unwrap());
        let unit = Matrix::from_rows(&[[0.6], [0.8], [0.0]]).unwrap();
        let single = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert!((project(&unit, &single).unwrap().get(0, 0) - 2.2).abs() < 1e-15);
        assert!(project(&b, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn gram_schmidt() {
        let m = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
        let q = orthonormalize_columns(&m).unwrap();
        assert!(q.orthonormality_error() < 1e-15);
        assert_eq!(q.column(0), vec![1.0, 0.0, 0.0]);
        let dep = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert!(orthonormalize_columns(&dep).is_err());
    }
}
