//! Minimal dense linear algebra for desk-scale problems: a row-major
//! matrix, Householder QR, least squares, and a spectral-norm estimate.

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    /// `self^T * x`.
    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Extract the submatrix formed by the given columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (k, &j) in cols.iter().enumerate() {
                out.set(i, k, self.get(i, j));
            }
        }
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Thin Householder QR of an `m x n` matrix with `m >= n`.
///
/// Returns `(q, r_diag)` where `q` is `m x n` with orthonormal columns and
/// `r_diag` holds the diagonal of the triangular factor. Each column of `q`
/// is multiplied by the sign of the matching `r_diag` entry, which makes the
/// factorization of a Gaussian matrix a draw from the uniform (Haar)
/// distribution over orthonormal frames.
pub fn householder_qr_thin(a: &Matrix) -> (Matrix, Vec<f64>) {
    let m = a.rows();
    let n = a.cols();
    assert!(m >= n, "thin QR needs rows >= cols");

    // Work on a column-major copy for contiguous column access.
    let mut w = vec![0.0f64; m * n];
    for i in 0..m {
        for j in 0..n {
            w[j * m + i] = a.get(i, j);
        }
    }
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r_diag = vec![0.0f64; n];

    for k in 0..n {
        let col = &w[k * m + k..(k + 1) * m];
        let norm = norm2(col);
        let alpha = if w[k * m + k] >= 0.0 { -norm } else { norm };
        let mut v = col.to_vec();
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 > 0.0 {
            for j in k..n {
                let colj = &mut w[j * m + k..(j + 1) * m];
                let s = 2.0 * dot(&v, colj) / vnorm2;
                for (c, &vi) in colj.iter_mut().zip(&v) {
                    *c -= s * vi;
                }
            }
        }
        w[k * m + k] = alpha;
        r_diag[k] = alpha;
        vs.push(v);
    }

    // Accumulate Q by applying the reflectors to the first n columns of I.
    let mut q = Matrix::zeros(m, n);
    for j in 0..n {
        let mut e = vec![0.0f64; m];
        e[j] = 1.0;
        for k in (0..n).rev() {
            let v = &vs[k];
            let vnorm2 = dot(v, v);
            if vnorm2 > 0.0 {
                let s = 2.0 * dot(v, &e[k..]) / vnorm2;
                for (ei, &vi) in e[k..].iter_mut().zip(v) {
                    *ei -= s * vi;
                }
            }
        }
        // Sign correction for Haar uniformity.
        let sign = if r_diag[j] >= 0.0 { 1.0 } else { -1.0 };
        for i in 0..m {
            q.set(i, j, sign * e[i]);
        }
    }
    (q, r_diag)
}

/// Least squares via QR: minimizes `||a x - b||_2` for a full column rank
/// `a` (`m >= n`). Returns `(x, residual_norm)`.
pub fn least_squares(a: &Matrix, b: &[f64]) -> (Vec<f64>, f64) {
    let m = a.rows();
    let n = a.cols();
    assert_eq!(b.len(), m);
    assert!(m >= n);

    let mut w = vec![0.0f64; m * n];
    for i in 0..m {
        for j in 0..n {
            w[j * m + i] = a.get(i, j);
        }
    }
    let mut rhs = b.to_vec();

    for k in 0..n {
        let col = &w[k * m + k..(k + 1) * m];
        let norm = norm2(col);
        let alpha = if w[k * m + k] >= 0.0 { -norm } else { norm };
        let mut v = col.to_vec();
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 > 0.0 {
            for j in k..n {
                let colj = &mut w[j * m + k..(j + 1) * m];
                let s = 2.0 * dot(&v, colj) / vnorm2;
                for (c, &vi) in colj.iter_mut().zip(&v) {
                    *c -= s * vi;
                }
            }
            let s = 2.0 * dot(&v, &rhs[k..]) / vnorm2;
            for (r, &vi) in rhs[k..].iter_mut().zip(&v) {
                *r -= s * vi;
            }
        }
        w[k * m + k] = alpha;
    }

    let mut x = vec![0.0f64; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s -= w[j * m + k] * x[j];
        }
        let r_kk = w[k * m + k];
        x[k] = if r_kk.abs() > 0.0 { s / r_kk } else { 0.0 };
    }
    let residual = norm2(&rhs[n..]);
    (x, residual)
}

/// Smallest `|R_kk|` of the thin QR of `a`; zero signals rank deficiency.
pub fn min_qr_diagonal(a: &Matrix) -> f64 {
    let (_, r_diag) = householder_qr_thin(a);
    r_diag.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()))
}

/// Power-iteration estimate of the largest singular value of `a`.
pub fn spectral_norm_estimate(a: &Matrix, iterations: usize) -> f64 {
    let n = a.cols();
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + (i as f64 * 0.7391).sin())
        .collect();
    let mut sigma = 0.0;
    for _ in 0..iterations {
        let av = a.matvec(&v);
        let atav = a.transpose_matvec(&av);
        let norm = norm2(&atav);
        if norm == 0.0 {
            return 0.0;
        }
        sigma = norm2(&av);
        for (vi, &ai) in v.iter_mut().zip(&atav) {
            *vi = ai / norm;
        }
    }
    sigma
}
