//! Small dense linear algebra for the estimating equations.
//!
//! Every least-squares problem in this crate has at most a handful of
//! columns and possibly many rows, so a column-pivoted Householder QR on the
//! design itself is both cheap and well conditioned. Rank deficiency is
//! reported, never hidden behind a pseudo-inverse.

use crate::error::{Error, Result};

/// Relative tolerance on |R_kk| / |R_00| below which a column is declared
/// linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Row-major dense matrix.
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
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has wrong length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
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

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// `self^T diag(w) self` accumulated row by row.
    pub fn weighted_gram(&self, weights: Option<&[f64]>) -> Matrix {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for i in 0..self.rows {
            let w = weights.map_or(1.0, |w| w[i]);
            if w == 0.0 {
                continue;
            }
            let r = self.row(i);
            for a in 0..p {
                let ra = w * r[a];
                for b in a..p {
                    g[(a, b)] += ra * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
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

/// Column-pivoted Householder QR factorization of a tall matrix.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    rows: usize,
    cols: usize,
    // Column-major working storage: R in the upper triangle, Householder
    // vectors (with implicit leading entries stored in `head`) below it.
    qr: Vec<f64>,
    head: Vec<f64>,
    diag: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub fn new(a: &Matrix) -> Self {
        let (m, n) = (a.rows, a.cols);
        let mut qr = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                qr[j * m + i] = a[(i, j)];
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut head = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let steps = m.min(n);

        for k in 0..steps {
            // Pivot on the largest remaining column norm.
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..n {
                let col = &qr[j * m + k..(j + 1) * m];
                let s: f64 = col.iter().map(|v| v * v).sum();
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                for i in 0..m {
                    qr.swap(k * m + i, best * m + i);
                }
                perm.swap(k, best);
            }

            let norm = best_norm.sqrt();
            if norm == 0.0 {
                diag[k] = 0.0;
                head[k] = 0.0;
                continue;
            }
            let x0 = qr[k * m + k];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            // v = x - alpha e1, scaled so that H = I - 2 v v^T / (v^T v).
            let v0 = x0 - alpha;
            qr[k * m + k] = v0;
            let vtv = {
                let col = &qr[k * m + k..(k + 1) * m];
                col.iter().map(|v| v * v).sum::<f64>()
            };
            for j in k + 1..n {
                let (left, right) = qr.split_at_mut(j * m);
                let v = &left[k * m + k..(k + 1) * m];
                let c = &mut right[k..m];
                let s = 2.0 * dot(v, c) / vtv;
                for (ci, vi) in c.iter_mut().zip(v) {
                    *ci -= s * vi;
                }
            }
            head[k] = vtv;
            diag[k] = alpha;
        }

        let r00 = diag.first().map_or(0.0, |d| d.abs());
        let mut rank = 0;
        for d in diag.iter().take(steps) {
            if r00 > 0.0 && d.abs() > RANK_TOL * r00 {
                rank += 1;
            } else {
                break;
            }
        }

        PivotedQr {
            rows: m,
            cols: n,
            qr,
            head,
            diag,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.cols
    }

    /// Original index of the first column found to be dependent, if any.
    pub fn dependent_column(&self) -> Option<usize> {
        (!self.is_full_rank()).then(|| self.perm[self.rank.min(self.cols - 1)])
    }

    fn apply_qt(&self, b: &mut [f64]) {
        let m = self.rows;
        for k in 0..self.rank {
            let vtv = self.head[k];
            if vtv == 0.0 {
                continue;
            }
            let v = &self.qr[k * m + k..(k + 1) * m];
            let s = 2.0 * dot(v, &b[k..]) / vtv;
            for (bi, vi) in b[k..].iter_mut().zip(v) {
                *bi -= s * vi;
            }
        }
    }

    /// Least-squares solution of `A x = b`; `None` when A is rank deficient.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(b.len(), self.rows);
        if !self.is_full_rank() {
            return None;
        }
        let (m, n) = (self.rows, self.cols);
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let mut z = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = qtb[k];
            for j in k + 1..n {
                s -= self.qr[j * m + k] * z[j];
            }
            z[k] = s / self.diag[k];
        }
        let mut x = vec![0.0; n];
        for (k, &orig) in self.perm.iter().enumerate() {
            x[orig] = z[k];
        }
        Some(x)
    }
}

/// Name of augmented-covariate column `j` (0 is the intercept).
pub fn column_name(j: usize) -> String {
    if j == 0 {
        "intercept".to_string()
    } else {
        format!("x{j}")
    }
}

/// Ordinary least squares of `y` on the rows of `design`.
pub fn least_squares(design: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    let qr = PivotedQr::new(design);
    qr.solve(y).ok_or_else(|| Error::RankDeficient {
        column: column_name(qr.dependent_column().unwrap_or(0)),
    })
}

/// Weighted least squares; rows with zero weight are dropped.
pub fn weighted_least_squares(design: &Matrix, y: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(design.rows(), y.len());
    assert_eq!(design.rows(), weights.len());
    let p = design.cols();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..design.rows() {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let s = w.sqrt();
        rows.extend(design.row(i).iter().map(|v| v * s));
        rhs.push(y[i] * s);
    }
    let scaled = Matrix::from_row_major(rhs.len(), p, rows);
    least_squares(&scaled, &rhs)
}

/// Inverse of a square non-singular matrix.
pub fn inverse(a: &Matrix) -> Result<Matrix> {
    assert_eq!(a.rows(), a.cols(), "inverse of a non-square matrix");
    let n = a.rows();
    let qr = PivotedQr::new(a);
    if !qr.is_full_rank() {
        return Err(Error::RankDeficient {
            column: column_name(qr.dependent_column().unwrap_or(0)),
        });
    }
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = qr.solve(&e).expect("full rank checked above");
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

/// Sup-norm of `X^T diag(w) (y - X beta)`.
pub fn normal_equation_residual(design: &Matrix, y: &[f64], beta: &[f64], weights: Option<&[f64]>) -> f64 {
    let mut g = vec![0.0; design.cols()];
    for i in 0..design.rows() {
        let w = weights.map_or(1.0, |w| w[i]);
        let r = w * (y[i] - dot(design.row(i), beta));
        for (gj, xj) in g.iter_mut().zip(design.row(i)) {
            *gj += xj * r;
        }
    }
    g.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_recovers_coefficients() {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let t = i as f64;
                vec![1.0, t, (t * 0.7).sin()]
            })
            .collect();
        let x = Matrix::from_rows(&rows);
        let beta = [0.5, -2.0, 3.0];
        let y = x.matvec(&beta);
        let b = least_squares(&x, &y).unwrap();
        for (u, v) in b.iter().zip(beta) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn dependent_column_is_named() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64, 2.0 * i as f64]).collect();
        let x = Matrix::from_rows(&rows);
        let err = least_squares(&x, &[0.0; 6]).unwrap_err();
        match err {
            Error::RankDeficient { column } => assert!(column == "x1" || column == "x2"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]]);
        let inv = inverse(&a).unwrap();
        let id = a.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]]);
        let y = [1.0, 3.0, 5.0, 100.0];
        let b = weighted_least_squares(&x, &y, &[1.0, 1.0, 1.0, 0.0]).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn underdetermined_is_rank_deficient() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]);
        assert!(least_squares(&x, &[1.0]).is_err());
    }
}
