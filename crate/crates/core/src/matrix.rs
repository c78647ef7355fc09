//! Small dense real matrices: products, generalized inverses, projectors,
//! symmetric inverses and Loewner-order comparisons.
//!
//! Sizes here stay below a few hundred rows, so everything is plain
//! row-major `Vec<f64>` with elimination-based factorizations.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};

/// Relative pivot threshold used by [`Matrix::g_inverse`] and [`Matrix::rank`].
pub const PIVOT_RTOL: f64 = 1e-9;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// The all-ones matrix `J`.
    pub fn ones(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![1.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn tr_mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Dimension(format!(
                "cannot form AᵀB for {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let brow = other.row(r);
            for (i, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Dimension(format!(
                "{}x{} and {}x{} are not conformable",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn try_add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Dimension(format!(
                "cannot concatenate {} rows with {} rows",
                self.rows, other.rows
            )));
        }
        Ok(Matrix::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        }))
    }

    /// Submatrix with the given rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn symmetrized(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Row and column indices of a maximal nonsingular submatrix, found by
    /// Gaussian elimination with complete pivoting.
    fn pivots(&self) -> (Vec<usize>, Vec<usize>) {
        let (m, n) = (self.rows, self.cols);
        let mut a = self.data.clone();
        let mut rperm: Vec<usize> = (0..m).collect();
        let mut cperm: Vec<usize> = (0..n).collect();
        let thresh = PIVOT_RTOL * self.max_abs();
        let mut rank = 0;
        for step in 0..m.min(n) {
            let (mut bi, mut bj, mut best) = (step, step, 0.0);
            for i in step..m {
                for j in step..n {
                    let v = a[i * n + j].abs();
                    if v > best {
                        (bi, bj, best) = (i, j, v);
                    }
                }
            }
            if best <= thresh || best == 0.0 {
                break;
            }
            if bi != step {
                for j in 0..n {
                    a.swap(bi * n + j, step * n + j);
                }
                rperm.swap(bi, step);
            }
            if bj != step {
                for i in 0..m {
                    a.swap(i * n + bj, i * n + step);
                }
                cperm.swap(bj, step);
            }
            let piv = a[step * n + step];
            for i in step + 1..m {
                let f = a[i * n + step] / piv;
                if f != 0.0 {
                    for j in step..n {
                        a[i * n + j] -= f * a[step * n + j];
                    }
                }
            }
            rank += 1;
        }
        rperm.truncate(rank);
        cperm.truncate(rank);
        (rperm, cperm)
    }

    /// Numerical rank at relative tolerance [`PIVOT_RTOL`].
    pub fn rank(&self) -> usize {
        self.pivots().0.len()
    }

    /// A generalized inverse `G` with `A G A = A`.
    ///
    /// Picks a maximal nonsingular `r × r` submatrix `A[R, C]` by complete
    /// pivoting and places its inverse at `G[C, R]`, zeros elsewhere.
    pub fn g_inverse(&self) -> Matrix {
        let (rsel, csel) = self.pivots();
        let mut g = Matrix::zeros(self.cols, self.rows);
        if rsel.is_empty() {
            return g;
        }
        let core = self.select(&rsel, &csel);
        let inv = gauss_jordan_inverse(&core).expect("pivoted core block is nonsingular");
        for (a, &c) in csel.iter().enumerate() {
            for (b, &r) in rsel.iter().enumerate() {
                g[(c, r)] = inv[(a, b)];
            }
        }
        g
    }

    /// Inverse of a symmetric matrix. Fails when the smallest pivot of the
    /// symmetric (diagonally pivoted) elimination does not exceed `tol`.
    pub fn inverse_spd(&self, tol: f64) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::Dimension(format!(
                "inverse of a non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut a = self.symmetrized();
        let mut inv = Matrix::identity(n);
        let mut done = vec![false; n];
        for step in 0..n {
            let (mut best, mut bi) = (f64::NEG_INFINITY, usize::MAX);
            for i in 0..n {
                if !done[i] && a[(i, i)] > best {
                    (best, bi) = (a[(i, i)], i);
                }
            }
            if best <= tol {
                return Err(Error::Singular { pivot: best, step });
            }
            done[bi] = true;
            let piv = a[(bi, bi)];
            for j in 0..n {
                a[(bi, j)] /= piv;
                inv[(bi, j)] /= piv;
            }
            for i in 0..n {
                if i == bi {
                    continue;
                }
                let f = a[(i, bi)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[(i, j)] -= f * a[(bi, j)];
                    inv[(i, j)] -= f * inv[(bi, j)];
                }
            }
        }
        Ok(inv.symmetrized())
    }

    /// `true` iff `b − self` is positive semidefinite up to the tolerance
    /// `tol · (1 + ‖b − self‖∞)`, tested by symmetric pivoted elimination.
    pub fn loewner_leq(&self, b: &Matrix, tol: f64) -> Result<bool> {
        if !self.is_square() || (self.rows, self.cols) != (b.rows, b.cols) {
            return Err(Error::Dimension(format!(
                "Loewner comparison of {}x{} with {}x{}",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        let d = b.try_sub(self)?.symmetrized();
        Ok(is_psd(&d, tol * (1.0 + d.norm_inf())))
    }
}

fn is_psd(d: &Matrix, eps: f64) -> bool {
    let n = d.rows;
    let mut a = d.clone();
    let mut active: Vec<usize> = (0..n).collect();
    while !active.is_empty() {
        let (pos, &k) = active
            .iter()
            .enumerate()
            .max_by(|x, y| a[(*x.1, *x.1)].total_cmp(&a[(*y.1, *y.1)]))
            .unwrap();
        let piv = a[(k, k)];
        if piv < -eps {
            return false;
        }
        if piv <= eps {
            // |a_ij| ≤ sqrt(a_ii a_jj) ≤ eps for PSD, so the rest must vanish.
            return active
                .iter()
                .all(|&i| active.iter().all(|&j| a[(i, j)].abs() <= eps));
        }
        active.swap_remove(pos);
        for &i in &active {
            let f = a[(i, k)] / piv;
            for &j in &active {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    true
}

fn gauss_jordan_inverse(m: &Matrix) -> Result<Matrix> {
    let n = m.rows;
    let mut a = m.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let (bi, best) = (col..n)
            .map(|i| (i, a[(i, col)].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if best == 0.0 {
            return Err(Error::Singular { pivot: 0.0, step: col });
        }
        if bi != col {
            for j in 0..n {
                a.data.swap(bi * n + j, col * n + j);
                inv.data.swap(bi * n + j, col * n + j);
            }
        }
        let piv = a[(col, col)];
        for j in 0..n {
            a[(col, j)] /= piv;
            inv[(col, j)] /= piv;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = a[(i, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[(i, j)] -= f * a[(col, j)];
                inv[(i, j)] -= f * inv[(col, j)];
            }
        }
    }
    Ok(inv)
}

/// Orthogonal projector onto the column space of `x` and its complement:
/// `(X (XᵀX)⁻ Xᵀ, I − X (XᵀX)⁻ Xᵀ)`.
pub fn projector(x: &Matrix) -> (Matrix, Matrix) {
    let xtx = x.tr_mul(x).expect("XᵀX is always conformable");
    let g = xtx.g_inverse();
    let xg = x.matmul(&g).expect("conformable");
    let pr = xg.matmul(&x.transpose()).expect("conformable").symmetrized();
    let perp = Matrix::identity(x.rows).try_sub(&pr).expect("same shape");
    (pr, perp)
}

/// `Aᵀ pr⊥(X) B`, computed as `AᵀB − AᵀX (XᵀX)⁻ XᵀB` without forming the
/// full projector.
pub fn residual_cross(a: &Matrix, x: &Matrix, b: &Matrix) -> Result<Matrix> {
    let g = x.tr_mul(x)?.g_inverse();
    let ax = a.tr_mul(x)?;
    let xb = x.tr_mul(b)?;
    a.tr_mul(b)?.try_sub(&ax.matmul(&g)?.matmul(&xb)?)
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("dimension mismatch in product")
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        self.try_add(rhs).expect("dimension mismatch in sum")
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        self.try_sub(rhs).expect("dimension mismatch in difference")
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(|x| format!("{x:10.5}")).collect();
            writeln!(f, "  [{}]", cells.join(" "))?;
        }
        Ok(())
    }
}
