//! Small dense matrices and row reduction.
//!
//! Everything here works on the tiny 0/1 event matrices this crate deals in,
//! so the routines favour clarity over blocking or cache tricks.

use std::fmt;

/// Pivots with magnitude at or below this are treated as zero.
pub const PIVOT_TOL: f64 = 1e-10;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    ///
    /// Panics if the rows are ragged.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
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

    /// `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        self.rows_iter().map(|r| dot(r, x)).collect()
    }

    /// `selfᵀ * y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &yi) in self.rows_iter().zip(y) {
            if yi != 0.0 {
                for (o, &v) in out.iter_mut().zip(r) {
                    *o += yi * v;
                }
            }
        }
        out
    }

    /// Selects a subset of columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (k, &j) in cols.iter().enumerate() {
                m[(i, k)] = self[(i, j)];
            }
        }
        m
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let picked: Vec<&[f64]> = rows.iter().map(|&i| self.row(i)).collect();
        if picked.is_empty() {
            return Matrix::zeros(0, self.cols);
        }
        Matrix::from_rows(&picked)
    }

    pub fn rank(&self) -> usize {
        rref(self).pivots.len()
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

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows_iter()).finish()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reduced row-echelon form together with its pivot columns.
#[derive(Clone, Debug)]
pub struct Rref {
    pub matrix: Matrix,
    pub pivots: Vec<usize>,
}

impl Rref {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// The nonzero rows (one per pivot).
    pub fn basis(&self) -> Matrix {
        let idx: Vec<usize> = (0..self.rank()).collect();
        self.matrix.select_rows(&idx)
    }
}

/// Gauss-Jordan elimination with partial pivoting.
pub fn rref(m: &Matrix) -> Rref {
    let mut a = m.clone();
    let (rows, cols) = (a.rows, a.cols);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, mag) = (r..rows)
            .map(|i| (i, a[(i, c)].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= PIVOT_TOL {
            for i in r..rows {
                a[(i, c)] = 0.0;
            }
            continue;
        }
        if best != r {
            for j in 0..cols {
                a.data.swap(best * cols + j, r * cols + j);
            }
        }
        let p = a[(r, c)];
        for j in 0..cols {
            a[(r, j)] /= p;
        }
        a[(r, c)] = 1.0;
        for i in 0..rows {
            if i == r {
                continue;
            }
            let factor = a[(i, c)];
            if factor == 0.0 {
                continue;
            }
            for j in 0..cols {
                let v = a[(r, j)];
                a[(i, j)] -= factor * v;
            }
            a[(i, c)] = 0.0;
        }
        pivots.push(c);
        r += 1;
    }
    for v in a.data.iter_mut() {
        if v.abs() <= PIVOT_TOL * 1e-2 {
            *v = 0.0;
        }
    }
    Rref { matrix: a, pivots }
}

/// Finds `a` with `rowsᵀ a = target`, i.e. expresses `target` as a linear
/// combination of the rows. Returns `None` when `target` is outside the row
/// span. Free coefficients are set to zero.
pub fn row_combination(rows: &Matrix, target: &[f64]) -> Option<Vec<f64>> {
    let n = rows.nrows();
    let len = rows.ncols();
    assert_eq!(target.len(), len);
    // augmented system [rowsᵀ | target], one equation per column of `rows`
    let mut aug = Matrix::zeros(len, n + 1);
    for j in 0..len {
        for i in 0..n {
            aug[(j, i)] = rows[(i, j)];
        }
        aug[(j, n)] = target[j];
    }
    let red = rref(&aug);
    if red.pivots.last() == Some(&n) {
        return None;
    }
    let mut a = vec![0.0; n];
    for (k, &p) in red.pivots.iter().enumerate() {
        a[p] = red.matrix[(k, n)];
    }
    let back = rows.tr_mul_vec(&a);
    let scale = 1.0 + target.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = back.iter().zip(target).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    (err <= 1e-8 * scale).then_some(a)
}

/// A nonzero vector spanning the null space of `m`, assuming the null space
/// is one-dimensional. Returns `None` otherwise.
pub fn null_vector(m: &Matrix) -> Option<Vec<f64>> {
    let red = rref(m);
    if m.ncols() != red.rank() + 1 {
        return None;
    }
    let free = (0..m.ncols()).find(|c| !red.pivots.contains(c))?;
    let mut v = vec![0.0; m.ncols()];
    v[free] = 1.0;
    for (k, &p) in red.pivots.iter().enumerate() {
        v[p] = -red.matrix[(k, free)];
    }
    Some(v)
}


/// Least squares `min ‖A x - b‖` over the columns in `active`, via modified
/// Gram-Schmidt. Returns `None` if the active columns are numerically
/// dependent.
fn active_least_squares(a: &Matrix, b: &[f64], active: &[usize]) -> Option<Vec<f64>> {
    let m = a.nrows();
    let k = active.len();
    let mut q: Vec<Vec<f64>> = active.iter().map(|&j| a.column(j)).collect();
    let mut r = Matrix::zeros(k, k);
    for i in 0..k {
        for p in 0..i {
            let proj = dot(&q[p], &q[i]);
            r[(p, i)] = proj;
            let (head, tail) = q.split_at_mut(i);
            for (x, y) in tail[0].iter_mut().zip(&head[p]) {
                *x -= proj * y;
            }
        }
        let norm = dot(&q[i], &q[i]).sqrt();
        if norm <= 1e-11 {
            return None;
        }
        r[(i, i)] = norm;
        for x in q[i].iter_mut() {
            *x /= norm;
        }
    }
    let qtb: Vec<f64> = q.iter().map(|col| dot(col, b)).collect();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = qtb[i];
        for j in i + 1..k {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    debug_assert_eq!(m, b.len());
    Some(x)
}

/// Nonnegative least squares, `min ‖A x - b‖` subject to `x ≥ 0`
/// (Lawson-Hanson active set).
pub fn nnls(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = a.ncols();
    let mut x = vec![0.0; n];
    let mut passive: Vec<usize> = Vec::new();
    let tol = 1e-13 * (1.0 + b.iter().map(|v| v.abs()).sum::<f64>());
    let residual = |x: &[f64]| -> Vec<f64> {
        a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
    };
    for _outer in 0..(3 * n + 10) {
        let w = a.tr_mul_vec(&residual(&x));
        let candidate = (0..n)
            .filter(|j| !passive.contains(j))
            .map(|j| (j, w[j]))
            .filter(|&(_, wj)| wj > tol)
            .fold(None, |best: Option<(usize, f64)>, c| match best {
                Some(b) if b.1 >= c.1 => Some(b),
                _ => Some(c),
            });
        let Some((t, _)) = candidate else { break };
        passive.push(t);
        let mut added_ok = false;
        for _inner in 0..(3 * n + 10) {
            let Some(s) = active_least_squares(a, b, &passive) else {
                // the new column is dependent on the passive set
                passive.pop();
                break;
            };
            if s.iter().all(|&v| v > 0.0) {
                for (k, &j) in passive.iter().enumerate() {
                    x[j] = s[k];
                }
                added_ok = true;
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in passive.iter().enumerate() {
                if s[k] <= 0.0 {
                    let denom = x[j] - s[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = if alpha.is_finite() { alpha } else { 0.0 };
            for (k, &j) in passive.iter().enumerate() {
                x[j] += alpha * (s[k] - x[j]);
            }
            passive.retain(|&j| {
                if x[j] <= 1e-15 {
                    x[j] = 0.0;
                    false
                } else {
                    true
                }
            });
            if passive.is_empty() {
                break;
            }
        }
        if !added_ok && !passive.contains(&t) {
            // stalled on a dependent column; nothing more to gain
            break;
        }
    }
    x
}

#[cfg(test)]
mod nnls_tests {
    use super::*;

    #[test]
    fn nnls_feasible_system_has_zero_residual() {
        // columns of the extended tetrahedron matrix, target is a convex combination
        let a = Matrix::from_rows(&[
            vec![1.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0, 1.0],
        ]);
        let pi = [0.1, 0.2, 0.3, 0.4];
        let b = a.mul_vec(&pi);
        let x = nnls(&a, &b);
        for (u, v) in x.iter().zip(&pi) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn nnls_clips_negative_solution() {
        let a = Matrix::identity(2);
        let x = nnls(&a, &[-1.0, 2.0]);
        assert_eq!(x, vec![0.0, 2.0]);
    }
}
