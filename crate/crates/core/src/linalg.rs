//! Small dense linear-algebra kernel: rank and nullspace by Gauss-Jordan
//! elimination, least squares by Householder QR with column pivoting.
//! Sized for desk-scale systems (a few hundred rows).

use crate::scalar::{sc, Scalar};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            let (x, y) = (self.get(a, c), self.get(b, c));
            self.set(a, c, y);
            self.set(b, c, x);
        }
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

/// Absolute pivot threshold scaled to the matrix magnitude.
fn pivot_tol<T: Scalar>(m: &Mat<T>) -> T {
    m.max_abs().max(T::one()) * sc::<T>(1e-9)
}

/// Rank by Gauss-Jordan elimination with partial pivoting.
pub fn rank<T: Scalar>(m: &Mat<T>) -> usize {
    reduce(&mut m.clone()).len()
}

/// Reduces in place to RREF; returns (pivot row, pivot col) pairs in
/// elimination order. Columns are scanned left to right; within a column the
/// largest remaining entry wins.
fn reduce<T: Scalar>(m: &mut Mat<T>) -> Vec<(usize, usize)> {
    let tol = pivot_tol(m);
    let mut pivots = Vec::new();
    let mut next_row = 0;
    for col in 0..m.cols {
        if next_row == m.rows {
            break;
        }
        let (mut best, mut best_abs) = (next_row, m.get(next_row, col).abs());
        for r in next_row + 1..m.rows {
            let a = m.get(r, col).abs();
            if a > best_abs {
                best = r;
                best_abs = a;
            }
        }
        if best_abs <= tol {
            continue;
        }
        m.swap_rows(next_row, best);
        let inv = T::one() / m.get(next_row, col);
        for c in 0..m.cols {
            let v = m.get(next_row, c) * inv;
            m.set(next_row, c, v);
        }
        for r in 0..m.rows {
            if r == next_row {
                continue;
            }
            let f = m.get(r, col);
            if f != T::zero() {
                for c in 0..m.cols {
                    let v = m.get(r, c) - f * m.get(next_row, c);
                    m.set(r, c, v);
                }
            }
        }
        pivots.push((next_row, col));
        next_row += 1;
    }
    pivots
}

/// Basis of the nullspace, one vector per free column, built from the RREF:
/// the free column gets 1 and pivot columns back-fill.
pub fn nullspace<T: Scalar>(m: &Mat<T>) -> Vec<Vec<T>> {
    let mut r = m.clone();
    let pivots = reduce(&mut r);
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let mut basis = Vec::new();
    for free in 0..m.cols {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = vec![T::zero(); m.cols];
        v[free] = T::one();
        for &(pr, pc) in &pivots {
            v[pc] = -r.get(pr, free);
        }
        basis.push(v);
    }
    basis
}

/// Householder QR with column pivoting. The packed factor stores R on and
/// above the diagonal and the Householder vectors (v0 = 1 implicit) below.
pub struct Qr<T> {
    qr: Mat<T>,
    tau: Vec<T>,
    /// Factored column k came from original column perm[k].
    perm: Vec<usize>,
    rank: usize,
}

impl<T: Scalar> Qr<T> {
    pub fn factor(a: &Mat<T>) -> Self {
        let mut qr = a.clone();
        let (m, n) = (qr.rows, qr.cols);
        let kmax = m.min(n);
        let mut tau = vec![T::zero(); kmax];
        let mut perm: Vec<usize> = (0..n).collect();
        let tol = pivot_tol(a);

        let mut col_norm2: Vec<T> = (0..n)
            .map(|c| (0..m).map(|r| qr.get(r, c) * qr.get(r, c)).sum())
            .collect();

        let mut rank = 0;
        for k in 0..kmax {
            let mut best = k;
            for c in k + 1..n {
                if col_norm2[c] > col_norm2[best] {
                    best = c;
                }
            }
            if best != k {
                perm.swap(k, best);
                col_norm2.swap(k, best);
                for r in 0..m {
                    let (x, y) = (qr.get(r, k), qr.get(r, best));
                    qr.set(r, k, y);
                    qr.set(r, best, x);
                }
            }
            let norm: T = (k..m)
                .map(|r| qr.get(r, k) * qr.get(r, k))
                .sum::<T>()
                .sqrt();
            if norm <= tol {
                break;
            }
            rank += 1;
            let x0 = qr.get(k, k);
            let alpha = if x0 >= T::zero() { -norm } else { norm };
            let u0 = x0 - alpha;
            // H = I - tau v v', v = [1, u_{k+1..}/u0], tau = 2 u0^2 / ||u||^2
            let unorm2: T = u0 * u0
                + (k + 1..m)
                    .map(|r| qr.get(r, k) * qr.get(r, k))
                    .sum::<T>();
            tau[k] = sc::<T>(2.0) * u0 * u0 / unorm2;
            for r in k + 1..m {
                let v = qr.get(r, k) / u0;
                qr.set(r, k, v);
            }
            for c in k + 1..n {
                let mut dot = qr.get(k, c);
                for r in k + 1..m {
                    dot = dot + qr.get(r, k) * qr.get(r, c);
                }
                let f = tau[k] * dot;
                let v = qr.get(k, c) - f;
                qr.set(k, c, v);
                for r in k + 1..m {
                    let v = qr.get(r, c) - f * qr.get(r, k);
                    qr.set(r, c, v);
                }
            }
            qr.set(k, k, alpha);
            for c in k + 1..n {
                let x = qr.get(k, c);
                let v = col_norm2[c] - x * x;
                col_norm2[c] = if v > T::zero() { v } else { T::zero() };
            }
        }
        Self { qr, tau, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Applies Q' in place to a vector of length m.
    fn apply_qt(&self, b: &mut [T]) {
        let m = self.qr.rows;
        for k in 0..self.rank {
            if self.tau[k] == T::zero() {
                continue;
            }
            let mut dot = b[k];
            for r in k + 1..m {
                dot = dot + self.qr.get(r, k) * b[r];
            }
            let f = self.tau[k] * dot;
            b[k] = b[k] - f;
            for r in k + 1..m {
                b[r] = b[r] - f * self.qr.get(r, k);
            }
        }
    }

    /// Least squares solution of A x = b; free (rank-deficient) columns are
    /// set to zero.
    pub fn solve_least_squares(&self, b: &[T]) -> Vec<T> {
        let n = self.qr.cols;
        let mut rhs = b.to_vec();
        self.apply_qt(&mut rhs);
        let mut y = vec![T::zero(); self.rank];
        for i in (0..self.rank).rev() {
            let mut s = rhs[i];
            for j in i + 1..self.rank {
                s = s - self.qr.get(i, j) * y[j];
            }
            y[i] = s / self.qr.get(i, i);
        }
        let mut x = vec![T::zero(); n];
        for k in 0..self.rank {
            x[self.perm[k]] = y[k];
        }
        x
    }

    /// Norm of the component of b orthogonal to the column space of A.
    pub fn projection_residual(&self, b: &[T]) -> T {
        let mut rhs = b.to_vec();
        self.apply_qt(&mut rhs);
        rhs[self.rank..].iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// A nonzero vector c with A c = 0 when A is rank deficient.
    pub fn null_vector(&self) -> Option<Vec<T>> {
        let n = self.qr.cols;
        if self.rank >= n {
            return None;
        }
        // Over permuted columns R = [R11 R12; 0 0]; take the first free
        // column f: solve R11 y = -R[:, f], x = P [y; e_f].
        let f = self.rank;
        let mut y = vec![T::zero(); self.rank];
        for i in (0..self.rank).rev() {
            let mut s = -self.qr.get(i, f);
            for j in i + 1..self.rank {
                s = s - self.qr.get(i, j) * y[j];
            }
            y[i] = s / self.qr.get(i, i);
        }
        let mut x = vec![T::zero(); n];
        for k in 0..self.rank {
            x[self.perm[k]] = y[k];
        }
        x[self.perm[f]] = T::one();
        Some(x)
    }
}
