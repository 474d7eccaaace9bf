//! Small dense linear algebra: row-major square matrices, LU with partial pivoting,
//! log-determinants, and a few nalgebra-backed helpers.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub dimension: usize,
    pub entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dimension: usize) -> Self {
        SquareMatrix {
            dimension,
            entries: vec![0.0; dimension * dimension],
        }
    }

    pub fn identity(dimension: usize) -> Self {
        let mut m = Self::zeros(dimension);
        for i in 0..dimension {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n);
            m.entries[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dimension).map(|i| self[(i, i)]).sum()
    }

    pub fn mul(&self, other: &SquareMatrix) -> SquareMatrix {
        let n = self.dimension;
        assert_eq!(n, other.dimension);
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.entries[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> SquareMatrix {
        SquareMatrix {
            dimension: self.dimension,
            entries: self.entries.iter().map(|x| x * s).collect(),
        }
    }

    /// I − self.
    pub fn identity_minus(&self) -> SquareMatrix {
        let mut m = self.scaled(-1.0);
        for i in 0..self.dimension {
            m[(i, i)] += 1.0;
        }
        m
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn principal(&self, keep: &[usize]) -> SquareMatrix {
        let mut m = Self::zeros(keep.len());
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                m[(a, b)] = self[(i, j)];
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.dimension;
        (0..n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dimension, self.dimension, &self.entries)
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dimension)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.dimension + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.dimension + j]
    }
}

/// LU factorisation with partial pivoting, stored in place.
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    pub fn new(m: &SquareMatrix) -> Lu {
        let n = m.dimension;
        let mut lu = m.entries.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                if f == 0.0 {
                    continue;
                }
                lu[i * n + k] = f;
                for j in k + 1..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Lu {
            n,
            lu,
            perm,
            sign,
            singular,
        }
    }

    /// (sign, log|det|); sign 0 for a singular matrix.
    pub fn log_det(&self) -> (f64, f64) {
        if self.singular {
            return (0.0, f64::NEG_INFINITY);
        }
        let mut sign = self.sign;
        let mut log = 0.0;
        for k in 0..self.n {
            let d = self.lu[k * self.n + k];
            if d < 0.0 {
                sign = -sign;
            }
            log += d.abs().ln();
        }
        (sign, log)
    }

    pub fn det(&self) -> f64 {
        let (s, l) = self.log_det();
        if s == 0.0 {
            0.0
        } else {
            s * l.exp()
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }
}

pub fn det(m: &SquareMatrix) -> f64 {
    Lu::new(m).det()
}

pub fn log_abs_det(m: &SquareMatrix) -> (f64, f64) {
    Lu::new(m).log_det()
}

pub fn inverse(m: &SquareMatrix) -> SquareMatrix {
    let n = m.dimension;
    let lu = Lu::new(m);
    let mut inv = SquareMatrix::zeros(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[j] = 1.0;
        let col = lu.solve(&e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    inv
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &SquareMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Least-squares solution of the overdetermined system `rows · x ≈ rhs`.
pub fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let m = rows.len();
    let p = rows[0].len();
    let a = DMatrix::from_fn(m, p, |i, j| rows[i][j]);
    let b = nalgebra::DVector::from_column_slice(rhs);
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-14).expect("svd with both factors").iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_det_matches_cofactor_expansion() {
        let m = SquareMatrix::from_rows(&[
            vec![2.0, -1.0, 0.5],
            vec![0.0, 3.0, 1.0],
            vec![4.0, 1.0, -2.0],
        ]);
        let cof = 2.0 * (3.0 * -2.0 - 1.0 * 1.0) - (-1.0) * (0.0 * -2.0 - 1.0 * 4.0)
            + 0.5 * (0.0 * 1.0 - 3.0 * 4.0);
        assert!((det(&m) - cof).abs() < 1e-12);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = SquareMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let p = m.mul(&inverse(&m));
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[(i, j)] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_matrix_has_zero_det() {
        let m = SquareMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert_eq!(det(&m), 0.0);
    }

    #[test]
    fn least_squares_recovers_line() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64]).collect();
        let rhs: Vec<f64> = (0..5).map(|i| 2.0 + 3.0 * i as f64).collect();
        let x = least_squares(&rows, &rhs);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }
}
