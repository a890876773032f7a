//! Small dense helpers on top of nalgebra for the restricted normal equations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot threshold below which a restricted Gram matrix is declared singular.
pub const PIVOT_RATIO: f64 = 1e-10;

/// Cholesky factor of a symmetric positive definite matrix, with a rank check
/// on the pivots `L[k,k]^2`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let m = a.nrows();
        let mut l = DMatrix::<f64>::zeros(m, m);
        let mut max_pivot = 0.0f64;
        for j in 0..m {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            max_pivot = max_pivot.max(a[(j, j)].abs()).max(diag);
            if !(diag > PIVOT_RATIO * max_pivot) {
                let ratio = if max_pivot > 0.0 { diag / max_pivot } else { 0.0 };
                return Err(Error::RankDeficient { ratio });
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..m {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let m = self.l.nrows();
        let mut z = b.clone();
        for i in 0..m {
            let mut v = z[i];
            for k in 0..i {
                v -= self.l[(i, k)] * z[k];
            }
            z[i] = v / self.l[(i, i)];
        }
        for i in (0..m).rev() {
            let mut v = z[i];
            for k in (i + 1)..m {
                v -= self.l[(k, i)] * z[k];
            }
            z[i] = v / self.l[(i, i)];
        }
        z
    }
}

/// Solve `a x = b` for SPD `a`, with one step of iterative refinement.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = Cholesky::new(a)?;
    let mut x = chol.solve(b);
    let r = b - a * &x;
    x += chol.solve(&r);
    Ok(x)
}

/// Principal submatrix `a[idx, idx]`.
pub fn principal(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

pub fn gather(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Lexicographic iterator over the `k`-subsets of `0..n`.
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self { n, idx: (0..k).collect(), done: k > n }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in (i + 1)..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_count_matches_binomial() {
        for n in 0..8 {
            for k in 0..=n {
                assert_eq!(Combinations::new(n, k).count() as f64, binomial(n, k));
            }
        }
        assert_eq!(Combinations::new(3, 0).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(Cholesky::new(&a), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn spd_solve_recovers_solution() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let b = &a * &x;
        let got = spd_solve(&a, &b).unwrap();
        assert!((got - x).amax() < 1e-14);
    }
}
