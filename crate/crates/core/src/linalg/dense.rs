//! Small dense systems: element-local inverses and reference solves in tests.

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        DenseMatrix { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Gaussian elimination with partial pivoting. Multiple right-hand sides
    /// are stored row-major in `rhs` with `nrhs` columns.
    pub fn solve_many(&self, rhs: &mut [f64], nrhs: usize) -> Result<()> {
        let n = self.n;
        assert_eq!(rhs.len(), n * nrhs);
        let mut a = self.data.clone();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pv <= scale * 1e-14 || pv == 0.0 {
                return Err(Error::Singular { row: k });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                for j in 0..nrhs {
                    rhs.swap(k * nrhs + j, p * nrhs + j);
                }
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / d;
                if f == 0.0 {
                    continue;
                }
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                for j in 0..nrhs {
                    rhs[i * nrhs + j] -= f * rhs[k * nrhs + j];
                }
            }
        }
        for k in (0..n).rev() {
            let d = a[k * n + k];
            for j in 0..nrhs {
                let mut s = rhs[k * nrhs + j];
                for i in k + 1..n {
                    s -= a[k * n + i] * rhs[i * nrhs + j];
                }
                rhs[k * nrhs + j] = s / d;
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_many(&mut x, 1)?;
        Ok(x)
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        let mut inv = DenseMatrix::identity(self.n);
        self.solve_many(&mut inv.data, self.n)?;
        Ok(inv)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_permuted_system() {
        let a = DenseMatrix::from_rows(3, vec![0.0, 2.0, 1.0, 1.0, 0.0, 0.0, 3.0, 1.0, 4.0]);
        let x = [1.0, -2.0, 0.5];
        let b = a.matvec(&x);
        let y = a.solve(&b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let a = DenseMatrix::from_rows(2, vec![4.0, 7.0, 2.0, 6.0]);
        let inv = a.inverse().unwrap();
        assert!((inv[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((inv[(0, 1)] + 0.7).abs() < 1e-15);
    }

    #[test]
    fn detects_singular() {
        let a = DenseMatrix::from_rows(2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(a.solve(&[1.0, 1.0]), Err(Error::Singular { row: 1 })));
    }
}
