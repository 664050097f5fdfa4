//! Dense Gaussian elimination with partial pivoting.

use crate::error::{PollingError, Result};

/// Row-major square matrix with its right-hand side.
#[derive(Debug, Clone)]
pub struct System {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl System {
    pub fn new(n: usize) -> Self {
        System { n, a: vec![0.0; n * n], b: vec![0.0; n] }
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        self.a[row * self.n + col] += v;
    }

    pub fn add_rhs(&mut self, row: usize, v: f64) {
        self.b[row] += v;
    }

    pub fn solve(mut self) -> Result<Vec<f64>> {
        let n = self.n;
        let scale = self.a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&r, &s| self.a[r * n + col].abs().total_cmp(&self.a[s * n + col].abs()))
                .expect("nonempty range");
            if self.a[piv * n + col].abs() <= 1e-13 * scale {
                return Err(PollingError::SingularSystem);
            }
            if piv != col {
                for c in 0..n {
                    self.a.swap(piv * n + c, col * n + c);
                }
                self.b.swap(piv, col);
            }
            let d = self.a[col * n + col];
            for r in col + 1..n {
                let f = self.a[r * n + col] / d;
                if f == 0.0 {
                    continue;
                }
                for c in col..n {
                    self.a[r * n + c] -= f * self.a[col * n + c];
                }
                self.b[r] -= f * self.b[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let mut s = self.b[r];
            for c in r + 1..n {
                s -= self.a[r * n + c] * x[c];
            }
            x[r] = s / self.a[r * n + r];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        let mut s = System::new(3);
        let a = [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        let x = [1.0, -2.0, 0.5];
        for r in 0..3 {
            for c in 0..3 {
                s.add(r, c, a[r][c]);
            }
            s.add_rhs(r, (0..3).map(|c| a[r][c] * x[c]).sum());
        }
        let got = s.solve().unwrap();
        for i in 0..3 {
            assert!((got[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn detects_singular() {
        let mut s = System::new(2);
        s.add(0, 0, 1.0);
        s.add(0, 1, 2.0);
        s.add(1, 0, 2.0);
        s.add(1, 1, 4.0);
        assert_eq!(s.solve().unwrap_err(), PollingError::SingularSystem);
    }
}
