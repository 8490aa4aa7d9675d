//! Small dense and cyclic tridiagonal linear algebra helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Symmetric cyclic tridiagonal matrix: `diag[k]` on the diagonal and
/// `off[k]` coupling indices `k` and `k + 1 (mod n)`.
///
/// For `n = 2` both couplings land on the same entry and are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl CyclicTridiag {
    pub fn zeros(n: usize) -> Self {
        Self { diag: vec![0.0; n], off: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] += self.diag[k];
            if n > 1 {
                let j = (k + 1) % n;
                m[(k, j)] += self.off[k];
                m[(j, k)] += self.off[k];
            }
        }
        if n == 1 {
            m[(0, 0)] += 2.0 * self.off[0];
        }
        m
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let m = self.to_dense();
        let v = &m * DVector::from_column_slice(x);
        v.iter().copied().collect()
    }

    /// Solves `A x = d`; uses the corner rank-one reduction to two
    /// tridiagonal solves for `n ≥ 3` and a dense solve otherwise.
    pub fn solve(&self, d: &[f64]) -> Option<Vec<f64>> {
        let n = self.len();
        if n < 3 {
            let lu = self.to_dense().lu();
            return lu.solve(&DVector::from_column_slice(d)).map(|v| v.iter().copied().collect());
        }
        let alpha = self.off[n - 1];
        let gamma = if self.diag[0] != 0.0 { -self.diag[0] } else { -1.0 };
        let mut b = self.diag.clone();
        b[0] -= gamma;
        b[n - 1] -= alpha * alpha / gamma;
        let sub: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { self.off[k - 1] }).collect();
        let sup: Vec<f64> = (0..n).map(|k| if k == n - 1 { 0.0 } else { self.off[k] }).collect();
        let y = thomas(&sub, &b, &sup, d)?;
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = alpha;
        let z = thomas(&sub, &b, &sup, &u)?;
        let vy = y[0] + alpha / gamma * y[n - 1];
        let vz = z[0] + alpha / gamma * z[n - 1];
        let denom = 1.0 + vz;
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        let f = vy / denom;
        Some(y.iter().zip(&z).map(|(yi, zi)| yi - f * zi).collect())
    }

    /// Smallest eigenvalue from a dense symmetric eigensolve.
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.to_dense())
    }
}

/// Thomas algorithm for a tridiagonal system with sub-diagonal `a`
/// (`a[0]` unused), diagonal `b` and super-diagonal `c` (`c[n−1]` unused).
pub fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    if b[0] == 0.0 {
        return None;
    }
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        if m == 0.0 || !m.is_finite() {
            return None;
        }
        cp[i] = c[i] / m;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Some(x)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
