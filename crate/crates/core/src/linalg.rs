//! Tiny stack-allocated symmetric matrices (d ≤ 3) for metric algebra.

use nalgebra::Matrix3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    dim: usize,
    a: [[f64; 3]; 3],
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= 3);
        Self { dim, a: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
        self.a[j][i] = v;
    }

    pub(crate) fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] += v;
        if i != j {
            self.a[j][i] += v;
        }
    }

    pub fn scale(mut self, s: f64) -> Self {
        for r in self.a.iter_mut() {
            for v in r.iter_mut() {
                *v *= s;
            }
        }
        self
    }

    pub fn sub(&self, o: &SymMat) -> Self {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.a[i][j] -= o.a[i][j];
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.a[i][j] * v[j]).sum()).collect()
    }

    /// `uᵀ A v`
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += u[i] * self.a[i][j] * v[j];
            }
        }
        s
    }

    pub fn quad(&self, v: &[f64]) -> f64 {
        self.bilinear(v, v)
    }

    pub fn matmul(&self, o: &SymMat) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i][j] = (0..self.dim).map(|k| self.a[i][k] * o.a[k][j]).sum();
            }
        }
        out
    }

    pub fn det(&self) -> f64 {
        let a = &self.a;
        match self.dim {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    pub fn inverse(&self) -> Option<SymMat> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let a = &self.a;
        let mut m = SymMat::zeros(self.dim);
        match self.dim {
            1 => m.a[0][0] = 1.0 / det,
            2 => {
                m.a[0][0] = a[1][1] / det;
                m.a[1][1] = a[0][0] / det;
                m.a[0][1] = -a[0][1] / det;
                m.a[1][0] = -a[1][0] / det;
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                        let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                        m.a[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
                    }
                }
            }
        }
        Some(m)
    }

    /// Lower Cholesky factor; `None` unless strictly positive definite.
    pub fn cholesky(&self) -> Option<[[f64; 3]; 3]> {
        let n = self.dim;
        let mut l = [[0.0; 3]; 3];
        for j in 0..n {
            let mut d = self.a[j][j];
            for k in 0..j {
                d -= l[j][k] * l[j][k];
            }
            if !(d > 0.0) {
                return None;
            }
            l[j][j] = d.sqrt();
            for i in j + 1..n {
                let mut s = self.a[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                l[i][j] = s / l[j][j];
            }
        }
        Some(l)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let a = &self.a;
        match self.dim {
            1 => a[0][0],
            2 => {
                let tr = a[0][0] + a[1][1];
                let disc = ((a[0][0] - a[1][1]).powi(2) + 4.0 * a[0][1] * a[0][1]).sqrt();
                0.5 * (tr + disc)
            }
            _ => {
                let m = Matrix3::from_fn(|i, j| a[i][j]);
                m.symmetric_eigenvalues().max()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_eigen_3d() {
        let mut m = SymMat::zeros(3);
        m.set(0, 0, 4.0);
        m.set(1, 1, 3.0);
        m.set(2, 2, 2.0);
        m.set(0, 1, 1.0);
        m.set(1, 2, 0.5);
        let inv = m.inverse().unwrap();
        let p = m.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                assert!((p[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(m.cholesky().is_some());
        let lam = m.max_eigenvalue();
        // Gershgorin upper bound and Rayleigh quotient lower bound
        assert!(lam <= 5.0 + 1e-12 && lam >= 4.0);
    }

    #[test]
    fn indefinite_rejected() {
        let mut m = SymMat::zeros(2);
        m.set(0, 0, 1.0);
        m.set(1, 1, -1.0);
        assert!(m.cholesky().is_none());
    }
}
