use serde::{Deserialize, Serialize};

use crate::geometry::Metric;

use super::FieldError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Zero ghost cells outside the box.
    #[default]
    Dirichlet,
    Periodic,
}

/// Isotropic cell-centred grid plus the time discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub d: usize,
    pub origin: Vec<f64>,
    pub extent: Vec<f64>,
    pub n: Vec<usize>,
    pub h: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_t: usize,
    pub cfl: f64,
    pub c_max: f64,
    pub boundary: Boundary,
}

pub const MAX_CFL: f64 = 0.5;

impl GridSpec {
    /// `dt = cfl·h/c_max`, then shrunk so an integer number of steps lands
    /// on `t_end`.
    pub fn new(
        origin: Vec<f64>,
        h: f64,
        n: Vec<usize>,
        t_end: f64,
        cfl: f64,
        m: &Metric,
        boundary: Boundary,
    ) -> Result<Self, FieldError> {
        let d = n.len();
        if !(d == 2 || d == 3) {
            return Err(FieldError::invalid("grid.n", "grid must be 2-D or 3-D"));
        }
        if origin.len() != d {
            return Err(FieldError::invalid("grid.origin", "length must match grid.n"));
        }
        if m.dim() != d {
            return Err(FieldError::invalid("metric", "metric dimension differs from the grid"));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(FieldError::invalid("grid.h", "spacing must be positive"));
        }
        if n.iter().any(|&k| k < 4) {
            return Err(FieldError::invalid("grid.n", "need at least 4 cells per axis"));
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(FieldError::invalid("grid.t_end", "final time must be positive"));
        }
        if !(cfl > 0.0) {
            return Err(FieldError::invalid("grid.cfl", "cfl must be positive"));
        }
        if cfl > MAX_CFL {
            return Err(FieldError::Cfl(cfl));
        }
        let mut g = GridSpec {
            d,
            extent: n.iter().map(|&k| k as f64 * h).collect(),
            origin,
            n,
            h,
            t_end,
            dt: 0.0,
            n_t: 0,
            cfl,
            c_max: 0.0,
            boundary,
        };
        let mut c_max = 0.0f64;
        for idx in 0..g.len() {
            let x = g.center(idx);
            m.check_spd(&x).map_err(|e| FieldError::invalid("metric", &e.to_string()))?;
            c_max = c_max.max(m.max_speed(&x).map_err(|e| FieldError::invalid("metric", &e.to_string()))?);
        }
        let dt_max = cfl * h / c_max;
        g.n_t = ((t_end / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        g.dt = t_end / g.n_t as f64;
        g.c_max = c_max;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major strides, axis 0 outermost.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.d];
        for i in (0..self.d - 1).rev() {
            s[i] = s[i + 1] * self.n[i + 1];
        }
        s
    }

    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        self.origin[axis] + (k as f64 + 0.5) * self.h
    }

    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        for i in (0..self.d).rev() {
            out[i] = idx % self.n[i];
            idx /= self.n[i];
        }
        out
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx).iter().enumerate().map(|(a, &k)| self.coord(a, k)).collect()
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// Nearest cell index along each axis (may be out of range).
    pub fn locate(&self, x: &[f64]) -> Vec<i64> {
        (0..self.d).map(|a| ((x[a] - self.origin[a]) / self.h - 0.5).round() as i64).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.d).all(|a| x[a] >= self.origin[a] && x[a] <= self.origin[a] + self.extent[a])
    }

    pub fn diameter(&self) -> f64 {
        self.extent.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// Smallest distance from `x` to the box boundary.
    pub fn margin(&self, x: &[f64]) -> f64 {
        (0..self.d)
            .map(|a| (x[a] - self.origin[a]).min(self.origin[a] + self.extent[a] - x[a]))
            .fold(f64::INFINITY, f64::min)
    }
}
