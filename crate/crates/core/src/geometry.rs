//! Metrics, the principal symbol of the wave operator and its Hamilton field.
//!
//! Conventions used throughout the crate:
//!
//! * spacetime points are `(t, x)` with `x` in `R^d`, `d ∈ {2, 3}`;
//! * covectors are `ζ = (τ, ξ)`;
//! * the Laplace–Beltrami operator is taken with the *positive* sign, so that
//!   `P = ∂t² + Δ_g` is the ordinary d'Alembertian for the flat metric;
//! * the symbol is `p(x, ζ) = −τ² + ξᵀ g*(x) ξ`;
//! * forward-in-time bicharacteristics carry `τ < 0`, so `dt/dθ = −2τ > 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SymMat;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {0:?} lies outside the sampled metric box")]
    OutOfDomain(Vec<f64>),
    #[error("covector has zero spatial part")]
    ZeroCovector,
    #[error("metric is not positive definite at {0:?}")]
    NotPositiveDefinite(Vec<f64>),
    #[error("invalid metric: {0}")]
    Invalid(String),
}

/// Spacetime point `(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacePoint {
    pub t: f64,
    pub x: Vec<f64>,
}

impl SpacePoint {
    pub fn new(t: f64, x: impl Into<Vec<f64>>) -> Self {
        Self { t, x: x.into() }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Covector `ζ = (τ, ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covector {
    pub tau: f64,
    pub xi: Vec<f64>,
}

impl Covector {
    pub fn new(tau: f64, xi: impl Into<Vec<f64>>) -> Self {
        Self { tau, xi: xi.into() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { tau: self.tau * s, xi: self.xi.iter().map(|v| v * s).collect() }
    }

    /// `self + s·other`
    pub fn axpy(&self, s: f64, other: &Covector) -> Self {
        Self {
            tau: self.tau + s * other.tau,
            xi: self.xi.iter().zip(&other.xi).map(|(a, b)| a + s * b).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tau == 0.0 && self.xi.iter().all(|v| *v == 0.0)
    }
}

/// A point of the cotangent bundle of spacetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: SpacePoint,
    pub zeta: Covector,
}

impl PhasePoint {
    pub fn new(x: SpacePoint, zeta: Covector) -> Self {
        debug_assert_eq!(x.dim(), zeta.xi.len());
        Self { x, zeta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Forward,
    Backward,
}

/// Dual metric components sampled on a regular grid of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMetric {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub n: Vec<usize>,
    /// Upper-triangular entries of `g*` in row order, one array per entry,
    /// node-major with the last axis fastest.
    pub components: Vec<Vec<f64>>,
}

impl SampledMetric {
    pub fn new(
        origin: Vec<f64>,
        spacing: f64,
        n: Vec<usize>,
        components: Vec<Vec<f64>>,
    ) -> Result<Self, GeometryError> {
        let d = n.len();
        if !(d == 2 || d == 3) || origin.len() != d {
            return Err(GeometryError::Invalid("sampled metric must be 2-D or 3-D".into()));
        }
        if !(spacing > 0.0) || n.iter().any(|&k| k < 3) {
            return Err(GeometryError::Invalid("sampled metric needs >= 3 nodes per axis".into()));
        }
        let count: usize = n.iter().product();
        if components.len() != d * (d + 1) / 2 || components.iter().any(|c| c.len() != count) {
            return Err(GeometryError::Invalid("component arrays do not match node count".into()));
        }
        Ok(Self { origin, spacing, n, components })
    }

    fn dim(&self) -> usize {
        self.n.len()
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, &v)| {
            let lo = self.origin[i];
            let hi = lo + self.spacing * (self.n[i] - 1) as f64;
            v >= lo - 1e-12 && v <= hi + 1e-12
        })
    }

    /// Multilinear interpolation of every component at `x`.
    fn interpolate(&self, x: &[f64]) -> Result<SymMat, GeometryError> {
        if !self.contains(x) {
            return Err(GeometryError::OutOfDomain(x.to_vec()));
        }
        let d = self.dim();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for i in 0..d {
            let s = ((x[i] - self.origin[i]) / self.spacing).max(0.0);
            let k = (s.floor() as usize).min(self.n[i] - 2);
            base[i] = k;
            frac[i] = (s - k as f64).clamp(0.0, 1.0);
        }
        let mut out = SymMat::zeros(d);
        let corners = 1usize << d;
        for c in 0..corners {
            let mut w = 1.0;
            let mut idx = 0usize;
            for i in 0..d {
                let bit = (c >> i) & 1;
                w *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
                idx = idx * self.n[i] + base[i] + bit;
            }
            if w == 0.0 {
                continue;
            }
            let mut k = 0;
            for r in 0..d {
                for s in r..d {
                    let v = w * self.components[k][idx];
                    out.add_sym(r, s, v);
                    k += 1;
                }
            }
        }
        Ok(out)
    }
}

/// Spatial Riemannian metric, stored through its dual `g* = g⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Flat { dim: usize },
    /// `g*_ii(x) = base_i + slope_i · x`, off-diagonal entries zero.
    DiagLinear { base: Vec<f64>, slope: Vec<Vec<f64>> },
    /// `g*_ii(x) = base_i · exp(rate_i · x)`, positive everywhere.
    DiagExp { base: Vec<f64>, rate: Vec<Vec<f64>> },
    Sampled(SampledMetric),
}

impl Metric {
    pub fn flat(dim: usize) -> Self {
        Metric::Flat { dim }
    }

    /// Constant diagonal dual metric.
    pub fn diag_const(base: Vec<f64>) -> Self {
        let d = base.len();
        Metric::DiagLinear { base, slope: vec![vec![0.0; d]; d] }
    }

    pub fn diag_linear(base: Vec<f64>, slope: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let d = base.len();
        if !(d == 2 || d == 3) || slope.len() != d || slope.iter().any(|s| s.len() != d) {
            return Err(GeometryError::Invalid("diag-linear needs d base values and d×d slopes".into()));
        }
        Ok(Metric::DiagLinear { base, slope })
    }

    pub fn diag_exp(base: Vec<f64>, rate: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let d = base.len();
        if !(d == 2 || d == 3) || rate.len() != d || rate.iter().any(|s| s.len() != d) {
            return Err(GeometryError::Invalid("diag-exp needs d base values and d×d rates".into()));
        }
        Ok(Metric::DiagExp { base, rate })
    }

    pub fn dim(&self) -> usize {
        match self {
            Metric::Flat { dim } => *dim,
            Metric::DiagLinear { base, .. } | Metric::DiagExp { base, .. } => base.len(),
            Metric::Sampled(s) => s.dim(),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, Metric::Flat { .. })
    }

    /// True when `g*` has no off-diagonal entries anywhere.
    pub fn is_diagonal(&self) -> bool {
        match self {
            Metric::Flat { .. } | Metric::DiagLinear { .. } | Metric::DiagExp { .. } => true,
            Metric::Sampled(s) => {
                let d = s.dim();
                let mut k = 0;
                let mut diag = true;
                for r in 0..d {
                    for c in r..d {
                        if r != c && s.components[k].iter().any(|v| *v != 0.0) {
                            diag = false;
                        }
                        k += 1;
                    }
                }
                diag
            }
        }
    }

    /// Dual metric `g*(x)`.
    pub fn g_star(&self, x: &[f64]) -> Result<SymMat, GeometryError> {
        match self {
            Metric::Flat { dim } => Ok(SymMat::identity(*dim)),
            Metric::DiagLinear { base, slope } => {
                let d = base.len();
                let mut m = SymMat::zeros(d);
                for i in 0..d {
                    let v = base[i] + slope[i].iter().zip(x).map(|(s, xv)| s * xv).sum::<f64>();
                    m.set(i, i, v);
                }
                Ok(m)
            }
            Metric::DiagExp { base, rate } => {
                let d = base.len();
                let mut m = SymMat::zeros(d);
                for i in 0..d {
                    m.set(i, i, base[i] * rate[i].iter().zip(x).map(|(r, xv)| r * xv).sum::<f64>().exp());
                }
                Ok(m)
            }
            Metric::Sampled(s) => s.interpolate(x),
        }
    }

    /// Metric `g(x)`.
    pub fn g(&self, x: &[f64]) -> Result<SymMat, GeometryError> {
        let gs = self.g_star(x)?;
        gs.inverse().ok_or_else(|| GeometryError::NotPositiveDefinite(x.to_vec()))
    }

    /// `sqrt(det g(x)) = 1 / sqrt(det g*(x))`.
    pub fn sqrt_det_g(&self, x: &[f64]) -> Result<f64, GeometryError> {
        if self.is_flat() {
            return Ok(1.0);
        }
        let det = self.g_star(x)?.det();
        if !(det > 0.0) {
            return Err(GeometryError::NotPositiveDefinite(x.to_vec()));
        }
        Ok(1.0 / det.sqrt())
    }

    /// Checks positive definiteness of `g*` at `x`.
    pub fn check_spd(&self, x: &[f64]) -> Result<(), GeometryError> {
        if self.g_star(x)?.cholesky().is_none() {
            return Err(GeometryError::NotPositiveDefinite(x.to_vec()));
        }
        Ok(())
    }

    /// Local wave speed bound: `sqrt(λ_max(g*(x)))`.
    pub fn max_speed(&self, x: &[f64]) -> Result<f64, GeometryError> {
        Ok(self.g_star(x)?.max_eigenvalue().max(0.0).sqrt())
    }

    /// Spatial gradient `∂_k g*(x)` for each `k`. Analytic kinds use exact
    /// derivatives; sampled metrics use centered differences with the node
    /// spacing.
    pub fn g_star_gradient(&self, x: &[f64]) -> Result<Vec<SymMat>, GeometryError> {
        let d = self.dim();
        match self {
            Metric::Flat { .. } => Ok(vec![SymMat::zeros(d); d]),
            Metric::DiagLinear { slope, .. } => Ok((0..d)
                .map(|k| {
                    let mut m = SymMat::zeros(d);
                    for i in 0..d {
                        m.set(i, i, slope[i][k]);
                    }
                    m
                })
                .collect()),
            Metric::DiagExp { rate, .. } => {
                let gs = self.g_star(x)?;
                Ok((0..d)
                    .map(|k| {
                        let mut m = SymMat::zeros(d);
                        for i in 0..d {
                            m.set(i, i, gs.get(i, i) * rate[i][k]);
                        }
                        m
                    })
                    .collect())
            }
            Metric::Sampled(s) => {
                let h = s.spacing;
                let mut out = Vec::with_capacity(d);
                for k in 0..d {
                    if !s.contains(x) {
                        return Err(GeometryError::OutOfDomain(x.to_vec()));
                    }
                    // One-sided at the edges of the node box.
                    let lo = s.origin[k];
                    let hi = lo + h * (s.n[k] - 1) as f64;
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[k] = (x[k] + h).min(hi);
                    xm[k] = (x[k] - h).max(lo);
                    let gp = s.interpolate(&xp)?;
                    let gm = s.interpolate(&xm)?;
                    out.push(gp.sub(&gm).scale(1.0 / (xp[k] - xm[k])));
                }
                Ok(out)
            }
        }
    }

    /// `ξᵀ g*(x) ξ`
    pub fn dual_norm_sq(&self, x: &[f64], xi: &[f64]) -> Result<f64, GeometryError> {
        Ok(self.g_star(x)?.quad(xi))
    }
}

/// Principal symbol `p(x, ζ) = −τ² + ξᵀ g*(x) ξ`.
pub fn symbol_p(m: &Metric, pp: &PhasePoint) -> Result<f64, GeometryError> {
    let q = m.dual_norm_sq(&pp.x.x, &pp.zeta.xi)?;
    Ok(-pp.zeta.tau * pp.zeta.tau + q)
}

/// Components of the Hamilton vector field at a phase point.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonRate {
    /// `(dt/dθ, dx/dθ) = (∂p/∂τ, ∂p/∂ξ)`
    pub dt: f64,
    pub dx: Vec<f64>,
    /// `(dτ/dθ, dξ/dθ) = −(∂p/∂t, ∂p/∂x)`
    pub dtau: f64,
    pub dxi: Vec<f64>,
}

pub fn hamiltonian_field(m: &Metric, pp: &PhasePoint) -> Result<HamiltonRate, GeometryError> {
    let x = &pp.x.x;
    let xi = &pp.zeta.xi;
    let gs = m.g_star(x)?;
    let dx = gs.mul_vec(xi).into_iter().map(|v| 2.0 * v).collect();
    let dxi = if m.is_flat() {
        vec![0.0; xi.len()]
    } else {
        m.g_star_gradient(x)?.iter().map(|dg| -dg.quad(xi)).collect()
    };
    Ok(HamiltonRate { dt: -2.0 * pp.zeta.tau, dx, dtau: 0.0, dxi })
}

/// Lifts a spatial covector to the characteristic set, choosing the sign of
/// `τ` so the flow runs forward (or backward) in time.
pub fn null_lift(
    m: &Metric,
    x: &SpacePoint,
    xi: &[f64],
    orientation: Orientation,
) -> Result<PhasePoint, GeometryError> {
    if xi.iter().all(|v| *v == 0.0) {
        return Err(GeometryError::ZeroCovector);
    }
    let mag = m.dual_norm_sq(&x.x, xi)?.sqrt();
    let tau = match orientation {
        Orientation::Forward => -mag,
        Orientation::Backward => mag,
    };
    Ok(PhasePoint::new(x.clone(), Covector::new(tau, xi.to_vec())))
}

/// Lorentzian dual pairing `g̃*(ζ, η) = −ζ_τ η_τ + ξᵀ g* η_ξ` for `g̃ = −dt² + g`.
pub fn lorentz_dual(m: &Metric, x: &[f64], a: &Covector, b: &Covector) -> Result<f64, GeometryError> {
    let gs = m.g_star(x)?;
    Ok(-a.tau * b.tau + gs.bilinear(&a.xi, &b.xi))
}

/// Lorentzian length `g̃(v, v) = −v_t² + v_xᵀ g v_x` of a spacetime vector.
pub fn lorentz_length_sq(m: &Metric, x: &[f64], vt: f64, vx: &[f64]) -> Result<f64, GeometryError> {
    let g = m.g(x)?;
    Ok(-vt * vt + g.quad(vx))
}

/// Distance between two covectors at `x` in the Riemannian companion
/// `ĝ = dt² + g`, i.e. using `ĝ* = dt² + g*` on covectors.
pub fn riemann_dual_dist(m: &Metric, x: &[f64], a: &Covector, b: &Covector) -> Result<f64, GeometryError> {
    let gs = m.g_star(x)?;
    let dtau = a.tau - b.tau;
    let dxi: Vec<f64> = a.xi.iter().zip(&b.xi).map(|(p, q)| p - q).collect();
    Ok((dtau * dtau + gs.quad(&dxi)).sqrt())
}

/// Distance between two spacetime points in `ĝ = dt² + g`, with `g` frozen
/// at the midpoint.
pub fn riemann_dist(m: &Metric, a: &SpacePoint, b: &SpacePoint) -> Result<f64, GeometryError> {
    let mid: Vec<f64> = a.x.iter().zip(&b.x).map(|(p, q)| 0.5 * (p + q)).collect();
    let g = m.g(&mid)?;
    let dx: Vec<f64> = a.x.iter().zip(&b.x).map(|(p, q)| p - q).collect();
    let dt = a.t - b.t;
    Ok((dt * dt + g.quad(&dx)).sqrt())
}
