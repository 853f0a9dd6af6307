use serde::{Deserialize, Serialize};

use crate::geometry::{symbol_p, Covector, Metric, PhasePoint, SpacePoint};

use super::{FieldError, GridSpec};

/// A distorted plane pulse: oscillation with covector `ξ` under an envelope,
/// limited laterally to a beam of radius `s0·L_beam` where `L_beam` is the
/// grid diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    /// Where the central ray of the pulse is at time `t0`.
    pub x_launch: Vec<f64>,
    pub t0: f64,
    /// Null covector with `τ < 0`.
    pub zeta: Covector,
    pub s0: f64,
    pub omega: f64,
    pub sigma: f64,
    pub amplitude: f64,
    /// Envelope exponent `p` in `exp(−½|s/σ|^p)`; 2 is Gaussian, larger
    /// values give flatter, sharper-edged envelopes.
    #[serde(default = "two")]
    pub mu_proxy: f64,
}

fn two() -> f64 {
    2.0
}

/// Support of the pulse, in envelope widths along the phase direction.
const SUPPORT_SIGMAS: f64 = 4.0;
/// Lateral cutoff reaches zero at this multiple of `r_lat`.
const LATERAL_OUTER: f64 = 1.5;

impl SourceSpec {
    pub fn validate(&self, m: &Metric) -> Result<(), FieldError> {
        let d = m.dim();
        if self.x_launch.len() != d || self.zeta.xi.len() != d {
            return Err(FieldError::invalid("sources.x_launch", "dimension does not match the metric"));
        }
        for (name, v) in [("sources.s0", self.s0), ("sources.omega", self.omega), ("sources.sigma", self.sigma)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(FieldError::invalid(name, "must be positive"));
            }
        }
        if !(self.mu_proxy >= 1.0) {
            return Err(FieldError::invalid("sources.mu_proxy", "must be at least 1"));
        }
        if !(self.zeta.tau < 0.0) {
            return Err(FieldError::invalid("sources.zeta", "tau must be negative (forward in time)"));
        }
        let p = symbol_p(m, &PhasePoint::new(SpacePoint::new(self.t0, self.x_launch.clone()), self.zeta.clone()))
            .map_err(|e| FieldError::invalid("sources.x_launch", &e.to_string()))?;
        if p.abs() > 1e-10 * self.zeta.tau * self.zeta.tau {
            return Err(FieldError::NotNull(p));
        }
        Ok(())
    }

    /// Ray velocity `g*ξ/|τ|` at the launch point.
    pub fn velocity(&self, m: &Metric) -> Result<Vec<f64>, FieldError> {
        let gs = m.g_star(&self.x_launch).map_err(|e| FieldError::invalid("sources.x_launch", &e.to_string()))?;
        Ok(gs.mul_vec(&self.zeta.xi).iter().map(|v| v / self.zeta.tau.abs()).collect())
    }

    /// Pulse centre at `t = 0`, moved back along the launch velocity.
    pub fn center_at_zero(&self, m: &Metric) -> Result<Vec<f64>, FieldError> {
        let v = self.velocity(m)?;
        Ok(self.x_launch.iter().zip(&v).map(|(x, vi)| x - self.t0 * vi).collect())
    }

    /// Phase point of the central ray at `t = 0`.
    pub fn central_ray_start(&self, m: &Metric) -> Result<PhasePoint, FieldError> {
        Ok(PhasePoint::new(SpacePoint::new(0.0, self.center_at_zero(m)?), self.zeta.clone()))
    }

    pub fn lateral_radius(&self, grid: &GridSpec) -> f64 {
        self.s0 * grid.diameter()
    }

    fn envelope(&self, s: f64) -> (f64, f64) {
        let z = (s / self.sigma).abs();
        let e = (-0.5 * z.powf(self.mu_proxy)).exp();
        // d/ds of the envelope
        let de = if z == 0.0 {
            0.0
        } else {
            -0.5 * self.mu_proxy * z.powf(self.mu_proxy - 1.0) * s.signum() / self.sigma * e
        };
        (e, de)
    }
}

fn smoothstep5(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
}

/// Initial data `(u0, u1)` for one pulse. With phase `s = ξ·(x − x_c)/|τ|`,
/// `u0 = A·env(s)·cos(ωs)·χ_lat` and `u1 = −∂_s(env·cos)·A·χ_lat`, which for a
/// constant metric is exactly the data of a wave moving along `g*ξ` at unit
/// phase speed in `s`. The lateral cutoff is constant along the ray
/// direction so it is transported unchanged.
pub fn build_pulse(grid: &GridSpec, m: &Metric, src: &SourceSpec) -> Result<(Vec<f64>, Vec<f64>), FieldError> {
    src.validate(m)?;
    let n = grid.len();
    if src.amplitude == 0.0 {
        return Ok((vec![0.0; n], vec![0.0; n]));
    }
    let xc = src.center_at_zero(m)?;
    let v = src.velocity(m)?;
    let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let vhat: Vec<f64> = v.iter().map(|a| a / vn).collect();
    let inv_tau = 1.0 / src.zeta.tau.abs();
    let r_lat = src.lateral_radius(grid);
    let outer = LATERAL_OUTER * r_lat;
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    for k in 0..n {
        let x = grid.center(k);
        let dx: Vec<f64> = x.iter().zip(&xc).map(|(a, b)| a - b).collect();
        let s = src.zeta.xi.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>() * inv_tau;
        let along = vhat.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>();
        let rho = dx.iter().zip(&vhat).map(|(a, b)| (a - along * b).powi(2)).sum::<f64>().sqrt();
        let inside = s.abs() <= SUPPORT_SIGMAS * src.sigma && rho < outer;
        if inside && grid.margin(&x) < SUPPORT_SIGMAS * src.sigma {
            return Err(FieldError::PulseClipped);
        }
        if rho >= outer {
            continue;
        }
        let chi = if rho <= r_lat { 1.0 } else { 1.0 - smoothstep5((rho - r_lat) / (outer - r_lat)) };
        let (e, de) = src.envelope(s);
        let (c, sn) = ((src.omega * s).cos(), (src.omega * s).sin());
        u0[k] = src.amplitude * (chi * e * c);
        u1[k] = -src.amplitude * (chi * (de * c - src.omega * e * sn));
    }
    Ok((u0, u1))
}
