use crate::geometry::{symbol_p, Covector, Metric, PhasePoint, SpacePoint};

use super::{InterfaceSpec, RayError};

/// Result of the reflection law at one interface point.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflection {
    /// Incident covector normalized to `(1, α)`.
    pub normalized_in: Covector,
    /// Root of the quadratic; the outgoing covector is `(1, α) + b(s, β)`.
    pub b: f64,
    /// `(1, α) + b(s, β)`.
    pub zeta_out: Covector,
    /// `zeta_out` rescaled by the incident `τ`, so it carries the same
    /// orientation as the incident covector.
    pub oriented: Covector,
}

const MARGIN: f64 = 1e-6;

/// Solves `p(x, (1, α) + b(s, β)) = 0` for the nonzero root `b`.
pub fn reflect_at_interface(
    m: &Metric,
    p: &SpacePoint,
    zeta_in: &Covector,
    iface: &InterfaceSpec,
) -> Result<Reflection, RayError> {
    let pin = symbol_p(m, &PhasePoint::new(p.clone(), zeta_in.clone()))?;
    let scale = zeta_in.tau * zeta_in.tau;
    if pin.abs() > 1e-10 * scale.max(1.0) {
        return Err(RayError::NotNull(pin));
    }
    let phi = iface.phi(&p.x);
    if phi.abs() > iface.tol {
        return Err(RayError::OffInterface(phi));
    }
    if iface.characteristic_margin(m, &p.x)? < MARGIN {
        return Err(RayError::CharacteristicInterface);
    }
    if zeta_in.tau == 0.0 {
        return Err(RayError::NotNull(pin));
    }
    let gs = m.g_star(&p.x)?;
    let alpha: Vec<f64> = zeta_in.xi.iter().map(|v| v / zeta_in.tau).collect();
    let nrm = iface.conormal(&p.x);
    let (s, beta) = (nrm.tau, &nrm.xi);

    let a = -s * s + gs.quad(beta);
    let bq = 2.0 * (-s + gs.bilinear(&alpha, beta));
    let c = -1.0 + gs.quad(&alpha);
    let disc = bq * bq - 4.0 * a * c;
    let size = bq.abs().max(a.abs()).max(1.0);
    if disc <= 1e-12 * size * size || bq.abs() <= 1e-12 * size {
        return Err(RayError::TangentialIncidence);
    }
    // Stable pair of roots; the one near zero belongs to the incident ray.
    let q = -0.5 * (bq + bq.signum() * disc.max(0.0).sqrt());
    let r1 = q / a;
    let r2 = c / q;
    let b = if r1.abs() >= r2.abs() { r1 } else { r2 };

    let normalized_in = Covector::new(1.0, alpha);
    let zeta_out = normalized_in.axpy(b, &nrm);
    let oriented = zeta_out.scaled(zeta_in.tau);
    Ok(Reflection { normalized_in, b, zeta_out, oriented })
}
