//! Null bicharacteristics, the interface reflection law, the cone flow-out
//! and the assembled prediction of where the solution is singular.

mod cone;
mod interface;
mod reflect;
mod support;

pub use cone::cone_covectors;
pub use interface::{InterfaceSpec, LevelSet};
pub use reflect::{reflect_at_interface, Reflection};
pub use support::{
    predict_support, Launch, PredictedSupport, SupportScene, Surface, SurfaceId, SurfaceSample,
};

use thiserror::Error;

use crate::geometry::{hamiltonian_field, symbol_p, Covector, GeometryError, Metric, PhasePoint, SpacePoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RayError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("start point is not characteristic: |p| = {0:e}")]
    NotNull(f64),
    #[error("ray must be oriented forward in time (tau < 0)")]
    NotForward,
    #[error("t_end must exceed the start time")]
    EmptyInterval,
    #[error("incidence is tangential to the interface")]
    TangentialIncidence,
    #[error("interface is characteristic at this point")]
    CharacteristicInterface,
    #[error("point is not on the interface: phi = {0:e}")]
    OffInterface(f64),
    #[error("supplied tangent is not space-like")]
    NotSpacelike,
    #[error("tangent set does not match the dimension: {0}")]
    InvalidTangents(String),
    #[error("central rays never approach within the hit distance")]
    NoIntersection,
}

/// Spatial bounding box; rays leaving it stop and are flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayStatus {
    Complete,
    ExitedDomain,
}

/// A sampled null bicharacteristic.
#[derive(Debug, Clone)]
pub struct Ray {
    pub samples: Vec<PhasePoint>,
    pub theta_step: f64,
    /// Largest `|p|` seen along the ray.
    pub p_drift: f64,
    pub status: RayStatus,
}

impl Ray {
    pub fn start(&self) -> &PhasePoint {
        &self.samples[0]
    }

    pub fn end(&self) -> &PhasePoint {
        self.samples.last().expect("ray has at least one sample")
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.start().x.t, self.end().x.t)
    }

    /// Position and covector at time `t`, linearly interpolated between the
    /// bracketing samples.
    pub fn at_time(&self, t: f64) -> Option<PhasePoint> {
        let (t0, t1) = self.t_range();
        if t < t0 || t > t1 {
            return None;
        }
        let k = self.samples.partition_point(|s| s.x.t <= t);
        if k == 0 {
            return Some(self.samples[0].clone());
        }
        if k >= self.samples.len() {
            return Some(self.end().clone());
        }
        let a = &self.samples[k - 1];
        let b = &self.samples[k];
        let span = b.x.t - a.x.t;
        let w = if span > 0.0 { (t - a.x.t) / span } else { 0.0 };
        let lerp = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(u, v)| u + w * (v - u)).collect() };
        Some(PhasePoint::new(
            SpacePoint::new(t, lerp(&a.x.x, &b.x.x)),
            Covector::new(a.zeta.tau + w * (b.zeta.tau - a.zeta.tau), lerp(&a.zeta.xi, &b.zeta.xi)),
        ))
    }
}

#[derive(Clone)]
struct State {
    t: f64,
    x: Vec<f64>,
    tau: f64,
    xi: Vec<f64>,
}

impl State {
    fn from_pp(pp: &PhasePoint) -> Self {
        Self { t: pp.x.t, x: pp.x.x.clone(), tau: pp.zeta.tau, xi: pp.zeta.xi.clone() }
    }

    fn to_pp(&self) -> PhasePoint {
        PhasePoint::new(SpacePoint::new(self.t, self.x.clone()), Covector::new(self.tau, self.xi.clone()))
    }

    fn rate(&self, m: &Metric) -> Result<State, GeometryError> {
        let r = hamiltonian_field(m, &self.to_pp())?;
        Ok(State { t: r.dt, x: r.dx, tau: r.dtau, xi: r.dxi })
    }

    fn add(&self, h: f64, k: &State) -> State {
        State {
            t: self.t + h * k.t,
            x: self.x.iter().zip(&k.x).map(|(a, b)| a + h * b).collect(),
            tau: self.tau + h * k.tau,
            xi: self.xi.iter().zip(&k.xi).map(|(a, b)| a + h * b).collect(),
        }
    }
}

fn rk4(m: &Metric, s: &State, h: f64) -> Result<State, GeometryError> {
    let k1 = s.rate(m)?;
    let k2 = s.add(0.5 * h, &k1).rate(m)?;
    let k3 = s.add(0.5 * h, &k2).rate(m)?;
    let k4 = s.add(h, &k3).rate(m)?;
    let comb = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) / 6.0;
    Ok(State {
        t: s.t + h * comb(k1.t, k2.t, k3.t, k4.t),
        x: (0..s.x.len()).map(|i| s.x[i] + h * comb(k1.x[i], k2.x[i], k3.x[i], k4.x[i])).collect(),
        tau: s.tau + h * comb(k1.tau, k2.tau, k3.tau, k4.tau),
        xi: (0..s.xi.len()).map(|i| s.xi[i] + h * comb(k1.xi[i], k2.xi[i], k3.xi[i], k4.xi[i])).collect(),
    })
}

/// Integrates the Hamilton flow from `start` with classical RK4 in the flow
/// parameter until `t_end`. The last step is shortened so the ray ends on
/// `t = t_end` (exact for time-independent metrics, where `τ` is conserved).
pub fn trace(
    m: &Metric,
    start: &PhasePoint,
    t_end: f64,
    step: f64,
    bounds: Option<&Bounds>,
) -> Result<Ray, RayError> {
    let p0 = symbol_p(m, start)?;
    let scale = start.zeta.tau * start.zeta.tau;
    if p0.abs() > 1e-10 * scale.max(1.0) {
        return Err(RayError::NotNull(p0));
    }
    if !(start.zeta.tau < 0.0) {
        return Err(RayError::NotForward);
    }
    if !(t_end > start.x.t) {
        return Err(RayError::EmptyInterval);
    }
    let mut s = State::from_pp(start);
    let mut samples = vec![start.clone()];
    let mut drift = p0.abs();
    let mut status = RayStatus::Complete;
    while s.t < t_end {
        let dtdtheta = -2.0 * s.tau;
        let mut h = step;
        let last = s.t + h * dtdtheta >= t_end - 1e-14 * t_end.abs().max(1.0);
        if last {
            h = (t_end - s.t) / dtdtheta;
        }
        let next = match rk4(m, &s, h) {
            Ok(n) => n,
            Err(GeometryError::OutOfDomain(_)) => {
                status = RayStatus::ExitedDomain;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(b) = bounds {
            if !b.contains(&next.x) {
                status = RayStatus::ExitedDomain;
                break;
            }
        }
        s = next;
        if last {
            s.t = t_end;
        }
        let pp = s.to_pp();
        drift = drift.max(symbol_p(m, &pp)?.abs());
        samples.push(pp);
        if last {
            break;
        }
    }
    Ok(Ray { samples, theta_step: step, p_drift: drift, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{null_lift, Orientation};

    fn start(m: &Metric, xi: &[f64]) -> PhasePoint {
        null_lift(m, &SpacePoint::new(0.0, vec![0.0, 0.0]), xi, Orientation::Forward).unwrap()
    }

    #[test]
    fn flat_rays_are_straight_unit_speed() {
        let m = Metric::flat(2);
        let r = trace(&m, &start(&m, &[1.0, 0.0]), 1.0, 1e-3, None).unwrap();
        let e = r.end();
        assert_eq!(e.x.t, 1.0);
        assert!((e.x.x[0] - 1.0).abs() < 1e-12 && e.x.x[1].abs() < 1e-12);
        assert!(r.p_drift < 1e-12);
        let r2 = trace(&m, &start(&m, &[0.0, 1.0]), 1.0, 1e-3, None).unwrap();
        assert!(r2.end().x.x[0].abs() < 1e-12 && (r2.end().x.x[1] - 1.0).abs() < 1e-12);
        // t strictly increasing
        assert!(r.samples.windows(2).all(|w| w[1].x.t > w[0].x.t));
    }

    #[test]
    fn self_convergence_against_fine_reference() {
        let m = Metric::diag_linear(vec![1.0, 1.0], vec![vec![0.1, 0.0], vec![0.0, 0.0]]).unwrap();
        let st = start(&m, &[1.0, 1.0]);
        let coarse = trace(&m, &st, 1.0, 1e-3, None).unwrap();
        let fine = trace(&m, &st, 1.0, 1e-5, None).unwrap();
        let err: f64 = coarse.end().x.x.iter().zip(&fine.end().x.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "err = {err:e}");
        assert!(coarse.p_drift < 1e-8);
    }

    #[test]
    fn bounds_flag_partial_rays() {
        let m = Metric::flat(2);
        let b = Bounds { lo: vec![-0.5, -0.5], hi: vec![0.5, 0.5] };
        let r = trace(&m, &start(&m, &[1.0, 0.0]), 1.0, 1e-3, Some(&b)).unwrap();
        assert_eq!(r.status, RayStatus::ExitedDomain);
        assert!(r.end().x.x[0] <= 0.5);
    }

    #[test]
    fn rejects_non_null_and_backward_starts() {
        let m = Metric::flat(2);
        let bad = PhasePoint::new(SpacePoint::new(0.0, vec![0.0, 0.0]), Covector::new(-2.0, vec![1.0, 0.0]));
        assert!(matches!(trace(&m, &bad, 1.0, 1e-3, None), Err(RayError::NotNull(_))));
        let back = PhasePoint::new(SpacePoint::new(0.0, vec![0.0, 0.0]), Covector::new(1.0, vec![1.0, 0.0]));
        assert_eq!(trace(&m, &back, 1.0, 1e-3, None).unwrap_err(), RayError::NotForward);
    }

    #[test]
    fn at_time_interpolates() {
        let m = Metric::flat(2);
        let r = trace(&m, &start(&m, &[0.6, 0.8]), 1.0, 1e-2, None).unwrap();
        let p = r.at_time(0.5).unwrap();
        assert!((p.x.x[0] - 0.3).abs() < 1e-12 && (p.x.x[1] - 0.4).abs() < 1e-12);
        assert!(r.at_time(1.5).is_none());
    }
}
