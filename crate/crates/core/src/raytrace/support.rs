use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Covector, Metric, PhasePoint, SpacePoint};

use super::{cone_covectors, reflect_at_interface, rk4, trace, Bounds, InterfaceSpec, Ray, RayError, State};

/// One incident wave: central launch point/covector and beam width.
#[derive(Debug, Clone)]
pub struct Launch {
    pub point: PhasePoint,
    pub s0: f64,
}

#[derive(Debug, Clone)]
pub struct SupportScene {
    pub metric: Metric,
    pub launches: [Launch; 2],
    pub interface: InterfaceSpec,
    pub t_end: f64,
    pub step: f64,
    pub d_hit: f64,
    /// Beam radius per unit `s₀`.
    pub beam_length: f64,
    pub fan_size: usize,
    pub cone_samples: usize,
    pub obs_times: Vec<f64>,
    /// Maximum distance between neighbouring surface samples.
    pub spacing: f64,
    pub bounds: Option<Bounds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceId {
    #[serde(rename = "transmitted_1")]
    Transmitted1,
    #[serde(rename = "transmitted_2")]
    Transmitted2,
    #[serde(rename = "reflected_1")]
    Reflected1,
    #[serde(rename = "reflected_2")]
    Reflected2,
    Cone,
}

impl SurfaceId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SurfaceId::Transmitted1 => "transmitted_1",
            SurfaceId::Transmitted2 => "transmitted_2",
            SurfaceId::Reflected1 => "reflected_1",
            SurfaceId::Reflected2 => "reflected_2",
            SurfaceId::Cone => "cone",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSample {
    pub t: f64,
    pub x: Vec<f64>,
    /// Covector of the ray through this sample.
    pub zeta: Covector,
    /// Spacetime tangents `(v_t, v_x)`: the ray direction, then lateral ones.
    pub tangents: Vec<Vec<f64>>,
}

impl SurfaceSample {
    /// Unit propagation direction `g*ξ/|g*ξ|` (Euclidean normalization).
    pub fn direction(&self, m: &Metric) -> Vec<f64> {
        let v = m.g_star(&self.x).map(|g| g.mul_vec(&self.zeta.xi)).unwrap_or_else(|_| self.zeta.xi.clone());
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n == 0.0 {
            v
        } else {
            v.iter().map(|a| a / n).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub id: SurfaceId,
    pub samples: Vec<SurfaceSample>,
}

impl Surface {
    fn empty(id: SurfaceId) -> Self {
        Self { id, samples: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct PredictedSupport {
    pub transmitted_1: Surface,
    pub transmitted_2: Surface,
    pub reflected_1: Surface,
    pub reflected_2: Surface,
    /// Cone flow-out; empty unless `p0` lies on the interface.
    pub cone: Surface,
    /// Flow-out from `p0` built regardless of interface membership; used
    /// as the place to look for a cone that should not be there.
    pub candidate_cone: Surface,
    pub p0: Option<SpacePoint>,
    pub on_interface: bool,
    /// Closest-approach distance of the central rays in `ĝ`.
    pub central_distance: f64,
}

impl PredictedSupport {
    pub fn surfaces(&self) -> [&Surface; 5] {
        [&self.transmitted_1, &self.transmitted_2, &self.reflected_1, &self.reflected_2, &self.cone]
    }

    pub fn surface(&self, id: SurfaceId) -> &Surface {
        match id {
            SurfaceId::Transmitted1 => &self.transmitted_1,
            SurfaceId::Transmitted2 => &self.transmitted_2,
            SurfaceId::Reflected1 => &self.reflected_1,
            SurfaceId::Reflected2 => &self.reflected_2,
            SurfaceId::Cone => &self.cone,
        }
    }
}

struct FanRay {
    ray: Ray,
    reflected: Option<Ray>,
}

const GRAZING_DEG: f64 = 5.0;

pub fn predict_support(scene: &SupportScene) -> Result<PredictedSupport, RayError> {
    let m = &scene.metric;
    let d = m.dim();
    let bounds = scene.bounds.as_ref();

    let central: Vec<Ray> = scene
        .launches
        .iter()
        .map(|l| trace(m, &l.point, scene.t_end, scene.step, bounds))
        .collect::<Result<_, _>>()?;

    let mut fans = Vec::with_capacity(2);
    for l in &scene.launches {
        let starts = fan_starts(m, l, scene.fan_size, scene.beam_length)?;
        let rays: Vec<FanRay> = starts
            .par_iter()
            .map(|s| trace_with_bounce(m, s, scene, bounds))
            .collect::<Result<_, _>>()?;
        fans.push(rays);
    }

    let sample = |rays: &[&Ray], id: SurfaceId, tmin: f64, closed: bool| -> Surface {
        let mut out = Surface::empty(id);
        for &t in &scene.obs_times {
            if t <= tmin {
                continue;
            }
            let pts: Vec<Option<PhasePoint>> = rays.iter().map(|r| r.at_time(t)).collect();
            out.samples.extend(densify(m, &pts, scene.spacing, d, closed));
        }
        out
    };

    let transmitted: Vec<Surface> = fans
        .iter()
        .zip([SurfaceId::Transmitted1, SurfaceId::Transmitted2])
        .map(|(f, id)| sample(&f.iter().map(|r| &r.ray).collect::<Vec<_>>(), id, f64::NEG_INFINITY, false))
        .collect();
    let reflected: Vec<Surface> = fans
        .iter()
        .zip([SurfaceId::Reflected1, SurfaceId::Reflected2])
        .map(|(f, id)| {
            let mut out = Surface::empty(id);
            for &t in &scene.obs_times {
                let pts: Vec<Option<PhasePoint>> =
                    f.iter().map(|r| r.reflected.as_ref().and_then(|rr| rr.at_time(t))).collect();
                out.samples.extend(densify(m, &pts, scene.spacing, d, false));
            }
            out
        })
        .collect();

    let (dist, p0) = closest_approach(m, &central[0], &central[1])?;
    let p0 = if dist <= scene.d_hit { Some(p0) } else { None };

    let mut candidate = Surface::empty(SurfaceId::Cone);
    let mut on_interface = false;
    if let Some(p) = &p0 {
        let nrm = scene.interface.conormal_norm(m, &p.x)?;
        on_interface = scene.interface.phi(&p.x).abs() <= scene.d_hit * nrm;
        let tangents = if d == 3 {
            vec![intersection_tangent(&central[0], &central[1], &scene.interface, p)]
        } else {
            Vec::new()
        };
        if p.t < scene.t_end {
            let trace_all = |n: usize| -> Result<Vec<Ray>, RayError> {
                let starts = cone_covectors(m, p, &tangents, n)?;
                starts.par_iter().map(|s| trace(m, s, scene.t_end, scene.step, bounds)).collect()
            };
            let mut n = scene.cone_samples;
            let mut rays = trace_all(n)?;
            // d = 2: add rays until neighbours are within `spacing`, so that
            // cone samples lie on traced rays rather than on chords.
            if d == 2 {
                let cap = scene.cone_samples.saturating_mul(64);
                for _ in 0..4 {
                    let gap = max_ring_gap(&rays, &scene.obs_times);
                    if gap <= scene.spacing || n >= cap {
                        break;
                    }
                    n = ((n as f64 * gap / scene.spacing * 1.05).ceil() as usize).min(cap);
                    rays = trace_all(n)?;
                }
            }
            let refs: Vec<&Ray> = rays.iter().collect();
            candidate = sample(&refs, SurfaceId::Cone, p.t + scene.spacing, true);
        }
    }
    let cone = if on_interface { candidate.clone() } else { Surface::empty(SurfaceId::Cone) };

    let mut tr = transmitted.into_iter();
    let mut rf = reflected.into_iter();
    Ok(PredictedSupport {
        transmitted_1: tr.next().unwrap(),
        transmitted_2: tr.next().unwrap(),
        reflected_1: rf.next().unwrap(),
        reflected_2: rf.next().unwrap(),
        cone,
        candidate_cone: candidate,
        p0,
        on_interface,
        central_distance: dist,
    })
}

/// Launch points/covectors of a fan around one central ray. Covectors are
/// compared after normalizing `|ξ|_{g*} = 1`; launch points are displaced
/// so all rays leave a common virtual apex `beam_length` behind the launch.
fn fan_starts(m: &Metric, l: &Launch, k: usize, beam_length: f64) -> Result<Vec<PhasePoint>, RayError> {
    let d = m.dim();
    let x = &l.point.x;
    let gs = m.g_star(&x.x)?;
    let chol = gs
        .cholesky()
        .ok_or_else(|| RayError::Geometry(crate::geometry::GeometryError::NotPositiveDefinite(x.x.clone())))?;
    let mag = gs.quad(&l.point.zeta.xi).sqrt();
    if mag == 0.0 {
        return Err(RayError::Geometry(crate::geometry::GeometryError::ZeroCovector));
    }
    // η = Lᵀ ξ / |ξ|, a Euclidean unit vector.
    let eta0: Vec<f64> = (0..d).map(|i| (i..d).map(|j| chol[j][i] * l.point.zeta.xi[j]).sum::<f64>() / mag).collect();
    let back = |eta: &[f64]| -> Vec<f64> {
        let mut xi = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = eta[i];
            for j in i + 1..d {
                s -= chol[j][i] * xi[j];
            }
            xi[i] = s / chol[i][i];
        }
        xi
    };
    // |Δη| = 2 sin(ψ/2) for rotation by ψ.
    let psi_max = 2.0 * (l.s0 / 2.0).min(1.0).asin();
    let etas: Vec<Vec<f64>> = if d == 2 {
        (0..k)
            .map(|i| {
                let psi = psi_max * (2.0 * (i as f64 + 0.5) / k as f64 - 1.0);
                let (c, s) = (psi.cos(), psi.sin());
                vec![c * eta0[0] - s * eta0[1], s * eta0[0] + c * eta0[1]]
            })
            .collect()
    } else {
        let (e1, e2) = super::cone::complement(&eta0);
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..k)
            .map(|i| {
                let psi = psi_max * ((i as f64 + 0.5) / k as f64).sqrt();
                let az = golden * i as f64;
                (0..3)
                    .map(|j| psi.cos() * eta0[j] + psi.sin() * (az.cos() * e1[j] + az.sin() * e2[j]))
                    .collect()
            })
            .collect()
    };
    let vel = |xi: &[f64]| -> Vec<f64> { gs.mul_vec(xi).iter().map(|v| v / mag).collect() };
    let xi0: Vec<f64> = back(&eta0);
    let v0 = vel(&xi0);
    Ok(etas
        .iter()
        .map(|eta| {
            let xi = back(eta);
            let v = vel(&xi);
            let pos: Vec<f64> = (0..d).map(|j| x.x[j] + beam_length * (v[j] - v0[j])).collect();
            PhasePoint::new(SpacePoint::new(x.t, pos), Covector::new(-1.0, xi))
        })
        .collect())
}

fn trace_with_bounce(m: &Metric, start: &PhasePoint, scene: &SupportScene, bounds: Option<&Bounds>) -> Result<FanRay, RayError> {
    let ray = trace(m, start, scene.t_end, scene.step, bounds)?;
    let iface = &scene.interface;
    let mut reflected = None;
    for w in ray.samples.windows(2) {
        let (fa, fb) = (iface.phi(&w[0].x.x), iface.phi(&w[1].x.x));
        if fa == 0.0 || fa * fb > 0.0 {
            continue;
        }
        let hit = refine_crossing(m, &w[0], &w[1], iface)?;
        let v = m.g_star(&hit.x.x)?.mul_vec(&hit.zeta.xi);
        let g = iface.levelset.grad(&hit.x.x);
        let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let gn = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        let sin_inc = (v.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / (vn * gn)).abs();
        if sin_inc < GRAZING_DEG.to_radians().sin() || hit.x.t >= scene.t_end {
            break;
        }
        let mut on = iface.clone();
        on.tol = on.tol.max(1e-9);
        let r = match reflect_at_interface(m, &hit.x, &hit.zeta, &on) {
            Ok(r) => r,
            Err(RayError::TangentialIncidence) => break,
            Err(e) => return Err(e),
        };
        let out = PhasePoint::new(hit.x.clone(), r.oriented);
        reflected = Some(trace(m, &out, scene.t_end, scene.step, bounds)?);
        break;
    }
    Ok(FanRay { ray, reflected })
}

/// Bisection on the RK4 sub-step from `a` until `φ` changes sign.
fn refine_crossing(m: &Metric, a: &PhasePoint, b: &PhasePoint, iface: &InterfaceSpec) -> Result<PhasePoint, RayError> {
    let s = State::from_pp(a);
    let h_ab = (b.x.t - a.x.t) / (-2.0 * a.zeta.tau);
    let fa = iface.phi(&a.x.x);
    let (mut lo, mut hi) = (0.0, h_ab);
    let mut best = State::from_pp(b);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let st = rk4(m, &s, mid)?;
        let f = iface.phi(&st.x);
        best = st;
        if f == 0.0 {
            break;
        }
        if f * fa > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * h_ab {
            break;
        }
    }
    Ok(best.to_pp())
}

/// Largest distance between neighbouring rays of a closed fan over the
/// observation times.
fn max_ring_gap(rays: &[Ray], times: &[f64]) -> f64 {
    let mut gap: f64 = 0.0;
    for &t in times {
        let pts: Vec<Option<PhasePoint>> = rays.iter().map(|r| r.at_time(t)).collect();
        for k in 0..pts.len() {
            if let (Some(a), Some(b)) = (&pts[k], &pts[(k + 1) % pts.len()]) {
                let d2: f64 = a.x.x.iter().zip(&b.x.x).map(|(p, q)| (p - q) * (p - q)).sum();
                gap = gap.max(d2.sqrt());
            }
        }
    }
    gap
}

/// Resamples an ordered chain of ray positions so neighbours are at most
/// `spacing` apart (d = 2); in d = 3 the ray positions are used as they are.
fn densify(m: &Metric, pts: &[Option<PhasePoint>], spacing: f64, d: usize, closed: bool) -> Vec<SurfaceSample> {
    let with_tangents = |p: &PhasePoint, lateral: Option<Vec<f64>>| -> SurfaceSample {
        let v = m.g_star(&p.x.x).map(|g| g.mul_vec(&p.zeta.xi)).unwrap_or_else(|_| p.zeta.xi.clone());
        let inv = 1.0 / (-p.zeta.tau);
        let mut along = vec![1.0];
        along.extend(v.iter().map(|a| a * inv));
        let mut tangents = vec![along];
        if let Some(l) = lateral {
            let mut lt = vec![0.0];
            lt.extend(l);
            tangents.push(lt);
        }
        SurfaceSample { t: p.x.t, x: p.x.x.clone(), zeta: p.zeta.clone(), tangents }
    };
    let mut out = Vec::new();
    if d != 2 {
        for p in pts.iter().flatten() {
            out.push(with_tangents(p, None));
        }
        return out;
    }
    let n = pts.len();
    let npairs = if closed { n } else { n.saturating_sub(1) };
    let mut emitted = vec![false; n];
    for k in 0..npairs {
        let (a, b) = (&pts[k], &pts[(k + 1) % n]);
        let (Some(a), Some(b)) = (a, b) else { continue };
        let dx: Vec<f64> = a.x.x.iter().zip(&b.x.x).map(|(p, q)| q - p).collect();
        let len = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
        let lateral: Vec<f64> = if len > 0.0 { dx.iter().map(|v| v / len).collect() } else { vec![0.0; 2] };
        let nsub = ((len / spacing).ceil() as usize).max(1);
        for j in 0..nsub {
            let w = j as f64 / nsub as f64;
            let p = PhasePoint::new(
                SpacePoint::new(a.x.t, a.x.x.iter().zip(&b.x.x).map(|(p, q)| p + w * (q - p)).collect::<Vec<_>>()),
                Covector::new(
                    a.zeta.tau + w * (b.zeta.tau - a.zeta.tau),
                    a.zeta.xi.iter().zip(&b.zeta.xi).map(|(p, q)| p + w * (q - p)).collect::<Vec<_>>(),
                ),
            );
            out.push(with_tangents(&p, Some(lateral.clone())));
        }
        emitted[k] = true;
        if !closed && k + 1 == n - 1 {
            out.push(with_tangents(b, Some(lateral.clone())));
            emitted[k + 1] = true;
        } else if !closed && pts.get(k + 2).map_or(true, |p| p.is_none()) {
            out.push(with_tangents(b, Some(lateral.clone())));
            emitted[k + 1] = true;
        } else if closed {
            emitted[(k + 1) % n] = true;
        }
    }
    for (k, p) in pts.iter().enumerate() {
        if let (Some(p), false) = (p, emitted[k]) {
            out.push(with_tangents(p, None));
        }
    }
    out
}

/// Closest approach of two rays in `ĝ = dt² + g`, with `g` frozen near
/// the best sample pair. Returns the distance and the midpoint.
pub(crate) fn closest_approach(m: &Metric, r1: &Ray, r2: &Ray) -> Result<(f64, SpacePoint), RayError> {
    let d = m.dim();
    let euclid = |a: &SpacePoint, b: &SpacePoint| -> f64 {
        (a.t - b.t).powi(2) + a.x.iter().zip(&b.x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()
    };
    let (mut bi, mut bj, mut best) = (0, 0, f64::INFINITY);
    for (i, a) in r1.samples.iter().enumerate() {
        for (j, b) in r2.samples.iter().enumerate() {
            let e = euclid(&a.x, &b.x);
            if e < best {
                best = e;
                bi = i;
                bj = j;
            }
        }
    }
    let mid: Vec<f64> = r1.samples[bi].x.x.iter().zip(&r2.samples[bj].x.x).map(|(p, q)| 0.5 * (p + q)).collect();
    let g = m.g(&mid)?;
    let l = g.cholesky().ok_or_else(|| RayError::Geometry(crate::geometry::GeometryError::NotPositiveDefinite(mid.clone())))?;
    // Coordinates in which ĝ is Euclidean: (t, Lᵀ x).
    let map = |p: &SpacePoint| -> Vec<f64> {
        let mut v = vec![p.t];
        v.extend((0..d).map(|i| (i..d).map(|j| l[j][i] * p.x[j]).sum::<f64>()));
        v
    };
    let mut out = (f64::INFINITY, SpacePoint::new(0.0, vec![0.0; d]));
    let range = |k: usize, n: usize| k.saturating_sub(2)..(k + 2).min(n - 1);
    for i in range(bi, r1.samples.len()) {
        for j in range(bj, r2.samples.len()) {
            let (a0, a1) = (&r1.samples[i].x, &r1.samples[i + 1].x);
            let (b0, b1) = (&r2.samples[j].x, &r2.samples[j + 1].x);
            let (s, u) = segment_params(&map(a0), &map(a1), &map(b0), &map(b1));
            let pa = lerp_point(a0, a1, s);
            let pb = lerp_point(b0, b1, u);
            let dist = crate::geometry::riemann_dist(m, &pa, &pb).unwrap_or(f64::INFINITY);
            if dist < out.0 {
                let midp = SpacePoint::new(0.5 * (pa.t + pb.t), pa.x.iter().zip(&pb.x).map(|(p, q)| 0.5 * (p + q)).collect::<Vec<_>>());
                out = (dist, midp);
            }
        }
    }
    if !out.0.is_finite() {
        // Single-sample rays: fall back to the sample pair.
        let (a, b) = (&r1.samples[bi].x, &r2.samples[bj].x);
        let dist = crate::geometry::riemann_dist(m, a, b)?;
        out = (dist, lerp_point(a, b, 0.5));
    }
    Ok(out)
}

fn lerp_point(a: &SpacePoint, b: &SpacePoint, w: f64) -> SpacePoint {
    SpacePoint::new(a.t + w * (b.t - a.t), a.x.iter().zip(&b.x).map(|(p, q)| p + w * (q - p)).collect::<Vec<_>>())
}

/// Parameters of the closest points of segments `[a0,a1]`, `[b0,b1]`.
fn segment_params(a0: &[f64], a1: &[f64], b0: &[f64], b1: &[f64]) -> (f64, f64) {
    let sub = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(x, y)| x - y).collect() };
    let dot = |p: &[f64], q: &[f64]| -> f64 { p.iter().zip(q).map(|(x, y)| x * y).sum() };
    let (da, db, r) = (sub(a1, a0), sub(b1, b0), sub(a0, b0));
    let (aa, ee, ff) = (dot(&da, &da), dot(&db, &db), dot(&db, &r));
    if aa <= 1e-300 && ee <= 1e-300 {
        return (0.0, 0.0);
    }
    if aa <= 1e-300 {
        return (0.0, (ff / ee).clamp(0.0, 1.0));
    }
    let c = dot(&da, &r);
    if ee <= 1e-300 {
        return ((-c / aa).clamp(0.0, 1.0), 0.0);
    }
    let b = dot(&da, &db);
    let denom = aa * ee - b * b;
    let mut s = if denom > 1e-300 { ((b * ff - c * ee) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut u = (b * s + ff) / ee;
    if u < 0.0 {
        u = 0.0;
        s = (-c / aa).clamp(0.0, 1.0);
    } else if u > 1.0 {
        u = 1.0;
        s = ((b - c) / aa).clamp(0.0, 1.0);
    }
    (s, u)
}

/// Spacetime tangent of `S₁ ∩ S₂ ∩ S₀` at `p` (d = 3): the common null
/// vector of the two central covectors and `dφ`.
fn intersection_tangent(r1: &Ray, r2: &Ray, iface: &InterfaceSpec, p: &SpacePoint) -> Vec<f64> {
    let z1 = r1.at_time(p.t).map(|q| q.zeta).unwrap_or_else(|| r1.end().zeta.clone());
    let z2 = r2.at_time(p.t).map(|q| q.zeta).unwrap_or_else(|| r2.end().zeta.clone());
    let z0 = iface.conormal(&p.x);
    let rows: Vec<[f64; 4]> = [z1, z2, z0].iter().map(|z| [z.tau, z.xi[0], z.xi[1], z.xi[2]]).collect();
    let det3 = |c: [usize; 3]| -> f64 {
        let m = |r: usize, k: usize| rows[r][c[k]];
        m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
    };
    vec![-det3([1, 2, 3]), det3([0, 2, 3]), -det3([0, 1, 3]), det3([0, 1, 2])]
}
