use std::f64::consts::TAU;

use crate::geometry::{Covector, Metric, PhasePoint, SpacePoint};

use super::RayError;

/// Forward null covectors at `p0` annihilating every supplied spacetime
/// tangent `(θ_t, θ_x)`, normalized to `τ = −1` and spaced uniformly in
/// angle. In `d = 2` no tangents are allowed (the whole light cone); in
/// `d = 3` exactly one space-like tangent is required.
pub fn cone_covectors(
    m: &Metric,
    p0: &SpacePoint,
    tangents: &[Vec<f64>],
    n_samples: usize,
) -> Result<Vec<PhasePoint>, RayError> {
    let d = m.dim();
    let gs = m.g_star(&p0.x)?;
    let l = gs.cholesky().ok_or_else(|| RayError::Geometry(crate::geometry::GeometryError::NotPositiveDefinite(p0.x.clone())))?;
    // ξ = L⁻ᵀ η maps the Euclidean unit sphere onto {ξᵀ g* ξ = 1}.
    let lt_solve = |eta: &[f64]| -> Vec<f64> {
        let mut xi = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = eta[i];
            for k in i + 1..d {
                s -= l[k][i] * xi[k];
            }
            xi[i] = s / l[i][i];
        }
        xi
    };
    let angle = |k: usize| TAU * k as f64 / n_samples as f64;
    let make = |eta: Vec<f64>| PhasePoint::new(p0.clone(), Covector::new(-1.0, lt_solve(&eta)));

    match d {
        2 => {
            if !tangents.is_empty() {
                return Err(RayError::InvalidTangents("d = 2 takes no tangents".into()));
            }
            Ok((0..n_samples).map(|k| make(vec![angle(k).cos(), angle(k).sin()])).collect())
        }
        3 => {
            if tangents.len() != 1 || tangents[0].len() != 4 {
                return Err(RayError::InvalidTangents("d = 3 takes one spacetime tangent".into()));
            }
            let (tt, tx) = (tangents[0][0], &tangents[0][1..]);
            // w = L⁻¹ θ_x, so θ_xᵀ g θ_x = |w|² and ζ(θ) = 0 becomes η·w = θ_t.
            let mut w = vec![0.0; 3];
            for i in 0..3 {
                let mut s = tx[i];
                for k in 0..i {
                    s -= l[i][k] * w[k];
                }
                w[i] = s / l[i][i];
            }
            let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if -tt * tt + wn * wn <= 0.0 {
                return Err(RayError::NotSpacelike);
            }
            let what: Vec<f64> = w.iter().map(|v| v / wn).collect();
            let c = tt / wn;
            let r = (1.0 - c * c).sqrt();
            let (e1, e2) = complement(&what);
            Ok((0..n_samples)
                .map(|k| {
                    let (ca, sa) = (angle(k).cos(), angle(k).sin());
                    make((0..3).map(|i| c * what[i] + r * (ca * e1[i] + sa * e2[i])).collect())
                })
                .collect())
        }
        _ => Err(RayError::InvalidTangents(format!("unsupported dimension {d}"))),
    }
}

/// Orthonormal pair completing the unit vector `n` to a right-handed basis.
pub(super) fn complement(n: &[f64]) -> ([f64; 3], [f64; 3]) {
    let basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let pick = basis
        .iter()
        .min_by(|a, b| {
            let da = (a[0] * n[0] + a[1] * n[1] + a[2] * n[2]).abs();
            let db = (b[0] * n[0] + b[1] * n[1] + b[2] * n[2]).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap();
    let dot = pick[0] * n[0] + pick[1] * n[1] + pick[2] * n[2];
    let mut e1 = [pick[0] - dot * n[0], pick[1] - dot * n[1], pick[2] - dot * n[2]];
    let len = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|v| *v /= len);
    let e2 = [n[1] * e1[2] - n[2] * e1[1], n[2] * e1[0] - n[0] * e1[2], n[0] * e1[1] - n[1] * e1[0]];
    (e1, e2)
}
