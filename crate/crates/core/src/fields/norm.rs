use rayon::prelude::*;

use super::WaveField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    L4,
    /// Leapfrog energy `½‖(u_N − u_{N−1})/dt‖² + ½⟨A u_N, u_{N−1}⟩` of the
    /// final pair. This is the conserved discrete analogue of
    /// `½∫(u_t² + ∇uᵀg*∇u)√g dx`.
    Energy,
}

/// Spatial box restricting a norm to cell centres inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Trapezoid weights over the recorded times; a single slice gets weight 1
/// so the result is a purely spatial norm.
pub(crate) fn time_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    if n <= 1 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|k| {
            let left = if k > 0 { times[k] - times[k - 1] } else { 0.0 };
            let right = if k + 1 < n { times[k + 1] - times[k] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

fn mask(f: &WaveField, region: Option<&Region>) -> Option<Vec<bool>> {
    region.map(|r| {
        let g = f.grid();
        (0..g.len())
            .map(|k| {
                let x = g.center(k);
                (0..g.d).all(|a| x[a] >= r.lo[a] && x[a] <= r.hi[a])
            })
            .collect()
    })
}

/// `h^d Σ √g · weight(u)` over the (masked) grid, summed per row first.
fn spatial_sum(f: &WaveField, u: &[f64], m: Option<&[bool]>, pow: fn(f64) -> f64) -> f64 {
    let op = &f.op;
    let row = *op.grid.n.last().unwrap();
    let partial: Vec<f64> = u
        .par_chunks(row)
        .zip(op.sqrt_det.par_chunks(row))
        .enumerate()
        .map(|(r, (us, ws))| {
            us.iter()
                .zip(ws)
                .enumerate()
                .filter(|(j, _)| m.map_or(true, |mm| mm[r * row + j]))
                .map(|(_, (v, w))| pow(*v) * w)
                .sum::<f64>()
        })
        .collect();
    partial.iter().sum::<f64>() * op.grid.h.powi(op.grid.d as i32)
}

pub fn norm(f: &WaveField, kind: NormKind, region: Option<&Region>) -> f64 {
    if f.slices.is_empty() {
        return 0.0;
    }
    let m = mask(f, region);
    let m = m.as_deref();
    match kind {
        NormKind::L2 | NormKind::L4 => {
            let (pow, root): (fn(f64) -> f64, f64) = match kind {
                NormKind::L2 => (|v| v * v, 2.0),
                _ => (|v| (v * v) * (v * v), 4.0),
            };
            let w = time_weights(&f.times());
            let total: f64 = f.slices.iter().zip(&w).map(|(s, wk)| wk * spatial_sum(f, s, m, pow)).sum();
            total.max(0.0).powf(1.0 / root)
        }
        NormKind::Energy => {
            let u = f.last();
            let prev = f.final_prev.as_deref().unwrap_or(u);
            energy_pair(f, prev, u, m)
        }
    }
}

pub(crate) fn energy_pair(f: &WaveField, prev: &[f64], u: &[f64], m: Option<&[bool]>) -> f64 {
    let dt = f.grid().dt;
    let ut: Vec<f64> = u.iter().zip(prev).map(|(a, b)| (a - b) / dt).collect();
    let mut au = vec![0.0; u.len()];
    f.op.apply(u, &mut au);
    let kinetic = spatial_sum(f, &ut, m, |v| v * v);
    let cross: Vec<f64> = au.iter().zip(prev).map(|(a, b)| a * b).collect();
    let potential = spatial_sum(f, &cross, m, |v| v);
    0.5 * (kinetic + potential)
}
