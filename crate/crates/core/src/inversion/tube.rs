use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::fields::{Boundary, GridSpec, WaveField};

/// Cells of recorded slices lying within a radius of surface samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tube {
    /// `(slice index, sorted cell indices)` in slice order.
    pub slices: Vec<(usize, Vec<usize>)>,
}

impl Tube {
    /// Collects the cells within `radius` of each `(t, x)`. A point is
    /// matched to the recorded slice at its time (to half a step) and is
    /// skipped when there is none.
    pub fn build<'a>(field: &WaveField, points: impl IntoIterator<Item = (f64, &'a [f64])>, radius: f64) -> Tube {
        let g = field.grid();
        let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (t, x) in points {
            let Some(slice) = slice_at_time(field, t) else { continue };
            let cells = map.entry(slice).or_default();
            disk_cells(g, x, radius, cells);
        }
        let slices = map
            .into_iter()
            .filter_map(|(k, mut v)| {
                v.sort_unstable();
                v.dedup();
                (!v.is_empty()).then_some((k, v))
            })
            .collect();
        Tube { slices }
    }

    pub fn len(&self) -> usize {
        self.slices.iter().map(|(_, c)| c.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// Mean of `hp(u)²` over the tube, `hp` the optional high-pass.
    pub fn mean_square(&self, field: &WaveField, highpass_width: Option<f64>) -> f64 {
        let parts: Vec<f64> = self
            .slices
            .par_iter()
            .map(|(k, cells)| {
                let u = &field.slices[*k];
                match highpass_width {
                    Some(w) => {
                        let b = box_blur(field.grid(), u, w);
                        cells.iter().map(|&c| (u[c] - b[c]).powi(2)).sum::<f64>()
                    }
                    None => cells.iter().map(|&c| u[c] * u[c]).sum::<f64>(),
                }
            })
            .collect();
        let n = self.len();
        if n == 0 {
            0.0
        } else {
            parts.iter().sum::<f64>() / n as f64
        }
    }

    /// `Σ (f − c·g)²` over the tube cells.
    pub fn sum_sq_diff(&self, f: &WaveField, g: &WaveField, c: f64) -> f64 {
        let parts: Vec<f64> = self
            .slices
            .par_iter()
            .map(|(k, cells)| cells.iter().map(|&i| (f.slices[*k][i] - c * g.slices[*k][i]).powi(2)).sum::<f64>())
            .collect();
        parts.iter().sum()
    }

    /// `Σ f·g` over the tube cells.
    pub fn pairing(&self, f: &WaveField, g: &WaveField) -> f64 {
        let parts: Vec<f64> = self
            .slices
            .par_iter()
            .map(|(k, cells)| cells.iter().map(|&c| f.slices[*k][c] * g.slices[*k][c]).sum::<f64>())
            .collect();
        parts.iter().sum()
    }
}

fn slice_at_time(field: &WaveField, t: f64) -> Option<usize> {
    let dt = field.grid().dt;
    let step = (t / dt).round();
    if step < 0.0 || (step * dt - t).abs() > 0.5 * dt + 1e-12 * t.abs() {
        return None;
    }
    field.steps.binary_search(&(step as usize)).ok()
}

fn disk_cells(g: &GridSpec, x: &[f64], radius: f64, out: &mut Vec<usize>) {
    let c = g.locate(x);
    let w = (radius / g.h).ceil() as i64 + 1;
    let strides = g.strides();
    let span = (2 * w + 1) as usize;
    let total = span.pow(g.d as u32);
    'cells: for lin in 0..total {
        let mut rem = lin;
        let mut flat = 0usize;
        let mut d2 = 0.0;
        for a in 0..g.d {
            let k = c[a] + (rem % span) as i64 - w;
            rem /= span;
            let dx = x[a] - (g.origin[a] + (k as f64 + 0.5) * g.h);
            d2 += dx * dx;
            let n = g.n[a] as i64;
            let kk = match g.boundary {
                Boundary::Periodic => k.rem_euclid(n),
                Boundary::Dirichlet if (0..n).contains(&k) => k,
                Boundary::Dirichlet => continue 'cells,
            };
            flat += kk as usize * strides[a];
        }
        if d2 <= radius * radius {
            out.push(flat);
        }
    }
}

/// Separable moving average over a box of full width `width`, i.e.
/// `⌊width/2h⌋` cells either side; windows are clipped at Dirichlet edges
/// and wrap on periodic grids.
pub(crate) fn box_blur(g: &GridSpec, u: &[f64], width: f64) -> Vec<f64> {
    let r = (width / (2.0 * g.h)).floor() as i64;
    let mut cur = u.to_vec();
    if r <= 0 {
        return cur;
    }
    let strides = g.strides();
    for a in 0..g.d {
        let n = g.n[a] as i64;
        let inner = strides[a];
        let next: Vec<f64> = (0..cur.len())
            .into_par_iter()
            .map(|idx| {
                let j = ((idx / inner) % n as usize) as i64;
                let base = idx as i64 - j * inner as i64;
                let mut s = 0.0;
                let mut cnt = 0.0;
                for o in -r..=r {
                    let k = match g.boundary {
                        Boundary::Periodic => (j + o).rem_euclid(n),
                        Boundary::Dirichlet if (0..n).contains(&(j + o)) => j + o,
                        Boundary::Dirichlet => continue,
                    };
                    s += cur[(base + k * inner as i64) as usize];
                    cnt += 1.0;
                }
                s / cnt
            })
            .collect();
        cur = next;
    }
    cur
}
