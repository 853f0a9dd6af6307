use rayon::prelude::*;

use crate::fields::{Boundary, GridSpec};
use crate::geometry::{GeometryError, Metric};

/// Flux-form discretization of the positive Laplace–Beltrami operator
/// `A u = −(1/√g) Σ D_i(√g g^{ij} D_j u)` on a cell-centred grid.
///
/// Diagonal terms use face-centred coefficients with `D⁻_i(c D⁺_i u)`;
/// off-diagonal terms use the average of `D⁻_j(C D⁺_i u)` and
/// `D⁺_j(C D⁻_i u)` with `C` at cell centres. Both are derived from a
/// symmetric bilinear form, so `A` is self-adjoint in the `√g`-weighted
/// inner product for either boundary kind.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: GridSpec,
    pub sqrt_det: Vec<f64>,
    inv_sqrt_det: Vec<f64>,
    /// `face[i][k]` is `√g g^{ii}` on the `+½ e_i` face of cell `k`.
    face: Vec<Vec<f64>>,
    /// `(i, j, √g g^{ij})` at cell centres, `i < j`.
    cross: Vec<(usize, usize, Vec<f64>)>,
}

impl Discretization {
    pub fn new(grid: &GridSpec, m: &Metric) -> Result<Self, GeometryError> {
        let d = grid.d;
        let n = grid.len();
        let mut sqrt_det = vec![0.0; n];
        let mut face = vec![vec![0.0; n]; d];
        let mut cross_vals: Vec<Vec<f64>> = Vec::new();
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
        let diagonal = m.is_diagonal();
        if !diagonal {
            cross_vals = vec![vec![0.0; n]; pairs.len()];
        }
        for k in 0..n {
            let x = grid.center(k);
            sqrt_det[k] = m.sqrt_det_g(&x)?;
            for (i, f) in face.iter_mut().enumerate() {
                let mut xf = x.clone();
                xf[i] += 0.5 * grid.h;
                f[k] = m.sqrt_det_g(&xf)? * m.g_star(&xf)?.get(i, i);
            }
            if !diagonal {
                let gs = m.g_star(&x)?;
                for (p, &(i, j)) in pairs.iter().enumerate() {
                    cross_vals[p][k] = sqrt_det[k] * gs.get(i, j);
                }
            }
        }
        let cross = if diagonal {
            Vec::new()
        } else {
            pairs.into_iter().zip(cross_vals).map(|((i, j), v)| (i, j, v)).collect()
        };
        let inv_sqrt_det = sqrt_det.iter().map(|v| 1.0 / v).collect();
        Ok(Self { grid: grid.clone(), sqrt_det, inv_sqrt_det, face, cross })
    }

    pub fn len(&self) -> usize {
        self.sqrt_det.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sqrt_det.is_empty()
    }

    /// `h^d Σ √g u v`
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let row = *self.grid.n.last().unwrap();
        let partial: Vec<f64> = u
            .par_chunks(row)
            .zip(v.par_chunks(row))
            .zip(self.sqrt_det.par_chunks(row))
            .map(|((a, b), w)| a.iter().zip(b).zip(w).map(|((x, y), z)| x * y * z).sum::<f64>())
            .collect();
        partial.iter().sum::<f64>() * self.grid.h.powi(self.grid.d as i32)
    }

    /// `out = A u`
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        if self.grid.d == 2 && self.cross.is_empty() {
            self.apply_2d_diag(u, out);
        } else {
            self.apply_generic(u, out);
        }
    }

    fn apply_2d_diag(&self, u: &[f64], out: &mut [f64]) {
        let (n0, n1) = (self.grid.n[0], self.grid.n[1]);
        let periodic = self.grid.boundary == Boundary::Periodic;
        let ih2 = 1.0 / (self.grid.h * self.grid.h);
        let (f0, f1) = (&self.face[0], &self.face[1]);
        out.par_chunks_mut(n1).enumerate().for_each(|(i, row)| {
            let base = i * n1;
            let up = if i + 1 < n0 {
                Some(base + n1)
            } else if periodic {
                Some(0)
            } else {
                None
            };
            let (dn, fdn_row) = if i > 0 {
                (Some(base - n1), base - n1)
            } else if periodic {
                (Some((n0 - 1) * n1), (n0 - 1) * n1)
            } else {
                (None, base)
            };
            for j in 0..n1 {
                let k = base + j;
                let uc = u[k];
                let ue = up.map_or(0.0, |b| u[b + j]);
                let uw = dn.map_or(0.0, |b| u[b + j]);
                                let un = if j + 1 < n1 {
                    u[base + j + 1]
                } else if periodic {
                    u[base]
                } else {
                    0.0
                };
                let (us, fs) = if j > 0 {
                    (u[k - 1], f1[k - 1])
                } else if periodic {
                    (u[base + n1 - 1], f1[base + n1 - 1])
                } else {
                    (0.0, f1[k])
                };
                let flux0 = f0[k] * (ue - uc) - f0[fdn_row + j] * (uc - uw);
                let flux1 = f1[k] * (un - uc) - fs * (uc - us);
                row[j] = -self.inv_sqrt_det[k] * (flux0 + flux1) * ih2;
            }
        });
    }

    fn apply_generic(&self, u: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let d = g.d;
        let strides = g.strides();
        let periodic = g.boundary == Boundary::Periodic;
        let ih2 = 1.0 / (g.h * g.h);
        let row = g.n[d - 1];
        // Neighbour of `idx` (multi-index `c`) shifted by `s` along `axis`.
        let shift = |c: &[usize], idx: usize, axis: usize, s: i64| -> Option<usize> {
            let k = c[axis] as i64 + s;
            let nk = g.n[axis] as i64;
            if k >= 0 && k < nk {
                Some((idx as i64 + s * strides[axis] as i64) as usize)
            } else if periodic {
                let w = k.rem_euclid(nk);
                Some((idx as i64 + (w - c[axis] as i64) * strides[axis] as i64) as usize)
            } else {
                None
            }
        };
        out.par_chunks_mut(row).enumerate().for_each(|(r, orow)| {
            let mut c = g.unravel(r * row);
            for (j, o) in orow.iter_mut().enumerate() {
                c[d - 1] = j;
                let k = r * row + j;
                let uc = u[k];
                let at = |p: Option<usize>| p.map_or(0.0, |q| u[q]);
                let mut acc = 0.0;
                for i in 0..d {
                    let fp = self.face[i][k];
                    let lo = shift(&c, k, i, -1);
                    let fm = lo.map_or(fp, |q| self.face[i][q]);
                    acc += fp * (at(shift(&c, k, i, 1)) - uc) - fm * (uc - at(lo));
                }
                for (i, j2, cc) in &self.cross {
                    for (a, b) in [(*i, *j2), (*j2, *i)] {
                        // −½ D⁻_b(C D⁺_a u) − ½ D⁺_b(C D⁻_a u), times h².
                        let dplus = |q: usize, cq: &[usize]| at(shift(cq, q, a, 1)) - u[q];
                        let dminus = |q: usize, cq: &[usize]| u[q] - at(shift(cq, q, a, -1));
                        let here_p = cc[k] * dplus(k, &c);
                        let here_m = cc[k] * dminus(k, &c);
                        let back = shift(&c, k, b, -1).map_or(0.0, |q| {
                            let cq = g.unravel(q);
                            cc[q] * dplus(q, &cq)
                        });
                        let fwd = shift(&c, k, b, 1).map_or(0.0, |q| {
                            let cq = g.unravel(q);
                            cc[q] * dminus(q, &cq)
                        });
                        acc += 0.5 * (here_p - back) + 0.5 * (fwd - here_m);
                    }
                }
                *o = -self.inv_sqrt_det[k] * acc * ih2;
            }
        });
    }
}
