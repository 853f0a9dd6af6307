use rayon::prelude::*;

use crate::fields::{DiagRow, WaveField};

use super::{Solver, SolverError};

/// Quantities gathered during one update, reduced per row and then summed
/// in row order so results do not depend on the thread count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    /// Leapfrog energy of the pair `(prev, curr)` before the update.
    pub energy: f64,
    /// `Σ √g u² h^d` of `curr`.
    pub l2_sq: f64,
    /// `Σ √g u⁴ h^d` of `curr`.
    pub l4_4: f64,
    /// `max |u_next|`, NaN if any entry is not finite.
    pub max_next: f64,
}

/// Two-level leapfrog state.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub prev: Vec<f64>,
    pub curr: Vec<f64>,
    pub step: usize,
    au: Vec<f64>,
}

impl Stepper {
    /// Second-order Taylor start:
    /// `u₋₁ = u0 − dt·u1 + dt²/2·(−A u0 − q u0 − σ u1 + extra0)`.
    pub fn start(s: &Solver, u0: &[f64], u1: &[f64], q: Option<&[f64]>, extra0: Option<&[f64]>) -> Self {
        let n = u0.len();
        let dt = s.grid().dt;
        let mut au = vec![0.0; n];
        s.op.apply(u0, &mut au);
        let prev: Vec<f64> = (0..n)
            .map(|k| {
                let mut acc = -au[k];
                if let Some(q) = q {
                    acc -= q[k] * u0[k];
                }
                if let Some(sig) = &s.damping {
                    acc -= sig[k] * u1[k];
                }
                if let Some(e) = extra0 {
                    acc += e[k];
                }
                u0[k] - dt * u1[k] + 0.5 * dt * dt * acc
            })
            .collect();
        Self { prev, curr: u0.to_vec(), step: 0, au }
    }

    pub fn from_slices(prev: Vec<f64>, curr: Vec<f64>, step: usize) -> Self {
        let n = curr.len();
        Self { prev, curr, step, au: vec![0.0; n] }
    }

    /// `u_next = [2u − (1 − σdt/2)u_prev + dt²(−A u − q u + extra)]/(1 + σdt/2)`.
    pub fn advance(&mut self, s: &Solver, q: Option<&[f64]>, extra: Option<&[f64]>) -> StepStats {
        let op = &s.op;
        let g = &op.grid;
        let dt = g.dt;
        let dt2 = dt * dt;
        let hd = g.h.powi(g.d as i32);
        op.apply(&self.curr, &mut self.au);
        let row = *g.n.last().unwrap();
        let damping = s.damping.as_deref().map(|v| v.as_slice());
        let curr = &self.curr;
        let au = &self.au;
        let w = &op.sqrt_det;
        let partial: Vec<[f64; 5]> = self
            .prev
            .par_chunks_mut(row)
            .enumerate()
            .map(|(r, prow)| {
                let mut acc = [0.0f64; 5];
                let base = r * row;
                for (j, p) in prow.iter_mut().enumerate() {
                    let k = base + j;
                    let (u, up) = (curr[k], *p);
                    let ut = (u - up) / dt;
                    acc[0] += w[k] * ut * ut;
                    acc[1] += w[k] * au[k] * up;
                    let u2 = u * u;
                    acc[2] += w[k] * u2;
                    acc[3] += w[k] * u2 * u2;
                    let mut rhs = -au[k];
                    if let Some(q) = q {
                        rhs -= q[k] * u;
                    }
                    if let Some(e) = extra {
                        rhs += e[k];
                    }
                    let next = match damping {
                        Some(sig) if sig[k] != 0.0 => {
                            let c = 0.5 * sig[k] * dt;
                            (2.0 * u - (1.0 - c) * up + dt2 * rhs) / (1.0 + c)
                        }
                        _ => 2.0 * u - up + dt2 * rhs,
                    };
                    acc[4] = if next.is_finite() && acc[4].is_finite() { acc[4].max(next.abs()) } else { f64::NAN };
                    *p = next;
                }
                acc
            })
            .collect();
        let mut tot = [0.0f64; 5];
        for p in &partial {
            for i in 0..4 {
                tot[i] += p[i];
            }
            tot[4] = if p[4].is_finite() && tot[4].is_finite() { tot[4].max(p[4]) } else { f64::NAN };
        }
        std::mem::swap(&mut self.prev, &mut self.curr);
        self.step += 1;
        StepStats { energy: 0.5 * (tot[0] + tot[1]) * hd, l2_sq: tot[2] * hd, l4_4: tot[3] * hd, max_next: tot[4] }
    }
}

/// A stepper plus recording, diagnostics and the blow-up guard.
pub struct Evolution<'a> {
    solver: &'a Solver,
    q: Option<&'a [f64]>,
    stepper: Stepper,
    field: WaveField,
    l4_acc: f64,
    last_l4: Option<f64>,
    cap: f64,
}

impl<'a> Evolution<'a> {
    pub fn new(solver: &'a Solver, u0: &[f64], u1: &[f64], q: Option<&'a [f64]>, extra0: Option<&[f64]>) -> Self {
        let dt = solver.grid().dt;
        let scale = u0.iter().map(|v| v.abs()).fold(0.0, f64::max).max(dt * u1.iter().map(|v| v.abs()).fold(0.0, f64::max));
        let cap = solver.cfg.blowup_cap.unwrap_or(if scale > 0.0 { 1e6 * scale } else { f64::INFINITY });
        let stepper = Stepper::start(solver, u0, u1, q, extra0);
        let mut field = WaveField::new(solver.op.clone(), solver.cfg.record_stride);
        field.push(0, u0);
        Self { solver, q, stepper, field, l4_acc: 0.0, last_l4: None, cap }
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = cap;
        self
    }

    pub fn step_index(&self) -> usize {
        self.stepper.step
    }

    pub fn done(&self) -> bool {
        self.stepper.step >= self.solver.grid().n_t
    }

    pub fn curr(&self) -> &[f64] {
        &self.stepper.curr
    }

    pub fn prev(&self) -> &[f64] {
        &self.stepper.prev
    }

    fn push_row(&mut self, step: usize, l2_sq: f64, l4_4: f64, energy: f64) {
        let dt = self.solver.grid().dt;
        if let Some(p) = self.last_l4 {
            self.l4_acc += 0.5 * dt * (p + l4_4);
        }
        self.last_l4 = Some(l4_4);
        self.field.diagnostics.push(DiagRow {
            step,
            time: self.solver.grid().time(step),
            l2: l2_sq.max(0.0).sqrt(),
            l4_accum: self.l4_acc,
            energy,
        });
    }

    /// Advances one step with right-hand side `extra` (source minus the
    /// nonlinear term) evaluated at the current step.
    pub fn step(&mut self, extra: Option<&[f64]>) -> Result<(), SolverError> {
        let n = self.stepper.step;
        let st = self.stepper.advance(self.solver, self.q, extra);
        self.push_row(n, st.l2_sq, st.l4_4, st.energy);
        if !st.max_next.is_finite() || st.max_next > self.cap {
            self.field.blowup = true;
            return Err(SolverError::BlowUp {
                step: n + 1,
                time: self.solver.grid().time(n + 1),
                max_abs: st.max_next,
            });
        }
        if self.field.wants(n + 1) {
            let step = n + 1;
            let data = self.stepper.curr.clone();
            self.field.steps.push(step);
            self.field.slices.push(data);
        }
        Ok(())
    }

    pub fn finish(mut self) -> WaveField {
        let n = self.stepper.step;
        let w = self.solver.op.sqrt_det.clone();
        let hd = self.solver.grid().h.powi(self.solver.grid().d as i32);
        let u = &self.stepper.curr;
        let l2: f64 = u.iter().zip(&w).map(|(v, s)| v * v * s).sum::<f64>() * hd;
        let l4: f64 = u.iter().zip(&w).map(|(v, s)| v.powi(4) * s).sum::<f64>() * hd;
        let e = crate::fields::norm::energy_pair(&self.field, &self.stepper.prev, &self.stepper.curr, None);
        self.push_row(n, l2, l4, e);
        self.field.final_prev = Some(std::mem::take(&mut self.stepper.prev));
        self.field
    }
}
