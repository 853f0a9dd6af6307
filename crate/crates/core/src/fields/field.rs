use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::solver::Discretization;

use super::GridSpec;

/// Per-step diagnostics written while stepping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagRow {
    pub step: usize,
    pub time: f64,
    pub l2: f64,
    /// Running `∫∫ u⁴` (trapezoid in time) up to this step.
    pub l4_accum: f64,
    /// Leapfrog energy of the pair `(u_{step−1}, u_step)`.
    pub energy: f64,
}

/// Time slices of a scalar field on a grid, recorded every `stride` steps
/// plus the final step.
#[derive(Debug, Clone)]
pub struct WaveField {
    pub op: Arc<Discretization>,
    pub stride: usize,
    /// Step index of each recorded slice.
    pub steps: Vec<usize>,
    pub slices: Vec<Vec<f64>>,
    /// Slice one step before the last recorded one, for the energy.
    pub final_prev: Option<Vec<f64>>,
    pub diagnostics: Vec<DiagRow>,
    pub blowup: bool,
    pub meta: BTreeMap<String, String>,
}

impl WaveField {
    pub fn new(op: Arc<Discretization>, stride: usize) -> Self {
        Self {
            op,
            stride: stride.max(1),
            steps: Vec::new(),
            slices: Vec::new(),
            final_prev: None,
            diagnostics: Vec::new(),
            blowup: false,
            meta: BTreeMap::new(),
        }
    }

    /// A single-slice field.
    pub fn from_slice(op: Arc<Discretization>, step: usize, data: Vec<f64>) -> Self {
        let mut f = Self::new(op, 1);
        f.steps.push(step);
        f.slices.push(data);
        f
    }

    pub fn grid(&self) -> &GridSpec {
        &self.op.grid
    }

    pub fn is_full_history(&self) -> bool {
        self.stride == 1 && self.steps.len() == self.grid().n_t + 1
    }

    /// Recording rule shared by every runner.
    pub fn wants(&self, step: usize) -> bool {
        step % self.stride == 0 || step == self.grid().n_t
    }

    pub fn push(&mut self, step: usize, data: &[f64]) {
        self.steps.push(step);
        self.slices.push(data.to_vec());
    }

    pub fn slice_at_step(&self, step: usize) -> Option<&[f64]> {
        self.steps.binary_search(&step).ok().map(|i| self.slices[i].as_slice())
    }

    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|&s| self.grid().time(s)).collect()
    }

    pub fn last(&self) -> &[f64] {
        self.slices.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn max_abs(&self) -> f64 {
        self.slices.iter().flat_map(|s| s.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.slices.iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// `Σ c_k f_k` over fields recorded at identical steps.
    pub fn combine(terms: &[(f64, &WaveField)]) -> WaveField {
        let first = terms[0].1;
        let mut out = WaveField::new(first.op.clone(), first.stride);
        for (i, &step) in first.steps.iter().enumerate() {
            let mut acc = vec![0.0; first.slices[i].len()];
            for (c, f) in terms {
                debug_assert_eq!(f.steps[i], step);
                for (a, v) in acc.iter_mut().zip(&f.slices[i]) {
                    *a += c * v;
                }
            }
            out.push(step, &acc);
        }
        if terms.iter().all(|(_, f)| f.final_prev.is_some()) {
            let mut acc = vec![0.0; first.op.len()];
            for (c, f) in terms {
                for (a, v) in acc.iter_mut().zip(f.final_prev.as_ref().unwrap()) {
                    *a += c * v;
                }
            }
            out.final_prev = Some(acc);
        }
        out
    }

    pub fn scaled(&self, c: f64) -> WaveField {
        WaveField::combine(&[(c, self)])
    }
}
