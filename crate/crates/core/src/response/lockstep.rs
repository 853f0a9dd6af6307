use rayon::prelude::*;

use crate::fields::WaveField;
use crate::solver::{Evolution, Solver, SolverError};

/// Right-hand side of a zero-data lane, evaluated from the two linear
/// pulses `v₁, v₂` and the lane's own current slice `w`.
#[derive(Clone, Copy)]
pub(crate) enum Drive<'a> {
    /// `−a (e₁v₁ + e₂v₂ + w)²`: the nonlinear remainder of one corner.
    Split { e1: f64, e2: f64, a: &'a [f64] },
    /// `c·a·v_i·v_j`
    Product { i: usize, j: usize, c: f64, a: &'a [f64] },
    /// `c·a·(v₁ + v₂)²`
    Square { c: f64, a: &'a [f64] },
    /// `c·p·(v₁ + v₂)`
    Scatter { c: f64, p: &'a [f64] },
}

impl Drive<'_> {
    pub(crate) fn fill(&self, v1: &[f64], v2: &[f64], w: &[f64], out: &mut [f64]) {
        match *self {
            Drive::Split { e1, e2, a } => {
                for k in 0..out.len() {
                    let u = e1 * v1[k] + e2 * v2[k] + w[k];
                    out[k] = -a[k] * u * u;
                }
            }
            Drive::Product { i, j, c, a } => {
                let pick = |n: usize| if n == 0 { v1 } else { v2 };
                let (vi, vj) = (pick(i), pick(j));
                for k in 0..out.len() {
                    out[k] = c * a[k] * vi[k] * vj[k];
                }
            }
            Drive::Square { c, a } => {
                for k in 0..out.len() {
                    let v = v1[k] + v2[k];
                    out[k] = c * a[k] * v * v;
                }
            }
            Drive::Scatter { c, p } => {
                for k in 0..out.len() {
                    out[k] = c * p[k] * (v1[k] + v2[k]);
                }
            }
        }
    }
}

pub(crate) struct Lane<'a> {
    pub drive: Drive<'a>,
    /// Potential seen by this lane.
    pub q: Option<&'a [f64]>,
    /// Blow-up threshold; `None` never trips.
    pub cap: Option<f64>,
}

/// Which run failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Failed {
    Linear(usize),
    Lane(usize),
}

pub(crate) struct Outcome {
    pub v: [WaveField; 2],
    pub lanes: Vec<WaveField>,
}

/// Advances the two linear pulse runs and every lane together, one step at
/// a time, so sources built from `v₁, v₂` never need a stored history.
/// Lanes are independent within a step and are stepped concurrently; each
/// result depends only on its own inputs.
pub(crate) fn run(
    solver: &Solver,
    pulses: [(&[f64], &[f64]); 2],
    q_lin: Option<&[f64]>,
    record_linear: bool,
    lanes: &[Lane<'_>],
) -> Result<Outcome, (Failed, SolverError)> {
    let quiet = solver.with_stride(usize::MAX);
    let lin_solver = if record_linear { solver } else { &quiet };
    let n = solver.op.len();
    let zeros = vec![0.0; n];
    // Unit-amplitude linear runs only stop on non-finite values; the caps
    // apply to the nonlinear remainders.
    let mut v1 = Evolution::new(lin_solver, pulses[0].0, pulses[0].1, q_lin, None).with_cap(f64::INFINITY);
    let mut v2 = Evolution::new(lin_solver, pulses[1].0, pulses[1].1, q_lin, None).with_cap(f64::INFINITY);

    let mut bufs = vec![vec![0.0; n]; lanes.len()];
    for (b, l) in bufs.iter_mut().zip(lanes) {
        l.drive.fill(pulses[0].0, pulses[1].0, &zeros, b);
    }
    let mut evs: Vec<Evolution<'_>> = lanes
        .iter()
        .zip(&bufs)
        .map(|(l, b)| Evolution::new(solver, &zeros, &zeros, l.q, Some(b)).with_cap(l.cap.unwrap_or(f64::INFINITY)))
        .collect();

    while !v1.done() {
        bufs.par_iter_mut()
            .zip(evs.par_iter())
            .zip(lanes.par_iter())
            .for_each(|((b, ev), l)| l.drive.fill(v1.curr(), v2.curr(), ev.curr(), b));
        let (lin, rest) = rayon::join(
            || rayon::join(|| v1.step(None), || v2.step(None)),
            || evs.par_iter_mut().zip(bufs.par_iter()).map(|(ev, b)| ev.step(Some(b))).collect::<Vec<_>>(),
        );
        if let Err(e) = lin.0 {
            return Err((Failed::Linear(0), e));
        }
        if let Err(e) = lin.1 {
            return Err((Failed::Linear(1), e));
        }
        if let Some((i, e)) = rest.into_iter().enumerate().find_map(|(i, r)| r.err().map(|e| (i, e))) {
            return Err((Failed::Lane(i), e));
        }
    }
    Ok(Outcome { v: [v1.finish(), v2.finish()], lanes: evs.into_iter().map(|e| e.finish()).collect() })
}
