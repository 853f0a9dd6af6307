//! Born terms of the small-data expansion and the nonlinear response
//! extracted from full runs by finite differences in `(ε₁, ε₂)`.
//!
//! Every nonlinear run here is split as `u = ε₁v₁ + ε₂v₂ + w`, where `v_i`
//! are linear pulse runs and `w` solves `(P + q) w = −a u²` from zero data.
//! The leapfrog scheme is linear in data and source, so this equals the
//! direct run up to round-off, while the corner combinations of the cross
//! difference never subtract the `O(ε)` linear parts.

mod lockstep;

use serde::Serialize;
use thiserror::Error;

use crate::fields::{
    build_coefficient, build_potential, build_pulse, norm, CoefficientSpec, GridSpec, NormKind, PotentialSpec,
    Profile, SourceSpec, WaveField,
};
use crate::geometry::Metric;
use crate::regression::{power_fit, LineFit};
use crate::solver::{solve_linear, Solver, SolverError};

use lockstep::{Drive, Failed, Lane};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResponseError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("corner (eps1 = {eps1:e}, eps2 = {eps2:e}) failed: {source}")]
    Corner { eps1: f64, eps2: f64, source: SolverError },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("every amplitude in the search range blows up")]
    NoStableAmplitude,
}

impl ResponseError {
    fn invalid(field: &str, reason: &str) -> Self {
        ResponseError::Invalid { field: field.into(), reason: reason.into() }
    }
}

/// Everything a response experiment needs: solver on its grid, metric,
/// the two pulses and the coefficients.
#[derive(Debug, Clone)]
pub struct Setup {
    pub solver: Solver,
    pub metric: Metric,
    pub sources: [SourceSpec; 2],
    pub coeff: CoefficientSpec,
}

impl Setup {
    pub fn new(solver: Solver, metric: Metric, sources: [SourceSpec; 2], coeff: CoefficientSpec) -> Self {
        Self { solver, metric, sources, coeff }
    }

    pub fn grid(&self) -> &GridSpec {
        self.solver.grid()
    }

    pub fn with_coeff(&self, coeff: CoefficientSpec) -> Self {
        Self { coeff, ..self.clone() }
    }

    pub fn with_sources(&self, sources: [SourceSpec; 2]) -> Self {
        Self { sources, ..self.clone() }
    }

    /// The two pulses relabeled.
    pub fn swapped(&self) -> Self {
        self.with_sources([self.sources[1].clone(), self.sources[0].clone()])
    }

    fn pulses(&self) -> Result<[(Vec<f64>, Vec<f64>); 2], SolverError> {
        let g = self.grid();
        Ok([build_pulse(g, &self.metric, &self.sources[0])?, build_pulse(g, &self.metric, &self.sources[1])?])
    }

    fn coefficient(&self) -> Vec<f64> {
        build_coefficient(self.grid(), &self.coeff)
    }

    fn potential(&self) -> Option<Vec<f64>> {
        build_potential(self.grid(), &self.coeff)
    }
}

fn amplitude_scale(dt: f64, data: &(Vec<f64>, Vec<f64>)) -> f64 {
    let m = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    m(&data.0).max(dt * m(&data.1))
}

/// Blow-up threshold for a corner with data `e₁·pulse₁ + e₂·pulse₂`.
fn corner_cap(setup: &Setup, pulses: &[(Vec<f64>, Vec<f64>); 2], e1: f64, e2: f64) -> Option<f64> {
    if let Some(c) = setup.solver.cfg.blowup_cap {
        return Some(c);
    }
    let dt = setup.grid().dt;
    let s = e1.abs() * amplitude_scale(dt, &pulses[0]) + e2.abs() * amplitude_scale(dt, &pulses[1]);
    (s > 0.0).then_some(1e6 * s)
}

fn as_refs(p: &[(Vec<f64>, Vec<f64>); 2]) -> [(&[f64], &[f64]); 2] {
    [(&p[0].0, &p[0].1), (&p[1].0, &p[1].1)]
}

/// `X₁ = Q(a v₁²)`, `X₂ = Q(a v₂²)`, `X₁₂ = Q(a v₁ v₂)`.
#[derive(Debug, Clone)]
pub struct BornTerms {
    pub x1: WaveField,
    pub x2: WaveField,
    pub x12: WaveField,
}

/// Causal solves with the product sources formed slice by slice from two
/// recorded linear runs. Both histories must be complete (stride 1).
pub fn born_terms(solver: &Solver, v1: &WaveField, v2: &WaveField, a: &[f64]) -> Result<BornTerms, SolverError> {
    if !v1.is_full_history() || !v2.is_full_history() || v1.grid().n_t != solver.grid().n_t {
        return Err(SolverError::NotFullHistory);
    }
    let solve = |i: usize, j: usize| {
        let d = Drive::Product { i, j, c: 1.0, a };
        let src = move |k: usize, out: &mut [f64]| d.fill(&v1.slices[k], &v2.slices[k], &[], out);
        solve_linear(solver, None, Some(&src), None)
    };
    let (x1, (x2, x12)) = rayon::join(|| solve(0, 0), || rayon::join(|| solve(1, 1), || solve(0, 1)));
    Ok(BornTerms { x1: x1?, x2: x2?, x12: x12? })
}

/// Linear pulse runs together with their Born terms, computed in lockstep
/// at the solver's recording stride. With a potential configured, every
/// run (and so `Q`) includes it.
#[derive(Debug, Clone)]
pub struct BornSet {
    pub v1: WaveField,
    pub v2: WaveField,
    pub terms: BornTerms,
}

pub fn born_lockstep(setup: &Setup) -> Result<BornSet, ResponseError> {
    let pulses = setup.pulses()?;
    let a = setup.coefficient();
    let q = setup.potential();
    let lane = |i, j| Lane { drive: Drive::Product { i, j, c: 1.0, a: &a }, q: q.as_deref(), cap: None };
    let lanes = [lane(0, 0), lane(1, 1), lane(0, 1)];
    let out = lockstep::run(&setup.solver, as_refs(&pulses), q.as_deref(), true, &lanes).map_err(|(_, e)| ResponseError::Solver(e))?;
    let [v1, v2] = out.v;
    let mut it = out.lanes.into_iter();
    let (x1, x2, x12) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    Ok(BornSet { v1, v2, terms: BornTerms { x1, x2, x12 } })
}

/// `‖u − εv + ε²X‖_{L²}` over the recorded spacetime slices.
pub fn defect_of(u: &WaveField, v: &WaveField, x: &WaveField, eps: f64) -> f64 {
    norm(&WaveField::combine(&[(1.0, u), (-eps, v), (eps * eps, x)]), NormKind::L2, None)
}

/// Remainder of the two-term expansion `u(ε) ≈ εv − ε²Q(a v²)` for data
/// `ε·(pulse₁ + pulse₂)`, in spacetime L².
pub fn expansion_defect(setup: &Setup, eps: f64) -> Result<f64, ResponseError> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(ResponseError::invalid("experiment.eps", "must be positive"));
    }
    let pulses = setup.pulses()?;
    let a = setup.coefficient();
    let q = setup.potential();
    let lanes = [
        Lane { drive: Drive::Split { e1: eps, e2: eps, a: &a }, q: q.as_deref(), cap: corner_cap(setup, &pulses, eps, eps) },
        Lane { drive: Drive::Square { c: 1.0, a: &a }, q: q.as_deref(), cap: None },
    ];
    let out = lockstep::run(&setup.solver, as_refs(&pulses), q.as_deref(), false, &lanes)
        .map_err(|(_, e)| ResponseError::Solver(e))?;
    let r = WaveField::combine(&[(1.0, &out.lanes[0]), (eps * eps, &out.lanes[1])]);
    Ok(norm(&r, NormKind::L2, None))
}

fn survives(setup: &Setup, quiet: &Solver, eps: f64) -> Result<bool, ResponseError> {
    let pulses = setup.pulses()?;
    let a = setup.coefficient();
    let q = setup.potential();
    let lanes = [Lane { drive: Drive::Split { e1: eps, e2: eps, a: &a }, q: q.as_deref(), cap: corner_cap(setup, &pulses, eps, eps) }];
    match lockstep::run(quiet, as_refs(&pulses), q.as_deref(), false, &lanes) {
        Ok(_) => Ok(true),
        Err((_, SolverError::BlowUp { .. })) => Ok(false),
        Err((_, e)) => Err(e.into()),
    }
}

/// Geometric bisections used by default when calibrating the amplitude.
pub const CALIBRATION_ITERS: usize = 12;

/// Largest amplitude `ε ≤ hi` (to `iters` geometric bisections) whose run
/// with data `ε·(pulse₁ + pulse₂)` does not blow up.
pub fn calibrate_amplitude(setup: &Setup, hi: f64, iters: usize) -> Result<f64, ResponseError> {
    if !(hi.is_finite() && hi > 0.0) {
        return Err(ResponseError::invalid("experiment.eps_max", "must be positive"));
    }
    let quiet = setup.solver.with_stride(usize::MAX);
    if survives(setup, &quiet, hi)? {
        return Ok(hi);
    }
    let mut bad = hi;
    let mut good = None;
    for _ in 0..40 {
        let trial = 0.5 * bad;
        if survives(setup, &quiet, trial)? {
            good = Some(trial);
            break;
        }
        bad = trial;
    }
    let mut good = good.ok_or(ResponseError::NoStableAmplitude)?;
    for _ in 0..iters {
        let mid = (good * bad).sqrt();
        if survives(setup, &quiet, mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}

/// `scale · {2⁻⁴, …, 2⁻⁸}`.
pub fn default_ladder(scale: f64) -> Vec<f64> {
    (4..=8).map(|k| scale * 0.5f64.powi(k)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectLadder {
    pub eps: Vec<f64>,
    pub defect: Vec<f64>,
    /// Fit of `log defect` against `log ε`.
    pub fit: Option<LineFit>,
}

pub fn defect_ladder(setup: &Setup, eps: &[f64]) -> Result<DefectLadder, ResponseError> {
    let defect = eps.iter().map(|&e| expansion_defect(setup, e)).collect::<Result<Vec<_>, _>>()?;
    let fit = power_fit(eps, &defect);
    Ok(DefectLadder { eps: eps.to_vec(), defect, fit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CornerRun {
    pub eps1: f64,
    pub eps2: f64,
    /// Largest recorded `|w|` of the nonlinear remainder.
    pub max_abs: f64,
}

/// Finite-difference estimate of `∂_{ε₁}∂_{ε₂}u` at zero.
#[derive(Debug, Clone)]
pub struct CrossResponse {
    pub field: WaveField,
    pub eps: (f64, f64),
    pub corners: Vec<CornerRun>,
    /// `X₁₂ = Q(a v₁ v₂)` from the same lockstep run, if requested.
    pub born_reference: Option<WaveField>,
}

impl CrossResponse {
    /// The limit `−2X₁₂` as a response, with no corner runs.
    pub fn born_oracle(x12: &WaveField) -> Self {
        Self { field: x12.scaled(-2.0), eps: (0.0, 0.0), corners: Vec::new(), born_reference: Some(x12.clone()) }
    }

    /// `‖field + 2X₁₂‖ / ‖X₁₂‖` in spacetime L².
    pub fn born_discrepancy(&self) -> Option<f64> {
        let x = self.born_reference.as_ref()?;
        let d = norm(&WaveField::combine(&[(1.0, &self.field), (2.0, x)]), NormKind::L2, None);
        Some(d / norm(x, NormKind::L2, None))
    }
}

/// `[u(ε₁,ε₂) − u(ε₁,0) − u(0,ε₂) + u(0,0)]/(ε₁ε₂)` from four corner runs
/// advanced together; the `(0,0)` corner is run like the others.
pub fn cross_difference(setup: &Setup, eps1: f64, eps2: f64, with_born: bool) -> Result<CrossResponse, ResponseError> {
    for (f, e) in [("experiment.eps1", eps1), ("experiment.eps2", eps2)] {
        if !(e.is_finite() && e != 0.0) {
            return Err(ResponseError::invalid(f, "must be finite and nonzero"));
        }
    }
    let pulses = setup.pulses()?;
    let a = setup.coefficient();
    let q = setup.potential();
    let corners = [(eps1, eps2), (eps1, 0.0), (0.0, eps2), (0.0, 0.0)];
    let mut lanes: Vec<Lane<'_>> = corners
        .iter()
        .map(|&(e1, e2)| Lane { drive: Drive::Split { e1, e2, a: &a }, q: q.as_deref(), cap: corner_cap(setup, &pulses, e1, e2) })
        .collect();
    if with_born {
        lanes.push(Lane { drive: Drive::Product { i: 0, j: 1, c: 1.0, a: &a }, q: q.as_deref(), cap: None });
    }
    let out = lockstep::run(&setup.solver, as_refs(&pulses), q.as_deref(), false, &lanes).map_err(|(f, e)| match f {
        Failed::Lane(i) if i < corners.len() => ResponseError::Corner { eps1: corners[i].0, eps2: corners[i].1, source: e },
        _ => ResponseError::Solver(e),
    })?;
    let mut w = out.lanes;
    let born_reference = if with_born { w.pop() } else { None };
    let c = 1.0 / (eps1 * eps2);
    let mut field = WaveField::combine(&[(c, &w[0]), (-c, &w[1]), (-c, &w[2]), (c, &w[3])]);
    field.meta.insert("eps1".into(), format!("{eps1:e}"));
    field.meta.insert("eps2".into(), format!("{eps2:e}"));
    let corners = corners.iter().zip(&w).map(|(&(eps1, eps2), f)| CornerRun { eps1, eps2, max_abs: f.max_abs() }).collect();
    Ok(CrossResponse { field, eps: (eps1, eps2), corners, born_reference })
}

/// Linear and nonlinear parts of the response under a small potential.
#[derive(Debug, Clone)]
pub struct PerturbationSplit {
    /// `[u_lin(δ) − u_lin(0)]/δ` with `a` off.
    pub v_est: WaveField,
    /// `−Q(q (u₁ + u₂))`, the limit of `v_est`.
    pub v_oracle: WaveField,
    /// Cross difference with `a` and `δq` on, divided by `δ`.
    pub w_est: WaveField,
    pub cross: CrossResponse,
}

/// Potential shape `q` (unit strength) of the configured profile; zero when
/// no potential is configured.
fn unit_potential(setup: &Setup) -> (Vec<f64>, Option<Profile>) {
    match &setup.coeff.potential {
        Some(p) => {
            let unit = CoefficientSpec { potential: Some(PotentialSpec { delta: 1.0, profile: p.profile.clone() }), ..setup.coeff.clone() };
            (build_potential(setup.grid(), &unit).unwrap(), Some(p.profile.clone()))
        }
        None => (vec![0.0; setup.grid().len()], None),
    }
}

pub fn perturbation_split(setup: &Setup, delta: f64, eps: f64) -> Result<PerturbationSplit, ResponseError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(ResponseError::invalid("experiment.delta", "must be positive"));
    }
    let pulses = setup.pulses()?;
    let (q_unit, profile) = unit_potential(setup);
    let dq: Vec<f64> = q_unit.iter().map(|v| delta * v).collect();
    // (P + δq) z = −δ q (v₁ + v₂) gives z = u_lin(δ) − u_lin(0).
    let lanes = [
        Lane { drive: Drive::Scatter { c: -delta, p: &q_unit }, q: Some(&dq), cap: None },
        Lane { drive: Drive::Scatter { c: -1.0, p: &q_unit }, q: None, cap: None },
    ];
    let out = lockstep::run(&setup.solver, as_refs(&pulses), None, false, &lanes).map_err(|(_, e)| ResponseError::Solver(e))?;
    let v_est = out.lanes[0].scaled(1.0 / delta);
    let v_oracle = out.lanes[1].clone();

    let coeff = CoefficientSpec { potential: profile.map(|profile| PotentialSpec { delta, profile }), ..setup.coeff.clone() };
    let cross = cross_difference(&setup.with_coeff(coeff), eps, eps, false)?;
    let w_est = cross.field.scaled(1.0 / delta);
    Ok(PerturbationSplit { v_est, v_oracle, w_est, cross })
}
