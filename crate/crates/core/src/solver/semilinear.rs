use serde::Serialize;

use crate::fields::{build_coefficient, build_potential, build_pulse, norm, CoefficientSpec, NormKind, SourceSpec, WaveField};
use crate::geometry::Metric;

use super::{Evolution, Solver, SolverError};

/// `(u0, u1) = ε₁·pulse₁ + ε₂·pulse₂`.
pub fn initial_data(
    solver: &Solver,
    m: &Metric,
    eps1: f64,
    eps2: f64,
    src1: &SourceSpec,
    src2: &SourceSpec,
) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
    let g = solver.grid();
    let (a0, a1) = build_pulse(g, m, src1)?;
    let (b0, b1) = build_pulse(g, m, src2)?;
    let u0 = a0.iter().zip(&b0).map(|(a, b)| eps1 * a + eps2 * b).collect();
    let u1 = a1.iter().zip(&b1).map(|(a, b)| eps1 * a + eps2 * b).collect();
    Ok((u0, u1))
}

/// `−a u²` into `out`.
pub(crate) fn nonlinear_term(a: &[f64], u: &[f64], out: &mut [f64]) {
    for ((o, av), uv) in out.iter_mut().zip(a).zip(u) {
        *o = -av * uv * uv;
    }
}

/// `P u + δq u + a u² = 0` with data `ε₁·pulse₁ + ε₂·pulse₂`; the nonlinear
/// term is explicit at the current step.
pub fn solve_semilinear(
    solver: &Solver,
    m: &Metric,
    eps1: f64,
    eps2: f64,
    src1: &SourceSpec,
    src2: &SourceSpec,
    coeff: &CoefficientSpec,
) -> Result<WaveField, SolverError> {
    let g = solver.grid();
    let a = build_coefficient(g, coeff);
    let q = build_potential(g, coeff);
    let (u0, u1) = initial_data(solver, m, eps1, eps2, src1, src2)?;
    let mut extra = vec![0.0; g.len()];
    nonlinear_term(&a, &u0, &mut extra);
    let mut ev = Evolution::new(solver, &u0, &u1, q.as_deref(), Some(&extra));
    while !ev.done() {
        nonlinear_term(&a, ev.curr(), &mut extra);
        ev.step(Some(&extra))?;
    }
    let mut f = ev.finish();
    f.meta.insert("eps1".into(), format!("{eps1:e}"));
    f.meta.insert("eps2".into(), format!("{eps2:e}"));
    Ok(f)
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    /// `B_m = ‖u_{m+1} − u_m‖_{L⁴}` for `m = 1, 2, …`.
    pub b: Vec<f64>,
    /// Iteration index at which `B_m` fell below the tolerance.
    pub converged_at: usize,
    pub max_ratio: f64,
}

/// Successive approximation `P u_m + a u_{m−1}² = 0` with the pulse data,
/// starting from `u_0 = 0`. Each iterate is a linear run whose source is
/// the previous iterate's nonlinear term, so histories are kept in full.
pub fn picard_solve(
    solver: &Solver,
    m: &Metric,
    eps1: f64,
    eps2: f64,
    src1: &SourceSpec,
    src2: &SourceSpec,
    coeff: &CoefficientSpec,
) -> Result<(WaveField, PicardReport), SolverError> {
    let full = solver.with_stride(1);
    let g = full.grid();
    let a = build_coefficient(g, coeff);
    let q = build_potential(g, coeff);
    let (u0, u1) = initial_data(&full, m, eps1, eps2, src1, src2)?;
    let n = g.len();
    let iterate = |prev: Option<&WaveField>| -> Result<WaveField, SolverError> {
        let mut extra = vec![0.0; n];
        let src = |k: usize, out: &mut [f64]| match prev {
            Some(p) => nonlinear_term(&a, &p.slices[k], out),
            None => out.iter_mut().for_each(|v| *v = 0.0),
        };
        src(0, &mut extra);
        let mut ev = Evolution::new(&full, &u0, &u1, q.as_deref(), Some(&extra));
        while !ev.done() {
            src(ev.step_index(), &mut extra);
            ev.step(Some(&extra))?;
        }
        Ok(ev.finish())
    };
    let mut curr = iterate(None)?;
    let mut b: Vec<f64> = Vec::new();
    let mut high = 0;
    for mstep in 1..=solver.cfg.picard_max_iter {
        let next = iterate(Some(&curr))?;
        let diff = WaveField::combine(&[(1.0, &next), (-1.0, &curr)]);
        let bm = norm(&diff, NormKind::L4, None);
        if let Some(&last) = b.last() {
            let ratio = if last > 0.0 { bm / last } else { 0.0 };
            high = if ratio > 0.9 { high + 1 } else { 0 };
            if high >= 2 {
                return Err(SolverError::NoContraction { m: mstep, ratio });
            }
        }
        b.push(bm);
        curr = next;
        if bm < solver.cfg.picard_tol {
            let max_ratio = b.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).fold(0.0, f64::max);
            return Ok((curr, PicardReport { b, converged_at: mstep, max_ratio }));
        }
    }
    Err(SolverError::NotConverged(solver.cfg.picard_max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Boundary, GridSpec};
    use crate::geometry::Covector;
    use crate::raytrace::{InterfaceSpec, LevelSet};
    use crate::solver::{solve_linear, SolverConfig};

    fn scene() -> (Solver, Metric, SourceSpec, SourceSpec, CoefficientSpec) {
        let m = Metric::flat(2);
        let g = GridSpec::new(vec![-1.5, -1.5], 0.04, vec![75, 75], 0.6, 0.5, &m, Boundary::Dirichlet).unwrap();
        let s = Solver::new(&g, &m, &SolverConfig { sponge_width: 6, ..Default::default() }).unwrap();
        let src = |x: f64, y: f64, xi: [f64; 2]| SourceSpec {
            x_launch: vec![x, y],
            t0: 0.0,
            zeta: Covector::new(-1.0, xi.to_vec()),
            s0: 0.05,
            omega: 10.0,
            sigma: 0.12,
            amplitude: 1.0,
            mu_proxy: 2.0,
        };
        let c = CoefficientSpec::jump(InterfaceSpec::new(LevelSet::Plane { normal: vec![1.0, 0.0], offset: 0.0 }), 1.0);
        (s, m, src(-0.3, -0.3, [0.6, 0.8]), src(-0.3, 0.3, [0.6, -0.8]), c)
    }

    #[test]
    fn zero_eps_is_zero() {
        let (s, m, a, b, c) = scene();
        let f = solve_semilinear(&s, &m, 0.0, 0.0, &a, &b, &c).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn alpha_zero_is_superposition() {
        let (s, m, a, b, c) = scene();
        let c0 = c.with_alpha(0.0);
        let u = solve_semilinear(&s, &m, 0.3, 0.2, &a, &b, &c0).unwrap();
        let (a0, a1) = build_pulse(s.grid(), &m, &a).unwrap();
        let (b0, b1) = build_pulse(s.grid(), &m, &b).unwrap();
        let va = solve_linear(&s, Some((&a0, &a1)), None, None).unwrap();
        let vb = solve_linear(&s, Some((&b0, &b1)), None, None).unwrap();
        let scale = u.max_abs();
        for i in 0..u.slices.len() {
            for k in 0..u.slices[i].len() {
                let lin = 0.3 * va.slices[i][k] + 0.2 * vb.slices[i][k];
                assert!((u.slices[i][k] - lin).abs() <= 1e-12 * scale);
            }
        }
    }

    /// Classical RK4 for u'' = u² with a very small step.
    fn ode_reference(t_end: f64, h: f64) -> f64 {
        let f = |y: [f64; 2]| [y[1], y[0] * y[0]];
        let mut y = [1.0, 0.0];
        let n = (t_end / h).round() as usize;
        let h = t_end / n as f64;
        for _ in 0..n {
            let k1 = f(y);
            let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y[0]
    }

    #[test]
    fn spatially_constant_data_follow_the_ode() {
        let m = Metric::flat(2);
        let g = GridSpec::new(vec![0.0, 0.0], 1e-3, vec![4, 4], 2.0, 0.05, &m, Boundary::Periodic).unwrap();
        let s = Solver::new(&g, &m, &SolverConfig { record_stride: 4000, blowup_cap: Some(1e3), ..Default::default() }).unwrap();
        let u0 = vec![1.0; g.len()];
        let u1 = vec![0.0; g.len()];
        let a = vec![-1.0; g.len()];
        let mut extra = vec![0.0; g.len()];
        nonlinear_term(&a, &u0, &mut extra);
        let mut ev = Evolution::new(&s, &u0, &u1, None, Some(&extra));
        while !ev.done() {
            nonlinear_term(&a, ev.curr(), &mut extra);
            ev.step(Some(&extra)).unwrap();
        }
        let f = ev.finish();
        for (step, sl) in f.steps.iter().zip(&f.slices) {
            let t = g.time(*step);
            let want = ode_reference(t, 1e-5);
            assert!(sl.iter().all(|v| ((v - want) / want).abs() < 1e-6), "t = {t}: {} vs {want}", sl[0]);
        }
    }

    #[test]
    fn ode_blowup_is_reported() {
        let m = Metric::flat(2);
        let g = GridSpec::new(vec![0.0, 0.0], 1e-2, vec![4, 4], 5.0, 0.5, &m, Boundary::Periodic).unwrap();
        let s = Solver::new(&g, &m, &SolverConfig::default()).unwrap();
        let a = vec![-1.0; g.len()];
        let u0 = vec![1.0; g.len()];
        let mut extra = vec![0.0; g.len()];
        nonlinear_term(&a, &u0, &mut extra);
        let mut ev = Evolution::new(&s, &u0, &vec![0.0; g.len()], None, Some(&extra));
        let mut err = None;
        while !ev.done() {
            nonlinear_term(&a, ev.curr(), &mut extra);
            if let Err(e) = ev.step(Some(&extra)) {
                err = Some(e);
                break;
            }
        }
        assert!(matches!(err, Some(SolverError::BlowUp { .. })));
    }

    #[test]
    fn picard_with_linear_problem_stops_at_first_iterate() {
        let (s, m, a, b, c) = scene();
        let (_, rep) = picard_solve(&s, &m, 0.5, 0.5, &a, &b, &c.with_alpha(0.0)).unwrap();
        assert_eq!(rep.converged_at, 1);
        assert_eq!(rep.b, vec![0.0]);
    }

    #[test]
    fn picard_matches_direct_solve() {
        let (s, m, a, b, c) = scene();
        let (pic, rep) = picard_solve(&s, &m, 0.5, 0.5, &a, &b, &c).unwrap();
        let direct = solve_semilinear(&s.with_stride(1), &m, 0.5, 0.5, &a, &b, &c).unwrap();
        let diff = WaveField::combine(&[(1.0, &pic), (-1.0, &direct)]);
        assert!(norm(&diff, NormKind::L4, None) < 10.0 * s.cfg.picard_tol);
        assert!(rep.max_ratio < 0.6, "{rep:?}");
    }

    #[test]
    fn large_data_do_not_contract() {
        let (s, m, a, b, c) = scene();
        let r = picard_solve(&s, &m, 400.0, 400.0, &a, &b, &c.with_alpha(3.0));
        assert!(matches!(r, Err(SolverError::NoContraction { .. }) | Err(SolverError::BlowUp { .. })), "{r:?}");
    }
}
