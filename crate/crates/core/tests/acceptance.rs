//! Acceptance suite. Runs every criterion in turn, prints one PASS/FAIL line
//! each and exits non-zero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use wavelab::config::{ExperimentConfig, GridConfig, MetricSpec, SceneConfig};
use wavelab::fields::{
    norm, Boundary, CoefficientSpec, GridSpec, NormKind, PotentialSpec, Profile, SourceSpec, WaveField,
};
use wavelab::geometry::{null_lift, Covector, Metric, Orientation, SpacePoint};
use wavelab::inversion::{detect_surfaces, locate_interface, recover_jump, DetectionReport};
use wavelab::raytrace::{predict_support, reflect_at_interface, trace, InterfaceSpec, LevelSet, RayError};
use wavelab::regression::power_fit;
use wavelab::response::{
    born_lockstep, calibrate_amplitude, cross_difference, default_ladder, defect_ladder, perturbation_split,
    CrossResponse, Setup, CALIBRATION_ITERS,
};
use wavelab::solver::{
    energy_drift, picard_solve, solve_linear, solve_semilinear, Discretization, Solver, SolverConfig,
};

type Outcome = (bool, String);

fn here() -> &'static Path {
    Path::new(".")
}

/// Cone-scene amplitude search starts here.
const EPS_MAX: f64 = 1000.0;

/// Two pulses whose central rays meet at `t = 0.5`, `x = 0`; the jump sits
/// on `x¹ = offset` with `a = α` on `x¹ < offset`.
fn crossing(alpha: f64, offset: f64) -> SceneConfig {
    let src = |y: f64, xi: [f64; 2]| SourceSpec {
        x_launch: vec![-0.3, y],
        t0: 0.0,
        zeta: Covector::new(-1.0, xi.to_vec()),
        s0: 0.05,
        omega: 80.0,
        sigma: 0.06,
        amplitude: 1.0,
        mu_proxy: 2.0,
    };
    SceneConfig {
        metric: MetricSpec::Flat { dim: 2 },
        grid: GridConfig { origin: vec![-1.0, -1.0], h: 0.005, n: vec![400, 400], t_end: 1.0, boundary: Boundary::Dirichlet },
        sources: [src(-0.4, [0.6, 0.8]), src(0.4, [0.6, -0.8])],
        coefficient: CoefficientSpec::jump(plane([1.0, 0.0], offset), alpha),
        solver: SolverConfig { sponge_width: 40, record_stride: 10, ..Default::default() },
        experiment: ExperimentConfig::default(),
        rng_seed: None,
    }
}

/// Small, coarse version for the runs that keep full histories.
fn coarse() -> SceneConfig {
    let src = |y: f64, xi: [f64; 2]| SourceSpec {
        x_launch: vec![-0.3, y],
        t0: 0.0,
        zeta: Covector::new(-1.0, xi.to_vec()),
        s0: 0.05,
        omega: 10.0,
        sigma: 0.12,
        amplitude: 1.0,
        mu_proxy: 2.0,
    };
    SceneConfig {
        metric: MetricSpec::Flat { dim: 2 },
        grid: GridConfig { origin: vec![-1.5, -1.5], h: 0.04, n: vec![75, 75], t_end: 0.6, boundary: Boundary::Dirichlet },
        sources: [src(-0.3, [0.6, 0.8]), src(0.3, [0.6, -0.8])],
        coefficient: CoefficientSpec::jump(plane([1.0, 0.0], 0.0), 1.0),
        solver: SolverConfig { sponge_width: 6, ..Default::default() },
        experiment: ExperimentConfig::default(),
        rng_seed: None,
    }
}

fn plane(normal: [f64; 2], offset: f64) -> InterfaceSpec {
    InterfaceSpec::new(LevelSet::Plane { normal: normal.to_vec(), offset })
}

fn setup(c: &SceneConfig) -> Setup {
    c.build_setup(here()).unwrap()
}

/// Smallest rung of the default ladder scaled by the largest amplitude that
/// does not blow up.
fn calibrated(c: &SceneConfig) -> f64 {
    let top = calibrate_amplitude(&setup(c), EPS_MAX, CALIBRATION_ITERS).unwrap();
    *default_ladder(top).last().unwrap()
}

fn crossing_eps() -> f64 {
    static EPS: OnceLock<f64> = OnceLock::new();
    *EPS.get_or_init(|| calibrated(&crossing(1.0, 0.0)))
}

fn coarse_eps() -> f64 {
    static EPS: OnceLock<f64> = OnceLock::new();
    *EPS.get_or_init(|| calibrated(&coarse()))
}

fn cone_report(c: &SceneConfig, field: &WaveField) -> DetectionReport {
    let s = setup(c);
    let pred = predict_support(&c.support_scene(&s).unwrap()).unwrap();
    detect_surfaces(field, &pred, &c.experiment.detect).pop().unwrap()
}

fn ray_kernel() -> Outcome {
    let flat = Metric::flat(2);
    let origin = SpacePoint::new(0.0, vec![0.0, 0.0]);
    let mut end_err: f64 = 0.0;
    for k in 0..16 {
        let th = std::f64::consts::TAU * k as f64 / 16.0;
        let st = null_lift(&flat, &origin, &[th.cos(), th.sin()], Orientation::Forward).unwrap();
        let r = trace(&flat, &st, 1.0, 1e-3, None).unwrap();
        let e = r.end();
        end_err = end_err.max((e.x.x[0] - th.cos()).abs()).max((e.x.x[1] - th.sin()).abs()).max((e.x.t - 1.0).abs());
    }
    let curved = Metric::diag_linear(vec![1.0, 1.0], vec![vec![0.5, 0.2], vec![-0.3, 0.4]]).unwrap();
    let st = null_lift(&curved, &origin, &[1.0, 0.5], Orientation::Forward).unwrap();
    let drift = trace(&curved, &st, 1.0, 1e-3, None).unwrap().p_drift;
    let reference = trace(&curved, &st, 1.0, 1e-4, None).unwrap();
    let steps = [0.04, 0.02, 0.01];
    let errs: Vec<f64> = steps
        .iter()
        .map(|&h| {
            let r = trace(&curved, &st, 1.0, h, None).unwrap();
            r.end().x.x.iter().zip(&reference.end().x.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        })
        .collect();
    let order = power_fit(&steps, &errs).unwrap().slope;
    let ok = end_err < 1e-10 && drift < 1e-8 && (3.8..=4.2).contains(&order);
    (ok, format!("flat endpoint error {end_err:.1e}, symbol drift {drift:.1e}, RK4 order {order:.3}"))
}

fn reflection_law() -> Outcome {
    let m = Metric::flat(2);
    let origin = SpacePoint::new(0.0, vec![0.0, 0.0]);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        // Weyl sequences: incidence within 85° of the normal, any normal.
        let inc = (2.0 * ((k as f64 * golden).fract()) - 1.0) * 85f64.to_radians();
        let phi = std::f64::consts::TAU * ((k as f64 * golden * golden).fract());
        let n = [phi.cos(), phi.sin()];
        let t = [-phi.sin(), phi.cos()];
        let alpha: Vec<f64> = (0..2).map(|i| inc.cos() * n[i] + inc.sin() * t[i]).collect();
        let r = reflect_at_interface(&m, &origin, &Covector::new(1.0, alpha.clone()), &plane(n, 0.0)).unwrap();
        let an = alpha[0] * n[0] + alpha[1] * n[1];
        worst = worst.max((r.b + 2.0 * an).abs());
        for i in 0..2 {
            worst = worst.max((r.zeta_out.xi[i] - (alpha[i] - 2.0 * an * n[i])).abs());
        }
        worst = worst.max((r.zeta_out.tau - 1.0).abs());
    }
    let tangential = reflect_at_interface(&m, &origin, &Covector::new(1.0, vec![0.0, 1.0]), &plane([1.0, 0.0], 0.0));
    let raises = tangential == Err(RayError::TangentialIncidence);
    (worst < 1e-12 && raises, format!("max deviation from specular {worst:.1e}, tangential raises: {raises}"))
}

/// `L2` error of the manufactured solution `cos(ωt)·exp(−|x|²/s²)` under
/// `g*ᵢᵢ = 1 + cᵢ xᵢ`, for which `Δ_g u = −Σ (aᵢ ∂ᵢ²u + ½ aᵢ' ∂ᵢu)`.
fn manufactured_error(n: usize) -> f64 {
    let c = [0.3, 0.2];
    let (om, s) = (3.0, 0.25);
    let m = Metric::diag_linear(vec![1.0, 1.0], vec![vec![c[0], 0.0], vec![0.0, c[1]]]).unwrap();
    let g = GridSpec::new(vec![-1.5, -1.5], 3.0 / n as f64, vec![n, n], 1.0, 0.5, &m, Boundary::Dirichlet).unwrap();
    let solver = Solver::new(&g, &m, &SolverConfig { record_stride: usize::MAX, ..Default::default() }).unwrap();
    let gauss = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1]) / (s * s)).exp();
    let centers: Vec<Vec<f64>> = (0..g.len()).map(|k| g.center(k)).collect();
    let shape: Vec<f64> = centers
        .iter()
        .map(|x| {
            let gv = gauss(x);
            let lap: f64 = (0..2)
                .map(|i| {
                    let a = 1.0 + c[i] * x[i];
                    let d1 = -2.0 * x[i] / (s * s) * gv;
                    let d2 = (4.0 * x[i] * x[i] / s.powi(4) - 2.0 / (s * s)) * gv;
                    -(a * d2 + 0.5 * c[i] * d1)
                })
                .sum();
            (gv, lap)
        })
        .map(|(gv, lap)| -om * om * gv + lap)
        .collect();
    let dt = g.dt;
    let src = move |k: usize, out: &mut [f64]| {
        let ct = (om * k as f64 * dt).cos();
        out.iter_mut().zip(&shape).for_each(|(o, v)| *o = ct * v);
    };
    let u0: Vec<f64> = centers.iter().map(|x| gauss(x)).collect();
    let zero = vec![0.0; g.len()];
    let f = solve_linear(&solver, Some((&u0, &zero)), Some(&src), None).unwrap();
    let ct = (om * g.time(g.n_t)).cos();
    let err: f64 = f.last().iter().zip(&u0).map(|(u, e)| (u - ct * e).powi(2)).sum::<f64>();
    (err * g.h * g.h).sqrt()
}

fn solver_convergence() -> Outcome {
    let ns = [60, 120, 240, 480];
    let errs: Vec<f64> = ns.iter().map(|&n| manufactured_error(n)).collect();
    let hs: Vec<f64> = ns.iter().map(|&n| 3.0 / n as f64).collect();
    let order = power_fit(&hs, &errs).unwrap().slope;

    let m = Metric::diag_linear(vec![1.0, 1.0], vec![vec![0.2, 0.0], vec![0.0, 0.1]]).unwrap();
    let probe = GridSpec::new(vec![-1.0, -1.0], 0.02, vec![100, 100], 1.0, 0.5, &m, Boundary::Dirichlet).unwrap();
    let g = GridSpec::new(vec![-1.0, -1.0], 0.02, vec![100, 100], 1050.0 * probe.dt, 0.5, &m, Boundary::Dirichlet).unwrap();
    let s = Solver::new(&g, &m, &SolverConfig { record_stride: usize::MAX, ..Default::default() }).unwrap();
    let u0: Vec<f64> = (0..g.len()).map(|k| {
        let x = g.center(k);
        (-(x[0] * x[0] + x[1] * x[1]) * 40.0).exp()
    }).collect();
    let run = solve_linear(&s, Some((&u0, &vec![0.0; g.len()])), None, None).unwrap();
    let drift = energy_drift(&run, (g.dt, g.t_end));

    let op = Discretization::new(&g, &m).unwrap();
    let mut seed = 0x2545_f491_4f6c_dd1du64;
    let mut rnd = || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let u: Vec<f64> = (0..g.len()).map(|_| rnd()).collect();
    let v: Vec<f64> = (0..g.len()).map(|_| rnd()).collect();
    let (mut au, mut av) = (vec![0.0; g.len()], vec![0.0; g.len()]);
    op.apply(&u, &mut au);
    op.apply(&v, &mut av);
    let (l, r) = (op.inner(&au, &v), op.inner(&u, &av));
    let asym = (l - r).abs() / l.abs().max(r.abs());

    let ok = (1.7..=2.3).contains(&order) && g.n_t >= 1000 && drift < 1e-3 && asym < 1e-12;
    let detail = format!(
        "errors [{}], order {order:.3}; energy drift {drift:.1e} over {} steps; Laplacian asymmetry {asym:.1e}",
        errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", "),
        g.n_t
    );
    (ok, detail)
}

fn picard_contraction() -> Outcome {
    let c = coarse();
    let s = setup(&c);
    let eps = coarse_eps();
    let [a, b] = &s.sources;
    let (pic, rep) = picard_solve(&s.solver, &s.metric, eps, eps, a, b, &s.coeff).unwrap();
    let direct = solve_semilinear(&s.solver.with_stride(1), &s.metric, eps, eps, a, b, &s.coeff).unwrap();
    let diff = norm(&WaveField::combine(&[(1.0, &pic), (-1.0, &direct)]), NormKind::L4, None);
    let tol = c.solver.picard_tol;
    let ok = rep.max_ratio <= 0.6 && diff <= 10.0 * tol;
    (ok, format!("eps {eps:.3e}: max B ratio {:.3}, {} iterations, Picard vs direct L4 {diff:.1e}", rep.max_ratio, rep.converged_at))
}

fn expansion_order() -> Outcome {
    let c = coarse();
    let top = calibrate_amplitude(&setup(&c), EPS_MAX, CALIBRATION_ITERS).unwrap();
    let lad = defect_ladder(&setup(&c), &default_ladder(top)).unwrap();
    let fit = lad.fit.unwrap();
    let ok = (2.7..=3.3).contains(&fit.slope) && fit.r2 > 0.95;
    (ok, format!("ladder top {:.3e}: slope {:.3}, R² {:.5}", lad.eps[0], fit.slope, fit.r2))
}

fn cross_vs_born() -> Outcome {
    let s = setup(&crossing(1.0, 0.0));
    let eps = crossing_eps();
    let d1 = cross_difference(&s, eps, eps, true).unwrap().born_discrepancy().unwrap();
    let d2 = cross_difference(&s, 0.5 * eps, 0.5 * eps, true).unwrap().born_discrepancy().unwrap();
    let ratio = d1 / d2;
    ((1.7..=2.3).contains(&ratio), format!("discrepancy {d1:.3e} at eps {eps:.3e}, {d2:.3e} at eps/2: ratio {ratio:.3}"))
}

fn cone_existence() -> Outcome {
    let eps = crossing_eps();
    let snr = |c: SceneConfig| {
        let f = cross_difference(&setup(&c), eps, eps, false).unwrap().field;
        cone_report(&c, &f).snr
    };
    let on = snr(crossing(1.0, 0.0));
    let zero = snr(crossing(0.0, 0.0));
    let shifted = snr(crossing(1.0, 0.3));
    let ok = on > 5.0 && zero < 2.0 && shifted < 2.0;
    (ok, format!("cone snr: jump on p0 {on:.3e}, no jump {zero:.3e}, interface shifted 0.3 {shifted:.3e}"))
}

fn linear_nonlinear_separation() -> Outcome {
    // Potential step on x¹ > 0, no nonlinearity.
    let mut c = crossing(0.0, 0.0);
    c.coefficient = CoefficientSpec {
        potential: Some(PotentialSpec { delta: 0.1, profile: Profile::Jump }),
        ..CoefficientSpec::jump(plane([-1.0, 0.0], 0.0), 0.0)
    };
    let s = setup(&c);
    let pred = predict_support(&c.support_scene(&s).unwrap()).unwrap();
    let sp = perturbation_split(&s, c.experiment.delta, crossing_eps()).unwrap();
    let v = detect_surfaces(&sp.v_est, &pred, &c.experiment.detect);
    let refl = v[2].snr.min(v[3].snr);
    let cone = detect_surfaces(&sp.cross.field, &pred, &c.experiment.detect)[4].snr;
    let ok = refl > 5.0 && cone < 2.0;
    (ok, format!("linear split reflected snr {refl:.3}, cross-difference cone snr {cone:.3e}"))
}

fn jump_recovery() -> Outcome {
    let c = crossing(1.0, 0.0);
    let s = setup(&c);
    let pred = predict_support(&c.support_scene(&s).unwrap()).unwrap();
    let det = &c.experiment.detect;
    let born = |alpha: f64| CrossResponse::born_oracle(&born_lockstep(&s.with_coeff(s.coeff.with_alpha(alpha))).unwrap().terms.x12);
    let reference = born(1.0);
    let mut born_err: f64 = 0.0;
    for alpha in [0.5, 1.0, 2.0, 4.0] {
        let est = recover_jump(&born(alpha), &reference, 1.0, &pred, det).unwrap();
        born_err = born_err.max((est.alpha_hat - alpha).abs());
    }
    let eps = crossing_eps();
    let mut worst_rel: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    let mut notes = Vec::new();
    for alpha in [1.0, 2.0] {
        let obs = cross_difference(&s.with_coeff(s.coeff.with_alpha(alpha)), eps, eps, false).unwrap();
        let est = recover_jump(&obs, &reference, 1.0, &pred, det).unwrap();
        worst_rel = worst_rel.max((est.alpha_hat - alpha).abs() / alpha);
        worst_res = worst_res.max(est.residual);
        notes.push(format!("alpha {alpha}: {:.4} (residual {:.3})", est.alpha_hat, est.residual));
    }
    let ok = born_err < 1e-9 && worst_rel < 0.1 && worst_res < 0.2;
    (ok, format!("Born-oracle max error {born_err:.1e}; nonlinear at eps {eps:.3e}: {}", notes.join(", ")))
}

fn interface_membership() -> Outcome {
    let eps = crossing_eps();
    let ladder = [0.04, 0.03, 0.02];
    let run = |mut c: SceneConfig| {
        c.experiment.eps = eps;
        let r = locate_interface(&c, here(), &ladder).unwrap();
        let snrs: Vec<String> = r.rungs.iter().map(|g| format!("{:.2e}", g.cone.snr)).collect();
        (r.located, snrs.join("/"))
    };
    let (on, on_snr) = run(crossing(1.0, 0.0));
    let (off, off_snr) = run(crossing(1.0, 0.3));
    (on && !off, format!("on interface: {on} (snr {on_snr}); translated 0.3: {off} (snr {off_snr})"))
}

fn wfg_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "wfg"))
        .collect();
    v.sort();
    v
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut c = crossing(1.0, 0.0);
    c.experiment.eps = crossing_eps();
    let cfg = dir.path().join("scene.json");
    std::fs::write(&cfg, c.to_json()).unwrap();
    let mut outs = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("t{threads}"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_wavelab"))
            .args(["cross", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outs.push(wfg_files(&out));
    }
    let names = |v: &[PathBuf]| v.iter().map(|p| p.file_name().unwrap().to_owned()).collect::<Vec<_>>();
    let same_names = names(&outs[0]) == names(&outs[1]);
    let identical = same_names && outs[0].iter().zip(&outs[1]).all(|(a, b)| std::fs::read(a).unwrap() == std::fs::read(b).unwrap());
    let ok = identical && !outs[0].is_empty();
    (ok, format!("{} snapshots, bit-identical across 1 and 8 threads: {identical}", outs[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("ray kernel", ray_kernel),
        ("reflection law", reflection_law),
        ("solver convergence", solver_convergence),
        ("Picard contraction", picard_contraction),
        ("expansion order", expansion_order),
        ("cross difference vs Born", cross_vs_born),
        ("cone existence and absence", cone_existence),
        ("linear/nonlinear separation", linear_nonlinear_separation),
        ("jump recovery", jump_recovery),
        ("interface membership", interface_membership),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        failed += usize::from(!ok);
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name} [{:.1}s]: {detail}", k + 1, start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
