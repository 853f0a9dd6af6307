use std::sync::Arc;

use super::*;
use crate::config::tests::sample;
use crate::fields::Boundary;
use crate::geometry::{Covector, Metric};
use crate::raytrace::SurfaceSample;
use crate::response::born_lockstep;
use crate::solver::Discretization;

fn field_on(g: &GridSpec, step: usize, f: impl Fn(&[f64]) -> f64) -> WaveField {
    let op = Arc::new(Discretization::new(g, &Metric::flat(g.d)).unwrap());
    let data = (0..g.len()).map(|k| f(&g.center(k))).collect();
    WaveField::from_slice(op, step, data)
}

fn grid(b: Boundary) -> GridSpec {
    GridSpec::new(vec![0.0, 0.0], 0.01, vec![100, 100], 0.5, 0.5, &Metric::flat(2), b).unwrap()
}

/// Vertical segment `x = x0`, `0.2 ≤ y ≤ 0.8`, propagating in `+x`.
fn line(t: f64, x0: f64) -> Surface {
    let samples = (0..=120)
        .map(|k| SurfaceSample {
            t,
            x: vec![x0, 0.2 + 0.005 * k as f64],
            zeta: Covector::new(-1.0, vec![1.0, 0.0]),
            tangents: vec![],
        })
        .collect();
    Surface { id: SurfaceId::Cone, samples }
}

#[test]
fn tube_energy_normalization() {
    let g = grid(Boundary::Dirichlet);
    let s = line(0.0, 0.5);
    assert_eq!(tube_energy(&field_on(&g, 0, |_| 0.0), &s, 0.03, Some(0.06)).unwrap(), 0.0);
    let inside = |x: &[f64]| {
        let d = if x[1] < 0.2 {
            ((x[0] - 0.5).powi(2) + (x[1] - 0.2).powi(2)).sqrt()
        } else if x[1] > 0.8 {
            ((x[0] - 0.5).powi(2) + (x[1] - 0.8).powi(2)).sqrt()
        } else {
            (x[0] - 0.5).abs()
        };
        if d <= 0.03 { 1.0 } else { 0.0 }
    };
    let e = tube_energy(&field_on(&g, 0, inside), &s, 0.03, None).unwrap();
    assert!((e - 1.0).abs() < 1e-15, "{e}");
}

#[test]
fn oscillation_in_the_tube_has_mean_square_half() {
    let g = grid(Boundary::Dirichlet);
    let s = line(0.0, 0.5);
    let w = 2.0 * std::f64::consts::PI / 0.08;
    let f = field_on(&g, 0, |x| if (x[0] - 0.5).abs() <= 0.2 { (w * x[1]).cos() } else { 0.0 });
    let e = tube_energy(&f, &s, 0.04, Some(0.5)).unwrap();
    assert!((e - 0.5).abs() < 0.05, "{e}");
}

#[test]
fn tube_energy_is_translation_invariant_on_periodic_grids() {
    let g = grid(Boundary::Periodic);
    let bump = |x: &[f64], c: f64| (-((x[0] - c).powi(2) + (x[1] - 0.5).powi(2)) / 0.002).exp() * (60.0 * (x[0] - c)).sin();
    let a = tube_energy(&field_on(&g, 0, |x| bump(x, 0.5)), &line(0.0, 0.5), 0.03, Some(0.06)).unwrap();
    let b = tube_energy(&field_on(&g, 0, |x| bump(x, 0.57)), &line(0.0, 0.57), 0.03, Some(0.06)).unwrap();
    assert!((a - b).abs() <= 1e-10 * a, "{a} {b}");
    // wrap-around: the surface near the right edge sees cells on the left
    let c = tube_energy(&field_on(&g, 0, |x| bump(x, 0.98)), &line(0.0, 0.98), 0.03, Some(0.06)).unwrap();
    assert!(c > 0.0);
}

#[test]
fn tube_errors() {
    let g = grid(Boundary::Dirichlet);
    let f = field_on(&g, 0, |_| 1.0);
    assert!(matches!(tube_energy(&f, &line(0.3, 0.5), 0.03, None), Err(InversionError::EmptyTube(_))));
    assert!(matches!(tube_energy(&f, &line(0.0, 5.0), 0.03, None), Err(InversionError::EmptyTube(_))));
    assert!(matches!(tube_energy(&f, &line(0.0, 0.5), 0.01, None), Err(InversionError::Invalid { .. })));
}

#[test]
fn fitter_self_test() {
    let om = [10.0f64, 20.0, 40.0, 80.0];
    let a: Vec<f64> = om.iter().map(|w| w.powf(-1.5)).collect();
    let f = fit_exponent(&om, &a).unwrap();
    assert!((f.slope + 1.5).abs() < 1e-12);
    let a2: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
    assert!((fit_exponent(&om, &a2).unwrap().slope + 1.5).abs() < 1e-12);
}

/// No cone guard: the coarse sample scene has almost no cone outside it.
fn unguarded() -> DetectConfig {
    DetectConfig { cone_guard: 0.0, ..DetectConfig::default() }
}

fn born_pair(alpha: f64) -> (CrossResponse, PredictedSupport) {
    let cfg = sample();
    let setup = cfg.build_setup(Path::new(".")).unwrap();
    let setup = setup.with_coeff(setup.coeff.with_alpha(alpha));
    let pred = predict_support(&cfg.support_scene(&setup).unwrap()).unwrap();
    let b = born_lockstep(&setup).unwrap();
    (CrossResponse::born_oracle(&b.terms.x12), pred)
}

#[test]
fn born_recovery_is_exact() {
    let (reference, pred) = born_pair(1.0);
    let d = unguarded();
    let same = recover_jump(&reference, &reference, 1.0, &pred, &d).unwrap();
    assert_eq!((same.alpha_hat, same.residual, same.method), (1.0, 0.0, JumpMethod::BornOracle));
    for c in [0.5, 2.0, 3.0, 4.0] {
        let (obs, _) = born_pair(c);
        let est = recover_jump(&obs, &reference, 1.0, &pred, &d).unwrap();
        assert!((est.alpha_hat - c).abs() < 1e-10 * c, "{c}: {}", est.alpha_hat);
        assert!(est.residual < 1e-10);
    }
    let (zero, _) = born_pair(0.0);
    assert_eq!(recover_jump(&reference, &zero, 1.0, &pred, &d).unwrap_err(), InversionError::DegenerateReference);
}

#[test]
fn detection_scales_with_alpha_and_vanishes_at_zero() {
    let d = unguarded();
    let (one, pred) = born_pair(1.0);
    let (two, _) = born_pair(2.0);
    let (zero, _) = born_pair(0.0);
    let s1 = detect_surfaces(&one.field, &pred, &d);
    let s2 = detect_surfaces(&two.field, &pred, &d);
    assert_eq!(s1.len(), 5);
    assert!(s2[4].snr >= s1[4].snr);
    let s0 = detect_surfaces(&zero.field, &pred, &d);
    assert!(s0.iter().all(|r| r.snr == 0.0 && !r.detected));
}

#[test]
fn under_resolved_frequencies_are_rejected() {
    let cfg = sample();
    let e = frequency_scaling_probe(&cfg, Path::new("."), &[10.0, 100.0]).unwrap_err();
    assert!(matches!(e, Error::Inversion(InversionError::UnderResolved { .. })), "{e:?}");
    assert_eq!(e.exit_code(), 4);
}
