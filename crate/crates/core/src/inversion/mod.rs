//! Wavefront detection on predicted surfaces, the interface membership
//! test, recovery of the jump size and the frequency-scaling probe.

mod tube;

pub use tube::Tube;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SceneConfig;
use crate::error::Error;
use crate::fields::{GridSpec, WaveField};
use crate::geometry::SpacePoint;
use crate::raytrace::{predict_support, PredictedSupport, RayError, Surface, SurfaceId};
use crate::regression::{power_fit, LineFit};
use crate::response::{cross_difference, CrossResponse, ResponseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InversionError {
    #[error("no grid cells fall in the tube around {0}")]
    EmptyTube(String),
    #[error("reference response vanishes on the cone tube")]
    DegenerateReference,
    #[error("omega = {omega} resolves only {ppw:.2} points per wavelength (need 8)")]
    UnderResolved { omega: f64, ppw: f64 },
    #[error(transparent)]
    Ray(#[from] RayError),
    #[error(transparent)]
    Response(#[from] ResponseError),
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    /// Tube radius; `None` uses `3h`.
    pub radius: Option<f64>,
    /// Full width of the high-pass box blur; `None` uses twice the radius.
    pub highpass_width: Option<f64>,
    pub snr_threshold: f64,
    /// Offset of the background tube, in tube radii.
    pub background_shift: f64,
    /// Cone samples closer than this many tube radii to a transmitted or
    /// reflected sample are not used.
    pub cone_guard: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { radius: None, highpass_width: None, snr_threshold: 5.0, background_shift: 6.0, cone_guard: 6.0 }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<(), InversionError> {
        let bad = |f: &str, r: &str| Err(InversionError::Invalid { field: f.into(), reason: r.into() });
        if let Some(r) = self.radius {
            if !(r > 0.0) {
                return bad("experiment.detect.radius", "must be positive");
            }
        }
        if let Some(w) = self.highpass_width {
            if !(w >= 0.0) {
                return bad("experiment.detect.highpass_width", "must be non-negative");
            }
        }
        if !(self.snr_threshold > 0.0) || !(self.background_shift > 0.0) {
            return bad("experiment.detect", "threshold and shift must be positive");
        }
        if !(self.cone_guard >= 0.0) {
            return bad("experiment.detect.cone_guard", "must be non-negative");
        }
        Ok(())
    }

    pub fn radius_for(&self, g: &GridSpec) -> f64 {
        self.radius.unwrap_or(3.0 * g.h)
    }

    pub fn highpass_for(&self, radius: f64) -> Option<f64> {
        Some(self.highpass_width.unwrap_or(2.0 * radius)).filter(|w| *w > 0.0)
    }
}

fn samples(s: &Surface) -> impl Iterator<Item = (f64, &[f64])> {
    s.samples.iter().map(|p| (p.t, p.x.as_slice()))
}

/// Mean squared high-passed field over the cells within `radius` of the
/// surface samples. `highpass_width` is the full width of the box blur
/// that is subtracted; `None` skips the filter.
pub fn tube_energy(
    field: &WaveField,
    surface: &Surface,
    radius: f64,
    highpass_width: Option<f64>,
) -> Result<f64, InversionError> {
    if !(radius >= 2.0 * field.grid().h) {
        return Err(InversionError::Invalid { field: "experiment.detect.radius".into(), reason: "must be at least 2h".into() });
    }
    let tube = Tube::build(field, samples(surface), radius);
    if tube.is_empty() {
        return Err(InversionError::EmptyTube(surface.id.as_str().into()));
    }
    Ok(tube.mean_square(field, highpass_width))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub surface: SurfaceId,
    /// False for a cone that is not predicted; the report then measures
    /// the candidate cone from `p0`.
    pub predicted: bool,
    pub tube_energy: f64,
    pub background_energy: f64,
    pub snr: f64,
    pub detected: bool,
    pub error: Option<String>,
}

/// The cone if predicted, otherwise the candidate flow-out from `p0`,
/// minus the samples within `cone_guard` radii of a transmitted or reflected
/// sample at the same time. The flow-out is tangent to those fronts where
/// they meet it, so only the rest of it can show a new wavefront.
pub fn cone_surface(pred: &PredictedSupport, cfg: &DetectConfig, g: &GridSpec) -> (Surface, bool) {
    let (cone, predicted) = if pred.cone.is_empty() { (&pred.candidate_cone, false) } else { (&pred.cone, true) };
    let guard = cfg.cone_guard * cfg.radius_for(g);
    let others: Vec<&crate::raytrace::SurfaceSample> =
        [&pred.transmitted_1, &pred.transmitted_2, &pred.reflected_1, &pred.reflected_2]
            .iter()
            .flat_map(|s| s.samples.iter())
            .collect();
    let tol = 0.5 * g.dt;
    let samples = cone
        .samples
        .iter()
        .filter(|c| {
            !others.iter().any(|o| {
                (o.t - c.t).abs() <= tol
                    && o.x.iter().zip(&c.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < guard * guard
            })
        })
        .cloned()
        .collect();
    (Surface { id: cone.id, samples }, predicted)
}

/// Surface moved by `shift` along the unit spatial conormal of each sample,
/// keeping only samples that stay in the grid.
fn background(surface: &Surface, g: &GridSpec, shift: f64) -> Surface {
    let samples = surface
        .samples
        .iter()
        .filter_map(|s| {
            let n = s.zeta.xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                return None;
            }
            let x: Vec<f64> = s.x.iter().zip(&s.zeta.xi).map(|(x, xi)| x + shift * xi / n).collect();
            g.contains(&x).then(|| crate::raytrace::SurfaceSample { x, ..s.clone() })
        })
        .collect();
    Surface { id: surface.id, samples }
}

fn detect_one(field: &WaveField, surface: &Surface, predicted: bool, cfg: &DetectConfig, floor: f64) -> DetectionReport {
    let g = field.grid();
    let r = cfg.radius_for(g);
    let hp = cfg.highpass_for(r);
    let mut rep = DetectionReport {
        surface: surface.id,
        predicted,
        tube_energy: 0.0,
        background_energy: 0.0,
        snr: 0.0,
        detected: false,
        error: None,
    };
    match tube_energy(field, surface, r, hp) {
        Ok(e) => rep.tube_energy = e,
        Err(e) => {
            rep.error = Some(e.to_string());
            return rep;
        }
    }
    let bg = background(surface, g, cfg.background_shift * r);
    rep.background_energy = tube_energy(field, &bg, r, hp).unwrap_or(0.0);
    rep.snr = if rep.tube_energy == 0.0 { 0.0 } else { rep.tube_energy / rep.background_energy.max(floor) };
    rep.detected = rep.snr > cfg.snr_threshold;
    rep
}

/// One report per predicted surface, in the order transmitted 1, 2,
/// reflected 1, 2, cone.
pub fn detect_surfaces(field: &WaveField, pred: &PredictedSupport, cfg: &DetectConfig) -> Vec<DetectionReport> {
    let scale = field.max_abs().powi(2);
    let floor = (f64::EPSILON * scale).max(f64::MIN_POSITIVE);
    let (cone, predicted) = cone_surface(pred, cfg, field.grid());
    let cone = &cone;
    [&pred.transmitted_1, &pred.transmitted_2, &pred.reflected_1, &pred.reflected_2]
        .into_iter()
        .map(|s| (s, true))
        .chain(std::iter::once((cone, predicted)))
        .map(|(s, p)| detect_one(field, s, p, cfg, floor))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpMethod {
    BornOracle,
    NonlinearCross,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpEstimate {
    pub alpha_hat: f64,
    pub reference_alpha: f64,
    pub residual: f64,
    pub method: JumpMethod,
}

/// Projects the observed response onto a reference response of known
/// `α_ref` over the cone tube; exact when both are Born terms, since `X₁₂`
/// is linear in `a`.
pub fn recover_jump(
    observed: &CrossResponse,
    reference: &CrossResponse,
    alpha_ref: f64,
    pred: &PredictedSupport,
    cfg: &DetectConfig,
) -> Result<JumpEstimate, InversionError> {
    let (cone, _) = cone_surface(pred, cfg, reference.field.grid());
    let r = cfg.radius_for(reference.field.grid());
    let tube = Tube::build(&reference.field, samples(&cone), r);
    if tube.is_empty() {
        return Err(InversionError::EmptyTube(cone.id.as_str().into()));
    }
    let rr = tube.pairing(&reference.field, &reference.field);
    let floor = (f64::EPSILON * reference.field.max_abs()).powi(2) * tube.len() as f64;
    if !(rr > floor) {
        return Err(InversionError::DegenerateReference);
    }
    let or = tube.pairing(&observed.field, &reference.field);
    let c = or / rr;
    let oo = tube.pairing(&observed.field, &observed.field);
    let miss = tube.sum_sq_diff(&observed.field, &reference.field, c);
    let residual = if oo == 0.0 { 0.0 } else { (miss / oo).sqrt() };
    let method = if observed.corners.is_empty() { JumpMethod::BornOracle } else { JumpMethod::NonlinearCross };
    Ok(JumpEstimate { alpha_hat: alpha_ref * c, reference_alpha: alpha_ref, residual, method })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocateRung {
    pub s0: f64,
    pub on_interface: bool,
    pub cone: DetectionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocateReport {
    /// True iff the cone was detected at every rung.
    pub located: bool,
    pub p0: Option<SpacePoint>,
    pub rungs: Vec<LocateRung>,
}

/// Cone detection in the cross response for each beam width of the ladder.
pub fn locate_interface(cfg: &SceneConfig, base_dir: &Path, s0_ladder: &[f64]) -> Result<LocateReport, Error> {
    if s0_ladder.is_empty() {
        return Err(Error::Invalid { field: "experiment.s0_ladder".into(), reason: "must not be empty".into() });
    }
    let eps = cfg.experiment.eps;
    let mut rungs = Vec::new();
    let mut p0 = None;
    for &s0 in s0_ladder {
        let c = cfg.with_s0(s0);
        let setup = c.build_setup(base_dir)?;
        let pred = predict_support(&c.support_scene(&setup)?)?;
        if pred.p0.is_none() {
            return Err(RayError::NoIntersection.into());
        }
        p0 = p0.or(pred.p0.clone());
        let cross = cross_difference(&setup, eps, eps, false)?;
        let cone = detect_surfaces(&cross.field, &pred, &cfg.experiment.detect).pop().expect("cone report");
        log::info!("s0 = {s0}: cone snr {:.3e}", cone.snr);
        rungs.push(LocateRung { s0, on_interface: pred.on_interface, cone });
    }
    Ok(LocateReport { located: rungs.iter().all(|r| r.cone.detected), p0, rungs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub omegas: Vec<f64>,
    /// Root-mean-square high-passed cone amplitude per frequency.
    pub amplitudes: Vec<f64>,
    pub exponent: f64,
    pub r2: f64,
}

/// Power-law fit `A ∝ ω^k`.
pub fn fit_exponent(omegas: &[f64], amplitudes: &[f64]) -> Result<LineFit, InversionError> {
    power_fit(omegas, amplitudes).ok_or_else(|| InversionError::Invalid {
        field: "experiment.omega_ladder".into(),
        reason: "need two distinct frequencies and positive amplitudes".into(),
    })
}

/// Points per wavelength of the pulse carrier on the grid.
pub fn points_per_wavelength(g: &GridSpec, src: &crate::fields::SourceSpec) -> f64 {
    let xi = src.zeta.xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lambda = std::f64::consts::TAU * src.zeta.tau.abs() / (src.omega * xi);
    lambda / g.h
}

/// Cone amplitude of the cross response across carrier frequencies.
pub fn frequency_scaling_probe(cfg: &SceneConfig, base_dir: &Path, omegas: &[f64]) -> Result<ScalingReport, Error> {
    let eps = cfg.experiment.eps;
    let setups = omegas
        .iter()
        .map(|&w| {
            let c = cfg.with_omega(w);
            let setup = c.build_setup(base_dir)?;
            for s in &setup.sources {
                let ppw = points_per_wavelength(setup.grid(), s);
                if ppw < 8.0 {
                    return Err(InversionError::UnderResolved { omega: w, ppw }.into());
                }
            }
            Ok((w, c, setup))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut amplitudes = Vec::new();
    for (w, c, setup) in setups {
        let pred = predict_support(&c.support_scene(&setup)?)?;
        let cross = cross_difference(&setup, eps, eps, false)?;
        let (cone, _) = cone_surface(&pred, &cfg.experiment.detect, setup.grid());
        let d = &cfg.experiment.detect;
        let r = d.radius_for(setup.grid());
        let e = tube_energy(&cross.field, &cone, r, d.highpass_for(r))?;
        log::info!("omega = {w}: cone amplitude {:.3e}", e.sqrt());
        amplitudes.push(e.sqrt());
    }
    let fit = fit_exponent(omegas, &amplitudes)?;
    Ok(ScalingReport { omegas: omegas.to_vec(), amplitudes, exponent: fit.slope, r2: fit.r2 })
}

#[cfg(test)]
mod tests;
