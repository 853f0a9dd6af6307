//! Scene configuration: one JSON document describing metric, grid, pulses,
//! coefficients, solver controls and experiment ladders.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fields::{Boundary, CoefficientSpec, GridSpec, SourceSpec};
use crate::geometry::{Metric, SampledMetric};
use crate::inversion::DetectConfig;
use crate::raytrace::{Bounds, Launch, SupportScene};
use crate::response::Setup;
use crate::snapshot::Snapshot;
use crate::solver::{Solver, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Flat { dim: usize },
    /// `g*_ii = base_i + slope_i · x`
    DiagLinear { base: Vec<f64>, slope: Vec<Vec<f64>> },
    /// `g*_ii = base_i · exp(rate_i · x)`
    DiagExp { base: Vec<f64>, rate: Vec<Vec<f64>> },
    /// Upper-triangular `g*` entries in row order, one snapshot per entry.
    /// Snapshot origin is the first node and `h` the node spacing; relative
    /// paths are resolved against the config file's directory.
    Sampled { components: Vec<PathBuf> },
}

impl MetricSpec {
    pub fn build(&self, base_dir: &Path) -> Result<Metric, Error> {
        let m = match self {
            MetricSpec::Flat { dim } => {
                if !(*dim == 2 || *dim == 3) {
                    return Err(Error::invalid("metric.dim", "must be 2 or 3"));
                }
                Metric::flat(*dim)
            }
            MetricSpec::DiagLinear { base, slope } => Metric::diag_linear(base.clone(), slope.clone())?,
            MetricSpec::DiagExp { base, rate } => Metric::diag_exp(base.clone(), rate.clone())?,
            MetricSpec::Sampled { components } => {
                let snaps = components
                    .iter()
                    .map(|p| Snapshot::read(&base_dir.join(p)))
                    .collect::<Result<Vec<_>, _>>()?;
                let first = snaps.first().ok_or_else(|| Error::invalid("metric.components", "empty"))?;
                if snaps.iter().any(|s| s.header.dims != first.header.dims) {
                    return Err(Error::invalid("metric.components", "snapshots differ in shape"));
                }
                Metric::Sampled(SampledMetric::new(
                    first.header.origin.clone(),
                    first.header.h,
                    first.header.dims.clone(),
                    snaps.into_iter().map(|s| s.data).collect(),
                )?)
            }
        };
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub origin: Vec<f64>,
    pub h: f64,
    pub n: Vec<usize>,
    pub t_end: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RayConfig {
    /// RK4 step in the flow parameter (`dt/dθ = 2|τ|`).
    pub step: f64,
    pub fan_size: usize,
    pub cone_samples: usize,
    /// Times at which surfaces are sampled; empty picks 0.7, 0.8, 0.9 and
    /// 1.0 of `t_end`. Snapped to recorded steps.
    pub obs_times: Vec<f64>,
    /// Closest-approach threshold; `None` uses `2h`.
    pub d_hit: Option<f64>,
}

impl Default for RayConfig {
    fn default() -> Self {
        Self { step: 1e-3, fan_size: 32, cone_samples: 256, obs_times: Vec::new(), d_hit: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `ε₁ = ε₂` for the cross difference.
    pub eps: f64,
    /// Expansion-defect amplitudes.
    pub eps_ladder: Vec<f64>,
    /// When set, `expand` replaces the ladder by `ε*·{2⁻⁴ … 2⁻⁸}` with `ε*`
    /// the largest amplitude below this value that does not blow up.
    pub eps_max: Option<f64>,
    /// Beam widths for the interface membership test, decreasing.
    pub s0_ladder: Vec<f64>,
    /// Carrier frequencies for the frequency-scaling probe, increasing.
    pub omega_ladder: Vec<f64>,
    /// Potential strength for the perturbation split.
    pub delta: f64,
    /// `α` of the reference run in jump recovery.
    pub alpha_ref: f64,
    pub detect: DetectConfig,
    pub rays: RayConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            eps: 0.05,
            eps_ladder: crate::response::default_ladder(1.0),
            eps_max: None,
            s0_ladder: vec![0.04, 0.03, 0.02],
            omega_ladder: vec![20.0, 30.0, 40.0],
            delta: 0.1,
            alpha_ref: 1.0,
            detect: DetectConfig::default(),
            rays: RayConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub metric: MetricSpec,
    pub grid: GridConfig,
    pub sources: [SourceSpec; 2],
    pub coefficient: CoefficientSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    /// Reserved for randomized background placement; nothing in the
    /// pipeline draws random numbers.
    #[serde(default)]
    pub rng_seed: Option<u64>,
}

fn monotone(name: &str, v: &[f64], decreasing: bool) -> Result<(), Error> {
    if v.is_empty() {
        return Err(Error::invalid(name, "must not be empty"));
    }
    if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::invalid(name, "entries must be positive"));
    }
    let ok = v.windows(2).all(|w| if decreasing { w[1] < w[0] } else { w[1] > w[0] });
    if !ok {
        let dir = if decreasing { "strictly decreasing" } else { "strictly increasing" };
        return Err(Error::invalid(name, dir));
    }
    Ok(())
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that do not need the metric or files.
    pub fn validate(&self) -> Result<(), Error> {
        let g = &self.grid;
        if !(g.h > 0.0 && g.h.is_finite()) {
            return Err(Error::invalid("grid.h", "must be positive"));
        }
        if !(g.t_end > 0.0 && g.t_end.is_finite()) {
            return Err(Error::invalid("grid.t_end", "must be positive"));
        }
        if g.n.len() != g.origin.len() {
            return Err(Error::invalid("grid.n", "length differs from grid.origin"));
        }
        self.coefficient.validate()?;
        self.solver.validate()?;
        let e = &self.experiment;
        if !(e.eps.is_finite() && e.eps > 0.0) {
            return Err(Error::invalid("experiment.eps", "must be positive"));
        }
        if !(e.delta.is_finite() && e.delta > 0.0) {
            return Err(Error::invalid("experiment.delta", "must be positive"));
        }
        if !(e.alpha_ref.is_finite() && e.alpha_ref != 0.0) {
            return Err(Error::invalid("experiment.alpha_ref", "must be nonzero"));
        }
        monotone("experiment.eps_ladder", &e.eps_ladder, true)?;
        monotone("experiment.s0_ladder", &e.s0_ladder, true)?;
        monotone("experiment.omega_ladder", &e.omega_ladder, false)?;
        if !e.rays.obs_times.is_empty() {
            monotone("experiment.rays.obs_times", &e.rays.obs_times, false)?;
        }
        if !(e.rays.step > 0.0) || e.rays.fan_size < 2 || e.rays.cone_samples < 3 {
            return Err(Error::invalid("experiment.rays", "step must be positive, fan >= 2, cone >= 3"));
        }
        e.detect.validate()?;
        Ok(())
    }

    pub fn build_metric(&self, base_dir: &Path) -> Result<Metric, Error> {
        let m = self.metric.build(base_dir)?;
        if m.dim() != self.grid.origin.len() {
            return Err(Error::invalid("grid.origin", "dimension differs from the metric"));
        }
        Ok(m)
    }

    pub fn build_grid(&self, m: &Metric) -> Result<GridSpec, Error> {
        let g = &self.grid;
        Ok(GridSpec::new(g.origin.clone(), g.h, g.n.clone(), g.t_end, self.solver.cfl, m, g.boundary)?)
    }

    /// Validates everything and assembles the solver-side setup.
    pub fn build_setup(&self, base_dir: &Path) -> Result<Setup, Error> {
        self.validate()?;
        let m = self.build_metric(base_dir)?;
        let grid = self.build_grid(&m)?;
        for s in &self.sources {
            s.validate(&m)?;
        }
        let solver = Solver::new(&grid, &m, &self.solver)?;
        Ok(Setup::new(solver, m, self.sources.clone(), self.coefficient.clone()))
    }

    /// Observation times moved onto recorded steps of `grid`.
    pub fn obs_times(&self, grid: &GridSpec) -> Vec<f64> {
        let raw = if self.experiment.rays.obs_times.is_empty() {
            [0.7, 0.8, 0.9, 1.0].iter().map(|f| f * grid.t_end).collect()
        } else {
            self.experiment.rays.obs_times.clone()
        };
        let stride = self.solver.record_stride.max(1);
        let mut steps: Vec<usize> = raw
            .iter()
            .map(|&t| {
                let k = ((t / grid.dt) / stride as f64).round() as usize * stride;
                k.min(grid.n_t)
            })
            .collect();
        steps.dedup();
        steps.into_iter().map(|k| grid.time(k)).collect()
    }

    /// Ray-side scene matching `setup`.
    pub fn support_scene(&self, setup: &Setup) -> Result<SupportScene, Error> {
        let g = setup.grid();
        let m = &setup.metric;
        let launch = |s: &SourceSpec| -> Result<Launch, Error> { Ok(Launch { point: s.central_ray_start(m)?, s0: s.s0 }) };
        let r = &self.experiment.rays;
        Ok(SupportScene {
            metric: m.clone(),
            launches: [launch(&setup.sources[0])?, launch(&setup.sources[1])?],
            interface: setup.coeff.interface.clone(),
            t_end: g.t_end,
            step: r.step,
            d_hit: r.d_hit.unwrap_or(2.0 * g.h),
            beam_length: g.diameter(),
            fan_size: r.fan_size,
            cone_samples: r.cone_samples,
            obs_times: self.obs_times(g),
            spacing: 0.5 * g.h,
            bounds: Some(Bounds {
                lo: g.origin.clone(),
                hi: g.origin.iter().zip(&g.extent).map(|(o, e)| o + e).collect(),
            }),
        })
    }

    /// Same scene with every pulse's beam width replaced.
    pub fn with_s0(&self, s0: f64) -> Self {
        let mut c = self.clone();
        c.sources.iter_mut().for_each(|s| s.s0 = s0);
        c
    }

    /// Same scene with every pulse's carrier frequency replaced.
    pub fn with_omega(&self, omega: f64) -> Self {
        let mut c = self.clone();
        c.sources.iter_mut().for_each(|s| s.omega = omega);
        c
    }
}
