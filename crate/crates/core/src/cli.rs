//! Command-line driver. Each subcommand reads one JSON scene config and
//! writes its artifacts, plus `manifest.json` (and `error.json` on failure),
//! into the `--out` directory.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::SceneConfig;
use crate::fields::{norm, NormKind, WaveField};
use crate::inversion::{
    detect_surfaces, frequency_scaling_probe, locate_interface, recover_jump, DetectionReport,
};
use crate::raytrace::{predict_support, PredictedSupport, Surface};
use crate::response::{
    born_lockstep, calibrate_amplitude, cross_difference, default_ladder, defect_ladder, perturbation_split,
    CrossResponse, CALIBRATION_ITERS,
};
use crate::snapshot::Snapshot;
use crate::solver::solve_semilinear;
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "wavelab", version, about = "Two-wave interaction at a nonlinear interface")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scene config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, short)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InvertArgs {
    #[command(flatten)]
    pub common: Common,
    /// Skip the frequency-scaling probe.
    #[arg(long)]
    pub no_scaling: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predicted wave-front surfaces as CSV.
    Rays(Common),
    /// Semilinear run with data eps·(pulse1 + pulse2).
    Forward(Common),
    /// Mixed second difference of the nonlinear response.
    Cross(Common),
    /// Expansion defect over an amplitude ladder.
    Expand(Common),
    /// Linear/nonlinear split under a small potential.
    Perturb(Common),
    /// Interface location and jump recovery.
    Invert(InvertArgs),
    /// Cone amplitude against carrier frequency.
    Scaling(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Rays(_) => "rays",
            Command::Forward(_) => "forward",
            Command::Cross(_) => "cross",
            Command::Expand(_) => "expand",
            Command::Perturb(_) => "perturb",
            Command::Invert(_) => "invert",
            Command::Scaling(_) => "scaling",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Invert(a) => &a.common,
            Command::Rays(c)
            | Command::Forward(c)
            | Command::Cross(c)
            | Command::Expand(c)
            | Command::Perturb(c)
            | Command::Scaling(c) => c,
        }
    }
}

/// Artifact sink; remembers what was written for the manifest.
struct Out {
    dir: PathBuf,
    files: Vec<String>,
}

impl Out {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), Error> {
        let p = self.path(name);
        fs::write(&p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<(), Error> {
        let body = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
        self.text(name, &(body + "\n"))
    }

    /// Recorded slices of `field` at the observation times, plus the last.
    fn snapshots(&mut self, prefix: &str, field: &WaveField, cfg: &SceneConfig) -> Result<(), Error> {
        let g = field.grid();
        let mut want: Vec<usize> = cfg.obs_times(g).iter().map(|t| (t / g.dt).round() as usize).collect();
        want.extend(field.steps.last().copied());
        for (k, step) in field.steps.iter().enumerate() {
            if want.contains(step) {
                let p = self.path(&format!("{prefix}_{step:06}.wfg"));
                Snapshot::from_field(field, k).write(&p)?;
            }
        }
        Ok(())
    }
}

/// Float with 17 significant digits.
fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per sample: surface, t, x_i, tau, xi_i, then `d` tangent
/// columns groups `e{k}_t, e{k}_x{i}` left blank when absent.
fn support_csv(pred: &PredictedSupport, d: usize) -> String {
    let mut s = String::from("surface,t");
    (0..d).for_each(|i| write!(s, ",x{i}").unwrap());
    s.push_str(",tau");
    (0..d).for_each(|i| write!(s, ",xi{i}").unwrap());
    for k in 0..d {
        write!(s, ",e{k}_t").unwrap();
        (0..d).for_each(|i| write!(s, ",e{k}_x{i}").unwrap());
    }
    s.push('\n');
    let mut rows = |surf: &Surface, label: &str| {
        for c in &surf.samples {
            s.push_str(label);
            write!(s, ",{}", f17(c.t)).unwrap();
            c.x.iter().for_each(|v| write!(s, ",{}", f17(*v)).unwrap());
            write!(s, ",{}", f17(c.zeta.tau)).unwrap();
            c.zeta.xi.iter().for_each(|v| write!(s, ",{}", f17(*v)).unwrap());
            for k in 0..d {
                match c.tangents.get(k) {
                    Some(e) => e.iter().for_each(|v| write!(s, ",{}", f17(*v)).unwrap()),
                    None => (0..=d).for_each(|_| s.push(',')),
                }
            }
            s.push('\n');
        }
    };
    for surf in pred.surfaces() {
        rows(surf, surf.id.as_str());
    }
    if pred.cone.is_empty() {
        rows(&pred.candidate_cone, "candidate_cone");
    }
    s
}

fn rays(cfg: &SceneConfig, base: &Path, out: &mut Out) -> Result<(), Error> {
    let setup = cfg.build_setup(base)?;
    let pred = predict_support(&cfg.support_scene(&setup)?)?;
    out.text("support.csv", &support_csv(&pred, setup.grid().d))?;
    let counts: Value = pred.surfaces().iter().map(|s| (s.id.as_str().to_string(), json!(s.samples.len()))).collect();
    out.json(
        "support.json",
        &json!({
            "p0": pred.p0,
            "on_interface": pred.on_interface,
            "central_distance": pred.central_distance,
            "samples": counts,
            "candidate_cone_samples": pred.candidate_cone.samples.len(),
        }),
    )
}

fn forward(cfg: &SceneConfig, base: &Path, out: &mut Out) -> Result<(), Error> {
    let setup = cfg.build_setup(base)?;
    let eps = cfg.experiment.eps;
    let [s1, s2] = &setup.sources;
    let u = solve_semilinear(&setup.solver, &setup.metric, eps, eps, s1, s2, &setup.coeff)?;
    out.snapshots("u", &u, cfg)?;
    let mut csv = String::from("step,time,l2,l4_accum,energy\n");
    for r in &u.diagnostics {
        writeln!(csv, "{},{},{},{},{}", r.step, f17(r.time), f17(r.l2), f17(r.l4_accum), f17(r.energy)).unwrap();
    }
    out.text("diagnostics.csv", &csv)?;
    out.json(
        "forward.json",
        &json!({
            "eps": eps,
            "steps": setup.grid().n_t,
            "dt": setup.grid().dt,
            "max_abs": u.max_abs(),
            "l2": norm(&u, NormKind::L2, None),
            "l4": norm(&u, NormKind::L4, None),
        }),
    )
}

fn cross_report(c: &CrossResponse, detections: &[DetectionReport]) -> Value {
    json!({
        "eps": [c.eps.0, c.eps.1],
        "field_norm": norm(&c.field, NormKind::L2, None),
        "max_abs": c.field.max_abs(),
        "corners": c.corners,
        "born_discrepancy": c.born_discrepancy(),
        "detections": detections,
    })
}

fn cross(cfg: &SceneConfig, base: &Path, out: &mut Out) -> Result<(), Error> {
    let setup = cfg.build_setup(base)?;
    let eps = cfg.experiment.eps;
    let pred = predict_support(&cfg.support_scene(&setup)?)?;
    let c = cross_difference(&setup, eps, eps, true)?;
    out.snapshots("cross", &c.field, cfg)?;
    let det = detect_surfaces(&c.field, &pred, &cfg.experiment.detect);
    out.json("cross.json", &cross_report(&c, &det))
}

fn expand(cfg: &SceneConfig, base: &Path, out: &mut Out) -> Result<(), Error> {
    let setup = cfg.build_setup(base)?;
    let (ladder, calibrated) = match cfg.experiment.eps_max {
        Some(hi) => {
            let c = calibrate_amplitude(&setup, hi, CALIBRATION_ITERS)?;
            log::info!("calibrated amplitude {c:.4e}");
            (default_ladder(c), Some(c))
        }
        None => (cfg.experiment.eps_ladder.clone(), None),
    };
    let lad = defect_ladder(&setup, &ladder)?;
    out.json("expand.json", &json!({ "calibrated_eps": calibrated, "ladder": lad }))
}

fn perturb(cfg: &SceneConfig, base: &Path, out: &mut Out) -> Result<(), Error> {
    let setup = cfg.build_setup(base)?;
    if setup.coeff.potential.is_none() {
        return Err(Error::invalid("coefficient.potential", "perturb needs a potential"));
    }
    let e = &cfg.experiment;
    let pred = predict_support(&cfg.support_scene(&setup)?)?;
    let sp = perturbation_split(&setup, e.delta, e.eps)?;
    let diff = WaveField::combine(&[(1.0, &sp.v_est), (-1.0, &sp.v_oracle)]);
    let vo = norm(&sp.v_oracle, NormKind::L2, None);
    out.json(
        "perturb.json",
        &json!({
            "delta": e.delta,
            "eps": e.eps,
            "v_est_norm": norm(&sp.v_est, NormKind::L2, None),
            "v_oracle_norm": vo,
            "v_relative_discrepancy": if vo > 0.0 { Some(norm(&diff, NormKind::L2, None) / vo) } else { None },
            "w_est_norm": norm(&sp.w_est, NormKind::L2, None),
            "v_detections": detect_surfaces(&sp.v_est, &pred, &e.detect),
            "w_detections": detect_surfaces(&sp.w_est, &pred, &e.detect),
        }),
    )
}

fn invert(cfg: &SceneConfig, base: &Path, out: &mut Out, no_scaling: bool) -> Result<(), Error> {
    let e = &cfg.experiment;
    let loc = locate_interface(cfg, base, &e.s0_ladder)?;
    let setup = cfg.build_setup(base)?;
    let pred = predict_support(&cfg.support_scene(&setup)?)?;
    let observed = cross_difference(&setup, e.eps, e.eps, false)?;
    let reference = born_lockstep(&setup.with_coeff(setup.coeff.with_alpha(e.alpha_ref)))?;
    let reference = CrossResponse::born_oracle(&reference.terms.x12);
    let jump = recover_jump(&observed, &reference, e.alpha_ref, &pred, &e.detect)?;
    let scaling = if no_scaling { None } else { Some(frequency_scaling_probe(cfg, base, &e.omega_ladder)?) };
    out.json(
        "invert.json",
        &json!({
            "p0": loc.p0,
            "on_interface": loc.located,
            "per_s0": loc.rungs,
            "alpha_hat": jump.alpha_hat,
            "residual": jump.residual,
            "method": jump.method,
            "frequency_exponent": scaling.as_ref().map(|s| s.exponent),
            "frequency_fit_r2": scaling.as_ref().map(|s| s.r2),
        }),
    )
}

fn scaling(cfg: &SceneConfig, base: &Path, out: &mut Out) -> Result<(), Error> {
    let rep = frequency_scaling_probe(cfg, base, &cfg.experiment.omega_ladder)?;
    out.json("scaling.json", &rep)
}

fn execute(cmd: &Command, raw: &[u8], base: &Path, out: &mut Out) -> Result<(), Error> {
    let text = std::str::from_utf8(raw).map_err(|e| Error::Parse(e.to_string()))?;
    let cfg = SceneConfig::from_json(text)?;
    cfg.validate()?;
    match cmd {
        Command::Rays(_) => rays(&cfg, base, out),
        Command::Forward(_) => forward(&cfg, base, out),
        Command::Cross(_) => cross(&cfg, base, out),
        Command::Expand(_) => expand(&cfg, base, out),
        Command::Perturb(_) => perturb(&cfg, base, out),
        Command::Invert(a) => invert(&cfg, base, out, a.no_scaling),
        Command::Scaling(_) => scaling(&cfg, base, out),
    }
}

fn error_json(e: &Error) -> Value {
    json!({ "code": e.exit_code(), "kind": e.kind(), "message": e.to_string(), "field": e.field() })
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cmd = &cli.command;
    let common = cmd.common();
    let level = if common.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();

    if let Err(e) = fs::create_dir_all(&common.out) {
        eprintln!("cannot create {}: {e}", common.out.display());
        return 1;
    }
    let mut out = Out { dir: common.out.clone(), files: Vec::new() };
    let start = Instant::now();
    let raw = fs::read(&common.config);
    let config_sha256 = raw.as_ref().ok().map(|b| hex::encode(Sha256::digest(b)));
    let base = common.config.parent().map(Path::to_path_buf).unwrap_or_default();

    let result = match &raw {
        Err(e) => Err(Error::Io(format!("{}: {e}", common.config.display()))),
        Ok(bytes) => {
            let mut go = || execute(cmd, bytes, &base, &mut out);
            match common.threads {
                Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    Ok(pool) => pool.install(go),
                    Err(e) => Err(Error::invalid("threads", &e.to_string())),
                },
                None => go(),
            }
        }
    };
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            if let Err(w) = out.json("error.json", &error_json(e)) {
                eprintln!("cannot write error.json: {w}");
            }
            e.exit_code()
        }
    };
    let manifest = json!({
        "command": cmd.name(),
        "config": common.config.display().to_string(),
        "config_sha256": config_sha256,
        "versions": {
            "wavelab": env!("CARGO_PKG_VERSION"),
            "snapshot_format": "WFGRID1",
        },
        "threads": common.threads.unwrap_or_else(rayon::current_num_threads),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "exit_code": code,
        "artifacts": out.files.clone(),
    });
    if let Err(e) = out.json("manifest.json", &manifest) {
        eprintln!("cannot write manifest.json: {e}");
        return if code == 0 { 1 } else { code };
    }
    code
}
