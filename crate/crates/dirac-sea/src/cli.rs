//! Command-line front end: config ingestion, subcommands and report files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::action::{action_extended, action_quartic, gauge_f};
use crate::error::{Error, Result};
use crate::model::{RunConfig, Resolved};
use crate::oracle::{run_suite, KernelSet, SuiteOptions};
use crate::solve::{
    minimize_action, record_curve, solve_critical, verify_solution, Bound, ConstraintHandling, Mode, SolutionRecord,
    SolveProblem, Var,
};
use crate::variation::{classify_stability, sample_vcurve, GridSpec, VCurve};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

/// Nodes of the curve written next to each solution when `--grid` is absent.
pub const DEFAULT_CURVE_POINTS: usize = 801;

#[derive(Debug, Parser)]
#[command(name = "dirac-sea", version, about = "Vacuum Dirac-sea action, variation density and critical points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the quadrature tolerance of the config.
    #[arg(long)]
    pub quad_tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quartic and extended action with the derived scalars.
    Eval {
        #[command(flatten)]
        common: Common,
    },
    /// Variation density on a grid, written as CSV with a JSON sidecar.
    Vdensity {
        #[command(flatten)]
        common: Common,
        /// "min:max:n"; defaults to ±2·max m with 801 nodes.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Critical points of the effective action.
    Critical {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Minimizer of the effective action under the mass-weighted constraint.
    Minimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Runs the oracle suite; with --record also re-verifies a solution.
    Verify {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Solution record written by `critical` or `minimize`.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Residual tolerance for --record.
        #[arg(long)]
        tol: Option<f64>,
    },
}

/// `problem` section of a config for `critical` and `minimize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub free_vars: Vec<Var>,
    #[serde(default)]
    pub bounds: Vec<Bound>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub starts: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub constraint: Option<ConstraintHandling>,
    #[serde(default)]
    pub grid_points: Option<usize>,
    #[serde(default)]
    pub stability_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Option<String>,
    pub out_dir: String,
    pub version: String,
    pub timestamp_unix: u64,
    /// Settings after defaulting.
    pub settings: Value,
    pub outputs: Vec<String>,
}

/// Result of a successful or failed-but-reported run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: Value,
    pub manifest: RunManifest,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation { .. } | Error::Domain(_) | Error::Seam { .. } => EXIT_VALIDATION,
        Error::NonConvergence(_) | Error::Quadrature { .. } => EXIT_NONCONVERGENCE,
        Error::Verification(_) => EXIT_VERIFICATION,
    }
}

fn load(common: &Common) -> Result<(RunConfig, Resolved)> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Error::validation("config", format!("{}: {e}", common.config.display())))?;
    let mut rc = RunConfig::from_json(&text)?;
    if let Some(t) = common.quad_tol {
        rc.quad_tol = Some(t);
    }
    let resolved = rc.resolve()?;
    Ok((rc, resolved))
}

struct Writer {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::validation("out", format!("{}: {e}", dir.display())))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|e| Error::validation("out", format!("{}: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Domain(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    fn finish(mut self, subcommand: &str, config: Option<&Path>, settings: Value) -> Result<RunManifest> {
        self.outputs.push("manifest.json".into());
        let manifest = RunManifest {
            subcommand: subcommand.into(),
            config: config.map(|p| p.display().to_string()),
            out_dir: self.dir.display().to_string(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            settings,
            outputs: self.outputs.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Domain(e.to_string()))?;
        fs::write(self.dir.join("manifest.json"), text + "\n")
            .map_err(|e| Error::validation("out", e.to_string()))?;
        Ok(manifest)
    }
}

fn settings_of(rc: &RunConfig, r: &Resolved) -> Value {
    json!({
        "masses": r.cfg.masses(),
        "weights": r.cfg.weights(),
        "params": r.params,
        "published_units": rc.published_units,
        "a_max": r.params.a_max,
        "a_max_defaulted": r.a_max_defaulted,
        "quad": r.quad,
    })
}

fn cmd_eval(common: &Common) -> Result<Outcome> {
    let (rc, r) = load(common)?;
    let s = r.cfg.scalars();
    let quartic = action_quartic(&r.cfg, r.params.a_max, &r.quad)?;
    let ext = action_extended(&r.cfg, &r.params, &r.quad)?;
    let summary = json!({
        "S_quartic": quartic,
        "S_ext": ext,
        "gauge_term": gauge_f(r.params.gauge, r.params.a_max, s.m3, s.m5),
        "m3": s.m3,
        "m5": s.m5,
        "T": s.t,
        "a_max": r.params.a_max,
        "a_max_defaulted": r.a_max_defaulted,
    });
    let mut w = Writer::new(&common.out)?;
    w.json("eval.json", &summary)?;
    let manifest = w.finish("eval", Some(&common.config), settings_of(&rc, &r))?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary,
        manifest,
    })
}

fn grid_for(grid: Option<&str>, r: &Resolved) -> Result<GridSpec> {
    match grid {
        Some(g) => GridSpec::parse(g),
        None => Ok(GridSpec::covering(&r.cfg, DEFAULT_CURVE_POINTS)),
    }
}

fn curve_sidecar(curve: &VCurve, grid: &GridSpec, stability: Option<Value>) -> Value {
    json!({
        "grid": grid,
        "seams": curve.seam_points,
        "seam_values": curve.seam_values,
        "seam_values_negative": curve.seam_values_negative,
        "local_minima": curve.local_minima,
        "stability": stability,
    })
}

fn cmd_vdensity(common: &Common, grid: Option<&str>) -> Result<Outcome> {
    let (rc, r) = load(common)?;
    let spec = grid_for(grid, &r)?;
    let curve = sample_vcurve(&r.cfg, &r.params, &spec, &r.quad)?;
    // Stability needs the symmetric range; report it only when covered.
    let stability = classify_stability(&curve, &r.cfg, 1e-6)
        .ok()
        .map(|s| serde_json::to_value(s).unwrap_or(Value::Null));
    let sidecar = curve_sidecar(&curve, &spec, stability);
    let mut w = Writer::new(&common.out)?;
    w.write("vcurve.csv", &curve.to_csv())?;
    w.json("vcurve.json", &sidecar)?;
    let mut settings = settings_of(&rc, &r);
    settings["grid"] = serde_json::to_value(spec).unwrap_or(Value::Null);
    let manifest = w.finish("vdensity", Some(&common.config), settings)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary: sidecar,
        manifest,
    })
}

/// Solver problem from the `problem` section of a config.
pub fn problem_for(rc: &RunConfig, r: &Resolved, mode: Mode, seed: Option<u64>, tol: Option<f64>) -> Result<SolveProblem> {
    let raw = rc
        .problem
        .clone()
        .ok_or_else(|| Error::validation("problem", "required for critical and minimize"))?;
    let spec: ProblemSpec = serde_json::from_value(raw).map_err(|e| Error::validation("problem", e.to_string()))?;
    let mut p = SolveProblem::new(&r.cfg, r.params, spec.free_vars, mode);
    p.quad = r.quad;
    p.bounds = spec.bounds;
    p.seed = seed.or(spec.seed).unwrap_or(0);
    if let Some(v) = spec.starts {
        p.starts = v;
    }
    if let Some(v) = tol.or(spec.tol) {
        p.tol = v;
    }
    if let Some(v) = spec.max_iter {
        p.max_iter = v;
    }
    if let Some(v) = spec.constraint {
        p.constraint = v;
    }
    if let Some(v) = spec.grid_points {
        p.grid_points = v;
    }
    if let Some(v) = spec.stability_tol {
        p.stability_tol = v;
    }
    Ok(p)
}

fn write_records(w: &mut Writer, records: &[SolutionRecord], grid: Option<&str>) -> Result<Vec<Value>> {
    let mut out = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let (curve, spec) = match grid {
            Some(g) => {
                let spec = GridSpec::parse(g)?;
                (sample_vcurve(&rec.cfg, &rec.params, &spec, &rec.quad)?, spec)
            }
            None => (
                record_curve(rec, DEFAULT_CURVE_POINTS)?,
                GridSpec::covering(&rec.cfg, DEFAULT_CURVE_POINTS),
            ),
        };
        w.write(&format!("solution_{i}.json"), &(rec.to_json() + "\n"))?;
        w.write(&format!("solution_{i}_curve.csv"), &curve.to_csv())?;
        let stability = rec.stability.as_ref().map(|s| serde_json::to_value(s).unwrap_or(Value::Null));
        w.json(&format!("solution_{i}_curve.json"), &curve_sidecar(&curve, &spec, stability))?;
        out.push(json!({
            "masses": rec.cfg.masses(),
            "weights": rec.cfg.weights(),
            "params_published_units": rec.params.to_published_units(),
            "residual_norm": rec.residual_norm,
            "action": rec.action,
            "state_stable": rec.stability.as_ref().map(|s| s.is_state_stable),
            "local_minima": curve.local_minima,
        }));
    }
    Ok(out)
}

fn cmd_solve(common: &Common, grid: Option<&str>, seed: Option<u64>, tol: Option<f64>, mode: Mode) -> Result<Outcome> {
    let (rc, r) = load(common)?;
    let problem = problem_for(&rc, &r, mode, seed, tol)?;
    let records = match mode {
        Mode::CriticalPoint => solve_critical(&problem)?,
        Mode::Minimize => vec![minimize_action(&problem)?],
    };
    let mut w = Writer::new(&common.out)?;
    let solutions = write_records(&mut w, &records, grid)?;
    let summary = json!({ "solutions": solutions });
    let name = match mode {
        Mode::CriticalPoint => "critical",
        Mode::Minimize => "minimize",
    };
    let mut settings = settings_of(&rc, &r);
    settings["problem"] = serde_json::to_value(&problem).unwrap_or(Value::Null);
    let manifest = w.finish(name, Some(&common.config), settings)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary,
        manifest,
    })
}

/// Oracle suite with the given kernels, written to `out/verify.json`.
pub fn cmd_verify_with(
    kernels: &KernelSet,
    out: &Path,
    seed: Option<u64>,
    record: Option<&Path>,
    tol: Option<f64>,
) -> Result<Outcome> {
    let mut opts = SuiteOptions::default();
    if let Some(s) = seed {
        opts.seed = s;
    }
    let report = run_suite(kernels, &opts);
    let mut passed = report.passed;
    let mut w = Writer::new(out)?;
    w.write("verify.json", &(report.to_json() + "\n"))?;
    let mut summary = json!({
        "passed": report.passed,
        "failed_checks": report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect::<Vec<_>>(),
    });
    if let Some(path) = record {
        let text = fs::read_to_string(path).map_err(|e| Error::validation("record", format!("{}: {e}", path.display())))?;
        let rec = SolutionRecord::from_json(&text)?;
        let v = verify_solution(&rec, tol.unwrap_or(rec.tol))?;
        passed &= v.passed;
        w.json("verify_record.json", &v)?;
        summary["record_passed"] = json!(v.passed);
    }
    summary["passed"] = json!(passed);
    let settings = json!({ "suite": opts, "record": record.map(|p| p.display().to_string()), "tol": tol });
    let manifest = w.finish("verify", None, settings)?;
    Ok(Outcome {
        exit_code: if passed { EXIT_OK } else { EXIT_VERIFICATION },
        summary,
        manifest,
    })
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Eval { common } => cmd_eval(common),
        Command::Vdensity { common, grid } => cmd_vdensity(common, grid.as_deref()),
        Command::Critical {
            common,
            grid,
            seed,
            tol,
        } => cmd_solve(common, grid.as_deref(), *seed, *tol, Mode::CriticalPoint),
        Command::Minimize {
            common,
            grid,
            seed,
            tol,
        } => cmd_solve(common, grid.as_deref(), *seed, *tol, Mode::Minimize),
        Command::Verify { out, seed, record, tol } => {
            cmd_verify_with(&KernelSet::standard(), out, *seed, record.as_deref(), *tol)
        }
    }
}
