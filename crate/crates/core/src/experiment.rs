//! Declarative experiment front-end: a TOML document describing one game
//! instance, a solver configuration and a list of checks, executed into
//! deterministic machine-readable artifacts.
//!
//! The same seed always produces byte-identical outputs, regardless of the
//! worker count: nothing host- or time-dependent is recorded and every
//! reduction happens in a fixed order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::game::saddle::{default_deviations, saddle_check};
use crate::game::verification::{martingale_check, payoff_scale, recursion_residual};
use crate::game::{estimate_with_realizations, optimal_policies};
use crate::model::{nearest_builtin, Dynamics, MarkovModel};
use crate::payoff::{PayoffBundle, PayoffMap};
use crate::report::{write_detail, write_paths_csv, CheckResult, SolverSummary, Summary};
use crate::risk::{arrow_pratt, RiskFunction};
use crate::rng::splitmix64;
use crate::sdg::{representation_check, SdgCheckConfig};
use crate::signals::{merge, SignalStream, StreamId};
use crate::solver::{
    solve_ode, solve_pde, solve_regression_mc, solve_risk_neutral,
    solve_exponential_quadratic, SolveMode, ValueSurface,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Check kinds the runner understands, in execution order.
pub const CHECK_KINDS: &[&str] = &[
    "value_match",
    "saddle",
    "recursion",
    "martingale",
    "sdg",
    "colehopf",
];

pub const SOLVER_MODES: &[&str] = &["ode", "pde", "mc"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub r: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub horizon: f64,
    pub x0: f64,
    pub dynamics: MapSpec,
    pub risk: MapSpec,
    pub payoffs: PayoffsSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffsSpec {
    pub running: MapSpec,
    pub lower: MapSpec,
    pub upper: MapSpec,
    pub terminal: MapSpec,
}

/// A named builtin with its numeric parameters.
#[derive(Debug, Deserialize)]
pub struct MapSpec {
    pub kind: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub mode: String,
    pub seed: u64,
    pub n_t: usize,
    #[serde(default)]
    pub n_x: Option<usize>,
    #[serde(default)]
    pub x_min: Option<f64>,
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default)]
    pub mc_paths: Option<usize>,
    #[serde(default)]
    pub basis_degree: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub kind: String,
    #[serde(default)]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub sim_steps: Option<usize>,
    #[serde(default)]
    pub sigmas: Option<f64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub deviations_per_player: Option<usize>,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub quad_points: Option<usize>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub n_samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub directory: Option<String>,
    #[serde(default = "default_true")]
    pub emit_surface: bool,
    #[serde(default)]
    pub emit_streams: bool,
}

fn default_true() -> bool {
    true
}

fn validation(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

fn take_params(
    field: &str,
    spec: &MapSpec,
    expected: &[&str],
) -> Result<Vec<f64>> {
    for key in spec.params.keys() {
        if !expected.contains(&key.as_str()) {
            return Err(validation(
                &format!("{field}.{key}"),
                format!(
                    "unknown parameter for builtin `{}`; expected one of {:?}",
                    spec.kind, expected
                ),
            ));
        }
    }
    expected
        .iter()
        .map(|name| {
            spec.params.get(*name).copied().ok_or_else(|| {
                validation(
                    &format!("{field}.{name}"),
                    format!("missing parameter for builtin `{}`", spec.kind),
                )
            })
        })
        .collect()
}

pub fn build_payoff(field: &str, spec: &MapSpec) -> Result<PayoffMap> {
    match spec.kind.as_str() {
        "constant" => {
            let p = take_params(field, spec, &["value"])?;
            Ok(PayoffMap::Constant(p[0]))
        }
        "affine" => {
            let p = take_params(field, spec, &["intercept", "slope"])?;
            Ok(PayoffMap::Affine { intercept: p[0], slope: p[1] })
        }
        "call" => {
            let p = take_params(field, spec, &["scale", "strike", "offset"])?;
            Ok(PayoffMap::Call { scale: p[0], strike: p[1], offset: p[2] })
        }
        "put" => {
            let p = take_params(field, spec, &["scale", "strike", "offset"])?;
            Ok(PayoffMap::Put { scale: p[0], strike: p[1], offset: p[2] })
        }
        other => {
            let hint = nearest_builtin(other, "payoff")
                .map(|n| format!("; did you mean `{n}`?"))
                .unwrap_or_default();
            Err(validation(field, format!("unknown payoff builtin `{other}`{hint}")))
        }
    }
}

pub fn build_dynamics(field: &str, spec: &MapSpec) -> Result<Dynamics> {
    match spec.kind.as_str() {
        "arithmetic" => {
            let p = take_params(field, spec, &["drift", "vol"])?;
            Ok(Dynamics::Arithmetic { drift: p[0], vol: p[1] })
        }
        "geometric" => {
            let p = take_params(field, spec, &["drift", "vol"])?;
            Ok(Dynamics::Geometric { drift: p[0], vol: p[1] })
        }
        other => {
            let hint = nearest_builtin(other, "dynamics")
                .map(|n| format!("; did you mean `{n}`?"))
                .unwrap_or_default();
            Err(validation(field, format!("unknown dynamics builtin `{other}`{hint}")))
        }
    }
}

pub fn build_risk(field: &str, spec: &MapSpec) -> Result<RiskFunction> {
    match spec.kind.as_str() {
        "identity" => {
            take_params(field, spec, &[])?;
            Ok(RiskFunction::identity())
        }
        "exponential" => {
            let p = take_params(field, spec, &["gamma"])?;
            RiskFunction::exponential(p[0])
        }
        other => {
            let hint = nearest_builtin(other, "risk")
                .map(|n| format!("; did you mean `{n}`?"))
                .unwrap_or_default();
            Err(validation(field, format!("unknown risk builtin `{other}`{hint}")))
        }
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Build the model and cross-validate every field; returns the model so
    /// validation and construction cannot drift apart.
    pub fn validate(&self) -> Result<MarkovModel> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(validation(
                "schema_version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let model = MarkovModel {
            dynamics: build_dynamics("model.dynamics", &self.model.dynamics)?,
            initial_state: self.model.x0,
            bundle: PayoffBundle {
                discount_rate: self.model.r,
                running: build_payoff("model.payoffs.running", &self.model.payoffs.running)?,
                lower: build_payoff("model.payoffs.lower", &self.model.payoffs.lower)?,
                upper: build_payoff("model.payoffs.upper", &self.model.payoffs.upper)?,
                terminal: build_payoff("model.payoffs.terminal", &self.model.payoffs.terminal)?,
                horizon: self.model.horizon,
            },
            risk: build_risk("model.risk", &self.model.risk)?,
            lambda1: self.model.lambda1,
            lambda2: self.model.lambda2,
        };
        model.validate()?;

        match self.solver.mode.as_str() {
            "ode" => {}
            "pde" => {
                for (name, present) in [
                    ("solver.n_x", self.solver.n_x.is_some()),
                    ("solver.x_min", self.solver.x_min.is_some()),
                    ("solver.x_max", self.solver.x_max.is_some()),
                ] {
                    if !present {
                        return Err(validation(name, "required in pde mode"));
                    }
                }
            }
            "mc" => {
                if self.solver.mc_paths.is_none() {
                    return Err(validation("solver.mc_paths", "required in mc mode"));
                }
                if !self.checks.is_empty() {
                    return Err(validation(
                        "checks",
                        "checks need an ode or pde value surface; the mc solver only \
                         estimates the initial value",
                    ));
                }
            }
            other => {
                return Err(validation(
                    "solver.mode",
                    format!("unknown mode `{other}`; expected one of {SOLVER_MODES:?}"),
                ));
            }
        }

        for (i, check) in self.checks.iter().enumerate() {
            let field = format!("checks[{i}]");
            if !CHECK_KINDS.contains(&check.kind.as_str()) {
                let nearest = CHECK_KINDS
                    .iter()
                    .min_by_key(|k| crate::util::edit_distance(&check.kind, k))
                    .unwrap();
                return Err(validation(
                    &format!("{field}.kind"),
                    format!("unknown check kind `{}`; did you mean `{nearest}`?", check.kind),
                ));
            }
            for (name, v) in [("sigmas", check.sigmas), ("tolerance", check.tolerance)] {
                if let Some(v) = v {
                    if !v.is_finite() || v < 0.0 {
                        return Err(validation(
                            &format!("{field}.{name}"),
                            format!("must be finite and >= 0, got {v}"),
                        ));
                    }
                }
            }
            if matches!(check.kind.as_str(), "recursion" | "martingale")
                && !model.is_deterministic()
            {
                return Err(validation(
                    &format!("{field}.kind"),
                    "this check requires deterministic coefficients (zero volatility, \
                     time-only payoffs)",
                ));
            }
            if let Some(times) = &check.times {
                for &t in times {
                    if !(0.0..self.model.horizon).contains(&t) {
                        return Err(validation(
                            &format!("{field}.times"),
                            format!("time {t} outside [0, horizon)"),
                        ));
                    }
                }
            }
        }
        Ok(model)
    }
}

/// Command-line overrides for a run.
#[derive(Debug, Default, Clone)]
pub struct RunOptions {
    pub seed_override: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub emit_paths: bool,
}

pub struct RunOutcome {
    pub summary: Summary,
    pub all_passed: bool,
    pub out_dir: PathBuf,
}

enum Solved {
    Surface(ValueSurface),
    McValue { value: f64, qbar0: f64, stderr: f64 },
}

fn check_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ (0x5EED_0000u64 + index as u64))
}

/// Execute a validated spec: solve, run every check, write artifacts.
pub fn run(spec: &ExperimentSpec, options: &RunOptions) -> Result<RunOutcome> {
    let model = spec.validate()?;
    let seed = options.seed_override.unwrap_or(spec.solver.seed);

    let out_dir = options
        .out_dir
        .clone()
        .or_else(|| spec.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)?;

    // Solve.
    let pde_mode = || SolveMode::Pde {
        n_t: spec.solver.n_t,
        n_x: spec.solver.n_x.unwrap_or(0),
        x_min: spec.solver.x_min.unwrap_or(0.0),
        x_max: spec.solver.x_max.unwrap_or(0.0),
    };
    let solved = match spec.solver.mode.as_str() {
        "ode" => Solved::Surface(solve_ode(&model, spec.solver.n_t)?),
        "pde" => Solved::Surface(solve_pde(
            &model,
            spec.solver.n_t,
            spec.solver.n_x.unwrap(),
            spec.solver.x_min.unwrap(),
            spec.solver.x_max.unwrap(),
        )?),
        "mc" => {
            let result = solve_regression_mc(
                &model,
                spec.solver.n_t,
                spec.solver.mc_paths.unwrap(),
                spec.solver.basis_degree.unwrap_or(3),
                seed,
            )?;
            write_detail(&out_dir, "mc_solve", &McSolveDetail::from(&result))?;
            Solved::McValue {
                value: result.raw_value(&model.risk)?,
                qbar0: result.value,
                stderr: result.raw_stderr(&model.risk)?,
            }
        }
        _ => unreachable!("validated above"),
    };

    let (value, qbar0, mc_stderr) = match &solved {
        Solved::Surface(s) => (s.value_at_initial(), s.qbar_at_initial(), None),
        Solved::McValue { value, qbar0, stderr } => (*value, *qbar0, Some(*stderr)),
    };
    let solver_summary = SolverSummary {
        mode: spec.solver.mode.clone(),
        value,
        qbar0,
        stderr: mc_stderr,
        risk_aversion_at_value: arrow_pratt(&model.risk, value, None)?,
    };

    // Checks.
    let mut checks = BTreeMap::new();
    let mut emitted_paths = false;
    for (idx, check) in spec.checks.iter().enumerate() {
        let surface = match &solved {
            Solved::Surface(s) => s,
            Solved::McValue { .. } => unreachable!("validated above"),
        };
        let cseed = check.seed.unwrap_or_else(|| check_seed(seed, idx));
        let sigmas = check.sigmas.unwrap_or(3.0);
        let result = match check.kind.as_str() {
            "value_match" => {
                let (p1, p2) = optimal_policies(surface, &model.bundle)?;
                let (est, reals) = estimate_with_realizations(
                    &model,
                    Some(surface),
                    &p1,
                    &p2,
                    check.n_paths.unwrap_or(20_000),
                    check.sim_steps.unwrap_or(200),
                    cseed,
                    options.emit_paths && !emitted_paths,
                )?;
                if options.emit_paths && !emitted_paths {
                    let file = std::fs::File::create(out_dir.join("paths.csv"))?;
                    write_paths_csv(std::io::BufWriter::new(file), &reals)?;
                    emitted_paths = true;
                }
                let reference = surface.value_at_initial();
                let margin = est.value - reference;
                write_detail(&out_dir, "value_match", &est)?;
                CheckResult {
                    value: est.value,
                    reference,
                    margin,
                    stderr: est.stderr_value,
                    pass: margin.abs() <= sigmas * est.stderr_value,
                }
            }
            "saddle" => {
                let deviations = default_deviations(check.deviations_per_player.unwrap_or(10));
                let report = saddle_check(
                    &model,
                    surface,
                    &deviations,
                    check.n_paths.unwrap_or(20_000),
                    check.sim_steps.unwrap_or(200),
                    cseed,
                    sigmas,
                )?;
                write_detail(&out_dir, "saddle", &report)?;
                let worst = report
                    .entries
                    .iter()
                    .map(|e| e.margin / e.stderr.max(1e-300))
                    .fold(f64::INFINITY, f64::min);
                CheckResult {
                    value: report.optimal.value,
                    reference: surface.value_at_initial(),
                    margin: worst,
                    stderr: report.optimal.stderr_value,
                    pass: report.pass,
                }
            }
            "recursion" => {
                let horizon = model.bundle.horizon;
                let default_times: Vec<f64> =
                    [0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|f| f * horizon).collect();
                let times = check.times.clone().unwrap_or(default_times);
                let quad_points = check.quad_points.unwrap_or(64);
                let tolerance = check.tolerance.unwrap_or(1e-6);
                let scale = payoff_scale(&model, surface)?;
                let mut rows = Vec::new();
                let mut max_abs = 0.0f64;
                for &t in &times {
                    let res = recursion_residual(&model, surface, t, quad_points)?;
                    max_abs = max_abs.max(res.abs());
                    rows.push(serde_json::json!({ "t": t, "residual": res }));
                }
                write_detail(
                    &out_dir,
                    "recursion",
                    &serde_json::json!({ "scale": scale, "residuals": rows }),
                )?;
                CheckResult {
                    value: max_abs,
                    reference: 0.0,
                    margin: tolerance * scale - max_abs,
                    stderr: 0.0,
                    pass: max_abs <= tolerance * scale,
                }
            }
            "martingale" => {
                let report = martingale_check(
                    &model,
                    surface,
                    check.steps.unwrap_or(4),
                    check.n_samples.unwrap_or(100_000),
                    cseed,
                    sigmas,
                )?;
                write_detail(&out_dir, "martingale", &report)?;
                use crate::game::verification::MartingaleVariant;
                // Headline: worst martingale-variant mean; margin: smallest
                // slack across all entries in their own convention.
                let max_mean = report
                    .entries
                    .iter()
                    .filter(|e| e.variant == MartingaleVariant::Martingale)
                    .map(|e| e.mean.abs())
                    .fold(0.0, f64::max);
                let max_sem = report.entries.iter().map(|e| e.stderr).fold(0.0, f64::max);
                let min_slack = report
                    .entries
                    .iter()
                    .map(|e| match e.variant {
                        MartingaleVariant::Martingale => sigmas * e.stderr - e.mean.abs(),
                        MartingaleVariant::Supermartingale => sigmas * e.stderr - e.mean,
                        MartingaleVariant::Submartingale => sigmas * e.stderr + e.mean,
                    })
                    .fold(f64::INFINITY, f64::min);
                CheckResult {
                    value: max_mean,
                    reference: 0.0,
                    margin: min_slack,
                    stderr: max_sem,
                    pass: report.pass,
                }
            }
            "sdg" => {
                let cfg = SdgCheckConfig {
                    n_paths: check.n_paths.unwrap_or(20_000),
                    n_steps: check.sim_steps.unwrap_or(200),
                    deviations_per_player: check.deviations_per_player.unwrap_or(10),
                    segments: 16,
                    quad_nodes: check.quad_points.unwrap_or(32),
                    quad_tol: check.tolerance.unwrap_or(1e-6),
                    sigmas,
                    seed: cseed,
                };
                let report = representation_check(&model, surface, &cfg)?;
                write_detail(&out_dir, "sdg", &report)?;
                CheckResult {
                    value: report.value,
                    reference: report.reference,
                    margin: report.margin,
                    stderr: report.stderr,
                    pass: report.pass,
                }
            }
            "colehopf" => {
                let mode = match spec.solver.mode.as_str() {
                    "ode" => SolveMode::Ode { n_t: spec.solver.n_t },
                    _ => pde_mode(),
                };
                let direct = match model.risk {
                    RiskFunction::Identity => solve_risk_neutral(&model, mode)?,
                    RiskFunction::Exponential { .. } => {
                        solve_exponential_quadratic(&model, mode)?
                    }
                    _ => {
                        return Err(validation(
                            "checks.colehopf",
                            "requires the identity or exponential criterion",
                        ))
                    }
                };
                let max_diff = surface.max_q_difference(&direct)?;
                let tolerance = check.tolerance.unwrap_or(1e-6);
                write_detail(
                    &out_dir,
                    "colehopf",
                    &serde_json::json!({ "max_difference": max_diff, "tolerance": tolerance }),
                )?;
                CheckResult {
                    value: max_diff,
                    reference: 0.0,
                    margin: tolerance - max_diff,
                    stderr: 0.0,
                    pass: max_diff <= tolerance,
                }
            }
            _ => unreachable!("validated above"),
        };
        let mut key = check.kind.clone();
        let mut suffix = 2;
        while checks.contains_key(&key) {
            key = format!("{}_{suffix}", check.kind);
            suffix += 1;
        }
        checks.insert(key, result);
    }

    // Artifacts.
    if spec.output.emit_surface {
        if let Solved::Surface(s) = &solved {
            let file = std::fs::File::create(out_dir.join("surface.csv"))?;
            s.write_csv(std::io::BufWriter::new(file))?;
        }
    }
    if spec.output.emit_streams {
        let s1 = SignalStream::sample(model.lambda1, model.bundle.horizon, seed, StreamId::One)?;
        let s2 = SignalStream::sample(model.lambda2, model.bundle.horizon, seed, StreamId::Two)?;
        let merged = merge(&s1, &s2);
        let file = std::fs::File::create(out_dir.join("streams.csv"))?;
        merged.write_csv(std::io::BufWriter::new(file))?;
    }

    let all_passed = checks.values().all(|c| c.pass);
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        seed,
        solver: solver_summary,
        checks,
        all_passed,
    };
    summary.write_to(&out_dir.join("summary.json"))?;
    Ok(RunOutcome {
        all_passed,
        summary,
        out_dir,
    })
}

#[derive(serde::Serialize)]
struct McSolveDetail {
    value: f64,
    stderr: f64,
    n_paths: usize,
    n_steps: usize,
    degree_reductions: usize,
}

impl From<&crate::solver::McSolveResult> for McSolveDetail {
    fn from(r: &crate::solver::McSolveResult) -> Self {
        McSolveDetail {
            value: r.value,
            stderr: r.stderr,
            n_paths: r.n_paths,
            n_steps: r.n_steps,
            degree_reductions: r.reductions.len(),
        }
    }
}
