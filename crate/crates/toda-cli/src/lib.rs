//! Config-driven runs of the toda pipelines with reproducible file outputs.

pub mod config;
pub mod output;

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};
use toda::blowup::analyze;
use toda::bounds::{family_samples, fit_samples, lower_bound, predicted_c0, predicted_c1, verdict, TestFamilyParams};
use toda::fields::scalar_condition;
use toda::functional::{constraint_values, FieldPair, RhoPair, Weight};
use toda::geometry::TorusGrid;
use toda::solver::{
    classify_case, continuation, default_init, default_init_pair, default_schedule, minimize_rho, random_init,
    solve_scalar_kw, ContinuationRun,
};
use toda::TodaError;

pub use config::{Mode, RunConfig};

pub const SUMMARY_SCHEMA: &str = include_str!("../schema/summary.schema.json");

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numerical(String),
    Infeasible(String),
    Schema(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Schema(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible input: {m}"),
            CliError::Schema(m) => write!(f, "summary does not match schema: {m}"),
        }
    }
}

impl From<TodaError> for CliError {
    fn from(e: TodaError) -> Self {
        use TodaError::*;
        let m = e.to_string();
        match e {
            InvalidGrid(_) | GridMismatch(..) | InvalidInput(_) => CliError::Config(m),
            NearCoincident(_) | EmptyPositiveSet | InfeasibleState(..) | NotOnConstraint(..) | InitInfeasible
            | BallOverlap(_) | NegativeHeightDensity(_) | InfeasibleTestFunction(..) => CliError::Infeasible(m),
            NonFinite | IllConditionedFit(_) | Inconclusive(_) => CliError::Numerical(m),
        }
    }
}

/// What a finished run reports back: the summary as written and the process exit code.
pub struct RunOutcome {
    pub summary: Value,
    pub exit_code: i32,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serialisable")
}

fn state_stats(s: &FieldPair, w1: &Weight, w2: &Weight) -> Value {
    let c = constraint_values(s, w1, w2);
    json!({
        "i1": c.i1, "i2": c.i2,
        "mean1": s.u1.mean(), "mean2": s.u2.mean(),
        "max1": s.u1.max(), "max2": s.u2.max(),
    })
}

fn run_json(run: &ContinuationRun, cfg: &RunConfig) -> Value {
    let classification = match classify_case(&run.records, &cfg.thresholds) {
        Ok(v) => json!({ "blew_up": v.blew_up, "case": v.case }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    json!({
        "steps": run.records.len(),
        "final_eps": run.records.last().map(|r| r.eps),
        "any_blowup_flag": run.records.iter().any(|r| r.blowup_flag),
        "all_converged": run.records.iter().all(|r| r.converged),
        "mass_c1": run.mass_c1,
        "mass_c2": run.mass_c2,
        "partial": run.partial,
        "error": run.error,
        "cold_restarts": run.cold_restarts,
        "classification": classification,
    })
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    grid: TorusGrid,
    out: &'a Path,
    quiet: bool,
}

impl Ctx<'_> {
    fn log(&self, m: &str) {
        if !self.quiet {
            eprintln!("{m}");
        }
    }

    fn heatmaps(&self, s: &FieldPair) -> Result<(), CliError> {
        if self.cfg.heatmaps {
            output::export_heatmap(&s.u1, &self.out.join("u1.pgm"))?;
            output::export_heatmap(&s.u2, &self.out.join("u2.pgm"))?;
        }
        Ok(())
    }

    fn continuation(&self) -> Result<(ContinuationRun, Weight, Weight), CliError> {
        let (w1, w2) = (Weight::from_trig(&self.cfg.h1, self.grid), Weight::from_trig(&self.cfg.h2, self.grid));
        let schedule = self.cfg.schedule.clone().unwrap_or_else(default_schedule);
        self.log(&format!("continuation over {} eps values", schedule.len()));
        let run = continuation(&w1, &w2, &schedule, &self.cfg.solver, &self.cfg.thresholds)?;
        output::write_records(&self.out.join("records.csv"), &run.records)?;
        if let Some(s) = run.states.last() {
            self.heatmaps(s)?;
        }
        Ok((run, w1, w2))
    }
}

/// (status, result, exit code)
fn pipeline(mode: Mode, ctx: &Ctx) -> Result<(&'static str, Value, i32), CliError> {
    let cfg = ctx.cfg;
    let grid = ctx.grid;
    let mut opts = cfg.solver.clone();
    opts.seed = cfg.seed;
    match mode {
        Mode::Solve => {
            let (w1, w2) = (Weight::from_trig(&cfg.h1, grid), Weight::from_trig(&cfg.h2, grid));
            let rho = match (cfg.rho, cfg.eps) {
                (Some(r), _) => RhoPair::new(r[0], r[1])?,
                (None, Some(e)) => RhoPair::subcritical(e)?,
                (None, None) => return Err(CliError::Config("mode solve: need `eps` or `rho`".into())),
            };
            let init = if cfg.init_amplitude > 0.0 {
                random_init(grid, cfg.seed, cfg.init_amplitude)
            } else {
                default_init_pair(&w1, &w2)
            };
            ctx.log(&format!("solve at rho = ({}, {})", rho.rho1, rho.rho2));
            let r = minimize_rho(&w1, &w2, rho, &init, &opts)?;
            ctx.heatmaps(&r.state)?;
            let v = json!({
                "rho": [rho.rho1, rho.rho2],
                "f_value": r.f_value,
                "el_residual": r.el_residual,
                "grad_norm": r.grad_norm,
                "iterations": r.iterations,
                "converged": r.converged,
                "state": state_stats(&r.state, &w1, &w2),
            });
            Ok(if r.converged { ("ok", v, 0) } else { ("not_converged", v, 3) })
        }
        Mode::Continue => {
            let (run, _, _) = ctx.continuation()?;
            let v = run_json(&run, cfg);
            Ok(if run.partial { ("partial", v, 3) } else { ("ok", v, 0) })
        }
        Mode::Analyze => {
            let (run, _, _) = ctx.continuation()?;
            let state = run.states.last().ok_or_else(|| CliError::Numerical("no continuation step succeeded".into()))?;
            let report = analyze(state, &cfg.h1, &cfg.h2, cfg.ball_radius)?;
            let v = json!({ "continuation": run_json(&run, cfg), "report": to_value(&report) });
            Ok(if run.partial { ("partial", v, 3) } else { ("ok", v, 0) })
        }
        Mode::Bounds => {
            let lb = lower_bound(&cfg.h1, &cfg.h2, grid)?;
            let mut params = TestFamilyParams::new(lb.p1, lb.p2, cfg.l());
            if let Some(e) = &cfg.bounds.eps_list {
                params.eps_list = e.clone();
            }
            ctx.log(&format!("test family at {} eps values", params.eps_list.len()));
            let samples = family_samples(&cfg.h1, &cfg.h2, &params, RhoPair::unchecked(4.0 * PI, 4.0 * PI))?;
            let fit = fit_samples(&samples)?;
            Ok((
                "ok",
                json!({
                    "lower_bound": to_value(&lb),
                    "fit": to_value(&fit),
                    "predicted_c0": predicted_c0(&cfg.h1, &cfg.h2, lb.p1, lb.p2),
                    "predicted_c1": predicted_c1(&cfg.h1, &cfg.h2, lb.p1, lb.p2),
                }),
                0,
            ))
        }
        Mode::Verdict => {
            let v = verdict(&cfg.h1, &cfg.h2, grid)?;
            Ok(("ok", to_value(&v), 0))
        }
        Mode::ScalarKw => {
            let rho = cfg.rho_kw.ok_or_else(|| CliError::Config("mode scalar-kw: need `rho_kw`".into()))?;
            let w = Weight::from_trig(&cfg.h1, grid);
            let init = if cfg.init_amplitude > 0.0 {
                random_init(grid, cfg.seed, cfg.init_amplitude).u1
            } else {
                default_init(&w)
            };
            let r = solve_scalar_kw(&w, rho, &init, &opts)?;
            if cfg.heatmaps {
                output::export_heatmap(&r.state, &ctx.out.join("u.pgm"))?;
            }
            let cond = scalar_condition(&cfg.h1, 0.0, grid)?;
            let v = json!({
                "rho": rho,
                "f_value": r.f_value,
                "residual": r.residual,
                "grad_norm": r.grad_norm,
                "iterations": r.iterations,
                "converged": r.converged,
                "condition_holds": cond.holds,
                "min_margin": cond.min_margin,
            });
            Ok(if r.converged { ("ok", v, 0) } else { ("not_converged", v, 3) })
        }
    }
}

pub fn validate_summary(v: &Value) -> Result<(), CliError> {
    let schema: Value = serde_json::from_str(SUMMARY_SCHEMA).map_err(|e| CliError::Schema(e.to_string()))?;
    jsonschema::validate(&schema, v).map_err(|e| CliError::Schema(format!("{e} at {}", e.instance_path)))
}

/// Runs one mode and writes summary.json, timing.json and the mode's CSV / heatmaps into `out`.
/// Pipeline errors still produce a summary with status "error" before being returned.
pub fn run(mode: Mode, cfg: &RunConfig, out: &Path, quiet: bool) -> Result<RunOutcome, CliError> {
    cfg.validate(mode)?;
    let grid = TorusGrid::new(cfg.grid).map_err(|e| CliError::Config(format!("field `grid`: {e}")))?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let start = Instant::now();
    let ctx = Ctx { cfg, grid, out, quiet };
    let res = pipeline(mode, &ctx);
    let mut echo = cfg.clone();
    echo.out = None;
    echo.mode = Some(mode);
    echo.solver.seed = cfg.seed;
    let (status, result, error, code) = match &res {
        Ok((s, r, c)) => (*s, r.clone(), Value::Null, *c),
        Err(e) => ("error", Value::Null, Value::String(e.to_string()), e.exit_code()),
    };
    let summary = json!({
        "tool": "toda",
        "version": env!("CARGO_PKG_VERSION"),
        "mode": mode.name(),
        "status": status,
        "config": to_value(&echo),
        "result": result,
        "error": error,
    });
    validate_summary(&summary)?;
    output::write_json(&out.join("summary.json"), &summary)?;
    output::write_json(
        &out.join("timing.json"),
        &json!({ "mode": mode.name(), "wall_clock_s": start.elapsed().as_secs_f64() }),
    )?;
    res?;
    Ok(RunOutcome { summary, exit_code: code })
}
