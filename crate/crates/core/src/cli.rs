//! Batch runs: a flat `key = value` config in, JSON and CSV results out.
//!
//! Output layout under the chosen directory:
//!
//! * `summary.json` holds the trace result and the effective config.
//! * `iterations/NNN.json` holds covers, walk, component RLE and rects per iteration.
//! * `component.csv` has one row per rectangle per iteration, giving its center.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use crate::assembly::{trace, GridPlan, Schedule, TraceOptions, TraceResult};
use crate::error::{Error, Result};
use crate::problems::{builtin, Problem, LOGIT_LAMBDA};
use crate::spaces::StateSpace;

/// Validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: Option<String>,
    /// One expression per state coordinate; used when `problem` is unset.
    pub expr: Vec<String>,
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub x_points: Vec<usize>,
    pub y_lower: Vec<f64>,
    pub y_upper: Vec<f64>,
    pub lambda: f64,
    pub radius_x: f64,
    pub radius_y: f64,
    pub schedule_factor: f64,
    pub max_iters: usize,
    pub stability_eps: f64,
    pub cells_per_segment: usize,
    pub y_cells_per_radius: f64,
    pub min_y_cells: usize,
    pub tol: Option<f64>,
    pub inflation: f64,
    pub max_refines: usize,
    pub samples_per_rect: usize,
    pub walk_start: usize,
    pub lipschitz_samples: usize,
    pub seed: u64,
    pub calibrate_epsilon: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let grid = GridPlan::default();
        let opts = TraceOptions::default();
        Self {
            problem: Some("constant".into()),
            expr: Vec::new(),
            x_lower: vec![0.0],
            x_upper: vec![1.0],
            x_points: vec![201],
            y_lower: vec![0.0],
            y_upper: vec![1.0],
            lambda: LOGIT_LAMBDA,
            radius_x: 0.25,
            radius_y: 0.25,
            schedule_factor: 0.5,
            max_iters: opts.max_iters,
            stability_eps: opts.stability_eps,
            cells_per_segment: grid.cells_per_segment,
            y_cells_per_radius: grid.y_cells_per_radius,
            min_y_cells: grid.min_y_cells,
            tol: grid.tol,
            inflation: grid.inflation,
            max_refines: grid.max_refines,
            samples_per_rect: opts.samples_per_rect,
            walk_start: opts.walk_start,
            lipschitz_samples: opts.lipschitz_samples,
            seed: opts.seed,
            calibrate_epsilon: opts.calibrate_epsilon,
        }
    }
}

fn cfg_err(line: usize, field: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        field: field.to_string(),
        msg: msg.into(),
    }
}

fn one<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| cfg_err(line, key, format!("cannot parse `{}`", v.trim())))
}

fn list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| one(line, key, s)).collect()
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys,
    /// repeated keys and invalid values are errors naming line and field.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| cfg_err(line, body, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return Err(cfg_err(line, key, format!("already set on line {prev}")));
            }
            match key {
                "problem" => {
                    c.problem = Some(value.to_string());
                }
                "expr" => {
                    c.expr = value.split(';').map(|s| s.trim().to_string()).collect();
                    if !seen.contains_key("problem") {
                        c.problem = None;
                    }
                }
                "x_lower" => c.x_lower = list(line, key, value)?,
                "x_upper" => c.x_upper = list(line, key, value)?,
                "x_points" => c.x_points = list(line, key, value)?,
                "y_lower" => c.y_lower = list(line, key, value)?,
                "y_upper" => c.y_upper = list(line, key, value)?,
                "lambda" => c.lambda = one(line, key, value)?,
                "radius_x" => c.radius_x = one(line, key, value)?,
                "radius_y" => c.radius_y = one(line, key, value)?,
                "schedule_factor" => c.schedule_factor = one(line, key, value)?,
                "max_iters" => c.max_iters = one(line, key, value)?,
                "stability_eps" => c.stability_eps = one(line, key, value)?,
                "cells_per_segment" => c.cells_per_segment = one(line, key, value)?,
                "y_cells_per_radius" => c.y_cells_per_radius = one(line, key, value)?,
                "min_y_cells" => c.min_y_cells = one(line, key, value)?,
                "tol" => c.tol = Some(one(line, key, value)?),
                "inflation" => c.inflation = one(line, key, value)?,
                "max_refines" => c.max_refines = one(line, key, value)?,
                "samples_per_rect" => c.samples_per_rect = one(line, key, value)?,
                "walk_start" => c.walk_start = one(line, key, value)?,
                "lipschitz_samples" => c.lipschitz_samples = one(line, key, value)?,
                "seed" => c.seed = one(line, key, value)?,
                "calibrate_epsilon" => c.calibrate_epsilon = Some(one(line, key, value)?),
                _ => return Err(cfg_err(line, key, "unknown key")),
            }
        }
        c.validate_at(&seen)?;
        Ok(c)
    }

    /// Checks value ranges; errors name the field and, when known, its line.
    pub fn validate(&self) -> Result<()> {
        self.validate_at(&HashMap::new())
    }

    fn validate_at(&self, lines: &HashMap<String, usize>) -> Result<()> {
        let fail = |field: &str, msg: String| cfg_err(lines.get(field).copied().unwrap_or(0), field, msg);
        let positive = [
            ("radius_x", self.radius_x),
            ("radius_y", self.radius_y),
            ("y_cells_per_radius", self.y_cells_per_radius),
            ("lambda", self.lambda),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(fail(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.schedule_factor > 0.0 && self.schedule_factor < 1.0) {
            return Err(fail(
                "schedule_factor",
                format!("must lie in (0, 1), got {}", self.schedule_factor),
            ));
        }
        let nonneg = [
            ("stability_eps", self.stability_eps),
            ("inflation", self.inflation),
            ("tol", self.tol.unwrap_or(0.0)),
        ];
        for (field, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(fail(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        let counts = [
            ("max_iters", self.max_iters),
            ("cells_per_segment", self.cells_per_segment),
            ("samples_per_rect", self.samples_per_rect),
            ("lipschitz_samples", self.lipschitz_samples.saturating_sub(1)),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(fail(field, "must be positive".into()));
            }
        }
        if let Some(eps) = self.calibrate_epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(fail("calibrate_epsilon", format!("must be finite and > 0, got {eps}")));
            }
        }
        if self.problem.is_none() {
            if self.expr.is_empty() {
                return Err(fail("expr", "set `problem` or `expr`".into()));
            }
            let d = self.x_lower.len();
            if self.x_upper.len() != d || self.x_points.len() != d {
                return Err(fail("x_points", "x_lower, x_upper and x_points must have equal length".into()));
            }
            if self.y_upper.len() != self.y_lower.len() {
                return Err(fail("y_upper", "y_lower and y_upper must have equal length".into()));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::geometric(self.radius_x, self.radius_y, self.schedule_factor, self.max_iters)
    }

    pub fn trace_options(&self) -> TraceOptions {
        TraceOptions {
            grid: GridPlan {
                cells_per_segment: self.cells_per_segment,
                y_cells_per_radius: self.y_cells_per_radius,
                min_y_cells: self.min_y_cells,
                tol: self.tol,
                inflation: self.inflation,
                max_refines: self.max_refines,
            },
            max_iters: self.max_iters,
            stability_eps: self.stability_eps,
            samples_per_rect: self.samples_per_rect,
            walk_start: self.walk_start,
            lipschitz_samples: self.lipschitz_samples,
            seed: self.seed,
            calibrate_epsilon: self.calibrate_epsilon,
        }
    }

    /// Instantiates the configured problem.
    pub fn problem(&self) -> Result<Problem> {
        match self.problem.as_deref() {
            Some("logit-coordination") => Problem::logit(self.lambda),
            Some(name) => builtin(name),
            None => Problem::from_exprs(
                &self.expr,
                &self.x_lower,
                &self.x_upper,
                &self.x_points,
                StateSpace::new(self.y_lower.clone(), self.y_upper.clone())?,
            ),
        }
    }
}

/// Outcome of [`run`].
#[derive(Debug)]
pub struct RunOutcome {
    pub result: TraceResult,
    pub problem: Problem,
}

impl RunOutcome {
    /// Process exit code: 0 converged, 2 not converged.
    pub fn exit_code(&self) -> i32 {
        if self.result.converged {
            0
        } else {
            2
        }
    }
}

/// Runs the configured trace and writes all outputs under `out`.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let problem = config.problem()?;
    let schedule = config.schedule()?;
    let result = trace(Arc::clone(&problem.map), &schedule, &config.trace_options())?;
    write_outputs(config, &problem, &result, out)?;
    Ok(RunOutcome { result, problem })
}

fn write_outputs(config: &RunConfig, problem: &Problem, result: &TraceResult, out: &Path) -> Result<()> {
    let iter_dir = out.join("iterations");
    fs::create_dir_all(&iter_dir)?;
    let summary = json!({
        "problem": problem.name,
        "config": config,
        "result": result,
        "final_rect_count": result.final_rects.len(),
    });
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;

    let dx = problem.space_x.dim();
    let dy = problem.space_y.dims();
    let mut csv = String::from("iter");
    for j in 0..dx {
        write!(csv, ",x{j}").expect("string write");
    }
    for j in 0..dy {
        write!(csv, ",y{j}").expect("string write");
    }
    csv.push_str(",radius_x,radius_y\n");

    for (record, detail) in result.history.iter().zip(&result.details) {
        let rects: Vec<serde_json::Value> = detail
            .rects
            .rects
            .iter()
            .zip(detail.rects.boxes())
            .map(|(&(a, b), bx)| json!({"x_element": a, "y_element": b, "lower": bx.lower, "upper": bx.upper}))
            .collect();
        let doc = json!({
            "record": record,
            "cover_x": &*detail.cover_x,
            "cover_y": &*detail.cover_y,
            "walk": detail.walk,
            "component": {
                "grid": detail.component.grid,
                "projection_complete": detail.component.projection_complete,
                "columns_hit": detail.component.columns_hit,
                "rle": detail.component.rle(),
            },
            "rects": rects,
        });
        fs::write(
            iter_dir.join(format!("{:03}.json", record.iteration)),
            serde_json::to_string(&doc)? + "\n",
        )?;
        for bx in detail.rects.boxes() {
            write!(csv, "{}", record.iteration).expect("string write");
            for (lo, hi) in bx.lower.iter().zip(&bx.upper) {
                write!(csv, ",{}", 0.5 * (lo + hi)).expect("string write");
            }
            writeln!(csv, ",{},{}", record.radius_x, record.radius_y).expect("string write");
        }
    }
    fs::write(out.join("component.csv"), csv)?;
    Ok(())
}
