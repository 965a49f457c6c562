//! Command-line front end: reads a configuration, runs one workflow and writes
//! a CSV (or PRISM text) plus a short summary on standard output.
//!
//! Exit status: 0 success, 1 infeasible verdict, 2 input error, 3 solver
//! failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::analysis::{self, AnalysisError, AnalysisParams, Load, MuGrid, RouteMeasures};
use crate::bundled;
use crate::config::{parse_config, Assess, Config, ConfigError};
use crate::ctmc::{build_generator, export_prism, CtmcError, PrismMetadata, SpaceOptions, StateSpace};
use crate::junction::{arrival_rates, passenger_ratio, service_rates, Junction, ProgramError, RateSet};
use crate::simulator::{simulate, SimError};
use crate::solver::{min_waiting_slots, SizingError, SolverError};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "JUNCTION_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "junction", version, about = "Timetable-independent capacity analysis of railway junctions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file, or `bundled:<name>` for a shipped example.
    #[arg(long, global = true, default_value = "bundled:table2_junction")]
    pub config: String,
    /// Directory receiving the output files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Restrict to one layout (by name).
    #[arg(long, global = true)]
    pub layout: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu_min: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu_max: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu_step: Option<f64>,
    /// Uniform service rate for analyze, size-queue, simulate and export-prism.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Waiting slots per route.
    #[arg(long, global = true)]
    pub m: Option<u16>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub choice_rate: Option<f64>,
    /// Assessed routes, comma separated, or `all`.
    #[arg(long, global = true)]
    pub routes: Option<String>,
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub hours: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Waiting-train limit in the simulation; 0 removes the limit.
    #[arg(long, global = true)]
    pub limit: Option<u32>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub p_loss_limit: Option<f64>,
    #[arg(long, global = true)]
    pub m_max: Option<u16>,
    /// Write per-run queue traces from simulate.
    #[arg(long, global = true)]
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Measures at fixed rates.
    Analyze,
    /// Service-rate sweep per layout.
    Sweep,
    /// Maximum mean service time of every layout against the first.
    Compare,
    /// Maximum mean service time over all program combinations.
    Grid,
    /// Smallest number of waiting slots meeting the loss limit.
    SizeQueue,
    /// Discrete-event simulation.
    Simulate,
    /// PRISM text of the chain.
    ExportPrism,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Sweep => "sweep",
            Command::Compare => "compare",
            Command::Grid => "grid",
            Command::SizeQueue => "size-queue",
            Command::Simulate => "simulate",
            Command::ExportPrism => "export-prism",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

macro_rules! input_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        }
    )*};
}
input_error!(ConfigError, ProgramError, SimError, std::io::Error, csv::Error);

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Model(m) => m.into(),
            e => CliError::Solver(e.to_string()),
        }
    }
}

impl From<CtmcError> for CliError {
    fn from(e: CtmcError) -> Self {
        match e {
            CtmcError::StateCap(_) => CliError::Solver(e.to_string()),
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Solver { .. } => CliError::Solver(e.to_string()),
            AnalysisError::Model(m) => m.into(),
            e => CliError::Input(e.to_string()),
        }
    }
}

/// What a successful command reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub infeasible: bool,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.infeasible)
    }
}

fn load_text(spec: &str) -> Result<String, CliError> {
    if let Some(name) = spec.strip_prefix("bundled:") {
        return bundled::get(name).map(str::to_string).ok_or_else(|| {
            let names: Vec<_> = bundled::names().collect();
            CliError::Input(format!("no bundled config '{name}'; available: {}", names.join(", ")))
        });
    }
    fs::read_to_string(spec).map_err(|e| CliError::Input(format!("cannot read {spec}: {e}")))
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Configuration with command-line overrides applied.
struct Context {
    cli_command: Command,
    config: Config,
    hash: String,
    source: String,
    out: PathBuf,
    assess_override: Option<Assess>,
    mu: Option<f64>,
    trace: bool,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self, CliError> {
        let text = load_text(&cli.config)?;
        let mut config = parse_config(&text).map_err(|e| CliError::Input(format!("{}: {e}", cli.config)))?;
        let p = &mut config.params;
        if let Some(m) = cli.m {
            if m == 0 {
                return Err(CliError::Input("--m must be at least 1".into()));
            }
            p.analysis.slots = m;
        }
        if let Some(c) = cli.choice_rate {
            if !(c > 0.0 && c.is_finite()) {
                return Err(CliError::Input(format!("--choice-rate must be positive, got {c}")));
            }
            p.analysis.choice_rate = c;
        }
        if cli.mu_min.is_some() || cli.mu_max.is_some() || cli.mu_step.is_some() {
            let (min, max, step) = p.mu_range;
            p.mu_range = (cli.mu_min.unwrap_or(min), cli.mu_max.unwrap_or(max), cli.mu_step.unwrap_or(step));
            p.grid = MuGrid::range(p.mu_range.0, p.mu_range.1, p.mu_range.2)?;
        }
        if let Some(l) = cli.p_loss_limit {
            if !(l > 0.0 && l < 1.0) {
                return Err(CliError::Input(format!("--p-loss-limit must lie in (0, 1), got {l}")));
            }
            p.p_loss_limit = l;
        }
        if let Some(m) = cli.m_max {
            p.m_max = m.max(1);
        }
        if let Some(mu) = cli.mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(CliError::Input(format!("--mu must be positive, got {mu}")));
            }
        }
        let s = &mut config.simulation.config;
        if let Some(r) = cli.runs {
            s.runs = r;
        }
        if let Some(h) = cli.hours {
            s.hours = h;
        }
        if let Some(seed) = cli.seed {
            s.seed = seed;
        }
        if let Some(l) = cli.limit {
            s.limit = (l > 0).then_some(l);
        }
        s.validate()?;
        if let Some(name) = &cli.layout {
            let chosen: Vec<Junction> = config.layouts.iter().filter(|j| &j.name == name).cloned().collect();
            if chosen.is_empty() {
                let names: Vec<_> = config.layouts.iter().map(|j| j.name.as_str()).collect();
                return Err(CliError::Input(format!("unknown layout '{name}'; available: {}", names.join(", "))));
            }
            config.layouts = chosen;
        }
        let assess_override = match cli.routes.as_deref() {
            None => None,
            Some("all") => Some(Assess::All),
            Some(list) => {
                let j = &config.layouts[0];
                let routes = list
                    .split(',')
                    .map(|n| {
                        let n = n.trim();
                        j.route_index(n)
                            .ok_or_else(|| CliError::Input(format!("--routes: unknown route '{n}'")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Some(Assess::Routes(routes))
            }
        };
        Ok(Self {
            cli_command: cli.command,
            config,
            hash: sha256_hex(&text),
            source: cli.config.clone(),
            out: cli.out.clone(),
            assess_override,
            mu: cli.mu,
            trace: cli.trace,
        })
    }

    fn params(&self) -> &AnalysisParams {
        &self.config.params.analysis
    }

    fn junction(&self) -> &Junction {
        self.config.junction()
    }

    fn assess(&self) -> &Assess {
        self.assess_override.as_ref().unwrap_or(&self.config.params.assess)
    }

    fn names(&self, routes: &[usize]) -> String {
        routes
            .iter()
            .map(|&i| self.junction().routes[i].name.as_str())
            .collect::<Vec<_>>()
            .join("|")
    }

    /// `#` lines preceding every CSV.
    fn provenance(&self, extra: &[(&str, String)]) -> String {
        let p = self.params();
        let (min, max, step) = self.config.params.mu_range;
        let mut s = String::new();
        let _ = writeln!(s, "# tool: junction {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "# command: {}", self.cli_command.name());
        let _ = writeln!(s, "# config: {}", self.source);
        let _ = writeln!(s, "# config_sha256: {}", self.hash);
        let _ = writeln!(s, "# m: {}", p.slots);
        let _ = writeln!(s, "# choice_rate: {}", p.choice_rate);
        let _ = writeln!(s, "# v_a: {}", p.v_a);
        let _ = writeln!(s, "# v_b: {}", p.v_b);
        let _ = writeln!(s, "# mu_grid: {min}..{max} step {step}");
        for (k, v) in extra {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s
    }

    fn write_csv(&self, file: &str, provenance: String, header: &[&str], rows: Vec<Vec<String>>) -> Result<PathBuf, CliError> {
        let mut buf = provenance.into_bytes();
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(&r)?;
            }
            w.flush()?;
        }
        self.write_file(file, &buf)
    }

    fn write_file(&self, file: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", self.out.display())))?;
        let path = self.out.join(file);
        fs::write(&path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// Per-route rates from the program, `--mu`, or the service-time override.
    fn fixed_rates(&self, junction: &Junction) -> Result<(RateSet, f64), CliError> {
        let program = self.config.require_program()?;
        let lambda = arrival_rates(program, junction)?;
        let mu = match self.mu {
            Some(mu) => vec![mu; lambda.len()],
            None => service_rates(program, junction, self.config.params.service_time)?,
        };
        let p = self.params();
        let rates = RateSet::new(lambda, mu, p.v_a, p.v_b)?;
        let p_pt = match p.p_pt {
            Some(v) => v,
            None => passenger_ratio(program)?,
        };
        Ok((rates, p_pt))
    }

    fn load(&self, junction: &Junction) -> Result<Load, CliError> {
        let program = self.config.require_program()?;
        Ok(Load::from_program(program, junction, self.params().p_pt)?)
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn measure_row(prefix: Vec<String>, m: &RouteMeasures) -> Vec<String> {
    let mut row = prefix;
    row.extend([num(m.e_lw), num(m.rho), num(m.gamma), num(m.threshold), m.pass.to_string()]);
    row
}

fn cmd_analyze(ctx: &Context) -> Result<Outcome, CliError> {
    let j = ctx.junction();
    let (rates, p_pt) = ctx.fixed_rates(j)?;
    let measures = analysis::analyze(j, &rates, p_pt, ctx.params())?;
    let assessed = ctx.assess().resolve(j, &rates.lambda);
    let pass = assessed.iter().all(|&i| measures[i].pass);
    let mut summary = format!("layout {} (p_pt = {p_pt})\n", j.name);
    let rows = measures
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let _ = writeln!(
                summary,
                "  {:>6}: E_LW = {:.6}  p_loss = {:.6}  limit = {:.6}  {}",
                j.routes[i].name,
                m.e_lw,
                m.p_loss,
                m.threshold,
                if m.pass { "ok" } else { "exceeds limit" }
            );
            vec![
                j.name.clone(),
                j.routes[i].name.clone(),
                num(rates.lambda[i]),
                num(rates.mu[i]),
                num(m.e_lw),
                num(m.p_loss),
                num(m.rho),
                num(m.gamma),
                num(m.threshold),
                m.pass.to_string(),
            ]
        })
        .collect();
    let _ = writeln!(summary, "verdict on {}: {}", ctx.names(&assessed), if pass { "sufficient" } else { "insufficient" });
    let prov = ctx.provenance(&[("p_pt", num(p_pt)), ("assessed", ctx.names(&assessed))]);
    let file = ctx.write_csv(
        "analyze.csv",
        prov,
        &["layout", "route", "lambda", "mu", "e_lw", "p_loss", "rho", "gamma", "threshold", "pass"],
        rows,
    )?;
    Ok(Outcome {
        infeasible: !pass,
        files: vec![file],
        summary,
    })
}

fn cmd_sweep(ctx: &Context) -> Result<Outcome, CliError> {
    let mut rows = Vec::new();
    let mut summary = String::new();
    let mut infeasible = false;
    let primary = ctx.junction();
    let load = ctx.load(primary)?;
    let assessed = ctx.assess().resolve(primary, &load.lambda);
    for j in &ctx.config.layouts {
        let result = analysis::sweep(j, &load, &ctx.config.params.grid, ctx.params())?;
        for p in &result.points {
            for (i, m) in p.routes.iter().enumerate() {
                rows.push(measure_row(vec![j.name.clone(), num(p.mu), j.routes[i].name.clone()], m));
            }
        }
        let v = analysis::min_service_rate(&result, &assessed);
        infeasible |= !v.feasible();
        let _ = writeln!(
            summary,
            "{}: mu_min = {}  b_max = {}",
            j.name,
            v.mu_min.map_or("infeasible on grid".into(), num),
            v.b_max.map_or("-".into(), |b| format!("{b:.4} min"))
        );
    }
    let prov = ctx.provenance(&[("p_pt", num(ctx.params().p_pt.unwrap_or(load.p_pt))), ("assessed", ctx.names(&assessed))]);
    let file = ctx.write_csv(
        "sweep.csv",
        prov,
        &["layout", "mu", "route", "e_lw", "rho", "gamma", "threshold", "pass"],
        rows,
    )?;
    Ok(Outcome {
        infeasible,
        files: vec![file],
        summary,
    })
}

fn cmd_compare(ctx: &Context) -> Result<Outcome, CliError> {
    let layouts = &ctx.config.layouts;
    let load = ctx.load(&layouts[0])?;
    let assessed = ctx.assess().resolve(&layouts[0], &load.lambda);
    let c = analysis::compare_layouts(layouts, &load, &ctx.config.params.grid, ctx.params(), Some(&assessed))?;
    let mut summary = String::new();
    let rows = layouts
        .iter()
        .zip(&c.verdicts)
        .zip(&c.relative)
        .map(|((j, v), rel)| {
            let _ = writeln!(
                summary,
                "{}: b_max = {}  relative to {}: {}",
                j.name,
                v.b_max.map_or("infeasible".into(), |b| format!("{b:.4} min")),
                layouts[0].name,
                rel.map_or("-".into(), |r| format!("{:+.2} %", 100.0 * r))
            );
            vec![j.name.clone(), opt(v.mu_min), opt(v.b_max), opt(*rel)]
        })
        .collect();
    let prov = ctx.provenance(&[
        ("p_pt", num(ctx.params().p_pt.unwrap_or(load.p_pt))),
        ("assessed", ctx.names(&assessed)),
        ("baseline", layouts[0].name.clone()),
    ]);
    let file = ctx.write_csv("compare.csv", prov, &["layout", "mu_min", "b_max", "relative_difference"], rows)?;
    Ok(Outcome {
        infeasible: c.verdicts.iter().any(|v| !v.feasible()),
        files: vec![file],
        summary,
    })
}

fn cmd_grid(ctx: &Context) -> Result<Outcome, CliError> {
    let spec = ctx
        .config
        .grid
        .as_ref()
        .ok_or_else(|| CliError::Input("config has no [grid] section".into()))?;
    let j = ctx.junction();
    // Equal nominal loads, so the default falls back to conflicts and order.
    let assessed = ctx.assess().resolve(j, &vec![1.0; j.route_count()]);
    let cells = analysis::combination_grid(
        &spec.programs,
        &spec.programs,
        &ctx.config.layouts,
        &spec.lines,
        &ctx.config.params.grid,
        ctx.params(),
        &assessed,
    )?;
    let infeasible = cells.iter().filter(|c| !c.verdict.feasible()).count();
    let summary = format!(
        "{} cells ({} programs squared x {} layouts), {} infeasible on grid\n",
        cells.len(),
        spec.programs.len(),
        ctx.config.layouts.len(),
        infeasible
    );
    let rows = cells
        .iter()
        .map(|c| vec![c.main.clone(), c.branch.clone(), c.layout.clone(), opt(c.verdict.mu_min), opt(c.verdict.b_max)])
        .collect();
    let p_pt = ctx.params().p_pt.map_or("pooled per combination".to_string(), num);
    let prov = ctx.provenance(&[("p_pt", p_pt), ("assessed", ctx.names(&assessed))]);
    let file = ctx.write_csv("grid.csv", prov, &["main_program", "branch_program", "layout", "mu_min", "b_max"], rows)?;
    Ok(Outcome {
        infeasible: infeasible > 0,
        files: vec![file],
        summary,
    })
}

fn cmd_size_queue(ctx: &Context) -> Result<Outcome, CliError> {
    let j = ctx.junction();
    let (rates, _) = ctx.fixed_rates(j)?;
    let p = ctx.params();
    let limit = ctx.config.params.p_loss_limit;
    let (slots, trace) = match min_waiting_slots(j, &rates, limit, ctx.config.params.m_max, p.choice_rate, &p.solver) {
        Ok(s) => (Some(s.slots), s.trace),
        Err(SizingError::NotSatisfied { trace, .. }) => (None, trace),
        Err(SizingError::Limit(l)) => return Err(CliError::Input(format!("loss limit {l} outside (0, 1)"))),
        Err(SizingError::Solver(e)) => return Err(e.into()),
    };
    let rows = trace
        .iter()
        .enumerate()
        .map(|(i, p)| vec![(i + 1).to_string(), num(*p), (*p <= limit).to_string()])
        .collect();
    let prov = ctx.provenance(&[("p_loss_limit", num(limit)), ("m_max", ctx.config.params.m_max.to_string())]);
    let file = ctx.write_csv("size_queue.csv", prov, &["m", "max_p_loss", "pass"], rows)?;
    let summary = match slots {
        Some(m) => format!("{}: {m} waiting slots keep every route's loss at or below {limit}\n", j.name),
        None => format!("{}: no m up to {} meets the loss limit {limit}\n", j.name, ctx.config.params.m_max),
    };
    Ok(Outcome {
        infeasible: slots.is_none(),
        files: vec![file],
        summary,
    })
}

fn cmd_simulate(ctx: &Context) -> Result<Outcome, CliError> {
    let j = ctx.junction();
    let mut sim = ctx.config.simulation.config.clone();
    sim.trace = ctx.trace;
    let program = ctx.config.require_program()?;
    let lambda = arrival_rates(program, j)?;
    let p = ctx.params();
    let rate_sets: Vec<RateSet> = match (ctx.mu, &ctx.config.simulation.mu) {
        (Some(mu), _) => vec![RateSet::uniform_mu(lambda, mu, p.v_a, p.v_b)?],
        (None, Some(list)) => list
            .iter()
            .map(|&mu| RateSet::uniform_mu(lambda.clone(), mu, p.v_a, p.v_b))
            .collect::<Result<_, _>>()?,
        (None, None) => vec![ctx.fixed_rates(j)?.0],
    };
    let mut rows = Vec::new();
    let mut files = Vec::new();
    let mut summary = String::new();
    for rates in &rate_sets {
        let result = simulate(j, rates, &sim)?;
        for (i, r) in result.routes.iter().enumerate() {
            rows.push(vec![num(rates.mu[i]), j.routes[i].name.clone(), num(r.mean_queue), num(r.sigma), num(r.p_loss)]);
        }
        let _ = writeln!(
            summary,
            "mu = {}: mean waiting trains {}",
            num(rates.mu[0]),
            result
                .routes
                .iter()
                .zip(&j.routes)
                .map(|(r, route)| format!("{} {:.4} (sigma {:.4})", route.name, r.mean_queue, r.sigma))
                .collect::<Vec<_>>()
                .join(", ")
        );
        if ctx.trace {
            let mut header = vec!["minute".to_string()];
            header.extend(j.routes.iter().map(|r| r.name.clone()));
            for (k, run) in result.runs.iter().enumerate() {
                let Some(trace) = &run.trace else { continue };
                let rows = trace
                    .iter()
                    .map(|(t, q)| std::iter::once(num(*t)).chain(q.iter().map(|x| x.to_string())).collect())
                    .collect();
                let header: Vec<&str> = header.iter().map(String::as_str).collect();
                let prov = ctx.provenance(&[("mu", num(rates.mu[0])), ("run", k.to_string()), ("seed", sim.seed.to_string())]);
                files.push(ctx.write_csv(&format!("trace_mu{}_run{k}.csv", num(rates.mu[0])), prov, &header, rows)?);
            }
        }
    }
    let prov = ctx.provenance(&[
        ("runs", sim.runs.to_string()),
        ("hours", num(sim.hours)),
        ("warmup", num(sim.warmup)),
        ("seed", sim.seed.to_string()),
        ("limit", sim.limit.map_or("none".into(), |l| l.to_string())),
        ("snapshot_interval", num(sim.snapshot_interval)),
    ]);
    files.insert(
        0,
        ctx.write_csv("simulate.csv", prov, &["mu", "route", "mean_queue", "sigma", "p_loss_empirical"], rows)?,
    );
    Ok(Outcome {
        infeasible: false,
        files,
        summary,
    })
}

fn cmd_export_prism(ctx: &Context) -> Result<Outcome, CliError> {
    let j = ctx.junction();
    let (rates, _) = ctx.fixed_rates(j)?;
    let p = ctx.params();
    let space = StateSpace::build_with(j, p.slots, &SpaceOptions::for_rates(&rates.lambda))?;
    let (generator, _) = build_generator(&space, &rates, p.choice_rate)?;
    let text = export_prism(
        &space,
        &generator,
        &PrismMetadata {
            lambda: rates.lambda.clone(),
            mu: rates.mu.clone(),
            choice_rate: p.choice_rate,
        },
    );
    let file = ctx.write_file(&format!("{}.prism", j.name), text.as_bytes())?;
    Ok(Outcome {
        infeasible: false,
        summary: format!("{}: {} states, {} transitions\n", j.name, space.len(), generator.nnz()),
        files: vec![file],
    })
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let ctx = Context::new(cli)?;
    match cli.command {
        Command::Analyze => cmd_analyze(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
        Command::Compare => cmd_compare(&ctx),
        Command::Grid => cmd_grid(&ctx),
        Command::SizeQueue => cmd_size_queue(&ctx),
        Command::Simulate => cmd_simulate(&ctx),
        Command::ExportPrism => cmd_export_prism(&ctx),
    }
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("{WORKERS_ENV} must be a positive integer, got '{value}'")))?;
    if n == 0 {
        return Err(CliError::Input(format!("{WORKERS_ENV} must be at least 1")));
    }
    #[cfg(feature = "parallel")]
    {
        // A second call fails harmlessly when the pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match run(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", display(f));
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}
