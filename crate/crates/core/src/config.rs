//! TOML configuration documents.
//!
//! ```toml
//! [junction]
//! name = "double_track"
//! routes = [{ name = "r1", origin = "A", destination = "B" }, { name = "r2" }]
//! conflicts = [["r1", "r2"]]
//!
//! [[layouts]]            # optional further layouts over the same routes
//! name = "no_conflicts"
//! conflicts = []
//!
//! [program]
//! horizon = 60.0
//! demands = [{ route = "r1", regional = 4, high_speed = 1, service_time = 3.0 }]
//!
//! [params]               # every key optional
//! m = 5
//! choice_rate = 600.0
//! v_a = 0.8
//! v_b = 0.3
//! mu_grid = { min = 0.01, max = 1.0, step = 0.01 }
//! assess = ["r2"]        # or "all"
//! ```
//!
//! Unknown keys are rejected everywhere.

use serde::Deserialize;
use thiserror::Error;

use crate::analysis::{AnalysisError, AnalysisParams, LineAssignment, LineProgram, MuGrid, DEFAULT_SLOTS};
use crate::approx::{DEFAULT_V_A, DEFAULT_V_B};
use crate::ctmc::DEFAULT_CHOICE_RATE;
use crate::junction::{
    ClassCounts, ConflictMatrix, Demand, Junction, JunctionError, OperatingProgram, ProgramError,
    Route,
};
use crate::simulator::{SimConfig, SimError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{context}: unknown route '{name}'")]
    UnknownRoute { context: String, name: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Junction(#[from] JunctionError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    junction: RawJunction,
    #[serde(default)]
    layouts: Vec<RawLayout>,
    program: Option<RawProgram>,
    #[serde(default)]
    params: RawParams,
    #[serde(default)]
    simulation: RawSimulation,
    grid: Option<RawGrid>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJunction {
    name: String,
    routes: Vec<RawRoute>,
    #[serde(default)]
    conflicts: Vec<[String; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoute {
    name: String,
    #[serde(default)]
    origin: String,
    #[serde(default)]
    destination: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayout {
    name: String,
    conflicts: Vec<[String; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProgram {
    horizon: f64,
    demands: Vec<RawDemand>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemand {
    route: String,
    #[serde(default)]
    regional: u32,
    #[serde(default)]
    high_speed: u32,
    #[serde(default)]
    freight: u32,
    service_time: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    m: Option<u16>,
    choice_rate: Option<f64>,
    v_a: Option<f64>,
    v_b: Option<f64>,
    p_pt: Option<f64>,
    service_time: Option<f64>,
    mu_grid: Option<RawGridSpec>,
    p_loss_limit: Option<f64>,
    m_max: Option<u16>,
    assess: Option<RawAssess>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGridSpec {
    min: f64,
    max: f64,
    step: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawAssess {
    Keyword(String),
    Routes(Vec<String>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    runs: Option<usize>,
    hours: Option<f64>,
    warmup: Option<f64>,
    seed: Option<u64>,
    limit: Option<u32>,
    snapshot_interval: Option<f64>,
    mu: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    main_routes: Vec<String>,
    branch_routes: Vec<String>,
    programs: Vec<RawLineProgram>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLineProgram {
    name: String,
    #[serde(default)]
    regional: u32,
    #[serde(default)]
    high_speed: u32,
    #[serde(default)]
    freight: u32,
    #[serde(default = "default_horizon")]
    horizon: f64,
}

fn default_horizon() -> f64 {
    60.0
}

/// Which routes a capacity verdict is judged on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assess {
    /// The route with the most conflicts.
    Default,
    All,
    Routes(Vec<usize>),
}

impl Assess {
    pub fn resolve(&self, junction: &Junction, lambda: &[f64]) -> Vec<usize> {
        match self {
            Assess::Default => vec![crate::analysis::default_assessed(junction, lambda)],
            Assess::All => (0..junction.route_count()).collect(),
            Assess::Routes(r) => r.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub analysis: AnalysisParams,
    pub grid: MuGrid,
    /// `(min, max, step)` the grid was built from.
    pub mu_range: (f64, f64, f64),
    /// Uniform service time in minutes replacing the program's values.
    pub service_time: Option<f64>,
    pub p_loss_limit: f64,
    pub m_max: u16,
    pub assess: Assess,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub config: SimConfig,
    /// Uniform service rates to simulate; `None` uses the program's rates.
    pub mu: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lines: LineAssignment,
    pub programs: Vec<LineProgram>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// The primary layout followed by any further layouts.
    pub layouts: Vec<Junction>,
    pub program: Option<OperatingProgram>,
    pub params: Params,
    pub simulation: Simulation,
    pub grid: Option<GridSpec>,
}

impl Config {
    pub fn junction(&self) -> &Junction {
        &self.layouts[0]
    }

    pub fn require_program(&self) -> Result<&OperatingProgram, ConfigError> {
        self.program
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("config has no [program] section".into()))
    }
}

fn syntax_error(text: &str, err: &toml::de::Error) -> ConfigError {
    let (line, column) = match err.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    ConfigError::Syntax {
        line,
        column,
        message: err.message().trim().to_string(),
    }
}

struct Names<'a>(&'a [Route]);

impl Names<'_> {
    fn index(&self, name: &str, context: &str) -> Result<usize, ConfigError> {
        self.0
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| ConfigError::UnknownRoute {
                context: context.to_string(),
                name: name.to_string(),
            })
    }

    fn pairs(&self, raw: &[[String; 2]], context: &str) -> Result<Vec<(usize, usize)>, ConfigError> {
        raw.iter()
            .map(|[a, b]| Ok((self.index(a, context)?, self.index(b, context)?)))
            .collect()
    }

    fn list(&self, raw: &[String], context: &str) -> Result<Vec<usize>, ConfigError> {
        raw.iter().map(|n| self.index(n, context)).collect()
    }
}

fn positive(value: f64, what: &str) -> Result<f64, ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ConfigError::Invalid(format!("{what} must be positive, got {value}")))
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let raw: RawDocument = toml::from_str(text).map_err(|e| syntax_error(text, &e))?;

    let routes: Vec<Route> = raw
        .junction
        .routes
        .iter()
        .enumerate()
        .map(|(i, r)| Route::new(i, &r.name, &r.origin, &r.destination))
        .collect();
    let names = Names(&routes);
    let k = routes.len();
    let pairs = names.pairs(&raw.junction.conflicts, "junction conflicts")?;
    let primary = Junction::new(&raw.junction.name, routes.clone(), ConflictMatrix::from_pairs(k, &pairs)?)?;
    let mut layouts = vec![primary];
    for layout in &raw.layouts {
        let context = format!("layout '{}' conflicts", layout.name);
        let pairs = names.pairs(&layout.conflicts, &context)?;
        layouts.push(layouts[0].with_conflicts(&layout.name, ConflictMatrix::from_pairs(k, &pairs)?)?);
    }

    let program = match &raw.program {
        Some(p) => {
            let demands = p
                .demands
                .iter()
                .map(|d| {
                    let route = names.index(&d.route, "program demand")?;
                    let demand = Demand::new(route, ClassCounts::new(d.regional, d.high_speed, d.freight));
                    Ok(match d.service_time {
                        Some(t) => demand.with_service_time(t),
                        None => demand,
                    })
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;
            let program = OperatingProgram::new(demands, p.horizon);
            program.validate(&layouts[0])?;
            Some(program)
        }
        None => None,
    };

    let rp = &raw.params;
    if let Some(p) = rp.p_pt {
        if !(0.0..=1.0).contains(&p) {
            return Err(ConfigError::Invalid(format!("p_pt must lie in [0, 1], got {p}")));
        }
    }
    let slots = rp.m.unwrap_or(DEFAULT_SLOTS);
    if slots == 0 {
        return Err(ConfigError::Invalid("m must be at least 1".into()));
    }
    let analysis = AnalysisParams {
        slots,
        choice_rate: positive(rp.choice_rate.unwrap_or(DEFAULT_CHOICE_RATE), "choice_rate")?,
        v_a: rp.v_a.unwrap_or(DEFAULT_V_A),
        v_b: rp.v_b.unwrap_or(DEFAULT_V_B),
        p_pt: rp.p_pt,
        ..AnalysisParams::default()
    };
    if !(analysis.v_a >= 0.0 && analysis.v_b >= 0.0) {
        return Err(ConfigError::Invalid("v_a and v_b must be non-negative".into()));
    }
    let mu_range = match &rp.mu_grid {
        Some(g) => (g.min, g.max, g.step),
        None => (0.01, 1.0, 0.01),
    };
    let grid = MuGrid::range(mu_range.0, mu_range.1, mu_range.2)?;
    let p_loss_limit = rp.p_loss_limit.unwrap_or(0.001);
    if !(p_loss_limit > 0.0 && p_loss_limit < 1.0) {
        return Err(ConfigError::Invalid(format!(
            "p_loss_limit must lie in (0, 1), got {p_loss_limit}"
        )));
    }
    let assess = match &rp.assess {
        None => Assess::Default,
        Some(RawAssess::Keyword(w)) if w == "all" => Assess::All,
        Some(RawAssess::Keyword(w)) => {
            return Err(ConfigError::Invalid(format!(
                "assess must be \"all\" or a list of route names, got \"{w}\""
            )))
        }
        Some(RawAssess::Routes(list)) if list.is_empty() => {
            return Err(ConfigError::Invalid("assess lists no routes".into()))
        }
        Some(RawAssess::Routes(list)) => Assess::Routes(names.list(list, "params assess")?),
    };
    let params = Params {
        analysis,
        grid,
        mu_range,
        service_time: rp.service_time.map(|t| positive(t, "service_time")).transpose()?,
        p_loss_limit,
        m_max: rp.m_max.unwrap_or(20).max(1),
        assess,
    };

    let rs = &raw.simulation;
    let defaults = SimConfig::default();
    let sim = SimConfig {
        limit: rs.limit,
        hours: rs.hours.unwrap_or(defaults.hours),
        warmup: rs.warmup.unwrap_or(defaults.warmup),
        runs: rs.runs.unwrap_or(defaults.runs),
        seed: rs.seed.unwrap_or(defaults.seed),
        snapshot_interval: rs.snapshot_interval.unwrap_or(defaults.snapshot_interval),
        trace: false,
    };
    sim.validate()?;
    if let Some(mu) = &rs.mu {
        for &m in mu {
            positive(m, "simulation mu")?;
        }
    }
    let simulation = Simulation {
        config: sim,
        mu: rs.mu.clone(),
    };

    let grid = match &raw.grid {
        Some(g) => {
            let lines = LineAssignment {
                main: names.list(&g.main_routes, "grid main_routes")?,
                branch: names.list(&g.branch_routes, "grid branch_routes")?,
            };
            if g.programs.is_empty() {
                return Err(ConfigError::Invalid("grid lists no programs".into()));
            }
            let programs = g
                .programs
                .iter()
                .map(|p| {
                    let counts = ClassCounts::new(p.regional, p.high_speed, p.freight);
                    if counts.total() == 0 {
                        return Err(ConfigError::Invalid(format!("grid program '{}' has no trains", p.name)));
                    }
                    Ok(LineProgram::new(&p.name, counts, positive(p.horizon, "grid program horizon")?))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(GridSpec { lines, programs })
        }
        None => None,
    };

    Ok(Config {
        layouts,
        program,
        params,
        simulation,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[junction]
name = "pair"
routes = [{ name = "a" }, { name = "b" }]
conflicts = [["a", "b"]]
"#;

    #[test]
    fn defaults_are_applied() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.params.analysis.slots, 5);
        assert_eq!(c.params.analysis.choice_rate, 600.0);
        assert_eq!(c.params.analysis.v_a, 0.8);
        assert_eq!(c.params.analysis.v_b, 0.3);
        assert_eq!(c.params.grid.len(), 100);
        assert_eq!(c.params.assess, Assess::Default);
        assert!(c.program.is_none());
        assert!(c.junction().conflicts.conflicts(0, 1));
    }

    #[test]
    fn unknown_route_is_named() {
        let text = MINIMAL.replace(r#"[["a", "b"]]"#, r#"[["a", "zz"]]"#);
        let err = parse_config(&text).unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownRoute {
                context: "junction conflicts".into(),
                name: "zz".into()
            }
        );
        assert!(err.to_string().contains("'zz'"));
    }

    #[test]
    fn unknown_key_reports_position() {
        let text = format!("{MINIMAL}\n[params]\nslots = 3\n");
        match parse_config(&text).unwrap_err() {
            ConfigError::Syntax { line, column, message } => {
                assert_eq!(line, 8);
                assert_eq!(column, 1);
                assert!(message.contains("slots"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn assess_forms() {
        let all = format!("{MINIMAL}\n[params]\nassess = \"all\"\n");
        assert_eq!(parse_config(&all).unwrap().params.assess, Assess::All);
        let list = format!("{MINIMAL}\n[params]\nassess = [\"b\"]\n");
        assert_eq!(parse_config(&list).unwrap().params.assess, Assess::Routes(vec![1]));
        let bad = format!("{MINIMAL}\n[params]\nassess = \"worst\"\n");
        assert!(matches!(parse_config(&bad), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn program_and_layouts() {
        let text = format!(
            "{MINIMAL}\n[[layouts]]\nname = \"free\"\nconflicts = []\n\n[program]\nhorizon = 60\ndemands = [{{ route = \"b\", freight = 2, service_time = 4.0 }}]\n"
        );
        let c = parse_config(&text).unwrap();
        assert_eq!(c.layouts.len(), 2);
        assert!(!c.layouts[1].conflicts.conflicts(0, 1));
        let p = c.program.unwrap();
        assert_eq!(p.demands[0].route, 1);
        assert_eq!(p.demands[0].counts.freight, 2);
    }

    #[test]
    fn invalid_values() {
        let bad_m = format!("{MINIMAL}\n[params]\nm = 0\n");
        assert!(parse_config(&bad_m).is_err());
        let bad_grid = format!("{MINIMAL}\n[params]\nmu_grid = {{ min = 0.5, max = 0.1, step = 0.1 }}\n");
        assert!(matches!(parse_config(&bad_grid), Err(ConfigError::Analysis(_))));
        let dup = MINIMAL.replace(r#"{ name = "b" }"#, r#"{ name = "a" }"#);
        assert!(matches!(parse_config(&dup), Err(ConfigError::Junction(_)) | Err(ConfigError::UnknownRoute { .. })));
        let window = format!("{MINIMAL}\n[simulation]\nhours = 2\nwarmup = 1\n");
        assert!(matches!(parse_config(&window), Err(ConfigError::Simulation(_))));
        assert!(matches!(parse_config("junction = 3"), Err(ConfigError::Syntax { .. })));
    }
}
