//! Capacity workflows: service-rate sweeps, minimum service rate and maximum
//! mean service time, layout comparison and operating-program grids.

use thiserror::Error;

use crate::approx::{
    gi_correction_factor, model_threshold, waiting_threshold, ApproxError, CorrectionParams,
    DEFAULT_V_A, DEFAULT_V_B,
};
use crate::ctmc::{build_generator, CtmcError, SpaceOptions, StateSpace, DEFAULT_CHOICE_RATE};
use crate::junction::{
    arrival_rates, passenger_ratio, ClassCounts, Demand, Junction, OperatingProgram, ProgramError,
    RateSet,
};
use crate::solver::{
    expected_queue_length, loss_probability, stationary_distribution, SolverError, SolverOptions,
};

/// Default number of waiting slots per route.
pub const DEFAULT_SLOTS: u16 = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Model(#[from] CtmcError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error("solve failed at mu = {mu}: {source}")]
    Solver { mu: f64, source: SolverError },
    #[error("invalid service-rate grid: {0}")]
    Grid(String),
    #[error("route {route} out of range for {routes} routes")]
    Route { route: usize, routes: usize },
    #[error("layouts differ in their routes: {0}")]
    Layouts(String),
    #[error("at least {0} layouts are required")]
    TooFewLayouts(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisParams {
    pub slots: u16,
    pub choice_rate: f64,
    pub v_a: f64,
    pub v_b: f64,
    /// Overrides the passenger ratio derived from the program.
    pub p_pt: Option<f64>,
    pub solver: SolverOptions,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            slots: DEFAULT_SLOTS,
            choice_rate: DEFAULT_CHOICE_RATE,
            v_a: DEFAULT_V_A,
            v_b: DEFAULT_V_B,
            p_pt: None,
            solver: SolverOptions::default(),
        }
    }
}

/// Arrival rates together with the passenger ratio that sets the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub lambda: Vec<f64>,
    pub p_pt: f64,
}

impl Load {
    pub fn new(lambda: Vec<f64>, p_pt: f64) -> Result<Self, AnalysisError> {
        if !(0.0..=1.0).contains(&p_pt) {
            return Err(ApproxError::PassengerRatio(p_pt).into());
        }
        if lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(ProgramError::ArrivalRate.into());
        }
        Ok(Self { lambda, p_pt })
    }

    /// `λ` from the program; `p_pt` pooled over all its trains unless
    /// `p_pt_override` is given.
    pub fn from_program(
        program: &OperatingProgram,
        junction: &Junction,
        p_pt_override: Option<f64>,
    ) -> Result<Self, AnalysisError> {
        let lambda = arrival_rates(program, junction)?;
        let p_pt = match p_pt_override {
            Some(p) => p,
            None => passenger_ratio(program)?,
        };
        Self::new(lambda, p_pt)
    }
}

/// Strictly increasing positive service rates, trains per minute.
#[derive(Debug, Clone, PartialEq)]
pub struct MuGrid {
    values: Vec<f64>,
}

impl MuGrid {
    /// `min, min + step, …` up to `max` inclusive. Values are rounded to
    /// twelve decimals so that `0.07` stays `0.07`.
    pub fn range(min: f64, max: f64, step: f64) -> Result<Self, AnalysisError> {
        if !(min > 0.0 && max >= min && step > 0.0 && max.is_finite()) {
            return Err(AnalysisError::Grid(format!(
                "need 0 < min <= max and step > 0, got min={min} max={max} step={step}"
            )));
        }
        let n = ((max - min) / step + 1e-9).floor() as usize + 1;
        let values = (0..n)
            .map(|i| ((min + i as f64 * step) * 1e12).round() / 1e12)
            .collect();
        Self::from_values(values)
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self, AnalysisError> {
        if values.is_empty() {
            return Err(AnalysisError::Grid("empty grid".into()));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(AnalysisError::Grid("rates must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AnalysisError::Grid("rates must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for MuGrid {
    fn default() -> Self {
        Self::range(0.01, 1.0, 0.01).expect("static")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteMeasures {
    pub e_lw: f64,
    pub p_loss: f64,
    pub rho: f64,
    pub gamma: f64,
    /// `L_W,limit = γ(ρ) · L*(p_pt)`.
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub mu: f64,
    pub routes: Vec<RouteMeasures>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub layout: String,
    pub load: Load,
    pub params: AnalysisParams,
    /// Sorted by `mu`.
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityVerdict {
    /// Smallest grid rate meeting the threshold; `None` if none does.
    pub mu_min: Option<f64>,
    /// Maximum mean service time `1 / μ_min`, minutes.
    pub b_max: Option<f64>,
    pub assessed: Vec<usize>,
}

impl CapacityVerdict {
    pub fn feasible(&self) -> bool {
        self.mu_min.is_some()
    }
}

/// Route with the most conflicts; ties go to the higher arrival rate, then
/// to the later route.
pub fn default_assessed(junction: &Junction, lambda: &[f64]) -> usize {
    (0..junction.route_count())
        .max_by(|&a, &b| {
            let key = |i: usize| (junction.conflicts.degree(i), lambda.get(i).copied().unwrap_or(0.0));
            let (da, la) = key(a);
            let (db, lb) = key(b);
            da.cmp(&db).then(la.total_cmp(&lb)).then(a.cmp(&b))
        })
        .unwrap_or(0)
}

fn check_routes(routes: &[usize], count: usize) -> Result<(), AnalysisError> {
    match routes.iter().find(|&&r| r >= count) {
        Some(&route) => Err(AnalysisError::Route {
            route,
            routes: count,
        }),
        None => Ok(()),
    }
}

fn correction(rho: f64, params: &AnalysisParams) -> Result<f64, ApproxError> {
    gi_correction_factor(&CorrectionParams::single_channel(rho, params.v_a, params.v_b))
}

/// Builds the generator on a prepared space, solves it and evaluates every
/// route. `mu_key` only labels solver errors.
fn evaluate(
    space: &StateSpace,
    rates: &RateSet,
    p_pt: f64,
    params: &AnalysisParams,
    mu_key: f64,
) -> Result<Vec<RouteMeasures>, AnalysisError> {
    let solver_err = |source: SolverError| AnalysisError::Solver { mu: mu_key, source };
    let (generator, _) = build_generator(space, rates, params.choice_rate)?;
    let dist = stationary_distribution(&generator, &params.solver).map_err(solver_err)?;
    let l_star = waiting_threshold(p_pt)?;
    (0..space.routes())
        .map(|i| {
            let e_lw = expected_queue_length(&dist, space, i).map_err(solver_err)?;
            let p_loss = if rates.lambda[i] > 0.0 {
                loss_probability(&dist, space, i).map_err(solver_err)?
            } else {
                0.0
            };
            let rho = rates.rho(i);
            let gamma = correction(rho, params)?;
            let threshold = model_threshold(l_star, gamma)?;
            Ok(RouteMeasures {
                e_lw,
                p_loss,
                rho,
                gamma,
                threshold,
                pass: e_lw <= threshold,
            })
        })
        .collect()
}

fn prepared_space(
    junction: &Junction,
    lambda: &[f64],
    params: &AnalysisParams,
) -> Result<StateSpace, AnalysisError> {
    Ok(StateSpace::build_with(
        junction,
        params.slots,
        &SpaceOptions::for_rates(lambda),
    )?)
}

fn p_pt_of(load: &Load, params: &AnalysisParams) -> f64 {
    params.p_pt.unwrap_or(load.p_pt)
}

/// Measures for fixed per-route rates.
pub fn analyze(
    junction: &Junction,
    rates: &RateSet,
    p_pt: f64,
    params: &AnalysisParams,
) -> Result<Vec<RouteMeasures>, AnalysisError> {
    let space = prepared_space(junction, &rates.lambda, params)?;
    let mu_key = rates.mu.first().copied().unwrap_or(f64::NAN);
    evaluate(&space, rates, params.p_pt.unwrap_or(p_pt), params, mu_key)
}

/// Evaluates every grid rate with the same `μ` on all routes.
pub fn sweep(
    junction: &Junction,
    load: &Load,
    grid: &MuGrid,
    params: &AnalysisParams,
) -> Result<SweepResult, AnalysisError> {
    let k = junction.route_count();
    if load.lambda.len() != k {
        return Err(ProgramError::Shape {
            expected: k,
            got: load.lambda.len(),
        }
        .into());
    }
    let space = prepared_space(junction, &load.lambda, params)?;
    let p_pt = p_pt_of(load, params);
    let point = |mu: f64| -> Result<SweepPoint, AnalysisError> {
        let rates = RateSet::uniform_mu(load.lambda.clone(), mu, params.v_a, params.v_b)?;
        Ok(SweepPoint {
            mu,
            routes: evaluate(&space, &rates, p_pt, params, mu)?,
        })
    };
    #[cfg(feature = "parallel")]
    let points: Result<Vec<_>, _> = {
        use rayon::prelude::*;
        grid.values().par_iter().map(|&mu| point(mu)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Result<Vec<_>, _> = grid.values().iter().map(|&mu| point(mu)).collect();
    Ok(SweepResult {
        layout: junction.name.clone(),
        load: load.clone(),
        params: *params,
        points: points?,
    })
}

/// Smallest grid rate at which every assessed route meets its threshold.
pub fn min_service_rate(sweep: &SweepResult, assessed: &[usize]) -> CapacityVerdict {
    let mu_min = sweep
        .points
        .iter()
        .find(|p| assessed.iter().all(|&i| p.routes.get(i).is_some_and(|r| r.pass)))
        .map(|p| p.mu);
    CapacityVerdict {
        mu_min,
        b_max: mu_min.map(|m| 1.0 / m),
        assessed: assessed.to_vec(),
    }
}

/// `(a − b) / b`.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    (a - b) / b
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutComparison {
    pub sweeps: Vec<SweepResult>,
    pub verdicts: Vec<CapacityVerdict>,
    /// `(b_max,j − b_max,0) / b_max,0` for every layout `j`; `None` when
    /// either verdict is infeasible.
    pub relative: Vec<Option<f64>>,
}

fn check_same_routes(layouts: &[Junction]) -> Result<(), AnalysisError> {
    let first = &layouts[0];
    for other in &layouts[1..] {
        let same = other.route_count() == first.route_count()
            && other
                .routes
                .iter()
                .zip(&first.routes)
                .all(|(a, b)| a.name == b.name);
        if !same {
            return Err(AnalysisError::Layouts(format!(
                "'{}' and '{}'",
                first.name, other.name
            )));
        }
    }
    Ok(())
}

/// Sweeps each layout and compares the maximum mean service times against
/// the first one. `assessed` defaults to [`default_assessed`] on the first
/// layout so that all layouts are judged on the same routes.
pub fn compare_layouts(
    layouts: &[Junction],
    load: &Load,
    grid: &MuGrid,
    params: &AnalysisParams,
    assessed: Option<&[usize]>,
) -> Result<LayoutComparison, AnalysisError> {
    if layouts.len() < 2 {
        return Err(AnalysisError::TooFewLayouts(2));
    }
    check_same_routes(layouts)?;
    let assessed = match assessed {
        Some(a) => a.to_vec(),
        None => vec![default_assessed(&layouts[0], &load.lambda)],
    };
    check_routes(&assessed, layouts[0].route_count())?;
    let sweeps = layouts
        .iter()
        .map(|j| sweep(j, load, grid, params))
        .collect::<Result<Vec<_>, _>>()?;
    let verdicts: Vec<_> = sweeps.iter().map(|s| min_service_rate(s, &assessed)).collect();
    let relative = verdicts
        .iter()
        .map(|v| match (v.b_max, verdicts[0].b_max) {
            (Some(a), Some(b)) => Some(relative_difference(a, b)),
            _ => None,
        })
        .collect();
    Ok(LayoutComparison {
        sweeps,
        verdicts,
        relative,
    })
}

/// Per-route train counts of one line over `horizon` minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct LineProgram {
    pub name: String,
    pub counts: ClassCounts,
    pub horizon: f64,
}

impl LineProgram {
    pub fn new(name: &str, counts: ClassCounts, horizon: f64) -> Self {
        Self {
            name: name.to_string(),
            counts,
            horizon,
        }
    }
}

/// The six operating programs used for the combination grid, one hour each.
pub fn standard_programs() -> Vec<LineProgram> {
    [
        ("low_intensity_mixed", ClassCounts::new(2, 0, 1)),
        ("long_distance", ClassCounts::new(0, 4, 0)),
        ("local_train", ClassCounts::new(4, 1, 0)),
        ("freight", ClassCounts::new(0, 0, 5)),
        ("high_intensity_mixed", ClassCounts::new(4, 2, 2)),
        ("urban", ClassCounts::new(10, 0, 0)),
    ]
    .into_iter()
    .map(|(n, c)| LineProgram::new(n, c, 60.0))
    .collect()
}

/// Which routes carry the main line and which the branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineAssignment {
    pub main: Vec<usize>,
    pub branch: Vec<usize>,
}

impl LineAssignment {
    /// `r1`, `r3` on the main line and `r2`, `r4` on the branch.
    pub fn double_track() -> Self {
        Self {
            main: vec![0, 2],
            branch: vec![1, 3],
        }
    }
}

/// Puts `main` on every main-line route and `branch` on every branch route.
/// Both must share the horizon.
pub fn combine(
    main: &LineProgram,
    branch: &LineProgram,
    lines: &LineAssignment,
) -> Result<OperatingProgram, AnalysisError> {
    if main.horizon != branch.horizon {
        return Err(ProgramError::Horizon(branch.horizon).into());
    }
    let demands = lines
        .main
        .iter()
        .map(|&r| Demand::new(r, main.counts))
        .chain(lines.branch.iter().map(|&r| Demand::new(r, branch.counts)))
        .collect();
    Ok(OperatingProgram::new(demands, main.horizon))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub main: String,
    pub branch: String,
    pub layout: String,
    pub p_pt: f64,
    pub verdict: CapacityVerdict,
}

/// Maximum mean service time for every (main, branch, layout) triple,
/// ordered main-major, then branch, then layout.
pub fn combination_grid(
    mains: &[LineProgram],
    branches: &[LineProgram],
    layouts: &[Junction],
    lines: &LineAssignment,
    grid: &MuGrid,
    params: &AnalysisParams,
    assessed: &[usize],
) -> Result<Vec<GridCell>, AnalysisError> {
    if layouts.is_empty() {
        return Err(AnalysisError::TooFewLayouts(1));
    }
    check_same_routes(layouts)?;
    let k = layouts[0].route_count();
    check_routes(&lines.main, k)?;
    check_routes(&lines.branch, k)?;
    check_routes(assessed, k)?;
    let jobs: Vec<(usize, usize, usize)> = (0..mains.len())
        .flat_map(|a| (0..branches.len()).flat_map(move |b| (0..layouts.len()).map(move |l| (a, b, l))))
        .collect();
    let cell = |&(a, b, l): &(usize, usize, usize)| -> Result<GridCell, AnalysisError> {
        let program = combine(&mains[a], &branches[b], lines)?;
        let load = Load::from_program(&program, &layouts[l], params.p_pt)?;
        let result = sweep(&layouts[l], &load, grid, params)?;
        Ok(GridCell {
            main: mains[a].name.clone(),
            branch: branches[b].name.clone(),
            layout: layouts[l].name.clone(),
            p_pt: p_pt_of(&load, params),
            verdict: min_service_rate(&result, assessed),
        })
    };
    #[cfg(feature = "parallel")]
    let cells: Result<Vec<_>, _> = {
        use rayon::prelude::*;
        jobs.par_iter().map(cell).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Result<Vec<_>, _> = jobs.iter().map(cell).collect();
    cells
}
