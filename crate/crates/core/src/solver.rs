//! Stationary distribution of a generator and the per-route measures derived
//! from it.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use thiserror::Error;

use crate::ctmc::{build_generator, CtmcError, Generator, SpaceOptions, StateSpace};
use crate::junction::{Junction, RateSet};

/// Largest chain [`SolveMethod::Auto`] hands to sparse LU when Gauss-Seidel
/// does not converge.
pub const DIRECT_LIMIT: usize = 20_000;

/// Gauss-Seidel sweeps tried by [`SolveMethod::Auto`] before falling back.
pub const SWEEP_LIMIT: usize = 20_000;

/// Below this size [`SolveMethod::Auto`] factorizes directly: the fill is
/// negligible and a residual bound alone does not pin down `π` on slowly
/// mixing chains.
pub const SMALL_CHAIN: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("empty generator")]
    Empty,
    #[error("chain is reducible: {unreachable} states cannot reach the empty state or are not reached from it")]
    Reducible { unreachable: usize },
    #[error("uniformized power iteration stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("direct solve produced probability {value:e} at state {state}")]
    Negative { state: usize, value: f64 },
    #[error("residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("route {route} out of range for {routes} routes")]
    RouteOutOfRange { route: usize, routes: usize },
    #[error("distribution has {got} entries but the state space has {expected}")]
    Mismatch { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] CtmcError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Sparse LU below [`SMALL_CHAIN`] states, otherwise Gauss-Seidel; if
    /// that stalls, sparse LU up to [`DIRECT_LIMIT`] states and power
    /// iteration beyond.
    Auto,
    Direct,
    GaussSeidel,
    Uniformization,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound on `‖πQ‖∞`.
    pub tolerance: f64,
    /// Power iterations, or Gauss-Seidel sweeps, before giving up.
    pub max_iterations: usize,
    pub method: SolveMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 50_000_000,
            method: SolveMethod::Auto,
        }
    }
}

impl SolverOptions {
    pub fn with_method(mut self, method: SolveMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
    /// Achieved `‖πQ‖∞`.
    pub residual: f64,
    /// Power iterations or Gauss-Seidel sweeps used; zero for the direct
    /// path.
    pub iterations: usize,
    pub method: SolveMethod,
}

impl StationaryDistribution {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// `‖xQ‖∞`.
pub fn residual(generator: &Generator, x: &[f64]) -> f64 {
    let mut y = vec![0.0; generator.dim()];
    generator.left_mul(x, &mut y);
    y.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn check_irreducible(generator: &Generator) -> Result<(), SolverError> {
    let forward = generator.reachable_from(0);
    let backward = generator.reaching(0);
    let unreachable = forward
        .iter()
        .zip(&backward)
        .filter(|(f, b)| !(**f && **b))
        .count();
    if unreachable > 0 {
        return Err(SolverError::Reducible { unreachable });
    }
    Ok(())
}

/// Solves `πQ = 0`, `Σπ = 1` for an irreducible chain rooted at ordinal 0.
pub fn stationary_distribution(
    generator: &Generator,
    options: &SolverOptions,
) -> Result<StationaryDistribution, SolverError> {
    let n = generator.dim();
    if n == 0 {
        return Err(SolverError::Empty);
    }
    check_irreducible(generator)?;
    if n == 1 {
        return Ok(StationaryDistribution {
            pi: vec![1.0],
            residual: 0.0,
            iterations: 0,
            method: SolveMethod::Direct,
        });
    }
    let dist = match options.method {
        SolveMethod::Direct => solve_direct(generator)?,
        SolveMethod::GaussSeidel => solve_gauss_seidel(generator, options.tolerance, options.max_iterations)?,
        SolveMethod::Uniformization => solve_uniformized(generator, options)?,
        SolveMethod::Auto if n < SMALL_CHAIN => solve_direct(generator)?,
        SolveMethod::Auto => {
            let sweeps = options.max_iterations.min(SWEEP_LIMIT);
            match solve_gauss_seidel(generator, options.tolerance, sweeps) {
                Ok(d) => d,
                Err(SolverError::NotConverged { .. }) if n <= DIRECT_LIMIT => solve_direct(generator)?,
                Err(SolverError::NotConverged { .. }) => solve_uniformized(generator, options)?,
                Err(e) => return Err(e),
            }
        }
    };
    if dist.residual > options.tolerance {
        return Err(SolverError::Residual {
            residual: dist.residual,
            tolerance: options.tolerance,
        });
    }
    Ok(dist)
}

/// Fixes `π_0 = 1`, solves the remaining balance equations with sparse LU and
/// normalizes.
fn solve_direct(generator: &Generator) -> Result<StationaryDistribution, SolverError> {
    let n = generator.dim();
    let reduced = n - 1;
    let mut triplets = Vec::with_capacity(generator.nnz() + n);
    let mut rhs = vec![0.0; reduced];
    for u in 0..n {
        if u > 0 {
            triplets.push(Triplet::new(u - 1, u - 1, generator.diagonal(u)));
        }
        for (v, r) in generator.row(u) {
            if v == 0 {
                continue;
            }
            if u == 0 {
                rhs[v - 1] -= r;
            } else {
                // Row v of Qᵀ, column u.
                triplets.push(Triplet::new(v - 1, u - 1, r));
            }
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(reduced, reduced, &triplets)
        .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
    let mut b = Mat::<f64>::from_fn(reduced, 1, |i, _| rhs[i]);
    lu.solve_in_place(b.as_mut());

    let mut pi = Vec::with_capacity(n);
    pi.push(1.0);
    pi.extend((0..reduced).map(|i| b[(i, 0)]));
    let total: f64 = pi.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(SolverError::Factorization(format!(
            "non-finite normalization {total}"
        )));
    }
    for (state, p) in pi.iter_mut().enumerate() {
        *p /= total;
        if *p < 0.0 {
            // Rounding noise on states with negligible mass.
            if *p < -1e-12 {
                return Err(SolverError::Negative { state, value: *p });
            }
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    let res = residual(generator, &pi);
    Ok(StationaryDistribution {
        pi,
        residual: res,
        iterations: 0,
        method: SolveMethod::Direct,
    })
}

/// Gauss-Seidel on the balance equations `π_v·q_v = Σ_u π_u·q_uv`, sweeping
/// in ordinal order. Each update solves one state's balance exactly, so
/// states with very fast exits settle within a single sweep.
fn solve_gauss_seidel(
    generator: &Generator,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<StationaryDistribution, SolverError> {
    const CHECK_EVERY: usize = 10;
    let n = generator.dim();
    let mut start = vec![0usize; n + 1];
    for u in 0..n {
        for (v, _) in generator.row(u) {
            start[v + 1] += 1;
        }
    }
    for v in 0..n {
        start[v + 1] += start[v];
    }
    let mut fill = start.clone();
    let mut from = vec![0u32; generator.nnz()];
    let mut rate = vec![0.0; generator.nnz()];
    for u in 0..n {
        for (v, r) in generator.row(u) {
            from[fill[v]] = u as u32;
            rate[fill[v]] = r;
            fill[v] += 1;
        }
    }
    let mut pi = vec![1.0 / n as f64; n];
    let mut res = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        for v in 0..n {
            let inflow: f64 = (start[v]..start[v + 1])
                .map(|e| pi[from[e] as usize] * rate[e])
                .sum();
            pi[v] = inflow / generator.exit_rate(v);
        }
        sweeps += 1;
        if sweeps % CHECK_EVERY == 0 || sweeps == max_sweeps {
            let total: f64 = pi.iter().sum();
            if !(total.is_finite() && total > 0.0) {
                break;
            }
            pi.iter_mut().for_each(|p| *p /= total);
            res = residual(generator, &pi);
            if res <= tolerance {
                return Ok(StationaryDistribution {
                    pi,
                    residual: res,
                    iterations: sweeps,
                    method: SolveMethod::GaussSeidel,
                });
            }
        }
    }
    Err(SolverError::NotConverged {
        iterations: sweeps,
        residual: res,
    })
}

/// Power iteration on `P = I + Q/Λ` with `Λ = 1.01 · max exit rate`.
fn solve_uniformized(
    generator: &Generator,
    options: &SolverOptions,
) -> Result<StationaryDistribution, SolverError> {
    let n = generator.dim();
    let lambda = 1.01 * generator.max_exit_rate();
    let mut pi = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut res = f64::INFINITY;
    for it in 1..=options.max_iterations {
        generator.left_mul(&pi, &mut y);
        res = y.iter().fold(0.0, |acc, v| acc.max(v.abs()));
        if res <= options.tolerance {
            return Ok(StationaryDistribution {
                pi,
                residual: res,
                iterations: it - 1,
                method: SolveMethod::Uniformization,
            });
        }
        for (p, dy) in pi.iter_mut().zip(&y) {
            *p += dy / lambda;
        }
        if it % 64 == 0 {
            let total: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|p| *p /= total);
        }
    }
    Err(SolverError::NotConverged {
        iterations: options.max_iterations,
        residual: res,
    })
}

fn check_route(space: &StateSpace, dist: &StationaryDistribution, route: usize) -> Result<(), SolverError> {
    if route >= space.routes() {
        return Err(SolverError::RouteOutOfRange {
            route,
            routes: space.routes(),
        });
    }
    if dist.len() != space.len() {
        return Err(SolverError::Mismatch {
            expected: space.len(),
            got: dist.len(),
        });
    }
    Ok(())
}

/// `E_LW,i = Σ_s π(s) · q_i(s)`.
pub fn expected_queue_length(
    dist: &StationaryDistribution,
    space: &StateSpace,
    route: usize,
) -> Result<f64, SolverError> {
    check_route(space, dist, route)?;
    Ok(space
        .states()
        .iter()
        .zip(&dist.pi)
        .map(|(s, p)| p * f64::from(s.queue(route)))
        .sum())
}

/// Stationary mass of states in which an arrival on `route` is rejected;
/// by PASTA this is the fraction of arriving trains lost.
pub fn loss_probability(
    dist: &StationaryDistribution,
    space: &StateSpace,
    route: usize,
) -> Result<f64, SolverError> {
    check_route(space, dist, route)?;
    Ok((0..space.len())
        .filter(|&u| space.blocks_arrival(u, route))
        .map(|u| dist.pi[u])
        .sum())
}

/// Builds and solves the chain of `junction` with `m` slots, pruning routes
/// without arrivals.
pub fn solve_junction(
    junction: &Junction,
    rates: &RateSet,
    m: u16,
    choice_rate: f64,
    options: &SolverOptions,
) -> Result<(StateSpace, StationaryDistribution), SolverError> {
    let space = StateSpace::build_with(junction, m, &SpaceOptions::for_rates(&rates.lambda))?;
    let (generator, _) = build_generator(&space, rates, choice_rate)?;
    let dist = stationary_distribution(&generator, options)?;
    Ok((space, dist))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotSizing {
    pub slots: u16,
    /// `max_i p_loss,i` for each tried `m = 1..=slots`.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SizingError {
    #[error("loss limit must lie in (0, 1), got {0}")]
    Limit(f64),
    #[error("no m up to {m_max} meets the loss limit; max p_loss per m: {trace:?}")]
    NotSatisfied { m_max: u16, trace: Vec<f64> },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Smallest `m` with `max_i p_loss,i(m) ≤ p_star`, trying `m = 1, 2, …`.
pub fn min_waiting_slots(
    junction: &Junction,
    rates: &RateSet,
    p_star: f64,
    m_max: u16,
    choice_rate: f64,
    options: &SolverOptions,
) -> Result<SlotSizing, SizingError> {
    if !(p_star > 0.0 && p_star < 1.0) {
        return Err(SizingError::Limit(p_star));
    }
    let mut trace = Vec::new();
    for m in 1..=m_max {
        let (space, dist) = solve_junction(junction, rates, m, choice_rate, options)?;
        let mut worst = 0.0f64;
        for i in 0..junction.route_count() {
            if rates.lambda[i] > 0.0 {
                worst = worst.max(loss_probability(&dist, &space, i)?);
            }
        }
        trace.push(worst);
        if worst <= p_star {
            return Ok(SlotSizing { slots: m, trace });
        }
    }
    Err(SizingError::NotSatisfied { m_max, trace })
}
