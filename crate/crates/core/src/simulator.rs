//! Discrete-event simulation of a junction with exponential inter-arrival
//! and service times, per-route FIFO queues and conflict locking.
//!
//! The dispatch rule mirrors the chain: after every state change all
//! waiting trains that can start without a competing candidate start at
//! once; when the remaining candidates all conflict with one another one of
//! them is picked uniformly at random.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::ctmc::{CtmcError, Topology};
use crate::junction::{Junction, RateSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("simulated hours ({hours}) must exceed twice the dropped warm-up ({warmup})")]
    Window { hours: f64, warmup: f64 },
    #[error("at least one run is required")]
    NoRuns,
    #[error("snapshot interval must be positive, got {0}")]
    Interval(f64),
    #[error("rate vectors have {got} entries for {expected} routes")]
    Shape { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] CtmcError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Maximum waiting trains per route; `None` is unlimited.
    pub limit: Option<u32>,
    pub hours: f64,
    /// Hours dropped at each end of a run.
    pub warmup: f64,
    pub runs: usize,
    pub seed: u64,
    /// Minutes between queue snapshots.
    pub snapshot_interval: f64,
    /// Keep the per-snapshot queue lengths of every run.
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            limit: None,
            hours: 22.0,
            warmup: 1.0,
            runs: 100,
            seed: 0,
            snapshot_interval: 1.0,
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.hours > 2.0 * self.warmup && self.warmup >= 0.0) {
            return Err(SimError::Window {
                hours: self.hours,
                warmup: self.warmup,
            });
        }
        if self.runs == 0 {
            return Err(SimError::NoRuns);
        }
        if !(self.snapshot_interval > 0.0) {
            return Err(SimError::Interval(self.snapshot_interval));
        }
        Ok(())
    }
}

/// Statistics of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    /// Mean waiting trains per route over the snapshots.
    pub mean_queue: Vec<f64>,
    pub arrivals: Vec<u64>,
    pub served: Vec<u64>,
    pub rejected: Vec<u64>,
    /// Trains waiting or in service when the run ends.
    pub remaining: Vec<u64>,
    /// Arrivals and rejections inside the evaluation window.
    pub window_arrivals: Vec<u64>,
    pub window_rejected: Vec<u64>,
    pub snapshots: usize,
    /// `(minute, waiting trains per route)` when tracing is enabled.
    pub trace: Option<Vec<(f64, Vec<u32>)>>,
    pub elapsed: Duration,
}

/// Sample mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteSummary {
    pub mean_queue: f64,
    pub sigma: f64,
    /// Pooled rejected / arrived inside the evaluation windows.
    pub p_loss: f64,
    pub arrivals: u64,
    pub served: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub runs: Vec<RunStats>,
    pub routes: Vec<RouteSummary>,
}

/// Mean and sample standard deviation of `samples` (σ = 0 for one sample).
pub fn aggregate_samples(samples: &[f64]) -> Aggregate {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return Aggregate {
            mean: f64::NAN,
            sigma: f64::NAN,
        };
    }
    if samples.iter().all(|&x| x == samples[0]) {
        return Aggregate {
            mean: samples[0],
            sigma: 0.0,
        };
    }
    let mean = samples.iter().sum::<f64>() / n;
    let sigma = if samples.len() < 2 {
        0.0
    } else {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Aggregate { mean, sigma }
}

/// Per-route mean and σ of the per-run mean queue lengths.
pub fn aggregate(runs: &[RunStats]) -> Vec<Aggregate> {
    let routes = runs.first().map_or(0, |r| r.mean_queue.len());
    (0..routes)
        .map(|i| {
            let samples: Vec<f64> = runs.iter().map(|r| r.mean_queue[i]).collect();
            aggregate_samples(&samples)
        })
        .collect()
}

const PURPOSE_ARRIVAL: u64 = 0;
const PURPOSE_SERVICE: u64 = 1;
const PURPOSE_CHOICE: u64 = 2;
const DISPATCH_STREAM: u64 = 0xFFFF;

/// Independent stream per (run, route, purpose).
fn stream_rng(seed: u64, run: usize, route: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((run as u64) << 24) | (route << 4) | purpose);
    rng
}

struct RouteState {
    queue: VecDeque<u64>,
    serving: Option<u64>,
    next_id: u64,
    last_served: Option<u64>,
    next_arrival: f64,
    next_completion: f64,
    arrivals: Option<(ChaCha8Rng, Exp<f64>)>,
    service: (ChaCha8Rng, Exp<f64>),
}

/// Runs replication number `run`.
pub fn simulate_run(
    junction: &Junction,
    rates: &RateSet,
    config: &SimConfig,
    run: usize,
) -> Result<RunStats, SimError> {
    config.validate()?;
    let k = junction.route_count();
    if rates.lambda.len() != k || rates.mu.len() != k {
        return Err(SimError::Shape {
            expected: k,
            got: rates.lambda.len(),
        });
    }
    let topology = Topology::new(&junction.conflicts)?;
    let started = Instant::now();
    let end = config.hours * 60.0;
    let window_start = config.warmup * 60.0;
    let window_end = end - window_start;

    let mut routes: Vec<RouteState> = (0..k)
        .map(|i| {
            let arrivals = (rates.lambda[i] > 0.0).then(|| {
                (
                    stream_rng(config.seed, run, i as u64, PURPOSE_ARRIVAL),
                    Exp::new(rates.lambda[i]).expect("positive rate"),
                )
            });
            RouteState {
                queue: VecDeque::new(),
                serving: None,
                next_id: 0,
                last_served: None,
                next_arrival: f64::INFINITY,
                next_completion: f64::INFINITY,
                arrivals,
                service: (
                    stream_rng(config.seed, run, i as u64, PURPOSE_SERVICE),
                    Exp::new(rates.mu[i]).expect("positive rate"),
                ),
            }
        })
        .collect();
    let mut dispatch_rng = stream_rng(config.seed, run, DISPATCH_STREAM, PURPOSE_CHOICE);
    for r in &mut routes {
        if let Some((rng, exp)) = &mut r.arrivals {
            r.next_arrival = exp.sample(rng);
        }
    }

    let mut busy = 0u32;
    let mut arrivals = vec![0u64; k];
    let mut served = vec![0u64; k];
    let mut rejected = vec![0u64; k];
    let mut window_arrivals = vec![0u64; k];
    let mut window_rejected = vec![0u64; k];
    let mut queue_sums = vec![0u64; k];
    let mut snapshots = 0usize;
    let mut trace = config.trace.then(Vec::new);
    let mut next_snapshot = window_start;

    let start_service = |routes: &mut [RouteState], busy: &mut u32, i: usize, id: u64, now: f64| {
        assert!(
            topology.compatible(i, *busy),
            "route {i} started while a conflicting route is in service"
        );
        *busy |= 1 << i;
        let r = &mut routes[i];
        r.serving = Some(id);
        let (rng, exp) = &mut r.service;
        r.next_completion = now + exp.sample(rng);
    };

    loop {
        let mut t_next = f64::INFINITY;
        let mut event = None;
        for (i, r) in routes.iter().enumerate() {
            if r.next_arrival < t_next {
                t_next = r.next_arrival;
                event = Some((i, true));
            }
            if r.next_completion < t_next {
                t_next = r.next_completion;
                event = Some((i, false));
            }
        }
        let horizon = t_next.min(end);
        while next_snapshot < window_end && next_snapshot <= horizon {
            let lengths: Vec<u32> = routes.iter().map(|r| r.queue.len() as u32).collect();
            for (s, &l) in queue_sums.iter_mut().zip(&lengths) {
                *s += u64::from(l);
            }
            snapshots += 1;
            if let Some(tr) = &mut trace {
                tr.push((next_snapshot, lengths));
            }
            next_snapshot = window_start + snapshots as f64 * config.snapshot_interval;
        }
        let Some((i, is_arrival)) = event else { break };
        if t_next >= end {
            break;
        }
        let now = t_next;
        if is_arrival {
            arrivals[i] += 1;
            let in_window = (window_start..window_end).contains(&now);
            if in_window {
                window_arrivals[i] += 1;
            }
            let id = routes[i].next_id;
            routes[i].next_id += 1;
            if topology.compatible(i, busy) {
                debug_assert!(routes[i].queue.is_empty());
                start_service(&mut routes, &mut busy, i, id, now);
            } else if config
                .limit
                .is_some_and(|l| routes[i].queue.len() >= l as usize)
            {
                rejected[i] += 1;
                if in_window {
                    window_rejected[i] += 1;
                }
            } else {
                routes[i].queue.push_back(id);
            }
            let r = &mut routes[i];
            if let Some((rng, exp)) = &mut r.arrivals {
                r.next_arrival = now + exp.sample(rng);
            }
        } else {
            let r = &mut routes[i];
            let id = r.serving.take().expect("completion without service");
            assert!(
                r.last_served.is_none_or(|last| last < id),
                "route {i} served out of arrival order"
            );
            r.last_served = Some(id);
            r.next_completion = f64::INFINITY;
            busy &= !(1 << i);
            served[i] += 1;
            loop {
                let mut eligible = 0u32;
                for (j, r) in routes.iter().enumerate() {
                    if !r.queue.is_empty() && topology.compatible(j, busy) {
                        eligible |= 1 << j;
                    }
                }
                if eligible == 0 {
                    break;
                }
                let mut forced = 0u32;
                for j in 0..k {
                    if eligible & (1 << j) != 0 && topology.mask(j) & eligible & !(1 << j) == 0 {
                        forced |= 1 << j;
                    }
                }
                if forced == 0 {
                    let candidates: Vec<usize> =
                        (0..k).filter(|&j| eligible & (1 << j) != 0).collect();
                    forced = 1 << candidates[dispatch_rng.random_range(0..candidates.len())];
                }
                for j in 0..k {
                    if forced & (1 << j) != 0 {
                        let id = routes[j].queue.pop_front().expect("eligible route has a train");
                        start_service(&mut routes, &mut busy, j, id, now);
                    }
                }
            }
        }
    }

    let remaining = routes
        .iter()
        .map(|r| r.queue.len() as u64 + u64::from(r.serving.is_some()))
        .collect();
    let mean_queue = queue_sums
        .iter()
        .map(|&s| if snapshots == 0 { 0.0 } else { s as f64 / snapshots as f64 })
        .collect();
    Ok(RunStats {
        mean_queue,
        arrivals,
        served,
        rejected,
        remaining,
        window_arrivals,
        window_rejected,
        snapshots,
        trace,
        elapsed: started.elapsed(),
    })
}

/// Runs all replications (in parallel when enabled) and aggregates them.
pub fn simulate(
    junction: &Junction,
    rates: &RateSet,
    config: &SimConfig,
) -> Result<SimulationResult, SimError> {
    config.validate()?;
    #[cfg(feature = "parallel")]
    let runs: Result<Vec<RunStats>, SimError> = {
        use rayon::prelude::*;
        (0..config.runs)
            .into_par_iter()
            .map(|run| simulate_run(junction, rates, config, run))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Result<Vec<RunStats>, SimError> = (0..config.runs)
        .map(|run| simulate_run(junction, rates, config, run))
        .collect();
    let runs = runs?;
    let stats = aggregate(&runs);
    let routes = (0..junction.route_count())
        .map(|i| {
            let sum = |f: fn(&RunStats) -> &Vec<u64>| runs.iter().map(|r| f(r)[i]).sum::<u64>();
            let arrived = sum(|r| &r.window_arrivals);
            let lost = sum(|r| &r.window_rejected);
            RouteSummary {
                mean_queue: stats[i].mean,
                sigma: stats[i].sigma,
                p_loss: if arrived == 0 { 0.0 } else { lost as f64 / arrived as f64 },
                arrivals: sum(|r| &r.arrivals),
                served: sum(|r| &r.served),
                rejected: sum(|r| &r.rejected),
            }
        })
        .collect();
    Ok(SimulationResult { runs, routes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::junction::{double_track_junction, single_track_segment, Junction};

    fn short(limit: Option<u32>, runs: usize) -> SimConfig {
        SimConfig {
            limit,
            hours: 6.0,
            warmup: 1.0,
            runs,
            seed: 11,
            ..SimConfig::default()
        }
    }

    #[test]
    fn idle_route_never_queues() {
        let j = Junction::from_names("one", &["r1"], &[]).unwrap();
        let rates = RateSet::markovian(vec![0.0], vec![0.4]).unwrap();
        let res = simulate(&j, &rates, &short(Some(5), 3)).unwrap();
        assert_eq!(res.routes[0].arrivals, 0);
        assert_eq!(res.routes[0].mean_queue, 0.0);
        assert_eq!(res.routes[0].p_loss, 0.0);
        assert_eq!(res.runs[0].snapshots, 240);
    }

    #[test]
    fn conservation_and_limits() {
        let j = double_track_junction();
        let rates = RateSet::uniform_mu(vec![0.1; 4], 0.15, 1.0, 1.0).unwrap();
        let mut cfg = short(Some(2), 4);
        cfg.trace = true;
        let res = simulate(&j, &rates, &cfg).unwrap();
        for run in &res.runs {
            for i in 0..4 {
                assert_eq!(run.arrivals[i], run.served[i] + run.rejected[i] + run.remaining[i]);
            }
            let tr = run.trace.as_ref().unwrap();
            assert_eq!(tr.len(), run.snapshots);
            assert!(tr.iter().all(|(_, q)| q.iter().all(|&x| x <= 2)));
        }
        assert!(res.routes.iter().any(|r| r.rejected > 0));
    }

    #[test]
    fn reproducible_for_equal_seeds() {
        let j = single_track_segment();
        let rates = RateSet::markovian(vec![0.1, 0.2], vec![0.3, 0.5]).unwrap();
        let a = simulate(&j, &rates, &short(None, 3)).unwrap();
        let b = simulate(&j, &rates, &short(None, 3)).unwrap();
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!(x.mean_queue, y.mean_queue);
            assert_eq!(x.arrivals, y.arrivals);
        }
        let mut other = short(None, 3);
        other.seed = 12;
        let c = simulate(&j, &rates, &other).unwrap();
        assert_ne!(a.runs[0].arrivals, c.runs[0].arrivals);
    }

    #[test]
    fn adding_a_route_keeps_other_streams() {
        let one = Junction::from_names("a", &["r1"], &[]).unwrap();
        let two = Junction::from_names("b", &["r1", "r2"], &[]).unwrap();
        let cfg = short(None, 1);
        let a = simulate_run(&one, &RateSet::markovian(vec![0.1], vec![0.5]).unwrap(), &cfg, 0).unwrap();
        let b = simulate_run(
            &two,
            &RateSet::markovian(vec![0.1, 0.3], vec![0.5, 0.5]).unwrap(),
            &cfg,
            0,
        )
        .unwrap();
        // No conflicts between r1 and r2, so r1 evolves identically.
        assert_eq!(a.arrivals[0], b.arrivals[0]);
        assert_eq!(a.mean_queue[0], b.mean_queue[0]);
    }

    #[test]
    fn aggregation() {
        let same = aggregate_samples(&[0.4, 0.4, 0.4]);
        assert_eq!(same.sigma, 0.0);
        assert_eq!(same.mean, 0.4);
        let a = aggregate_samples(&[1.0, 2.0, 3.0, 4.0]);
        let b = aggregate_samples(&[3.0, 1.0, 4.0, 2.0]);
        assert_eq!(a, b);
        assert!((a.sigma - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let c = SimConfig {
            hours: 2.0,
            ..SimConfig::default()
        };
        assert!(matches!(c.validate(), Err(SimError::Window { .. })));
        let c = SimConfig {
            runs: 0,
            ..SimConfig::default()
        };
        assert_eq!(c.validate(), Err(SimError::NoRuns));
    }
}
