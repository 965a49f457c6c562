use crate::junction::RateSet;

use super::state::{StateSpace, TransitionKind};
use super::CtmcError;

/// Default choice rate `M` in 1/minute (ten decisions per second).
pub const DEFAULT_CHOICE_RATE: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
    pub kind: TransitionKind,
}

/// Sparse CTMC generator in CSR form. Only off-diagonal rates are stored;
/// the diagonal is kept separately as the negated row sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    rates: Vec<f64>,
    diag: Vec<f64>,
}

impl Generator {
    /// Builds a generator from per-row `(target, rate)` lists. Parallel
    /// entries are summed and self-loops dropped.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self, CtmcError> {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut rates = Vec::new();
        let mut diag = Vec::with_capacity(dim);
        row_ptr.push(0);
        for (u, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(v, _)| v);
            let mut exit = 0.0;
            let start = cols.len();
            for (v, r) in row {
                if v >= dim {
                    return Err(CtmcError::TargetOutOfRange { from: u, to: v });
                }
                if !(r > 0.0 && r.is_finite()) {
                    return Err(CtmcError::BadRate { from: u, to: v, rate: r });
                }
                if v == u {
                    continue;
                }
                if cols.len() > start && *cols.last().unwrap() as usize == v {
                    *rates.last_mut().unwrap() += r;
                } else {
                    cols.push(v as u32);
                    rates.push(r);
                }
            }
            for r in &rates[start..] {
                exit += r;
            }
            diag.push(-exit);
            row_ptr.push(cols.len());
        }
        Ok(Self {
            row_ptr,
            cols,
            rates,
            diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Off-diagonal entries of row `u`.
    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[u]..self.row_ptr[u + 1];
        self.cols[range.clone()]
            .iter()
            .zip(&self.rates[range])
            .map(|(&v, &r)| (v as usize, r))
    }

    pub fn diagonal(&self, u: usize) -> f64 {
        self.diag[u]
    }

    pub fn exit_rate(&self, u: usize) -> f64 {
        -self.diag[u]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |acc, &d| acc.max(-d))
    }

    /// `Q[u][v]`, diagonal included.
    pub fn get(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return self.diag[u];
        }
        self.row(u).find(|&(c, _)| c == v).map_or(0.0, |(_, r)| r)
    }

    /// `y = x Q` for a row vector `x`.
    pub fn left_mul(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        for (u, yu) in y.iter_mut().enumerate() {
            *yu = x[u] * self.diag[u];
        }
        for (u, &xu) in x.iter().enumerate() {
            if xu == 0.0 {
                continue;
            }
            for (v, r) in self.row(u) {
                y[v] += xu * r;
            }
        }
    }

    /// Largest absolute row sum; zero up to rounding for a valid generator.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.dim())
            .map(|u| (self.row(u).map(|(_, r)| r).sum::<f64>() + self.diag[u]).abs())
            .fold(0.0, f64::max)
    }

    /// Ordinals that are reachable from `start` along positive entries.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.dim()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for (v, _) in self.row(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Ordinals from which `target` can be reached.
    pub fn reaching(&self, target: usize) -> Vec<bool> {
        let n = self.dim();
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for u in 0..n {
            for (v, _) in self.row(u) {
                rev[v].push(u);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![target];
        seen[target] = true;
        while let Some(v) = stack.pop() {
            for &u in &rev[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }
}

/// Assigns rates to the transition structure of `space`.
///
/// Arrivals use `λ_i`, service completions `μ_i`, and every choice of an
/// eligible route in a decision state uses `choice_rate`. Arrivals to a full
/// queue have no transition.
pub fn build_generator(
    space: &StateSpace,
    rates: &RateSet,
    choice_rate: f64,
) -> Result<(Generator, Vec<Transition>), CtmcError> {
    let k = space.routes();
    if rates.lambda.len() != k || rates.mu.len() != k {
        return Err(CtmcError::RateShape {
            expected: k,
            got: rates.lambda.len().min(rates.mu.len()),
        });
    }
    if !(choice_rate > 0.0 && choice_rate.is_finite()) {
        return Err(CtmcError::ChoiceRate(choice_rate));
    }
    for i in 0..k {
        if rates.lambda[i] > 0.0 && !space.receives_arrivals(i) {
            return Err(CtmcError::ArrivalsPruned(i));
        }
        if !(rates.lambda[i] >= 0.0 && rates.lambda[i].is_finite()) {
            return Err(CtmcError::BadRate {
                from: 0,
                to: 0,
                rate: rates.lambda[i],
            });
        }
    }
    let mut transitions = Vec::new();
    let mut rows = Vec::with_capacity(space.len());
    for u in 0..space.len() {
        let mut row = Vec::new();
        for (kind, v) in space.successors(u) {
            let rate = match kind {
                TransitionKind::Arrival(i) => rates.lambda[i],
                TransitionKind::Service(i) => rates.mu[i],
                TransitionKind::Choice(_) => choice_rate,
            };
            if rate <= 0.0 {
                continue;
            }
            transitions.push(Transition {
                from: u,
                to: v,
                rate,
                kind,
            });
            row.push((v, rate));
        }
        rows.push(row);
    }
    Ok((Generator::from_rows(rows)?, transitions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::state::{State, StateSpace};
    use crate::junction::{double_track_junction, single_track_segment, Junction};

    #[test]
    fn single_route_birth_death() {
        let j = Junction::from_names("one", &["r1"], &[]).unwrap();
        let space = StateSpace::build(&j, 1).unwrap();
        let rates = RateSet::markovian(vec![0.1], vec![0.2]).unwrap();
        let (g, t) = build_generator(&space, &rates, 600.0).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(g.get(0, 1), 0.1);
        assert_eq!(g.get(1, 2), 0.1);
        assert_eq!(g.get(2, 1), 0.2);
        assert_eq!(g.get(1, 0), 0.2);
        assert_eq!(g.get(0, 2), 0.0);
        assert_eq!(g.diagonal(1), -0.30000000000000004);
    }

    #[test]
    fn choice_transitions_at_rate_m() {
        let j = single_track_segment();
        let space = StateSpace::build(&j, 1).unwrap();
        let rates = RateSet::markovian(vec![0.1, 0.1], vec![0.5, 0.5]).unwrap();
        let (g, t) = build_generator(&space, &rates, 600.0).unwrap();
        let u = space.ordinal(&State::new(vec![1, 1], &[false, false])).unwrap();
        let a = space.ordinal(&State::new(vec![0, 1], &[true, false])).unwrap();
        let b = space.ordinal(&State::new(vec![1, 0], &[false, true])).unwrap();
        let from_u: Vec<_> = t
            .iter()
            .filter(|x| x.from == u && matches!(x.kind, TransitionKind::Choice(_)))
            .collect();
        assert_eq!(from_u.len(), 2);
        assert_eq!(g.get(u, a), 600.0);
        assert_eq!(g.get(u, b), 600.0);
        let others: f64 = t
            .iter()
            .filter(|x| x.from == u && !matches!(x.kind, TransitionKind::Choice(_)))
            .map(|x| x.rate)
            .sum();
        assert!((g.exit_rate(u) - 1200.0 - others).abs() < 1e-9);
    }

    #[test]
    fn rows_sum_to_zero_and_off_diagonals_positive() {
        let j = double_track_junction();
        let space = StateSpace::build(&j, 3).unwrap();
        let rates = RateSet::markovian(vec![0.1, 0.07, 0.083, 0.05], vec![0.3, 0.4, 0.5, 0.6]).unwrap();
        let (g, _) = build_generator(&space, &rates, 600.0).unwrap();
        assert!(g.max_row_sum_error() <= 1e-12);
        for u in 0..g.dim() {
            assert!(g.row(u).all(|(v, r)| r > 0.0 && v != u));
        }
        assert!(g.reaching(0).iter().all(|&x| x));
    }

    #[test]
    fn parallel_entries_are_merged() {
        let g = Generator::from_rows(vec![vec![(1, 1.0), (1, 2.0)], vec![(0, 0.5)]]).unwrap();
        assert_eq!(g.nnz(), 2);
        assert_eq!(g.get(0, 1), 3.0);
        assert_eq!(g.diagonal(0), -3.0);
    }

    #[test]
    fn arrivals_on_pruned_route_are_rejected() {
        let j = single_track_segment();
        let space = StateSpace::build_with(
            &j,
            1,
            &crate::ctmc::SpaceOptions::for_rates(&[0.1, 0.0]),
        )
        .unwrap();
        let rates = RateSet::markovian(vec![0.1, 0.2], vec![0.5, 0.5]).unwrap();
        assert_eq!(
            build_generator(&space, &rates, 600.0).unwrap_err(),
            CtmcError::ArrivalsPruned(1)
        );
    }
}
