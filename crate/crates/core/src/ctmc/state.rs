use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::junction::{ConflictMatrix, Junction};

use super::CtmcError;

/// Largest route count supported by the bitmask state encoding.
pub const MAX_ROUTES: usize = 32;

/// Default cap on explored states before the exploration is abandoned.
pub const DEFAULT_STATE_CAP: usize = 5_000_000;

/// One CTMC state: trains waiting per route and the set of routes in service
/// (bit `i` of `busy`).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct State {
    queue: Vec<u16>,
    busy: u32,
}

impl State {
    pub fn empty(routes: usize) -> Self {
        Self {
            queue: vec![0; routes],
            busy: 0,
        }
    }

    pub fn new(queue: Vec<u16>, in_service: &[bool]) -> Self {
        debug_assert_eq!(queue.len(), in_service.len());
        let busy = in_service
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .fold(0u32, |acc, (i, _)| acc | (1 << i));
        Self { queue, busy }
    }

    pub fn routes(&self) -> usize {
        self.queue.len()
    }

    #[inline]
    pub fn queue(&self, route: usize) -> u16 {
        self.queue[route]
    }

    pub fn queues(&self) -> &[u16] {
        &self.queue
    }

    #[inline]
    pub fn in_service(&self, route: usize) -> bool {
        self.busy & (1 << route) != 0
    }

    pub fn busy_mask(&self) -> u32 {
        self.busy
    }

    pub fn in_service_flags(&self) -> Vec<bool> {
        (0..self.routes()).map(|i| self.in_service(i)).collect()
    }

    pub fn waiting_total(&self) -> u32 {
        self.queue.iter().map(|&q| u32::from(q)).sum()
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "State(q={:?}, b=[", self.queue)?;
        for i in 0..self.routes() {
            write!(f, "{}", u8::from(self.in_service(i)))?;
        }
        write!(f, "])")
    }
}

/// Conflict matrix as per-route bitmasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    masks: Vec<u32>,
}

impl Topology {
    pub fn new(conflicts: &ConflictMatrix) -> Result<Self, CtmcError> {
        let k = conflicts.dim();
        if k > MAX_ROUTES {
            return Err(CtmcError::TooManyRoutes(k));
        }
        let masks = (0..k)
            .map(|i| {
                (0..k)
                    .filter(|&j| conflicts.conflicts(i, j))
                    .fold(0u32, |acc, j| acc | (1 << j))
            })
            .collect();
        Ok(Self { masks })
    }

    pub fn routes(&self) -> usize {
        self.masks.len()
    }

    #[inline]
    pub fn mask(&self, route: usize) -> u32 {
        self.masks[route]
    }

    /// Route `i` conflicts with nothing currently in service (itself included).
    #[inline]
    pub fn compatible(&self, route: usize, busy: u32) -> bool {
        self.masks[route] & busy == 0
    }

    /// First pair of conflicting routes that are both in service.
    pub fn conflict_in(&self, busy: u32) -> Option<(usize, usize)> {
        for i in 0..self.routes() {
            if busy & (1 << i) == 0 {
                continue;
            }
            let other = self.masks[i] & busy & !(1 << i);
            if other != 0 {
                return Some((i, other.trailing_zeros() as usize));
            }
        }
        None
    }

    /// Routes with waiting trains that could start right now.
    pub fn eligible(&self, state: &State) -> u32 {
        let mut e = 0u32;
        for i in 0..self.routes() {
            if state.queue[i] > 0 && self.compatible(i, state.busy) {
                e |= 1 << i;
            }
        }
        e
    }

    /// Forced-start closure: repeatedly start every eligible route that
    /// conflicts with no other eligible route. Stops at a state with no
    /// eligible route or where all eligible routes conflict pairwise with
    /// another eligible route (a decision state).
    pub fn close(&self, mut state: State) -> State {
        loop {
            let eligible = self.eligible(&state);
            if eligible == 0 {
                return state;
            }
            let mut forced = 0u32;
            for i in bits(eligible) {
                if self.masks[i] & eligible & !(1 << i) == 0 {
                    forced |= 1 << i;
                }
            }
            if forced == 0 {
                return state;
            }
            for i in bits(forced) {
                state.busy |= 1 << i;
                state.queue[i] -= 1;
            }
        }
    }

    pub fn is_decision(&self, state: &State) -> bool {
        self.eligible(state) != 0
    }
}

/// Iterates the set bits of `mask`, lowest first.
pub(crate) fn bits(mut mask: u32) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

/// Checks conflict feasibility and returns the normalized state.
pub fn closure(queue: &[u16], in_service: &[bool], junction: &Junction) -> Result<State, CtmcError> {
    let k = junction.route_count();
    if queue.len() != k || in_service.len() != k {
        return Err(CtmcError::Shape {
            expected: k,
            queue: queue.len(),
            service: in_service.len(),
        });
    }
    let topology = Topology::new(&junction.conflicts)?;
    let state = State::new(queue.to_vec(), in_service);
    if let Some((i, j)) = topology.conflict_in(state.busy) {
        return Err(CtmcError::Infeasible(i, j));
    }
    Ok(topology.close(state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransitionKind {
    Arrival(usize),
    Service(usize),
    Choice(usize),
}

impl TransitionKind {
    pub fn route(self) -> usize {
        match self {
            Self::Arrival(r) | Self::Service(r) | Self::Choice(r) => r,
        }
    }
}

/// Normalized, BFS-ordered state space of a junction with `m` waiting slots
/// per route.
#[derive(Debug, Clone)]
pub struct StateSpace {
    states: Vec<State>,
    index: HashMap<State, usize>,
    topology: Topology,
    junction: Junction,
    slots: u16,
    arrivals: u32,
}

/// Exploration options for [`StateSpace::build_with`].
#[derive(Debug, Clone)]
pub struct SpaceOptions {
    /// Routes that receive arrivals; `None` means all routes.
    pub arriving_routes: Option<Vec<bool>>,
    pub max_states: usize,
}

impl Default for SpaceOptions {
    fn default() -> Self {
        Self {
            arriving_routes: None,
            max_states: DEFAULT_STATE_CAP,
        }
    }
}

impl SpaceOptions {
    /// Arrivals only on routes with a positive rate.
    pub fn for_rates(lambda: &[f64]) -> Self {
        Self {
            arriving_routes: Some(lambda.iter().map(|&l| l > 0.0).collect()),
            ..Self::default()
        }
    }
}

impl StateSpace {
    /// BFS from the empty state with arrivals on every route.
    pub fn build(junction: &Junction, m: u16) -> Result<Self, CtmcError> {
        Self::build_with(junction, m, &SpaceOptions::default())
    }

    pub fn build_with(junction: &Junction, m: u16, options: &SpaceOptions) -> Result<Self, CtmcError> {
        if m == 0 {
            return Err(CtmcError::ZeroSlots);
        }
        let k = junction.route_count();
        if k == 0 {
            return Err(CtmcError::NoRoutes);
        }
        let topology = Topology::new(&junction.conflicts)?;
        let arrivals = match &options.arriving_routes {
            None => (0..k).fold(0u32, |acc, i| acc | (1 << i)),
            Some(flags) => {
                if flags.len() != k {
                    return Err(CtmcError::RateShape {
                        expected: k,
                        got: flags.len(),
                    });
                }
                flags
                    .iter()
                    .enumerate()
                    .filter(|(_, &f)| f)
                    .fold(0u32, |acc, (i, _)| acc | (1 << i))
            }
        };

        let root = State::empty(k);
        let mut states = vec![root.clone()];
        let mut index = HashMap::new();
        index.insert(root, 0usize);
        let mut frontier = VecDeque::from([0usize]);
        let mut buf = Vec::new();
        while let Some(u) = frontier.pop_front() {
            buf.clear();
            successors_into(&topology, &states[u], m, arrivals, &mut buf);
            for (_, next) in buf.drain(..) {
                if index.contains_key(&next) {
                    continue;
                }
                if states.len() >= options.max_states {
                    return Err(CtmcError::StateCap(options.max_states));
                }
                index.insert(next.clone(), states.len());
                frontier.push_back(states.len());
                states.push(next);
            }
        }
        Ok(Self {
            states,
            index,
            topology,
            junction: junction.clone(),
            slots: m,
            arrivals,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn slots(&self) -> u16 {
        self.slots
    }

    pub fn routes(&self) -> usize {
        self.topology.routes()
    }

    pub fn junction(&self) -> &Junction {
        &self.junction
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, ordinal: usize) -> &State {
        &self.states[ordinal]
    }

    pub fn ordinal(&self, state: &State) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn receives_arrivals(&self, route: usize) -> bool {
        self.arrivals & (1 << route) != 0
    }

    /// Successor states of `ordinal` with their transition kinds, unmerged.
    pub fn successors(&self, ordinal: usize) -> Vec<(TransitionKind, usize)> {
        let mut buf = Vec::new();
        successors_into(
            &self.topology,
            &self.states[ordinal],
            self.slots,
            self.arrivals,
            &mut buf,
        );
        buf.into_iter()
            .map(|(kind, s)| (kind, self.index[&s]))
            .collect()
    }

    /// An arriving train on `route` would be rejected in this state.
    pub fn blocks_arrival(&self, ordinal: usize, route: usize) -> bool {
        let s = &self.states[ordinal];
        !self.topology.compatible(route, s.busy) && s.queue[route] >= self.slots
    }
}

fn successors_into(
    topology: &Topology,
    state: &State,
    m: u16,
    arrivals: u32,
    out: &mut Vec<(TransitionKind, State)>,
) {
    let k = topology.routes();
    for i in bits(arrivals) {
        if topology.compatible(i, state.busy) {
            let mut next = state.clone();
            next.busy |= 1 << i;
            out.push((TransitionKind::Arrival(i), topology.close(next)));
        } else if state.queue[i] < m {
            let mut next = state.clone();
            next.queue[i] += 1;
            out.push((TransitionKind::Arrival(i), topology.close(next)));
        }
    }
    for i in 0..k {
        if state.in_service(i) {
            let mut next = state.clone();
            next.busy &= !(1 << i);
            out.push((TransitionKind::Service(i), topology.close(next)));
        }
    }
    let eligible = topology.eligible(state);
    for i in bits(eligible) {
        let mut next = state.clone();
        next.queue[i] -= 1;
        next.busy |= 1 << i;
        out.push((TransitionKind::Choice(i), topology.close(next)));
    }
}

/// Size of the conflict-feasible set: every queue vector in `{0..m}^k`
/// combined with every conflict-free set of in-service routes, before
/// normalization and reachability are applied.
pub fn feasible_state_count(junction: &Junction, m: u16) -> Result<u128, CtmcError> {
    let topology = Topology::new(&junction.conflicts)?;
    let k = topology.routes();
    let independent = (0u64..(1u64 << k))
        .filter(|&busy| topology.conflict_in(busy as u32).is_none())
        .count() as u128;
    Ok((u128::from(m) + 1).pow(k as u32) * independent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::junction::{crossover_segment, double_track_junction, single_track_segment};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn st(q: &[u16], b: &[u8]) -> State {
        State::new(q.to_vec(), &b.iter().map(|&x| x == 1).collect::<Vec<_>>())
    }

    #[test]
    fn closure_examples() {
        let single = single_track_segment();
        assert_eq!(
            closure(&[1, 0], &[false, false], &single).unwrap(),
            st(&[0, 0], &[1, 0])
        );
        assert_eq!(
            closure(&[1, 1], &[false, false], &single).unwrap(),
            st(&[1, 1], &[0, 0])
        );
        let cross = crossover_segment();
        assert_eq!(
            closure(&[1, 0, 1], &[false, false, false], &cross).unwrap(),
            st(&[0, 0, 0], &[1, 0, 1])
        );
    }

    #[test]
    fn closure_rejects_conflicting_service() {
        let single = single_track_segment();
        assert!(matches!(
            closure(&[0, 0], &[true, true], &single),
            Err(CtmcError::Infeasible(0, 1))
        ));
    }

    #[test]
    fn single_route_space_is_birth_death() {
        let j = Junction::from_names("one", &["r1"], &[]).unwrap();
        let space = StateSpace::build(&j, 1).unwrap();
        assert_eq!(space.len(), 3);
        assert_eq!(space.state(0), &st(&[0], &[0]));
        assert_eq!(space.state(1), &st(&[0], &[1]));
        assert_eq!(space.state(2), &st(&[1], &[1]));
        assert!(space.blocks_arrival(2, 0));
        assert!(!space.blocks_arrival(1, 0));
    }

    #[test]
    fn decision_state_has_two_choices() {
        let single = single_track_segment();
        let space = StateSpace::build(&single, 1).unwrap();
        let u = space.ordinal(&st(&[1, 1], &[0, 0])).unwrap();
        let choices: Vec<_> = space
            .successors(u)
            .into_iter()
            .filter(|(k, _)| matches!(k, TransitionKind::Choice(_)))
            .map(|(k, v)| (k, space.state(v).clone()))
            .collect();
        assert_eq!(
            choices,
            vec![
                (TransitionKind::Choice(0), st(&[0, 1], &[1, 0])),
                (TransitionKind::Choice(1), st(&[1, 0], &[0, 1])),
            ]
        );
    }

    #[test]
    fn no_arrivals_leaves_root_alone() {
        let j = double_track_junction();
        let space = StateSpace::build_with(&j, 3, &SpaceOptions::for_rates(&[0.0; 4])).unwrap();
        assert_eq!(space.len(), 1);
    }

    #[test]
    fn state_cap_is_enforced() {
        let j = crossover_segment();
        let opts = SpaceOptions {
            max_states: 100,
            ..SpaceOptions::default()
        };
        assert_eq!(
            StateSpace::build_with(&j, 4, &opts).unwrap_err(),
            CtmcError::StateCap(100)
        );
        assert_eq!(StateSpace::build(&j, 0).unwrap_err(), CtmcError::ZeroSlots);
    }

    #[test]
    fn feasible_set_of_double_track() {
        // 2^4 queue vectors times 8 conflict-free service sets.
        assert_eq!(feasible_state_count(&double_track_junction(), 1).unwrap(), 128);
        assert_eq!(feasible_state_count(&single_track_segment(), 1).unwrap(), 12);
    }

    /// All conflict-feasible states that are fixed points of the closure.
    fn enumerate_normalized(j: &Junction, m: u16) -> HashSet<State> {
        let topology = Topology::new(&j.conflicts).unwrap();
        let k = j.route_count();
        let mut out = HashSet::new();
        let combos = (u32::from(m) + 1).pow(k as u32);
        for code in 0..combos {
            let mut c = code;
            let q: Vec<u16> = (0..k)
                .map(|_| {
                    let v = (c % (u32::from(m) + 1)) as u16;
                    c /= u32::from(m) + 1;
                    v
                })
                .collect();
            for busy in 0u32..(1 << k) {
                if topology.conflict_in(busy).is_some() {
                    continue;
                }
                let s = State { queue: q.clone(), busy };
                if topology.close(s.clone()) == s {
                    out.insert(s);
                }
            }
        }
        out
    }

    #[test]
    fn bfs_equals_constraint_enumeration() {
        for (j, ms) in [
            (single_track_segment(), vec![1u16, 2, 4, 8]),
            (crossover_segment(), vec![1, 2, 4]),
            (double_track_junction(), vec![1, 2]),
        ] {
            for m in ms {
                let space = StateSpace::build(&j, m).unwrap();
                let bfs: HashSet<State> = space.states().iter().cloned().collect();
                assert_eq!(bfs, enumerate_normalized(&j, m), "{} m={m}", j.name);
            }
        }
    }

    #[test]
    fn transitions_are_conflict_safe_and_lose_only_at_full_queues() {
        for j in [single_track_segment(), crossover_segment(), double_track_junction()] {
            let space = StateSpace::build(&j, 2).unwrap();
            let topo = space.topology();
            for u in 0..space.len() {
                assert!(topo.conflict_in(space.state(u).busy_mask()).is_none());
                let succ = space.successors(u);
                for (kind, v) in &succ {
                    assert_ne!(u, *v, "{kind:?}");
                    assert!(topo.conflict_in(space.state(*v).busy_mask()).is_none());
                }
                for i in 0..j.route_count() {
                    let has_arrival = succ.iter().any(|(k, _)| *k == TransitionKind::Arrival(i));
                    assert_eq!(has_arrival, !space.blocks_arrival(u, i));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn closure_is_idempotent(q in proptest::collection::vec(0u16..4, 4), busy in 0u32..16) {
            let j = double_track_junction();
            let topo = Topology::new(&j.conflicts).unwrap();
            prop_assume!(topo.conflict_in(busy).is_none());
            let once = topo.close(State { queue: q, busy });
            prop_assert!(topo.conflict_in(once.busy_mask()).is_none());
            prop_assert_eq!(topo.close(once.clone()), once);
        }
    }
}
