//! Junction infrastructure, operating programs and the scalar rates derived
//! from them.
//!
//! A junction is a list of routes plus a symmetric boolean conflict matrix.
//! An operating program assigns train demands to routes over a time horizon
//! (minutes). Everything downstream (state space, generator, thresholds)
//! consumes only the per-route arrival and service rates computed here.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JunctionError {
    #[error("junction has no routes")]
    NoRoutes,
    #[error("route at position {position} has id {id}; ids must be contiguous from 0")]
    RouteId { position: usize, id: usize },
    #[error("duplicate route name `{name}` (routes {first} and {second})")]
    DuplicateRouteName {
        name: String,
        first: usize,
        second: usize,
    },
    #[error("conflict matrix is {dim}x{dim} but the junction has {routes} routes")]
    DimensionMismatch { dim: usize, routes: usize },
    #[error("conflict matrix diagonal entry ({0}, {0}) is not set")]
    MissingSelfConflict(usize),
    #[error("conflict matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("conflict matrix row {row} has {len} entries, expected {expected}")]
    RaggedRow {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("conflict pair references route index {0} outside the junction")]
    PairOutOfRange(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgramError {
    #[error("time horizon must be positive, got {0}")]
    Horizon(f64),
    #[error("demand {index} references route {route}, but the junction has {routes} routes")]
    UnknownRoute {
        index: usize,
        route: usize,
        routes: usize,
    },
    #[error("demand {0} has no trains")]
    EmptyDemand(usize),
    #[error("demand {index} has non-positive service time {value}")]
    ServiceTime { index: usize, value: f64 },
    #[error("demand {index} on route {route} has no service time and no override was given")]
    MissingServiceTime { index: usize, route: usize },
    #[error("service time override must be positive, got {0}")]
    Override(f64),
    #[error("operating program contains no trains")]
    EmptyProgram,
    #[error("service rate must be positive, got {0}")]
    ServiceRate(f64),
    #[error("arrival rates must be finite and non-negative")]
    ArrivalRate,
    #[error("{got} rates given for {expected} routes")]
    Shape { expected: usize, got: usize },
}

/// A directed path through the junction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub id: usize,
    pub name: String,
    pub origin: String,
    pub destination: String,
}

impl Route {
    pub fn new(
        id: usize,
        name: impl Into<String>,
        origin: impl Into<String>,
        destination: impl Into<String>,
    ) -> Self {
        Self {
            id,
            name: name.into(),
            origin: origin.into(),
            destination: destination.into(),
        }
    }
}

/// Square boolean matrix; `C[i][j]` set means routes `i` and `j` cannot be
/// in service at the same time.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConflictMatrix {
    dim: usize,
    entries: Vec<bool>,
}

impl ConflictMatrix {
    /// Builds a matrix from unordered conflict pairs. The diagonal is always
    /// set and each pair is mirrored.
    pub fn from_pairs(dim: usize, pairs: &[(usize, usize)]) -> Result<Self, JunctionError> {
        let mut entries = vec![false; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = true;
        }
        for &(i, j) in pairs {
            if i >= dim {
                return Err(JunctionError::PairOutOfRange(i));
            }
            if j >= dim {
                return Err(JunctionError::PairOutOfRange(j));
            }
            entries[i * dim + j] = true;
            entries[j * dim + i] = true;
        }
        Ok(Self { dim, entries })
    }

    /// Takes the rows verbatim. Only the shape is checked here; symmetry and
    /// the diagonal are checked by [`validate_junction`].
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self, JunctionError> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(JunctionError::RaggedRow {
                    row,
                    len: r.len(),
                    expected: dim,
                });
            }
            entries.extend_from_slice(r);
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn conflicts(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.dim + j]
    }

    /// Number of other routes route `i` conflicts with.
    pub fn degree(&self, i: usize) -> usize {
        (0..self.dim)
            .filter(|&j| j != i && self.conflicts(i, j))
            .count()
    }

    /// Unordered off-diagonal pairs `(i, j)` with `i < j`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                if self.conflicts(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Copy with the conflict between `i` and `j` removed (e.g. an overpass).
    pub fn without_pair(&self, i: usize, j: usize) -> Self {
        let mut out = self.clone();
        if i != j {
            out.entries[i * self.dim + j] = false;
            out.entries[j * self.dim + i] = false;
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn set_raw(&mut self, i: usize, j: usize, value: bool) {
        self.entries[i * self.dim + j] = value;
    }
}

/// Railway junction infrastructure: routes plus their conflicts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Junction {
    pub name: String,
    pub routes: Vec<Route>,
    pub conflicts: ConflictMatrix,
}

impl Junction {
    pub fn new(
        name: impl Into<String>,
        routes: Vec<Route>,
        conflicts: ConflictMatrix,
    ) -> Result<Self, JunctionError> {
        validate_junction(Self {
            name: name.into(),
            routes,
            conflicts,
        })
    }

    /// Routes named by `names` with empty origin/destination labels and the
    /// given conflict pairs (by name).
    pub fn from_names(
        name: impl Into<String>,
        names: &[&str],
        pairs: &[(&str, &str)],
    ) -> Result<Self, JunctionError> {
        let routes: Vec<Route> = names
            .iter()
            .enumerate()
            .map(|(id, n)| Route::new(id, *n, "", ""))
            .collect();
        let lookup = |n: &str| names.iter().position(|x| *x == n);
        let mut idx = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let (Some(i), Some(j)) = (lookup(a), lookup(b)) else {
                return Err(JunctionError::PairOutOfRange(names.len()));
            };
            idx.push((i, j));
        }
        let conflicts = ConflictMatrix::from_pairs(names.len(), &idx)?;
        Self::new(name, routes, conflicts)
    }

    pub fn route_count(&self) -> usize {
        self.routes.len()
    }

    pub fn route_index(&self, name: &str) -> Option<usize> {
        self.routes.iter().position(|r| r.name == name)
    }

    /// Same routes, different conflicts.
    pub fn with_conflicts(
        &self,
        name: impl Into<String>,
        conflicts: ConflictMatrix,
    ) -> Result<Self, JunctionError> {
        Self::new(name, self.routes.clone(), conflicts)
    }
}

impl fmt::Display for Junction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.routes.iter().map(|r| r.name.as_str()).collect();
        let pairs: Vec<String> = self
            .conflicts
            .pairs()
            .into_iter()
            .map(|(i, j)| format!("{}-{}", names[i], names[j]))
            .collect();
        write!(
            f,
            "{} [{}] conflicts {{{}}}",
            self.name,
            names.join(", "),
            pairs.join(", ")
        )
    }
}

/// Checks every structural invariant of a junction and hands it back
/// unchanged.
pub fn validate_junction(junction: Junction) -> Result<Junction, JunctionError> {
    let k = junction.routes.len();
    if k == 0 {
        return Err(JunctionError::NoRoutes);
    }
    for (position, route) in junction.routes.iter().enumerate() {
        if route.id != position {
            return Err(JunctionError::RouteId {
                position,
                id: route.id,
            });
        }
    }
    for (second, route) in junction.routes.iter().enumerate() {
        if let Some(first) = junction.routes[..second]
            .iter()
            .position(|r| r.name == route.name)
        {
            return Err(JunctionError::DuplicateRouteName {
                name: route.name.clone(),
                first,
                second,
            });
        }
    }
    let c = &junction.conflicts;
    if c.dim() != k {
        return Err(JunctionError::DimensionMismatch {
            dim: c.dim(),
            routes: k,
        });
    }
    for i in 0..k {
        if !c.conflicts(i, i) {
            return Err(JunctionError::MissingSelfConflict(i));
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            if c.conflicts(i, j) != c.conflicts(j, i) {
                return Err(JunctionError::Asymmetric(i, j));
            }
        }
    }
    Ok(junction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrainClass {
    Regional,
    HighSpeed,
    Freight,
}

impl TrainClass {
    pub const ALL: [TrainClass; 3] = [Self::Regional, Self::HighSpeed, Self::Freight];

    pub fn is_passenger(self) -> bool {
        !matches!(self, Self::Freight)
    }
}

/// Train counts per class for one demand.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ClassCounts {
    pub regional: u32,
    pub high_speed: u32,
    pub freight: u32,
}

impl ClassCounts {
    pub const fn new(regional: u32, high_speed: u32, freight: u32) -> Self {
        Self {
            regional,
            high_speed,
            freight,
        }
    }

    pub fn get(&self, class: TrainClass) -> u32 {
        match class {
            TrainClass::Regional => self.regional,
            TrainClass::HighSpeed => self.high_speed,
            TrainClass::Freight => self.freight,
        }
    }

    pub fn total(&self) -> u32 {
        TrainClass::ALL.iter().map(|&c| self.get(c)).sum()
    }

    pub fn passenger(&self) -> u32 {
        TrainClass::ALL
            .iter()
            .filter(|c| c.is_passenger())
            .map(|&c| self.get(c))
            .sum()
    }
}

impl std::ops::Add for ClassCounts {
    type Output = ClassCounts;

    fn add(self, rhs: Self) -> Self {
        Self::new(
            self.regional + rhs.regional,
            self.high_speed + rhs.high_speed,
            self.freight + rhs.freight,
        )
    }
}

/// Trains requesting one route, with an optional mean service time (minutes).
#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub route: usize,
    pub counts: ClassCounts,
    pub service_time: Option<f64>,
}

impl Demand {
    pub fn new(route: usize, counts: ClassCounts) -> Self {
        Self {
            route,
            counts,
            service_time: None,
        }
    }

    pub fn with_service_time(mut self, minutes: f64) -> Self {
        self.service_time = Some(minutes);
        self
    }
}

/// A set of demands over a time horizon in minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingProgram {
    pub demands: Vec<Demand>,
    pub horizon: f64,
}

impl OperatingProgram {
    pub fn new(demands: Vec<Demand>, horizon: f64) -> Self {
        Self { demands, horizon }
    }

    pub fn validate(&self, junction: &Junction) -> Result<(), ProgramError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ProgramError::Horizon(self.horizon));
        }
        let routes = junction.route_count();
        for (index, d) in self.demands.iter().enumerate() {
            if d.route >= routes {
                return Err(ProgramError::UnknownRoute {
                    index,
                    route: d.route,
                    routes,
                });
            }
            if d.counts.total() == 0 {
                return Err(ProgramError::EmptyDemand(index));
            }
            if let Some(t) = d.service_time {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(ProgramError::ServiceTime { index, value: t });
                }
            }
        }
        Ok(())
    }

    pub fn total_trains(&self) -> u32 {
        self.demands.iter().map(|d| d.counts.total()).sum()
    }

    /// Demands of both programs; horizons must agree for the result to be
    /// meaningful, the first program's horizon is kept.
    pub fn merged(&self, other: &OperatingProgram) -> OperatingProgram {
        let mut demands = self.demands.clone();
        demands.extend(other.demands.iter().cloned());
        OperatingProgram::new(demands, self.horizon)
    }
}

/// Per-route rates (trains/minute) plus coefficients of variation.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSet {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub v_a: f64,
    pub v_b: f64,
}

impl RateSet {
    pub fn new(lambda: Vec<f64>, mu: Vec<f64>, v_a: f64, v_b: f64) -> Result<Self, ProgramError> {
        if let Some(&bad) = mu.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
            return Err(ProgramError::ServiceRate(bad));
        }
        debug_assert_eq!(lambda.len(), mu.len());
        Ok(Self {
            lambda,
            mu,
            v_a,
            v_b,
        })
    }

    /// Exponential arrivals and service (`v_A = v_B = 1`).
    pub fn markovian(lambda: Vec<f64>, mu: Vec<f64>) -> Result<Self, ProgramError> {
        Self::new(lambda, mu, 1.0, 1.0)
    }

    pub fn uniform_mu(lambda: Vec<f64>, mu: f64, v_a: f64, v_b: f64) -> Result<Self, ProgramError> {
        let k = lambda.len();
        Self::new(lambda, vec![mu; k], v_a, v_b)
    }

    pub fn routes(&self) -> usize {
        self.lambda.len()
    }

    pub fn rho(&self, route: usize) -> f64 {
        self.lambda[route] / self.mu[route]
    }
}

/// `λ_i = (trains on route i) / U`.
pub fn arrival_rates(
    program: &OperatingProgram,
    junction: &Junction,
) -> Result<Vec<f64>, ProgramError> {
    program.validate(junction)?;
    let mut totals = vec![0u64; junction.route_count()];
    for d in &program.demands {
        totals[d.route] += u64::from(d.counts.total());
    }
    Ok(totals
        .into_iter()
        .map(|n| n as f64 / program.horizon)
        .collect())
}

/// Reciprocal of the train-weighted mean service time per route.
///
/// With `override_minutes` every route gets `1 / override_minutes`. Routes
/// without any demand receive the pooled program mean; they never see an
/// arrival, so the value only has to be a valid positive rate.
pub fn service_rates(
    program: &OperatingProgram,
    junction: &Junction,
    override_minutes: Option<f64>,
) -> Result<Vec<f64>, ProgramError> {
    program.validate(junction)?;
    let k = junction.route_count();
    if let Some(b) = override_minutes {
        if !(b > 0.0 && b.is_finite()) {
            return Err(ProgramError::Override(b));
        }
        return Ok(vec![1.0 / b; k]);
    }
    let mut weighted = vec![0.0f64; k];
    let mut trains = vec![0u64; k];
    for (index, d) in program.demands.iter().enumerate() {
        let t = d.service_time.ok_or(ProgramError::MissingServiceTime {
            index,
            route: d.route,
        })?;
        let n = d.counts.total();
        weighted[d.route] += t * f64::from(n);
        trains[d.route] += u64::from(n);
    }
    let total_trains: u64 = trains.iter().sum();
    if total_trains == 0 {
        return Err(ProgramError::EmptyProgram);
    }
    let pooled = weighted.iter().sum::<f64>() / total_trains as f64;
    Ok((0..k)
        .map(|i| {
            if trains[i] == 0 {
                1.0 / pooled
            } else {
                1.0 / (weighted[i] / trains[i] as f64)
            }
        })
        .collect())
}

/// Occupancy `ρ = λ / μ`.
pub fn occupancy(lambda: f64, mu: f64) -> Result<f64, ProgramError> {
    if !(mu > 0.0) {
        return Err(ProgramError::ServiceRate(mu));
    }
    Ok(lambda / mu)
}

/// Share of passenger trains (regional + high-speed) among all trains.
pub fn passenger_ratio(program: &OperatingProgram) -> Result<f64, ProgramError> {
    let total = program.demands.iter().fold(ClassCounts::default(), |acc, d| acc + d.counts);
    if total.total() == 0 {
        return Err(ProgramError::EmptyProgram);
    }
    Ok(f64::from(total.passenger()) / f64::from(total.total()))
}

/// The four-route double-track junction: main line A-B (`r1`, `r3`) and a
/// branch towards C (`r2`, `r4`) with conflicts r1-r2, r2-r3 and r3-r4.
pub fn double_track_junction() -> Junction {
    let routes = vec![
        Route::new(0, "r1", "A", "B"),
        Route::new(1, "r2", "A", "C"),
        Route::new(2, "r3", "B", "A"),
        Route::new(3, "r4", "C", "A"),
    ];
    let conflicts = ConflictMatrix::from_pairs(4, &[(0, 1), (1, 2), (2, 3)]).expect("static");
    Junction::new("double_track", routes, conflicts).expect("static")
}

/// [`double_track_junction`] with an overpass: r2 no longer crosses r3.
pub fn double_track_overpass() -> Junction {
    let flat = double_track_junction();
    let conflicts = flat.conflicts.without_pair(1, 2);
    flat.with_conflicts("double_track_overpass", conflicts)
        .expect("static")
}

/// Two routes sharing a short single-track segment.
pub fn single_track_segment() -> Junction {
    Junction::from_names("single_track", &["r1", "r2"], &[("r1", "r2")]).expect("static")
}

/// Three routes on a crossover; `r2` conflicts with both `r1` and `r3`.
pub fn crossover_segment() -> Junction {
    Junction::from_names(
        "crossover",
        &["r1", "r2", "r3"],
        &[("r1", "r2"), ("r2", "r3")],
    )
    .expect("static")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn route_program(route: usize, counts: ClassCounts, horizon: f64) -> OperatingProgram {
        OperatingProgram::new(vec![Demand::new(route, counts)], horizon)
    }

    #[test]
    fn double_track_conflicts_match_route_table() {
        let j = double_track_junction();
        let c = &j.conflicts;
        assert_eq!(c.pairs(), vec![(0, 1), (1, 2), (2, 3)]);
        assert!((0..4).all(|i| c.conflicts(i, i)));
        assert_eq!(c.degree(2), 2);
        assert_eq!(c.degree(0), 1);
    }

    #[test]
    fn minimal_junction_is_accepted() {
        let c = ConflictMatrix::from_rows(&[vec![true]]).unwrap();
        let j = Junction::new("one", vec![Route::new(0, "r1", "A", "B")], c).unwrap();
        assert_eq!(j.route_count(), 1);
    }

    #[test]
    fn asymmetric_matrix_names_offending_pair() {
        let c = ConflictMatrix::from_rows(&[vec![true, true], vec![false, true]]).unwrap();
        let routes = vec![Route::new(0, "a", "", ""), Route::new(1, "b", "", "")];
        assert_eq!(
            Junction::new("x", routes, c).unwrap_err(),
            JunctionError::Asymmetric(0, 1)
        );
    }

    #[test]
    fn other_structural_errors() {
        let routes = vec![Route::new(0, "a", "", ""), Route::new(1, "b", "", "")];
        let mut c = ConflictMatrix::from_pairs(2, &[]).unwrap();
        c.set_raw(1, 1, false);
        assert_eq!(
            Junction::new("x", routes.clone(), c).unwrap_err(),
            JunctionError::MissingSelfConflict(1)
        );
        let c3 = ConflictMatrix::from_pairs(3, &[]).unwrap();
        assert_eq!(
            Junction::new("x", routes.clone(), c3).unwrap_err(),
            JunctionError::DimensionMismatch { dim: 3, routes: 2 }
        );
        let dup = vec![Route::new(0, "a", "", ""), Route::new(1, "a", "", "")];
        let c2 = ConflictMatrix::from_pairs(2, &[]).unwrap();
        assert!(matches!(
            Junction::new("x", dup, c2.clone()).unwrap_err(),
            JunctionError::DuplicateRouteName { first: 0, second: 1, .. }
        ));
        let gap = vec![Route::new(0, "a", "", ""), Route::new(2, "b", "", "")];
        assert!(matches!(
            Junction::new("x", gap, c2).unwrap_err(),
            JunctionError::RouteId { position: 1, id: 2 }
        ));
    }

    #[test]
    fn arrival_rates_per_hour_program() {
        let j = double_track_junction();
        let p = OperatingProgram::new(
            vec![
                Demand::new(0, ClassCounts::new(4, 1, 0)),
                Demand::new(1, ClassCounts::new(0, 4, 0)),
            ],
            60.0,
        );
        let l = arrival_rates(&p, &j).unwrap();
        assert_abs_diff_eq!(l[0], 0.0833, epsilon = 5e-5);
        assert_abs_diff_eq!(l[1], 0.0667, epsilon = 5e-5);
        assert_eq!(l[2], 0.0);
        assert_eq!(l[3], 0.0);
    }

    #[test]
    fn service_rates_weighted_mean() {
        let j = single_track_segment();
        let single = OperatingProgram::new(
            vec![Demand::new(0, ClassCounts::new(3, 0, 0)).with_service_time(2.5)],
            60.0,
        );
        assert_abs_diff_eq!(service_rates(&single, &j, None).unwrap()[0], 0.4, epsilon = 1e-15);

        let two = OperatingProgram::new(
            vec![
                Demand::new(0, ClassCounts::new(3, 0, 0)).with_service_time(2.0),
                Demand::new(0, ClassCounts::new(0, 0, 1)).with_service_time(4.0),
            ],
            60.0,
        );
        assert_abs_diff_eq!(service_rates(&two, &j, None).unwrap()[0], 0.4, epsilon = 1e-15);

        let mu = service_rates(&two, &j, Some(5.0)).unwrap();
        assert_eq!(mu, vec![0.2, 0.2]);
    }

    #[test]
    fn service_rates_errors() {
        let j = single_track_segment();
        let p = route_program(0, ClassCounts::new(1, 0, 0), 60.0);
        assert!(matches!(
            service_rates(&p, &j, None),
            Err(ProgramError::MissingServiceTime { index: 0, route: 0 })
        ));
        let empty = route_program(0, ClassCounts::default(), 60.0);
        assert_eq!(
            service_rates(&empty, &j, Some(1.0)),
            Err(ProgramError::EmptyDemand(0))
        );
        let bad = route_program(7, ClassCounts::new(1, 0, 0), 60.0);
        assert!(matches!(
            arrival_rates(&bad, &j),
            Err(ProgramError::UnknownRoute { route: 7, .. })
        ));
    }

    #[test]
    fn occupancy_cases() {
        assert_eq!(occupancy(0.1, 0.2).unwrap(), 0.5);
        assert_eq!(occupancy(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(occupancy(0.083, 0.083).unwrap(), 1.0);
        assert!(occupancy(0.1, 0.0).is_err());
    }

    #[test]
    fn passenger_ratio_cases() {
        let all_passenger = OperatingProgram::new(
            vec![
                Demand::new(0, ClassCounts::new(4, 1, 0)),
                Demand::new(1, ClassCounts::new(0, 4, 0)),
            ],
            60.0,
        );
        assert_eq!(passenger_ratio(&all_passenger).unwrap(), 1.0);
        assert_eq!(
            passenger_ratio(&route_program(0, ClassCounts::new(0, 0, 5), 60.0)).unwrap(),
            0.0
        );
        assert_eq!(
            passenger_ratio(&route_program(0, ClassCounts::new(4, 2, 2), 60.0)).unwrap(),
            0.75
        );
        assert!(passenger_ratio(&OperatingProgram::new(vec![], 60.0)).is_err());
    }

    fn counts() -> impl Strategy<Value = ClassCounts> {
        (0u32..20, 0u32..20, 0u32..20)
            .prop_filter("non-empty", |(a, b, c)| a + b + c > 0)
            .prop_map(|(a, b, c)| ClassCounts::new(a, b, c))
    }

    proptest! {
        #[test]
        fn arrival_rates_are_additive(a in counts(), b in counts(), route in 0usize..4) {
            let j = double_track_junction();
            let pa = route_program(route, a, 60.0);
            let pb = route_program(route, b, 60.0);
            let sum: Vec<f64> = arrival_rates(&pa, &j).unwrap().iter()
                .zip(arrival_rates(&pb, &j).unwrap())
                .map(|(x, y)| x + y)
                .collect();
            let merged = arrival_rates(&pa.merged(&pb), &j).unwrap();
            for (x, y) in sum.iter().zip(&merged) {
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }

        #[test]
        fn service_rate_invariant_under_split(t in 0.5f64..20.0, n1 in 1u32..30, n2 in 1u32..30) {
            let j = single_track_segment();
            let whole = OperatingProgram::new(
                vec![Demand::new(0, ClassCounts::new(n1 + n2, 0, 0)).with_service_time(t)], 60.0);
            let split = OperatingProgram::new(vec![
                Demand::new(0, ClassCounts::new(n1, 0, 0)).with_service_time(t),
                Demand::new(0, ClassCounts::new(0, n2, 0)).with_service_time(t),
            ], 60.0);
            let a = service_rates(&whole, &j, None).unwrap()[0];
            let b = service_rates(&split, &j, None).unwrap()[0];
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }

        #[test]
        fn passenger_ratio_bounds(c in counts()) {
            let p = passenger_ratio(&route_program(0, c, 60.0)).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert_eq!(p == 1.0, c.freight == 0);
        }

        #[test]
        fn occupancy_times_mu_recovers_lambda(l in 0.0f64..2.0, m in 0.01f64..2.0) {
            let rho = occupancy(l, m).unwrap();
            prop_assert!((rho * m - l).abs() <= 4.0 * f64::EPSILON * l.max(1e-300));
        }
    }
}
