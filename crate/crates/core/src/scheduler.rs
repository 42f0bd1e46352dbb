//! Epoch schedulers. Each strategy decides which insertion cases are worth
//! evaluating for a (request, vehicle) trial; the shared driver does the rest:
//! ordering, capacity screening, cost evaluation, QoS filtering, the global
//! arg-min and the state update.
//!
//! Strategies live behind [`Scheduler`] trait objects and are looked up by
//! name in a [`SchedulerRegistry`]. The built-ins are `psap` (PSA-gated) and
//! `es` (exhaustive).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{make_psa_rect, psa_contains, Point, VehiclePsa};
use crate::insertion::{
    classify, closed_form_counts, insertion_cost, positions, qos_check, splice, stop_nodes, Candidate, InsertionCase,
    QosLimits,
};
use crate::model::{
    waiting_time, GatingMode, Request, RequestId, RequestState, SimConfig, Stop, StopKind, Vehicle, VehicleId,
    WorldState,
};
use crate::roadnet::RoadNetwork;

/// Candidate counts per insertion case: `m_*` evaluated, `n_*` what an
/// exhaustive search evaluates over the same trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochCounters {
    pub m_a: u64,
    pub m_b: u64,
    pub m_c: u64,
    pub n_a: u64,
    pub n_b: u64,
    pub n_c: u64,
    /// (request, vehicle) pairs that passed the capacity screen.
    pub trials: u64,
    /// Of those, trials for requests past the waiting threshold.
    pub overdue_trials: u64,
}

impl EpochCounters {
    pub fn evaluated(&self, case: InsertionCase) -> u64 {
        [self.m_a, self.m_b, self.m_c][case.index()]
    }

    pub fn exhaustive(&self, case: InsertionCase) -> u64 {
        [self.n_a, self.n_b, self.n_c][case.index()]
    }

    fn add_evaluated(&mut self, case: InsertionCase) {
        match case {
            InsertionCase::A => self.m_a += 1,
            InsertionCase::B => self.m_b += 1,
            InsertionCase::C => self.m_c += 1,
        }
    }

    fn add_exhaustive(&mut self, counts: [u64; 3]) {
        self.n_a += counts[0];
        self.n_b += counts[1];
        self.n_c += counts[2];
    }

    /// Fraction of exhaustive evaluations avoided in `case`; `None` when nothing was due.
    pub fn psi(&self, case: InsertionCase) -> Option<f64> {
        let n = self.exhaustive(case);
        (n > 0).then(|| (n - self.evaluated(case)) as f64 / n as f64)
    }

    pub fn total_evaluated(&self) -> u64 {
        self.m_a + self.m_b + self.m_c
    }

    pub fn total_exhaustive(&self) -> u64 {
        self.n_a + self.n_b + self.n_c
    }

    pub fn merge(&mut self, o: &EpochCounters) {
        self.m_a += o.m_a;
        self.m_b += o.m_b;
        self.m_c += o.m_c;
        self.n_a += o.n_a;
        self.n_b += o.n_b;
        self.n_c += o.n_c;
        self.trials += o.trials;
        self.overdue_trials += o.overdue_trials;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub request: RequestId,
    pub vehicle: VehicleId,
    pub i: usize,
    pub j: usize,
    pub cost: f64,
    pub case: InsertionCase,
    /// Matched past the waiting threshold (buffer bound not enforced for it).
    pub overdue: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochOutcome {
    pub assignments: Vec<Assignment>,
    pub counters: EpochCounters,
}

/// Everything a gate needs to decide on one trial.
#[derive(Clone, Copy, Debug)]
pub struct GateInput<'a> {
    pub psa: &'a VehiclePsa,
    pub o: Point,
    pub d: Point,
    /// Positions of the stops currently on the vehicle's path.
    pub path_points: &'a [Point],
    pub vehicle_pos: Point,
    pub buffer_km: f64,
}

/// PSA gate for one insertion case.
pub fn gate(input: &GateInput<'_>, case: InsertionCase, mode: GatingMode) -> bool {
    let has_path = !input.path_points.is_empty();
    if input.psa.is_empty() && has_path {
        return false;
    }
    match case {
        InsertionCase::A => psa_contains(input.psa, input.o) && psa_contains(input.psa, input.d),
        InsertionCase::B => {
            let o_in = psa_contains(input.psa, input.o);
            match mode {
                GatingMode::Literal => o_in && !psa_contains(input.psa, input.d),
                GatingMode::Inclusive => o_in,
            }
        }
        InsertionCase::C => {
            if !has_path {
                return true;
            }
            match make_psa_rect(input.vehicle_pos, input.o, input.buffer_km) {
                Some(r) => input.path_points.iter().all(|p| r.contains(*p)),
                None => false,
            }
        }
    }
}

/// PSA of a vehicle from its furthest request: the one whose destination is
/// the last stop of the path.
pub fn furthest_psa(net: &RoadNetwork, world: &WorldState, vehicle: &Vehicle, buffer_km: f64, max_detour: f64) -> VehiclePsa {
    let Some(last) = vehicle.path.last() else {
        return VehiclePsa::Empty;
    };
    debug_assert_eq!(last.kind, StopKind::Destination);
    let r = world.request(last.request);
    let (o, d) = (net.position(r.o), net.position(r.d));
    let Some(beta) = make_psa_rect(o, d, (1.0 + max_detour) * r.direct_dist) else {
        return VehiclePsa::Empty;
    };
    match r.state {
        RequestState::Onboard => VehiclePsa::Single { furthest: r.id, beta },
        _ => {
            let p_s = r.p_s.unwrap_or_else(|| vehicle.position(net));
            VehiclePsa::Union { furthest: r.id, alpha: make_psa_rect(p_s, o, buffer_km), beta }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopEvent {
    Pickup,
    Dropoff,
}

/// Recomputes the vehicle's PSA after a pickup or drop-off of `request`
/// when that event touched its furthest request.
pub fn refresh_psa_on_event(
    net: &RoadNetwork,
    world: &mut WorldState,
    vehicle: VehicleId,
    request: RequestId,
    _event: StopEvent,
    config: &SimConfig,
) {
    let v = &world.vehicles[vehicle.0 as usize];
    if v.psa.furthest() != Some(request) && !(v.path.is_empty() && !v.psa.is_empty()) {
        return;
    }
    let psa = furthest_psa(net, world, v, config.buffer_km, config.max_detour);
    world.vehicles[vehicle.0 as usize].psa = psa;
}

/// Read-only view of one (request, vehicle) trial, handed to observers.
pub struct Trial<'a> {
    pub net: &'a RoadNetwork,
    pub world: &'a WorldState,
    pub vehicle: &'a Vehicle,
    pub request: &'a Request,
    pub check_buffer: bool,
    /// Gate verdict per case, indexed by [`InsertionCase::index`].
    pub admitted: [bool; 3],
    /// Candidates whose cost was evaluated, before QoS filtering.
    pub evaluated: &'a [Candidate],
    pub limits: &'a QosLimits,
}

pub trait TrialObserver {
    fn on_trial(&mut self, trial: &Trial<'_>);
}

/// An insertion strategy: decides which cases are evaluated for a trial
/// whose request is still within the waiting threshold.
pub trait Scheduler: Send + Sync {
    fn name(&self) -> &str;

    fn admits(&self, input: &GateInput<'_>, case: InsertionCase) -> bool;

    fn run_epoch(&self, net: &RoadNetwork, world: &mut WorldState, config: &SimConfig, now: f64) -> EpochOutcome {
        run_epoch(self, net, world, config, now, None)
    }
}

/// PSA-pruned planner.
#[derive(Clone, Copy, Debug, Default)]
pub struct Psap {
    pub mode: GatingMode,
}

impl Scheduler for Psap {
    fn name(&self) -> &str {
        "psap"
    }

    fn admits(&self, input: &GateInput<'_>, case: InsertionCase) -> bool {
        gate(input, case, self.mode)
    }
}

/// Exhaustive search over every insertion position.
#[derive(Clone, Copy, Debug, Default)]
pub struct Exhaustive;

impl Scheduler for Exhaustive {
    fn name(&self) -> &str {
        "es"
    }

    fn admits(&self, _input: &GateInput<'_>, _case: InsertionCase) -> bool {
        true
    }
}

pub type SchedulerFactory = fn(&SimConfig) -> Box<dyn Scheduler>;

pub struct SchedulerRegistry {
    factories: BTreeMap<String, SchedulerFactory>,
}

impl SchedulerRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &str, factory: SchedulerFactory) -> &mut Self {
        self.factories.insert(name.to_owned(), factory);
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, config: &SimConfig) -> Result<Box<dyn Scheduler>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown scheduler '{name}' (available: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        Ok(factory(config))
    }
}

impl Default for SchedulerRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("psap", |c| Box::new(Psap { mode: c.gating }));
        r.register("es", |_| Box::new(Exhaustive));
        r
    }
}

fn limits_of(config: &SimConfig) -> QosLimits {
    QosLimits {
        max_detour: config.max_detour,
        buffer_km: config.buffer_km,
        occupancy: config.strict_occupancy.then_some(config.capacity),
    }
}

fn by_cost_then_position(a: &Candidate, b: &Candidate) -> Ordering {
    a.cost.total_cmp(&b.cost).then(a.i.cmp(&b.i)).then(a.j.cmp(&b.j))
}

/// One scheduling pass over the released unscheduled requests at `now`.
///
/// Requests go in descending waiting time (ties by id). The winner for a
/// request is the lexicographically smallest feasible `(cost, vehicle, i, j)`.
pub fn run_epoch<S: Scheduler + ?Sized>(
    scheduler: &S,
    net: &RoadNetwork,
    world: &mut WorldState,
    config: &SimConfig,
    now: f64,
    mut observer: Option<&mut dyn TrialObserver>,
) -> EpochOutcome {
    let limits = limits_of(config);
    let mut out = EpochOutcome::default();
    let mut order: Vec<(f64, RequestId)> = world
        .released_unscheduled(now)
        .into_iter()
        .map(|id| (waiting_time(world.request(id), now), id))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut cands: Vec<Candidate> = Vec::new();
    let mut path_points: Vec<Point> = Vec::new();
    for (wait, rid) in order {
        let request = world.request(rid).clone();
        let check_buffer = wait <= config.wait_threshold_s;
        let (o_pos, d_pos) = (net.position(request.o), net.position(request.d));
        let mut best: Option<Assignment> = None;

        for v in &world.vehicles {
            if !config.strict_occupancy && v.committed_passengers(world) + request.n > v.capacity {
                continue;
            }
            let m = v.path.len();
            out.counters.trials += 1;
            out.counters.add_exhaustive(closed_form_counts(m + 1));

            let admitted = if check_buffer {
                path_points.clear();
                path_points.extend(v.path.iter().map(|s| net.position(s.node)));
                let input = GateInput {
                    psa: &v.psa,
                    o: o_pos,
                    d: d_pos,
                    path_points: &path_points,
                    vehicle_pos: v.position(net),
                    buffer_km: config.buffer_km,
                };
                InsertionCase::ALL.map(|c| scheduler.admits(&input, c))
            } else {
                out.counters.overdue_trials += 1;
                [true; 3]
            };

            let nodes = stop_nodes(v);
            cands.clear();
            for (i, j) in positions(m) {
                let case = classify(i, j, m);
                if !admitted[case.index()] {
                    continue;
                }
                let cost = insertion_cost(net, v.node, &nodes, request.o, request.d, i, j);
                out.counters.add_evaluated(case);
                cands.push(Candidate { i, j, case, cost });
            }
            if let Some(obs) = observer.as_deref_mut() {
                obs.on_trial(&Trial {
                    net,
                    world,
                    vehicle: v,
                    request: &request,
                    check_buffer,
                    admitted,
                    evaluated: &cands,
                    limits: &limits,
                });
            }

            // Cheapest first; the first feasible candidate is this vehicle's best,
            // and only a strictly cheaper one can beat an earlier vehicle.
            cands.sort_by(by_cost_then_position);
            for c in &cands {
                if !c.cost.is_finite() || best.is_some_and(|b| c.cost >= b.cost) {
                    break;
                }
                let spliced = splice(&v.path, Stop::origin(&request), Stop::destination(&request), c.i, c.j);
                if qos_check(net, world, v, &spliced, &request, check_buffer, &limits).is_ok() {
                    best = Some(Assignment {
                        request: rid,
                        vehicle: v.id,
                        i: c.i,
                        j: c.j,
                        cost: c.cost,
                        case: c.case,
                        overdue: !check_buffer,
                    });
                    break;
                }
            }
        }

        if let Some(a) = best {
            apply_assignment(net, world, config, &a, now);
            out.assignments.push(a);
        }
    }
    out
}

/// Splices the request into the vehicle's path, records the match and
/// refreshes the PSA when the new destination ends the path.
pub fn apply_assignment(net: &RoadNetwork, world: &mut WorldState, config: &SimConfig, a: &Assignment, now: f64) {
    let request = world.request(a.request).clone();
    let vi = a.vehicle.0 as usize;
    let v = &mut world.vehicles[vi];
    let m = v.path.len();
    let first_before = v.path.first().map(|s| s.node);
    v.path = splice(&v.path, Stop::origin(&request), Stop::destination(&request), a.i, a.j);
    v.service_list.push(a.request);
    if v.path.first().map(|s| s.node) != first_before {
        v.invalidate_route();
    }
    let (p_s, odo) = (v.position(net), v.odometer);
    world.request_mut(a.request).mark_scheduled(now, a.vehicle, p_s, odo, !a.overdue);
    if a.j == m + 1 {
        let psa = furthest_psa(net, world, &world.vehicles[vi], config.buffer_km, config.max_detour);
        world.vehicles[vi].psa = psa;
    }
}

/// PSAP epoch with the configured gating mode.
pub fn psap_epoch(net: &RoadNetwork, world: &mut WorldState, config: &SimConfig, now: f64) -> EpochOutcome {
    run_epoch(&Psap { mode: config.gating }, net, world, config, now, None)
}

/// Exhaustive-search epoch.
pub fn es_epoch(net: &RoadNetwork, world: &mut WorldState, config: &SimConfig, now: f64) -> EpochOutcome {
    run_epoch(&Exhaustive, net, world, config, now, None)
}
