//! Epoch-driven simulation: vehicles move continuously along shortest paths,
//! pickups and drop-offs fire at their exact times, and the scheduler runs at
//! every epoch boundary.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::traffic_metrics;
use crate::error::{Error, Result};
use crate::insertion::InsertionCase;
use crate::model::{
    waiting_time, Request, RequestId, RequestState, SimConfig, StopKind, Vehicle, VehicleId, WorldState,
};
use crate::roadnet::{NodeId, RoadNetwork};
use crate::scheduler::{refresh_psa_on_event, run_epoch, EpochCounters, Scheduler, StopEvent, Trial, TrialObserver};
use crate::util::{rng_for, write_atomic, Stream};

/// Distances below this are treated as zero when moving vehicles.
const MOVE_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RequestRelease,
    EpochRun,
    Pickup,
    Dropoff,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub t: f64,
    pub kind: EventKind,
    pub req: Option<RequestId>,
    pub veh: Option<VehicleId>,
}

/// Moves vehicle `vid` for `dt` seconds starting at `t0`, serving every stop
/// it reaches on the way. Returns the pickups and drop-offs in time order.
pub fn advance_vehicle(
    net: &RoadNetwork,
    world: &mut WorldState,
    vid: VehicleId,
    t0: f64,
    dt: f64,
    config: &SimConfig,
) -> Result<Vec<SimEvent>> {
    let vi = vid.0 as usize;
    let mut events = Vec::new();
    let mut budget = config.distance_in(dt);
    let mut moved = 0.0;
    loop {
        let v = &mut world.vehicles[vi];
        if v.residual_km > 0.0 {
            if budget + MOVE_EPS >= v.residual_km {
                let step = v.residual_km;
                v.odometer += step;
                moved += step;
                budget = (budget - step).max(0.0);
                v.residual_km = 0.0;
                v.edge_km = 0.0;
                v.from_node = v.node;
            } else {
                v.odometer += budget;
                v.residual_km -= budget;
                break;
            }
        }

        serve_stops_here(net, world, vi, t0 + config.time_for(moved), config, &mut events);

        let v = &mut world.vehicles[vi];
        let Some(target) = v.path.first().map(|s| s.node) else {
            break;
        };
        if budget <= MOVE_EPS {
            break;
        }
        if v.route_target != Some(target) || v.route.is_empty() {
            let nodes = net.node_path(v.node, target).ok_or(Error::NoPath { from: v.node, to: target })?;
            v.route = nodes[1..].iter().rev().copied().collect();
            v.route_target = Some(target);
        }
        let next = v.route.pop().expect("route to a distinct node has at least one hop");
        let len = net.edge_length(v.node, next).ok_or(Error::NoPath { from: v.node, to: next })?;
        v.from_node = v.node;
        v.node = next;
        v.edge_km = len;
        v.residual_km = len;
    }
    Ok(events)
}

fn serve_stops_here(
    net: &RoadNetwork,
    world: &mut WorldState,
    vi: usize,
    t: f64,
    config: &SimConfig,
    events: &mut Vec<SimEvent>,
) {
    loop {
        let v = &mut world.vehicles[vi];
        let Some(&stop) = v.path.first() else { return };
        if stop.node != v.node || v.residual_km > 0.0 {
            return;
        }
        v.path.remove(0);
        v.invalidate_route();
        let (odo, vid) = (v.odometer, v.id);
        let kind = match stop.kind {
            StopKind::Origin => {
                world.request_mut(stop.request).mark_picked_up(t, odo);
                refresh_psa_on_event(net, world, vid, stop.request, StopEvent::Pickup, config);
                EventKind::Pickup
            }
            StopKind::Destination => {
                world.request_mut(stop.request).mark_dropped_off(t, odo);
                world.vehicles[vi].service_list.retain(|r| *r != stop.request);
                refresh_psa_on_event(net, world, vid, stop.request, StopEvent::Dropoff, config);
                EventKind::Dropoff
            }
        };
        events.push(SimEvent { t, kind, req: Some(stop.request), veh: Some(vid) });
    }
}

/// Private-vehicle baseline: each request driven alone along its shortest
/// path, one vehicle per two requests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoevBaseline {
    pub total_km: f64,
    pub fleet: u64,
}

pub fn poev_baseline(requests: &[Request]) -> PoevBaseline {
    PoevBaseline {
        total_km: requests.iter().map(|r| r.direct_dist).sum(),
        fleet: (requests.len() as u64).div_ceil(2),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub t_s: f64,
    pub counters: EpochCounters,
    pub psi_a: Option<f64>,
    pub psi_b: Option<f64>,
    pub psi_c: Option<f64>,
    /// Onboard requests per moving vehicle; absent when nothing moves.
    pub sharing_rate: Option<f64>,
    /// Fraction of the fleet that is moving.
    pub utilization: f64,
    /// Fraction of the fleet with a nonempty service list.
    pub busy_fraction: f64,
    /// Direct distance of completed requests minus fleet distance so far.
    pub saved_km: f64,
    pub assigned: usize,
    pub unserved: usize,
    pub onboard: usize,
    pub moving: usize,
    pub busy: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub epoch: u64,
    pub t_s: f64,
    pub request: RequestId,
    pub vehicle: VehicleId,
    pub i: usize,
    pub j: usize,
    pub case: InsertionCase,
    pub cost_km: f64,
    pub overdue: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub id: RequestId,
    pub state: RequestState,
    pub vehicle: Option<VehicleId>,
    pub t_s: f64,
    pub schedule_s: Option<f64>,
    pub pickup_s: Option<f64>,
    pub dropoff_s: Option<f64>,
    pub waiting_s: Option<f64>,
    pub travel_s: Option<f64>,
    pub direct_km: f64,
    pub detour: Option<f64>,
    pub buffer_km: Option<f64>,
    pub buffer_guaranteed: bool,
}

impl RequestOutcome {
    fn of(r: &Request) -> Self {
        Self {
            id: r.id,
            state: r.state,
            vehicle: r.vehicle,
            t_s: r.t,
            schedule_s: r.schedule_time,
            pickup_s: r.pickup_time,
            dropoff_s: r.dropoff_time,
            waiting_s: r.pickup_time.map(|_| waiting_time(r, f64::NAN)),
            travel_s: r.dropoff_time.zip(r.pickup_time).map(|(d, p)| d - p),
            direct_km: r.direct_dist,
            detour: r.realized_detour(),
            buffer_km: r.realized_buffer(),
            buffer_guaranteed: r.buffer_guaranteed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub scheduler: String,
    pub end_s: f64,
    pub epochs: u64,
    pub requests: usize,
    pub completed: usize,
    pub in_progress: usize,
    pub unserved: usize,
    pub fleet_km: f64,
    pub poev: PoevBaseline,
    /// Direct distance of completed requests minus fleet distance.
    pub saved_km: f64,
    pub counters: EpochCounters,
    pub mean_waiting_s: Option<f64>,
    pub max_detour: Option<f64>,
    pub max_guaranteed_buffer_km: Option<f64>,
    pub events: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub summary: SimSummary,
    pub epochs: Vec<EpochRecord>,
    pub assignments: Vec<AssignmentRecord>,
    pub requests: Vec<RequestOutcome>,
}

/// A finished run: the report, the event log and the final world state.
#[derive(Clone, Debug)]
pub struct SimRun {
    pub report: SimReport,
    pub events: Vec<SimEvent>,
    pub world: WorldState,
}

/// Hooks into a running simulation, for instrumentation and invariant checks.
pub trait SimObserver {
    fn on_trial(&mut self, _trial: &Trial<'_>) {}
    fn after_epoch(&mut self, _net: &RoadNetwork, _world: &WorldState, _now: f64) {}
}

struct NoObserver;
impl SimObserver for NoObserver {}

struct TrialAdapter<'a>(&'a mut dyn SimObserver);

impl TrialObserver for TrialAdapter<'_> {
    fn on_trial(&mut self, trial: &Trial<'_>) {
        self.0.on_trial(trial);
    }
}

/// Places `n` vehicles on uniformly drawn nodes.
pub fn place_vehicles(net: &RoadNetwork, config: &SimConfig) -> Vec<Vehicle> {
    let mut rng = rng_for(config.seed, Stream::Placement);
    (0..config.n_vehicles)
        .map(|i| {
            let node = NodeId(rng.random_range(0..net.node_count() as u32));
            Vehicle::new(VehicleId(i), config.capacity, node)
        })
        .collect()
}

pub fn run(net: &RoadNetwork, requests: Vec<Request>, config: &SimConfig, scheduler: &dyn Scheduler) -> Result<SimRun> {
    run_observed(net, requests, config, scheduler, &mut NoObserver)
}

/// Runs to completion (every request dropped off), to the horizon, or until
/// no further progress is possible.
pub fn run_observed(
    net: &RoadNetwork,
    requests: Vec<Request>,
    config: &SimConfig,
    scheduler: &dyn Scheduler,
    observer: &mut dyn SimObserver,
) -> Result<SimRun> {
    config.validate()?;
    let vehicles = place_vehicles(net, config);
    let mut nodes: Vec<NodeId> = requests.iter().flat_map(|r| [r.o, r.d]).collect();
    nodes.extend(vehicles.iter().map(|v| v.node));
    nodes.sort_unstable();
    nodes.dedup();
    net.check_strongly_connected(&nodes)?;

    let poev = poev_baseline(&requests);
    let mut world = WorldState::new(vehicles, requests)?;
    let mut release_order: Vec<usize> = (0..world.requests.len()).collect();
    release_order.sort_by(|&a, &b| world.requests[a].t.total_cmp(&world.requests[b].t).then(a.cmp(&b)));
    let last_release = world.requests.iter().map(|r| r.t).fold(0.0, f64::max);

    let mut events = Vec::new();
    let mut epochs = Vec::new();
    let mut assignments = Vec::new();
    let mut totals = EpochCounters::default();
    let mut released = 0usize;
    let mut epoch = 0u64;
    let mut now = 0.0;

    while !world.requests.iter().all(|r| r.state == RequestState::Completed) {
        if config.horizon_s.is_some_and(|h| now >= h) {
            break;
        }
        world.clock = now;
        while released < release_order.len() && world.requests[release_order[released]].t <= now {
            let r = &world.requests[release_order[released]];
            events.push(SimEvent { t: r.t, kind: EventKind::RequestRelease, req: Some(r.id), veh: None });
            released += 1;
        }
        events.push(SimEvent { t: now, kind: EventKind::EpochRun, req: None, veh: None });

        let out = run_epoch(scheduler, net, &mut world, config, now, Some(&mut TrialAdapter(&mut *observer)));
        totals.merge(&out.counters);
        for a in &out.assignments {
            assignments.push(AssignmentRecord {
                epoch,
                t_s: now,
                request: a.request,
                vehicle: a.vehicle,
                i: a.i,
                j: a.j,
                case: a.case,
                cost_km: a.cost,
                overdue: a.overdue,
            });
        }
        epochs.push(epoch_record(epoch, now, &world, &out.counters, out.assignments.len()));
        observer.after_epoch(net, &world, now);

        let stuck = out.assignments.is_empty()
            && last_release <= now
            && world.vehicles.iter().all(Vehicle::is_idle)
            && world
                .requests
                .iter()
                .filter(|r| r.state == RequestState::Unscheduled)
                .all(|r| waiting_time(r, now) > config.wait_threshold_s);
        if stuck {
            break;
        }

        let mut next = (epoch + 1) as f64 * config.epoch_s;
        if let Some(h) = config.horizon_s {
            next = next.min(h);
        }
        for vi in 0..world.vehicles.len() {
            events.extend(advance_vehicle(net, &mut world, VehicleId(vi as u32), now, next - now, config)?);
        }
        now = next;
        epoch += 1;
    }
    world.clock = now;
    events.sort_by(|a, b| a.t.total_cmp(&b.t));

    let summary = summarize(&world, scheduler.name(), now, epoch, poev, totals, events.len());
    let report = SimReport {
        config: config.clone(),
        summary,
        epochs,
        assignments,
        requests: world.requests.iter().map(RequestOutcome::of).collect(),
    };
    Ok(SimRun { report, events, world })
}

fn completed_direct(world: &WorldState) -> f64 {
    world.requests.iter().filter(|r| r.state == RequestState::Completed).map(|r| r.direct_dist).sum()
}

fn fleet_km(world: &WorldState) -> f64 {
    world.vehicles.iter().map(|v| v.odometer).sum()
}

fn epoch_record(epoch: u64, now: f64, world: &WorldState, counters: &EpochCounters, assigned: usize) -> EpochRecord {
    let m = traffic_metrics(world);
    EpochRecord {
        epoch,
        t_s: now,
        counters: *counters,
        psi_a: counters.psi(InsertionCase::A),
        psi_b: counters.psi(InsertionCase::B),
        psi_c: counters.psi(InsertionCase::C),
        sharing_rate: m.sharing_rate,
        utilization: m.utilization,
        busy_fraction: m.busy_fraction,
        saved_km: m.saved_km,
        assigned,
        unserved: world.released_unscheduled(now).len(),
        onboard: m.onboard,
        moving: m.moving,
        busy: m.busy,
    }
}

fn summarize(
    world: &WorldState,
    scheduler: &str,
    end_s: f64,
    epochs: u64,
    poev: PoevBaseline,
    counters: EpochCounters,
    events: usize,
) -> SimSummary {
    let done: Vec<&Request> = world.requests.iter().filter(|r| r.state == RequestState::Completed).collect();
    let waits: Vec<f64> = world.requests.iter().filter(|r| r.pickup_time.is_some()).map(|r| waiting_time(r, end_s)).collect();
    let fmax = |it: &mut dyn Iterator<Item = f64>| it.fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    let fleet = fleet_km(world);
    SimSummary {
        scheduler: scheduler.to_owned(),
        end_s,
        epochs,
        requests: world.requests.len(),
        completed: done.len(),
        in_progress: world.count(RequestState::Waiting) + world.count(RequestState::Onboard),
        unserved: world.count(RequestState::Unscheduled),
        fleet_km: fleet,
        poev,
        saved_km: completed_direct(world) - fleet,
        counters,
        mean_waiting_s: (!waits.is_empty()).then(|| waits.iter().sum::<f64>() / waits.len() as f64),
        max_detour: fmax(&mut done.iter().filter_map(|r| r.realized_detour())),
        max_guaranteed_buffer_km: fmax(
            &mut world.requests.iter().filter(|r| r.buffer_guaranteed).filter_map(|r| r.realized_buffer()),
        ),
        events,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-epoch metrics table.
pub fn metrics_csv(epochs: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,t_s,psi_A,psi_B,psi_C,sharing_rate,utilization,saved_km,assigned,unserved\n");
    for e in epochs {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            e.epoch,
            e.t_s,
            opt(e.psi_a),
            opt(e.psi_b),
            opt(e.psi_c),
            opt(e.sharing_rate),
            e.utilization,
            e.saved_km,
            e.assigned,
            e.unserved
        );
    }
    s
}

pub fn assignments_csv(rows: &[AssignmentRecord]) -> String {
    let mut s = String::from("epoch,t_s,request,vehicle,i,j,case,cost_km,overdue\n");
    for a in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:?},{},{}",
            a.epoch, a.t_s, a.request, a.vehicle, a.i, a.j, a.case, a.cost_km, a.overdue
        );
    }
    s
}

pub fn outcomes_csv(rows: &[RequestOutcome]) -> String {
    let mut s = String::from(
        "id,state,vehicle,t_s,schedule_s,pickup_s,dropoff_s,waiting_s,travel_s,direct_km,detour,buffer_km,buffer_guaranteed\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:?},{},{},{},{},{},{},{},{},{},{},{}",
            r.id,
            r.state,
            r.vehicle.map(|v| v.to_string()).unwrap_or_default(),
            r.t_s,
            opt(r.schedule_s),
            opt(r.pickup_s),
            opt(r.dropoff_s),
            opt(r.waiting_s),
            opt(r.travel_s),
            r.direct_km,
            opt(r.detour),
            opt(r.buffer_km),
            r.buffer_guaranteed
        );
    }
    s
}

pub fn events_jsonl(events: &[SimEvent]) -> Result<String> {
    let mut s = String::new();
    for e in events {
        s.push_str(&serde_json::to_string(e)?);
        s.push('\n');
    }
    Ok(s)
}

/// Writes `report.json`, `epochs.csv`, `assignments.csv`, `outcomes.csv` and
/// `events.jsonl` into `dir`.
pub fn write_outputs(run: &SimRun, dir: &Path) -> Result<()> {
    write_atomic(&dir.join("report.json"), serde_json::to_string_pretty(&run.report)?.as_bytes())?;
    write_atomic(&dir.join("epochs.csv"), metrics_csv(&run.report.epochs).as_bytes())?;
    write_atomic(&dir.join("assignments.csv"), assignments_csv(&run.report.assignments).as_bytes())?;
    write_atomic(&dir.join("outcomes.csv"), outcomes_csv(&run.report.requests).as_bytes())?;
    write_atomic(&dir.join("events.jsonl"), events_jsonl(&run.events)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Stop;
    use crate::roadnet::gen_grid;
    use crate::scheduler::{Exhaustive, Psap};

    fn cfg(n: u32) -> SimConfig {
        SimConfig { n_vehicles: n, ..SimConfig::default() }
    }

    fn req(net: &RoadNetwork, id: u64, t: f64, o: u32, d: u32) -> Request {
        Request::new(RequestId(id), 1, t, NodeId(o), NodeId(d), net.dist(NodeId(o), NodeId(d)))
    }

    /// Vehicle at node 0 already matched to 0 -> 3 on a unit line.
    fn line_world() -> (RoadNetwork, WorldState) {
        let net = gen_grid(11, 2, 1.0).unwrap();
        let mut r = req(&net, 1, 0.0, 0, 3);
        let mut v = Vehicle::new(VehicleId(0), 5, NodeId(0));
        r.mark_scheduled(0.0, v.id, net.position(NodeId(0)), 0.0, true);
        v.service_list.push(r.id);
        v.path = vec![Stop::origin(&r), Stop::destination(&r)];
        let world = WorldState::new(vec![v], vec![r]).unwrap();
        (net, world)
    }

    #[test]
    fn dropoff_after_three_km_at_thirty_kmh() {
        let (net, mut world) = line_world();
        let c = cfg(1);
        let mut events = Vec::new();
        for k in 0..40 {
            events.extend(advance_vehicle(&net, &mut world, VehicleId(0), k as f64 * 10.0, 10.0, &c).unwrap());
        }
        assert_eq!(events.len(), 2);
        assert_eq!((events[0].kind, events[0].t), (EventKind::Pickup, 0.0));
        assert_eq!(events[1].kind, EventKind::Dropoff);
        assert!((events[1].t - 360.0).abs() < 1e-6);
        let r = world.request(RequestId(1));
        assert_eq!(r.state, RequestState::Completed);
        assert!(r.realized_detour().unwrap().abs() < 1e-9);
        assert!(world.vehicles[0].is_idle());
        assert!((world.vehicles[0].odometer - 3.0).abs() < 1e-9);
    }

    #[test]
    fn mid_edge_position_interpolates() {
        let (net, mut world) = line_world();
        advance_vehicle(&net, &mut world, VehicleId(0), 0.0, 60.0, &cfg(1)).unwrap();
        let v = &world.vehicles[0];
        // 0.5 km in: heading to node 1 with 0.5 km left.
        assert_eq!(v.node, NodeId(1));
        assert!((v.residual_km - 0.5).abs() < 1e-12);
        assert!((v.position(&net).x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn idle_vehicle_stays_put() {
        let net = gen_grid(3, 3, 1.0).unwrap();
        let mut world = WorldState::new(vec![Vehicle::new(VehicleId(0), 5, NodeId(4))], Vec::new()).unwrap();
        let events = advance_vehicle(&net, &mut world, VehicleId(0), 0.0, 60.0, &cfg(1)).unwrap();
        assert!(events.is_empty());
        let v = &world.vehicles[0];
        assert_eq!((v.node, v.odometer), (NodeId(4), 0.0));
    }

    #[test]
    fn close_stops_fire_in_one_step() {
        let net = gen_grid(11, 2, 0.1).unwrap();
        let mut a = req(&net, 1, 0.0, 0, 2);
        let mut b = req(&net, 2, 0.0, 0, 4);
        let mut v = Vehicle::new(VehicleId(0), 5, NodeId(0));
        for r in [&mut a, &mut b] {
            r.mark_scheduled(0.0, v.id, net.position(NodeId(0)), 0.0, true);
            r.mark_picked_up(0.0, 0.0);
            v.service_list.push(r.id);
        }
        v.path = vec![Stop::destination(&a), Stop::destination(&b)];
        let mut world = WorldState::new(vec![v], vec![a, b]).unwrap();
        let events = advance_vehicle(&net, &mut world, VehicleId(0), 0.0, 60.0, &cfg(1)).unwrap();
        assert_eq!(events.len(), 2);
        assert!((events[0].t - 24.0).abs() < 1e-6 && (events[1].t - 48.0).abs() < 1e-6);
        assert!(events.iter().all(|e| e.kind == EventKind::Dropoff));
    }

    #[test]
    fn coarse_steps_match_fine_steps() {
        let net = gen_grid(6, 6, 0.7).unwrap();
        let reqs: Vec<Request> = [(1, 0.0, 0, 35), (2, 15.0, 7, 20), (3, 40.0, 30, 5), (4, 41.0, 12, 13)]
            .iter()
            .map(|&(id, t, o, d)| req(&net, id, t, o, d))
            .collect();
        let c = cfg(2);
        let mut w1 = WorldState::new(place_vehicles(&net, &c), reqs).unwrap();
        crate::scheduler::psap_epoch(&net, &mut w1, &c, 50.0);
        let mut w2 = w1.clone();
        let mut e1 = Vec::new();
        let mut e2 = Vec::new();
        for vid in 0..2 {
            let v = VehicleId(vid);
            for k in 0..60 {
                e1.extend(advance_vehicle(&net, &mut w1, v, 50.0 + k as f64 * 10.0, 10.0, &c).unwrap());
            }
            for k in 0..600 {
                e2.extend(advance_vehicle(&net, &mut w2, v, 50.0 + k as f64, 1.0, &c).unwrap());
            }
        }
        assert!(!e1.is_empty());
        assert_eq!(e1.len(), e2.len());
        for (a, b) in e1.iter().zip(&e2) {
            assert_eq!((a.kind, a.req, a.veh), (b.kind, b.req, b.veh));
            assert!((a.t - b.t).abs() < 1e-6, "{a:?} vs {b:?}");
        }
        for (a, b) in w1.vehicles.iter().zip(&w2.vehicles) {
            assert!((a.odometer - b.odometer).abs() < 1e-6);
            assert_eq!(a.node, b.node);
        }
    }

    #[test]
    fn no_requests_means_no_events() {
        let net = gen_grid(3, 3, 1.0).unwrap();
        let run = run(&net, Vec::new(), &cfg(3), &Exhaustive).unwrap();
        assert!(run.events.is_empty());
        assert_eq!(run.report.summary.fleet_km, 0.0);
        assert_eq!(run.report.summary.epochs, 0);
    }

    #[test]
    fn small_run_completes_and_is_deterministic() {
        let net = gen_grid(5, 5, 0.5).unwrap();
        let reqs: Vec<Request> =
            (0..12).map(|k| req(&net, k, k as f64 * 7.0, (k * 7 % 25) as u32, ((k * 11 + 3) % 25) as u32)).collect();
        let reqs: Vec<Request> = reqs.into_iter().filter(|r| r.o != r.d).collect();
        let c = cfg(3);
        let a = run(&net, reqs.clone(), &c, &Psap::default()).unwrap();
        let b = run(&net, reqs, &c, &Psap::default()).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.events, b.events);
        let s = &a.report.summary;
        assert_eq!(s.completed, s.requests);
        assert!(a.events.windows(2).all(|w| w[0].t <= w[1].t));
        a.world.check_coherence().unwrap();
        for r in &a.world.requests {
            assert!(r.schedule_time.unwrap() <= r.pickup_time.unwrap());
            assert!(r.pickup_time.unwrap() < r.dropoff_time.unwrap());
            assert!(r.realized_detour().unwrap() <= c.max_detour + 1e-9);
        }
    }

    #[test]
    fn horizon_stops_the_run() {
        let net = gen_grid(5, 5, 1.0).unwrap();
        let reqs = vec![req(&net, 1, 0.0, 0, 24), req(&net, 2, 500.0, 3, 4)];
        let c = SimConfig { horizon_s: Some(100.0), ..cfg(1) };
        let run = run(&net, reqs, &c, &Exhaustive).unwrap();
        assert_eq!(run.report.summary.end_s, 100.0);
        assert_eq!(run.report.summary.completed, 0);
        assert!(run.events.iter().all(|e| e.t <= 100.0));
    }

    #[test]
    fn oversized_party_does_not_hang() {
        let net = gen_grid(3, 3, 1.0).unwrap();
        let mut r = req(&net, 1, 0.0, 0, 8);
        r.n = 9;
        let run = run(&net, vec![r], &cfg(2), &Exhaustive).unwrap();
        assert_eq!(run.report.summary.unserved, 1);
    }

    #[test]
    fn poev_counts() {
        let net = gen_grid(3, 3, 1.0).unwrap();
        let reqs = vec![req(&net, 1, 0.0, 0, 8), req(&net, 2, 0.0, 1, 2), req(&net, 3, 0.0, 3, 4)];
        let p = poev_baseline(&reqs);
        assert_eq!(p.total_km, 6.0);
        assert_eq!(p.fleet, 2);
        assert_eq!(poev_baseline(&[]).fleet, 0);
    }

    #[test]
    fn csv_headers() {
        assert!(metrics_csv(&[]).starts_with("epoch,t_s,psi_A,psi_B,psi_C,sharing_rate,utilization,saved_km,assigned,unserved"));
        let e = SimEvent { t: 1.5, kind: EventKind::Pickup, req: Some(RequestId(3)), veh: Some(VehicleId(0)) };
        assert_eq!(events_jsonl(&[e]).unwrap(), "{\"t\":1.5,\"kind\":\"pickup\",\"req\":3,\"veh\":0}\n");
    }
}
