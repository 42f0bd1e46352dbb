//! Domain state: requests, vehicles with their service lists and stop paths,
//! the world snapshot the scheduler mutates, and run configuration.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, VehiclePsa};
use crate::roadnet::{NodeId, RoadNetwork};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RequestId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VehicleId(pub u32);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RequestState {
    Unscheduled,
    Waiting,
    Onboard,
    Completed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    /// Party size.
    pub n: u32,
    /// Earliest start time (s).
    pub t: f64,
    pub o: NodeId,
    pub d: NodeId,
    pub state: RequestState,
    /// Shortest-path distance D(o, d), km.
    pub direct_dist: f64,
    pub vehicle: Option<VehicleId>,
    pub schedule_time: Option<f64>,
    /// Serving vehicle's position when the match was confirmed.
    pub p_s: Option<Point>,
    pub odometer_at_schedule: Option<f64>,
    /// Matched while its waiting time was within the threshold, so its buffer bound is enforced.
    pub buffer_guaranteed: bool,
    pub pickup_time: Option<f64>,
    pub dropoff_time: Option<f64>,
    pub traveled_at_pickup: Option<f64>,
    pub traveled_at_dropoff: Option<f64>,
}

impl Request {
    pub fn new(id: RequestId, n: u32, t: f64, o: NodeId, d: NodeId, direct_dist: f64) -> Self {
        Self {
            id,
            n,
            t,
            o,
            d,
            state: RequestState::Unscheduled,
            direct_dist,
            vehicle: None,
            schedule_time: None,
            p_s: None,
            odometer_at_schedule: None,
            buffer_guaranteed: false,
            pickup_time: None,
            dropoff_time: None,
            traveled_at_pickup: None,
            traveled_at_dropoff: None,
        }
    }

    pub fn mark_scheduled(&mut self, now: f64, vehicle: VehicleId, p_s: Point, odometer: f64, guaranteed: bool) {
        debug_assert_eq!(self.state, RequestState::Unscheduled);
        self.state = RequestState::Waiting;
        self.vehicle = Some(vehicle);
        self.schedule_time = Some(now);
        self.p_s = Some(p_s);
        self.odometer_at_schedule = Some(odometer);
        self.buffer_guaranteed = guaranteed;
    }

    pub fn mark_picked_up(&mut self, time: f64, odometer: f64) {
        debug_assert_eq!(self.state, RequestState::Waiting);
        self.state = RequestState::Onboard;
        self.pickup_time = Some(time);
        self.traveled_at_pickup = Some(odometer);
    }

    pub fn mark_dropped_off(&mut self, time: f64, odometer: f64) {
        debug_assert_eq!(self.state, RequestState::Onboard);
        self.state = RequestState::Completed;
        self.dropoff_time = Some(time);
        self.traveled_at_dropoff = Some(odometer);
    }

    /// Realized detour ratio of a completed request.
    pub fn realized_detour(&self) -> Option<f64> {
        let t = self.traveled_at_dropoff? - self.traveled_at_pickup?;
        Some((t - self.direct_dist) / self.direct_dist)
    }

    /// Realized buffer distance once picked up.
    pub fn realized_buffer(&self) -> Option<f64> {
        Some(self.traveled_at_pickup? - self.odometer_at_schedule?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopKind {
    Origin,
    Destination,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stop {
    pub kind: StopKind,
    pub request: RequestId,
    pub node: NodeId,
}

impl Stop {
    pub fn origin(r: &Request) -> Self {
        Self { kind: StopKind::Origin, request: r.id, node: r.o }
    }

    pub fn destination(r: &Request) -> Self {
        Self { kind: StopKind::Destination, request: r.id, node: r.d }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: VehicleId,
    pub capacity: u32,
    /// Node the vehicle stands on, or the next node it will reach when mid-edge.
    pub node: NodeId,
    /// Start node of the edge currently traversed (equals `node` at rest).
    pub from_node: NodeId,
    /// Distance still to cover before reaching `node`.
    pub residual_km: f64,
    /// Length of the edge currently traversed.
    pub edge_km: f64,
    pub odometer: f64,
    pub service_list: Vec<RequestId>,
    pub path: Vec<Stop>,
    pub psa: VehiclePsa,
    /// Upcoming nodes after `node` toward the first stop, stored last-first.
    #[serde(skip)]
    pub(crate) route: Vec<NodeId>,
    #[serde(skip)]
    pub(crate) route_target: Option<NodeId>,
}

impl Vehicle {
    pub fn new(id: VehicleId, capacity: u32, node: NodeId) -> Self {
        Self {
            id,
            capacity,
            node,
            from_node: node,
            residual_km: 0.0,
            edge_km: 0.0,
            odometer: 0.0,
            service_list: Vec::new(),
            path: Vec::new(),
            psa: VehiclePsa::Empty,
            route: Vec::new(),
            route_target: None,
        }
    }

    /// Exact planar position, interpolated along the current edge when mid-edge.
    pub fn position(&self, net: &RoadNetwork) -> Point {
        let to = net.position(self.node);
        if self.residual_km <= 0.0 || self.edge_km <= 0.0 {
            return to;
        }
        to.lerp(net.position(self.from_node), self.residual_km / self.edge_km)
    }

    pub fn is_idle(&self) -> bool {
        self.path.is_empty() && self.residual_km <= 0.0
    }

    /// Moving means nonzero instantaneous speed: something left to drive to.
    pub fn is_moving(&self) -> bool {
        !self.is_idle()
    }

    pub fn is_busy(&self) -> bool {
        !self.service_list.is_empty()
    }

    /// Passengers committed to this vehicle (waiting or onboard).
    pub fn committed_passengers(&self, world: &WorldState) -> u32 {
        self.service_list.iter().map(|id| world.request(*id).n).sum()
    }

    /// Number of path points including the vehicle's own position.
    pub fn path_points(&self) -> usize {
        self.path.len() + 1
    }

    pub(crate) fn invalidate_route(&mut self) {
        self.route.clear();
        self.route_target = None;
    }
}

/// Cumulative planned distance from the vehicle's exact position to each stop of `stops`.
pub fn planned_offsets(net: &RoadNetwork, vehicle: &Vehicle, stops: &[Stop]) -> Vec<f64> {
    let mut out = Vec::with_capacity(stops.len());
    let mut acc = vehicle.residual_km;
    let mut at = vehicle.node;
    for s in stops {
        acc += net.dist(at, s.node);
        out.push(acc);
        at = s.node;
    }
    out
}

fn stop_index(stops: &[Stop], id: RequestId, kind: StopKind) -> Option<usize> {
    stops.iter().position(|s| s.request == id && s.kind == kind)
}

/// Waiting time of `r` at `now`, frozen at pickup.
pub fn waiting_time(r: &Request, now: f64) -> f64 {
    match (r.state, r.pickup_time) {
        (RequestState::Onboard | RequestState::Completed, Some(p)) => p - r.t,
        _ => (now - r.t).max(0.0),
    }
}

/// Detour ratio of `r` under the stop sequence `stops`, with `offsets` from [`planned_offsets`].
pub(crate) fn detour_on(r: &Request, vehicle: &Vehicle, stops: &[Stop], offsets: &[f64]) -> f64 {
    let Some(di) = stop_index(stops, r.id, StopKind::Destination) else {
        return r.realized_detour().unwrap_or(0.0);
    };
    let traveled = match r.state {
        RequestState::Onboard => {
            vehicle.odometer - r.traveled_at_pickup.unwrap_or(vehicle.odometer) + offsets[di]
        }
        _ => {
            let oi = stop_index(stops, r.id, StopKind::Origin).expect("waiting request has an origin stop");
            offsets[di] - offsets[oi]
        }
    };
    traveled / r.direct_dist - 1.0
}

/// Buffer distance of `r` under `stops`; requests not yet scheduled count from now.
pub(crate) fn buffer_on(r: &Request, vehicle: &Vehicle, stops: &[Stop], offsets: &[f64]) -> f64 {
    match r.state {
        RequestState::Onboard | RequestState::Completed => r.realized_buffer().unwrap_or(0.0),
        _ => {
            let since = vehicle.odometer - r.odometer_at_schedule.unwrap_or(vehicle.odometer);
            let oi = stop_index(stops, r.id, StopKind::Origin).expect("waiting request has an origin stop");
            since + offsets[oi]
        }
    }
}

/// Planned detour ratio of `r`, a request in `vehicle`'s service list.
pub fn current_detour(net: &RoadNetwork, r: &Request, vehicle: &Vehicle) -> f64 {
    let offsets = planned_offsets(net, vehicle, &vehicle.path);
    detour_on(r, vehicle, &vehicle.path, &offsets)
}

/// Planned buffer distance of `r`; realized value once onboard.
pub fn current_buffer(net: &RoadNetwork, r: &Request, vehicle: &Vehicle) -> f64 {
    let offsets = planned_offsets(net, vehicle, &vehicle.path);
    buffer_on(r, vehicle, &vehicle.path, &offsets)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatingMode {
    /// Case B requires the new destination to lie outside the PSA.
    #[default]
    Literal,
    /// Case B only requires the new origin to lie inside the PSA.
    Inclusive,
}

impl FromStr for GatingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(GatingMode::Literal),
            "inclusive" => Ok(GatingMode::Inclusive),
            _ => Err(Error::Config(format!("unknown gating mode '{s}' (literal|inclusive)"))),
        }
    }
}

impl fmt::Display for GatingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatingMode::Literal => "literal",
            GatingMode::Inclusive => "inclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scheduler: String,
    /// Maximum detour ratio.
    pub max_detour: f64,
    /// Waiting-time threshold, seconds.
    pub wait_threshold_s: f64,
    /// Buffer-distance threshold, km.
    pub buffer_km: f64,
    /// Seats per vehicle.
    pub capacity: u32,
    pub speed_kmh: f64,
    pub epoch_s: f64,
    pub gating: GatingMode,
    pub n_vehicles: u32,
    pub seed: u64,
    /// Run stops once this much simulated time has elapsed, if set.
    pub horizon_s: Option<f64>,
    pub start_s: f64,
    /// Check peak simultaneous occupancy along the path instead of total committed passengers.
    pub strict_occupancy: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scheduler: "psap".into(),
            max_detour: 0.2,
            wait_threshold_s: 4.0 * 60.0,
            buffer_km: 6.0,
            capacity: 5,
            speed_kmh: 30.0,
            epoch_s: 10.0,
            gating: GatingMode::Literal,
            n_vehicles: 70,
            seed: 0,
            horizon_s: None,
            start_s: 0.0,
            strict_occupancy: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("max_detour", self.max_detour),
            ("wait_threshold_s", self.wait_threshold_s),
            ("buffer_km", self.buffer_km),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        if !(self.speed_kmh > 0.0) || !self.speed_kmh.is_finite() {
            return Err(Error::Config(format!("speed must be positive, got {}", self.speed_kmh)));
        }
        if !(self.epoch_s > 0.0) {
            return Err(Error::Config(format!("epoch must be positive, got {}", self.epoch_s)));
        }
        if self.n_vehicles == 0 {
            return Err(Error::Config("at least one vehicle is required".into()));
        }
        if self.capacity == 0 {
            return Err(Error::Config("capacity must be at least 1".into()));
        }
        if let Some(h) = self.horizon_s {
            if !(h >= 0.0) {
                return Err(Error::Config(format!("horizon must be >= 0, got {h}")));
            }
        }
        Ok(())
    }

    /// Distance covered in `dt` seconds, km.
    pub fn distance_in(&self, dt: f64) -> f64 {
        self.speed_kmh * dt / 3600.0
    }

    /// Seconds needed to cover `km`.
    pub fn time_for(&self, km: f64) -> f64 {
        km * 3600.0 / self.speed_kmh
    }
}

/// Mutable simulation state. Requests are addressed by id through an index.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct WorldState {
    pub clock: f64,
    pub vehicles: Vec<Vehicle>,
    pub requests: Vec<Request>,
    #[serde(skip)]
    index: HashMap<RequestId, usize>,
}

impl WorldState {
    pub fn new(vehicles: Vec<Vehicle>, requests: Vec<Request>) -> Result<Self> {
        let mut index = HashMap::with_capacity(requests.len());
        for (i, r) in requests.iter().enumerate() {
            if index.insert(r.id, i).is_some() {
                return Err(Error::Validation(format!("duplicate request id {}", r.id)));
            }
        }
        Ok(Self { clock: 0.0, vehicles, requests, index })
    }

    pub fn request(&self, id: RequestId) -> &Request {
        &self.requests[self.index[&id]]
    }

    pub fn request_mut(&mut self, id: RequestId) -> &mut Request {
        let i = self.index[&id];
        &mut self.requests[i]
    }

    pub fn vehicle(&self, id: VehicleId) -> &Vehicle {
        &self.vehicles[id.0 as usize]
    }

    /// Released unscheduled requests (`t <= now`), in storage order.
    pub fn released_unscheduled(&self, now: f64) -> Vec<RequestId> {
        self.requests
            .iter()
            .filter(|r| r.state == RequestState::Unscheduled && r.t <= now)
            .map(|r| r.id)
            .collect()
    }

    pub fn count(&self, state: RequestState) -> usize {
        self.requests.iter().filter(|r| r.state == state).count()
    }

    /// Checks that every vehicle's path is exactly what its service list and
    /// request states demand, and that seat use is within capacity.
    pub fn check_coherence(&self) -> Result<()> {
        for v in &self.vehicles {
            let mut expected = 0usize;
            for id in &v.service_list {
                let r = self.request(*id);
                if r.vehicle != Some(v.id) {
                    return Err(Error::Validation(format!("request {id} listed on vehicle {} but assigned elsewhere", v.id)));
                }
                let o = stop_index(&v.path, *id, StopKind::Origin);
                let d = stop_index(&v.path, *id, StopKind::Destination);
                match (r.state, o, d) {
                    (RequestState::Waiting, Some(o), Some(d)) if o < d => expected += 2,
                    (RequestState::Onboard, None, Some(_)) => expected += 1,
                    _ => {
                        return Err(Error::Validation(format!(
                            "vehicle {} path does not match request {id} in state {:?}",
                            v.id, r.state
                        )))
                    }
                }
            }
            if expected != v.path.len() {
                return Err(Error::Validation(format!("vehicle {} path has stray stops", v.id)));
            }
            let onboard: u32 = v
                .service_list
                .iter()
                .map(|id| self.request(*id))
                .filter(|r| r.state == RequestState::Onboard)
                .map(|r| r.n)
                .sum();
            if onboard > v.capacity {
                return Err(Error::Validation(format!("vehicle {} carries {onboard} > capacity", v.id)));
            }
        }
        Ok(())
    }
}

/// Parses a requests table (`id,t_s,n,o_node,d_node`), resolving node ids
/// against `net` and caching each request's direct distance.
pub fn parse_requests(input: impl Read, name: &str, net: &RoadNetwork) -> Result<Vec<Request>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(name, 1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["id", "t_s", "n", "o_node", "d_node"] {
        return Err(Error::parse(name, 1, "expected header id,t_s,n,o_node,d_node"));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(name, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 5 {
            return Err(Error::parse(name, line, format!("expected 5 columns, got {}", rec.len())));
        }
        let get = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str, v: &str| Error::parse(name, line, format!("invalid {what} '{v}'"));
        let id: u64 = get(0).parse().map_err(|_| bad("request id", get(0)))?;
        let t: f64 = get(1).parse().map_err(|_| bad("t_s", get(1)))?;
        let n: u32 = get(2).parse().map_err(|_| bad("n", get(2)))?;
        let node = |i: usize| -> Result<NodeId> {
            let ext: u64 = get(i).parse().map_err(|_| bad("node id", get(i)))?;
            net.node_by_external(ext)
                .ok_or_else(|| Error::Validation(format!("{name}:{line}: unknown node {ext}")))
        };
        let (o, d) = (node(3)?, node(4)?);
        if n == 0 || !t.is_finite() || t < 0.0 {
            return Err(Error::parse(name, line, "party size must be >= 1 and t_s finite and >= 0"));
        }
        let direct = net.dist(o, d);
        if !direct.is_finite() {
            return Err(Error::Validation(format!("{name}:{line}: destination unreachable from origin")));
        }
        if direct <= 0.0 {
            return Err(Error::Validation(format!("{name}:{line}: origin and destination coincide")));
        }
        out.push(Request::new(RequestId(id), n, t, o, d, direct));
    }
    Ok(out)
}

pub fn load_requests(path: &Path, net: &RoadNetwork) -> Result<Vec<Request>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_requests(f, &path.display().to_string(), net)
}

pub fn write_requests(requests: &[Request], net: &RoadNetwork, out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "t_s", "n", "o_node", "d_node"])?;
    for r in requests {
        w.write_record([
            r.id.0.to_string(),
            r.t.to_string(),
            r.n.to_string(),
            net.external_id(r.o).to_string(),
            net.external_id(r.d).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("requests", e))?;
    Ok(())
}
