//! Insertion of an origin/destination pair into a vehicle's stop path:
//! the four-case cost formula, splicing, candidate enumeration and the full
//! QoS feasibility check.
//!
//! Indexing: the path is `theta_0 .. theta_m` where `theta_0` is the vehicle
//! position and `theta_1..theta_m` are its `m` stops. The origin goes right
//! after `theta_i` (`0 <= i <= m`); the destination goes right after the
//! origin when `j == i + 1`, otherwise right after `theta_{j-1}`
//! (`i + 1 <= j <= m + 1`). With `K = m + 1` path points there are
//! `K(K-1)/2` case-A, `K-1` case-B and one case-C position.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::GEOM_EPS;
use crate::model::{buffer_on, detour_on, planned_offsets, Request, RequestId, RequestState, Stop, StopKind, Vehicle, WorldState};
use crate::roadnet::{NodeId, RoadNetwork};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InsertionCase {
    /// Neither the new origin nor destination ends the path.
    A,
    /// The new destination ends the path; the origin sits earlier.
    B,
    /// Origin and destination are appended after the current last stop.
    C,
}

impl InsertionCase {
    pub const ALL: [InsertionCase; 3] = [InsertionCase::A, InsertionCase::B, InsertionCase::C];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Which branch of the cost formula applies to a position pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostFormula {
    /// o and d back to back inside the path.
    Adjacent,
    /// o and d back to back at the end.
    Append,
    /// o inside the path, d at the end.
    SplitAppend,
    /// o and d in different gaps inside the path.
    SplitInside,
}

/// Case of the position pair `(i, j)` on a path with `stops` stops.
pub fn classify(i: usize, j: usize, stops: usize) -> InsertionCase {
    debug_assert!(i <= stops && j > i && j <= stops + 1);
    if j == stops + 1 {
        if i == stops {
            InsertionCase::C
        } else {
            InsertionCase::B
        }
    } else {
        InsertionCase::A
    }
}

pub fn formula(i: usize, j: usize, stops: usize) -> CostFormula {
    match (j == i + 1, i == stops, j == stops + 1) {
        (true, true, _) => CostFormula::Append,
        (true, false, _) => CostFormula::Adjacent,
        (false, _, true) => CostFormula::SplitAppend,
        (false, _, false) => CostFormula::SplitInside,
    }
}

/// All `(i, j)` position pairs for a path with `stops` stops, lexicographic.
pub fn positions(stops: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=stops).flat_map(move |i| (i + 1..=stops + 1).map(move |j| (i, j)))
}

/// Positions of one case only, lexicographic.
pub fn positions_of(case: InsertionCase, stops: usize) -> impl Iterator<Item = (usize, usize)> {
    positions(stops).filter(move |&(i, j)| classify(i, j, stops) == case)
}

/// Closed-form candidate counts `(N_A, N_B, N_C)` for `k` path points (vehicle included).
pub fn closed_form_counts(k: usize) -> [u64; 3] {
    let k = k as u64;
    [k * k.saturating_sub(1) / 2, k.saturating_sub(1), 1]
}

/// Additional travel distance of inserting `(o, d)` at `(i, j)` into the node
/// path `head, stops[0], .., stops[m-1]`. Infinite if any leg is unreachable.
pub fn insertion_cost(net: &RoadNetwork, head: NodeId, stops: &[NodeId], o: NodeId, d: NodeId, i: usize, j: usize) -> f64 {
    let m = stops.len();
    let theta = |k: usize| if k == 0 { head } else { stops[k - 1] };
    let dist = |a: NodeId, b: NodeId| net.dist(a, b);
    match formula(i, j, m) {
        CostFormula::Adjacent => {
            let (a, b) = (theta(i), theta(i + 1));
            dist(a, o) + dist(o, d) + dist(d, b) - dist(a, b)
        }
        CostFormula::Append => dist(theta(m), o) + dist(o, d),
        CostFormula::SplitAppend => {
            let (a, b) = (theta(i), theta(i + 1));
            dist(a, o) + dist(o, b) - dist(a, b) + dist(theta(m), d)
        }
        CostFormula::SplitInside => {
            let (a, b) = (theta(i), theta(i + 1));
            let (c, e) = (theta(j - 1), theta(j));
            dist(a, o) + dist(o, b) - dist(a, b) + dist(c, d) + dist(d, e) - dist(c, e)
        }
    }
}

/// As [`insertion_cost`], failing with `NoPath` instead of returning infinity.
pub fn try_insertion_cost(net: &RoadNetwork, head: NodeId, stops: &[NodeId], o: NodeId, d: NodeId, i: usize, j: usize) -> Result<f64> {
    let m = stops.len();
    let theta = |k: usize| if k == 0 { head } else { stops[k - 1] };
    let mut legs = vec![(theta(i), o)];
    if j == i + 1 {
        legs.push((o, d));
        if i < m {
            legs.push((d, theta(i + 1)));
        }
    } else {
        legs.push((o, theta(i + 1)));
        legs.push((theta(j - 1), d));
        if j <= m {
            legs.push((d, theta(j)));
        }
    }
    for (a, b) in legs {
        net.shortest_dist(a, b)?;
    }
    Ok(insertion_cost(net, head, stops, o, d, i, j))
}

/// New stop list with `origin` after `theta_i` and `dest` per the `(i, j)` convention.
pub fn splice(path: &[Stop], origin: Stop, dest: Stop, i: usize, j: usize) -> Vec<Stop> {
    debug_assert!(i <= path.len() && j > i && j <= path.len() + 1);
    let mut out = Vec::with_capacity(path.len() + 2);
    out.extend_from_slice(&path[..i]);
    out.push(origin);
    out.extend_from_slice(&path[i..j - 1]);
    out.push(dest);
    out.extend_from_slice(&path[j - 1..]);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    Detour,
    Buffer,
    Occupancy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QosViolation {
    pub request: RequestId,
    pub bound: Bound,
    pub value: f64,
}

/// Thresholds the feasibility check enforces.
#[derive(Clone, Copy, Debug)]
pub struct QosLimits {
    pub max_detour: f64,
    pub buffer_km: f64,
    /// Peak simultaneous occupancy limit; `None` skips the occupancy scan.
    pub occupancy: Option<u32>,
}

/// Checks the spliced path for every request in `vehicle`'s service list plus
/// `new`. Detour is always bounded. With `check_buffer` every waiting request's
/// buffer is bounded; without it the new request's buffer is free, but waiting
/// requests matched under a buffer guarantee keep it.
pub fn qos_check(
    net: &RoadNetwork,
    world: &WorldState,
    vehicle: &Vehicle,
    spliced: &[Stop],
    new: &Request,
    check_buffer: bool,
    limits: &QosLimits,
) -> Result<(), QosViolation> {
    let offsets = planned_offsets(net, vehicle, spliced);
    let detour_cap = limits.max_detour + GEOM_EPS;
    let buffer_cap = limits.buffer_km + GEOM_EPS;
    let members = std::iter::once(new).chain(vehicle.service_list.iter().map(|id| world.request(*id)));
    for r in members {
        let detour = detour_on(r, vehicle, spliced, &offsets);
        if detour > detour_cap {
            return Err(QosViolation { request: r.id, bound: Bound::Detour, value: detour });
        }
        let waiting = matches!(r.state, RequestState::Unscheduled | RequestState::Waiting);
        let bounded = if r.id == new.id { check_buffer } else { check_buffer || r.buffer_guaranteed };
        if waiting && bounded {
            let buffer = buffer_on(r, vehicle, spliced, &offsets);
            if buffer > buffer_cap {
                return Err(QosViolation { request: r.id, bound: Bound::Buffer, value: buffer });
            }
        }
    }
    if let Some(cap) = limits.occupancy {
        let mut load: u32 = vehicle
            .service_list
            .iter()
            .map(|id| world.request(*id))
            .filter(|r| r.state == RequestState::Onboard)
            .map(|r| r.n)
            .sum();
        for s in spliced {
            let n = if s.request == new.id { new.n } else { world.request(s.request).n };
            match s.kind {
                StopKind::Origin => load += n,
                StopKind::Destination => load = load.saturating_sub(n),
            }
            if load > cap {
                return Err(QosViolation { request: s.request, bound: Bound::Occupancy, value: load as f64 });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub i: usize,
    pub j: usize,
    pub case: InsertionCase,
    /// Insertion cost in km; infinite when infeasible.
    pub cost: f64,
}

/// Node view of a vehicle's path: its anchor node and the stop nodes.
pub fn stop_nodes(vehicle: &Vehicle) -> Vec<NodeId> {
    vehicle.path.iter().map(|s| s.node).collect()
}

/// Every position pair with its cost; candidates failing the QoS check carry an infinite cost.
pub fn enumerate_all(
    net: &RoadNetwork,
    world: &WorldState,
    vehicle: &Vehicle,
    request: &Request,
    check_buffer: bool,
    limits: &QosLimits,
) -> Vec<Candidate> {
    let nodes = stop_nodes(vehicle);
    let (origin, dest) = (Stop::origin(request), Stop::destination(request));
    positions(nodes.len())
        .map(|(i, j)| {
            let case = classify(i, j, nodes.len());
            let mut cost = insertion_cost(net, vehicle.node, &nodes, request.o, request.d, i, j);
            if cost.is_finite() {
                let spliced = splice(&vehicle.path, origin, dest, i, j);
                if qos_check(net, world, vehicle, &spliced, request, check_buffer, limits).is_err() {
                    cost = f64::INFINITY;
                }
            }
            Candidate { i, j, case, cost }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::model::VehicleId;
    use crate::roadnet::gen_grid;
    use proptest::prelude::*;

    fn stop(id: u64, kind: StopKind) -> Stop {
        Stop { kind, request: RequestId(id), node: NodeId(id as u32) }
    }

    /// Line graph 0..=10 with unit spacing (bottom row of an 11x2 grid).
    fn line() -> RoadNetwork {
        gen_grid(11, 2, 1.0).unwrap()
    }

    #[test]
    fn classification_and_counts() {
        assert_eq!(classify(0, 1, 0), InsertionCase::C);
        assert_eq!(classify(2, 3, 2), InsertionCase::C);
        assert_eq!(classify(0, 3, 2), InsertionCase::B);
        assert_eq!(classify(0, 1, 2), InsertionCase::A);
        assert_eq!(positions(0).count(), 1);
        assert_eq!(positions(2).count(), 6);
        assert_eq!(positions(4).count(), 15);
        let tally = |m: usize| InsertionCase::ALL.map(|c| positions_of(c, m).count() as u64);
        assert_eq!(tally(2), [3, 2, 1]);
        assert_eq!(closed_form_counts(1), [0, 0, 1]);
        assert_eq!(closed_form_counts(3), [3, 2, 1]);
        assert_eq!(closed_form_counts(10), [45, 9, 1]);
    }

    #[test]
    fn case_matches_formula_guard() {
        for m in 0..8 {
            for (i, j) in positions(m) {
                let expected = match formula(i, j, m) {
                    CostFormula::Append => InsertionCase::C,
                    CostFormula::SplitAppend => InsertionCase::B,
                    CostFormula::Adjacent | CostFormula::SplitInside => InsertionCase::A,
                };
                assert_eq!(classify(i, j, m), expected, "m={m} i={i} j={j}");
            }
        }
    }

    #[test]
    fn cost_examples() {
        let net = line();
        // On-the-way insertion adds nothing.
        assert_eq!(insertion_cost(&net, NodeId(0), &[NodeId(4)], NodeId(1), NodeId(3), 0, 1), 0.0);
        // Append on an empty path.
        assert_eq!(insertion_cost(&net, NodeId(0), &[], NodeId(2), NodeId(5), 0, 1), 5.0);

        // 5x3 unit grid: rows y=0,1,2; path (0,1)->(4,1), o=(2,2), d=(2,0).
        let g = gen_grid(5, 3, 1.0).unwrap();
        let id = |x: u32, y: u32| NodeId(y * 5 + x);
        let cost = insertion_cost(&g, id(0, 1), &[id(4, 1)], id(2, 2), id(2, 0), 0, 1);
        let spliced = g.stop_sequence_length(&[id(0, 1), id(2, 2), id(2, 0), id(4, 1)]).unwrap();
        assert_eq!(spliced, 8.0);
        assert_eq!(cost, 4.0);
    }

    #[test]
    fn unreachable_leg_is_infinite() {
        let net = crate::roadnet::parse_network(
            "id,x_km,y_km\n0,0,0\n1,1,0\n2,5,5\n".as_bytes(),
            "n",
            "id,from,to,length_km,bidirectional\n0,0,1,1,1\n".as_bytes(),
            "e",
        )
        .unwrap();
        assert!(insertion_cost(&net, NodeId(0), &[], NodeId(1), NodeId(2), 0, 1).is_infinite());
        assert!(try_insertion_cost(&net, NodeId(0), &[], NodeId(1), NodeId(2), 0, 1).is_err());
        assert_eq!(try_insertion_cost(&net, NodeId(0), &[], NodeId(1), NodeId(0), 0, 1).unwrap(), 2.0);
    }

    #[test]
    fn splice_examples() {
        let (o2, d2) = (stop(2, StopKind::Origin), stop(3, StopKind::Destination));
        let (o3, d3) = (stop(4, StopKind::Origin), stop(5, StopKind::Destination));
        let d1 = stop(1, StopKind::Destination);
        assert_eq!(splice(&[d1], o2, d2, 0, 1), vec![o2, d2, d1]);
        assert_eq!(splice(&[d1], o2, d2, 1, 2), vec![d1, o2, d2]);
        assert_eq!(splice(&[o2, d2], o3, d3, 0, 2), vec![o3, o2, d3, d2]);
    }

    /// Brute force: every way of choosing two new slots in a path of m+2 stops with
    /// o before d is produced exactly once by `splice`.
    #[test]
    fn splice_enumeration_is_bijective() {
        for m in 0..6 {
            let path: Vec<Stop> = (0..m).map(|k| stop(k as u64, StopKind::Destination)).collect();
            let (o, d) = (stop(100, StopKind::Origin), stop(101, StopKind::Destination));
            let mut seen = std::collections::BTreeSet::new();
            for (i, j) in positions(m) {
                let s = splice(&path, o, d, i, j);
                let oi = s.iter().position(|x| *x == o).unwrap();
                let di = s.iter().position(|x| *x == d).unwrap();
                assert!(oi < di);
                let rest: Vec<_> = s.iter().filter(|x| **x != o && **x != d).copied().collect();
                assert_eq!(rest, path);
                seen.insert((oi, di));
            }
            assert_eq!(seen.len(), (m + 2) * (m + 1) / 2);
        }
    }

    fn limits() -> QosLimits {
        QosLimits { max_detour: 0.2, buffer_km: 6.0, occupancy: None }
    }

    fn world_with(reqs: Vec<Request>) -> WorldState {
        WorldState::new(vec![], reqs).unwrap()
    }

    #[test]
    fn qos_empty_vehicle_direct_append_is_feasible() {
        let net = line();
        let r = Request::new(RequestId(1), 1, 0.0, NodeId(2), NodeId(6), 4.0);
        let world = world_with(vec![r.clone()]);
        let v = Vehicle::new(VehicleId(0), 5, NodeId(0));
        let spliced = splice(&v.path, Stop::origin(&r), Stop::destination(&r), 0, 1);
        assert!(qos_check(&net, &world, &v, &spliced, &r, true, &limits()).is_ok());
    }

    fn onboard(id: u64, o: u32, d: u32, direct: f64) -> (Request, Vehicle) {
        let mut r = Request::new(RequestId(id), 1, 0.0, NodeId(o), NodeId(d), direct);
        r.mark_scheduled(0.0, VehicleId(0), Point::default(), 0.0, true);
        r.mark_picked_up(0.0, 0.0);
        let mut v = Vehicle::new(VehicleId(0), 5, NodeId(o));
        v.service_list.push(r.id);
        v.path.push(Stop::destination(&r));
        (r, v)
    }

    #[test]
    fn qos_detects_onboard_detour() {
        // Upper row nodes are 11..=21. Onboard 0 -> 4; side trip 11 -> 12 first:
        // 0->11 (1) + 11->12 (1) + 12->4 (4) = 6 km on a 4 km trip, detour 0.5.
        let net = line();
        let (ob, v) = onboard(1, 0, 4, 4.0);
        let new = Request::new(RequestId(2), 1, 0.0, NodeId(11), NodeId(12), 1.0);
        let world = world_with(vec![ob.clone(), new.clone()]);
        let spliced = splice(&v.path, Stop::origin(&new), Stop::destination(&new), 0, 1);
        let err = qos_check(&net, &world, &v, &spliced, &new, true, &limits()).unwrap_err();
        assert_eq!((err.request, err.bound), (ob.id, Bound::Detour));
        assert!((err.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn qos_detour_boundary() {
        // Onboard 0 -> 10; side trip 13 -> 14: 3 + 1 + 8 = 12 km, detour exactly 0.2.
        let net = line();
        let (ob, v) = onboard(1, 0, 10, 10.0);
        let side = Request::new(RequestId(2), 1, 0.0, NodeId(13), NodeId(14), 1.0);
        let world = world_with(vec![ob.clone(), side.clone()]);
        let spliced = splice(&v.path, Stop::origin(&side), Stop::destination(&side), 0, 1);
        assert!(qos_check(&net, &world, &v, &spliced, &side, true, &limits()).is_ok());

        // Backtracking 14 -> 12: 4 + 2 + 10 = 16 km, detour 0.6.
        let back = Request::new(RequestId(3), 1, 0.0, NodeId(14), NodeId(12), 2.0);
        let world = world_with(vec![ob.clone(), back.clone()]);
        let spliced = splice(&v.path, Stop::origin(&back), Stop::destination(&back), 0, 1);
        let err = qos_check(&net, &world, &v, &spliced, &back, true, &limits()).unwrap_err();
        assert_eq!((err.request, err.bound), (ob.id, Bound::Detour));
    }

    #[test]
    fn overdue_request_ignores_own_buffer() {
        // Idle vehicle 7 km from the origin: buffer 7 > 6, detour 0.
        let net = line();
        let r = Request::new(RequestId(1), 1, 0.0, NodeId(7), NodeId(9), 2.0);
        let world = world_with(vec![r.clone()]);
        let v = Vehicle::new(VehicleId(0), 5, NodeId(0));
        let spliced = splice(&v.path, Stop::origin(&r), Stop::destination(&r), 0, 1);
        let err = qos_check(&net, &world, &v, &spliced, &r, true, &limits()).unwrap_err();
        assert_eq!(err.bound, Bound::Buffer);
        assert!(qos_check(&net, &world, &v, &spliced, &r, false, &limits()).is_ok());
    }

    #[test]
    fn guaranteed_buffer_survives_overdue_insertion() {
        let net = line();
        let mut w = Request::new(RequestId(1), 1, 0.0, NodeId(5), NodeId(10), 5.0);
        w.mark_scheduled(0.0, VehicleId(0), Point::default(), 0.0, true);
        let mut v = Vehicle::new(VehicleId(0), 5, NodeId(0));
        v.service_list.push(w.id);
        v.path = vec![Stop::origin(&w), Stop::destination(&w)];
        // Detour via the upper row before the pickup: 0 -> 12 -> 13 -> 5 = 2+1+1+3 = 7 km of buffer.
        let late = Request::new(RequestId(2), 1, 0.0, NodeId(12), NodeId(13), 1.0);
        let world = world_with(vec![w.clone(), late.clone()]);
        let spliced = splice(&v.path, Stop::origin(&late), Stop::destination(&late), 0, 1);
        let err = qos_check(&net, &world, &v, &spliced, &late, false, &limits()).unwrap_err();
        assert_eq!((err.request, err.bound), (w.id, Bound::Buffer));

        let mut loose = w.clone();
        loose.buffer_guaranteed = false;
        let world = world_with(vec![loose, late.clone()]);
        assert!(qos_check(&net, &world, &v, &spliced, &late, false, &limits()).is_ok());
    }

    #[test]
    fn occupancy_scan() {
        let net = line();
        let mut a = Request::new(RequestId(1), 3, 0.0, NodeId(1), NodeId(5), 4.0);
        a.mark_scheduled(0.0, VehicleId(0), Point::default(), 0.0, true);
        let mut v = Vehicle::new(VehicleId(0), 5, NodeId(0));
        v.service_list.push(a.id);
        v.path = vec![Stop::origin(&a), Stop::destination(&a)];
        let b = Request::new(RequestId(2), 3, 0.0, NodeId(2), NodeId(4), 2.0);
        let world = world_with(vec![a.clone(), b.clone()]);
        let lim = QosLimits { occupancy: Some(5), ..limits() };
        let overlapping = splice(&v.path, Stop::origin(&b), Stop::destination(&b), 1, 2);
        assert_eq!(qos_check(&net, &world, &v, &overlapping, &b, true, &lim).unwrap_err().bound, Bound::Occupancy);
        let after = splice(&v.path, Stop::origin(&b), Stop::destination(&b), 2, 3);
        assert!(qos_check(&net, &world, &v, &after, &b, false, &QosLimits { max_detour: 10.0, ..lim }).is_ok());
    }

    #[test]
    fn enumerate_counts() {
        let net = line();
        let r = Request::new(RequestId(9), 1, 0.0, NodeId(3), NodeId(6), 3.0);
        let mut reqs = vec![r.clone()];
        let mut v = Vehicle::new(VehicleId(0), 5, NodeId(0));
        for m in 0..5u64 {
            let mut q = Request::new(RequestId(100 + m), 1, 0.0, NodeId(0), NodeId(1 + m as u32), 1.0 + m as f64);
            q.mark_scheduled(0.0, v.id, Point::default(), 0.0, true);
            q.mark_picked_up(0.0, 0.0);
            reqs.push(q);
        }
        for m in 0..5usize {
            v.path = reqs[1..=m].iter().map(Stop::destination).collect();
            v.service_list = reqs[1..=m].iter().map(|q| q.id).collect();
            let world = world_with(reqs.clone());
            let cands = enumerate_all(&net, &world, &v, &r, true, &limits());
            let tally = InsertionCase::ALL.map(|c| cands.iter().filter(|x| x.case == c).count() as u64);
            assert_eq!(tally, closed_form_counts(m + 1));
        }
    }

    proptest! {
        #[test]
        fn cost_equals_spliced_length_difference(
            stops in proptest::collection::vec(0u32..25, 0..6),
            head in 0u32..25, o in 0u32..25, d in 0u32..25,
            pick in 0usize..1000,
        ) {
            let g = gen_grid(5, 5, 1.0).unwrap();
            let nodes: Vec<NodeId> = stops.into_iter().map(NodeId).collect();
            let all: Vec<_> = positions(nodes.len()).collect();
            let (i, j) = all[pick % all.len()];
            let cost = insertion_cost(&g, NodeId(head), &nodes, NodeId(o), NodeId(d), i, j);

            let mut before = vec![NodeId(head)];
            before.extend(&nodes);
            let mut after = vec![NodeId(head)];
            after.extend(&nodes[..i]);
            after.push(NodeId(o));
            after.extend(&nodes[i..j - 1]);
            after.push(NodeId(d));
            after.extend(&nodes[j - 1..]);
            let diff = g.stop_sequence_length(&after).unwrap() - g.stop_sequence_length(&before).unwrap();
            prop_assert_eq!(cost, diff);
            prop_assert!(cost >= 0.0);
        }
    }
}
