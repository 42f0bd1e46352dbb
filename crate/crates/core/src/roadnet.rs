//! Road network graph, lazily memoized shortest-path distances, CSV ingestion
//! and synthetic lattice generation.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euclid, project_equirectangular, Point};

/// Dense internal node index. External ids from input files map onto these.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Allowed shortfall of an edge length against the straight-line distance of its endpoints.
pub const LENGTH_TOLERANCE_KM: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub length_km: f64,
    pub bidirectional: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordMode {
    Planar,
    /// Projected from lat/lon about the given reference latitude (degrees).
    LatLon,
}

/// Single-source shortest path result: distances and predecessor links.
#[derive(Debug)]
pub struct ShortestPathTree {
    pub dist: Vec<f64>,
    pred: Vec<u32>,
}

const NO_PRED: u32 = u32::MAX;

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-source memo of shortest-path trees. Each slot is filled at most once;
/// readers never block one another once a slot is populated.
#[derive(Debug, Default)]
pub struct DistanceCache {
    trees: Vec<OnceLock<ShortestPathTree>>,
}

impl DistanceCache {
    fn new(n: usize) -> Self {
        Self { trees: (0..n).map(|_| OnceLock::new()).collect() }
    }

    pub fn cached_sources(&self) -> usize {
        self.trees.iter().filter(|t| t.get().is_some()).count()
    }
}

#[derive(Debug)]
pub struct RoadNetwork {
    points: Vec<Point>,
    ext_ids: Vec<u64>,
    by_ext: HashMap<u64, NodeId>,
    edges: Vec<Edge>,
    adj: Vec<Vec<(u32, f64)>>,
    mode: CoordMode,
    cache: DistanceCache,
}

impl RoadNetwork {
    /// Builds and validates a network. Node ids are external; edges refer to
    /// them through `from_ext`/`to_ext` pairs in `raw_edges`.
    fn build(
        ext_ids: Vec<u64>,
        points: Vec<Point>,
        raw_edges: Vec<(u64, u64, u64, f64, bool)>,
        mode: CoordMode,
    ) -> Result<Self> {
        let mut by_ext = HashMap::with_capacity(ext_ids.len());
        for (i, &id) in ext_ids.iter().enumerate() {
            if by_ext.insert(id, NodeId(i as u32)).is_some() {
                return Err(Error::Validation(format!("duplicate node id {id}")));
            }
        }
        let mut adj = vec![Vec::new(); points.len()];
        let mut edges = Vec::with_capacity(raw_edges.len());
        for (id, from, to, length_km, bidirectional) in raw_edges {
            let lookup = |ext: u64| {
                by_ext.get(&ext).copied().ok_or_else(|| {
                    Error::Validation(format!("edge {id} references unknown node {ext}"))
                })
            };
            let (a, b) = (lookup(from)?, lookup(to)?);
            if !(length_km > 0.0) || !length_km.is_finite() {
                return Err(Error::Validation(format!(
                    "edge {id} has non-positive length {length_km}"
                )));
            }
            let straight = euclid(points[a.index()], points[b.index()]);
            if length_km < straight - LENGTH_TOLERANCE_KM {
                return Err(Error::Validation(format!(
                    "edge {id} length {length_km} km is shorter than the straight-line distance {straight} km"
                )));
            }
            adj[a.index()].push((b.0, length_km));
            if bidirectional {
                adj[b.index()].push((a.0, length_km));
            }
            edges.push(Edge { id, from: a, to: b, length_km, bidirectional });
        }
        let cache = DistanceCache::new(points.len());
        Ok(Self { points, ext_ids, by_ext, edges, adj, mode, cache })
    }

    pub fn node_count(&self) -> usize {
        self.points.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn coord_mode(&self) -> CoordMode {
        self.mode
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.points.len() as u32).map(NodeId)
    }

    pub fn position(&self, n: NodeId) -> Point {
        self.points[n.index()]
    }

    pub fn external_id(&self, n: NodeId) -> u64 {
        self.ext_ids[n.index()]
    }

    pub fn node_by_external(&self, ext: u64) -> Option<NodeId> {
        self.by_ext.get(&ext).copied()
    }

    pub fn cache(&self) -> &DistanceCache {
        &self.cache
    }

    /// Area of the axis-aligned bounding box of all nodes (km²).
    pub fn bounding_box_area(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi.x - lo.x) * (hi.y - lo.y)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    fn dijkstra(&self, src: NodeId) -> ShortestPathTree {
        let n = self.points.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![NO_PRED; n];
        let mut heap = BinaryHeap::new();
        dist[src.index()] = 0.0;
        heap.push(HeapEntry { dist: 0.0, node: src.0 });
        while let Some(HeapEntry { dist: d, node }) = heap.pop() {
            if d > dist[node as usize] {
                continue;
            }
            for &(next, len) in &self.adj[node as usize] {
                let nd = d + len;
                if nd < dist[next as usize] {
                    dist[next as usize] = nd;
                    pred[next as usize] = node;
                    heap.push(HeapEntry { dist: nd, node: next });
                }
            }
        }
        ShortestPathTree { dist, pred }
    }

    pub fn tree(&self, src: NodeId) -> &ShortestPathTree {
        self.cache.trees[src.index()].get_or_init(|| self.dijkstra(src))
    }

    /// Shortest-path distance, `f64::INFINITY` when `b` is unreachable from `a`.
    #[inline]
    pub fn dist(&self, a: NodeId, b: NodeId) -> f64 {
        if a == b {
            return 0.0;
        }
        self.tree(a).dist[b.index()]
    }

    pub fn shortest_dist(&self, a: NodeId, b: NodeId) -> Result<f64> {
        let d = self.dist(a, b);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::NoPath { from: a, to: b })
        }
    }

    /// Node sequence of a shortest path from `a` to `b`, both endpoints included.
    pub fn node_path(&self, a: NodeId, b: NodeId) -> Option<Vec<NodeId>> {
        if a == b {
            return Some(vec![a]);
        }
        let tree = self.tree(a);
        if !tree.dist[b.index()].is_finite() {
            return None;
        }
        let mut path = vec![b];
        let mut cur = b.0;
        while cur != a.0 {
            cur = tree.pred[cur as usize];
            path.push(NodeId(cur));
        }
        path.reverse();
        Some(path)
    }

    /// Length of the shortest edge from `a` to `b`, if one exists.
    pub fn edge_length(&self, a: NodeId, b: NodeId) -> Option<f64> {
        self.adj[a.index()]
            .iter()
            .filter(|(n, _)| *n == b.0)
            .map(|&(_, l)| l)
            .min_by(f64::total_cmp)
    }

    /// Sum of shortest-path distances over consecutive stops.
    pub fn stop_sequence_length(&self, stops: &[NodeId]) -> Result<f64> {
        stops
            .windows(2)
            .map(|w| self.shortest_dist(w[0], w[1]))
            .sum()
    }

    /// Checks that every node in `nodes` can reach and be reached from every other.
    pub fn check_strongly_connected(&self, nodes: &[NodeId]) -> Result<()> {
        let Some(&root) = nodes.first() else {
            return Ok(());
        };
        let forward = self.tree(root);
        let mut radj: Vec<Vec<u32>> = vec![Vec::new(); self.points.len()];
        for (from, outs) in self.adj.iter().enumerate() {
            for &(to, _) in outs {
                radj[to as usize].push(from as u32);
            }
        }
        let mut back = vec![false; self.points.len()];
        let mut stack = vec![root.0];
        back[root.index()] = true;
        while let Some(n) = stack.pop() {
            for &m in &radj[n as usize] {
                if !back[m as usize] {
                    back[m as usize] = true;
                    stack.push(m);
                }
            }
        }
        for &n in nodes {
            if !forward.dist[n.index()].is_finite() || !back[n.index()] {
                return Err(Error::Validation(format!(
                    "node {} is not mutually reachable with node {}",
                    self.external_id(n),
                    self.external_id(root)
                )));
            }
        }
        Ok(())
    }

    /// Writes `nodes.csv`-style and `edges.csv`-style tables.
    pub fn write_csv(&self, nodes: &mut impl std::io::Write, edges: &mut impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(nodes);
        match self.mode {
            CoordMode::Planar => w.write_record(["id", "x_km", "y_km"])?,
            CoordMode::LatLon => {
                return Err(Error::Config(
                    "projected lat/lon networks are written back only as planar coordinates".into(),
                ))
            }
        }
        for (i, p) in self.points.iter().enumerate() {
            w.write_record([self.ext_ids[i].to_string(), p.x.to_string(), p.y.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("nodes", e))?;
        let mut w = csv::Writer::from_writer(edges);
        w.write_record(["id", "from", "to", "length_km", "bidirectional"])?;
        for e in &self.edges {
            w.write_record([
                e.id.to_string(),
                self.ext_ids[e.from.index()].to_string(),
                self.ext_ids[e.to.index()].to_string(),
                e.length_km.to_string(),
                u8::from(e.bidirectional).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("edges", e))?;
        Ok(())
    }
}

/// `nx` by `ny` lattice with bidirectional 4-neighbour edges of length `spacing`.
/// Node ids are row-major: `id = iy * nx + ix`, position `(ix, iy) * spacing`.
pub fn gen_grid(nx: usize, ny: usize, spacing: f64) -> Result<RoadNetwork> {
    if nx < 2 || ny < 2 {
        return Err(Error::Config(format!("grid needs at least 2x2 nodes, got {nx}x{ny}")));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::Config(format!("grid spacing must be positive, got {spacing}")));
    }
    let mut ids = Vec::with_capacity(nx * ny);
    let mut points = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            ids.push((iy * nx + ix) as u64);
            points.push(Point::new(ix as f64 * spacing, iy as f64 * spacing));
        }
    }
    let mut edges = Vec::with_capacity(2 * nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let id = (iy * nx + ix) as u64;
            if ix + 1 < nx {
                edges.push((edges.len() as u64, id, id + 1, spacing, true));
            }
            if iy + 1 < ny {
                edges.push((edges.len() as u64, id, id + nx as u64, spacing, true));
            }
        }
    }
    RoadNetwork::build(ids, points, edges, CoordMode::Planar)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

pub fn load_network(nodes_path: &Path, edges_path: &Path) -> Result<RoadNetwork> {
    let nodes_name = nodes_path.display().to_string();
    let edges_name = edges_path.display().to_string();
    parse_network(open(nodes_path)?, &nodes_name, open(edges_path)?, &edges_name)
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, file: &str, line: u64) -> Result<&'a str> {
    rec.get(idx)
        .map(str::trim)
        .ok_or_else(|| Error::parse(file, line, format!("missing column {}", idx + 1)))
}

fn number<T: std::str::FromStr>(s: &str, what: &str, file: &str, line: u64) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(file, line, format!("invalid {what} '{s}'")))
}

fn csv_err(file: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::parse(file, line, e.to_string())
}

pub fn parse_network(
    nodes: impl Read,
    nodes_name: &str,
    edges: impl Read,
    edges_name: &str,
) -> Result<RoadNetwork> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(nodes);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(nodes_name, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mode = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["id", "x_km", "y_km"] => CoordMode::Planar,
        ["id", "lat", "lon"] => CoordMode::LatLon,
        other => {
            return Err(Error::parse(
                nodes_name,
                1,
                format!("expected header id,x_km,y_km or id,lat,lon, got {}", other.join(",")),
            ))
        }
    };
    let mut ids = Vec::new();
    let mut raw = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(nodes_name, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(Error::parse(nodes_name, line, format!("expected 3 columns, got {}", rec.len())));
        }
        ids.push(number::<u64>(field(&rec, 0, nodes_name, line)?, "node id", nodes_name, line)?);
        let a: f64 = number(field(&rec, 1, nodes_name, line)?, "coordinate", nodes_name, line)?;
        let b: f64 = number(field(&rec, 2, nodes_name, line)?, "coordinate", nodes_name, line)?;
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::parse(nodes_name, line, "non-finite coordinate"));
        }
        raw.push((a, b));
    }
    let points: Vec<Point> = match mode {
        CoordMode::Planar => raw.iter().map(|&(x, y)| Point::new(x, y)).collect(),
        CoordMode::LatLon => {
            let mean_lat = raw.iter().map(|r| r.0).sum::<f64>() / raw.len().max(1) as f64;
            raw.iter()
                .map(|&(lat, lon)| project_equirectangular(lat, lon, mean_lat))
                .collect()
        }
    };

    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(edges);
    let header = rdr.headers().map_err(|e| csv_err(edges_name, e))?;
    if header.iter().collect::<Vec<_>>() != ["id", "from", "to", "length_km", "bidirectional"] {
        return Err(Error::parse(
            edges_name,
            1,
            "expected header id,from,to,length_km,bidirectional",
        ));
    }
    let mut raw_edges = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(edges_name, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 5 {
            return Err(Error::parse(edges_name, line, format!("expected 5 columns, got {}", rec.len())));
        }
        let id = number(field(&rec, 0, edges_name, line)?, "edge id", edges_name, line)?;
        let from = number(field(&rec, 1, edges_name, line)?, "node id", edges_name, line)?;
        let to = number(field(&rec, 2, edges_name, line)?, "node id", edges_name, line)?;
        let len = number(field(&rec, 3, edges_name, line)?, "length", edges_name, line)?;
        let bidir = match field(&rec, 4, edges_name, line)? {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(edges_name, line, format!("bidirectional must be 0 or 1, got '{other}'")))
            }
        };
        raw_edges.push((id, from, to, len, bidir));
    }
    RoadNetwork::build(ids, points, raw_edges, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_node(len: &str) -> Result<RoadNetwork> {
        parse_network(
            "id,x_km,y_km\n10,0,0\n11,1,0\n".as_bytes(),
            "nodes",
            format!("id,from,to,length_km,bidirectional\n0,10,11,{len},1\n").as_bytes(),
            "edges",
        )
    }

    #[test]
    fn loads_two_node_network() {
        let net = two_node("1.0").unwrap();
        let (a, b) = (net.node_by_external(10).unwrap(), net.node_by_external(11).unwrap());
        assert_eq!(net.shortest_dist(a, b).unwrap(), 1.0);
        assert_eq!(net.shortest_dist(b, a).unwrap(), 1.0);
    }

    #[test]
    fn rejects_short_edge() {
        assert!(matches!(two_node("0.5"), Err(Error::Validation(_))));
        assert!(matches!(two_node("0"), Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_unknown_endpoint() {
        let err = parse_network(
            "id,x_km,y_km\n1,0,0\n2,1,0\n".as_bytes(),
            "nodes",
            "id,from,to,length_km,bidirectional\n0,1,3,1.0,1\n".as_bytes(),
            "edges",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn rejects_duplicate_nodes_and_reports_lines() {
        let dup = parse_network(
            "id,x_km,y_km\n1,0,0\n1,1,0\n".as_bytes(),
            "nodes",
            "id,from,to,length_km,bidirectional\n".as_bytes(),
            "edges",
        );
        assert!(matches!(dup, Err(Error::Validation(_))));

        let bad = parse_network(
            "id,x_km,y_km\n1,0,0\n2,abc,0\n".as_bytes(),
            "nodes",
            "id,from,to,length_km,bidirectional\n".as_bytes(),
            "edges",
        );
        match bad {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn latlon_header_projects() {
        let net = parse_network(
            "id,lat,lon\n1,40.0,-74.0\n2,40.01,-74.0\n".as_bytes(),
            "nodes",
            "id,from,to,length_km,bidirectional\n0,1,2,1.2,1\n".as_bytes(),
            "edges",
        )
        .unwrap();
        assert_eq!(net.coord_mode(), CoordMode::LatLon);
        let d = euclid(net.position(NodeId(0)), net.position(NodeId(1)));
        assert!((d - 1.112).abs() < 0.001);
    }

    #[test]
    fn directed_edges_are_one_way() {
        let net = parse_network(
            "id,x_km,y_km\n1,0,0\n2,1,0\n".as_bytes(),
            "nodes",
            "id,from,to,length_km,bidirectional\n0,1,2,1.0,0\n".as_bytes(),
            "edges",
        )
        .unwrap();
        assert_eq!(net.dist(NodeId(0), NodeId(1)), 1.0);
        assert!(matches!(net.shortest_dist(NodeId(1), NodeId(0)), Err(Error::NoPath { .. })));
        assert!(net.check_strongly_connected(&[NodeId(0), NodeId(1)]).is_err());
    }

    #[test]
    fn grid_counts() {
        let g = gen_grid(2, 2, 1.0).unwrap();
        assert_eq!((g.node_count(), g.edges().len()), (4, 4));
        let g = gen_grid(10, 10, 0.5).unwrap();
        assert_eq!((g.node_count(), g.edges().len()), (100, 2 * 100 - 10 - 10));
        assert!(gen_grid(1, 5, 1.0).is_err());
        assert!(gen_grid(3, 3, 0.0).is_err());
    }

    #[test]
    fn grid_distances() {
        let g = gen_grid(3, 3, 1.0).unwrap();
        assert_eq!(g.shortest_dist(NodeId(0), NodeId(8)).unwrap(), 4.0);
        assert_eq!(g.shortest_dist(NodeId(0), NodeId(1)).unwrap(), 1.0);
        assert_eq!(g.shortest_dist(NodeId(4), NodeId(4)).unwrap(), 0.0);
        // (0,0) -> (2,1): brute-force enumeration of monotone lattice paths gives 3 steps.
        assert_eq!(g.shortest_dist(NodeId(0), NodeId(5)).unwrap(), 3.0);
        let p = g.node_path(NodeId(0), NodeId(5)).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!((p[0], p[3]), (NodeId(0), NodeId(5)));
    }

    #[test]
    fn stop_sequences() {
        let g = gen_grid(3, 3, 1.0).unwrap();
        assert_eq!(g.stop_sequence_length(&[NodeId(4)]).unwrap(), 0.0);
        assert_eq!(g.stop_sequence_length(&[NodeId(0), NodeId(2), NodeId(0)]).unwrap(), 4.0);
        assert_eq!(g.stop_sequence_length(&[NodeId(3); 3]).unwrap(), 0.0);
    }

    #[test]
    fn csv_round_trip_is_byte_stable() {
        let g = gen_grid(4, 3, 0.3).unwrap();
        let (mut n1, mut e1) = (Vec::new(), Vec::new());
        g.write_csv(&mut n1, &mut e1).unwrap();
        let back = parse_network(&n1[..], "n", &e1[..], "e").unwrap();
        let (mut n2, mut e2) = (Vec::new(), Vec::new());
        back.write_csv(&mut n2, &mut e2).unwrap();
        assert_eq!((n1, e1), (n2, e2));
    }

    /// Irregular network: jittered lattice with edge lengths stretched above the chord.
    fn jittered(seed: u64) -> RoadNetwork {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 6;
        let mut ids = Vec::new();
        let mut pts = Vec::new();
        for iy in 0..n {
            for ix in 0..n {
                ids.push((iy * n + ix) as u64);
                pts.push(Point::new(
                    ix as f64 + rng.random_range(-0.3..0.3),
                    iy as f64 + rng.random_range(-0.3..0.3),
                ));
            }
        }
        let mut edges = Vec::new();
        for iy in 0..n {
            for ix in 0..n {
                let a = iy * n + ix;
                for b in [(ix + 1 < n).then(|| a + 1), (iy + 1 < n).then(|| a + n)].into_iter().flatten() {
                    let len = euclid(pts[a], pts[b]) * rng.random_range(1.0..1.5);
                    edges.push((edges.len() as u64, a as u64, b as u64, len, true));
                }
            }
        }
        RoadNetwork::build(ids, pts, edges, CoordMode::Planar).unwrap()
    }

    proptest! {
        #[test]
        fn network_distance_dominates_euclid(seed in 0u64..1000, a in 0u32..36, b in 0u32..36, c in 0u32..36) {
            let net = jittered(seed);
            let (a, b, c) = (NodeId(a), NodeId(b), NodeId(c));
            let dab = net.dist(a, b);
            prop_assert!(dab >= euclid(net.position(a), net.position(b)) - 1e-9);
            prop_assert!(net.dist(a, c) <= dab + net.dist(b, c) + 1e-9);
        }

        #[test]
        fn warm_and_cold_cache_agree(seed in 0u64..1000, a in 0u32..36, b in 0u32..36) {
            let warm = jittered(seed);
            for s in warm.nodes() { warm.tree(s); }
            let cold = jittered(seed);
            prop_assert_eq!(warm.dist(NodeId(a), NodeId(b)).to_bits(), cold.dist(NodeId(a), NodeId(b)).to_bits());
        }
    }
}
