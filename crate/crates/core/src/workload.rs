//! Synthetic request generation.

use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::euclid;
use crate::model::{Request, RequestId};
use crate::roadnet::{NodeId, RoadNetwork};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arrivals {
    /// Exponential inter-arrival times at rate `count / horizon`.
    #[default]
    Poisson,
    /// Independent uniform times over the horizon.
    Uniform,
}

impl FromStr for Arrivals {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(Self::Poisson),
            "uniform" => Ok(Self::Uniform),
            _ => Err(Error::Config(format!("unknown arrival process '{s}' (poisson|uniform)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub count: usize,
    pub horizon_s: f64,
    /// Minimum straight-line distance between origin and destination.
    pub min_e_km: f64,
    pub party_size: u32,
    pub arrivals: Arrivals,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self { count: 100, horizon_s: 3600.0, min_e_km: 0.0, party_size: 1, arrivals: Arrivals::Poisson }
    }
}

const MAX_ATTEMPTS_PER_REQUEST: usize = 10_000;

/// Draws `spec.count` requests with uniformly chosen origin and destination
/// nodes, ids `0..count` in arrival order.
pub fn generate_requests(net: &RoadNetwork, spec: &WorkloadSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Request>> {
    if !(spec.horizon_s > 0.0) || !(spec.min_e_km >= 0.0) || spec.party_size == 0 {
        return Err(Error::Config("horizon must be positive, min distance >= 0 and party size >= 1".into()));
    }
    let n = net.node_count() as u32;
    if spec.count > 0 && !has_pair_at_least(net, spec.min_e_km) {
        return Err(Error::Config(format!("no node pair is at least {} km apart", spec.min_e_km)));
    }

    let mut times: Vec<f64> = match spec.arrivals {
        Arrivals::Poisson => {
            let exp = Exp::new(spec.count as f64 / spec.horizon_s).map_err(|e| Error::Config(e.to_string()))?;
            let mut t = 0.0;
            (0..spec.count).map(|_| { t += exp.sample(rng); t }).collect()
        }
        Arrivals::Uniform => (0..spec.count).map(|_| rng.random_range(0.0..spec.horizon_s)).collect(),
    };
    times.sort_by(f64::total_cmp);

    let mut out = Vec::with_capacity(spec.count);
    for (k, t) in times.into_iter().enumerate() {
        let (o, d, direct) = (0..MAX_ATTEMPTS_PER_REQUEST)
            .find_map(|_| {
                let (o, d) = (NodeId(rng.random_range(0..n)), NodeId(rng.random_range(0..n)));
                let direct = net.dist(o, d);
                let ok = o != d
                    && direct.is_finite()
                    && direct > 0.0
                    && euclid(net.position(o), net.position(d)) >= spec.min_e_km;
                ok.then_some((o, d, direct))
            })
            .ok_or_else(|| Error::Config("could not draw a reachable origin/destination pair".into()))?;
        out.push(Request::new(RequestId(k as u64), spec.party_size, t, o, d, direct));
    }
    Ok(out)
}

fn has_pair_at_least(net: &RoadNetwork, km: f64) -> bool {
    let pts: Vec<_> = net.nodes().map(|v| net.position(v)).collect();
    pts.iter().enumerate().any(|(i, a)| pts[i + 1..].iter().any(|b| euclid(*a, *b) >= km.max(f64::MIN_POSITIVE)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::gen_grid;
    use crate::util::{rng_for, Stream};

    #[test]
    fn reproducible_and_respects_min_distance() {
        let net = gen_grid(10, 10, 0.5).unwrap();
        let spec = WorkloadSpec { count: 200, min_e_km: 2.0, ..WorkloadSpec::default() };
        let a = generate_requests(&net, &spec, &mut rng_for(5, Stream::Requests)).unwrap();
        let b = generate_requests(&net, &spec, &mut rng_for(5, Stream::Requests)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 200);
        assert!(a.windows(2).all(|w| w[0].t <= w[1].t));
        assert!(a.iter().all(|r| euclid(net.position(r.o), net.position(r.d)) >= 2.0));
    }

    #[test]
    fn uniform_arrivals_stay_inside_horizon() {
        let net = gen_grid(4, 4, 1.0).unwrap();
        let spec = WorkloadSpec { count: 50, arrivals: Arrivals::Uniform, horizon_s: 600.0, ..WorkloadSpec::default() };
        let r = generate_requests(&net, &spec, &mut rng_for(1, Stream::Requests)).unwrap();
        assert!(r.iter().all(|r| r.t < 600.0));
    }

    #[test]
    fn impossible_min_distance_is_rejected() {
        let net = gen_grid(3, 3, 1.0).unwrap();
        let spec = WorkloadSpec { min_e_km: 5.0, ..WorkloadSpec::default() };
        assert!(generate_requests(&net, &spec, &mut rng_for(1, Stream::Requests)).is_err());
    }
}
