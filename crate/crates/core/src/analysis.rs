//! Closed-form and sampled estimates: rectangle/ellipse area inflation,
//! expected candidate reduction rates, and a harness that measures reduction
//! rates against a frozen search area.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ellipse_area, euclid, make_psa_rect, Point, PsaRect, VehiclePsa};
use crate::insertion::{closed_form_counts, InsertionCase};
use crate::model::{GatingMode, RequestId, RequestState, WorldState};
use crate::scheduler::{gate, GateInput};

/// Inflation ratio of the rectangular search area over the optimal
/// elliptical one, with its closed-form bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaBounds {
    pub eta: f64,
    pub lo: f64,
    pub hi: f64,
}

/// `alpha`, `beta`: rectangle areas; `alpha_opt`, `beta_opt`: ellipse areas;
/// `mu`, `nu`: rectangle and ellipse intersection areas.
pub fn eta_closed(alpha: f64, beta: f64, alpha_opt: f64, beta_opt: f64, mu: f64, nu: f64) -> Result<EtaBounds> {
    let vals = [alpha, beta, alpha_opt, beta_opt, mu, nu];
    if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Domain(format!("areas must be finite and non-negative: {vals:?}")));
    }
    let opt_sum = alpha_opt + beta_opt;
    let opt_union = opt_sum - nu;
    if !(opt_union > 0.0) {
        return Err(Error::Domain("optimal search area is empty".into()));
    }
    let pi = std::f64::consts::PI;
    let eta = (alpha + beta - mu) / opt_union;
    let lo = f64::max(1.0, 4.0 / pi + (4.0 * nu - pi * mu) / (pi * opt_sum));
    let hi = 4.0 / pi + (4.0 - pi) * mu / (pi * opt_union);
    Ok(EtaBounds { eta, lo, hi })
}

/// Ellipse with foci `f1`, `f2` and focal-distance sum bound `sum_bound`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocalRegion {
    pub f1: Point,
    pub f2: Point,
    pub sum_bound: f64,
}

impl FocalRegion {
    pub fn rect(&self) -> Option<PsaRect> {
        make_psa_rect(self.f1, self.f2, self.sum_bound)
    }

    pub fn ellipse_area(&self) -> f64 {
        ellipse_area(self.sum_bound, euclid(self.f1, self.f2))
    }

    fn in_ellipse(&self, p: Point) -> bool {
        euclid(p, self.f1) + euclid(p, self.f2) <= self.sum_bound
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimate {
    /// Sampled ratio of the rectangle union to the ellipse union.
    pub eta: f64,
    /// 95% half-width of `eta`.
    pub ci95: f64,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_opt: f64,
    pub beta_opt: f64,
    pub mu: f64,
    pub nu: f64,
    /// Closed form evaluated with the sampled intersections.
    pub closed: EtaBounds,
    pub samples: u64,
}

/// Samples the union bounding box of the two rectangles. `alpha` may be
/// absent, in which case only the `beta` region counts.
pub fn eta_monte_carlo(alpha: Option<FocalRegion>, beta: FocalRegion, samples: u64, rng: &mut ChaCha8Rng) -> Result<EtaEstimate> {
    let beta_rect = beta.rect().ok_or_else(|| Error::Domain("beta sum bound below focal distance".into()))?;
    let alpha_rect = match alpha {
        Some(a) => Some(a.rect().ok_or_else(|| Error::Domain("alpha sum bound below focal distance".into()))?),
        None => None,
    };
    if samples == 0 {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let (mut lo, mut hi) = beta_rect.bounding_box();
    if let Some(r) = &alpha_rect {
        let (l, h) = r.bounding_box();
        lo = Point::new(lo.x.min(l.x), lo.y.min(l.y));
        hi = Point::new(hi.x.max(h.x), hi.y.max(h.y));
    }
    let box_area = (hi.x - lo.x) * (hi.y - lo.y);

    let (mut rect_union, mut ell_union, mut rect_inter, mut ell_inter) = (0u64, 0u64, 0u64, 0u64);
    for _ in 0..samples {
        let p = Point::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y));
        let in_rb = beta_rect.contains(p);
        let in_ra = alpha_rect.as_ref().is_some_and(|r| r.contains(p));
        if !(in_rb || in_ra) {
            continue;
        }
        rect_union += 1;
        rect_inter += u64::from(in_ra && in_rb);
        let in_eb = in_rb && beta.in_ellipse(p);
        let in_ea = in_ra && alpha.is_some_and(|a| a.in_ellipse(p));
        ell_union += u64::from(in_ea || in_eb);
        ell_inter += u64::from(in_ea && in_eb);
    }
    if ell_union == 0 {
        return Err(Error::Domain("no sample fell inside the optimal search area".into()));
    }

    let n = samples as f64;
    let (px, py) = (rect_union as f64 / n, ell_union as f64 / n);
    let eta = px / py;
    // Delta method for a ratio of proportions; the ellipse union lies inside the rectangle union.
    let var = (px * (1.0 - px) / (py * py) + px * px * (1.0 - py) / (py * py * py) - 2.0 * px * (1.0 - px) / (py * py)) / n;
    let mu = box_area * rect_inter as f64 / n;
    let nu = box_area * ell_inter as f64 / n;
    let (alpha_area, alpha_opt) = match (alpha_rect, alpha) {
        (Some(r), Some(a)) => (r.area(), a.ellipse_area()),
        _ => (0.0, 0.0),
    };
    let closed = eta_closed(alpha_area, beta_rect.area(), alpha_opt, beta.ellipse_area(), mu, nu)?;
    Ok(EtaEstimate {
        eta,
        ci95: 1.96 * var.max(0.0).sqrt(),
        alpha: alpha_area,
        beta: beta_rect.area(),
        alpha_opt,
        beta_opt: beta.ellipse_area(),
        mu,
        nu,
        closed,
        samples,
    })
}

fn check_area(a: f64, s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("city area must be positive, got {s}")));
    }
    if !(a >= 0.0) || a > s {
        return Err(Error::Domain(format!("search area {a} must lie in [0, {s}]")));
    }
    Ok(())
}

/// Expected reduction rates `(psi_A, psi_B)` for a search area `a` inside a
/// city of area `s` under uniform origins and destinations.
pub fn expected_rrcc(a: f64, s: f64) -> Result<(f64, f64)> {
    check_area(a, s)?;
    let f = a / s;
    Ok((1.0 - f * f, 1.0 - f))
}

/// Exhaustive candidate counts for a vehicle with `k` path points.
pub fn candidate_counts(k: usize) -> [u64; 3] {
    closed_form_counts(k)
}

/// Expected number of candidates avoided per trial.
pub fn expected_reduction(k: usize, a: f64, s: f64) -> Result<f64> {
    let (pa, pb) = expected_rrcc(a, s)?;
    let [na, nb, _] = candidate_counts(k);
    Ok(na as f64 * pa + nb as f64 * pb)
}

/// Onboard requests per moving vehicle; `None` when nothing moves.
pub fn sharing_rate(onboard: usize, moving: usize) -> Option<f64> {
    (moving > 0).then(|| onboard as f64 / moving as f64)
}

/// Fleet snapshot metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficMetrics {
    pub onboard: usize,
    /// Vehicles with nonzero instantaneous speed.
    pub moving: usize,
    /// Vehicles with a nonempty service list.
    pub busy: usize,
    pub sharing_rate: Option<f64>,
    /// Moving vehicles over fleet size.
    pub utilization: f64,
    pub busy_fraction: f64,
    /// Direct distance of completed requests minus fleet distance; may be negative.
    pub saved_km: f64,
}

pub fn traffic_metrics(world: &WorldState) -> TrafficMetrics {
    let fleet = world.vehicles.len().max(1) as f64;
    let moving = world.vehicles.iter().filter(|v| v.is_moving()).count();
    let busy = world.vehicles.iter().filter(|v| v.is_busy()).count();
    let onboard = world.count(RequestState::Onboard);
    let direct: f64 =
        world.requests.iter().filter(|r| r.state == RequestState::Completed).map(|r| r.direct_dist).sum();
    let traveled: f64 = world.vehicles.iter().map(|v| v.odometer).sum();
    TrafficMetrics {
        onboard,
        moving,
        busy,
        sharing_rate: sharing_rate(onboard, moving),
        utilization: moving as f64 / fleet,
        busy_fraction: busy as f64 / fleet,
        saved_km: direct - traveled,
    }
}

/// Axis-aligned search rectangle of area `frac * S`, centered in `bbox`.
pub fn frozen_psa(bbox: (Point, Point), frac: f64) -> Result<VehiclePsa> {
    let (lo, hi) = bbox;
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    check_area(frac * w * h, w * h)?;
    let len = 0.9 * w;
    let wid = frac * w * h / len;
    if wid > len || wid > 0.9 * h {
        return Err(Error::Domain(format!("area fraction {frac} does not fit the city box")));
    }
    let focal = (len * len - wid * wid).sqrt();
    let c = Point::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
    let beta = make_psa_rect(Point::new(c.x - focal / 2.0, c.y), Point::new(c.x + focal / 2.0, c.y), len)
        .ok_or_else(|| Error::Domain("degenerate frozen rectangle".into()))?;
    Ok(VehiclePsa::Single { furthest: RequestId(0), beta })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrccMeasurement {
    pub area_frac: f64,
    pub psi_a: f64,
    pub psi_b: f64,
    pub expected_a: f64,
    pub expected_b: f64,
    pub samples: u64,
}

/// Draws uniform origin/destination points over `bbox` and gates them
/// against a frozen `psa`.
pub fn rrcc_harness(
    bbox: (Point, Point),
    psa: &VehiclePsa,
    mode: GatingMode,
    samples: u64,
    rng: &mut ChaCha8Rng,
) -> Result<RrccMeasurement> {
    let (lo, hi) = bbox;
    let s = (hi.x - lo.x) * (hi.y - lo.y);
    let a = match psa {
        VehiclePsa::Single { beta, .. } => beta.area(),
        _ => return Err(Error::Domain("the harness takes a single frozen rectangle".into())),
    };
    let (expected_a, expected_b) = expected_rrcc(a, s)?;
    if samples == 0 {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let anchor = [lo];
    let (mut pass_a, mut pass_b) = (0u64, 0u64);
    for _ in 0..samples {
        let mut draw = || Point::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y));
        let (o, d) = (draw(), draw());
        let input = GateInput { psa, o, d, path_points: &anchor, vehicle_pos: lo, buffer_km: 0.0 };
        pass_a += u64::from(gate(&input, InsertionCase::A, mode));
        pass_b += u64::from(gate(&input, InsertionCase::B, mode));
    }
    let n = samples as f64;
    Ok(RrccMeasurement {
        area_frac: a / s,
        psi_a: 1.0 - pass_a as f64 / n,
        psi_b: 1.0 - pass_b as f64 / n,
        expected_a,
        expected_b,
        samples,
    })
}
