//! Planar geometry: points in km, Euclidean distance, and the focal ellipse /
//! circumscribing rectangle pair used as a potential search area (PSA).

use serde::{Deserialize, Serialize};

use crate::model::RequestId;

/// Slack applied to closed-region membership and feasibility comparisons, in km.
pub const GEOM_EPS: f64 = 1e-9;

/// Mean Earth radius used by the equirectangular projection, in km.
const EARTH_RADIUS_KM: f64 = 6371.0088;

/// A planar position in km (x east, y north).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Point at fraction `t` of the way from `self` to `other`.
    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Projects latitude/longitude (degrees) onto the plane about `ref_lat_deg`.
pub fn project_equirectangular(lat_deg: f64, lon_deg: f64, ref_lat_deg: f64) -> Point {
    let x = EARTH_RADIUS_KM * lon_deg.to_radians() * ref_lat_deg.to_radians().cos();
    let y = EARTH_RADIUS_KM * lat_deg.to_radians();
    Point::new(x, y)
}

pub fn euclid(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Oriented rectangle circumscribing the ellipse `{x : E(f1,x) + E(x,f2) <= sum_bound}`.
///
/// The long side runs along the focal axis with half length `sum_bound / 2`; the
/// short side has half width `sqrt(sum_bound^2 - E(f1,f2)^2) / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsaRect {
    pub center: Point,
    /// Unit vector from focus 1 to focus 2 (+x when the foci coincide).
    pub axis: (f64, f64),
    pub half_len: f64,
    pub half_wid: f64,
}

impl PsaRect {
    pub fn area(&self) -> f64 {
        4.0 * self.half_len * self.half_wid
    }

    /// Coordinates of `p` in the rectangle frame: `u` along the axis, `v` across it.
    pub fn to_frame(&self, p: Point) -> (f64, f64) {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let (ax, ay) = self.axis;
        (dx * ax + dy * ay, -dx * ay + dy * ax)
    }

    pub fn contains(&self, p: Point) -> bool {
        let (u, v) = self.to_frame(p);
        u.abs() <= self.half_len + GEOM_EPS && v.abs() <= self.half_wid + GEOM_EPS
    }

    pub fn corners(&self) -> [Point; 4] {
        let (ax, ay) = self.axis;
        let c = self.center;
        let at = |u: f64, v: f64| Point::new(c.x + u * ax - v * ay, c.y + u * ay + v * ax);
        let (l, w) = (self.half_len, self.half_wid);
        [at(l, w), at(-l, w), at(-l, -w), at(l, -w)]
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let cs = self.corners();
        let mut lo = cs[0];
        let mut hi = cs[0];
        for c in &cs[1..] {
            lo.x = lo.x.min(c.x);
            lo.y = lo.y.min(c.y);
            hi.x = hi.x.max(c.x);
            hi.y = hi.y.max(c.y);
        }
        (lo, hi)
    }
}

/// Builds the circumscribing rectangle, or `None` when `sum_bound` is below the
/// focal distance and the ellipse is empty.
pub fn make_psa_rect(f1: Point, f2: Point, sum_bound: f64) -> Option<PsaRect> {
    let focal = euclid(f1, f2);
    if !(sum_bound >= 0.0) || sum_bound + GEOM_EPS < focal {
        return None;
    }
    let axis = if focal > 0.0 {
        ((f2.x - f1.x) / focal, (f2.y - f1.y) / focal)
    } else {
        (1.0, 0.0)
    };
    Some(PsaRect {
        center: f1.lerp(f2, 0.5),
        axis,
        half_len: sum_bound / 2.0,
        half_wid: (sum_bound * sum_bound - focal * focal).max(0.0).sqrt() / 2.0,
    })
}

pub fn rect_contains(r: &PsaRect, p: Point) -> bool {
    r.contains(p)
}

pub fn ellipse_contains(f1: Point, f2: Point, sum_bound: f64, p: Point) -> bool {
    euclid(f1, p) + euclid(p, f2) <= sum_bound
}

/// Rectangle area in closed form: `sum_bound * sqrt(sum_bound^2 - focal^2)`.
pub fn rect_area(sum_bound: f64, focal: f64) -> f64 {
    sum_bound * (sum_bound * sum_bound - focal * focal).max(0.0).sqrt()
}

/// Ellipse area: `pi * a * b` with semi-axes `sum_bound/2` and `sqrt(sum_bound^2 - focal^2)/2`.
pub fn ellipse_area(sum_bound: f64, focal: f64) -> f64 {
    std::f64::consts::PI * rect_area(sum_bound, focal) / 4.0
}

/// The pruning region of a vehicle, derived from its furthest request.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum VehiclePsa {
    /// No furthest request (idle vehicle).
    #[default]
    Empty,
    /// Furthest request already picked up: rectangle around its (o, d).
    Single { furthest: RequestId, beta: PsaRect },
    /// Furthest request still waiting: union of the (p_s, o) rectangle, empty
    /// when the buffer bound is shorter than E(p_s, o), and the (o, d) rectangle.
    Union {
        furthest: RequestId,
        alpha: Option<PsaRect>,
        beta: PsaRect,
    },
}

impl VehiclePsa {
    pub fn furthest(&self) -> Option<RequestId> {
        match self {
            VehiclePsa::Empty => None,
            VehiclePsa::Single { furthest, .. } | VehiclePsa::Union { furthest, .. } => {
                Some(*furthest)
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, VehiclePsa::Empty)
    }

    pub fn contains(&self, p: Point) -> bool {
        psa_contains(self, p)
    }
}

pub fn psa_contains(psa: &VehiclePsa, p: Point) -> bool {
    match psa {
        VehiclePsa::Empty => false,
        VehiclePsa::Single { beta, .. } => beta.contains(p),
        VehiclePsa::Union { alpha, beta, .. } => {
            alpha.is_some_and(|a| a.contains(p)) || beta.contains(p)
        }
    }
}
