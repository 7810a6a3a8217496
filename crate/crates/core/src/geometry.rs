//! Verification geometries.
//!
//! Two layouts are supported: the concentric ring around a single access
//! point, and an urban square crossed by two orthogonal streets with a
//! rectangular region of interest (ROI) anchored at the south-west corner.
//! All objects are immutable once built.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point on the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Hypothesis on the user location: `H0` inside the ROI, `H1` outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    H0,
    H1,
}

impl RegionLabel {
    /// Numeric label: -1 for `H0`, +1 for `H1`.
    pub fn label(self) -> i8 {
        match self {
            RegionLabel::H0 => -1,
            RegionLabel::H1 => 1,
        }
    }

    pub fn from_label(label: i8) -> Result<Self> {
        match label {
            -1 => Ok(RegionLabel::H0),
            1 => Ok(RegionLabel::H1),
            other => Err(Error::Data(format!("label must be -1 or +1, got {other}"))),
        }
    }
}

/// Propagation condition of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkState {
    Los,
    Nlos,
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) || x1 <= x0 || y1 <= y0 {
            return Err(Error::InvalidConfig(format!("degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]")));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// Rectangle anchored at offsets `(d1, d2)` with extent `beta1 x beta2`.
    pub fn anchored(d1: f64, d2: f64, beta1: f64, beta2: f64) -> Result<Self> {
        Self::new(d1, d2, d1 + beta1, d2 + beta2)
    }

    pub fn contains(&self, p: &Position) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn center(&self) -> Position {
        Position::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        Position::new(
            self.x0 + (self.x1 - self.x0) * rng.random::<f64>(),
            self.y0 + (self.y1 - self.y0) * rng.random::<f64>(),
        )
    }

    /// Parameter interval `[t0, t1]` of the segment `p + t (q - p)`, `t` in
    /// `[0, 1]`, that lies inside the rectangle.
    fn clip_segment(&self, p: &Position, q: &Position) -> Option<(f64, f64)> {
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        let d = [q.x - p.x, q.y - p.y];
        let start = [p.x, p.y];
        let lo = [self.x0, self.y0];
        let hi = [self.x1, self.y1];
        for k in 0..2 {
            if d[k] == 0.0 {
                if start[k] < lo[k] || start[k] > hi[k] {
                    return None;
                }
            } else {
                let mut a = (lo[k] - start[k]) / d[k];
                let mut b = (hi[k] - start[k]) / d[k];
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                t0 = t0.max(a);
                t1 = t1.min(b);
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some((t0, t1))
    }
}

/// Distance from `p` to the segment `[a, b]`.
fn point_segment_distance(p: &Position, a: &Position, b: &Position) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    p.distance(&Position::new(a.x + t * dx, a.y + t * dy))
}

/// Access point placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub position: Position,
    /// Antenna height in meters, used by the NLOS path-loss.
    pub height: f64,
}

/// Concentric ring layout with a single access point at the center.
///
/// The service area is the annulus `r_min <= d <= r_out`; the ROI is the
/// inner annulus `r_min <= d <= r_in`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingScenario {
    pub r_min: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub center: Position,
    #[serde(default = "default_ap_height")]
    pub ap_height: f64,
}

fn default_ap_height() -> f64 {
    15.0
}

impl RingScenario {
    pub fn new(r_min: f64, r_in: f64, r_out: f64) -> Result<Self> {
        let ring = Self { r_min, r_in, r_out, center: Position::new(0.0, 0.0), ap_height: default_ap_height() };
        ring.validate()?;
        Ok(ring)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min < self.r_in && self.r_in < self.r_out && self.r_out.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ring radii must satisfy 0 < r_min < r_in < r_out, got {}, {}, {}",
                self.r_min, self.r_in, self.r_out
            )));
        }
        Ok(())
    }

    /// `R_in^2 - R_min^2`.
    pub fn delta_inside(&self) -> f64 {
        self.r_in * self.r_in - self.r_min * self.r_min
    }

    /// `R_out^2 - R_in^2`.
    pub fn delta_outside(&self) -> f64 {
        self.r_out * self.r_out - self.r_in * self.r_in
    }

    fn sample_annulus<R: Rng + ?Sized>(&self, r0: f64, r1: f64, rng: &mut R) -> Position {
        // Radius by inverse CDF of the area measure 2r / (r1^2 - r0^2).
        let u: f64 = rng.random();
        let r = (r0 * r0 + u * (r1 * r1 - r0 * r0)).sqrt().clamp(r0, r1);
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        Position::new(self.center.x + r * theta.cos(), self.center.y + r * theta.sin())
    }
}

/// Street strip along one axis, spanning the whole area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreetStrip {
    pub axis: Axis,
    /// Coordinate of the center line (y for horizontal, x for vertical).
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// Parameters of the default crossroads layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UrbanLayout {
    /// Side of each of the four building blocks.
    pub block: f64,
    pub street_width: f64,
    pub d1: f64,
    pub d2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub ap_height: f64,
    /// 1-based indices into the default access point list.
    pub aps: Vec<usize>,
}

impl Default for UrbanLayout {
    fn default() -> Self {
        Self {
            block: 230.0,
            street_width: 40.0,
            d1: 50.0,
            d2: 50.0,
            beta1: 150.0,
            beta2: 150.0,
            ap_height: 15.0,
            aps: (1..=11).collect(),
        }
    }
}

/// Urban square with street strips, a rectangular ROI and a set of APs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrbanScenario {
    pub side: f64,
    pub streets: Vec<StreetStrip>,
    pub roi: Rect,
    pub aps: Vec<AccessPoint>,
}

impl UrbanScenario {
    pub fn new(side: f64, streets: Vec<StreetStrip>, roi: Rect, aps: Vec<AccessPoint>) -> Result<Self> {
        let s = Self { side, streets, roi, aps };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.side > 0.0 && self.side.is_finite()) {
            return Err(Error::InvalidConfig(format!("area side must be positive, got {}", self.side)));
        }
        let area = self.area_rect();
        if !area.contains_rect(&self.roi) {
            return Err(Error::InvalidConfig("ROI rectangle must lie inside the area".into()));
        }
        if self.roi.area() >= area.area() {
            return Err(Error::InvalidConfig("ROI must be a strict subset of the area".into()));
        }
        if let Some(s) = self.streets.iter().find(|s| !(s.width > 0.0)) {
            return Err(Error::InvalidConfig(format!("street width must be positive, got {}", s.width)));
        }
        if self.aps.is_empty() {
            return Err(Error::InvalidConfig("at least one access point is required".into()));
        }
        for ap in &self.aps {
            if !area.contains(&ap.position) {
                return Err(Error::InvalidConfig(format!(
                    "access point ({}, {}) lies outside the area",
                    ap.position.x, ap.position.y
                )));
            }
            if !(ap.height > 0.0) {
                return Err(Error::InvalidConfig("access point height must be positive".into()));
            }
        }
        Ok(())
    }

    /// Crossroads layout: four square blocks of side `block` separated by a
    /// horizontal and a vertical street meeting at the center.
    pub fn crossroads(layout: &UrbanLayout) -> Result<Self> {
        let side = 2.0 * layout.block + layout.street_width;
        let c = 0.5 * side;
        let streets = vec![
            StreetStrip { axis: Axis::Horizontal, center: c, width: layout.street_width },
            StreetStrip { axis: Axis::Vertical, center: c, width: layout.street_width },
        ];
        let roi = Rect::anchored(layout.d1, layout.d2, layout.beta1, layout.beta2)?;
        let all = Self::default_ap_positions(side, layout.street_width);
        let mut aps = Vec::with_capacity(layout.aps.len());
        for &idx in &layout.aps {
            let p = all.get(idx.wrapping_sub(1)).ok_or_else(|| {
                Error::InvalidConfig(format!("access point index {idx} out of range 1..={}", all.len()))
            })?;
            aps.push(AccessPoint { position: *p, height: layout.ap_height });
        }
        Self::new(side, streets, roi, aps)
    }

    /// Default placement of the eleven APs: AP1 at the crossroads, AP2-AP5 at
    /// the street ends, AP6-AP11 along the four street arms.
    pub fn default_ap_positions(side: f64, street_width: f64) -> Vec<Position> {
        let c = 0.5 * side;
        let end = 0.04 * side;
        let off = 0.25 * street_width;
        vec![
            Position::new(c, c),
            Position::new(c, end),
            Position::new(side - end, c),
            Position::new(c, side - end),
            Position::new(end, c),
            Position::new(c, 0.27 * side),
            Position::new(0.73 * side, c),
            Position::new(c - off, 0.66 * side),
            Position::new(0.27 * side, c),
            Position::new(c + off, 0.84 * side),
            Position::new(0.84 * side, c + off),
        ]
    }

    pub fn area_rect(&self) -> Rect {
        Rect { x0: 0.0, y0: 0.0, x1: self.side, y1: self.side }
    }

    pub fn street_rects(&self) -> Vec<Rect> {
        self.streets
            .iter()
            .map(|s| match s.axis {
                Axis::Horizontal => Rect {
                    x0: 0.0,
                    x1: self.side,
                    y0: s.center - 0.5 * s.width,
                    y1: s.center + 0.5 * s.width,
                },
                Axis::Vertical => Rect {
                    x0: s.center - 0.5 * s.width,
                    x1: s.center + 0.5 * s.width,
                    y0: 0.0,
                    y1: self.side,
                },
            })
            .collect()
    }

    pub fn on_street(&self, p: &Position) -> bool {
        self.street_rects().iter().any(|r| r.contains(p))
    }

    /// ROI edges that separate the ROI from the rest of the area (edges lying
    /// on the area boundary are excluded).
    fn interface_edges(&self) -> Vec<(Position, Position)> {
        let r = &self.roi;
        let corners = [
            Position::new(r.x0, r.y0),
            Position::new(r.x1, r.y0),
            Position::new(r.x1, r.y1),
            Position::new(r.x0, r.y1),
        ];
        let on_boundary = [r.y0 <= 0.0, r.x1 >= self.side, r.y1 >= self.side, r.x0 <= 0.0];
        (0..4)
            .filter(|&k| !on_boundary[k])
            .map(|k| (corners[k], corners[(k + 1) % 4]))
            .collect()
    }
}

/// A verification geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scenario {
    Ring(RingScenario),
    Urban(UrbanScenario),
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Ring(r) => r.validate(),
            Scenario::Urban(u) => u.validate(),
        }
    }

    pub fn in_area(&self, p: &Position) -> bool {
        match self {
            Scenario::Ring(r) => {
                let d = p.distance(&r.center);
                d >= r.r_min && d <= r.r_out
            }
            Scenario::Urban(u) => u.area_rect().contains(p),
        }
    }

    /// ROI membership. Fails for points outside the service area.
    pub fn contains_roi(&self, p: &Position) -> Result<bool> {
        if !self.in_area(p) {
            return Err(Error::OutsideArea { x: p.x, y: p.y });
        }
        Ok(self.in_roi_unchecked(p))
    }

    fn in_roi_unchecked(&self, p: &Position) -> bool {
        match self {
            Scenario::Ring(r) => p.distance(&r.center) <= r.r_in,
            Scenario::Urban(u) => u.roi.contains(p),
        }
    }

    pub fn region_of(&self, p: &Position) -> Result<RegionLabel> {
        Ok(if self.contains_roi(p)? { RegionLabel::H0 } else { RegionLabel::H1 })
    }

    /// Draws a position uniformly (area measure) from the ROI (`Some(H0)`),
    /// its complement (`Some(H1)`) or the whole area (`None`).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, region: Option<RegionLabel>, rng: &mut R) -> Position {
        match self {
            Scenario::Ring(r) => match region {
                Some(RegionLabel::H0) => r.sample_annulus(r.r_min, r.r_in, rng),
                Some(RegionLabel::H1) => r.sample_annulus(r.r_in, r.r_out, rng),
                None => r.sample_annulus(r.r_min, r.r_out, rng),
            },
            Scenario::Urban(u) => match region {
                Some(RegionLabel::H0) => u.roi.sample(rng),
                None => u.area_rect().sample(rng),
                Some(RegionLabel::H1) => loop {
                    let p = u.area_rect().sample(rng);
                    if !u.roi.contains(&p) {
                        break p;
                    }
                },
            },
        }
    }

    /// Signed distance to the border between ROI and its complement:
    /// negative inside the ROI, positive outside. Defined on the whole plane.
    pub fn signed_border_distance(&self, p: &Position) -> f64 {
        match self {
            Scenario::Ring(r) => p.distance(&r.center) - r.r_in,
            Scenario::Urban(u) => {
                let d = u
                    .interface_edges()
                    .iter()
                    .map(|(a, b)| point_segment_distance(p, a, b))
                    .fold(f64::INFINITY, f64::min);
                if u.roi.contains(p) {
                    -d
                } else {
                    d
                }
            }
        }
    }

    pub fn access_points(&self) -> Vec<AccessPoint> {
        match self {
            Scenario::Ring(r) => vec![AccessPoint { position: r.center, height: r.ap_height }],
            Scenario::Urban(u) => u.aps.clone(),
        }
    }

    pub fn n_aps(&self) -> usize {
        match self {
            Scenario::Ring(_) => 1,
            Scenario::Urban(u) => u.aps.len(),
        }
    }

    /// Link condition between a UE and AP `ap_index`. The ring is always LOS;
    /// in the urban layout a link is LOS when the whole UE-AP segment runs
    /// along the streets.
    pub fn los_state(&self, ue: &Position, ap_index: usize) -> Result<LinkState> {
        match self {
            Scenario::Ring(_) => {
                if ap_index != 0 {
                    return Err(Error::DimensionMismatch { expected: 1, found: ap_index + 1 });
                }
                Ok(LinkState::Los)
            }
            Scenario::Urban(u) => {
                let ap = u
                    .aps
                    .get(ap_index)
                    .ok_or(Error::DimensionMismatch { expected: u.aps.len(), found: ap_index + 1 })?;
                let streets = u.street_rects();
                Ok(if segment_covered(ue, &ap.position, &streets) { LinkState::Los } else { LinkState::Nlos })
            }
        }
    }

    /// Area of the service region `A`.
    pub fn area(&self) -> f64 {
        match self {
            Scenario::Ring(r) => std::f64::consts::PI * (r.r_out * r.r_out - r.r_min * r.r_min),
            Scenario::Urban(u) => u.side * u.side,
        }
    }

    /// Area of the ROI `A0`.
    pub fn roi_area(&self) -> f64 {
        match self {
            Scenario::Ring(r) => std::f64::consts::PI * r.delta_inside(),
            Scenario::Urban(u) => u.roi.area(),
        }
    }

    pub fn centroid(&self) -> Position {
        match self {
            Scenario::Ring(r) => r.center,
            Scenario::Urban(u) => u.area_rect().center(),
        }
    }

    /// Axis-aligned box enclosing the service area.
    pub fn bounding_box(&self) -> Rect {
        match self {
            Scenario::Ring(r) => Rect {
                x0: r.center.x - r.r_out,
                y0: r.center.y - r.r_out,
                x1: r.center.x + r.r_out,
                y1: r.center.y + r.r_out,
            },
            Scenario::Urban(u) => u.area_rect(),
        }
    }
}

/// True when the segment `p -> q` is covered by the union of `rects`.
fn segment_covered(p: &Position, q: &Position, rects: &[Rect]) -> bool {
    let mut spans: Vec<(f64, f64)> = rects.iter().filter_map(|r| r.clip_segment(p, q)).collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reach = 0.0_f64;
    for (t0, t1) in spans {
        if t0 > reach + 1e-12 {
            return false;
        }
        reach = reach.max(t1);
    }
    reach >= 1.0 - 1e-12
}
