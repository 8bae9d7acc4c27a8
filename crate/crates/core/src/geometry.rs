//! Link geometry over a flat ground plane at `z = 0`.
//!
//! The ground-reflected ray is built with the image method: mirroring the
//! transmitter below the plane turns the shortest two-segment path through a
//! ground point into a straight line, and the bounce point is where that line
//! meets `z = 0`.
//!
//! Angles are reported in each array's local frame. Azimuth is measured from
//! the horizontal bearing toward the far end of the link (minus the array
//! heading at the receiver), elevation from the horizontal with negative
//! values below the horizon.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point3 = Vector3<f64>;
pub type Point2 = Vector2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("transmitter height must be positive, got {0} m")]
    TxHeight(f64),
    #[error("receiver height must be positive, got {0} m")]
    RxHeight(f64),
    #[error("horizontal tx-rx distance must be positive, got {0} m")]
    Distance(f64),
    #[error("invalid blocker: {0}")]
    Blocker(String),
}

/// Transmitter and receiver positions above the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    tx_pos: Point3,
    rx_pos: Point3,
    /// Receiver array boresight relative to the bearing toward the transmitter.
    rx_heading_deg: f64,
}

impl LinkGeometry {
    pub fn new(tx_pos: Point3, rx_pos: Point3) -> Result<Self, GeometryError> {
        let geom = Self {
            tx_pos,
            rx_pos,
            rx_heading_deg: 0.0,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Transmitter at the origin, receiver on the +x axis.
    pub fn planar(tx_height_m: f64, rx_height_m: f64, distance_m: f64) -> Result<Self, GeometryError> {
        Self::new(
            Point3::new(0.0, 0.0, tx_height_m),
            Point3::new(distance_m, 0.0, rx_height_m),
        )
    }

    pub fn with_rx_heading(mut self, heading_deg: f64) -> Self {
        self.rx_heading_deg = heading_deg;
        self
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if !(self.tx_pos.z > 0.0) {
            return Err(GeometryError::TxHeight(self.tx_pos.z));
        }
        if !(self.rx_pos.z > 0.0) {
            return Err(GeometryError::RxHeight(self.rx_pos.z));
        }
        let d = self.horizontal_distance();
        if !(d > 0.0) || !d.is_finite() {
            return Err(GeometryError::Distance(d));
        }
        Ok(())
    }

    pub fn tx_pos(&self) -> Point3 {
        self.tx_pos
    }

    pub fn rx_pos(&self) -> Point3 {
        self.rx_pos
    }

    pub fn tx_height(&self) -> f64 {
        self.tx_pos.z
    }

    pub fn rx_height(&self) -> f64 {
        self.rx_pos.z
    }

    pub fn rx_heading_deg(&self) -> f64 {
        self.rx_heading_deg
    }

    pub fn horizontal_distance(&self) -> f64 {
        (self.rx_pos.xy() - self.tx_pos.xy()).norm()
    }

    /// Unit horizontal vector pointing from the receiver toward the transmitter.
    pub fn rx_to_tx_unit(&self) -> Point2 {
        (self.tx_pos.xy() - self.rx_pos.xy()).normalize()
    }

    /// A ground point `along_m` from the receiver toward the transmitter,
    /// shifted `lateral_m` to the left of that direction.
    pub fn point_from_rx(&self, along_m: f64, lateral_m: f64) -> Point2 {
        let u = self.rx_to_tx_unit();
        let left = Point2::new(-u.y, u.x);
        self.rx_pos.xy() + u * along_m + left * lateral_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathKind {
    Direct,
    GroundReflected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayPath {
    pub kind: PathKind,
    pub vertices: Vec<Point3>,
    pub length_m: f64,
}

impl RayPath {
    fn from_vertices(kind: PathKind, vertices: Vec<Point3>) -> Self {
        let length_m = vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        Self {
            kind,
            vertices,
            length_m,
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point3, Point3)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    /// Same path traversed from the receiver end.
    pub fn reversed(&self) -> Self {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        Self::from_vertices(self.kind, vertices)
    }

    pub fn reflection_point(&self) -> Option<Point3> {
        match self.kind {
            PathKind::GroundReflected => self.vertices.get(1).copied(),
            PathKind::Direct => None,
        }
    }
}

pub fn direct_path(geom: &LinkGeometry) -> RayPath {
    RayPath::from_vertices(PathKind::Direct, vec![geom.tx_pos, geom.rx_pos])
}

pub fn ground_reflected_path(geom: &LinkGeometry) -> RayPath {
    let (ht, hr) = (geom.tx_height(), geom.rx_height());
    let frac = ht / (ht + hr);
    let bounce_xy = geom.tx_pos.xy() + (geom.rx_pos.xy() - geom.tx_pos.xy()) * frac;
    let bounce = Point3::new(bounce_xy.x, bounce_xy.y, 0.0);
    let mut path = RayPath::from_vertices(PathKind::GroundReflected, vec![geom.tx_pos, bounce, geom.rx_pos]);
    // Closed form from the mirrored transmitter; equals the segment sum up to rounding.
    path.length_m = (geom.horizontal_distance().powi(2) + (ht + hr).powi(2)).sqrt();
    path
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

fn elevation_deg(from: Point3, to: Point3) -> f64 {
    let d = to - from;
    d.z.atan2(d.xy().norm()).to_degrees()
}

pub fn wrap_deg(angle: f64) -> f64 {
    let a = (angle + 180.0).rem_euclid(360.0) - 180.0;
    if a == -180.0 {
        180.0
    } else {
        a
    }
}

/// Direction the receiver must look to see the incoming ray.
///
/// Every path of a single flat-ground link lies in the vertical plane through
/// both antennas, so all paths share the receiver azimuth of the bearing
/// toward the transmitter.
pub fn arrival_angles(geom: &LinkGeometry, path: &RayPath) -> Angles {
    let n = path.vertices.len();
    Angles {
        azimuth_deg: wrap_deg(-geom.rx_heading_deg),
        elevation_deg: elevation_deg(path.vertices[n - 1], path.vertices[n - 2]),
    }
}

/// Direction the transmitter must point to launch the ray. The transmit
/// array faces the receiver.
pub fn departure_angles(_geom: &LinkGeometry, path: &RayPath) -> Angles {
    Angles {
        azimuth_deg: 0.0,
        elevation_deg: elevation_deg(path.vertices[0], path.vertices[1]),
    }
}

/// A pedestrian modeled as a thin vertical slab with an occluding band
/// `[h_low_m, h_high_m]`. Rays below `h_low_m` pass through the leg gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockerSlab {
    pub center_xy: Point2,
    pub width_m: f64,
    pub h_low_m: f64,
    pub h_high_m: f64,
}

impl BlockerSlab {
    pub fn new(center_xy: Point2, width_m: f64, h_low_m: f64, h_high_m: f64) -> Result<Self, GeometryError> {
        if !(width_m > 0.0) {
            return Err(GeometryError::Blocker(format!("width must be positive, got {width_m}")));
        }
        if !(h_low_m >= 0.0 && h_low_m < h_high_m) {
            return Err(GeometryError::Blocker(format!(
                "need 0 <= h_low < h_high, got [{h_low_m}, {h_high_m}]"
            )));
        }
        Ok(Self {
            center_xy,
            width_m,
            h_low_m,
            h_high_m,
        })
    }
}

/// How a blocker interacts with a ray path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Occlusion {
    Clear,
    /// The ray passes the blocker's footprint beneath the body band.
    BelowBody,
    Blocked,
}

fn segment_occlusion(a: Point3, b: Point3, blocker: &BlockerSlab) -> Occlusion {
    let half = blocker.width_m / 2.0;
    let p = a.xy();
    let d = b.xy() - p;
    let len2 = d.norm_squared();
    if len2 <= f64::EPSILON * f64::EPSILON {
        // Vertical segment: compare the whole height span with the band.
        if (blocker.center_xy - p).norm() > half {
            return Occlusion::Clear;
        }
        let (lo, hi) = (a.z.min(b.z), a.z.max(b.z));
        return if hi < blocker.h_low_m {
            Occlusion::BelowBody
        } else if lo > blocker.h_high_m {
            Occlusion::Clear
        } else {
            Occlusion::Blocked
        };
    }
    let t = ((blocker.center_xy - p).dot(&d) / len2).clamp(0.0, 1.0);
    let closest = p + d * t;
    if (blocker.center_xy - closest).norm() > half {
        return Occlusion::Clear;
    }
    let h = a.z + t * (b.z - a.z);
    if h > blocker.h_high_m {
        Occlusion::Clear
    } else if h >= blocker.h_low_m {
        Occlusion::Blocked
    } else {
        Occlusion::BelowBody
    }
}

/// Strongest interaction over all segments of the path.
pub fn occlusion(path: &RayPath, blocker: &BlockerSlab) -> Occlusion {
    path.segments()
        .map(|(a, b)| segment_occlusion(a, b, blocker))
        .max()
        .unwrap_or(Occlusion::Clear)
}

pub fn path_blocked(path: &RayPath, blocker: &BlockerSlab) -> bool {
    occlusion(path, blocker) == Occlusion::Blocked
}

/// Height of the direct ray at `along_m` from the receiver.
pub fn direct_ray_height_from_rx(geom: &LinkGeometry, along_m: f64) -> f64 {
    let d = geom.horizontal_distance();
    geom.rx_height() + (geom.tx_height() - geom.rx_height()) * along_m / d
}
