//! Spatial queries over the domain boundary.
//!
//! A [`Domain`] is either an exact analytic shape or a labelled triangle mesh.
//! All queries are read-only after construction and safe to share across threads.

mod analytic;
pub mod bvh;
mod mesh;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use analytic::{AnalyticDomain, Shape};
pub use mesh::{BoundaryMesh, MeshDomain};

use crate::error::{Error, Result};
use crate::math::{Dim, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryLabel {
    /// Absorbing part: u = g.
    Dirichlet,
    /// Reflecting part: ∂u/∂n = h.
    Neumann,
}

/// Assigns boundary labels by position.
#[derive(Clone, Debug, PartialEq)]
pub enum LabelRule {
    AllDirichlet,
    AllNeumann,
    /// Points with `q · axis > threshold` are Neumann, the rest Dirichlet.
    HalfSpace {
        axis: Vec3,
        threshold: f64,
    },
}

impl LabelRule {
    #[inline]
    pub fn label(&self, q: &Vec3) -> BoundaryLabel {
        match self {
            LabelRule::AllDirichlet => BoundaryLabel::Dirichlet,
            LabelRule::AllNeumann => BoundaryLabel::Neumann,
            LabelRule::HalfSpace { axis, threshold } => {
                if q.dot(axis) > *threshold {
                    BoundaryLabel::Neumann
                } else {
                    BoundaryLabel::Dirichlet
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestPointResult {
    pub point: Vec3,
    pub distance: f64,
    pub label: BoundaryLabel,
    /// Outward unit normal at `point`.
    pub normal: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub point: Vec3,
    pub normal: Vec3,
}

/// A point drawn on the boundary with its area (length in 2D) density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundarySample {
    pub point: Vec3,
    pub normal: Vec3,
    pub pdf: f64,
}

#[derive(Clone, Debug)]
pub enum Domain {
    Analytic(AnalyticDomain),
    Mesh(Box<MeshDomain>),
}

impl From<AnalyticDomain> for Domain {
    fn from(d: AnalyticDomain) -> Self {
        Domain::Analytic(d)
    }
}

impl From<MeshDomain> for Domain {
    fn from(d: MeshDomain) -> Self {
        Domain::Mesh(Box::new(d))
    }
}

impl Domain {
    pub fn dim(&self) -> Dim {
        match self {
            Domain::Analytic(a) => a.dim(),
            Domain::Mesh(_) => Dim::Three,
        }
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        match self {
            Domain::Analytic(a) => a.bounds(),
            Domain::Mesh(m) => {
                let b = m.bounds();
                (b.min, b.max)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    /// Strict interior test.
    pub fn contains(&self, p: &Vec3) -> bool {
        match self {
            Domain::Analytic(a) => a.contains(p),
            Domain::Mesh(m) => m.contains(p),
        }
    }

    pub fn has_dirichlet(&self) -> bool {
        match self {
            Domain::Analytic(a) => a.has_dirichlet(),
            Domain::Mesh(m) => m.has_dirichlet(),
        }
    }

    pub fn has_neumann(&self) -> bool {
        match self {
            Domain::Analytic(a) => a.has_neumann(),
            Domain::Mesh(m) => m.has_neumann(),
        }
    }

    /// Unsigned distance to the whole boundary (no inside check).
    #[inline]
    pub fn distance(&self, p: &Vec3) -> f64 {
        match self {
            Domain::Analytic(a) => a.distance(p),
            Domain::Mesh(m) => m.closest_point(p).distance,
        }
    }

    #[inline]
    pub fn closest_point(&self, p: &Vec3) -> ClosestPointResult {
        match self {
            Domain::Analytic(a) => a.closest_point(p),
            Domain::Mesh(m) => m.closest_point(p),
        }
    }

    /// Closest point on the Dirichlet part, `None` if there is none.
    #[inline]
    pub fn closest_dirichlet(&self, p: &Vec3) -> Option<ClosestPointResult> {
        match self {
            Domain::Analytic(a) => a.closest_dirichlet(p),
            Domain::Mesh(m) => m.closest_dirichlet(p),
        }
    }

    /// Distance to the Dirichlet part, `+∞` if there is none.
    #[inline]
    pub fn dirichlet_distance(&self, p: &Vec3) -> f64 {
        self.closest_dirichlet(p)
            .map_or(f64::INFINITY, |c| c.distance)
    }

    /// Distance to the closest Neumann silhouette point, `+∞` if there is none.
    #[inline]
    pub fn silhouette_distance(&self, p: &Vec3) -> f64 {
        match self {
            Domain::Analytic(a) => a.silhouette_distance(p),
            Domain::Mesh(m) => m.silhouette_distance(p),
        }
    }

    /// First Neumann hit of the ray `origin + t·dir` with `t < t_max`.
    #[inline]
    pub fn intersect_neumann(&self, origin: &Vec3, dir: &Vec3, t_max: f64) -> Option<RayHit> {
        match self {
            Domain::Analytic(a) => a.intersect_neumann(origin, dir, t_max),
            Domain::Mesh(m) => m.intersect_neumann(origin, dir, t_max),
        }
    }

    /// Draws a boundary point from a region covering the Neumann boundary inside
    /// the ball `(p, radius)`. Returned points lie on the Neumann part but may fall
    /// outside that ball; such samples contribute zero. `None` also means zero.
    #[inline]
    pub fn sample_neumann<R: Rng + ?Sized>(
        &self,
        p: &Vec3,
        radius: f64,
        rng: &mut R,
    ) -> Option<BoundarySample> {
        match self {
            Domain::Analytic(a) => a.sample_neumann(p, radius, rng),
            Domain::Mesh(m) => m.sample_neumann(p, radius, rng),
        }
    }

    #[inline]
    pub fn label_at(&self, q: &Vec3) -> BoundaryLabel {
        self.closest_point(q).label
    }
}

fn require_inside(p: &Vec3, domain: &Domain) -> Result<()> {
    if domain.contains(p) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "point {p:?} is not inside the domain"
        )))
    }
}

/// Radius of the maximal ball centered at an interior point.
pub fn distance_to_boundary(p: &Vec3, domain: &Domain) -> Result<f64> {
    require_inside(p, domain)?;
    Ok(domain.distance(p))
}

/// Distance to the Dirichlet part only; `+∞` when the domain has none.
pub fn distance_to_dirichlet(p: &Vec3, domain: &Domain) -> Result<f64> {
    require_inside(p, domain)?;
    Ok(domain.dirichlet_distance(p))
}

pub fn closest_point(p: &Vec3, domain: &Domain) -> ClosestPointResult {
    domain.closest_point(p)
}

/// Exit distance of a ray started strictly inside the ball `(center, radius)`.
pub fn ray_ball_exit(origin: &Vec3, dir: &Vec3, center: &Vec3, radius: f64) -> Result<f64> {
    let oc = origin - center;
    let c = oc.norm_squared() - radius * radius;
    if c >= 0.0 {
        return Err(Error::domain("ray origin is not strictly inside the ball"));
    }
    let b = oc.dot(dir);
    // c < 0 so the larger root is the positive one
    Ok(-b + (b * b - c).sqrt())
}

/// Radius of the star-shaped region used by walk-on-stars:
/// `min(Dirichlet distance, silhouette distance, r_max)`, clamped below by `r_min`.
pub fn star_radius(p: &Vec3, domain: &Domain, r_min: f64, r_max: f64) -> f64 {
    domain
        .dirichlet_distance(p)
        .min(domain.silhouette_distance(p))
        .min(r_max)
        .max(r_min)
}
