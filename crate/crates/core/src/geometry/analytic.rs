//! Exact-distance test domains: balls (discs in 2D) and axis-aligned boxes.

use std::f64::consts::PI;

use rand::Rng;

use super::{BoundaryLabel, BoundarySample, ClosestPointResult, LabelRule, RayHit};
use crate::error::{Error, Result};
use crate::math::{Dim, Vec3};

const SELF_HIT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Ball { center: Vec3, radius: f64 },
    Box { min: Vec3, max: Vec3 },
}

/// Where the half-space rule cuts a ball: the rim separating the two labels.
#[derive(Clone, Copy, Debug)]
struct Rim {
    center: Vec3,
    axis: Vec3,
    radius: f64,
}

#[derive(Clone, Debug)]
pub struct AnalyticDomain {
    shape: Shape,
    dim: Dim,
    rule: LabelRule,
    rim: Option<Rim>,
}

impl AnalyticDomain {
    pub fn ball(center: Vec3, radius: f64, rule: LabelRule) -> Result<Self> {
        Self::new(Shape::Ball { center, radius }, Dim::Three, rule)
    }

    /// Disc in the z = 0 plane.
    pub fn disc(cx: f64, cy: f64, radius: f64) -> Result<Self> {
        Self::new(
            Shape::Ball {
                center: Vec3::new(cx, cy, 0.0),
                radius,
            },
            Dim::Two,
            LabelRule::AllDirichlet,
        )
    }

    pub fn cuboid(min: Vec3, max: Vec3, rule: LabelRule) -> Result<Self> {
        Self::new(Shape::Box { min, max }, Dim::Three, rule)
    }

    pub fn new(shape: Shape, dim: Dim, rule: LabelRule) -> Result<Self> {
        let mut rim = None;
        match shape {
            Shape::Ball { center, radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::domain(format!(
                        "ball radius must be positive, got {radius}"
                    )));
                }
                if dim == Dim::Two && center.z != 0.0 {
                    return Err(Error::domain("2D disc must be centered in the z = 0 plane"));
                }
                if let LabelRule::HalfSpace { axis, threshold } = rule {
                    let axis = axis.normalize();
                    if dim == Dim::Two && axis.z != 0.0 {
                        return Err(Error::domain("2D half-plane axis must lie in the xy-plane"));
                    }
                    let offset = threshold - center.dot(&axis);
                    if offset.abs() < radius {
                        rim = Some(Rim {
                            center: center + axis * offset,
                            axis,
                            radius: (radius * radius - offset * offset).sqrt(),
                        });
                    }
                }
            }
            Shape::Box { min, max } => {
                if dim != Dim::Three {
                    return Err(Error::Unsupported(
                        "boxes are three-dimensional only".into(),
                    ));
                }
                if !(0..3).all(|k| min[k] < max[k]) {
                    return Err(Error::domain("box requires min < max componentwise"));
                }
                if matches!(rule, LabelRule::HalfSpace { .. }) {
                    return Err(Error::Unsupported(
                        "analytic boxes take uniform labels; use a mesh for mixed partitions"
                            .into(),
                    ));
                }
            }
        }
        Ok(Self {
            shape,
            dim,
            rule,
            rim,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn rule(&self) -> &LabelRule {
        &self.rule
    }

    fn uniform_label(&self) -> Option<BoundaryLabel> {
        match (&self.rule, &self.shape) {
            (LabelRule::AllDirichlet, _) => Some(BoundaryLabel::Dirichlet),
            (LabelRule::AllNeumann, _) => Some(BoundaryLabel::Neumann),
            (LabelRule::HalfSpace { .. }, Shape::Ball { center, radius }) if self.rim.is_none() => {
                // the cut plane misses the sphere; every point shares one label
                Some(self.rule.label(&(center + self.any_axis() * *radius)))
            }
            _ => None,
        }
    }

    fn any_axis(&self) -> Vec3 {
        match self.rule {
            LabelRule::HalfSpace { axis, .. } => axis.normalize(),
            _ => Vec3::x(),
        }
    }

    pub fn has_dirichlet(&self) -> bool {
        self.uniform_label() != Some(BoundaryLabel::Neumann)
    }

    pub fn has_neumann(&self) -> bool {
        self.uniform_label() != Some(BoundaryLabel::Dirichlet)
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        match self.shape {
            Shape::Ball { center, radius } => {
                let mut r = Vec3::repeat(radius);
                if self.dim == Dim::Two {
                    r.z = 0.0;
                }
                (center - r, center + r)
            }
            Shape::Box { min, max } => (min, max),
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        match self.shape {
            Shape::Ball { center, radius } => {
                (self.dim == Dim::Three || p.z == 0.0) && (p - center).norm() < radius
            }
            Shape::Box { min, max } => (0..3).all(|k| p[k] > min[k] && p[k] < max[k]),
        }
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        match self.shape {
            Shape::Ball { center, radius } => (radius - (p - center).norm()).abs(),
            Shape::Box { .. } => self.closest_point(p).distance,
        }
    }

    pub fn closest_point(&self, p: &Vec3) -> ClosestPointResult {
        match self.shape {
            Shape::Ball { center, radius } => {
                let d = p - center;
                let n = d.norm();
                let normal = if n > 0.0 { d / n } else { Vec3::x() };
                let point = center + normal * radius;
                ClosestPointResult {
                    point,
                    distance: (radius - n).abs(),
                    label: self.rule.label(&point),
                    normal,
                }
            }
            Shape::Box { min, max } => {
                let mut best = (f64::INFINITY, 0usize, false);
                for k in 0..3 {
                    let dlo = (p[k] - min[k]).abs();
                    let dhi = (max[k] - p[k]).abs();
                    if dlo < best.0 {
                        best = (dlo, k, false);
                    }
                    if dhi < best.0 {
                        best = (dhi, k, true);
                    }
                }
                let (_, k, high) = best;
                let mut point = Vec3::new(
                    p.x.clamp(min.x, max.x),
                    p.y.clamp(min.y, max.y),
                    p.z.clamp(min.z, max.z),
                );
                point[k] = if high { max[k] } else { min[k] };
                let mut normal = Vec3::zeros();
                normal[k] = if high { 1.0 } else { -1.0 };
                ClosestPointResult {
                    point,
                    distance: (point - p).norm(),
                    label: self.rule.label(&point),
                    normal,
                }
            }
        }
    }

    /// Closest point on the rim circle (two points in 2D).
    fn rim_closest(&self, rim: &Rim, p: &Vec3) -> Vec3 {
        let rel = p - rim.center;
        let w = match self.dim {
            Dim::Two => {
                let perp = Vec3::new(-rim.axis.y, rim.axis.x, 0.0);
                if rel.dot(&perp) >= 0.0 {
                    perp
                } else {
                    -perp
                }
            }
            Dim::Three => {
                let planar = rel - rim.axis * rel.dot(&rim.axis);
                let n = planar.norm();
                if n > 1e-300 {
                    planar / n
                } else {
                    // on the axis: every rim point is equidistant
                    let t = if rim.axis.x.abs() < 0.9 {
                        Vec3::x()
                    } else {
                        Vec3::y()
                    };
                    (t - rim.axis * t.dot(&rim.axis)).normalize()
                }
            }
        };
        rim.center + w * rim.radius
    }

    fn closest_labelled(&self, p: &Vec3, want: BoundaryLabel) -> Option<ClosestPointResult> {
        if let Some(l) = self.uniform_label() {
            return (l == want).then(|| self.closest_point(p));
        }
        let Shape::Ball { center, .. } = self.shape else {
            unreachable!("mixed labels only on balls")
        };
        let rim = self.rim.expect("mixed ball has a rim");
        let radial = self.closest_point(p);
        if radial.label == want {
            return Some(radial);
        }
        let point = self.rim_closest(&rim, p);
        Some(ClosestPointResult {
            point,
            distance: (point - p).norm(),
            label: want,
            normal: (point - center).normalize(),
        })
    }

    pub fn closest_dirichlet(&self, p: &Vec3) -> Option<ClosestPointResult> {
        self.closest_labelled(p, BoundaryLabel::Dirichlet)
    }

    /// From inside a convex shape the only silhouettes are the open rim of the Neumann part.
    pub fn silhouette_distance(&self, p: &Vec3) -> f64 {
        match (self.rim, self.uniform_label()) {
            (Some(rim), None) => (self.rim_closest(&rim, p) - p).norm(),
            _ => f64::INFINITY,
        }
    }

    pub fn intersect_neumann(&self, origin: &Vec3, dir: &Vec3, t_max: f64) -> Option<RayHit> {
        if !self.has_neumann() {
            return None;
        }
        let (t, normal) = match self.shape {
            Shape::Ball { center, radius } => {
                let oc = origin - center;
                let b = oc.dot(dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = (b * b - c).max(0.0);
                let t = -b + disc.sqrt();
                let hit = origin + dir * t;
                (t, (hit - center) / radius)
            }
            Shape::Box { min, max } => {
                let mut best = (f64::INFINITY, 0usize, false);
                for k in 0..3 {
                    if dir[k] > 0.0 {
                        let t = (max[k] - origin[k]) / dir[k];
                        if t < best.0 {
                            best = (t, k, true);
                        }
                    } else if dir[k] < 0.0 {
                        let t = (min[k] - origin[k]) / dir[k];
                        if t < best.0 {
                            best = (t, k, false);
                        }
                    }
                }
                let mut n = Vec3::zeros();
                n[best.1] = if best.2 { 1.0 } else { -1.0 };
                (best.0, n)
            }
        };
        if !(t > SELF_HIT && t < t_max) {
            return None;
        }
        let point = origin + dir * t;
        (self.rule.label(&point) == BoundaryLabel::Neumann).then_some(RayHit { t, point, normal })
    }

    /// Samples the part of the boundary inside the ball `(p, radius)`; the caller
    /// discards non-Neumann samples (zero contribution).
    pub fn sample_neumann<R: Rng + ?Sized>(
        &self,
        p: &Vec3,
        radius: f64,
        rng: &mut R,
    ) -> Option<BoundarySample> {
        if !self.has_neumann() {
            return None;
        }
        let sample = match self.shape {
            Shape::Ball { center, radius: rs } => {
                let rel = p - center;
                let d = rel.norm();
                if d < 1e-12 {
                    if radius <= rs {
                        return None;
                    }
                    // whole sphere lies within reach
                    let v = crate::math::uniform_direction(rng, self.dim);
                    BoundarySample {
                        point: center + v * rs,
                        normal: v,
                        pdf: 1.0 / self.dim.sphere_area(rs),
                    }
                } else {
                    let cos_max =
                        ((rs * rs + d * d - radius * radius) / (2.0 * rs * d)).clamp(-1.0, 1.0);
                    if cos_max >= 1.0 {
                        return None;
                    }
                    let axis = rel / d;
                    let (v, pdf) = match self.dim {
                        Dim::Three => {
                            let cos_t = 1.0 - rng.random::<f64>() * (1.0 - cos_max);
                            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
                            let phi = 2.0 * PI * rng.random::<f64>();
                            let t = if axis.x.abs() < 0.9 {
                                Vec3::x()
                            } else {
                                Vec3::y()
                            };
                            let e1 = (t - axis * t.dot(&axis)).normalize();
                            let e2 = axis.cross(&e1);
                            let v = axis * cos_t + (e1 * phi.cos() + e2 * phi.sin()) * sin_t;
                            (v, 1.0 / (2.0 * PI * rs * rs * (1.0 - cos_max)))
                        }
                        Dim::Two => {
                            let half = cos_max.acos();
                            let ang = (2.0 * rng.random::<f64>() - 1.0) * half;
                            let perp = Vec3::new(-axis.y, axis.x, 0.0);
                            let v = axis * ang.cos() + perp * ang.sin();
                            (v, 1.0 / (2.0 * rs * half))
                        }
                    };
                    BoundarySample {
                        point: center + v * rs,
                        normal: v,
                        pdf,
                    }
                }
            }
            Shape::Box { min, max } => {
                let ext = max - min;
                let areas = [ext.y * ext.z, ext.z * ext.x, ext.x * ext.y];
                let total = 2.0 * (areas[0] + areas[1] + areas[2]);
                let mut pick = rng.random::<f64>() * total;
                let mut face = (2usize, true);
                'outer: for (k, area) in areas.iter().enumerate() {
                    for high in [false, true] {
                        if pick < *area {
                            face = (k, high);
                            break 'outer;
                        }
                        pick -= area;
                    }
                }
                let (k, high) = face;
                let mut point = Vec3::new(
                    min.x + rng.random::<f64>() * ext.x,
                    min.y + rng.random::<f64>() * ext.y,
                    min.z + rng.random::<f64>() * ext.z,
                );
                point[k] = if high { max[k] } else { min[k] };
                let mut normal = Vec3::zeros();
                normal[k] = if high { 1.0 } else { -1.0 };
                BoundarySample {
                    point,
                    normal,
                    pdf: 1.0 / total,
                }
            }
        };
        (self.rule.label(&sample.point) == BoundaryLabel::Neumann).then_some(sample)
    }
}
