//! Vector aliases and small sampling helpers shared by every module.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Vec3 = Vector3<f64>;

/// Spatial dimension of a problem. Two-dimensional problems live in the z = 0 plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
}

impl Dim {
    #[inline]
    pub fn as_f64(self) -> f64 {
        match self {
            Dim::Two => 2.0,
            Dim::Three => 3.0,
        }
    }

    #[inline]
    pub fn as_usize(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Surface measure of the sphere of radius `r`.
    #[inline]
    pub fn sphere_area(self, r: f64) -> f64 {
        match self {
            Dim::Two => 2.0 * PI * r,
            Dim::Three => 4.0 * PI * r * r,
        }
    }

    /// Solid-angle measure of the full unit sphere.
    #[inline]
    pub fn full_solid_angle(self) -> f64 {
        match self {
            Dim::Two => 2.0 * PI,
            Dim::Three => 4.0 * PI,
        }
    }
}

/// Uniform direction on the unit sphere (unit circle in the xy-plane for 2D).
#[inline]
pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R, dim: Dim) -> Vec3 {
    match dim {
        Dim::Two => {
            let phi = 2.0 * PI * rng.random::<f64>();
            Vec3::new(phi.cos(), phi.sin(), 0.0)
        }
        Dim::Three => {
            let z = 1.0 - 2.0 * rng.random::<f64>();
            let phi = 2.0 * PI * rng.random::<f64>();
            let s = (1.0 - z * z).max(0.0).sqrt();
            Vec3::new(s * phi.cos(), s * phi.sin(), z)
        }
    }
}

/// Uniform direction on the hemisphere `{v : v·axis ≥ 0}`.
#[inline]
pub fn hemisphere_direction<R: Rng + ?Sized>(rng: &mut R, dim: Dim, axis: &Vec3) -> Vec3 {
    let v = uniform_direction(rng, dim);
    if v.dot(axis) < 0.0 {
        -v
    } else {
        v
    }
}

/// Distance from `p` to the segment `[a, b]` and the closest point on it.
#[inline]
pub fn closest_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Möller–Trumbore ray/triangle test. Returns the hit distance in `(t_min, t_max)`.
#[inline]
pub fn ray_triangle(
    origin: &Vec3,
    dir: &Vec3,
    a: &Vec3,
    b: &Vec3,
    c: &Vec3,
    t_min: f64,
    t_max: f64,
) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv;
    (t > t_min && t < t_max).then_some(t)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Product quadrature on the unit sphere (or circle in 2D) as `(direction, weight)` pairs.
///
/// In 3D the polar axis is `pole`; nodes cluster near it, which suits integrands peaked there.
pub fn sphere_quadrature(dim: Dim, n: usize, pole: &Vec3) -> Vec<(Vec3, f64)> {
    match dim {
        Dim::Two => (0..n)
            .map(|i| {
                let phi = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                let (s, c) = phi.sin_cos();
                let (pc, ps) = if pole.x.hypot(pole.y) > 0.0 {
                    let a = pole.y.atan2(pole.x);
                    (a.cos(), a.sin())
                } else {
                    (1.0, 0.0)
                };
                (
                    Vec3::new(c * pc - s * ps, s * pc + c * ps, 0.0),
                    2.0 * PI / n as f64,
                )
            })
            .collect(),
        Dim::Three => {
            let w = pole.try_normalize(0.0).unwrap_or_else(Vec3::z);
            let helper = if w.x.abs() < 0.9 {
                Vec3::x()
            } else {
                Vec3::y()
            };
            let u = w.cross(&helper).normalize();
            let v = w.cross(&u);
            let n_phi = 2 * n;
            let mut out = Vec::with_capacity(n * n_phi);
            for (mu, wt) in gauss_legendre(n) {
                let st = (1.0 - mu * mu).max(0.0).sqrt();
                for j in 0..n_phi {
                    let phi = 2.0 * PI * (j as f64 + 0.5) / n_phi as f64;
                    let (s, c) = phi.sin_cos();
                    out.push((
                        u * (st * c) + v * (st * s) + w * mu,
                        wt * 2.0 * PI / n_phi as f64,
                    ));
                }
            }
            out
        }
    }
}
