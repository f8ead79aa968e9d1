//! Pointwise recursive estimators: walk on spheres, walk on stars for mixed
//! boundaries, and the single-point gradient estimator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{star_radius, Domain};
use crate::kernels::{
    grad_green_ball, grad_poisson_ratio, green_centered, sample_source_centered,
    sample_source_uniform_radius, screened_absorption, BallSpec, KernelParams,
};
use crate::math::{hemisphere_direction, uniform_direction, Vec3};
use crate::scenes::Bvp;

/// Walk parameters. The screening coefficient belongs to the problem ([`Bvp::sigma`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Width of the absorbing shell around the Dirichlet boundary.
    pub epsilon: f64,
    pub max_steps: usize,
    /// Source samples per step.
    pub source_samples: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_steps: 1000,
            source_samples: 1,
        }
    }
}

impl WalkConfig {
    /// Defaults with `ε = 10⁻³ · diameter`.
    pub fn for_domain(domain: &Domain) -> Self {
        Self {
            epsilon: 1e-3 * domain.diameter(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(
                "epsilon",
                format!("must be positive, got {}", self.epsilon),
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkSample {
    pub value: f64,
    pub steps: usize,
    /// `false` when the walk hit `max_steps` and was cut off.
    pub terminated: bool,
}

fn check_start(bvp: &Bvp, p: &Vec3, cfg: &WalkConfig) -> Result<()> {
    cfg.validate()?;
    if !bvp.domain.contains(p) {
        return Err(Error::domain(format!(
            "walk start {p:?} is outside the domain"
        )));
    }
    Ok(())
}

/// One walk-on-spheres sample of `u(p)` for an all-Dirichlet problem.
pub fn wos_estimate<R: Rng + ?Sized>(
    bvp: &Bvp,
    p: &Vec3,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<WalkSample> {
    check_start(bvp, p, cfg)?;
    if bvp.domain.has_neumann() {
        return Err(Error::Unsupported(
            "walk on spheres needs an all-Dirichlet boundary".into(),
        ));
    }
    Ok(wos_walk(bvp, p, cfg, rng))
}

/// One walk-on-stars sample of `u(p)`; handles Neumann parts by reflection.
pub fn wost_estimate<R: Rng + ?Sized>(
    bvp: &Bvp,
    p: &Vec3,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<WalkSample> {
    check_start(bvp, p, cfg)?;
    Ok(wost_walk(bvp, p, None, cfg, rng))
}

/// Dispatches to the walker suited to the boundary. The start point may lie on or
/// marginally outside the boundary (stage-1 sphere points); it is not checked.
pub(crate) fn walk<R: Rng + ?Sized>(
    bvp: &Bvp,
    p: &Vec3,
    cfg: &WalkConfig,
    rng: &mut R,
) -> WalkSample {
    if bvp.domain.has_neumann() {
        wost_walk(bvp, p, None, cfg, rng)
    } else {
        wos_walk(bvp, p, cfg, rng)
    }
}

fn source_term<R: Rng + ?Sized>(
    bvp: &Bvp,
    x: &Vec3,
    r: f64,
    params: &KernelParams,
    m: usize,
    rng: &mut R,
) -> f64 {
    if !bvp.has_source() || m == 0 {
        return 0.0;
    }
    let ball = BallSpec {
        center: *x,
        radius: r,
    };
    let mut sum = 0.0;
    for _ in 0..m {
        let w = sample_source_centered(rng, &ball, params);
        let s = (w.point - x).norm();
        sum += bvp.f(&w.point) * green_centered(s, r, params) / w.pdf;
    }
    sum / m as f64
}

fn wos_walk<R: Rng + ?Sized>(bvp: &Bvp, p: &Vec3, cfg: &WalkConfig, rng: &mut R) -> WalkSample {
    let params = bvp.params();
    let mut x = *p;
    let mut weight = 1.0;
    let mut acc = 0.0;
    for step in 0..cfg.max_steps {
        let cp = bvp.domain.closest_point(&x);
        if cp.distance < cfg.epsilon {
            return WalkSample {
                value: acc + weight * bvp.g(&cp.point),
                steps: step,
                terminated: true,
            };
        }
        let r = cp.distance;
        acc += weight * source_term(bvp, &x, r, &params, cfg.source_samples, rng);
        weight *= screened_absorption(params.sigma, r);
        x += uniform_direction(rng, params.dim) * r;
    }
    let cp = bvp.domain.closest_point(&x);
    WalkSample {
        value: acc + weight * bvp.g(&cp.point),
        steps: cfg.max_steps,
        terminated: false,
    }
}

/// Weight of a direction whose ray stops at distance `t` inside a star region of radius `r`:
/// `−∂G_σ/∂n` relative to the Laplace solid-angle density. Equals 1 for `σ = 0`.
fn screened_direction_weight(sigma: f64, r: f64, t: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    if t >= r {
        return screened_absorption(sigma, r);
    }
    let k = sigma.sqrt();
    // [k t cosh(k(r−t)) + sinh(k(r−t))] / sinh(kr), in exponentials
    let e = (-k * t).exp();
    let num = k * t * (1.0 + (-2.0 * k * (r - t)).exp()) - (-2.0 * k * (r - t)).exp_m1();
    e * num / (-(-2.0 * k * r).exp_m1())
}

/// Whether the segment from `x` to `q` stays inside the star region, i.e. hits no Neumann
/// surface first. `normal` is the outward normal when `x` lies on the boundary.
fn visible(domain: &Domain, x: &Vec3, normal: Option<&Vec3>, q: &Vec3) -> bool {
    let d = q - x;
    let len = d.norm();
    if len == 0.0 {
        return false;
    }
    let dir = d / len;
    if normal.is_some_and(|n| n.dot(&dir) >= 0.0) {
        return false;
    }
    domain
        .intersect_neumann(x, &dir, len * (1.0 - 1e-9))
        .is_none()
}

fn wost_walk<R: Rng + ?Sized>(
    bvp: &Bvp,
    p: &Vec3,
    start_normal: Option<Vec3>,
    cfg: &WalkConfig,
    rng: &mut R,
) -> WalkSample {
    let params = bvp.params();
    let domain = &bvp.domain;
    let has_neumann = domain.has_neumann();
    let mut x = *p;
    let mut on_boundary = start_normal;
    let mut weight = 1.0;
    let mut acc = 0.0;
    for step in 0..cfg.max_steps {
        let dd = domain.dirichlet_distance(&x);
        if dd < cfg.epsilon {
            let cp = domain
                .closest_dirichlet(&x)
                .expect("finite Dirichlet distance");
            return WalkSample {
                value: acc + weight * bvp.g(&cp.point),
                steps: step,
                terminated: true,
            };
        }
        let r = if has_neumann {
            star_radius(&x, domain, cfg.epsilon, f64::INFINITY)
        } else {
            dd
        };
        // solid angle of the region seen from x: half of it on a smooth boundary
        let alpha = if on_boundary.is_some() { 0.5 } else { 1.0 };

        if bvp.has_source() && cfg.source_samples > 0 {
            let ball = BallSpec {
                center: x,
                radius: r,
            };
            let mut sum = 0.0;
            for _ in 0..cfg.source_samples {
                let w = sample_source_centered(rng, &ball, &params);
                if has_neumann && !visible(domain, &x, on_boundary.as_ref(), &w.point) {
                    continue;
                }
                let s = (w.point - x).norm();
                sum += bvp.f(&w.point) * green_centered(s, r, &params) / w.pdf;
            }
            acc += weight * sum / (cfg.source_samples as f64 * alpha);
        }

        if has_neumann && bvp.neumann.is_some() {
            if let Some(z) = domain.sample_neumann(&x, r, rng) {
                let s = (z.point - x).norm();
                if s > 0.0 && s < r && visible(domain, &x, on_boundary.as_ref(), &z.point) {
                    acc += weight * green_centered(s, r, &params) * bvp.h(&z.point, &z.normal)
                        / (z.pdf * alpha);
                }
            }
        }

        let dir = match on_boundary {
            Some(n) => hemisphere_direction(rng, params.dim, &-n),
            None => uniform_direction(rng, params.dim),
        };
        let hit = if has_neumann {
            domain.intersect_neumann(&x, &dir, r)
        } else {
            None
        };
        match hit {
            Some(h) => {
                weight *= screened_direction_weight(params.sigma, r, h.t);
                x = h.point;
                on_boundary = Some(h.normal);
            }
            None => {
                weight *= screened_direction_weight(params.sigma, r, r);
                x += dir * r;
                on_boundary = None;
            }
        }
    }
    let value = match domain.closest_dirichlet(&x) {
        Some(cp) => acc + weight * bvp.g(&cp.point),
        None => acc,
    };
    WalkSample {
        value,
        steps: cfg.max_steps,
        terminated: false,
    }
}

/// One sample of `∇u(p)` for an all-Dirichlet Laplace/Poisson problem: the boundary term
/// `(d/r)·ū(z)·ν` with `z = p + rν` uniform on the maximal sphere, plus a source term.
pub fn wos_gradient_estimate<R: Rng + ?Sized>(
    bvp: &Bvp,
    p: &Vec3,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<Vec3> {
    check_start(bvp, p, cfg)?;
    if bvp.domain.has_neumann() {
        return Err(Error::Unsupported(
            "gradient estimator needs an all-Dirichlet boundary".into(),
        ));
    }
    let params = bvp.params();
    if params.sigma > 0.0 {
        return Err(Error::Unsupported(
            "gradient estimator is implemented for sigma = 0 only".into(),
        ));
    }
    let r = bvp.domain.distance(p);
    let ball = BallSpec {
        center: *p,
        radius: r,
    };
    let nu = uniform_direction(rng, params.dim);
    let z = p + nu * r;
    let u = wos_walk(bvp, &z, cfg, rng).value;
    let mut grad = grad_poisson_ratio(p, &z, &ball, &params)? * u;
    if bvp.has_source() {
        for _ in 0..cfg.source_samples {
            let w = sample_source_uniform_radius(rng, p, &ball, params.dim)?;
            grad += grad_green_ball(p, &w.point, &ball, &params)? * (bvp.f(&w.point) / w.pdf)
                / cfg.source_samples as f64;
        }
    }
    Ok(grad)
}
