use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::path::Path;

use super::*;
use crate::geometry::{AnalyticDomain, LabelRule};
use crate::math::{uniform_direction, Dim};

fn fd_laplacian(f: impl Fn(&Vec3) -> f64, p: &Vec3, h: f64, dim: usize) -> f64 {
    (0..dim)
        .map(|k| {
            let mut e = Vec3::zeros();
            e[k] = h;
            (f(&(p + e)) - 2.0 * f(p) + f(&(p - e))) / (h * h)
        })
        .sum()
}

#[test]
fn trig_examples() {
    assert!((trig_solution(&Vec3::repeat(0.5), PI) - 1.0).abs() < 1e-15);
    assert_eq!(trig_solution(&Vec3::new(0.0, 0.3, 0.7), PI), 0.0);
    assert_eq!(trig_source(&Vec3::new(0.4, 0.0, 0.7), PI, 5.0), 0.0);
    let p = Vec3::new(0.2, 0.3, 0.4);
    assert!((trig_source(&p, 2.0, 0.0) - 12.0 * trig_solution(&p, 2.0)).abs() < 1e-15);
    let (q, s) = (0.3, 0.7);
    let h = trig_neumann(&Vec3::new(0.0, q, s), &Vec3::x(), PI);
    assert!((h - PI * (PI * q).sin() * (PI * s).sin()).abs() < 1e-14);
    assert!(trig_gradient(&Vec3::new(0.5, 0.3, 0.2), PI).x.abs() < 1e-15);
}

#[test]
fn trig_neumann_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for omega in [PI, 2.0 * PI, 4.0 * PI] {
        for _ in 0..50 {
            let p = Vec3::new(rng.random(), rng.random(), rng.random());
            let n = uniform_direction(&mut rng, Dim::Three);
            let h = 1e-6;
            let fd = (trig_solution(&(p + n * h), omega) - trig_solution(&(p - n * h), omega))
                / (2.0 * h);
            assert!((trig_neumann(&p, &n, omega) - fd).abs() < 1e-6 * omega.max(1.0));
        }
    }
}

#[test]
fn manufactured_problems_are_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cases = [
        (Manufactured::Trig { omega: PI }, 0.0, 3),
        (Manufactured::Trig { omega: 2.0 * PI }, 5.0, 3),
        (Manufactured::Trig2D { omega: PI }, 0.0, 2),
        (Manufactured::Harmonic2D { omega: PI }, 0.0, 2),
        (Manufactured::Constant { value: 2.0 }, 0.0, 3),
        (
            Manufactured::Linear {
                gradient: Vec3::new(1.0, -2.0, 0.5),
                offset: 0.3,
            },
            0.0,
            3,
        ),
    ];
    for (m, sigma, dim) in cases {
        let domain: Domain = if dim == 3 {
            AnalyticDomain::ball(Vec3::zeros(), 1.0, LabelRule::AllDirichlet)
                .unwrap()
                .into()
        } else {
            AnalyticDomain::disc(0.0, 0.0, 1.0).unwrap().into()
        };
        let bvp = Bvp::manufactured(domain, sigma, m).unwrap();
        for _ in 0..100 {
            let mut p = Vec3::new(rng.random(), rng.random(), rng.random()) - Vec3::repeat(0.5);
            if dim == 2 {
                p.z = 0.0;
            }
            let lap = fd_laplacian(|q| m.value(q), &p, 1e-4, dim);
            let residual = lap - sigma * m.value(&p) + bvp.f(&p);
            assert!(
                residual.abs() < 1e-5 * (1.0 + bvp.f(&p).abs()),
                "{m:?} residual {residual}"
            );
            assert!((lap - m.laplacian(&p)).abs() < 1e-5 * (1.0 + lap.abs()));
            let g = m.gradient(&p);
            for k in 0..dim {
                let mut e = Vec3::zeros();
                e[k] = 1e-6;
                let fd = (m.value(&(p + e)) - m.value(&(p - e))) / 2e-6;
                assert!((g[k] - fd).abs() < 1e-6 * (1.0 + g[k].abs()));
            }
            let b = uniform_direction(&mut rng, if dim == 3 { Dim::Three } else { Dim::Two });
            assert_eq!(bvp.g(&b), m.value(&b));
        }
        assert_eq!(bvp.has_source(), !m.is_homogeneous(sigma));
    }
}

#[test]
fn mixed_scene_carries_neumann_data() {
    let rule = LabelRule::HalfSpace {
        axis: Vec3::z(),
        threshold: 0.0,
    };
    let domain: Domain = AnalyticDomain::ball(Vec3::zeros(), 1.0, rule)
        .unwrap()
        .into();
    let m = Manufactured::Trig { omega: PI };
    let bvp = Bvp::manufactured(domain, 0.0, m).unwrap();
    let z = Vec3::new(0.6, 0.0, 0.8);
    assert!((bvp.h(&z, &z) - trig_neumann(&z, &z, PI)).abs() < 1e-15);
    assert!(bvp.exact(&z).is_some());
}

#[test]
fn config_builds_ball_scene() {
    let cfg = SceneConfig::from_toml(
        r#"
[geometry]
kind = "ball"

[problem]
type = "poisson"
solution = "trig"
omega_pi = 1.0

[slice]
resolution = 32
"#,
    )
    .unwrap();
    let (bvp, slice) = build_scene(&cfg, Path::new(".")).unwrap();
    assert_eq!(bvp.sigma, 0.0);
    assert!(bvp.neumann.is_none());
    assert!(bvp.has_source());
    assert_eq!(slice.resolution, 32);
    assert_eq!(slice.origin, Vec3::zeros());
    // inside mask agrees with the distance to the sphere
    for k in 0..slice.len() {
        let p = slice.cell_center(k);
        assert_eq!(slice.mask[k], p.norm() < 1.0);
    }
    let default = SceneConfig::from_toml("[geometry]\nkind = \"ball\"\n").unwrap();
    let (_, s) = build_scene(&default, Path::new(".")).unwrap();
    assert_eq!(s.resolution, 512);
}

#[test]
fn config_builds_mixed_box_and_disc() {
    let cfg = SceneConfig::from_toml(
        r#"
[geometry]
kind = "box"
min = [0.0, 0.0, 0.0]
max = [1.0, 1.0, 1.0]

[boundary]
rule = "half-space"
axis = [0.0, 0.0, 1.0]
threshold = 0.5

[problem]
type = "screened"
sigma = 5.0
omega = 3.0

[slice]
origin = [0.5, 0.5, 0.3]
resolution = 8
"#,
    )
    .unwrap();
    let (bvp, slice) = build_scene(&cfg, Path::new(".")).unwrap();
    assert!(bvp.domain.has_neumann() && bvp.domain.has_dirichlet());
    assert_eq!(bvp.sigma, 5.0);
    assert!(slice.mask.iter().all(|&m| m));

    let disc = SceneConfig::from_toml(
        "[geometry]\nkind = \"disc\"\n[problem]\nsolution = \"harmonic2d\"\n[slice]\nresolution = 16\n",
    )
    .unwrap();
    let (bvp, slice) = build_scene(&disc, Path::new(".")).unwrap();
    assert_eq!(bvp.domain.dim(), Dim::Two);
    assert!(!bvp.has_source());
    assert!(slice
        .points()
        .iter()
        .all(|(_, p)| p.z == 0.0 && p.norm() < 1.0));
}

#[test]
fn config_errors_name_the_key() {
    let err = |text: &str| match SceneConfig::from_toml(text)
        .and_then(|c| build_scene(&c, Path::new(".")))
    {
        Err(Error::Config { key, .. }) => key,
        other => panic!("expected config error, got {other:?}"),
    };
    assert_eq!(
        err("[geometry]\nkind = \"ball\"\nradius = -1.0\n"),
        "geometry.radius"
    );
    assert_eq!(
        err("[geometry]\nkind = \"mesh\"\npath = \"nope.obj\"\n"),
        "geometry.path"
    );
    assert_eq!(
        err("[geometry]\nkind = \"ball\"\n[slice]\nu_axis = [1.0, 0.0, 0.0]\nv_axis = [2.0, 0.0, 0.0]\n"),
        "slice"
    );
    assert_eq!(
        err("[geometry]\nkind = \"ball\"\n[problem]\ntype = \"screened\"\nsigma = -2.0\n"),
        "problem.sigma"
    );
    assert!(err("[geometry]\nkind = \"ball\"\nradios = 1.0\n").contains("radios"));
}

#[test]
fn mesh_scene_is_normalized() {
    let dir = tempfile::tempdir().unwrap();
    let mut mesh = crate::geometry::BoundaryMesh::icosphere(Vec3::new(5.0, 5.0, 5.0), 3.0, 1);
    let mut obj = String::new();
    for v in &mesh.vertices {
        obj.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in &mesh.triangles {
        obj.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    std::fs::write(dir.path().join("m.obj"), obj).unwrap();
    let scene = dir.path().join("scene.toml");
    std::fs::write(
        &scene,
        "[geometry]\nkind = \"mesh\"\npath = \"m.obj\"\n[boundary]\nrule = \"half-space\"\n[slice]\nresolution = 8\n",
    )
    .unwrap();
    let (bvp, slice) = load_scene(&scene).unwrap();
    let (lo, hi) = bvp.domain.bounds();
    assert!((hi - lo).max() <= 2.0 + 1e-9);
    assert!(lo.min() >= -1.0 - 1e-9 && hi.max() <= 1.0 + 1e-9);
    assert!(bvp.domain.has_neumann());
    assert!(!slice.points().is_empty());
    mesh.normalize();
}
