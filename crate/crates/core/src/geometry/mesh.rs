//! Triangle-mesh boundaries with BVH-accelerated closest-point, silhouette and ray queries.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;

use super::bvh::{Aabb, Bvh};
use super::{BoundaryLabel, BoundarySample, ClosestPointResult, LabelRule, RayHit};
use crate::error::{Error, Result};
use crate::math::{closest_on_segment, closest_on_triangle, ray_triangle, Vec3};

/// Hits closer than this are treated as the ray leaving its own surface.
const SELF_HIT: f64 = 1e-9;

/// Raw labelled triangle soup, consistently wound outward.
#[derive(Clone, Debug)]
pub struct BoundaryMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub labels: Vec<BoundaryLabel>,
}

impl BoundaryMesh {
    pub fn new(
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        labels: Vec<BoundaryLabel>,
    ) -> Result<Self> {
        if labels.len() != triangles.len() {
            return Err(Error::Mesh(format!(
                "{} labels for {} triangles",
                labels.len(),
                triangles.len()
            )));
        }
        if triangles.is_empty() {
            return Err(Error::Mesh("mesh has no triangles".into()));
        }
        for (ti, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::Mesh(format!(
                    "triangle {ti} indexes past {} vertices",
                    vertices.len()
                )));
            }
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Mesh("non-finite vertex".into()));
        }
        Ok(Self {
            vertices,
            triangles,
            labels,
        })
    }

    /// Unlabelled mesh (all Dirichlet); relabel with [`BoundaryMesh::relabel`].
    pub fn unlabelled(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let labels = vec![BoundaryLabel::Dirichlet; triangles.len()];
        Self::new(vertices, triangles, labels)
    }

    /// Assigns each triangle the label of its centroid under `rule`.
    pub fn relabel(&mut self, rule: &LabelRule) {
        for (t, label) in self.triangles.iter().zip(self.labels.iter_mut()) {
            let c = (self.vertices[t[0]] + self.vertices[t[1]] + self.vertices[t[2]]) / 3.0;
            *label = rule.label(&c);
        }
    }

    /// Loads a Wavefront OBJ file; polygons are fan-triangulated.
    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let opts = tobj::LoadOptions {
            triangulate: true,
            single_index: false,
            ..Default::default()
        };
        let (models, _) = tobj::load_obj(path, &opts)
            .map_err(|e| Error::Mesh(format!("{}: {e}", path.display())))?;
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for m in models {
            let base = vertices.len();
            let mesh = m.mesh;
            vertices.extend(
                mesh.positions
                    .chunks_exact(3)
                    .map(|p| Vec3::new(f64::from(p[0]), f64::from(p[1]), f64::from(p[2]))),
            );
            triangles.extend(mesh.indices.chunks_exact(3).map(|t| {
                [
                    base + t[0] as usize,
                    base + t[1] as usize,
                    base + t[2] as usize,
                ]
            }));
        }
        let mut mesh = Self::unlabelled(vertices, triangles)?;
        mesh.weld();
        Ok(mesh)
    }

    /// Merges bitwise-identical vertices so shared edges are recognised as such.
    pub fn weld(&mut self) {
        let mut remap = Vec::with_capacity(self.vertices.len());
        let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
        let mut kept = Vec::new();
        for v in &self.vertices {
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            let id = *seen.entry(key).or_insert_with(|| {
                kept.push(*v);
                kept.len() - 1
            });
            remap.push(id);
        }
        for t in &mut self.triangles {
            for i in t.iter_mut() {
                *i = remap[*i];
            }
        }
        self.vertices = kept;
    }

    /// Recenters and uniformly rescales the mesh so its bounding box fits `[-1, 1]³`.
    pub fn normalize(&mut self) {
        let b = Aabb::from_points(self.vertices.iter());
        let c = b.center();
        let half = (b.max - b.min).max() * 0.5;
        if half > 0.0 {
            for v in &mut self.vertices {
                *v = (*v - c) / half;
            }
        }
    }

    /// Subdivided icosahedron projected onto the sphere `(center, radius)`, wound outward.
    pub fn icosphere(center: Vec3, radius: f64, subdivisions: u32) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for f in &faces {
                let ab = midpoint(f[0], f[1], &mut verts);
                let bc = midpoint(f[1], f[2], &mut verts);
                let ca = midpoint(f[2], f[0], &mut verts);
                next.extend_from_slice(&[
                    [f[0], ab, ca],
                    [f[1], bc, ab],
                    [f[2], ca, bc],
                    [ab, bc, ca],
                ]);
            }
            faces = next;
        }
        let vertices = verts.into_iter().map(|v| center + v * radius).collect();
        Self::unlabelled(vertices, faces).expect("icosphere is well formed")
    }

    /// Axis-aligned box with each face split into `n × n` quads (two triangles each), wound outward.
    pub fn cuboid(min: Vec3, max: Vec3, n: usize) -> Self {
        let n = n.max(1);
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for axis in 0..3 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for side in [0usize, 1] {
                let base = vertices.len();
                for j in 0..=n {
                    for i in 0..=n {
                        let mut p = Vec3::zeros();
                        p[axis] = if side == 0 { min[axis] } else { max[axis] };
                        p[u] = min[u] + (max[u] - min[u]) * i as f64 / n as f64;
                        p[v] = min[v] + (max[v] - min[v]) * j as f64 / n as f64;
                        vertices.push(p);
                    }
                }
                let idx = |i: usize, j: usize| base + j * (n + 1) + i;
                for j in 0..n {
                    for i in 0..n {
                        let (a, b, c, d) =
                            (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                        // (u, v, axis) is right-handed, so CCW in (u, v) faces +axis.
                        if side == 1 {
                            triangles.push([a, b, c]);
                            triangles.push([a, c, d]);
                        } else {
                            triangles.push([a, c, b]);
                            triangles.push([a, d, c]);
                        }
                    }
                }
            }
        }
        let mut mesh = Self::unlabelled(vertices, triangles).expect("cuboid is well formed");
        mesh.weld();
        mesh
    }

    fn corners(&self, t: usize) -> (&Vec3, &Vec3, &Vec3) {
        let [a, b, c] = self.triangles[t];
        (&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }
}

/// Neumann edge candidate for the silhouette query.
#[derive(Clone, Debug)]
struct NeumannEdge {
    a: usize,
    b: usize,
    /// Unit normals of the adjacent Neumann faces; a single entry marks an open edge.
    normals: Vec<Vec3>,
}

impl NeumannEdge {
    fn is_silhouette(&self, p: &Vec3, a: &Vec3) -> bool {
        match self.normals.as_slice() {
            [n0, n1] => {
                let d0 = n0.dot(&(p - a));
                let d1 = n1.dot(&(p - a));
                d0 * d1 < 0.0
            }
            _ => true,
        }
    }
}

/// Indexed subset of triangles with its own BVH.
#[derive(Clone, Debug, Default)]
struct TriangleSet {
    ids: Vec<usize>,
    bvh: Bvh,
}

impl TriangleSet {
    fn build(mesh: &BoundaryMesh, boxes: &[Aabb], keep: impl Fn(usize) -> bool) -> Self {
        let ids: Vec<usize> = (0..mesh.triangles.len()).filter(|&i| keep(i)).collect();
        let sub: Vec<Aabb> = ids.iter().map(|&i| boxes[i]).collect();
        Self {
            bvh: Bvh::build(&sub),
            ids,
        }
    }
}

/// A [`BoundaryMesh`] with precomputed normals and acceleration structures.
#[derive(Clone, Debug)]
pub struct MeshDomain {
    mesh: BoundaryMesh,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
    all: TriangleSet,
    dirichlet: TriangleSet,
    neumann: TriangleSet,
    edges: Vec<NeumannEdge>,
    edge_bvh: Bvh,
    bounds: Aabb,
}

impl MeshDomain {
    pub fn new(mesh: BoundaryMesh) -> Result<Self> {
        let mut normals = Vec::with_capacity(mesh.triangles.len());
        let mut areas = Vec::with_capacity(mesh.triangles.len());
        for t in 0..mesh.triangles.len() {
            let (a, b, c) = mesh.corners(t);
            let cr = (b - a).cross(&(c - a));
            let len = cr.norm();
            if len <= 0.0 {
                return Err(Error::Mesh(format!("triangle {t} is degenerate")));
            }
            normals.push(cr / len);
            areas.push(0.5 * len);
        }
        let boxes: Vec<Aabb> = (0..mesh.triangles.len())
            .map(|t| {
                let (a, b, c) = mesh.corners(t);
                Aabb::from_points([a, b, c])
            })
            .collect();
        let all = TriangleSet::build(&mesh, &boxes, |_| true);
        let dirichlet = TriangleSet::build(&mesh, &boxes, |i| {
            mesh.labels[i] == BoundaryLabel::Dirichlet
        });
        let neumann =
            TriangleSet::build(&mesh, &boxes, |i| mesh.labels[i] == BoundaryLabel::Neumann);

        // Edge adjacency restricted to Neumann faces.
        let mut adjacency: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for &t in &neumann.ids {
            let tri = mesh.triangles[t];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                adjacency.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut keys: Vec<_> = adjacency.keys().copied().collect();
        keys.sort_unstable();
        let edges: Vec<NeumannEdge> = keys
            .into_iter()
            .map(|(a, b)| {
                let faces = &adjacency[&(a, b)];
                let normals = if faces.len() == 2 {
                    faces.iter().map(|&f| normals[f]).collect()
                } else {
                    // open or non-manifold: always a silhouette
                    vec![normals[faces[0]]]
                };
                NeumannEdge { a, b, normals }
            })
            .collect();
        let edge_boxes: Vec<Aabb> = edges
            .iter()
            .map(|e| Aabb::from_points([&mesh.vertices[e.a], &mesh.vertices[e.b]]))
            .collect();
        let edge_bvh = Bvh::build(&edge_boxes);
        let bounds = Aabb::from_points(mesh.vertices.iter());
        Ok(Self {
            mesh,
            normals,
            areas,
            all,
            dirichlet,
            neumann,
            edges,
            edge_bvh,
            bounds,
        })
    }

    pub fn mesh(&self) -> &BoundaryMesh {
        &self.mesh
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn has_dirichlet(&self) -> bool {
        !self.dirichlet.ids.is_empty()
    }

    pub fn has_neumann(&self) -> bool {
        !self.neumann.ids.is_empty()
    }

    fn closest_in(&self, set: &TriangleSet, p: &Vec3) -> Option<ClosestPointResult> {
        let (local, d2) = set.bvh.nearest(p, |i| {
            let (a, b, c) = self.mesh.corners(set.ids[i]);
            (closest_on_triangle(p, a, b, c) - p).norm_squared()
        })?;
        let t = set.ids[local];
        let (a, b, c) = self.mesh.corners(t);
        let point = closest_on_triangle(p, a, b, c);
        Some(ClosestPointResult {
            point,
            distance: d2.sqrt(),
            label: self.mesh.labels[t],
            normal: self.normals[t],
        })
    }

    pub fn closest_point(&self, p: &Vec3) -> ClosestPointResult {
        self.closest_in(&self.all, p).expect("mesh has triangles")
    }

    pub fn closest_dirichlet(&self, p: &Vec3) -> Option<ClosestPointResult> {
        self.closest_in(&self.dirichlet, p)
    }

    /// Distance to the closest silhouette point of the Neumann boundary as seen from `p`.
    pub fn silhouette_distance(&self, p: &Vec3) -> f64 {
        self.edge_bvh
            .nearest(p, |i| {
                let e = &self.edges[i];
                let (a, b) = (&self.mesh.vertices[e.a], &self.mesh.vertices[e.b]);
                if e.is_silhouette(p, a) {
                    (closest_on_segment(p, a, b) - p).norm_squared()
                } else {
                    f64::INFINITY
                }
            })
            .map_or(f64::INFINITY, |(_, d2)| d2.sqrt())
    }

    /// Exhaustive silhouette scan (test oracle for the BVH path).
    pub fn silhouette_distance_brute(&self, p: &Vec3) -> f64 {
        self.edges
            .iter()
            .filter_map(|e| {
                let (a, b) = (&self.mesh.vertices[e.a], &self.mesh.vertices[e.b]);
                e.is_silhouette(p, a)
                    .then(|| (closest_on_segment(p, a, b) - p).norm())
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of Neumann edges that are silhouettes for `p` (exhaustive).
    pub fn silhouette_count(&self, p: &Vec3) -> usize {
        self.edges
            .iter()
            .filter(|e| e.is_silhouette(p, &self.mesh.vertices[e.a]))
            .count()
    }

    pub fn intersect_neumann(&self, origin: &Vec3, dir: &Vec3, t_max: f64) -> Option<RayHit> {
        let (local, t) = self.neumann.bvh.first_hit(origin, dir, t_max, |i, tm| {
            let (a, b, c) = self.mesh.corners(self.neumann.ids[i]);
            ray_triangle(origin, dir, a, b, c, SELF_HIT, tm)
        })?;
        let tri = self.neumann.ids[local];
        Some(RayHit {
            t,
            point: origin + dir * t,
            normal: self.normals[tri],
        })
    }

    /// Uniform area sample over the Neumann triangles overlapping the ball `(p, radius)`.
    pub fn sample_neumann<R: Rng + ?Sized>(
        &self,
        p: &Vec3,
        radius: f64,
        rng: &mut R,
    ) -> Option<BoundarySample> {
        let mut local = Vec::new();
        self.neumann.bvh.overlapping_ball(p, radius, &mut local);
        if local.is_empty() {
            return None;
        }
        local.sort_unstable();
        let total: f64 = local.iter().map(|&i| self.areas[self.neumann.ids[i]]).sum();
        let mut pick = rng.random::<f64>() * total;
        let mut tri = self.neumann.ids[*local.last().unwrap()];
        for &i in &local {
            let t = self.neumann.ids[i];
            if pick < self.areas[t] {
                tri = t;
                break;
            }
            pick -= self.areas[t];
        }
        let (a, b, c) = self.mesh.corners(tri);
        let su = rng.random::<f64>().sqrt();
        let v = rng.random::<f64>();
        let point = a * (1.0 - su) + b * (su * (1.0 - v)) + c * (su * v);
        Some(BoundarySample {
            point,
            normal: self.normals[tri],
            pdf: 1.0 / total,
        })
    }

    /// Inside test via the generalized winding number (solid-angle sum).
    pub fn winding_number(&self, p: &Vec3) -> f64 {
        let mut total = 0.0;
        for t in 0..self.mesh.triangles.len() {
            let (a, b, c) = self.mesh.corners(t);
            let (a, b, c) = (a - p, b - p, c - p);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.bounds.distance_sq(p) == 0.0 && self.winding_number(p) > 0.5
    }

    /// Exhaustive closest-point scan (test oracle for the BVH path).
    pub fn closest_point_brute(
        &self,
        p: &Vec3,
        label: Option<BoundaryLabel>,
    ) -> Option<ClosestPointResult> {
        let mut best: Option<ClosestPointResult> = None;
        for t in 0..self.mesh.triangles.len() {
            if label.is_some_and(|l| l != self.mesh.labels[t]) {
                continue;
            }
            let (a, b, c) = self.mesh.corners(t);
            let q = closest_on_triangle(p, a, b, c);
            let d = (q - p).norm_squared().sqrt();
            if best.as_ref().is_none_or(|b| d < b.distance) {
                best = Some(ClosestPointResult {
                    point: q,
                    distance: d,
                    label: self.mesh.labels[t],
                    normal: self.normals[t],
                });
            }
        }
        best
    }
}
