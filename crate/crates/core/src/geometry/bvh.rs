//! Bounding-volume hierarchy over arbitrary primitives.
//!
//! The tree only stores boxes; callers supply the exact per-primitive query
//! as a closure, which keeps one structure usable for triangles and edges.

use crate::math::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in pts {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Squared distance from `p` to the box (zero inside).
    #[inline]
    pub fn distance_sq(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let v = p[k];
            let d = if v < self.min[k] {
                self.min[k] - v
            } else if v > self.max[k] {
                v - self.max[k]
            } else {
                0.0
            };
            d2 += d * d;
        }
        d2
    }

    /// Slab test; returns the entry distance if the ray overlaps the box within `[0, t_max]`.
    #[inline]
    pub fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0_f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let mut ta = (self.min[k] - origin[k]) * inv_dir[k];
            let mut tb = (self.max[k] - origin[k]) * inv_dir[k];
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            // NaN (0 * inf) means the origin lies on the slab plane; keep the interval.
            if ta.is_nan() || tb.is_nan() {
                continue;
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: `count > 0`, primitives `order[first..first + count]`.
    /// Inner: `count == 0`, children at `first` and `first + 1`.
    first: usize,
    count: usize,
}

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    /// Builds a median-split tree over the given primitive boxes.
    pub fn build(boxes: &[Aabb]) -> Self {
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * boxes.len() / LEAF_SIZE + 1),
            order: (0..boxes.len()).collect(),
        };
        if boxes.is_empty() {
            return bvh;
        }
        let centers: Vec<Vec3> = boxes.iter().map(Aabb::center).collect();
        bvh.nodes.push(Node {
            bounds: Aabb::empty(),
            first: 0,
            count: 0,
        });
        bvh.split(0, 0, boxes.len(), boxes, &centers);
        bvh
    }

    fn split(&mut self, node: usize, start: usize, end: usize, boxes: &[Aabb], centers: &[Vec3]) {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &i in &self.order[start..end] {
            bounds = bounds.union(&boxes[i]);
            cbounds.grow(&centers[i]);
        }
        self.nodes[node].bounds = bounds;
        let n = end - start;
        let extent = cbounds.max - cbounds.min;
        if n <= LEAF_SIZE || extent.max() <= 0.0 {
            self.nodes[node].first = start;
            self.nodes[node].count = n;
            return;
        }
        let axis = extent.imax();
        let mid = start + n / 2;
        self.order[start..end].select_nth_unstable_by(n / 2, |&a, &b| {
            centers[a][axis].total_cmp(&centers[b][axis])
        });
        let left = self.nodes.len();
        for _ in 0..2 {
            self.nodes.push(Node {
                bounds: Aabb::empty(),
                first: 0,
                count: 0,
            });
        }
        self.nodes[node].first = left;
        self.nodes[node].count = 0;
        self.split(left, start, mid, boxes, centers);
        self.split(left + 1, mid, end, boxes, centers);
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    /// Nearest primitive to `p` under the exact squared distance `dist_sq(i)`.
    ///
    /// `dist_sq` may return `f64::INFINITY` to skip a primitive.
    pub fn nearest(&self, p: &Vec3, mut dist_sq: impl FnMut(usize) -> f64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].bounds.distance_sq(p)));
        while let Some((ni, lower)) = stack.pop() {
            if lower > best.1 {
                continue;
            }
            let node = &self.nodes[ni];
            if node.count > 0 {
                for &prim in &self.order[node.first..node.first + node.count] {
                    let d = dist_sq(prim);
                    if d < best.1 {
                        best = (prim, d);
                    }
                }
            } else {
                let (l, r) = (node.first, node.first + 1);
                let dl = self.nodes[l].bounds.distance_sq(p);
                let dr = self.nodes[r].bounds.distance_sq(p);
                // push the farther child first so the nearer is visited first
                if dl < dr {
                    stack.push((r, dr));
                    stack.push((l, dl));
                } else {
                    stack.push((l, dl));
                    stack.push((r, dr));
                }
            }
        }
        (best.0 != usize::MAX).then_some(best)
    }

    /// First hit along a ray. `hit(i, t_max)` returns the primitive hit distance if below `t_max`.
    pub fn first_hit(
        &self,
        origin: &Vec3,
        dir: &Vec3,
        t_max: f64,
        mut hit: impl FnMut(usize, f64) -> Option<f64>,
    ) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best = (usize::MAX, t_max);
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.ray_entry(origin, &inv, best.1).is_none() {
                continue;
            }
            if node.count > 0 {
                for &prim in &self.order[node.first..node.first + node.count] {
                    if let Some(t) = hit(prim, best.1) {
                        if t < best.1 {
                            best = (prim, t);
                        }
                    }
                }
            } else {
                stack.push(node.first);
                stack.push(node.first + 1);
            }
        }
        (best.0 != usize::MAX).then_some(best)
    }

    /// Appends every primitive whose box overlaps the ball `(center, radius)`.
    pub fn overlapping_ball(&self, center: &Vec3, radius: f64, out: &mut Vec<usize>) {
        if self.nodes.is_empty() {
            return;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.distance_sq(center) > r2 {
                continue;
            }
            if node.count > 0 {
                out.extend_from_slice(&self.order[node.first..node.first + node.count]);
            } else {
                stack.push(node.first);
                stack.push(node.first + 1);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearest_point_cloud_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec3> = (0..500)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let boxes: Vec<Aabb> = pts.iter().map(|p| Aabb { min: *p, max: *p }).collect();
        let bvh = Bvh::build(&boxes);
        for _ in 0..100 {
            let q = Vec3::new(rng.random(), rng.random(), rng.random()) * 1.5;
            let (i, d) = bvh.nearest(&q, |i| (pts[i] - q).norm_squared()).unwrap();
            let brute = pts
                .iter()
                .map(|p| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(d, brute);
            assert_eq!((pts[i] - q).norm_squared(), brute);
        }
    }

    #[test]
    fn ball_overlap_is_superset_of_contained_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec3> = (0..300)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let boxes: Vec<Aabb> = pts.iter().map(|p| Aabb { min: *p, max: *p }).collect();
        let bvh = Bvh::build(&boxes);
        let c = Vec3::new(0.5, 0.5, 0.5);
        let mut out = Vec::new();
        bvh.overlapping_ball(&c, 0.3, &mut out);
        for (i, p) in pts.iter().enumerate() {
            if (p - c).norm() <= 0.3 {
                assert!(out.contains(&i));
            }
        }
        assert!(out.len() < pts.len());
    }
}
