use std::cmp::Ordering;
use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::voxel_of;
use crate::lie::sym_eig3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelKey {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl VoxelKey {
    pub fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    fn offset(&self, dx: i32, dy: i32, dz: i32) -> Self {
        Self::new(self.x + dx, self.y + dy, self.z + dz)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmapConfig {
    pub voxel_size: f64,
    pub max_points_per_voxel: usize,
    pub prune_radius: f64,
    /// Neighbours used for normal estimation.
    pub normal_neighbors: usize,
    pub normal_radius: f64,
    /// Minimum ratio of the middle to the smallest covariance eigenvalue.
    pub planarity_floor: f64,
}

impl Default for SubmapConfig {
    fn default() -> Self {
        Self {
            voxel_size: 0.5,
            max_points_per_voxel: 20,
            prune_radius: 100.0,
            normal_neighbors: 5,
            normal_radius: 1.0,
            planarity_floor: 3.0,
        }
    }
}

/// Global-frame point store bucketed by voxel.
///
/// Queries take `&self` and may run concurrently; `insert` and `prune`
/// need exclusive access.
#[derive(Clone, Debug)]
pub struct VoxelSubmap {
    cfg: SubmapConfig,
    voxels: HashMap<VoxelKey, Vec<Vector3<f64>>>,
    lo: VoxelKey,
    hi: VoxelKey,
    len: usize,
}

#[derive(Clone, Copy)]
struct Candidate {
    point: Vector3<f64>,
    dist2: f64,
}

impl Candidate {
    // distance first, then coordinates, so results do not depend on hash order
    fn cmp(&self, other: &Candidate) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.point.x.total_cmp(&other.point.x))
            .then(self.point.y.total_cmp(&other.point.y))
            .then(self.point.z.total_cmp(&other.point.z))
    }
}

impl VoxelSubmap {
    pub fn new(cfg: SubmapConfig) -> Self {
        Self { cfg, voxels: HashMap::new(), lo: VoxelKey::new(0, 0, 0), hi: VoxelKey::new(0, 0, 0), len: 0 }
    }

    pub fn config(&self) -> &SubmapConfig {
        &self.cfg
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn voxel_count(&self) -> usize {
        self.voxels.len()
    }

    pub fn voxels(&self) -> impl Iterator<Item = (&VoxelKey, &[Vector3<f64>])> {
        self.voxels.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn points(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.voxels.values().flatten()
    }

    pub fn key_of(&self, p: &Vector3<f64>) -> VoxelKey {
        voxel_of(p, self.cfg.voxel_size)
    }

    pub fn voxel_center(&self, key: &VoxelKey) -> Vector3<f64> {
        Vector3::new(key.x as f64 + 0.5, key.y as f64 + 0.5, key.z as f64 + 0.5) * self.cfg.voxel_size
    }

    /// Appends points to their voxels (first-in kept, capped per voxel) and
    /// evicts voxels farther than the pruning radius from `center`.
    pub fn insert(&mut self, points: &[Vector3<f64>], center: &Vector3<f64>) {
        let cap = self.cfg.max_points_per_voxel;
        for p in points.iter().filter(|p| p.iter().all(|v| v.is_finite())) {
            let key = self.key_of(p);
            let bucket = self.voxels.entry(key).or_default();
            if bucket.len() < cap {
                bucket.push(*p);
                self.len += 1;
            }
        }
        self.prune(center);
    }

    pub fn prune(&mut self, center: &Vector3<f64>) {
        let radius = self.cfg.prune_radius;
        let size = self.cfg.voxel_size;
        self.voxels.retain(|k, _| {
            let c = Vector3::new(k.x as f64 + 0.5, k.y as f64 + 0.5, k.z as f64 + 0.5) * size;
            (c - center).norm() <= radius
        });
        self.len = self.voxels.values().map(Vec::len).sum();
        self.refresh_bounds();
    }

    fn refresh_bounds(&mut self) {
        let mut keys = self.voxels.keys();
        let Some(first) = keys.next() else {
            self.lo = VoxelKey::new(0, 0, 0);
            self.hi = self.lo;
            return;
        };
        let (mut lo, mut hi) = (*first, *first);
        for k in keys {
            lo = VoxelKey::new(lo.x.min(k.x), lo.y.min(k.y), lo.z.min(k.z));
            hi = VoxelKey::new(hi.x.max(k.x), hi.y.max(k.y), hi.z.max(k.z));
        }
        self.lo = lo;
        self.hi = hi;
    }

    /// Squared distance from `q` to the voxel's axis-aligned bounds.
    fn voxel_dist2(&self, key: &VoxelKey, q: &Vector3<f64>) -> f64 {
        let s = self.cfg.voxel_size;
        let lo = Vector3::new(key.x as f64, key.y as f64, key.z as f64) * s;
        (0..3)
            .map(|i| {
                let d = (lo[i] - q[i]).max(0.0).max(q[i] - (lo[i] + s));
                d * d
            })
            .sum()
    }

    /// Chebyshev shell radius beyond which no stored voxel exists.
    fn max_shell(&self, c: &VoxelKey) -> i32 {
        [c.x - self.lo.x, self.hi.x - c.x, c.y - self.lo.y, self.hi.y - c.y, c.z - self.lo.z, self.hi.z - c.z]
            .into_iter()
            .map(i32::abs)
            .max()
            .unwrap_or(0)
    }

    fn for_each_in_shell(center: &VoxelKey, s: i32, mut f: impl FnMut(VoxelKey)) {
        if s == 0 {
            f(*center);
            return;
        }
        for dx in -s..=s {
            for dy in -s..=s {
                if dx.abs() == s || dy.abs() == s {
                    for dz in -s..=s {
                        f(center.offset(dx, dy, dz));
                    }
                } else {
                    f(center.offset(dx, dy, -s));
                    f(center.offset(dx, dy, s));
                }
            }
        }
    }

    /// Visits voxels in expanding Chebyshev shells around `q`, offering every
    /// point of each voxel that `keep` may still improve on. Stops once
    /// `done(shell_lower_bound²)` holds after the 3×3×3 neighbourhood has
    /// been visited. Falls back to a sweep over all occupied voxels when a
    /// shell would enumerate more cells than the map holds.
    fn shell_search(
        &self,
        q: &Vector3<f64>,
        mut bound2: impl FnMut() -> f64,
        mut offer: impl FnMut(&Vector3<f64>, f64),
        mut done: impl FnMut(f64) -> bool,
    ) {
        let c = self.key_of(q);
        let last = self.max_shell(&c);
        let size = self.cfg.voxel_size;
        let mut visit = |key: VoxelKey, bound: f64| {
            if let Some(pts) = self.voxels.get(&key) {
                if self.voxel_dist2(&key, q) <= bound {
                    for p in pts {
                        offer(p, (p - q).norm_squared());
                    }
                }
            }
        };
        let mut s = 0;
        while s <= last {
            let cells = (2 * s as i64 + 1).pow(3) - if s > 0 { (2 * s as i64 - 1).pow(3) } else { 0 };
            if cells as usize > self.voxels.len() {
                // remaining shells are larger than the map: sweep what is left
                for (key, pts) in &self.voxels {
                    let cheb = (key.x - c.x).abs().max((key.y - c.y).abs()).max((key.z - c.z).abs());
                    if cheb >= s && self.voxel_dist2(key, q) <= bound2() {
                        for p in pts {
                            offer(p, (p - q).norm_squared());
                        }
                    }
                }
                return;
            }
            Self::for_each_in_shell(&c, s, |k| visit(k, bound2()));
            if s >= 1 {
                let reach = s as f64 * size;
                if done(reach * reach) {
                    return;
                }
            }
            s += 1;
        }
    }

    /// Exact nearest stored point and its distance.
    pub fn nearest(&self, q: &Vector3<f64>) -> Option<(Vector3<f64>, f64)> {
        if self.is_empty() {
            return None;
        }
        let best = std::cell::Cell::new(None::<Candidate>);
        let bound = || best.get().map_or(f64::INFINITY, |b| b.dist2);
        self.shell_search(
            q,
            bound,
            |p, d2| {
                let cand = Candidate { point: *p, dist2: d2 };
                if best.get().is_none_or(|b| cand.cmp(&b) == Ordering::Less) {
                    best.set(Some(cand));
                }
            },
            |reach2| best.get().is_some_and(|b| b.dist2 <= reach2),
        );
        best.get().map(|b| (b.point, b.dist2.sqrt()))
    }

    /// Up to `k` nearest points within `radius`, ascending by distance.
    pub fn knn_within(&self, q: &Vector3<f64>, k: usize, radius: f64) -> Vec<(Vector3<f64>, f64)> {
        if self.is_empty() || k == 0 {
            return Vec::new();
        }
        let r2 = radius * radius;
        let found = std::cell::RefCell::new(Vec::<Candidate>::with_capacity(k + 1));
        let kth = || {
            let f = found.borrow();
            if f.len() == k { f[k - 1].dist2 } else { r2 }
        };
        self.shell_search(
            q,
            kth,
            |p, d2| {
                if d2 > r2 {
                    return;
                }
                let cand = Candidate { point: *p, dist2: d2 };
                let mut f = found.borrow_mut();
                if f.len() == k && cand.cmp(&f[k - 1]) != Ordering::Less {
                    return;
                }
                let at = f.partition_point(|c| c.cmp(&cand) == Ordering::Less);
                f.insert(at, cand);
                f.truncate(k);
            },
            |reach2| {
                let f = found.borrow();
                reach2 >= r2 || (f.len() == k && f[k - 1].dist2 <= reach2)
            },
        );
        found.into_inner().into_iter().map(|c| (c.point, c.dist2.sqrt())).collect()
    }

    /// Surface normal at `q` from its `k` nearest stored neighbours, or
    /// `None` if too few neighbours lie within the normal radius or the
    /// neighbourhood is not planar enough.
    pub fn local_normal(&self, q: &Vector3<f64>, k: usize) -> Option<Vector3<f64>> {
        let k = k.max(3);
        let nbrs = self.knn_within(q, k, self.cfg.normal_radius);
        if nbrs.len() < k {
            return None;
        }
        let mean = nbrs.iter().map(|(p, _)| p).sum::<Vector3<f64>>() / k as f64;
        let cov = nbrs.iter().fold(Matrix3::zeros(), |acc, (p, _)| {
            let d = p - mean;
            acc + d * d.transpose()
        }) / k as f64;
        let eig = sym_eig3(&cov);
        let (small, middle, large) = (eig.values[0].max(0.0), eig.values[1], eig.values[2]);
        if !(large > 0.0 && middle > 0.0) || middle < self.cfg.planarity_floor * small {
            return None;
        }
        Some(eig.vector(0))
    }

    pub fn default_normal(&self, q: &Vector3<f64>) -> Option<Vector3<f64>> {
        self.local_normal(q, self.cfg.normal_neighbors)
    }
}
