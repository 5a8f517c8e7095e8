use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LioError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Corridor,
    Tunnel,
    Plane,
    Room,
    OffroadScatter,
}

impl SceneKind {
    pub fn name(&self) -> &'static str {
        match self {
            SceneKind::Corridor => "corridor",
            SceneKind::Tunnel => "tunnel",
            SceneKind::Plane => "plane",
            SceneKind::Room => "room",
            SceneKind::OffroadScatter => "offroad_scatter",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = LioError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "corridor" => SceneKind::Corridor,
            "tunnel" => SceneKind::Tunnel,
            "plane" => SceneKind::Plane,
            "room" => SceneKind::Room,
            "offroad_scatter" | "offroad" => SceneKind::OffroadScatter,
            other => return Err(LioError::Config(format!("unknown scene kind `{other}`"))),
        })
    }
}

/// Parametric world. Lengths in meters; the corridor and tunnel run along
/// the world y axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneModel {
    pub kind: SceneKind,
    /// Extent across the degenerate axis (corridor width, room y-size).
    pub width: f64,
    /// Floor-to-ceiling height.
    pub height: f64,
    /// Extent along y for corridor/tunnel, along x for the room, side of
    /// the scatter field.
    pub length: f64,
    /// Tunnel radius; for the scatter field, the obstacle-free disc around
    /// the origin.
    pub radius: f64,
    /// Height of the floor in world coordinates.
    pub floor_z: f64,
    /// Obstacles per square meter of ground for the scatter scene.
    pub density: f64,
    pub seed: u64,
}

impl Default for SceneModel {
    fn default() -> Self {
        Self::room()
    }
}

impl SceneModel {
    pub fn corridor() -> Self {
        Self { kind: SceneKind::Corridor, width: 4.0, height: 3.0, length: 2000.0, radius: 0.0, floor_z: -1.2, density: 0.0, seed: 0 }
    }

    pub fn tunnel() -> Self {
        Self { kind: SceneKind::Tunnel, width: 0.0, height: 0.0, length: 2000.0, radius: 3.0, floor_z: -1.2, density: 0.0, seed: 0 }
    }

    pub fn plane() -> Self {
        Self { kind: SceneKind::Plane, width: 0.0, height: 0.0, length: 0.0, radius: 0.0, floor_z: -1.2, density: 0.0, seed: 0 }
    }

    pub fn room() -> Self {
        Self { kind: SceneKind::Room, width: 14.0, height: 4.0, length: 20.0, radius: 0.0, floor_z: -1.2, density: 0.0, seed: 0 }
    }

    pub fn offroad_scatter() -> Self {
        Self { kind: SceneKind::OffroadScatter, width: 0.0, height: 0.0, length: 400.0, radius: 3.0, floor_z: -1.2, density: 0.004, seed: 7 }
    }

    pub fn of_kind(kind: SceneKind) -> Self {
        match kind {
            SceneKind::Corridor => Self::corridor(),
            SceneKind::Tunnel => Self::tunnel(),
            SceneKind::Plane => Self::plane(),
            SceneKind::Room => Self::room(),
            SceneKind::OffroadScatter => Self::offroad_scatter(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(LioError::Config(format!("scene {name} must be positive, got {v}")))
            }
        };
        match self.kind {
            SceneKind::Corridor | SceneKind::Room => {
                positive("width", self.width)?;
                positive("height", self.height)?;
                positive("length", self.length)
            }
            SceneKind::Tunnel => {
                positive("radius", self.radius)?;
                positive("length", self.length)
            }
            SceneKind::Plane => Ok(()),
            SceneKind::OffroadScatter => {
                positive("length", self.length)?;
                if !(self.radius >= 0.0) {
                    return Err(LioError::Config("scatter clearing radius must be non-negative".into()));
                }
                if self.density >= 0.0 { Ok(()) } else { Err(LioError::Config("scene density must be non-negative".into())) }
            }
        }
    }

    /// Known unconstrained translation axis, if the scene has one.
    pub fn degenerate_axis(&self) -> Option<Vector3<f64>> {
        match self.kind {
            SceneKind::Corridor | SceneKind::Tunnel => Some(Vector3::y()),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<World> {
        self.validate()?;
        let mut surfaces = Vec::new();
        let f = self.floor_z;
        match self.kind {
            SceneKind::Corridor => {
                let (hw, hl) = (0.5 * self.width, 0.5 * self.length);
                surfaces.push(Surface::inner_box(Vector3::new(-hw, -hl, f), Vector3::new(hw, hl, f + self.height)));
            }
            SceneKind::Tunnel => {
                let hl = 0.5 * self.length;
                surfaces.push(Surface::Tube { radius: self.radius, y_min: -hl, y_max: hl });
                surfaces.push(Surface::Plane { normal: Vector3::z(), offset: f });
            }
            SceneKind::Plane => surfaces.push(Surface::Plane { normal: Vector3::z(), offset: f }),
            SceneKind::Room => {
                let (hx, hy) = (0.5 * self.length, 0.5 * self.width);
                surfaces.push(Surface::inner_box(Vector3::new(-hx, -hy, f), Vector3::new(hx, hy, f + self.height)));
                // fixed furniture so every direction is well constrained
                let pillars = [
                    (Vector3::new(-0.35 * hx, 0.45 * hy, 0.0), Vector3::new(0.6, 0.6, self.height)),
                    (Vector3::new(0.4 * hx, -0.4 * hy, 0.0), Vector3::new(1.2, 0.5, 1.1)),
                    (Vector3::new(0.55 * hx, 0.5 * hy, 0.0), Vector3::new(0.8, 1.6, 1.8)),
                    (Vector3::new(-0.6 * hx, -0.5 * hy, 0.0), Vector3::new(1.0, 1.0, 0.9)),
                ];
                for (c, size) in pillars {
                    let lo = Vector3::new(c.x - 0.5 * size.x, c.y - 0.5 * size.y, f);
                    surfaces.push(Surface::Solid { min: lo, max: lo + size });
                }
            }
            SceneKind::OffroadScatter => {
                surfaces.push(Surface::Plane { normal: Vector3::z(), offset: f });
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let half = 0.5 * self.length;
                let count = (self.density * self.length * self.length).round() as usize;
                for _ in 0..count {
                    let x = rng.random_range(-half..half);
                    let y = rng.random_range(-half..half);
                    if x.hypot(y) < self.radius {
                        continue;
                    }
                    if rng.random_bool(0.6) {
                        let radius = rng.random_range(0.15..0.5);
                        let height = rng.random_range(2.0..8.0);
                        surfaces.push(Surface::Pole { x, y, radius, z_min: f, z_max: f + height });
                    } else {
                        let size = Vector3::new(rng.random_range(0.5..3.0), rng.random_range(0.5..3.0), rng.random_range(0.4..2.5));
                        let lo = Vector3::new(x - 0.5 * size.x, y - 0.5 * size.y, f);
                        surfaces.push(Surface::Solid { min: lo, max: lo + size });
                    }
                }
            }
        }
        Ok(World { surfaces })
    }
}

/// Ray-castable primitive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Surface {
    /// Infinite plane `n·x = offset`.
    Plane { normal: Vector3<f64>, offset: f64 },
    /// Interior of an axis-aligned box (rays start inside).
    Hollow { min: Vector3<f64>, max: Vector3<f64> },
    /// Exterior of an axis-aligned box.
    Solid { min: Vector3<f64>, max: Vector3<f64> },
    /// Inner wall of a cylinder along y centred on the y axis.
    Tube { radius: f64, y_min: f64, y_max: f64 },
    /// Vertical cylinder exterior.
    Pole { x: f64, y: f64, radius: f64, z_min: f64, z_max: f64 },
}

impl Surface {
    fn inner_box(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Surface::Hollow { min, max }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub range: f64,
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
}

const MIN_RANGE: f64 = 1e-9;

fn slab(o: &Vector3<f64>, d: &Vector3<f64>, min: &Vector3<f64>, max: &Vector3<f64>) -> Option<(f64, usize, f64, usize)> {
    let (mut t_near, mut near_axis) = (f64::NEG_INFINITY, 0);
    let (mut t_far, mut far_axis) = (f64::INFINITY, 0);
    for i in 0..3 {
        if d[i].abs() < 1e-300 {
            if o[i] < min[i] || o[i] > max[i] {
                return None;
            }
            continue;
        }
        let a = (min[i] - o[i]) / d[i];
        let b = (max[i] - o[i]) / d[i];
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if lo > t_near {
            t_near = lo;
            near_axis = i;
        }
        if hi < t_far {
            t_far = hi;
            far_axis = i;
        }
    }
    (t_near <= t_far).then_some((t_near, near_axis, t_far, far_axis))
}

fn axis_normal(axis: usize, d: &Vector3<f64>) -> Vector3<f64> {
    let mut n = Vector3::zeros();
    n[axis] = -d[axis].signum();
    n
}

impl Surface {
    /// Nearest hit along the unit direction `d` from `o`, with the normal
    /// facing the ray origin.
    pub fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
        match *self {
            Surface::Plane { normal, offset } => {
                let denom = normal.dot(d);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = (offset - normal.dot(o)) / denom;
                (t > MIN_RANGE).then(|| (t, if denom < 0.0 { normal } else { -normal }))
            }
            Surface::Hollow { min, max } => {
                let (_, _, t_far, axis) = slab(o, d, &min, &max)?;
                (t_far > MIN_RANGE).then(|| (t_far, axis_normal(axis, d)))
            }
            Surface::Solid { min, max } => {
                let (t_near, axis, _, _) = slab(o, d, &min, &max)?;
                (t_near > MIN_RANGE).then(|| (t_near, axis_normal(axis, d)))
            }
            Surface::Tube { radius, y_min, y_max } => {
                // (o_x + t d_x)² + (o_z + t d_z)² = r²
                let a = d.x * d.x + d.z * d.z;
                if a < 1e-15 {
                    return None;
                }
                let b = 2.0 * (o.x * d.x + o.z * d.z);
                let c = o.x * o.x + o.z * o.z - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let t = (-b + disc.sqrt()) / (2.0 * a);
                let p = o + d * t;
                if t > MIN_RANGE && p.y >= y_min && p.y <= y_max {
                    Some((t, -Vector3::new(p.x, 0.0, p.z) / radius))
                } else {
                    None
                }
            }
            Surface::Pole { x, y, radius, z_min, z_max } => {
                let (ox, oy) = (o.x - x, o.y - y);
                let a = d.x * d.x + d.y * d.y;
                if a < 1e-15 {
                    return None;
                }
                let b = 2.0 * (ox * d.x + oy * d.y);
                let c = ox * ox + oy * oy - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 || c < 0.0 {
                    return None;
                }
                let t = (-b - disc.sqrt()) / (2.0 * a);
                let p = o + d * t;
                if t > MIN_RANGE && p.z >= z_min && p.z <= z_max {
                    Some((t, Vector3::new(p.x - x, p.y - y, 0.0) / radius))
                } else {
                    None
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct World {
    pub surfaces: Vec<Surface>,
}

impl World {
    pub fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<RayHit> {
        let d = dir.normalize();
        self.surfaces
            .iter()
            .filter_map(|s| s.intersect(origin, &d))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(range, normal)| RayHit { range, point: origin + d * range, normal })
    }
}
