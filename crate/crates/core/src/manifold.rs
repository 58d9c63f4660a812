//! Sensor array geometry and the unit sphere of directions.
//!
//! A direction of arrival is a unit vector `q` pointing from the array toward
//! the source. In colatitude `θ` / azimuth `φ` coordinates
//! `q = (cos φ sin θ, sin φ sin θ, cos θ)`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{DVector, Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymEigen3;

/// Speed of sound in air at roughly 20 °C, in m/s.
pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Neighbors kept per grid point before symmetrization.
pub const DEFAULT_GRID_NEIGHBORS: usize = 8;

/// Seed of [`ArrayGeometry::default_array`].
pub const DEFAULT_ARRAY_SEED: u64 = 0x5eed_a77a;

/// A point on the 2-sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct DoaVector(Vector3<f64>);

impl DoaVector {
    /// Normalizes `v` onto the sphere. Fails on zero or non-finite input.
    pub fn new(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::invalid(format!("cannot normalize {v:?} onto the sphere")));
        }
        Ok(DoaVector(v / n))
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(Vector3::new(x, y, z))
    }

    /// Wraps a vector the caller guarantees has unit norm.
    pub(crate) fn from_unit(v: Vector3<f64>) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-9, "not unit: {v:?}");
        DoaVector(v)
    }

    pub fn from_angles(colatitude: f64, azimuth: f64) -> Self {
        doa_from_angles(colatitude, azimuth)
    }

    /// `(colatitude, azimuth)` in radians.
    pub fn angles(&self) -> (f64, f64) {
        angles_from_doa(self)
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn dot(&self, other: &DoaVector) -> f64 {
        self.0.dot(&other.0)
    }

    /// Draws a direction uniformly on the sphere.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(-PI..PI);
        let r = (1.0 - z * z).max(0.0).sqrt();
        DoaVector(Vector3::new(r * phi.cos(), r * phi.sin(), z)).renormalized()
    }

    fn renormalized(self) -> Self {
        DoaVector(self.0 / self.0.norm())
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.0.x, self.0.y, self.0.z]
    }
}

impl TryFrom<[f64; 3]> for DoaVector {
    type Error = Error;
    fn try_from(a: [f64; 3]) -> Result<Self> {
        DoaVector::from_xyz(a[0], a[1], a[2])
    }
}

impl From<DoaVector> for [f64; 3] {
    fn from(q: DoaVector) -> Self {
        q.to_array()
    }
}

impl std::ops::Neg for DoaVector {
    type Output = DoaVector;
    fn neg(self) -> DoaVector {
        DoaVector(-self.0)
    }
}

pub fn doa_from_angles(colatitude: f64, azimuth: f64) -> DoaVector {
    let (st, ct) = colatitude.sin_cos();
    let (sp, cp) = azimuth.sin_cos();
    DoaVector(Vector3::new(cp * st, sp * st, ct)).renormalized()
}

/// Inverse of [`doa_from_angles`]. Colatitude is in `[0, π]` and azimuth in
/// `(−π, π]`; at the poles the azimuth is 0.
pub fn angles_from_doa(q: &DoaVector) -> (f64, f64) {
    let v = q.as_vector();
    let rho = v.x.hypot(v.y);
    let colatitude = rho.atan2(v.z);
    let azimuth = if rho == 0.0 {
        0.0
    } else {
        let a = v.y.atan2(v.x);
        if a == -PI {
            PI
        } else {
            a
        }
    };
    (colatitude, azimuth)
}

/// Angle between two directions, in `[0, π]`.
pub fn great_circle_distance(q1: &DoaVector, q2: &DoaVector) -> f64 {
    q1.dot(q2).clamp(-1.0, 1.0).acos()
}

/// One unordered sensor pair `(m, r)` with `m < r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPair {
    pub m: usize,
    pub r: usize,
    /// `d_m − d_r` in meters.
    pub delta: Vector3<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GeometryFile {
    speed_of_sound: f64,
    sensors: Vec<[f64; 3]>,
}

/// Sensor positions plus the pair differences the refinement works on.
#[derive(Debug, Clone)]
pub struct ArrayGeometry {
    sensors: Vec<Vector3<f64>>,
    pairs: Vec<SensorPair>,
    speed_of_sound: f64,
    pair_scatter_max: f64,
}

impl ArrayGeometry {
    pub fn new(sensors: Vec<Vector3<f64>>, speed_of_sound: f64) -> Result<Self> {
        if sensors.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 sensors, got {}", sensors.len())));
        }
        if !(speed_of_sound.is_finite() && speed_of_sound > 0.0) {
            return Err(Error::invalid(format!("speed of sound must be positive, got {speed_of_sound}")));
        }
        if let Some(bad) = sensors.iter().find(|d| !d.iter().all(|x| x.is_finite())) {
            return Err(Error::invalid(format!("non-finite sensor coordinate {bad:?}")));
        }
        let m = sensors.len();
        let mut pairs = Vec::with_capacity(m * (m - 1) / 2);
        for i in 0..m {
            for j in i + 1..m {
                pairs.push(SensorPair { m: i, r: j, delta: sensors[i] - sensors[j] });
            }
        }
        let scatter: Matrix3<f64> = pairs.iter().map(|p| p.delta * p.delta.transpose()).sum();
        let pair_scatter_max = SymEigen3::new(&scatter).max().max(0.0);
        Ok(ArrayGeometry { sensors, pairs, speed_of_sound, pair_scatter_max })
    }

    /// `m` sensors drawn uniformly inside a ball of `radius` meters.
    pub fn random_ball(m: usize, radius: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sensors = (0..m)
            .map(|_| loop {
                let v = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if v.norm_squared() <= 1.0 {
                    break v * radius;
                }
            })
            .collect();
        Self::new(sensors, DEFAULT_SPEED_OF_SOUND)
    }

    /// Twelve sensors in a 10 cm ball, the default simulation array.
    pub fn default_array() -> Self {
        Self::random_ball(12, 0.1, DEFAULT_ARRAY_SEED).expect("default geometry is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GeometryFile = serde_json::from_str(text)?;
        Self::new(file.sensors.iter().map(|s| Vector3::new(s[0], s[1], s[2])).collect(), file.speed_of_sound)
    }

    pub fn to_json(&self) -> String {
        let file = GeometryFile {
            speed_of_sound: self.speed_of_sound,
            sensors: self.sensors.iter().map(|d| [d.x, d.y, d.z]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("geometry serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn sensors(&self) -> &[Vector3<f64>] {
        &self.sensors
    }

    pub fn pairs(&self) -> &[SensorPair] {
        &self.pairs
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    /// `λ_max(Σ_p Δ_p Δ_pᵀ)`, fixed for the geometry.
    pub fn pair_scatter_max_eigenvalue(&self) -> f64 {
        self.pair_scatter_max
    }

    /// Applies a rotation to every sensor.
    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Result<Self> {
        Self::new(self.sensors.iter().map(|d| rotation * d).collect(), self.speed_of_sound)
    }
}

/// Plane-wave array response `M^{-1/2} exp(j ω d_mᵀ q)`.
pub fn steering_vector(geometry: &ArrayGeometry, wavenumber: f64, q: &DoaVector) -> DVector<Complex64> {
    let scale = 1.0 / (geometry.num_sensors() as f64).sqrt();
    DVector::from_iterator(
        geometry.num_sensors(),
        geometry.sensors().iter().map(|d| Complex64::from_polar(scale, wavenumber * d.dot(q.as_vector()))),
    )
}

/// Directions on the sphere with a symmetric neighborhood graph.
#[derive(Debug, Clone)]
pub struct SphericalGrid {
    points: Vec<DoaVector>,
    neighbors: Vec<Vec<usize>>,
}

impl SphericalGrid {
    /// Builds the symmetrized `k`-nearest-neighbor graph over `points`.
    pub fn with_neighbors(points: Vec<DoaVector>, k: usize) -> Self {
        let knn = knn_by_z_sweep(&points, k);
        let mut neighbors: Vec<Vec<usize>> = knn.clone();
        for (i, list) in knn.iter().enumerate() {
            for &j in list {
                neighbors[j].push(i);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        SphericalGrid { points, neighbors }
    }

    pub fn points(&self) -> &[DoaVector] {
        &self.points
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One `x,y,z` row per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z\n");
        for q in &self.points {
            let v = q.as_vector();
            out.push_str(&format!("{:?},{:?},{:?}\n", v.x, v.y, v.z));
        }
        out
    }

    /// Reads the format written by [`SphericalGrid::to_csv`].
    pub fn from_csv(text: &str, k: usize) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut points = Vec::new();
        for row in reader.deserialize::<(f64, f64, f64)>() {
            let (x, y, z) = row?;
            points.push(DoaVector::from_xyz(x, y, z)?);
        }
        Ok(Self::with_neighbors(points, k))
    }
}

/// Fibonacci spiral points without a neighbor graph.
pub fn fibonacci_points(count: usize) -> Vec<DoaVector> {
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            DoaVector(Vector3::new(r * phi.cos(), r * phi.sin(), z)).renormalized()
        })
        .collect()
}

pub fn fibonacci_grid(count: usize) -> Result<SphericalGrid> {
    fibonacci_grid_with_neighbors(count, DEFAULT_GRID_NEIGHBORS)
}

pub fn fibonacci_grid_with_neighbors(count: usize, k: usize) -> Result<SphericalGrid> {
    if count < 4 {
        return Err(Error::invalid(format!("grid needs at least 4 points, got {count}")));
    }
    if k == 0 {
        return Err(Error::invalid("neighbor count must be positive"));
    }
    Ok(SphericalGrid::with_neighbors(fibonacci_points(count), k.min(count - 1)))
}

/// Exact k-NN by chord distance. Points are visited in z order and the scan
/// stops once the z gap alone exceeds the current k-th best distance.
fn knn_by_z_sweep(points: &[DoaVector], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let k = k.min(n.saturating_sub(1));
    if k == 0 {
        return vec![Vec::new(); n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].0.z.total_cmp(&points[b].0.z));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }

    let mut out = Vec::with_capacity(n);
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for i in 0..n {
        best.clear();
        let p = points[i].0;
        let consider = |j: usize, best: &mut Vec<(f64, usize)>| {
            let d2 = (points[j].0 - p).norm_squared();
            if best.len() < k || d2 < best[k - 1].0 {
                let pos = best.partition_point(|&(d, idx)| (d, idx) < (d2, j));
                best.insert(pos, (d2, j));
                best.truncate(k);
            }
        };
        let r0 = rank[i];
        let (mut lo, mut hi) = (r0, r0 + 1);
        loop {
            let bound = if best.len() < k { f64::INFINITY } else { best[k - 1].0 };
            let gap_lo = if lo > 0 { (p.z - points[order[lo - 1]].0.z).powi(2) } else { f64::INFINITY };
            let gap_hi = if hi < n { (points[order[hi]].0.z - p.z).powi(2) } else { f64::INFINITY };
            if gap_lo.min(gap_hi) > bound || (lo == 0 && hi == n) {
                break;
            }
            if gap_lo <= gap_hi {
                lo -= 1;
                consider(order[lo], &mut best);
            } else {
                consider(order[hi], &mut best);
                hi += 1;
            }
        }
        out.push(best.iter().map(|&(_, j)| j).collect());
    }
    out
}
