//! 3-D primitives shared by every stage of the pipeline: point clouds,
//! rigid motions, spherical projection, the sphere convex hull, equivariant
//! frames and a brute-force congruence test.

mod congruence;
mod frame;
mod hull;

pub use congruence::{congruent, kabsch, Superposition};
pub(crate) use frame::frame_of_points;
pub use frame::{compute_frame, Frame};
pub use hull::convex_hull_sphere;

use nalgebra::{Matrix3, Vector3};
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Cartesian coordinate in Ångström.
pub type Vec3 = Vector3<f64>;
/// 3x3 real matrix.
pub type Mat3 = Matrix3<f64>;

/// Distance below which two points are considered coincident.
pub const COINCIDENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("points {0} and {1} coincide")]
    CoincidentPoints(usize, usize),
    #[error("point {0} coincides with the projection center")]
    DegeneratePoint(usize),
    #[error("points {0} and {1} project to the same sphere direction")]
    DuplicateDirection(usize, usize),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("matrix is not orthogonal (max deviation {0:e})")]
    NotOrthogonal(f64),
}

/// Element of E(3): `x -> rotation * x + translation`, where `rotation` may
/// be a proper rotation or a reflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidMotion {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        let dev = orthogonality_error(&rotation);
        if dev > 1e-9 {
            return Err(GeometryError::NotOrthogonal(dev));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn translation(t: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: t,
        }
    }

    /// Rotation by `angle` radians about `axis` (right-hand rule).
    pub fn rotation_about(axis: Vec3, angle: f64) -> Self {
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Self {
            rotation: *rot.matrix(),
            translation: Vec3::zeros(),
        }
    }

    /// Uniformly random orthogonal matrix (det +1 or -1 with equal
    /// probability) and a translation with components in `[-max_shift, max_shift]`.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, max_shift: f64) -> Self {
        let mut m = random_rotation(rng);
        if rng.random_bool(0.5) {
            m.set_column(2, &(-m.column(2)));
        }
        let t = Vec3::new(
            rng.random_range(-max_shift..=max_shift),
            rng.random_range(-max_shift..=max_shift),
            rng.random_range(-max_shift..=max_shift),
        );
        Self {
            rotation: m,
            translation: t,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation_vector(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }

    pub fn is_reflection(&self) -> bool {
        self.rotation.determinant() < 0.0
    }
}

/// Uniform random proper rotation from a normalized Gaussian quaternion.
pub fn random_rotation<R: rand::Rng + ?Sized>(rng: &mut R) -> Mat3 {
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    let q = nalgebra::Quaternion::new(draw(), draw(), draw(), draw());
    let uq = nalgebra::UnitQuaternion::from_quaternion(q);
    *uq.to_rotation_matrix().matrix()
}

pub(crate) fn orthogonality_error(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).amax()
}

/// Ordered set of points with one opaque integer feature per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    features: Vec<u64>,
}

impl PointCloud {
    /// Builds a cloud, rejecting empty input, non-finite coordinates and
    /// coincident points.
    pub fn new(points: Vec<Vec3>, features: Vec<u64>) -> Result<Self, GeometryError> {
        assert_eq!(points.len(), features.len(), "one feature per point");
        if points.is_empty() {
            return Err(GeometryError::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite(i));
        }
        if let Some((a, b)) = find_close_pair(&points, COINCIDENCE_TOL) {
            return Err(GeometryError::CoincidentPoints(a, b));
        }
        Ok(Self { points, features })
    }

    /// Cloud with all features set to zero.
    pub fn from_points(points: Vec<Vec3>) -> Result<Self, GeometryError> {
        let features = vec![0; points.len()];
        Self::new(points, features)
    }

    pub(crate) fn new_unchecked(points: Vec<Vec3>, features: Vec<u64>) -> Self {
        Self { points, features }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn features(&self) -> &[u64] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn centroid(cloud: &PointCloud) -> Vec3 {
    mean(cloud.points())
}

pub fn mean(points: &[Vec3]) -> Vec3 {
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    sum / points.len() as f64
}

/// Maps every point to `(x - center) / |x - center|`.
pub fn project_to_sphere(cloud: &PointCloud, center: &Vec3) -> Result<PointCloud, GeometryError> {
    let projected = project_points(cloud.points(), center)?;
    Ok(PointCloud::new_unchecked(projected, cloud.features().to_vec()))
}

pub(crate) fn project_points(points: &[Vec3], center: &Vec3) -> Result<Vec<Vec3>, GeometryError> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = p - center;
            let norm = d.norm();
            if norm <= COINCIDENCE_TOL {
                Err(GeometryError::DegeneratePoint(i))
            } else {
                Ok(d / norm)
            }
        })
        .collect()
}

pub fn apply_rigid(motion: &RigidMotion, cloud: &PointCloud) -> PointCloud {
    let points = cloud.points().iter().map(|p| motion.apply(p)).collect();
    PointCloud::new_unchecked(points, cloud.features().to_vec())
}

/// First pair (in index order of the sweep) closer than `tol`, if any.
pub(crate) fn find_close_pair(points: &[Vec3], tol: f64) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x).then(a.cmp(&b)));
    for (k, &a) in order.iter().enumerate() {
        for &b in &order[k + 1..] {
            if points[b].x - points[a].x > tol {
                break;
            }
            if (points[a] - points[b]).norm() <= tol {
                return Some((a.min(b), a.max(b)));
            }
        }
    }
    None
}
