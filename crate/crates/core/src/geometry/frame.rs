use std::cmp::Ordering;

use nalgebra::SymmetricEigen;

use super::{mean, orthogonality_error, GeometryError, Mat3, PointCloud, Vec3};

/// Eigenvalue gap and third-moment magnitude below which the principal-axis
/// construction is considered ambiguous.
const SPECTRAL_TOL: f64 = 1e-9;
/// Resolution of the projection multisets used to break ambiguous signs.
const TIEBREAK_SCALE: f64 = 1e6;

/// Orientation plus geometric center of a point cloud.
///
/// Columns of `rotation` are the frame axes. `determinate` is false when the
/// construction had to fall back to a choice that is not equivariant (single
/// points, tied eigenvalues, or reflection-symmetric projections), in which
/// case only the center is guaranteed to transform with the cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    rotation: Mat3,
    center: Vec3,
    determinate: bool,
}

impl Frame {
    pub fn new(rotation: Mat3, center: Vec3, determinate: bool) -> Result<Self, GeometryError> {
        let dev = orthogonality_error(&rotation);
        if dev > 1e-6 {
            return Err(GeometryError::NotOrthogonal(dev));
        }
        Ok(Self {
            rotation,
            center,
            determinate,
        })
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn center(&self) -> &Vec3 {
        &self.center
    }

    pub fn is_determinate(&self) -> bool {
        self.determinate
    }

    /// `selfᵀ · other`, the orientation of `other` expressed in this frame.
    pub fn relative_to(&self, other: &Frame) -> Mat3 {
        self.rotation.transpose() * other.rotation
    }
}

/// Equivariant frame of a point cloud.
///
/// The center is the centroid. The axes are the eigenvectors of the centered
/// covariance in descending eigenvalue order, each oriented so the third
/// central moment of the projections along it is positive. Every axis is
/// signed independently, so the construction commutes with reflections as well
/// as rotations and `det(rotation)` may be -1.
pub fn compute_frame(cloud: &PointCloud) -> Frame {
    frame_of_points(cloud.points())
}

pub(crate) fn frame_of_points(points: &[Vec3]) -> Frame {
    let center = mean(points);
    if points.len() == 1 {
        return Frame {
            rotation: Mat3::identity(),
            center,
            determinate: false,
        };
    }
    let n = points.len() as f64;
    let centered: Vec<Vec3> = points.iter().map(|p| p - center).collect();
    let cov = centered.iter().fold(Mat3::zeros(), |acc, d| acc + d * d.transpose()) / n;
    let eig = SymmetricEigen::new(cov);

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let tied = values.windows(2).any(|w| (w[0] - w[1]).abs() <= SPECTRAL_TOL);

    let mut determinate = !tied;
    let mut axes: Vec<(Vec3, Vec<i64>)> = Vec::with_capacity(3);
    for &k in &order {
        let axis: Vec3 = eig.eigenvectors.column(k).into_owned();
        let (axis, resolved) = orient_axis(axis, &centered);
        determinate &= resolved;
        let key = projection_key(&axis, &centered);
        axes.push((axis, key));
    }

    if tied {
        // Within a degenerate eigenspace the solver's basis is arbitrary;
        // order tied axes by their projection multisets so the result is at
        // least reproducible.
        let mut start = 0;
        while start < 3 {
            let mut end = start + 1;
            while end < 3 && (values[end - 1] - values[end]).abs() <= SPECTRAL_TOL {
                end += 1;
            }
            axes[start..end].sort_by(|a, b| b.1.cmp(&a.1));
            start = end;
        }
    }

    let rotation = Mat3::from_columns(&[axes[0].0, axes[1].0, axes[2].0]);
    Frame {
        rotation,
        center,
        determinate,
    }
}

/// Signs `axis` by the third moment of the projections, falling back to a
/// lexicographic comparison of the quantized projection multisets. Returns
/// whether the sign was determined by the data.
fn orient_axis(axis: Vec3, centered: &[Vec3]) -> (Vec3, bool) {
    let n = centered.len() as f64;
    let moment: f64 = centered.iter().map(|d| axis.dot(d).powi(3)).sum::<f64>() / n;
    if moment.abs() >= SPECTRAL_TOL {
        return (if moment > 0.0 { axis } else { -axis }, true);
    }
    let forward = projection_key(&axis, centered);
    let backward = projection_key(&(-axis), centered);
    match forward.cmp(&backward) {
        Ordering::Greater => (axis, true),
        Ordering::Less => (-axis, true),
        Ordering::Equal => {
            let first = axis.iter().copied().find(|c| c.abs() > SPECTRAL_TOL).unwrap_or(1.0);
            (if first > 0.0 { axis } else { -axis }, false)
        }
    }
}

fn projection_key(axis: &Vec3, centered: &[Vec3]) -> Vec<i64> {
    let mut key: Vec<i64> = centered
        .iter()
        .map(|d| (axis.dot(d) * TIEBREAK_SCALE).round_ties_even() as i64)
        .collect();
    key.sort_unstable();
    key
}
