//! Rotation representations, SO(3) distances and similarity (Procrustes)
//! alignment of 3D point sets.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Orthogonality / determinant tolerance for rotations built internally.
pub const ROTATION_TOLERANCE: f64 = 1e-9;
/// Orthogonality / determinant tolerance for rotations read from files.
pub const EXTERNAL_ROTATION_TOLERANCE: f64 = 1e-6;

const TAYLOR_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("matrix is not a rotation (|RᵀR - I| = {orthogonality:.3e}, det = {det:.6})")]
    NotARotation { orthogonality: f64, det: f64 },
    #[error("point sets differ in length ({source_len} vs {target_len})")]
    LengthMismatch { source_len: usize, target_len: usize },
    #[error("need at least 3 points for alignment, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate point configuration: {0}")]
    Degenerate(&'static str),
}

/// Rotation as a 3-vector whose direction is the axis and whose norm is the
/// angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle(pub Vector3<f64>);

impl AxisAngle {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }

    /// Wraps the angle into `[0, π]`, flipping the axis when needed.
    pub fn canonical(&self) -> Self {
        let angle = self.angle();
        if angle <= PI || !angle.is_finite() {
            return *self;
        }
        let axis = self.0 / angle;
        let wrapped = angle.rem_euclid(2.0 * PI);
        if wrapped <= PI {
            Self(axis * wrapped)
        } else {
            Self(-axis * (2.0 * PI - wrapped))
        }
    }

    /// True when both vectors encode the same rotation.
    pub fn equivalent(&self, other: &AxisAngle, tol: f64) -> bool {
        geodesic_distance(&axis_angle_to_matrix(self), &axis_angle_to_matrix(other)) <= tol
    }
}

/// A proper rotation matrix (orthogonal, det = +1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix3<f64>", into = "Matrix3<f64>")]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates `m` at the external-input tolerance.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        Self::from_matrix_with_tolerance(m, EXTERNAL_ROTATION_TOLERANCE)
    }

    pub fn from_matrix_with_tolerance(m: Matrix3<f64>, tol: f64) -> Result<Self, GeometryError> {
        let orthogonality = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !(orthogonality <= tol) || !((det - 1.0).abs() <= tol) {
            return Err(GeometryError::NotARotation { orthogonality, det });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix the caller knows is a rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn rot_x(angle: f64) -> Self {
        axis_angle_to_matrix(&AxisAngle::new(angle, 0.0, 0.0))
    }

    pub fn rot_y(angle: f64) -> Self {
        axis_angle_to_matrix(&AxisAngle::new(0.0, angle, 0.0))
    }

    pub fn rot_z(angle: f64) -> Self {
        axis_angle_to_matrix(&AxisAngle::new(0.0, 0.0, angle))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Re-orthonormalizes via SVD; used after accumulating many products.
    pub fn orthonormalized(&self) -> Self {
        let svd = self.0.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            let k = argmin(&svd.singular_values);
            u.column_mut(k).neg_mut();
            r = u * v_t;
        }
        Self(r)
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl From<RotationMatrix> for Matrix3<f64> {
    fn from(r: RotationMatrix) -> Self {
        r.0
    }
}

impl TryFrom<Matrix3<f64>> for RotationMatrix {
    type Error = GeometryError;

    fn try_from(m: Matrix3<f64>) -> Result<Self, Self::Error> {
        Self::from_matrix(m)
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

/// Rodrigues' formula. Below an angle of 1e-8 the second-order Taylor
/// expansion is used.
pub fn axis_angle_to_matrix(aa: &AxisAngle) -> RotationMatrix {
    let v = aa.0;
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let k = skew(&v);
    let (a, b) = if theta < TAYLOR_THRESHOLD {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    RotationMatrix(Matrix3::identity() + k * a + k * k * b)
}

/// Inverse of [`axis_angle_to_matrix`], returning an angle in `[0, π]`.
pub fn matrix_to_axis_angle(r: &RotationMatrix) -> AxisAngle {
    let m = r.matrix();
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos.acos();
    let w = vee(m); // axis * sin(theta)
    if theta < TAYLOR_THRESHOLD {
        return AxisAngle(w);
    }
    if theta < PI - 1e-6 {
        return AxisAngle(w * (theta / theta.sin()));
    }
    // Near π, sin(θ) carries no axis information; recover aaᵀ from the
    // symmetric part instead.
    let sym = (m + m.transpose()) * 0.5;
    let outer = (sym - Matrix3::identity() * cos) / (1.0 - cos);
    let k = (0..3)
        .max_by(|&i, &j| outer[(i, i)].total_cmp(&outer[(j, j)]))
        .unwrap_or(0);
    let mut axis: Vector3<f64> = outer.column(k).into_owned();
    axis /= axis.norm();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    AxisAngle(axis * theta)
}

/// Angle of the relative rotation `r1ᵀ·r2`, in `[0, π]`.
pub fn geodesic_distance(r1: &RotationMatrix, r2: &RotationMatrix) -> f64 {
    let rel = r1.matrix().transpose() * r2.matrix();
    ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
}

/// Left Jacobian of SO(3) at `v`: `∂R/∂vᵢ · Rᵀ = [J(v) eᵢ]×`.
pub fn left_jacobian(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let k = skew(v);
    let (a, b) = if theta < 1e-4 {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Matrix3::identity() + k * a + k * k * b
}

/// `y = s·R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: RotationMatrix,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: RotationMatrix::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) * self.scale + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rot_t = self.rotation.transpose();
        Self {
            scale: 1.0 / self.scale,
            rotation: rot_t,
            translation: -rot_t.rotate(&self.translation) / self.scale,
        }
    }

    /// Sum of squared residuals `Σ‖s·R·xᵢ + t − yᵢ‖²`.
    pub fn sum_squared_residual(&self, source: &[Vector3<f64>], target: &[Vector3<f64>]) -> f64 {
        source
            .iter()
            .zip(target)
            .map(|(x, y)| (self.apply(x) - y).norm_squared())
            .sum()
    }
}

pub fn apply_similarity(t: &SimilarityTransform, points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    points.iter().map(|p| t.apply(p)).collect()
}

fn argmin(v: &Vector3<f64>) -> usize {
    (0..3).min_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap_or(2)
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

fn check_pair(source: &[Vector3<f64>], target: &[Vector3<f64>]) -> Result<(), GeometryError> {
    if source.len() != target.len() {
        return Err(GeometryError::LengthMismatch {
            source_len: source.len(),
            target_len: target.len(),
        });
    }
    if source.len() < 3 {
        return Err(GeometryError::TooFewPoints(source.len()));
    }
    Ok(())
}

struct Centered {
    source_mean: Vector3<f64>,
    target_mean: Vector3<f64>,
    /// Σ (yᵢ − ȳ)(xᵢ − x̄)ᵀ / n
    cross: Matrix3<f64>,
    /// Σ ‖xᵢ − x̄‖² / n
    source_var: f64,
    source_cov: Matrix3<f64>,
}

fn center(source: &[Vector3<f64>], target: &[Vector3<f64>]) -> Centered {
    let n = source.len() as f64;
    let source_mean = centroid(source);
    let target_mean = centroid(target);
    let mut cross = Matrix3::zeros();
    let mut source_cov = Matrix3::zeros();
    for (x, y) in source.iter().zip(target) {
        let x0 = x - source_mean;
        let y0 = y - target_mean;
        cross += y0 * x0.transpose();
        source_cov += x0 * x0.transpose();
    }
    cross /= n;
    source_cov /= n;
    Centered {
        source_mean,
        target_mean,
        cross,
        source_var: source_cov.trace(),
        source_cov,
    }
}

/// Closest rotation to the cross-covariance with the reflection guard
/// applied; returns the rotation and `trace(D·S)`.
fn kabsch_rotation(cross: &Matrix3<f64>) -> (RotationMatrix, f64) {
    let svd = cross.svd(true, true);
    let mut u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut trace = svd.singular_values.sum();
    if (u * v_t).determinant() < 0.0 {
        let k = argmin(&svd.singular_values);
        u.column_mut(k).neg_mut();
        trace -= 2.0 * svd.singular_values[k];
    }
    (RotationMatrix(u * v_t), trace)
}

/// Least-squares similarity transform mapping `source` onto `target`.
///
/// Closed form via SVD of the cross-covariance, with the smallest singular
/// direction flipped when the unconstrained solution is a reflection.
/// Coincident or collinear source points, or a coincident target, are
/// reported as [`GeometryError::Degenerate`].
pub fn procrustes_align(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
) -> Result<SimilarityTransform, GeometryError> {
    check_pair(source, target)?;
    let c = center(source, target);
    if !(c.source_var > 1e-18) {
        return Err(GeometryError::Degenerate("source points coincide"));
    }
    let spread = c.source_cov.symmetric_eigenvalues();
    let mut spread: Vec<f64> = spread.iter().copied().collect();
    spread.sort_by(|a, b| b.total_cmp(a));
    if spread[1] <= 1e-12 * spread[0] {
        return Err(GeometryError::Degenerate("source points are collinear"));
    }
    let (rotation, trace) = kabsch_rotation(&c.cross);
    let scale = trace / c.source_var;
    if !(scale > 0.0) {
        return Err(GeometryError::Degenerate("target points coincide"));
    }
    let translation = c.target_mean - rotation.rotate(&c.source_mean) * scale;
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

/// Rotation-only alignment about the centroids with unit scale. Always
/// defined for ≥ 3 points, including collinear sets where the rotation
/// about the common line is arbitrary.
pub fn rigid_align(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
) -> Result<SimilarityTransform, GeometryError> {
    check_pair(source, target)?;
    let c = center(source, target);
    let (rotation, _) = kabsch_rotation(&c.cross);
    let translation = c.target_mean - rotation.rotate(&c.source_mean);
    Ok(SimilarityTransform {
        scale: 1.0,
        rotation,
        translation,
    })
}
