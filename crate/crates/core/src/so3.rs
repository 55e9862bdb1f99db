//! Small helpers on SO(3) and its Lie algebra.

use nalgebra::{Matrix3, Rotation3, Vector3};

/// Skew matrix `â` with `â·b = a×b`.
pub fn hat(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Inverse of [`hat`] applied to the skew part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rodrigues exponential of `ŵ`.
pub fn exp(w: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*w).into_inner()
}

/// Principal logarithm, returned as a rotation vector.
pub fn log(r: &Matrix3<f64>) -> Vector3<f64> {
    Rotation3::from_matrix_unchecked(*r).scaled_axis()
}

/// Inverse of the left-trivialised differential of `exp`, for `Ṙ = R·Ω̂`
/// and `R = R₀·exp(û)`: `u̇ = dexp⁻¹(u)·Ω`.
pub fn dexp_inv(u: &Vector3<f64>, w: &Vector3<f64>) -> Vector3<f64> {
    let theta = u.norm();
    let uxw = u.cross(w);
    let uxuxw = u.cross(&uxw);
    if theta < 1e-4 {
        // series through theta^4
        let c = 1.0 / 12.0 + theta * theta / 720.0;
        return w + 0.5 * uxw + c * uxuxw;
    }
    let half = 0.5 * theta;
    let c = (1.0 - half / half.tan()) / (theta * theta);
    w + 0.5 * uxw + c * uxuxw
}

/// `‖RᵀR − Id‖_F`, a measure of drift off SO(3).
pub fn orthogonality_defect(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`; the input is normalised.
pub fn from_quaternion(q: [f64; 4]) -> Matrix3<f64> {
    let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
    q.to_rotation_matrix().into_inner()
}
