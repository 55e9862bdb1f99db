use super::DeformationField;
use nalgebra::{Matrix3, Vector3};

/// Number of interior bump fields available to the rectification.
pub const BUMP_LIBRARY_SIZE: usize = 40;

/// Rigid-shell movement fields for the base `ϑ`: on `Σ` they restrict to
/// `eᵢ × (x + ϑ(x))` for `i = 1, 2, 3` and to `e_{i−3}` for `i = 4, 5, 6`.
/// Interior corrections are left to `dynamics::rectify_fields`.
pub fn rigid_shell_basis(base: &DeformationField) -> Vec<DeformationField> {
    let mut out = Vec::with_capacity(6);
    for i in 0..3 {
        out.push(DeformationField::cross_base(Vector3::ith(i, 1.0), base));
    }
    for i in 0..3 {
        out.push(DeformationField::affine(Matrix3::zeros(), Vector3::ith(i, 1.0)));
    }
    out
}

/// Interior bumps `(1 − |x|²)² x^a y^b z^c e_k`, grouped by reflection
/// parity so that each class met by rigid-shell and linear fields has room
/// both to cancel its moments and to keep component restrictions free:
/// six per rotation class, five per translation class plus three quartic
/// ones shared between translation pairs, four diagonal ones.
pub fn bump_library() -> Vec<DeformationField> {
    let mono = |powers: &[(usize, u8)]| {
        let mut e = [0u8; 3];
        for &(axis, p) in powers {
            e[axis] += p;
        }
        e
    };
    let mut out = Vec::with_capacity(BUMP_LIBRARY_SIZE);
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let (j, k) = (j.min(k), j.max(k));
        out.push(DeformationField::bump(mono(&[(k, 1)]), j));
        out.push(DeformationField::bump(mono(&[(j, 1)]), k));
        out.push(DeformationField::bump(mono(&[(j, 2), (k, 1)]), j));
        out.push(DeformationField::bump(mono(&[(j, 1), (k, 2)]), k));
        out.push(DeformationField::bump([1, 1, 1], i));
        out.push(DeformationField::bump(mono(&[(0, 1), (1, 1), (2, 1), (i, 2)]), i));
    }
    for a in 0..3 {
        out.push(DeformationField::bump([0, 0, 0], a));
        for b in (0..3).filter(|&b| b != a) {
            out.push(DeformationField::bump(mono(&[(b, 2)]), a));
            out.push(DeformationField::bump(mono(&[(a, 1), (b, 1)]), b));
        }
    }
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        out.push(DeformationField::bump(mono(&[(a, 3), (b, 1)]), b));
    }
    for a in 0..3 {
        out.push(DeformationField::bump(mono(&[(a, 1)]), a));
    }
    out.push(DeformationField::bump([3, 0, 0], 0));
    debug_assert_eq!(out.len(), BUMP_LIBRARY_SIZE);
    out
}
