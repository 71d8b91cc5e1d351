//! Small fixed-size vector and matrix helpers used throughout the crate.
//!
//! Spatial (chart) indices run over `{0,1}`, space-time indices over
//! `{0,1,2}` with 0 the time direction. Matrices are stored row-major as
//! nested arrays.

use crate::Scalar;

pub type Vec2<T> = [T; 2];
pub type Vec3<T> = [T; 3];
pub type Mat2<T> = [[T; 2]; 2];
pub type Mat3<T> = [[T; 3]; 3];
/// Rank-3 space-time tensor, e.g. Christoffel symbols `gamma[j][i][k]`.
pub type Ten3<T> = [[[T; 3]; 3]; 3];

#[inline]
pub fn dot3<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm3<T: Scalar>(a: &Vec3<T>) -> T {
    dot3(a, a).sqrt()
}

#[inline]
pub fn sub3<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale3<T: Scalar>(s: T, a: &Vec3<T>) -> Vec3<T> {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn add3<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn mat2_det<T: Scalar>(m: &Mat2<T>) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Inverse of a 2x2 matrix; the caller guarantees a nonzero determinant.
#[inline]
pub fn mat2_inv<T: Scalar>(m: &Mat2<T>) -> Mat2<T> {
    let d = mat2_det(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

#[inline]
pub fn mat2_mul<T: Scalar>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let mut out = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

#[inline]
pub fn mat2_transpose<T: Scalar>(m: &Mat2<T>) -> Mat2<T> {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

/// `a * g * a^T` for 2x2 matrices.
#[inline]
pub fn congruence2<T: Scalar>(a: &Mat2<T>, g: &Mat2<T>) -> Mat2<T> {
    mat2_mul(&mat2_mul(a, g), &mat2_transpose(a))
}

pub fn mat2_max_abs_diff<T: Scalar>(a: &Mat2<T>, b: &Mat2<T>) -> T {
    let mut m = T::zero();
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

pub const IDENT2_F64: Mat2<f64> = [[1.0, 0.0], [0.0, 1.0]];

pub fn ident2<T: Scalar>() -> Mat2<T> {
    [[T::one(), T::zero()], [T::zero(), T::one()]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = [[2.0, 1.0], [1.0, 2.0]];
        let inv = mat2_inv(&m);
        let id = mat2_mul(&m, &inv);
        assert!(mat2_max_abs_diff(&id, &ident2()) < 1e-14);
    }

    #[test]
    fn congruence_of_identity() {
        let a = [[0.5, -0.25], [0.0, 2.0]];
        let g = ident2::<f64>();
        let c = congruence2(&a, &g);
        let expect = mat2_mul(&a, &mat2_transpose(&a));
        assert!(mat2_max_abs_diff(&c, &expect) < 1e-15);
    }
}
