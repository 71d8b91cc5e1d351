//! Flow-field representations, discrete energy and comparison metrics.
//!
//! A solution lives in frame components `u^j`; the coordinate (pullback)
//! view is `u~^l = a^l_m u^m` and the ambient view is the pushforward
//! `u~^l d_l f` on the embedded surface.

use crate::assembly::{unknown_index, CoefficientFields, LinearSystem};
use crate::error::{Error, Result};
use crate::geometry::{ConnectionField, FrameField, GeometryField, SurfaceGrid};
use crate::grid::GridDims;
use crate::imaging::ImageDerivatives;
use crate::Scalar;

#[derive(Clone, Debug)]
pub struct FlowField<T> {
    pub dims: GridDims,
    /// Components w.r.t. the orthonormal frame.
    pub u_frame: Vec<[T; 2]>,
    /// Components w.r.t. the coordinate basis (pullback flow).
    pub u_coord: Vec<[T; 2]>,
    /// Pushforward to the ambient space.
    pub u_ambient: Vec<[T; 3]>,
}

/// Reinterprets an interleaved solver vector as per-point frame components.
pub fn frame_components_from_vector<T: Scalar>(dims: &GridDims, x: &[T]) -> Vec<[T; 2]> {
    assert_eq!(x.len(), 2 * dims.len());
    (0..dims.len()).map(|p| [x[2 * p], x[2 * p + 1]]).collect()
}

/// Fills the coordinate and ambient views from frame components.
pub fn expand_views<T: Scalar>(
    u_frame: &[[T; 2]],
    frame: &FrameField<T>,
    surface: &SurfaceGrid<T>,
) -> Result<FlowField<T>> {
    let dims = frame.dims;
    if u_frame.len() != dims.len() || surface.dims != dims {
        return Err(Error::shape_mismatch(
            format!("{} flow points", dims.len()),
            format!("{} (surface {:?})", u_frame.len(), surface.dims),
        ));
    }
    let mut u_coord = Vec::with_capacity(dims.len());
    let mut u_ambient = Vec::with_capacity(dims.len());
    for p in 0..dims.len() {
        let a = &frame.a[p];
        let u = &u_frame[p];
        let coord = [
            a[0][0] * u[0] + a[1][0] * u[1],
            a[0][1] * u[0] + a[1][1] * u[1],
        ];
        let d1 = &surface.df[p][1];
        let d2 = &surface.df[p][2];
        u_coord.push(coord);
        u_ambient.push([
            coord[0] * d1[0] + coord[1] * d2[0],
            coord[0] * d1[1] + coord[1] * d2[1],
            coord[0] * d1[2] + coord[1] * d2[2],
        ]);
    }
    Ok(FlowField { dims, u_frame: u_frame.to_vec(), u_coord, u_ambient })
}

/// Recovers frame components from a stored coordinate (pullback) flow.
pub fn frame_from_coord<T: Scalar>(u_coord: &[[T; 2]], frame: &FrameField<T>) -> Result<Vec<[T; 2]>> {
    if u_coord.len() != frame.dims.len() {
        return Err(Error::shape_mismatch(
            format!("{} flow points", frame.dims.len()),
            format!("{}", u_coord.len()),
        ));
    }
    Ok(u_coord
        .iter()
        .zip(&frame.b)
        .map(|(u, b)| {
            [
                b[0][0] * u[0] + b[1][0] * u[1],
                b[0][1] * u[0] + b[1][1] * u[1],
            ]
        })
        .collect())
}

/// Quadrature weight per grid node: `alpha vol(g) h_t h_1 h_2`
/// (the product volume form evaluated on the rectangle rule).
pub fn quadrature_weights<T: Scalar>(geom: &GeometryField<T>) -> Vec<T> {
    let cell = geom.alpha * geom.steps.h_t * geom.steps.h_1 * geom.steps.h_2;
    geom.vol.iter().map(|&v| v * cell).collect()
}

#[derive(Clone, Copy, Debug)]
pub struct EnergyBreakdown<T> {
    pub total: T,
    pub similarity: T,
    pub regularity: T,
}

/// Discrete energy of a flow on the rectangle rule.
///
/// The similarity term sums `(d_t I + d_l I u~^l)^2`; the regularity term
/// sums `beta |u|^2` plus `gamma` times the squared covariant derivative
/// along each frame direction, with the flow derivatives taken by forward
/// differences (links). A frame direction is skipped at points whose forward
/// links leave a non-periodic axis, so with Dirichlet data the flat static
/// energy is exactly the quadratic form of the assembled operator.
pub fn discrete_energy<T: Scalar>(
    u_frame: &[[T; 2]],
    imderiv: &ImageDerivatives<T>,
    geom: &GeometryField<T>,
    frame: &FrameField<T>,
    conn: &ConnectionField<T>,
    beta: T,
    gamma: T,
) -> Result<EnergyBreakdown<T>> {
    let dims = geom.dims;
    if u_frame.len() != dims.len() || imderiv.dims != dims || conn.dims != dims {
        return Err(Error::shape_mismatch(
            format!("{} energy points", dims.len()),
            format!("{}", u_frame.len()),
        ));
    }
    let weights = quadrature_weights(geom);
    let steps = [geom.steps.h_t, geom.steps.h_1, geom.steps.h_2];
    let wrap3 = [false, geom.wrap[0], geom.wrap[1]];
    let mut similarity = T::zero();
    let mut regularity = T::zero();
    for t in 0..dims.nt {
        for i1 in 0..dims.n1 {
            for i2 in 0..dims.n2 {
                let p = dims.index(t, i1, i2);
                let w = weights[p];
                let a = &frame.a[p];
                let u = &u_frame[p];
                let coord = [
                    a[0][0] * u[0] + a[1][0] * u[1],
                    a[0][1] * u[0] + a[1][1] * u[1],
                ];
                let defect =
                    imderiv.dt[p] + imderiv.d1[p] * coord[0] + imderiv.d2[p] * coord[1];
                similarity = similarity + w * defect * defect;

                let mut reg = beta * (u[0] * u[0] + u[1] * u[1]);
                // covariant derivative along each frame direction
                for i in 0..3 {
                    // forward links required by this direction
                    let mut du = [[T::zero(); 3]; 2]; // du[k][axis] = D+_axis u^k
                    let mut ok = true;
                    let mut need = [false; 3];
                    if i == 0 {
                        need[0] = true;
                    } else {
                        for l in 0..2 {
                            if a[i - 1][l] != T::zero() {
                                need[1 + l] = true;
                            }
                        }
                    }
                    for axis in 0..3 {
                        if !need[axis] {
                            continue;
                        }
                        match dims.neighbor(t, i1, i2, axis, 1, wrap3[axis]) {
                            Some(q) => {
                                for k in 0..2 {
                                    du[k][axis] =
                                        (u_frame[q][k] - u[k]) / steps[axis];
                                }
                            }
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let om = &conn.omega[p];
                    for j in 0..3 {
                        // abar^l_i D+_l u^j + u^k omega^j_ik
                        let mut cov = T::zero();
                        if j > 0 {
                            if i == 0 {
                                cov = cov + du[j - 1][0] / geom.alpha;
                            } else {
                                for l in 0..2 {
                                    cov = cov + a[i - 1][l] * du[j - 1][1 + l];
                                }
                            }
                        }
                        for k in 0..2 {
                            cov = cov + u[k] * om[j][i][1 + k];
                        }
                        reg = reg + gamma * cov * cov;
                    }
                }
                regularity = regularity + w * reg;
            }
        }
    }
    Ok(EnergyBreakdown {
        total: similarity + regularity,
        similarity,
        regularity,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct GradientCheckSample {
    pub eps: f64,
    /// Central finite difference of the discrete energy.
    pub directional_derivative: f64,
    /// `<2 (M u + forcing), du>` in the volume-weighted inner product.
    pub operator_pairing: f64,
    pub rel_gap: f64,
}

/// Compares the directional derivative of the discrete energy against the
/// residual pairing of the assembled operator, for a perturbation supported
/// away from all boundary rows.
#[allow(clippy::too_many_arguments)]
pub fn gradient_consistency_check<T: Scalar>(
    u_frame: &[[T; 2]],
    delta: &[[T; 2]],
    eps_list: &[f64],
    system: &LinearSystem<T>,
    coeffs: &CoefficientFields<T>,
    imderiv: &ImageDerivatives<T>,
    geom: &GeometryField<T>,
    frame: &FrameField<T>,
    conn: &ConnectionField<T>,
) -> Result<Vec<GradientCheckSample>> {
    let dims = geom.dims;
    if u_frame.len() != dims.len() || delta.len() != dims.len() {
        return Err(Error::shape_mismatch(
            format!("{} flow points", dims.len()),
            format!("{} / {}", u_frame.len(), delta.len()),
        ));
    }
    let weights = quadrature_weights(geom);
    // residual pairing
    let mut x = vec![T::zero(); 2 * dims.len()];
    for p in 0..dims.len() {
        x[2 * p] = u_frame[p][0];
        x[2 * p + 1] = u_frame[p][1];
    }
    let residual = crate::assembly::operator_residual(system, coeffs, &x);
    let mut pairing = T::zero();
    for p in 0..dims.len() {
        for comp in 0..2 {
            let r = residual[unknown_index(&dims, p, comp)];
            pairing = pairing + T::two() * r * delta[p][comp] * weights[p];
        }
    }
    let pairing = pairing.as_f64();

    let energy_of = |field: &[[T; 2]]| -> Result<f64> {
        Ok(discrete_energy(field, imderiv, geom, frame, conn, coeffs.beta, coeffs.gamma)?
            .total
            .as_f64())
    };
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let e = T::lit(eps);
        let mut up = u_frame.to_vec();
        let mut dn = u_frame.to_vec();
        for p in 0..dims.len() {
            for c in 0..2 {
                up[p][c] = up[p][c] + e * delta[p][c];
                dn[p][c] = dn[p][c] - e * delta[p][c];
            }
        }
        let fd = (energy_of(&up)? - energy_of(&dn)?) / (2.0 * eps);
        let denom = fd.abs().max(pairing.abs()).max(1e-300);
        out.push(GradientCheckSample {
            eps,
            directional_derivative: fd,
            operator_pairing: pairing,
            rel_gap: (fd - pairing).abs() / denom,
        });
    }
    Ok(out)
}

/// Pointwise angular error between two flows: the angle between the
/// time-augmented vectors `(1, u)` and `(1, v)`. Works for the pullback
/// (`K = 2`) and ambient (`K = 3`) views.
pub fn angular_error<T: Scalar, const K: usize>(u: &[[T; K]], v: &[[T; K]]) -> Result<Vec<T>> {
    if u.len() != v.len() {
        return Err(Error::shape_mismatch(format!("{}", u.len()), format!("{}", v.len())));
    }
    Ok(u.iter()
        .zip(v)
        .map(|(a, b)| {
            let mut dot = T::one();
            let mut na = T::one();
            let mut nb = T::one();
            for k in 0..K {
                dot = dot + a[k] * b[k];
                na = na + a[k] * a[k];
                nb = nb + b[k] * b[k];
            }
            let c = dot / (na.sqrt() * nb.sqrt());
            c.max(-T::one()).min(T::one()).acos()
        })
        .collect())
}

/// Pointwise Euclidean norm of the flow difference.
pub fn endpoint_error<T: Scalar, const K: usize>(u: &[[T; K]], v: &[[T; K]]) -> Result<Vec<T>> {
    if u.len() != v.len() {
        return Err(Error::shape_mismatch(format!("{}", u.len()), format!("{}", v.len())));
    }
    Ok(u.iter()
        .zip(v)
        .map(|(a, b)| {
            let mut s = T::zero();
            for k in 0..K {
                let d = a[k] - b[k];
                s = s + d * d;
            }
            s.sqrt()
        })
        .collect())
}
