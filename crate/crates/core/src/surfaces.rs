//! Builtin analytic moving surfaces with exact derivatives, plus the
//! L2-optimal reparametrization that removes tangential surface motion.

use crate::error::{Error, Result};
use crate::geometry::SurfaceGrid;
use crate::grid::{axis_derivative, GridDims, GridSteps};
use crate::linalg::{dot3, mat2_det, mat2_inv, Vec3};
use crate::Scalar;

/// Grid layout for a generated surface. Grid coordinates are `index * step`;
/// each surface kind maps them affinely onto its natural parameter domain
/// (angles for tori and spheres, plane coordinates for graphs), so the
/// finite-difference steps can be chosen freely (typically 1).
#[derive(Clone, Copy, Debug)]
pub struct GridSpec<T> {
    pub nt: usize,
    pub n1: usize,
    pub n2: usize,
    pub steps: GridSteps<T>,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(nt: usize, n1: usize, n2: usize, steps: GridSteps<T>) -> Self {
        GridSpec { nt, n1, n2, steps }
    }

    /// Steps chosen so grid coordinates coincide with the natural torus
    /// angles (`h_1 = 2 pi / n1`, `h_2 = 2 pi / n2`) and time runs over
    /// `[0, duration]`.
    pub fn natural_torus(nt: usize, n1: usize, n2: usize, duration: f64) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        GridSpec {
            nt,
            n1,
            n2,
            steps: GridSteps::new(
                T::lit(duration / (nt - 1) as f64),
                T::lit(two_pi / n1 as f64),
                T::lit(two_pi / n2 as f64),
            ),
        }
    }

    pub fn dims(&self) -> GridDims {
        GridDims::new(self.nt, self.n1, self.n2)
    }
}

#[derive(Clone, Debug)]
pub enum SurfaceKind<T> {
    /// `f = (x1, x2, 0)`; with `periodic` set both axes wrap (a flat torus).
    FlatPlane { periodic: bool },
    /// Ring torus whose major circle drifts into an ellipse while the tube
    /// grows ripples: tube radius `r(t,x1) = 1 + ripple (t/T) sin(q x1)` and
    /// an additive drift `drift * t/T` on the first ambient coordinate.
    DeformingTorus { big_radius: T, drift: T, ripple: T, ripple_freq: u32 },
    /// Rigidly rotating ring torus: the azimuth advances at `rate` radians
    /// per time unit, so the motion is purely tangential.
    RotatingTorus { big_radius: T, rate: T },
    /// Radius-`radius` sphere in polar coordinates, excluding caps of
    /// `pole_margin` radians around both poles.
    SphereChart { radius: T, pole_margin: T },
    /// Graph `z = A exp(-|x - c - v t|^2 / (2 sigma^2))` of a travelling
    /// Gaussian bump.
    GraphBump { amplitude: T, sigma: T, center: [T; 2], velocity: [T; 2] },
}

#[derive(Clone, Debug)]
pub struct AnalyticSurfaceSpec<T> {
    pub kind: SurfaceKind<T>,
    pub grid: GridSpec<T>,
}

struct Jet<T> {
    f: Vec3<T>,
    /// d/dt, d/dx1, d/dx2 (grid coordinates)
    df: [Vec3<T>; 3],
    /// d11, d12, d22
    d2f: [Vec3<T>; 3],
}

impl<T: Scalar> AnalyticSurfaceSpec<T> {
    pub fn wraps(&self) -> [bool; 2] {
        match self.kind {
            SurfaceKind::FlatPlane { periodic } => [periodic, periodic],
            SurfaceKind::DeformingTorus { .. } | SurfaceKind::RotatingTorus { .. } => [true, true],
            SurfaceKind::SphereChart { .. } => [true, false],
            SurfaceKind::GraphBump { .. } => [false, false],
        }
    }

    fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.nt < 3 || g.n1 < 3 || g.n2 < 3 {
            return Err(Error::InvalidSpec(format!(
                "grid {}x{}x{} too small (need >= 3 per axis)",
                g.nt, g.n1, g.n2
            )));
        }
        if g.steps.h_t <= T::zero() || g.steps.h_1 <= T::zero() || g.steps.h_2 <= T::zero() {
            return Err(Error::InvalidSpec("grid steps must be positive".into()));
        }
        match self.kind {
            SurfaceKind::DeformingTorus { big_radius, ripple, .. } => {
                if big_radius.as_f64() <= 1.0 {
                    return Err(Error::InvalidSpec("torus big radius must exceed tube radius 1".into()));
                }
                if ripple.abs().as_f64() >= 1.0 {
                    return Err(Error::InvalidSpec("ripple amplitude must stay below 1".into()));
                }
            }
            SurfaceKind::RotatingTorus { big_radius, .. } => {
                if big_radius.as_f64() <= 1.0 {
                    return Err(Error::InvalidSpec("torus big radius must exceed tube radius 1".into()));
                }
            }
            SurfaceKind::SphereChart { radius, pole_margin } => {
                if radius <= T::zero() {
                    return Err(Error::InvalidSpec("sphere radius must be positive".into()));
                }
                let m = pole_margin.as_f64();
                if !(m > 0.0 && m < std::f64::consts::FRAC_PI_2) {
                    return Err(Error::InvalidSpec("pole margin must lie in (0, pi/2)".into()));
                }
            }
            SurfaceKind::GraphBump { sigma, .. } => {
                if sigma <= T::zero() {
                    return Err(Error::InvalidSpec("bump sigma must be positive".into()));
                }
            }
            SurfaceKind::FlatPlane { .. } => {}
        }
        Ok(())
    }

    /// Evaluates the embedding jet at grid coordinates (exact derivatives).
    fn eval(&self, tg: T, x1: T, x2: T) -> Jet<T> {
        let g = &self.grid;
        let span_t = T::lit((g.nt - 1) as f64) * g.steps.h_t;
        let two_pi = T::lit(2.0 * std::f64::consts::PI);
        // angle per grid-coordinate unit on periodic axes
        let s1 = two_pi / (T::lit(g.n1 as f64) * g.steps.h_1);
        let s2 = two_pi / (T::lit(g.n2 as f64) * g.steps.h_2);
        match self.kind {
            SurfaceKind::FlatPlane { .. } => Jet {
                f: [x1, x2, T::zero()],
                df: [
                    [T::zero(); 3],
                    [T::one(), T::zero(), T::zero()],
                    [T::zero(), T::one(), T::zero()],
                ],
                d2f: [[T::zero(); 3]; 3],
            },
            SurfaceKind::DeformingTorus { big_radius, drift, ripple, ripple_freq } => {
                let st = span_t.recip(); // d tau / d t
                let tau = tg * st;
                let theta = s1 * x1;
                let phi = s2 * x2;
                let q = T::lit(ripple_freq as f64);
                let (sq, cq) = (q * theta).sin_cos();
                let (sth, cth) = theta.sin_cos();
                let (sph, cph) = phi.sin_cos();
                let r = T::one() + ripple * tau * sq;
                let r_tau = ripple * sq;
                let r_th = ripple * tau * q * cq;
                let r_thth = -ripple * tau * q * q * sq;
                let d = drift * tau;
                let ring = big_radius + r * cph;
                let ring_d = ring + d;

                let f = [ring_d * cth, ring * sth, r * sph];
                let f_tau = [
                    (drift + r_tau * cph) * cth,
                    r_tau * cph * sth,
                    r_tau * sph,
                ];
                let f_th = [
                    r_th * cph * cth - ring_d * sth,
                    r_th * cph * sth + ring * cth,
                    r_th * sph,
                ];
                let f_ph = [-r * sph * cth, -r * sph * sth, r * cph];
                let f_thth = [
                    r_thth * cph * cth - T::two() * r_th * cph * sth - ring_d * cth,
                    r_thth * cph * sth + T::two() * r_th * cph * cth - ring * sth,
                    r_thth * sph,
                ];
                let f_thph = [
                    -r_th * sph * cth + r * sph * sth,
                    -r_th * sph * sth - r * sph * cth,
                    r_th * cph,
                ];
                let f_phph = [-r * cph * cth, -r * cph * sth, -r * sph];
                Jet {
                    f,
                    df: [scale(st, &f_tau), scale(s1, &f_th), scale(s2, &f_ph)],
                    d2f: [
                        scale(s1 * s1, &f_thth),
                        scale(s1 * s2, &f_thph),
                        scale(s2 * s2, &f_phph),
                    ],
                }
            }
            SurfaceKind::RotatingTorus { big_radius, rate } => {
                let theta = s1 * x1 + rate * tg;
                let phi = s2 * x2;
                let (sth, cth) = theta.sin_cos();
                let (sph, cph) = phi.sin_cos();
                let ring = big_radius + cph;
                let f = [ring * cth, ring * sth, sph];
                let f_th = [-ring * sth, ring * cth, T::zero()];
                let f_ph = [-sph * cth, -sph * sth, cph];
                let f_thth = [-ring * cth, -ring * sth, T::zero()];
                let f_thph = [sph * sth, -sph * cth, T::zero()];
                let f_phph = [-cph * cth, -cph * sth, -sph];
                Jet {
                    f,
                    df: [scale(rate, &f_th), scale(s1, &f_th), scale(s2, &f_ph)],
                    d2f: [
                        scale(s1 * s1, &f_thth),
                        scale(s1 * s2, &f_thph),
                        scale(s2 * s2, &f_phph),
                    ],
                }
            }
            SurfaceKind::SphereChart { radius, pole_margin } => {
                let theta = s1 * x1;
                // polar angle spans [margin, pi - margin] over the x2 axis
                let span2 = T::lit((g.n2 - 1) as f64) * g.steps.h_2;
                let sp = (T::PI() - T::two() * pole_margin) / span2;
                let phi = pole_margin + sp * x2;
                let (sth, cth) = theta.sin_cos();
                let (sph, cph) = phi.sin_cos();
                let rho = radius;
                let f = [rho * sph * cth, rho * sph * sth, rho * cph];
                let f_th = [-rho * sph * sth, rho * sph * cth, T::zero()];
                let f_ph = [rho * cph * cth, rho * cph * sth, -rho * sph];
                let f_thth = [-rho * sph * cth, -rho * sph * sth, T::zero()];
                let f_thph = [-rho * cph * sth, rho * cph * cth, T::zero()];
                let f_phph = [-rho * sph * cth, -rho * sph * sth, -rho * cph];
                Jet {
                    f,
                    df: [[T::zero(); 3], scale(s1, &f_th), scale(sp, &f_ph)],
                    d2f: [
                        scale(s1 * s1, &f_thth),
                        scale(s1 * sp, &f_thph),
                        scale(sp * sp, &f_phph),
                    ],
                }
            }
            SurfaceKind::GraphBump { amplitude, sigma, center, velocity } => {
                let u1 = x1 - center[0] - velocity[0] * tg;
                let u2 = x2 - center[1] - velocity[1] * tg;
                let s2i = (sigma * sigma).recip();
                let e = amplitude * (-(u1 * u1 + u2 * u2) * s2i * T::half()).exp();
                let z1 = -e * u1 * s2i;
                let z2 = -e * u2 * s2i;
                let zt = e * (u1 * velocity[0] + u2 * velocity[1]) * s2i;
                let z11 = e * (u1 * u1 * s2i - T::one()) * s2i;
                let z22 = e * (u2 * u2 * s2i - T::one()) * s2i;
                let z12 = e * u1 * u2 * s2i * s2i;
                Jet {
                    f: [x1, x2, e],
                    df: [
                        [T::zero(), T::zero(), zt],
                        [T::one(), T::zero(), z1],
                        [T::zero(), T::one(), z2],
                    ],
                    d2f: [
                        [T::zero(), T::zero(), z11],
                        [T::zero(), T::zero(), z12],
                        [T::zero(), T::zero(), z22],
                    ],
                }
            }
        }
    }
}

#[inline]
fn scale<T: Scalar>(s: T, v: &Vec3<T>) -> Vec3<T> {
    [s * v[0], s * v[1], s * v[2]]
}

/// Samples a builtin analytic surface with exact derivatives.
pub fn make_surface<T: Scalar>(spec: &AnalyticSurfaceSpec<T>) -> Result<SurfaceGrid<T>> {
    spec.validate()?;
    let dims = spec.grid.dims();
    let steps = spec.grid.steps;
    let n = dims.len();
    let mut f = Vec::with_capacity(n);
    let mut df = Vec::with_capacity(n);
    let mut d2f = Vec::with_capacity(n);
    for p in 0..n {
        let (t, i1, i2) = dims.coords(p);
        let jet = spec.eval(
            T::lit(t as f64) * steps.h_t,
            T::lit(i1 as f64) * steps.h_1,
            T::lit(i2 as f64) * steps.h_2,
        );
        f.push(jet.f);
        df.push(jet.df);
        d2f.push(jet.d2f);
    }
    Ok(SurfaceGrid { dims, steps, wrap: spec.wraps(), f, df, d2f })
}

/// Builds a graph surface `f = (x1, x2, z)` from sampled heights; the height
/// derivatives are taken by central differences.
pub fn make_graph_surface<T: Scalar>(
    dims: GridDims,
    steps: GridSteps<T>,
    z: &[T],
) -> Result<SurfaceGrid<T>> {
    if z.len() != dims.len() {
        return Err(Error::shape_mismatch(
            format!("{} height samples", dims.len()),
            format!("{}", z.len()),
        ));
    }
    if dims.nt < 3 || dims.n1 < 3 || dims.n2 < 3 {
        return Err(Error::GridTooSmall("graph surface needs >= 3 points per axis".into()));
    }
    let zt = axis_derivative(dims, 0, false, steps.h_t, z);
    let z1 = axis_derivative(dims, 1, false, steps.h_1, z);
    let z2 = axis_derivative(dims, 2, false, steps.h_2, z);
    let z11 = axis_derivative(dims, 1, false, steps.h_1, &z1);
    let z12 = axis_derivative(dims, 2, false, steps.h_2, &z1);
    let z22 = axis_derivative(dims, 2, false, steps.h_2, &z2);
    let n = dims.len();
    let mut f = Vec::with_capacity(n);
    let mut df = Vec::with_capacity(n);
    let mut d2f = Vec::with_capacity(n);
    for p in 0..n {
        let (_, i1, i2) = dims.coords(p);
        f.push([T::lit(i1 as f64) * steps.h_1, T::lit(i2 as f64) * steps.h_2, z[p]]);
        df.push([
            [T::zero(), T::zero(), zt[p]],
            [T::one(), T::zero(), z1[p]],
            [T::zero(), T::one(), z2[p]],
        ]);
        d2f.push([
            [T::zero(), T::zero(), z11[p]],
            [T::zero(), T::zero(), z12[p]],
            [T::zero(), T::zero(), z22[p]],
        ]);
    }
    Ok(SurfaceGrid { dims, steps, wrap: [false, false], f, df, d2f })
}

/// Diagnostics of [`remove_tangential_motion`].
#[derive(Clone, Copy, Debug)]
pub struct TangentialMotionReport {
    /// Largest per-step displacement of the reparametrization, in grid cells.
    pub max_step_cells: f64,
    /// Largest remaining tangential coordinate speed of the output motion,
    /// in the metric norm: the mismatch between the realized map velocity
    /// and the tangential surface velocity along the map.
    pub residual_speed: f64,
    /// Largest tangential speed of the input, for reference.
    pub input_speed: f64,
}

/// Reparametrizes a moving surface so that its velocity is normal to the
/// surface. The tangential coordinate velocity `w = -g^{lm} <f_t, d_m f>` is
/// integrated with an explicit RK2 (Heun) scheme, sampling `w` and the new
/// embedding by bilinear interpolation per step.
pub fn remove_tangential_motion<T: Scalar>(
    surface: &SurfaceGrid<T>,
) -> Result<(SurfaceGrid<T>, TangentialMotionReport)> {
    let dims = surface.dims;
    let steps = surface.steps;
    let frame_len = dims.n1 * dims.n2;
    let eps = T::lit(crate::geometry::DEGENERACY_THRESHOLD);

    // tangential coordinate velocity per frame, in grid-coordinate units
    let mut vel = vec![[T::zero(); 2]; dims.len()];
    let mut input_speed = 0.0f64;
    for p in 0..dims.len() {
        let d = &surface.df[p];
        let g = [
            [dot3(&d[1], &d[1]), dot3(&d[1], &d[2])],
            [dot3(&d[2], &d[1]), dot3(&d[2], &d[2])],
        ];
        let det = mat2_det(&g);
        if !(det > eps) {
            let (t, i1, i2) = dims.coords(p);
            return Err(Error::DegenerateMetric { t, i1, i2, det: det.as_f64() });
        }
        let ginv = mat2_inv(&g);
        let p1 = dot3(&d[0], &d[1]);
        let p2 = dot3(&d[0], &d[2]);
        let w1 = -(ginv[0][0] * p1 + ginv[0][1] * p2);
        let w2 = -(ginv[1][0] * p1 + ginv[1][1] * p2);
        vel[p] = [w1, w2];
        let speed = (g[0][0] * w1 * w1
            + T::two() * g[0][1] * w1 * w2
            + g[1][1] * w2 * w2)
            .sqrt()
            .as_f64();
        input_speed = input_speed.max(speed);
    }

    // non-periodic axes act as barriers: the tangential flow must vanish
    // on the corresponding boundary faces
    let tol = T::lit(1e-8) * T::lit(1.0f64.max(input_speed));
    for axis in 0..2 {
        if surface.wrap[axis] {
            continue;
        }
        let n_axis = if axis == 0 { dims.n1 } else { dims.n2 };
        for t in 0..dims.nt {
            for other in 0..(if axis == 0 { dims.n2 } else { dims.n1 }) {
                for edge in [0, n_axis - 1] {
                    let p = if axis == 0 {
                        dims.index(t, edge, other)
                    } else {
                        dims.index(t, other, edge)
                    };
                    if vel[p][axis].abs() > tol {
                        return Err(Error::BoundaryViolation(format!(
                            "tangential speed {:.3e} along axis {} at frame {t}",
                            vel[p][axis].as_f64(),
                            axis + 1
                        )));
                    }
                }
            }
        }
    }

    let span1 = T::lit(dims.n1 as f64) * steps.h_1;
    let span2 = T::lit(dims.n2 as f64) * steps.h_2;
    let sample_vec2 = |field: &[[T; 2]], t: usize, x: [T; 2]| -> [T; 2] {
        bilinear(&field[t * frame_len..(t + 1) * frame_len], dims, steps, surface.wrap, x)
    };

    // phi in grid-coordinate units; frame 0 is the identity
    let mut phi = vec![[T::zero(); 2]; dims.len()];
    for i1 in 0..dims.n1 {
        for i2 in 0..dims.n2 {
            let p = dims.index(0, i1, i2);
            phi[p] = [T::lit(i1 as f64) * steps.h_1, T::lit(i2 as f64) * steps.h_2];
        }
    }
    let mut max_step_cells = 0.0f64;
    for t in 0..dims.nt - 1 {
        for i1 in 0..dims.n1 {
            for i2 in 0..dims.n2 {
                let p = dims.index(t, i1, i2);
                let x = phi[p];
                let k1 = sample_vec2(&vel, t, x);
                let xs = [x[0] + steps.h_t * k1[0], x[1] + steps.h_t * k1[1]];
                let k2 = sample_vec2(&vel, t + 1, wrap_coords(xs, span1, span2, surface.wrap));
                let dx = [
                    steps.h_t * T::half() * (k1[0] + k2[0]),
                    steps.h_t * T::half() * (k1[1] + k2[1]),
                ];
                let cells = (dx[0] / steps.h_1)
                    .abs()
                    .max((dx[1] / steps.h_2).abs())
                    .as_f64();
                max_step_cells = max_step_cells.max(cells);
                if cells > 0.5 {
                    return Err(Error::CflExceeded { step: t, disp: cells });
                }
                phi[dims.index(t + 1, i1, i2)] =
                    wrap_coords([x[0] + dx[0], x[1] + dx[1]], span1, span2, surface.wrap);
            }
        }
    }

    // residual tangential speed: realized map velocity vs the tangential
    // surface velocity sampled along the map (central in time)
    let mut residual_speed = 0.0f64;
    let two_ht = T::two() * steps.h_t;
    for t in 1..dims.nt.saturating_sub(1) {
        for i1 in 0..dims.n1 {
            for i2 in 0..dims.n2 {
                let p = dims.index(t, i1, i2);
                let prev = phi[dims.index(t - 1, i1, i2)];
                let next = phi[dims.index(t + 1, i1, i2)];
                let rate = [
                    periodic_diff(next[0], prev[0], span1, surface.wrap[0]) / two_ht,
                    periodic_diff(next[1], prev[1], span2, surface.wrap[1]) / two_ht,
                ];
                let w = sample_vec2(&vel, t, phi[p]);
                let r = [rate[0] - w[0], rate[1] - w[1]];
                // measure in the metric at the mapped point
                let d = &surface.df[nearest_index(dims, steps, t, phi[p])];
                let g = [
                    [dot3(&d[1], &d[1]), dot3(&d[1], &d[2])],
                    [dot3(&d[2], &d[1]), dot3(&d[2], &d[2])],
                ];
                let norm = (g[0][0] * r[0] * r[0]
                    + T::two() * g[0][1] * r[0] * r[1]
                    + g[1][1] * r[1] * r[1])
                    .abs()
                    .sqrt()
                    .as_f64();
                residual_speed = residual_speed.max(norm);
            }
        }
    }

    // resample the embedding along the map
    let mut f_new = vec![[T::zero(); 3]; dims.len()];
    for t in 0..dims.nt {
        for i1 in 0..dims.n1 {
            for i2 in 0..dims.n2 {
                let p = dims.index(t, i1, i2);
                f_new[p] =
                    bilinear(&surface.f[t * frame_len..(t + 1) * frame_len], dims, steps, surface.wrap, phi[p]);
            }
        }
    }
    let out = SurfaceGrid::from_samples(dims, steps, surface.wrap, f_new)?;
    Ok((out, TangentialMotionReport { max_step_cells, residual_speed, input_speed }))
}

fn wrap_coords<T: Scalar>(mut x: [T; 2], span1: T, span2: T, wrap: [bool; 2]) -> [T; 2] {
    if wrap[0] {
        x[0] = x[0] - (x[0] / span1).floor() * span1;
    }
    if wrap[1] {
        x[1] = x[1] - (x[1] / span2).floor() * span2;
    }
    x
}

fn periodic_diff<T: Scalar>(a: T, b: T, span: T, wrap: bool) -> T {
    let mut d = a - b;
    if wrap {
        let half = span * T::half();
        while d > half {
            d = d - span;
        }
        while d < -half {
            d = d + span;
        }
    }
    d
}

fn nearest_index<T: Scalar>(dims: GridDims, steps: GridSteps<T>, t: usize, x: [T; 2]) -> usize {
    let clampi = |v: f64, n: usize| -> usize { (v.round().max(0.0) as usize).min(n - 1) };
    let i1 = clampi((x[0] / steps.h_1).as_f64(), dims.n1);
    let i2 = clampi((x[1] / steps.h_2).as_f64(), dims.n2);
    dims.index(t, i1, i2)
}

/// Bilinear interpolation of a per-point field on one time frame,
/// period-aware; non-periodic axes clamp to the boundary.
fn bilinear<T: Scalar, const K: usize>(
    frame: &[[T; K]],
    dims: GridDims,
    steps: GridSteps<T>,
    wrap: [bool; 2],
    x: [T; 2],
) -> [T; K] {
    let locate = |coord: T, h: T, n: usize, wraps: bool| -> (usize, usize, T) {
        let u = coord / h;
        let i0f = u.floor();
        let frac = u - i0f;
        let i0 = i0f.as_f64() as i64;
        if wraps {
            let n = n as i64;
            let a = i0.rem_euclid(n) as usize;
            let b = (i0 + 1).rem_euclid(n) as usize;
            (a, b, frac)
        } else {
            let last = (n - 1) as i64;
            let a = i0.clamp(0, last) as usize;
            let b = (i0 + 1).clamp(0, last) as usize;
            let frac = if i0 < 0 {
                T::zero()
            } else if i0 >= last {
                T::zero()
            } else {
                frac
            };
            (a, b, frac)
        }
    };
    let (a1, b1, u) = locate(x[0], steps.h_1, dims.n1, wrap[0]);
    let (a2, b2, v) = locate(x[1], steps.h_2, dims.n2, wrap[1]);
    let at = |i1: usize, i2: usize| -> &[T; K] { &frame[i1 * dims.n2 + i2] };
    let mut out = [T::zero(); K];
    let w00 = (T::one() - u) * (T::one() - v);
    let w01 = (T::one() - u) * v;
    let w10 = u * (T::one() - v);
    let w11 = u * v;
    for k in 0..K {
        out[k] = w00 * at(a1, a2)[k]
            + w01 * at(a1, b2)[k]
            + w10 * at(b1, a2)[k]
            + w11 * at(b1, b2)[k];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus_spec(nt: usize, n1: usize, n2: usize) -> AnalyticSurfaceSpec<f64> {
        AnalyticSurfaceSpec::<f64> {
            kind: SurfaceKind::DeformingTorus {
                big_radius: 2.0,
                drift: 1.0,
                ripple: 0.2,
                ripple_freq: 8,
            },
            grid: GridSpec::natural_torus(nt, n1, n2, 1.0),
        }
    }

    #[test]
    fn torus_origin_value() {
        let s = make_surface(&torus_spec(5, 12, 12)).unwrap();
        let p = s.dims.index(0, 0, 0);
        assert_eq!(s.f[p], [3.0, 0.0, 0.0]);
    }

    #[test]
    fn torus_is_periodic_in_both_angles() {
        let spec = torus_spec(4, 10, 8);
        let two_pi = 2.0 * std::f64::consts::PI;
        let period1 = spec.grid.n1 as f64 * spec.grid.steps.h_1;
        let period2 = spec.grid.n2 as f64 * spec.grid.steps.h_2;
        assert!((period1 - two_pi).abs() < 1e-12);
        for &(t, x1, x2) in &[(0.2, 0.3, 1.1), (0.7, 2.0, 4.0)] {
            let a = spec.eval(t, x1, x2);
            let b = spec.eval(t, x1 + period1, x2);
            let c = spec.eval(t, x1, x2 + period2);
            for k in 0..3 {
                assert!((a.f[k] - b.f[k]).abs() < 1e-12);
                assert!((a.f[k] - c.f[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn graph_with_zero_height_equals_flat_plane() {
        let dims = GridDims::new(3, 5, 4);
        let steps = GridSteps::unit();
        let z = vec![0.0f64; dims.len()];
        let g = make_graph_surface(dims, steps, &z).unwrap();
        let flat = make_surface(&AnalyticSurfaceSpec::<f64> {
            kind: SurfaceKind::FlatPlane { periodic: false },
            grid: GridSpec::new(3, 5, 4, steps),
        })
        .unwrap();
        for p in 0..dims.len() {
            assert_eq!(g.f[p], flat.f[p]);
            for d in 0..3 {
                for k in 0..3 {
                    assert!((g.df[p][d][k] - flat.df[p][d][k]).abs() < 1e-15);
                    assert!((g.d2f[p][d][k] - flat.d2f[p][d][k]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_fd_with_second_order_ratio() {
        let err_at = |n1: usize, n2: usize, nt: usize| -> f64 {
            let mut spec = torus_spec(nt, n1, n2);
            if let SurfaceKind::DeformingTorus { ripple_freq, .. } = &mut spec.kind {
                *ripple_freq = 3;
            }
            let s = make_surface(&spec).unwrap();
            let fd = SurfaceGrid::from_samples(s.dims, s.steps, s.wrap, s.f.clone()).unwrap();
            let mut worst = 0.0f64;
            for t in 1..s.dims.nt - 1 {
                for i1 in 0..s.dims.n1 {
                    for i2 in 0..s.dims.n2 {
                        let p = s.dims.index(t, i1, i2);
                        for d in 0..3 {
                            for k in 0..3 {
                                worst = worst.max((s.df[p][d][k] - fd.df[p][d][k]).abs());
                                worst = worst.max((s.d2f[p][d][k] - fd.d2f[p][d][k]).abs());
                            }
                        }
                    }
                }
            }
            worst
        };
        let e0 = err_at(24, 16, 9);
        let e1 = err_at(48, 32, 17);
        let ratio = e0 / e1;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio} ({e0:.3e} -> {e1:.3e})");
    }

    #[test]
    fn static_surface_reparametrization_is_identity() {
        let s = make_surface(&AnalyticSurfaceSpec::<f64> {
            kind: SurfaceKind::SphereChart { radius: 1.0, pole_margin: 0.3 },
            grid: GridSpec::new(4, 12, 8, GridSteps::unit()),
        })
        .unwrap();
        let (out, report) = remove_tangential_motion(&s).unwrap();
        assert!(report.input_speed < 1e-12);
        assert!(report.residual_speed < 1e-10);
        for p in 0..s.dims.len() {
            for k in 0..3 {
                assert!((out.f[p][k] - s.f[p][k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn vertically_rising_plane_is_untouched() {
        // f = (x1, x2, c t): the velocity is already normal to the surface
        let dims = GridDims::new(5, 6, 6);
        let steps = GridSteps::<f64>::new(0.1, 1.0, 1.0);
        let mut z = vec![0.0; dims.len()];
        for p in 0..dims.len() {
            let (t, _, _) = dims.coords(p);
            z[p] = 0.7 * t as f64 * steps.h_t;
        }
        let s = make_graph_surface(dims, steps, &z).unwrap();
        let (out, report) = remove_tangential_motion(&s).unwrap();
        assert!(report.input_speed < 1e-10);
        for p in 0..dims.len() {
            for k in 0..3 {
                assert!((out.f[p][k] - s.f[p][k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rotating_torus_becomes_time_constant() {
        let spec = AnalyticSurfaceSpec::<f64> {
            kind: SurfaceKind::RotatingTorus { big_radius: 2.0, rate: 0.35 },
            grid: GridSpec::natural_torus(17, 48, 24, 1.0),
        };
        let s = make_surface(&spec).unwrap();
        let (out, report) = remove_tangential_motion(&s).unwrap();
        assert!(report.input_speed > 0.3, "rotation is tangential motion");
        // output parametrization is close to time-constant
        let frame_len = s.dims.n1 * s.dims.n2;
        let mut dev = 0.0f64;
        for t in 1..s.dims.nt {
            for q in 0..frame_len {
                for k in 0..3 {
                    dev = dev.max((out.f[t * frame_len + q][k] - out.f[q][k]).abs());
                }
            }
        }
        let h = s.steps.h_1;
        assert!(dev < 2.0 * h * h, "time variation {dev} vs h^2 {}", h * h);
        assert!(report.residual_speed < 0.05 * report.input_speed);
    }

    #[test]
    fn cfl_violation_is_detected() {
        let spec = AnalyticSurfaceSpec::<f64> {
            // one coarse time step carries the rotation over half a cell
            kind: SurfaceKind::RotatingTorus { big_radius: 2.0, rate: 3.0 },
            grid: GridSpec::natural_torus(4, 32, 16, 2.0),
        };
        let s = make_surface(&spec).unwrap();
        match remove_tangential_motion(&s) {
            Err(Error::CflExceeded { .. }) => {}
            other => panic!("expected CflExceeded, got {:?}", other.map(|_| ())),
        }
    }
}
