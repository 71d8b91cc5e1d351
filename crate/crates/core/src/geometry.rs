//! Differential geometry of the evolving surface.
//!
//! The chart is a rectangle with optional periodic identifications; the
//! embedding `f(t, x1, x2)` induces the time-dependent pullback metric
//! `g_ij = <d_i f, d_j f>`. Space-time carries the product metric
//! `diag(alpha^2, g(t))`, whose Christoffel symbols and orthonormal-frame
//! connection coefficients feed the optimality system.
//!
//! Index conventions: space-time indices run over `{0,1,2}` with 0 the time
//! direction; chart (spatial) indices over `{0,1}`. The frame matrix `a` is
//! stored as `a[i][l]` = coefficient of the coordinate vector `d_{l+1}` in
//! the frame vector `X_{i+1}`; `b = a^-1` as `b[k][j]` = coefficient of
//! `X_{j+1}` in `d_{k+1}`.

use crate::error::{Error, Result};
use crate::grid::{axis_derivative, GridDims, GridSteps};
use crate::linalg::{congruence2, dot3, ident2, mat2_det, mat2_inv, mat2_max_abs_diff, Mat2, Ten3, Vec3};
use crate::Scalar;

/// Determinant threshold below which the pullback metric counts as
/// degenerate (in grid units).
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Sampled embedding of the moving surface together with its first
/// space-time and second spatial derivatives.
#[derive(Clone, Debug)]
pub struct SurfaceGrid<T> {
    pub dims: GridDims,
    pub steps: GridSteps<T>,
    /// Periodicity of the chart axes x1, x2.
    pub wrap: [bool; 2],
    /// Embedding samples, `[t][x1][x2]` order.
    pub f: Vec<Vec3<T>>,
    /// First derivatives `[d_t f, d_1 f, d_2 f]` per point.
    pub df: Vec<[Vec3<T>; 3]>,
    /// Second spatial derivatives `[d_11 f, d_12 f, d_22 f]` per point.
    pub d2f: Vec<[Vec3<T>; 3]>,
}

impl<T: Scalar> SurfaceGrid<T> {
    /// Builds a surface from embedding samples alone, recomputing all
    /// derivatives by second-order finite differences (one-sided at
    /// non-periodic boundaries). This is the path taken when loading a
    /// sampled `SRF1` file; analytic surfaces provide exact derivatives
    /// instead.
    pub fn from_samples(
        dims: GridDims,
        steps: GridSteps<T>,
        wrap: [bool; 2],
        f: Vec<Vec3<T>>,
    ) -> Result<Self> {
        if f.len() != dims.len() {
            return Err(Error::shape_mismatch(
                format!("{} embedding samples", dims.len()),
                format!("{}", f.len()),
            ));
        }
        if dims.nt < 3 || dims.n1 < 3 || dims.n2 < 3 {
            return Err(Error::GridTooSmall(format!(
                "surface grid {}x{}x{} needs at least 3 points per axis",
                dims.nt, dims.n1, dims.n2
            )));
        }
        let ft = axis_derivative(dims, 0, false, steps.h_t, &f);
        let f1 = axis_derivative(dims, 1, wrap[0], steps.h_1, &f);
        let f2 = axis_derivative(dims, 2, wrap[1], steps.h_2, &f);
        let f11 = axis_derivative(dims, 1, wrap[0], steps.h_1, &f1);
        let f12 = axis_derivative(dims, 2, wrap[1], steps.h_2, &f1);
        let f22 = axis_derivative(dims, 2, wrap[1], steps.h_2, &f2);
        let n = dims.len();
        let mut df = Vec::with_capacity(n);
        let mut d2f = Vec::with_capacity(n);
        for p in 0..n {
            df.push([ft[p], f1[p], f2[p]]);
            d2f.push([f11[p], f12[p], f22[p]]);
        }
        Ok(SurfaceGrid { dims, steps, wrap, f, df, d2f })
    }

    pub fn n_points(&self) -> usize {
        self.dims.len()
    }
}

/// Pointwise metric data of the product metric `diag(alpha^2, g(t))`.
#[derive(Clone, Debug)]
pub struct GeometryField<T> {
    pub dims: GridDims,
    pub steps: GridSteps<T>,
    pub wrap: [bool; 2],
    /// Time weighting of the product metric.
    pub alpha: T,
    /// Pullback metric `g_ij = <d_i f, d_j f>`.
    pub g: Vec<Mat2<T>>,
    /// Pointwise inverse metric.
    pub ginv: Vec<Mat2<T>>,
    /// Volume density `sqrt(det g)`.
    pub vol: Vec<T>,
    /// Time derivative of the metric.
    pub dtg: Vec<Mat2<T>>,
    /// Spatial metric derivatives `dgs[p][k] = d_{k+1} g`.
    pub dgs: Vec<[Mat2<T>; 2]>,
}

/// Builds all metric quantities from a sampled surface.
///
/// `g` and its spatial derivatives come from the stored first and second
/// derivatives of `f`; `d_t g_ij = <d_t d_i f, d_j f> + <d_i f, d_t d_j f>`
/// uses a central time difference of the stored `d_i f` samples (one-sided
/// second-order at the time endpoints).
pub fn build_geometry<T: Scalar>(surface: &SurfaceGrid<T>, alpha: T) -> Result<GeometryField<T>> {
    if alpha <= T::zero() {
        return Err(Error::InvalidSpec("alpha must be positive".into()));
    }
    let dims = surface.dims;
    if dims.nt < 3 {
        return Err(Error::GridTooSmall("need nt >= 3 for the metric time derivative".into()));
    }
    let n = dims.len();
    let mut g = Vec::with_capacity(n);
    let mut ginv = Vec::with_capacity(n);
    let mut vol = Vec::with_capacity(n);
    let mut dgs = Vec::with_capacity(n);
    let eps = T::lit(DEGENERACY_THRESHOLD);
    for p in 0..n {
        let d = &surface.df[p];
        let gp = [
            [dot3(&d[1], &d[1]), dot3(&d[1], &d[2])],
            [dot3(&d[2], &d[1]), dot3(&d[2], &d[2])],
        ];
        let det = mat2_det(&gp);
        if !(det > eps) {
            let (t, i1, i2) = dims.coords(p);
            return Err(Error::DegenerateMetric { t, i1, i2, det: det.as_f64() });
        }
        g.push(gp);
        ginv.push(mat2_inv(&gp));
        vol.push(det.sqrt());

        // d_k g_ij = <d_ik f, d_j f> + <d_i f, d_jk f> from stored second
        // derivatives; d2f holds [d_11, d_12, d_22].
        let s = &surface.d2f[p];
        let second = |i: usize, k: usize| -> &Vec3<T> {
            match (i, k) {
                (0, 0) => &s[0],
                (1, 1) => &s[2],
                _ => &s[1],
            }
        };
        let mut dg = [[[T::zero(); 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in i..2 {
                    let v = dot3(second(i, k), &d[1 + j]) + dot3(&d[1 + i], second(j, k));
                    dg[k][i][j] = v;
                    dg[k][j][i] = v;
                }
            }
        }
        dgs.push(dg);
    }

    // d_t d_i f by central time differences of the stored first derivatives.
    let dtdf = axis_derivative(dims, 0, false, surface.steps.h_t, &surface.df);
    let mut dtg = Vec::with_capacity(n);
    for p in 0..n {
        let d = &surface.df[p];
        let dt = &dtdf[p];
        let mut m = [[T::zero(); 2]; 2];
        for i in 0..2 {
            for j in i..2 {
                let v = dot3(&dt[1 + i], &d[1 + j]) + dot3(&d[1 + i], &dt[1 + j]);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        dtg.push(m);
    }

    Ok(GeometryField {
        dims,
        steps: surface.steps,
        wrap: surface.wrap,
        alpha,
        g,
        ginv,
        vol,
        dtg,
        dgs,
    })
}

/// Orthonormal-frame coefficients: `a[i][l]` expresses the frame vector
/// `X_{i+1}` in coordinate vectors, `b = a^-1`, and `da[dir]` the frame
/// derivatives along `t, x1, x2` obtained by differentiating the closed-form
/// frame through the stored metric derivatives.
#[derive(Clone, Debug)]
pub struct FrameField<T> {
    pub dims: GridDims,
    pub a: Vec<Mat2<T>>,
    pub b: Vec<Mat2<T>>,
    pub da: Vec<[Mat2<T>; 3]>,
}

/// Frame coefficients from a single metric value: `X_1 = d_1 / sqrt(g11)`,
/// `X_2` the normalized g-orthogonal complement of `d_1` in the order-fixed
/// Gram-Schmidt sweep (so `a^2_1 = 0` identically).
pub fn frame_from_metric<T: Scalar>(g: &Mat2<T>) -> (Mat2<T>, Mat2<T>) {
    let det = mat2_det(g);
    let a11 = g[0][0].sqrt().recip();
    let a22 = (g[0][0] / det).sqrt();
    let a12 = -g[0][1] * a22 / g[0][0];
    let a = [[a11, T::zero()], [a12, a22]];
    (a, mat2_inv(&a))
}

/// Directional derivative of the frame coefficients implied by a metric
/// derivative `dg`, via the chain rule through [`frame_from_metric`].
pub fn frame_derivative<T: Scalar>(g: &Mat2<T>, a: &Mat2<T>, dg: &Mat2<T>) -> Mat2<T> {
    let det = mat2_det(g);
    let ddet =
        dg[0][0] * g[1][1] + g[0][0] * dg[1][1] - T::two() * g[0][1] * dg[0][1];
    let a11 = a[0][0];
    let a22 = a[1][1];
    // a11^2 = 1/g11, a22^2 = g11/det, a12 = -g12 a22 / g11
    let da11 = -dg[0][0] / (T::two() * a11 * g[0][0] * g[0][0]);
    let da22 = (dg[0][0] * det - g[0][0] * ddet) / (T::two() * a22 * det * det);
    let da12 = -(dg[0][1] * a22 + g[0][1] * da22) / g[0][0]
        + g[0][1] * a22 * dg[0][0] / (g[0][0] * g[0][0]);
    [[da11, T::zero()], [da12, da22]]
}

/// Builds the orthonormal frame field and its derivatives from the metric.
pub fn orthonormal_frame<T: Scalar>(geom: &GeometryField<T>) -> Result<FrameField<T>> {
    let n = geom.dims.len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut da = Vec::with_capacity(n);
    let eps = T::lit(DEGENERACY_THRESHOLD);
    for p in 0..n {
        let gp = &geom.g[p];
        let det = mat2_det(gp);
        if !(det > eps) {
            let (t, i1, i2) = geom.dims.coords(p);
            return Err(Error::DegenerateMetric { t, i1, i2, det: det.as_f64() });
        }
        let (ap, bp) = frame_from_metric(gp);
        da.push([
            frame_derivative(gp, &ap, &geom.dtg[p]),
            frame_derivative(gp, &ap, &geom.dgs[p][0]),
            frame_derivative(gp, &ap, &geom.dgs[p][1]),
        ]);
        a.push(ap);
        b.push(bp);
    }
    Ok(FrameField { dims: geom.dims, a, b, da })
}

/// Christoffel symbols of the product metric, `gamma[j][i][k]`, symmetric in
/// `(i,k)` by construction.
#[derive(Clone, Debug)]
pub struct ChristoffelField<T> {
    pub dims: GridDims,
    pub gamma: Vec<Ten3<T>>,
}

/// Evaluates the Levi-Civita half-sum formula on the block metric
/// `diag(alpha^2, g)`:
///
/// * time-time blocks vanish,
/// * `gamma^0_{ik} = -d_t g_ik / (2 alpha^2)`,
/// * `gamma^j_{0k} = (1/2) g^{jl} d_t g_kl`,
/// * spatial symbols from the spatial metric derivatives.
pub fn christoffel_symbols<T: Scalar>(geom: &GeometryField<T>) -> ChristoffelField<T> {
    let n = geom.dims.len();
    let half = T::half();
    let inv_2a2 = half / (geom.alpha * geom.alpha);
    let mut gamma = Vec::with_capacity(n);
    for p in 0..n {
        let ginv = &geom.ginv[p];
        let dtg = &geom.dtg[p];
        let dgs = &geom.dgs[p];
        let mut c: Ten3<T> = [[[T::zero(); 3]; 3]; 3];
        // gamma^0_{ik} for spatial i,k
        for i in 0..2 {
            for k in i..2 {
                let v = -dtg[i][k] * inv_2a2;
                c[0][1 + i][1 + k] = v;
                c[0][1 + k][1 + i] = v;
            }
        }
        // gamma^j_{0k} = gamma^j_{k0}
        for j in 0..2 {
            for k in 0..2 {
                let v = half * (ginv[j][0] * dtg[k][0] + ginv[j][1] * dtg[k][1]);
                c[1 + j][0][1 + k] = v;
                c[1 + j][1 + k][0] = v;
            }
        }
        // spatial symbols: (1/2) g^{jl} (d_k g_li + d_i g_lk - d_l g_ik)
        for j in 0..2 {
            for i in 0..2 {
                for k in i..2 {
                    let mut v = T::zero();
                    for l in 0..2 {
                        v = v
                            + ginv[j][l]
                                * (dgs[k][l][i] + dgs[i][l][k] - dgs[l][i][k]);
                    }
                    let v = half * v;
                    c[1 + j][1 + i][1 + k] = v;
                    c[1 + j][1 + k][1 + i] = v;
                }
            }
        }
        gamma.push(c);
    }
    ChristoffelField { dims: geom.dims, gamma }
}

/// Connection coefficients `omega[j][i][k]` of the orthonormal frame,
/// antisymmetric in `(j,k)`.
#[derive(Clone, Debug)]
pub struct ConnectionField<T> {
    pub dims: GridDims,
    pub omega: Vec<Ten3<T>>,
}

/// Connection coefficients from the change-of-frame formula
/// `omega^j_ik = (abar^l_i d_l abar^m_k + abar^l_i abar^n_k gamma^m_ln)
/// abar^h_j gbar_mh`, with the extended frame matrix `abar` equal to `1/alpha`
/// in the time-time slot and the spatial frame elsewhere. Frame derivatives
/// come from the chain rule of [`frame_derivative`], so metric compatibility
/// (antisymmetry in the frame indices) holds to round-off by construction.
pub fn connection_coefficients<T: Scalar>(
    frame: &FrameField<T>,
    chris: &ChristoffelField<T>,
    geom: &GeometryField<T>,
) -> Result<ConnectionField<T>> {
    if frame.dims != geom.dims || chris.dims != geom.dims {
        return Err(Error::shape_mismatch(
            format!("{:?}", geom.dims),
            format!("frame {:?} / christoffel {:?}", frame.dims, chris.dims),
        ));
    }
    let n = geom.dims.len();
    let alpha = geom.alpha;
    let inv_alpha = alpha.recip();
    let mut omega = Vec::with_capacity(n);
    for p in 0..n {
        let mut abar = [[T::zero(); 3]; 3];
        abar[0][0] = inv_alpha;
        for i in 0..2 {
            for l in 0..2 {
                abar[1 + i][1 + l] = frame.a[p][i][l];
            }
        }
        let mut dabar = [[[T::zero(); 3]; 3]; 3];
        for dir in 0..3 {
            for i in 0..2 {
                for l in 0..2 {
                    dabar[dir][1 + i][1 + l] = frame.da[p][dir][i][l];
                }
            }
        }
        let mut gbar = [[T::zero(); 3]; 3];
        gbar[0][0] = alpha * alpha;
        for i in 0..2 {
            for j in 0..2 {
                gbar[1 + i][1 + j] = geom.g[p][i][j];
            }
        }
        let gamma = &chris.gamma[p];

        let mut om: Ten3<T> = [[[T::zero(); 3]; 3]; 3];
        for i in 0..3 {
            for k in 0..3 {
                // inner^m = abar^l_i ( d_l abar^m_k + abar^n_k gamma^m_ln )
                let mut inner = [T::zero(); 3];
                for m in 0..3 {
                    let mut acc = T::zero();
                    for l in 0..3 {
                        let al = abar[i][l];
                        if al == T::zero() {
                            continue;
                        }
                        let mut term = dabar[l][k][m];
                        for nn in 0..3 {
                            term = term + abar[k][nn] * gamma[m][l][nn];
                        }
                        acc = acc + al * term;
                    }
                    inner[m] = acc;
                }
                for j in 0..3 {
                    let mut v = T::zero();
                    for m in 0..3 {
                        for h in 0..3 {
                            let w = gbar[m][h] * abar[j][h];
                            if w != T::zero() {
                                v = v + inner[m] * w;
                            }
                        }
                    }
                    om[j][i][k] = v;
                }
            }
        }
        omega.push(om);
    }
    Ok(ConnectionField { dims: geom.dims, omega })
}

/// Largest deviation of `a g a^T` from the identity over the grid.
pub fn frame_orthonormality_defect<T: Scalar>(frame: &FrameField<T>, geom: &GeometryField<T>) -> T {
    let mut worst = T::zero();
    for p in 0..geom.dims.len() {
        let c = congruence2(&frame.a[p], &geom.g[p]);
        worst = worst.max(mat2_max_abs_diff(&c, &ident2()));
    }
    worst
}

/// Largest violation of the metric-compatibility antisymmetry
/// `omega^j_ik + omega^k_ij = 0` over the grid.
pub fn connection_antisymmetry_defect<T: Scalar>(conn: &ConnectionField<T>) -> T {
    let mut worst = T::zero();
    for om in &conn.omega {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    worst = worst.max((om[j][i][k] + om[k][i][j]).abs());
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfaces::{make_surface, AnalyticSurfaceSpec, GridSpec, SurfaceKind};

    fn flat_plane(nt: usize, n1: usize, n2: usize) -> SurfaceGrid<f64> {
        make_surface(&AnalyticSurfaceSpec::<f64> {
            kind: SurfaceKind::FlatPlane { periodic: false },
            grid: GridSpec::new(nt, n1, n2, GridSteps::unit()),
        })
        .unwrap()
    }

    /// f = (1+t)(x1, x2, 0): g = (1+t)^2 I, dt g = 2(1+t) I.
    fn scaling_plane(nt: usize, n1: usize, n2: usize) -> SurfaceGrid<f64> {
        let dims = GridDims::new(nt, n1, n2);
        let steps = GridSteps::<f64>::new(0.5 / (nt - 1) as f64, 1.0, 1.0);
        let n = dims.len();
        let mut f = vec![[0.0; 3]; n];
        let mut df = vec![[[0.0; 3]; 3]; n];
        let d2f = vec![[[0.0; 3]; 3]; n];
        for p in 0..n {
            let (t, i1, i2) = dims.coords(p);
            let tt = t as f64 * steps.h_t;
            let (x1, x2) = (i1 as f64, i2 as f64);
            f[p] = [(1.0 + tt) * x1, (1.0 + tt) * x2, 0.0];
            df[p] = [
                [x1, x2, 0.0],
                [1.0 + tt, 0.0, 0.0],
                [0.0, 1.0 + tt, 0.0],
            ];
        }
        SurfaceGrid { dims, steps, wrap: [false, false], f, df, d2f }
    }

    #[test]
    fn flat_plane_geometry_is_trivial() {
        let s = flat_plane(3, 4, 4);
        let geom = build_geometry(&s, 1.0).unwrap();
        for p in 0..s.n_points() {
            assert!(mat2_max_abs_diff(&geom.g[p], &ident2()) < 1e-14);
            assert!((geom.vol[p] - 1.0).abs() < 1e-14);
            assert!(mat2_max_abs_diff(&geom.dtg[p], &[[0.0; 2]; 2]) < 1e-14);
        }
        let frame = orthonormal_frame(&geom).unwrap();
        for p in 0..s.n_points() {
            assert!(mat2_max_abs_diff(&frame.a[p], &ident2()) < 1e-14);
            assert!(mat2_max_abs_diff(&frame.b[p], &ident2()) < 1e-14);
        }
        let chris = christoffel_symbols(&geom);
        let conn = connection_coefficients(&frame, &chris, &geom).unwrap();
        for p in 0..s.n_points() {
            for j in 0..3 {
                for i in 0..3 {
                    for k in 0..3 {
                        assert_eq!(chris.gamma[p][j][i][k], 0.0);
                        assert!(conn.omega[p][j][i][k].abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn torus_metric_at_origin() {
        // deforming torus at (t,x1,x2) = (0,0,0): d1 f = (0,3,0),
        // d2 f = (0,0,1), so g = diag(9,1) and vol = 3.
        let spec = AnalyticSurfaceSpec::<f64> {
            kind: SurfaceKind::DeformingTorus {
                big_radius: 2.0,
                drift: 1.0,
                ripple: 0.2,
                ripple_freq: 8,
            },
            grid: GridSpec::natural_torus(5, 16, 16, 1.0),
        };
        let s = make_surface(&spec).unwrap();
        let p = s.dims.index(0, 0, 0);
        assert_eq!(s.f[p][0], 3.0);
        assert!(s.f[p][1].abs() < 1e-15 && s.f[p][2].abs() < 1e-15);
        let d1 = s.df[p][1];
        let d2 = s.df[p][2];
        assert!((d1[0]).abs() < 1e-15 && (d1[1] - 3.0).abs() < 1e-15 && d1[2].abs() < 1e-15);
        assert!((d2[0]).abs() < 1e-15 && d2[1].abs() < 1e-15 && (d2[2] - 1.0).abs() < 1e-15);
        let geom = build_geometry(&s, 1.0).unwrap();
        assert!((geom.g[p][0][0] - 9.0).abs() < 1e-12);
        assert!((geom.g[p][1][1] - 1.0).abs() < 1e-12);
        assert!(geom.g[p][0][1].abs() < 1e-12);
        assert!((geom.vol[p] - 3.0).abs() < 1e-12);
        let frame = orthonormal_frame(&geom).unwrap();
        assert!((frame.a[p][0][0] - 1.0 / 3.0).abs() < 1e-13);
        assert!((frame.a[p][1][1] - 1.0).abs() < 1e-13);
        assert!((frame.b[p][0][0] - 3.0).abs() < 1e-13);
        assert!((frame.b[p][1][1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn scaling_plane_metric_and_christoffels() {
        let s = scaling_plane(5, 4, 4);
        let geom = build_geometry(&s, 1.0).unwrap();
        let chris = christoffel_symbols(&geom);
        for p in 0..s.n_points() {
            let (t, _, _) = s.dims.coords(p);
            let tt = 1.0 + t as f64 * s.steps.h_t;
            assert!((geom.g[p][0][0] - tt * tt).abs() < 1e-12);
            // dt g = 2(1+t) I exactly (stored derivatives are linear in t)
            assert!((geom.dtg[p][0][0] - 2.0 * tt).abs() < 1e-10);
            assert!((geom.dtg[p][1][1] - 2.0 * tt).abs() < 1e-10);
            assert!(geom.dtg[p][0][1].abs() < 1e-12);
            // gamma^0_{ik} = -(1+t) delta_ik, gamma^j_{0k} = delta_jk/(1+t)
            let c = &chris.gamma[p];
            for i in 0..2 {
                for k in 0..2 {
                    let expect0 = if i == k { -tt } else { 0.0 };
                    assert!((c[0][1 + i][1 + k] - expect0).abs() < 1e-10);
                    let expectm = if i == k { 1.0 / tt } else { 0.0 };
                    assert!((c[1 + i][0][1 + k] - expectm).abs() < 1e-10);
                    // spatial-only symbols vanish
                    for j in 0..2 {
                        assert!(c[1 + j][1 + i][1 + k].abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn scaling_plane_connection_values() {
        let s = scaling_plane(5, 4, 4);
        let geom = build_geometry(&s, 1.0).unwrap();
        let frame = orthonormal_frame(&geom).unwrap();
        let chris = christoffel_symbols(&geom);
        let conn = connection_coefficients(&frame, &chris, &geom).unwrap();
        let p = s.dims.index(0, 1, 1);
        // omega^0_{11} = omega^0_{22} = alpha a^l_i a^n_i gamma^0_ln = -1 at t=0
        assert!((conn.omega[p][0][1][1] + 1.0).abs() < 1e-10);
        assert!((conn.omega[p][0][2][2] + 1.0).abs() < 1e-10);
        assert!(connection_antisymmetry_defect(&conn) < 1e-10);
    }

    #[test]
    fn sphere_chart_christoffels_match_closed_form() {
        let spec = AnalyticSurfaceSpec::<f64> {
            kind: SurfaceKind::SphereChart { radius: 1.0, pole_margin: 0.15 },
            grid: GridSpec::new(3, 24, 20, GridSteps::unit()),
        };
        let s = make_surface(&spec).unwrap();
        let geom = build_geometry(&s, 1.0).unwrap();
        let chris = christoffel_symbols(&geom);
        // chart: theta = s1*x1 (azimuth, periodic), phi = margin + s2*x2
        let s1 = 2.0 * std::f64::consts::PI / (s.dims.n1 as f64 * s.steps.h_1);
        let s2 = (std::f64::consts::PI - 0.3) / ((s.dims.n2 - 1) as f64 * s.steps.h_2);
        for i1 in 0..s.dims.n1 {
            for i2 in 1..s.dims.n2 - 1 {
                let p = s.dims.index(1, i1, i2);
                let phi = 0.15 + s2 * i2 as f64;
                // in chart units the classical sphere symbols pick up the
                // constant scale factors of the affine chart map
                let g211 = -phi.sin() * phi.cos() * s1 * s1 / s2;
                let g112 = phi.cos() / phi.sin() * s2;
                assert!(
                    (chris.gamma[p][2][1][1] - g211).abs() < 1e-10,
                    "gamma^2_11 at {i1},{i2}"
                );
                assert!(
                    (chris.gamma[p][1][1][2] - g112).abs() < 1e-10,
                    "gamma^1_12 at {i1},{i2}"
                );
                // static surface: all time components vanish
                for j in 0..3 {
                    for k in 0..3 {
                        assert!(chris.gamma[p][j][0][k].abs() < 1e-12);
                        assert!(chris.gamma[p][0][j][k].abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn frame_from_metric_example() {
        let g: Mat2<f64> = [[2.0, 1.0], [1.0, 2.0]];
        let (a, b) = frame_from_metric(&g);
        assert!((a[0][0] - 0.70711).abs() < 1e-5);
        assert_eq!(a[0][1], 0.0);
        assert!((a[1][0] + 0.40825).abs() < 1e-5);
        assert!((a[1][1] - 0.81650).abs() < 1e-5);
        assert!(mat2_max_abs_diff(&congruence2(&a, &g), &ident2()) < 1e-14);
        let prod = crate::linalg::mat2_mul(&b, &a);
        assert!(mat2_max_abs_diff(&prod, &ident2()) < 1e-14);
    }

    #[test]
    fn christoffel_symmetry_is_bitwise() {
        let spec = AnalyticSurfaceSpec::<f64> {
            kind: SurfaceKind::DeformingTorus {
                big_radius: 2.0,
                drift: 1.0,
                ripple: 0.2,
                ripple_freq: 8,
            },
            grid: GridSpec::natural_torus(4, 12, 10, 1.0),
        };
        let s = make_surface(&spec).unwrap();
        let geom = build_geometry(&s, 0.7).unwrap();
        let chris = christoffel_symbols(&geom);
        for c in &chris.gamma {
            for j in 0..3 {
                for i in 0..3 {
                    for k in 0..3 {
                        assert_eq!(c[j][i][k], c[j][k][i]);
                    }
                }
            }
            // block-structure zeros
            assert_eq!(c[0][0][0], 0.0);
            for k in 0..3 {
                assert_eq!(c[0][0][k], 0.0);
                assert_eq!(c[k][0][0], 0.0);
            }
        }
    }

    #[test]
    fn torus_frame_orthonormal_and_connection_antisymmetric() {
        let spec = AnalyticSurfaceSpec::<f64> {
            kind: SurfaceKind::DeformingTorus {
                big_radius: 2.0,
                drift: 1.0,
                ripple: 0.2,
                ripple_freq: 8,
            },
            grid: GridSpec::natural_torus(5, 20, 16, 1.0),
        };
        let s = make_surface(&spec).unwrap();
        let geom = build_geometry(&s, 1.3).unwrap();
        let frame = orthonormal_frame(&geom).unwrap();
        assert!(frame_orthonormality_defect(&frame, &geom).as_f64() < 1e-12);
        let chris = christoffel_symbols(&geom);
        let conn = connection_coefficients(&frame, &chris, &geom).unwrap();
        assert!(connection_antisymmetry_defect(&conn).as_f64() < 1e-10);
        // block-structure zeros of the connection
        for om in &conn.omega {
            for k in 0..3 {
                assert!(om[0][0][k].abs() < 1e-13);
                assert!(om[k][0][0].abs() < 1e-13);
            }
        }
        // omega^1_{02} = -omega^2_{01} everywhere
        for om in &conn.omega {
            assert!((om[1][0][2] + om[2][0][1]).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_metric_is_reported() {
        let dims = GridDims::new(3, 3, 3);
        let steps = GridSteps::unit();
        let n = dims.len();
        let f = vec![[0.0; 3]; n];
        let mut df = vec![[[0.0; 3]; 3]; n];
        for d in df.iter_mut() {
            // d1 f parallel to d2 f
            d[1] = [1.0, 0.0, 0.0];
            d[2] = [2.0, 0.0, 0.0];
        }
        let s = SurfaceGrid { dims, steps, wrap: [false, false], f, df, d2f: vec![[[0.0; 3]; 3]; n] };
        match build_geometry(&s, 1.0) {
            Err(Error::DegenerateMetric { .. }) => {}
            other => panic!("expected DegenerateMetric, got {other:?}"),
        }
    }

    #[test]
    fn fd_rebuilt_christoffels_converge_to_exact() {
        // Exact-derivative route vs derivatives recomputed from f samples:
        // the difference is the FD error, which shrinks ~4x per halving.
        let torus = |n1: usize, n2: usize, nt: usize| -> (ChristoffelField<f64>, ChristoffelField<f64>, GridDims) {
            let spec = AnalyticSurfaceSpec::<f64> {
                kind: SurfaceKind::DeformingTorus {
                    big_radius: 2.0,
                    drift: 1.0,
                    ripple: 0.2,
                    ripple_freq: 3,
                },
                grid: GridSpec::natural_torus(nt, n1, n2, 1.0),
            };
            let exact = make_surface(&spec).unwrap();
            let fd = SurfaceGrid::from_samples(exact.dims, exact.steps, exact.wrap, exact.f.clone())
                .unwrap();
            let ge = build_geometry(&exact, 1.0).unwrap();
            let gf = build_geometry(&fd, 1.0).unwrap();
            (christoffel_symbols(&ge), christoffel_symbols(&gf), exact.dims)
        };
        let err = |a: &ChristoffelField<f64>, b: &ChristoffelField<f64>, dims: GridDims| -> f64 {
            let mut worst: f64 = 0.0;
            for t in 1..dims.nt - 1 {
                for i1 in 0..dims.n1 {
                    for i2 in 0..dims.n2 {
                        let p = dims.index(t, i1, i2);
                        for j in 0..3 {
                            for i in 0..3 {
                                for k in 0..3 {
                                    worst = worst
                                        .max((a.gamma[p][j][i][k] - b.gamma[p][j][i][k]).abs());
                                }
                            }
                        }
                    }
                }
            }
            worst
        };
        let (e0a, e0b, d0) = torus(32, 24, 9);
        let (e1a, e1b, d1) = torus(64, 48, 17);
        let c0 = err(&e0a, &e0b, d0);
        let c1 = err(&e1a, &e1b, d1);
        let ratio = c0 / c1;
        assert!(
            (3.0..=5.0).contains(&ratio),
            "FD consistency ratio {ratio} (errors {c0:.3e} -> {c1:.3e})"
        );
    }
}
