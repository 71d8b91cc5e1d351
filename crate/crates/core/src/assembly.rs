//! Coefficient tensors of the optimality system and sparse assembly.
//!
//! In frame components the flow solves, at every interior space-time point,
//!
//! ```text
//! forcing^j + zeroth^j_m u^m + first^{a j}_k d_a u^k + second^{lm} d_lm u^j = 0
//! ```
//!
//! with the zeroth/first/second-order tensors built from the image gradient,
//! the orthonormal frame, the connection coefficients and the trace of
//! `g^-1 d_t g`. The assembled system is `M u = -forcing`, signed so that the
//! flat static case yields the familiar symmetric positive definite
//! spatio-temporal Horn-Schunck operator.

use crate::error::{Error, Result};
use crate::geometry::{ConnectionField, FrameField, GeometryField};
use crate::grid::{axis_derivative, deriv1, GridDims};
use crate::imaging::ImageDerivatives;
use crate::linalg::{Mat2, Mat3};
use crate::sparse::CsrMatrix;
use crate::Scalar;

/// How the trace factor multiplying the time-transport terms is evaluated.
///
/// `Lemma` uses `(1/2) tr(g^-1 d_t g)`, the value implied by integration by
/// parts of the time term (and equal to the contracted Christoffel symbol of
/// this crate's convention); `Theorem` doubles it, matching a printed variant
/// of the optimality display. `Lemma` is the default and the one validated by
/// the adjointness tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TraceConvention {
    #[default]
    Lemma,
    Theorem,
}

/// Per-axis spatial boundary handling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisBc {
    Periodic,
    DirichletZero,
    Neumann,
}

/// Spatial boundary conditions per axis plus the time-boundary options; the
/// time boundary always carries the natural (covariant Neumann) condition.
#[derive(Clone, Copy, Debug)]
pub struct BoundarySpec {
    pub x1: AxisBc,
    pub x2: AxisBc,
    /// Keep the connection term `u^k omega^j_0k` in the time-boundary rows
    /// (the full covariant condition); disabling leaves plain `d_t u = 0`.
    pub time_neumann_connection: bool,
}

impl BoundarySpec {
    pub fn dirichlet() -> Self {
        BoundarySpec {
            x1: AxisBc::DirichletZero,
            x2: AxisBc::DirichletZero,
            time_neumann_connection: true,
        }
    }

    pub fn neumann() -> Self {
        BoundarySpec { x1: AxisBc::Neumann, x2: AxisBc::Neumann, time_neumann_connection: true }
    }

    pub fn periodic_both() -> Self {
        BoundarySpec { x1: AxisBc::Periodic, x2: AxisBc::Periodic, time_neumann_connection: true }
    }

    pub fn periodic_x1(other: AxisBc) -> Self {
        BoundarySpec { x1: AxisBc::Periodic, x2: other, time_neumann_connection: true }
    }

    pub fn periodic_x2(other: AxisBc) -> Self {
        BoundarySpec { x1: other, x2: AxisBc::Periodic, time_neumann_connection: true }
    }

    pub fn axis(&self, axis: usize) -> AxisBc {
        match axis {
            1 => self.x1,
            2 => self.x2,
            _ => panic!("spatial axis expected"),
        }
    }

    fn validate(&self, wrap: [bool; 2]) -> Result<()> {
        for (k, bc) in [self.x1, self.x2].into_iter().enumerate() {
            let periodic = bc == AxisBc::Periodic;
            if periodic != wrap[k] {
                return Err(Error::InconsistentPeriodicity(format!(
                    "axis x{}: boundary {:?} vs surface wrap {}",
                    k + 1,
                    bc,
                    wrap[k]
                )));
            }
        }
        Ok(())
    }
}

/// The four coefficient tensors of the optimality system, one value set per
/// grid point. Layouts: `forcing[j]`, `zeroth[j][m]` (multiplies `u^m`),
/// `first[a][j][k]` (multiplies `d_a u^k`, `a` a space-time axis),
/// `second[l][m]` (multiplies `d_lm u^j`).
#[derive(Clone, Debug)]
pub struct CoefficientFields<T> {
    pub dims: GridDims,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub forcing: Vec<[T; 2]>,
    pub zeroth: Vec<Mat2<T>>,
    pub first: Vec<[Mat2<T>; 3]>,
    pub second: Vec<Mat3<T>>,
}

/// Builds the coefficient tensors from the geometric fields and the image
/// derivatives.
pub fn pde_coefficients<T: Scalar>(
    geom: &GeometryField<T>,
    frame: &FrameField<T>,
    conn: &ConnectionField<T>,
    imderiv: &ImageDerivatives<T>,
    beta: T,
    gamma: T,
    trace: TraceConvention,
) -> Result<CoefficientFields<T>> {
    let dims = geom.dims;
    if imderiv.dims != dims || frame.dims != dims || conn.dims != dims {
        return Err(Error::shape_mismatch(
            format!("{dims:?}"),
            "coefficient inputs on differing grids".to_string(),
        ));
    }
    let alpha = geom.alpha;
    let inv_alpha = alpha.recip();

    // grid derivatives of the connection coefficients, central/one-sided
    let domega = [
        axis_derivative(dims, 0, false, geom.steps.h_t, &conn.omega),
        axis_derivative(dims, 1, geom.wrap[0], geom.steps.h_1, &conn.omega),
        axis_derivative(dims, 2, geom.wrap[1], geom.steps.h_2, &conn.omega),
    ];

    let n = dims.len();
    let mut forcing = Vec::with_capacity(n);
    let mut zeroth = Vec::with_capacity(n);
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for p in 0..n {
        let a = &frame.a[p];
        let om = &conn.omega[p];

        let mut abar = [[T::zero(); 3]; 3];
        abar[0][0] = inv_alpha;
        let mut dabar = [[[T::zero(); 3]; 3]; 3];
        for i in 0..2 {
            for l in 0..2 {
                abar[1 + i][1 + l] = a[i][l];
                for dir in 0..3 {
                    dabar[dir][1 + i][1 + l] = frame.da[p][dir][i][l];
                }
            }
        }

        // image gradient in frame components: G_m = d_l I a^l_m
        let d_i = [imderiv.d1[p], imderiv.d2[p]];
        let g_frame = [
            a[0][0] * d_i[0] + a[0][1] * d_i[1],
            a[1][0] * d_i[0] + a[1][1] * d_i[1],
        ];
        let dit = imderiv.dt[p];
        forcing.push([dit * g_frame[0], dit * g_frame[1]]);

        // Frame divergences div(X_i) = omega^k_ki drive the first-order
        // transport part of the Bochner operator. The time entry equals
        // tr(g^-1 d_t g) / (2 alpha), the trace factor of the optimality
        // system; the `Theorem` convention doubles that one entry.
        let mut div = [T::zero(); 3];
        for i in 0..3 {
            for k in 0..3 {
                div[i] = div[i] + om[k][k][i];
            }
        }
        if trace == TraceConvention::Theorem {
            div[0] = div[0] + div[0];
        }

        let mut bmat = [[T::zero(); 2]; 2];
        for j in 0..2 {
            for m in 0..2 {
                let mut reg = T::zero();
                for i in 0..3 {
                    // abar^l_i d_l omega^j_im
                    let mut dterm = T::zero();
                    for l in 0..3 {
                        let al = abar[i][l];
                        if al != T::zero() {
                            dterm = dterm + al * domega[l][p][1 + j][i][1 + m];
                        }
                    }
                    // omega^n_im omega^j_in
                    let mut sq = T::zero();
                    for nn in 0..3 {
                        sq = sq + om[nn][i][1 + m] * om[1 + j][i][nn];
                    }
                    // transport: div(X_i) omega^j_im
                    reg = reg + dterm + sq + div[i] * om[1 + j][i][1 + m];
                }
                let mut v = g_frame[m] * g_frame[j] - gamma * reg;
                if j == m {
                    v = v + beta;
                }
                bmat[j][m] = v;
            }
        }
        zeroth.push(bmat);

        let mut cten = [[[T::zero(); 2]; 2]; 3];
        for axis in 0..3 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut v = T::zero();
                    for i in 0..3 {
                        if j == k {
                            // abar^l_i d_l abar^axis_i plus transport
                            for l in 0..3 {
                                let al = abar[i][l];
                                if al != T::zero() {
                                    v = v + al * dabar[l][i][axis];
                                }
                            }
                            v = v + div[i] * abar[i][axis];
                        }
                        v = v + T::two() * om[1 + j][i][1 + k] * abar[i][axis];
                    }
                    cten[axis][j][k] = -gamma * v;
                }
            }
        }
        first.push(cten);

        let mut dmat = [[T::zero(); 3]; 3];
        for l in 0..3 {
            for m in 0..3 {
                let mut v = T::zero();
                for i in 0..3 {
                    v = v + abar[i][l] * abar[i][m];
                }
                dmat[l][m] = -gamma * v;
            }
        }
        second.push(dmat);
    }

    Ok(CoefficientFields { dims, alpha, beta, gamma, forcing, zeroth, first, second })
}

/// Assembled sparse space-time system `M u = rhs` with two frame components
/// per grid point, unknown ordering `2 * point + component` with points in
/// `[t][x1][x2]` order.
#[derive(Clone, Debug)]
pub struct LinearSystem<T> {
    pub dims: GridDims,
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
}

impl<T: Scalar> LinearSystem<T> {
    pub fn n_unknowns(&self) -> usize {
        self.rhs.len()
    }
}

#[inline]
pub fn unknown_index(dims: &GridDims, p: usize, comp: usize) -> usize {
    debug_assert!(comp < 2 && p < dims.len());
    2 * p + comp
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RowKind {
    Interior,
    Dirichlet,
    /// spatial axis (1 or 2) and whether we sit on the high edge
    SpatialNeumann(usize, bool),
    TimeNeumann,
}

fn classify(dims: &GridDims, bspec: &BoundarySpec, t: usize, i1: usize, i2: usize) -> RowKind {
    for (axis, idx, n) in [(1usize, i1, dims.n1), (2, i2, dims.n2)] {
        if bspec.axis(axis) == AxisBc::DirichletZero && (idx == 0 || idx == n - 1) {
            return RowKind::Dirichlet;
        }
    }
    for (axis, idx, n) in [(1usize, i1, dims.n1), (2, i2, dims.n2)] {
        if bspec.axis(axis) == AxisBc::Neumann && (idx == 0 || idx == n - 1) {
            return RowKind::SpatialNeumann(axis, idx == n - 1);
        }
    }
    if t == 0 || t == dims.nt - 1 {
        return RowKind::TimeNeumann;
    }
    RowKind::Interior
}

/// Assembles the sparse system. Interior rows discretize the optimality
/// operator with central first derivatives, three-point second derivatives
/// and the symmetric four-point cross stencil; boundary rows implement the
/// covariant time-Neumann condition (second-order one-sided), pin `u = 0`
/// (Dirichlet) or impose the covariant conormal condition (Neumann).
pub fn assemble_system<T: Scalar>(
    coeffs: &CoefficientFields<T>,
    bspec: &BoundarySpec,
    geom: &GeometryField<T>,
    frame: &FrameField<T>,
    conn: &ConnectionField<T>,
) -> Result<LinearSystem<T>> {
    let dims = coeffs.dims;
    if geom.dims != dims || conn.dims != dims || frame.dims != dims {
        return Err(Error::shape_mismatch(format!("{dims:?}"), "assembly inputs"));
    }
    bspec.validate(geom.wrap)?;
    if dims.nt < 3 || dims.n1 < 3 || dims.n2 < 3 {
        return Err(Error::GridTooSmall(format!(
            "system grid {}x{}x{} needs at least 3 points per axis",
            dims.nt, dims.n1, dims.n2
        )));
    }

    let wrap3 = [false, geom.wrap[0], geom.wrap[1]];
    let steps = [geom.steps.h_t, geom.steps.h_1, geom.steps.h_2];
    let inv_alpha = geom.alpha.recip();
    let n_unknowns = 2 * dims.len();
    let mut rows: Vec<Vec<(u32, T)>> = Vec::with_capacity(n_unknowns);
    let mut rhs = vec![T::zero(); n_unknowns];

    for t in 0..dims.nt {
        for i1 in 0..dims.n1 {
            for i2 in 0..dims.n2 {
                let p = dims.index(t, i1, i2);
                let kind = classify(&dims, bspec, t, i1, i2);
                for comp in 0..2 {
                    let row_id = unknown_index(&dims, p, comp);
                    let mut row: Vec<(u32, T)> = Vec::with_capacity(40);
                    match kind {
                        RowKind::Dirichlet => {
                            row.push((row_id as u32, T::one()));
                        }
                        RowKind::TimeNeumann => {
                            let st = deriv1(dims.nt, t, false);
                            let w = inv_alpha / steps[0];
                            for (q, c) in st.iter() {
                                let col = unknown_index(&dims, dims.index(q, i1, i2), comp);
                                row.push((col as u32, T::lit(c) * w));
                            }
                            if bspec.time_neumann_connection {
                                for k in 0..2 {
                                    let v = conn.omega[p][1 + comp][0][1 + k];
                                    if v != T::zero() {
                                        row.push((unknown_index(&dims, p, k) as u32, v));
                                    }
                                }
                            }
                        }
                        RowKind::SpatialNeumann(axis, high) => {
                            // outward conormal of the boundary face w.r.t. g
                            let ginv = &geom.ginv[p];
                            let ax = axis - 1;
                            let len = ginv[ax][ax].sqrt();
                            let sign = if high { T::one() } else { -T::one() };
                            let nu = [sign * ginv[ax][0] / len, sign * ginv[ax][1] / len];
                            for l in 0..2 {
                                if nu[l] == T::zero() {
                                    continue;
                                }
                                let n_axis = dims.size_along(1 + l);
                                let along = [t, i1, i2][1 + l];
                                let st = deriv1(n_axis, along, wrap3[1 + l]);
                                for (q, c) in st.iter() {
                                    let qp = match l {
                                        0 => dims.index(t, q, i2),
                                        _ => dims.index(t, i1, q),
                                    };
                                    let col = unknown_index(&dims, qp, comp);
                                    row.push((col as u32, nu[l] * T::lit(c) / steps[1 + l]));
                                }
                            }
                            // connection part of the covariant derivative
                            let b = &frame.b[p];
                            let nu_frame = [
                                nu[0] * b[0][0] + nu[1] * b[1][0],
                                nu[0] * b[0][1] + nu[1] * b[1][1],
                            ];
                            for k in 0..2 {
                                let mut v = T::zero();
                                for i in 0..2 {
                                    v = v + nu_frame[i] * conn.omega[p][1 + comp][1 + i][1 + k];
                                }
                                if v != T::zero() {
                                    row.push((unknown_index(&dims, p, k) as u32, v));
                                }
                            }
                        }
                        RowKind::Interior => {
                            // zeroth order
                            for m in 0..2 {
                                let v = coeffs.zeroth[p][comp][m];
                                if v != T::zero() {
                                    row.push((unknown_index(&dims, p, m) as u32, v));
                                }
                            }
                            // first order, central differences
                            for axis in 0..3 {
                                let h2 = T::two() * steps[axis];
                                let plus = dims
                                    .neighbor(t, i1, i2, axis, 1, wrap3[axis])
                                    .expect("interior row has neighbors");
                                let minus = dims
                                    .neighbor(t, i1, i2, axis, -1, wrap3[axis])
                                    .expect("interior row has neighbors");
                                for k in 0..2 {
                                    let v = coeffs.first[p][axis][comp][k];
                                    if v != T::zero() {
                                        row.push((unknown_index(&dims, plus, k) as u32, v / h2));
                                        row.push((unknown_index(&dims, minus, k) as u32, -v / h2));
                                    }
                                }
                            }
                            // second order, diagonal three-point
                            for axis in 0..3 {
                                let v = coeffs.second[p][axis][axis];
                                if v == T::zero() {
                                    continue;
                                }
                                let hh = steps[axis] * steps[axis];
                                let plus = dims
                                    .neighbor(t, i1, i2, axis, 1, wrap3[axis])
                                    .expect("interior row has neighbors");
                                let minus = dims
                                    .neighbor(t, i1, i2, axis, -1, wrap3[axis])
                                    .expect("interior row has neighbors");
                                row.push((unknown_index(&dims, plus, comp) as u32, v / hh));
                                row.push((unknown_index(&dims, minus, comp) as u32, v / hh));
                                row.push((unknown_index(&dims, p, comp) as u32, -T::two() * v / hh));
                            }
                            // mixed second order, symmetric four-point cross;
                            // the off-diagonal pair (l,m)+(m,l) is folded in
                            // with the factor 2
                            for (l, m) in [(0usize, 1usize), (0, 2), (1, 2)] {
                                let v = coeffs.second[p][l][m];
                                if v == T::zero() {
                                    continue;
                                }
                                let w = v / (T::two() * steps[l] * steps[m]);
                                for (dl, dm, s) in [
                                    (1isize, 1isize, T::one()),
                                    (1, -1, -T::one()),
                                    (-1, 1, -T::one()),
                                    (-1, -1, T::one()),
                                ] {
                                    let q1 = dims
                                        .neighbor(t, i1, i2, l, dl, wrap3[l])
                                        .expect("interior row has neighbors");
                                    let (qt, qi1, qi2) = dims.coords(q1);
                                    let q2 = dims
                                        .neighbor(qt, qi1, qi2, m, dm, wrap3[m])
                                        .expect("interior row has neighbors");
                                    row.push((unknown_index(&dims, q2, comp) as u32, s * w));
                                }
                            }
                            rhs[row_id] = -coeffs.forcing[p][comp];
                        }
                    }
                    rows.push(row);
                }
            }
        }
    }

    Ok(LinearSystem { dims, matrix: CsrMatrix::from_rows(n_unknowns, rows), rhs })
}

/// Pointwise residual of the optimality operator, `M u + forcing`. Only the
/// interior rows carry the operator; boundary rows hold their boundary
/// equation residual instead.
pub fn operator_residual<T: Scalar>(
    system: &LinearSystem<T>,
    coeffs: &CoefficientFields<T>,
    u: &[T],
) -> Vec<T> {
    let mut r = vec![T::zero(); system.n_unknowns()];
    system.matrix.matvec(u, &mut r);
    for p in 0..coeffs.dims.len() {
        for comp in 0..2 {
            let id = unknown_index(&coeffs.dims, p, comp);
            r[id] = r[id] + coeffs.forcing[p][comp];
        }
    }
    r
}
