//! Restarted GMRES with modified Gram-Schmidt orthogonalization and
//! Givens-rotation least squares, optionally right-preconditioned with the
//! 2x2 point-block Jacobi inverse.

use crate::assembly::LinearSystem;
use crate::linalg::{mat2_det, mat2_inv, Mat2};
use crate::sparse::CsrMatrix;
use crate::Scalar;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig<T> {
    /// Restart length of the Arnoldi process.
    pub restart: usize,
    /// Total inner-iteration budget across restarts.
    pub max_iters: usize,
    /// Relative residual target `|b - M x| / |b|`.
    pub rel_tol: T,
    pub preconditioner: Preconditioner,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            restart: 30,
            max_iters: 2000,
            rel_tol: T::lit(1e-3),
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> crate::Result<()> {
        if self.restart < 1 || self.max_iters < self.restart {
            return Err(crate::Error::InvalidSpec(
                "solver needs restart >= 1 and max_iters >= restart".into(),
            ));
        }
        let tol = self.rel_tol.as_f64();
        if !(tol > 0.0 && tol < 1.0) {
            return Err(crate::Error::InvalidSpec("rel_tol must lie in (0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterations: usize,
    /// True relative residual `|b - M x| / |b|`, recomputed after the solve.
    pub relative_residual: f64,
    pub converged: bool,
    /// Arnoldi breakdown was hit before reaching the tolerance.
    pub breakdown: bool,
    pub wall_time: f64,
    /// (cumulative inner iteration, true relative residual) per restart cycle.
    pub history: Vec<(usize, f64)>,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for k in 0..a.len() {
        s = s + a[k] * b[k];
    }
    s
}

fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Inverted 2x2 point-diagonal blocks; near-singular blocks fall back to a
/// scalar diagonal (or identity) so the preconditioner stays well defined.
struct BlockJacobi<T> {
    inv: Vec<Mat2<T>>,
}

impl<T: Scalar> BlockJacobi<T> {
    fn new(matrix: &CsrMatrix<T>) -> Self {
        let blocks = matrix.point_blocks();
        let inv = blocks
            .into_iter()
            .map(|b| {
                let det = mat2_det(&b);
                let scale = b[0][0].abs().max(b[1][1].abs()).max(T::lit(1e-300));
                if det.abs() > T::lit(1e-14) * scale * scale {
                    mat2_inv(&b)
                } else {
                    let d0 = if b[0][0].abs() > T::lit(1e-300) { b[0][0].recip() } else { T::one() };
                    let d1 = if b[1][1].abs() > T::lit(1e-300) { b[1][1].recip() } else { T::one() };
                    [[d0, T::zero()], [T::zero(), d1]]
                }
            })
            .collect();
        BlockJacobi { inv }
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (p, m) in self.inv.iter().enumerate() {
            let (a, b) = (x[2 * p], x[2 * p + 1]);
            y[2 * p] = m[0][0] * a + m[0][1] * b;
            y[2 * p + 1] = m[1][0] * a + m[1][1] * b;
        }
    }
}

/// Solves `M x = b` with restarted right-preconditioned GMRES. Returns the
/// solution and a report with the explicitly recomputed true residual.
/// A zero right-hand side short-circuits to `x = 0`. Arnoldi breakdown ends
/// the solve with the best iterate (converged only if the true residual
/// meets the tolerance).
pub fn gmres_solve<T: Scalar>(
    system: &LinearSystem<T>,
    cfg: &SolverConfig<T>,
    x0: Option<&[T]>,
) -> crate::Result<(Vec<T>, SolveReport)> {
    cfg.validate()?;
    let matrix = &system.matrix;
    let b = &system.rhs;
    let n = b.len();
    if matrix.n_rows != n || matrix.n_cols != n {
        return Err(crate::Error::shape_mismatch(
            format!("{n}x{n} system"),
            format!("{}x{} matrix", matrix.n_rows, matrix.n_cols),
        ));
    }
    let start = Instant::now();
    let bnorm = norm(b);
    if bnorm == T::zero() {
        return Ok((
            vec![T::zero(); n],
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
                breakdown: false,
                wall_time: start.elapsed().as_secs_f64(),
                history: Vec::new(),
            },
        ));
    }

    let precond = match cfg.preconditioner {
        Preconditioner::Jacobi => Some(BlockJacobi::new(matrix)),
        Preconditioner::None => None,
    };
    let apply_precond = |x: &[T], y: &mut [T]| match &precond {
        Some(p) => p.apply(x, y),
        None => y.copy_from_slice(x),
    };

    let mut x = match x0 {
        Some(v) => {
            if v.len() != n {
                return Err(crate::Error::shape_mismatch(
                    format!("{n} initial-guess entries"),
                    format!("{}", v.len()),
                ));
            }
            v.to_vec()
        }
        None => vec![T::zero(); n],
    };

    let m = cfg.restart;
    let mut history = Vec::new();
    let mut total_iters = 0usize;
    let mut breakdown = false;
    let mut converged = false;

    let mut r = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];

    'outer: while total_iters < cfg.max_iters {
        // true residual at the start of each cycle
        matrix.matvec(&x, &mut w);
        for k in 0..n {
            r[k] = b[k] - w[k];
        }
        let beta = norm(&r);
        history.push((total_iters, (beta / bnorm).as_f64()));
        if beta / bnorm <= cfg.rel_tol {
            converged = true;
            break;
        }

        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        let mut hess = vec![vec![T::zero(); m]; m + 1];
        let mut cs = vec![T::zero(); m];
        let mut sn = vec![T::zero(); m];
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut v0 = r.clone();
        let inv_beta = beta.recip();
        for v in v0.iter_mut() {
            *v = *v * inv_beta;
        }
        basis.push(v0);

        let mut k_done = 0usize;
        for k in 0..m {
            if total_iters >= cfg.max_iters {
                break;
            }
            total_iters += 1;
            // w = M P^{-1} v_k
            apply_precond(&basis[k], &mut z);
            matrix.matvec(&z, &mut w);
            // modified Gram-Schmidt
            for j in 0..=k {
                let h = dot(&w, &basis[j]);
                hess[j][k] = h;
                for i in 0..n {
                    w[i] = w[i] - h * basis[j][i];
                }
            }
            let h_next = norm(&w);
            hess[k + 1][k] = h_next;
            // apply stored Givens rotations to the new column
            for j in 0..k {
                let t1 = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                let t2 = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t1;
                hess[j + 1][k] = t2;
            }
            // new rotation eliminating hess[k+1][k]
            let denom = (hess[k][k] * hess[k][k] + h_next * h_next).sqrt();
            if denom == T::zero() {
                breakdown = true;
                k_done = k;
                break;
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = h_next / denom;
            hess[k][k] = denom;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            k_done = k + 1;

            let tiny = T::lit(1e-307);
            if h_next <= tiny {
                // happy breakdown: the Krylov space is invariant
                breakdown = true;
                break;
            }
            let mut v_next = w.clone();
            let inv_h = h_next.recip();
            for v in v_next.iter_mut() {
                *v = *v * inv_h;
            }
            basis.push(v_next);

            if (g[k + 1].abs() / bnorm) <= cfg.rel_tol {
                break;
            }
        }

        if k_done > 0 {
            // back substitution for the least-squares coefficients
            let mut y = vec![T::zero(); k_done];
            for j in (0..k_done).rev() {
                let mut s = g[j];
                for l in j + 1..k_done {
                    s = s - hess[j][l] * y[l];
                }
                y[j] = s / hess[j][j];
            }
            // x += P^{-1} (V y)
            let mut update = vec![T::zero(); n];
            for (j, yj) in y.iter().enumerate() {
                for i in 0..n {
                    update[i] = update[i] + *yj * basis[j][i];
                }
            }
            apply_precond(&update, &mut z);
            for i in 0..n {
                x[i] = x[i] + z[i];
            }
        }

        if breakdown {
            break 'outer;
        }
    }

    // explicit true residual
    matrix.matvec(&x, &mut w);
    for k in 0..n {
        r[k] = b[k] - w[k];
    }
    let rel = (norm(&r) / bnorm).as_f64();
    history.push((total_iters, rel));
    let converged = converged || rel <= cfg.rel_tol.as_f64();
    Ok((
        x,
        SolveReport {
            iterations: total_iters,
            relative_residual: rel,
            converged,
            breakdown,
            wall_time: start.elapsed().as_secs_f64(),
            history,
        },
    ))
}
