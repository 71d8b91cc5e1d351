//! Regular space-time grids and finite-difference stencils.
//!
//! All fields live on an `nt x n1 x n2` grid over `[0,T] x M`, stored flat in
//! `[t][x1][x2]` order. Axis 0 is time (never periodic), axes 1 and 2 are the
//! chart coordinates with optional periodic identification.

use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridDims {
    pub nt: usize,
    pub n1: usize,
    pub n2: usize,
}

impl GridDims {
    pub fn new(nt: usize, n1: usize, n2: usize) -> Self {
        GridDims { nt, n1, n2 }
    }

    pub fn len(&self) -> usize {
        self.nt * self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, t: usize, i1: usize, i2: usize) -> usize {
        (t * self.n1 + i1) * self.n2 + i2
    }

    #[inline]
    pub fn coords(&self, p: usize) -> (usize, usize, usize) {
        let i2 = p % self.n2;
        let r = p / self.n2;
        (r / self.n1, r % self.n1, i2)
    }

    pub fn size_along(&self, axis: usize) -> usize {
        match axis {
            0 => self.nt,
            1 => self.n1,
            2 => self.n2,
            _ => panic!("axis out of range"),
        }
    }

    /// Index of the neighbor `offset` steps along `axis`, wrapping if allowed.
    /// Returns `None` when the neighbor falls outside a non-periodic axis.
    #[inline]
    pub fn neighbor(
        &self,
        t: usize,
        i1: usize,
        i2: usize,
        axis: usize,
        offset: isize,
        wrap: bool,
    ) -> Option<usize> {
        let (mut c, n) = match axis {
            0 => (t as isize, self.nt as isize),
            1 => (i1 as isize, self.n1 as isize),
            2 => (i2 as isize, self.n2 as isize),
            _ => panic!("axis out of range"),
        };
        c += offset;
        if wrap {
            c = c.rem_euclid(n);
        } else if c < 0 || c >= n {
            return None;
        }
        let (t, i1, i2) = match axis {
            0 => (c as usize, i1, i2),
            1 => (t, c as usize, i2),
            _ => (t, i1, c as usize),
        };
        Some(self.index(t, i1, i2))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GridSteps<T> {
    pub h_t: T,
    pub h_1: T,
    pub h_2: T,
}

impl<T: Scalar> GridSteps<T> {
    pub fn new(h_t: T, h_1: T, h_2: T) -> Self {
        GridSteps { h_t, h_1, h_2 }
    }

    pub fn unit() -> Self {
        GridSteps { h_t: T::one(), h_1: T::one(), h_2: T::one() }
    }

    pub fn along(&self, axis: usize) -> T {
        match axis {
            0 => self.h_t,
            1 => self.h_1,
            2 => self.h_2,
            _ => panic!("axis out of range"),
        }
    }

    pub fn halved(&self) -> Self {
        GridSteps { h_t: self.h_t * T::half(), h_1: self.h_1 * T::half(), h_2: self.h_2 * T::half() }
    }
}

/// A 1-D finite-difference stencil: grid indices along one axis with weights
/// in units of `1/h^order`.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub pts: [(usize, f64); 4],
    pub n: usize,
}

impl Stencil {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.pts[..self.n].iter().copied()
    }
}

/// Second-order first-derivative stencil: central in the interior and across
/// periodic wraps, one-sided three-point at non-periodic boundaries.
/// Weights are in units of `1/h`.
pub fn deriv1(n: usize, i: usize, wrap: bool) -> Stencil {
    assert!(n >= 3, "first-derivative stencil needs at least 3 points");
    let mut pts = [(0usize, 0.0f64); 4];
    if wrap {
        pts[0] = ((i + n - 1) % n, -0.5);
        pts[1] = ((i + 1) % n, 0.5);
        return Stencil { pts, n: 2 };
    }
    if i == 0 {
        pts[0] = (0, -1.5);
        pts[1] = (1, 2.0);
        pts[2] = (2, -0.5);
        Stencil { pts, n: 3 }
    } else if i == n - 1 {
        pts[0] = (n - 3, 0.5);
        pts[1] = (n - 2, -2.0);
        pts[2] = (n - 1, 1.5);
        Stencil { pts, n: 3 }
    } else {
        pts[0] = (i - 1, -0.5);
        pts[1] = (i + 1, 0.5);
        Stencil { pts, n: 2 }
    }
}

/// Cells that finite-difference operators can be applied to: fixed-size
/// bundles of scalars attached to each grid point.
pub trait Cell<T: Scalar>: Copy {
    fn zeros() -> Self;
    /// `self += w * x`
    fn axpy(&mut self, w: T, x: &Self);
}

impl<T: Scalar> Cell<T> for T {
    fn zeros() -> Self {
        T::zero()
    }
    fn axpy(&mut self, w: T, x: &Self) {
        *self = *self + w * *x;
    }
}

impl<T: Scalar, const N: usize> Cell<T> for [T; N] {
    fn zeros() -> Self {
        [T::zero(); N]
    }
    fn axpy(&mut self, w: T, x: &Self) {
        for k in 0..N {
            self[k] = self[k] + w * x[k];
        }
    }
}

impl<T: Scalar, const N: usize, const M: usize> Cell<T> for [[T; N]; M] {
    fn zeros() -> Self {
        [[T::zero(); N]; M]
    }
    fn axpy(&mut self, w: T, x: &Self) {
        for r in 0..M {
            for c in 0..N {
                self[r][c] = self[r][c] + w * x[r][c];
            }
        }
    }
}

impl<T: Scalar, const N: usize, const M: usize, const K: usize> Cell<T> for [[[T; N]; M]; K] {
    fn zeros() -> Self {
        [[[T::zero(); N]; M]; K]
    }
    fn axpy(&mut self, w: T, x: &Self) {
        for s in 0..K {
            for r in 0..M {
                for c in 0..N {
                    self[s][r][c] = self[s][r][c] + w * x[s][r][c];
                }
            }
        }
    }
}

/// Differentiates a per-point field along one grid axis with the
/// second-order stencils of [`deriv1`].
pub fn axis_derivative<T: Scalar, C: Cell<T>>(
    dims: GridDims,
    axis: usize,
    wrap: bool,
    h: T,
    data: &[C],
) -> Vec<C> {
    assert_eq!(data.len(), dims.len());
    let n_axis = dims.size_along(axis);
    let inv_h = T::one() / h;
    let mut out = vec![C::zeros(); data.len()];
    for t in 0..dims.nt {
        for i1 in 0..dims.n1 {
            for i2 in 0..dims.n2 {
                let p = dims.index(t, i1, i2);
                let along = match axis {
                    0 => t,
                    1 => i1,
                    _ => i2,
                };
                let st = deriv1(n_axis, along, wrap);
                let mut acc = C::zeros();
                for (q, w) in st.iter() {
                    let src = match axis {
                        0 => dims.index(q, i1, i2),
                        1 => dims.index(t, q, i2),
                        _ => dims.index(t, i1, q),
                    };
                    acc.axpy(T::lit(w) * inv_h, &data[src]);
                }
                out[p] = acc;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let d = GridDims::new(3, 4, 5);
        for p in 0..d.len() {
            let (t, i, j) = d.coords(p);
            assert_eq!(d.index(t, i, j), p);
        }
    }

    #[test]
    fn neighbor_wraps_and_clips() {
        let d = GridDims::new(3, 4, 5);
        assert_eq!(d.neighbor(0, 0, 0, 1, -1, true), Some(d.index(0, 3, 0)));
        assert_eq!(d.neighbor(0, 0, 0, 1, -1, false), None);
        assert_eq!(d.neighbor(2, 1, 1, 0, 1, false), None);
        assert_eq!(d.neighbor(1, 1, 1, 2, 1, false), Some(d.index(1, 1, 2)));
    }

    #[test]
    fn deriv1_exact_for_quadratics() {
        // central and one-sided stencils are both exact on x^2
        let n = 7;
        let f: Vec<f64> = (0..n).map(|i| (i as f64) * (i as f64)).collect();
        for i in 0..n {
            let st = deriv1(n, i, false);
            let d: f64 = st.iter().map(|(q, w)| w * f[q]).sum();
            assert!((d - 2.0 * i as f64).abs() < 1e-12, "i={i} d={d}");
        }
    }

    #[test]
    fn deriv1_periodic_wraps() {
        let n = 8;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
        // periodic central difference at the wrap point
        let st = deriv1(n, 0, true);
        let d: f64 = st.iter().map(|(q, w)| w * f[q]).sum::<f64>() / h;
        // cos(0) = 1 up to O(h^2)
        assert!((d - 1.0).abs() < h * h);
    }

    #[test]
    fn axis_derivative_on_vectors() {
        let dims = GridDims::new(4, 3, 3);
        let mut data = vec![[0.0f64; 3]; dims.len()];
        for t in 0..4 {
            for i in 0..3 {
                for j in 0..3 {
                    data[dims.index(t, i, j)] = [t as f64, 2.0 * t as f64, 0.0];
                }
            }
        }
        let d = axis_derivative(dims, 0, false, 1.0, &data);
        for v in &d {
            assert!((v[0] - 1.0).abs() < 1e-12);
            assert!((v[1] - 2.0).abs() < 1e-12);
            assert!(v[2].abs() < 1e-12);
        }
    }
}
