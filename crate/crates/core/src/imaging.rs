//! Image sequences on the chart: loading, normalization, pre-smoothing and
//! space-time derivatives.

use crate::error::{Error, Result};
use crate::grid::{deriv1, GridDims, GridSteps};
use crate::Scalar;
use std::io::Read;
use std::path::Path;

/// Grey-value image sequence on the `nt x n1 x n2` grid, `[t][x1][x2]` order.
#[derive(Clone, Debug)]
pub struct ImageSequence<T> {
    pub dims: GridDims,
    pub wrap: [bool; 2],
    pub values: Vec<T>,
}

impl<T: Scalar> ImageSequence<T> {
    pub fn from_fn(
        dims: GridDims,
        wrap: [bool; 2],
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut values = Vec::with_capacity(dims.len());
        for t in 0..dims.nt {
            for i1 in 0..dims.n1 {
                for i2 in 0..dims.n2 {
                    values.push(f(t, i1, i2));
                }
            }
        }
        ImageSequence { dims, wrap, values }
    }

    pub fn constant(dims: GridDims, wrap: [bool; 2], value: T) -> Self {
        ImageSequence { dims, wrap, values: vec![value; dims.len()] }
    }
}

/// One decoded PGM frame.
#[derive(Debug)]
struct PgmFrame {
    width: usize,
    height: usize,
    /// Intensities already scaled to the unit interval by the format maxval.
    values: Vec<f64>,
}

fn parse_pgm(bytes: &[u8], what: &str) -> Result<PgmFrame> {
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<Vec<u8>> {
        // skip whitespace and '#' comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::FormatError(format!("{what}: truncated PGM header")));
        }
        Ok(bytes[start..pos].to_vec())
    };
    let magic = token(bytes)?;
    if magic != b"P5" {
        return Err(Error::FormatError(format!("{what}: not a binary PGM (P5) file")));
    }
    let parse_num = |tok: Vec<u8>| -> Result<usize> {
        std::str::from_utf8(&tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::FormatError(format!("{what}: bad PGM header field")))
    };
    let width = parse_num(token(bytes)?)?;
    let height = parse_num(token(bytes)?)?;
    let maxval = parse_num(token(bytes)?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::FormatError(format!("{what}: PGM maxval {maxval} out of range")));
    }
    // single whitespace byte separates header and raster
    pos += 1;
    let n = width * height;
    let wide = maxval > 255;
    let need = n * if wide { 2 } else { 1 };
    if bytes.len() < pos + need {
        return Err(Error::FormatError(format!("{what}: PGM raster truncated")));
    }
    let raster = &bytes[pos..pos + need];
    let scale = 1.0 / maxval as f64;
    let values = if wide {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale)
            .collect()
    } else {
        raster.iter().map(|&b| b as f64 * scale).collect()
    };
    Ok(PgmFrame { width, height, values })
}

/// Loads a sequence of binary PGM frames (one file per frame, caller-supplied
/// order; directory loaders sort lexicographically). Rows map to `x1`,
/// columns to `x2`; intensities are scaled by the format maxval.
pub fn load_pgm_sequence<T: Scalar>(
    paths: &[impl AsRef<Path>],
    wrap: [bool; 2],
) -> Result<ImageSequence<T>> {
    if paths.is_empty() {
        return Err(Error::FormatError("no PGM frames given".into()));
    }
    let mut frames = Vec::with_capacity(paths.len());
    for p in paths {
        let mut bytes = Vec::new();
        std::fs::File::open(p.as_ref())?.read_to_end(&mut bytes)?;
        frames.push(parse_pgm(&bytes, &p.as_ref().display().to_string())?);
    }
    let (w, h) = (frames[0].width, frames[0].height);
    for (k, fr) in frames.iter().enumerate() {
        if fr.width != w || fr.height != h {
            return Err(Error::shape_mismatch(
                format!("{w}x{h} (frame 0)"),
                format!("{}x{} (frame {k})", fr.width, fr.height),
            ));
        }
    }
    let dims = GridDims::new(frames.len(), h, w);
    let mut values = Vec::with_capacity(dims.len());
    for fr in &frames {
        values.extend(fr.values.iter().map(|&v| T::lit(v)));
    }
    Ok(ImageSequence { dims, wrap, values })
}

/// Loads all `.pgm` files of a directory in lexicographic order.
pub fn load_pgm_dir<T: Scalar>(dir: impl AsRef<Path>, wrap: [bool; 2]) -> Result<ImageSequence<T>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e.eq_ignore_ascii_case("pgm")).unwrap_or(false))
        .collect();
    paths.sort();
    load_pgm_sequence(&paths, wrap)
}

/// Separable discrete Gaussian pre-smoothing with kernel radius `ceil(3
/// sigma)`; periodic axes convolve across the wrap, the rest reflect.
/// `sigma = 0` is the identity along that axis.
pub fn gaussian_presmooth<T: Scalar>(
    img: &ImageSequence<T>,
    sigma_space: f64,
    sigma_time: f64,
) -> ImageSequence<T> {
    let mut out = img.clone();
    let sigmas = [sigma_time, sigma_space, sigma_space];
    for axis in 0..3 {
        if sigmas[axis] > 0.0 {
            out = smooth_axis(&out, axis, sigmas[axis]);
        }
    }
    out
}

fn gaussian_kernel<T: Scalar>(sigma: f64) -> Vec<T> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut w: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k as f64) * (k as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w.into_iter().map(T::lit).collect()
}

fn smooth_axis<T: Scalar>(img: &ImageSequence<T>, axis: usize, sigma: f64) -> ImageSequence<T> {
    let dims = img.dims;
    let kernel = gaussian_kernel::<T>(sigma);
    let radius = (kernel.len() / 2) as i64;
    let n = dims.size_along(axis) as i64;
    let wraps = axis > 0 && img.wrap[axis - 1];
    let mut values = vec![T::zero(); dims.len()];
    for t in 0..dims.nt {
        for i1 in 0..dims.n1 {
            for i2 in 0..dims.n2 {
                let along = [t, i1, i2][axis] as i64;
                let mut acc = T::zero();
                for (k, &w) in kernel.iter().enumerate() {
                    let mut c = along + k as i64 - radius;
                    if wraps {
                        c = c.rem_euclid(n);
                    } else {
                        // reflect about the boundary samples
                        while c < 0 || c >= n {
                            if c < 0 {
                                c = -c;
                            }
                            if c >= n {
                                c = 2 * (n - 1) - c;
                            }
                        }
                    }
                    let q = match axis {
                        0 => dims.index(c as usize, i1, i2),
                        1 => dims.index(t, c as usize, i2),
                        _ => dims.index(t, i1, c as usize),
                    };
                    acc = acc + w * img.values[q];
                }
                values[dims.index(t, i1, i2)] = acc;
            }
        }
    }
    ImageSequence { dims, wrap: img.wrap, values }
}

/// Space-time image derivatives in the coordinate basis.
#[derive(Clone, Debug)]
pub struct ImageDerivatives<T> {
    pub dims: GridDims,
    pub dt: Vec<T>,
    pub d1: Vec<T>,
    pub d2: Vec<T>,
}

/// Central differences in the interior and across periodic wraps, one-sided
/// second-order at non-periodic boundaries.
pub fn image_derivatives<T: Scalar>(
    img: &ImageSequence<T>,
    steps: GridSteps<T>,
) -> Result<ImageDerivatives<T>> {
    let dims = img.dims;
    if dims.nt < 3 || dims.n1 < 3 || dims.n2 < 3 {
        return Err(Error::GridTooSmall(format!(
            "image grid {}x{}x{} needs at least 3 points per axis",
            dims.nt, dims.n1, dims.n2
        )));
    }
    let diff = |axis: usize, wraps: bool, h: T| -> Vec<T> {
        let n_axis = dims.size_along(axis);
        let inv_h = h.recip();
        let mut out = vec![T::zero(); dims.len()];
        for t in 0..dims.nt {
            for i1 in 0..dims.n1 {
                for i2 in 0..dims.n2 {
                    let along = [t, i1, i2][axis];
                    let st = deriv1(n_axis, along, wraps);
                    let mut acc = T::zero();
                    for (q, w) in st.iter() {
                        let src = match axis {
                            0 => dims.index(q, i1, i2),
                            1 => dims.index(t, q, i2),
                            _ => dims.index(t, i1, q),
                        };
                        acc = acc + T::lit(w) * img.values[src];
                    }
                    out[dims.index(t, i1, i2)] = acc * inv_h;
                }
            }
        }
        out
    };
    Ok(ImageDerivatives {
        dims,
        dt: diff(0, false, steps.h_t),
        d1: diff(1, img.wrap[0], steps.h_1),
        d2: diff(2, img.wrap[1], steps.h_2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> GridDims {
        GridDims::new(4, 6, 5)
    }

    #[test]
    fn derivatives_exact_for_linear_and_quadratic() {
        let img = ImageSequence::from_fn(dims(), [false, false], |t, i1, _| {
            t as f64 + (i1 as f64) * (i1 as f64)
        });
        let d = image_derivatives(&img, GridSteps::unit()).unwrap();
        for p in 0..dims().len() {
            let (_, i1, _) = dims().coords(p);
            assert!((d.dt[p] - 1.0).abs() < 1e-12, "dt exact for linear");
            assert!((d.d1[p] - 2.0 * i1 as f64).abs() < 1e-12, "d1 exact for quadratic");
            assert!(d.d2[p].abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_stencil_value_by_hand() {
        // I = x1^2, h = 1, interior point x1 = 2: (9 - 1)/2 = 4
        let img = ImageSequence::from_fn(GridDims::new(3, 5, 3), [false, false], |_, i1, _| {
            (i1 as f64) * (i1 as f64)
        });
        let d = image_derivatives(&img, GridSteps::unit()).unwrap();
        assert_eq!(d.d1[img.dims.index(1, 2, 1)], 4.0);
    }

    #[test]
    fn refinement_halving_gives_second_order() {
        let run = |n: usize| -> f64 {
            let dims = GridDims::new(3, n, n);
            let h = 1.0 / (n - 1) as f64;
            let img = ImageSequence::from_fn(dims, [false, false], |_, i1, i2| {
                ((i1 as f64) * h * 2.1).sin() * ((i2 as f64) * h * 1.7).cos()
            });
            let d = image_derivatives(&img, GridSteps::new(1.0, h, h)).unwrap();
            let mut worst = 0.0f64;
            for p in 0..dims.len() {
                let (_, i1, i2) = dims.coords(p);
                let (x, y) = (i1 as f64 * h, i2 as f64 * h);
                let exact = 2.1 * (x * 2.1).cos() * (y * 1.7).cos();
                worst = worst.max((d.d1[p] - exact).abs());
            }
            worst
        };
        let ratio = run(17) / run(33);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn presmooth_identity_and_constant() {
        let img = ImageSequence::from_fn(dims(), [true, false], |t, i1, i2| {
            (t * 31 + i1 * 7 + i2) as f64 / 120.0
        });
        let same = gaussian_presmooth(&img, 0.0, 0.0);
        assert_eq!(same.values, img.values);

        let konst = ImageSequence::<f64>::constant(dims(), [true, false], 0.42);
        let sm = gaussian_presmooth(&konst, 1.3, 0.8);
        for v in &sm.values {
            assert!((v - 0.42).abs() < 1e-12);
        }
    }

    #[test]
    fn presmooth_preserves_mass_on_periodic_axes() {
        let d = GridDims::new(3, 8, 8);
        let img = ImageSequence::from_fn(d, [true, true], |t, i1, i2| {
            if t == 1 && i1 == 3 && i2 == 4 {
                1.0
            } else {
                0.1
            }
        });
        let sm = gaussian_presmooth(&img, 1.0, 0.0);
        for t in 0..3 {
            let sum_in: f64 = (0..64).map(|q| img.values[t * 64 + q]).sum();
            let sum_out: f64 = (0..64).map(|q| sm.values[t * 64 + q]).sum();
            assert!(
                ((sum_in - sum_out) / sum_in).abs() < 1e-10,
                "frame {t}: {sum_in} vs {sum_out}"
            );
        }
    }

    #[test]
    fn impulse_center_weight_matches_kernel() {
        let d = GridDims::new(3, 31, 31);
        let img = ImageSequence::from_fn(d, [false, false], |t, i1, i2| {
            if t == 1 && i1 == 15 && i2 == 15 {
                1.0
            } else {
                0.0
            }
        });
        let sm = gaussian_presmooth(&img, 1.0, 0.0);
        let k = gaussian_kernel::<f64>(1.0);
        let center = k[k.len() / 2];
        let got = sm.values[d.index(1, 15, 15)];
        assert!((got - center * center).abs() < 1e-12);
        let total: f64 = (0..d.n1 * d.n2).map(|q| sm.values[d.n1 * d.n2 + q]).sum();
        assert!((total - 1.0).abs() < 1e-12, "kernel mass {total}");
    }

    #[test]
    fn pgm_roundtrip_8_and_16_bit() {
        // 8-bit: constant 255 -> 1.0
        let mut bytes = b"P5\n3 2\n255\n".to_vec();
        bytes.extend([255u8; 6]);
        let f = parse_pgm(&bytes, "mem").unwrap();
        assert_eq!((f.width, f.height), (3, 2));
        assert!(f.values.iter().all(|&v| v == 1.0));

        // 16-bit big-endian: 32768/65535
        let mut bytes = b"P5\n# comment\n2 1\n65535\n".to_vec();
        bytes.extend(32768u16.to_be_bytes());
        bytes.extend(0u16.to_be_bytes());
        let f = parse_pgm(&bytes, "mem").unwrap();
        assert!((f.values[0] - 32768.0 / 65535.0).abs() < 1e-12);
        assert!((f.values[0] - 0.50001).abs() < 1e-5);
        assert_eq!(f.values[1], 0.0);
    }

    #[test]
    fn pgm_bad_magic_is_format_error() {
        let bytes = b"P6\n3 2\n255\n".to_vec();
        match parse_pgm(&bytes, "mem") {
            Err(Error::FormatError(_)) => {}
            other => panic!("expected FormatError, got {other:?}"),
        }
    }
}
