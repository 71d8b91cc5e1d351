//! On-disk formats: sampled surfaces (`SRF1`), raw image stacks (`IMG1`),
//! per-frame Middlebury-style `.flo` flow files, ambient `FL3D` flow stacks,
//! binary PPM images and MatrixMarket dumps.
//!
//! All multi-byte values are little-endian except the big-endian raster of
//! 16-bit PGM (handled in [`crate::imaging`]).

use crate::error::{Error, Result};
use crate::geometry::SurfaceGrid;
use crate::grid::{GridDims, GridSteps};
use crate::imaging::ImageSequence;
use crate::sparse::CsrMatrix;
use crate::Scalar;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

pub const FLO_MAGIC: f32 = 202021.25;

struct Reader {
    buf: Vec<u8>,
    pos: usize,
    what: String,
}

impl Reader {
    fn open(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Ok(Reader { buf, pos: 0, what: path.display().to_string() })
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::FormatError(format!("{}: truncated file", self.what)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, expect: &[u8; 4]) -> Result<()> {
        let got: [u8; 4] = self.take(4)?.try_into().unwrap();
        if &got != expect {
            return Err(Error::FormatError(format!(
                "{}: bad magic {:?}, expected {:?}",
                self.what, got, expect
            )));
        }
        Ok(())
    }

    fn i32le(&mut self) -> Result<i32> {
        let b = self.take(4)?;
        Ok(i32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn dim(&mut self) -> Result<usize> {
        let v = self.i32le()?;
        if v <= 0 || v > 1 << 24 {
            return Err(Error::FormatError(format!("{}: dimension {v} out of range", self.what)));
        }
        Ok(v as usize)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64le(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]))
    }

    fn f32le(&mut self) -> Result<f32> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Writes a sampled surface; derivative arrays are not stored, loaders
/// rebuild them by central differences.
pub fn write_srf1<T: Scalar>(path: impl AsRef<Path>, surface: &SurfaceGrid<T>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path.as_ref())?);
    w.write_all(b"SRF1")?;
    for d in [surface.dims.nt, surface.dims.n1, surface.dims.n2] {
        w.write_all(&(d as i32).to_le_bytes())?;
    }
    w.write_all(&[surface.wrap[0] as u8, surface.wrap[1] as u8])?;
    for h in [surface.steps.h_t, surface.steps.h_1, surface.steps.h_2] {
        w.write_all(&h.as_f64().to_le_bytes())?;
    }
    for p in &surface.f {
        for k in 0..3 {
            w.write_all(&p[k].as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_srf1<T: Scalar>(path: impl AsRef<Path>) -> Result<SurfaceGrid<T>> {
    let mut r = Reader::open(path.as_ref())?;
    r.magic(b"SRF1")?;
    let nt = r.dim()?;
    let n1 = r.dim()?;
    let n2 = r.dim()?;
    let wrap = [r.u8()? != 0, r.u8()? != 0];
    let steps = GridSteps::new(T::lit(r.f64le()?), T::lit(r.f64le()?), T::lit(r.f64le()?));
    let dims = GridDims::new(nt, n1, n2);
    let mut f = Vec::with_capacity(dims.len());
    for _ in 0..dims.len() {
        f.push([T::lit(r.f64le()?), T::lit(r.f64le()?), T::lit(r.f64le()?)]);
    }
    SurfaceGrid::from_samples(dims, steps, wrap, f)
}

/// Writes a raw float32 image stack.
pub fn write_img1<T: Scalar>(path: impl AsRef<Path>, img: &ImageSequence<T>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path.as_ref())?);
    w.write_all(b"IMG1")?;
    for d in [img.dims.nt, img.dims.n1, img.dims.n2] {
        w.write_all(&(d as i32).to_le_bytes())?;
    }
    for v in &img.values {
        w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a raw image stack. With `normalize`, values are min-max scaled to
/// the unit interval; otherwise they are taken as stored.
pub fn read_img1<T: Scalar>(
    path: impl AsRef<Path>,
    wrap: [bool; 2],
    normalize: bool,
) -> Result<ImageSequence<T>> {
    let mut r = Reader::open(path.as_ref())?;
    r.magic(b"IMG1")?;
    let nt = r.dim()?;
    let n1 = r.dim()?;
    let n2 = r.dim()?;
    let dims = GridDims::new(nt, n1, n2);
    let mut values = Vec::with_capacity(dims.len());
    for _ in 0..dims.len() {
        values.push(r.f32le()? as f64);
    }
    if normalize {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        for v in &mut values {
            *v = (*v - lo) / span;
        }
    }
    Ok(ImageSequence { dims, wrap, values: values.into_iter().map(T::lit).collect() })
}

/// Writes one frame of pullback flow (`u~1, u~2` interleaved, row-major,
/// width = n2, height = n1) in the float32 `.flo` layout.
pub fn write_flo<T: Scalar>(path: impl AsRef<Path>, n1: usize, n2: usize, flow: &[[T; 2]]) -> Result<()> {
    if flow.len() != n1 * n2 {
        return Err(Error::shape_mismatch(format!("{} flow values", n1 * n2), format!("{}", flow.len())));
    }
    let mut w = BufWriter::new(std::fs::File::create(path.as_ref())?);
    w.write_all(&FLO_MAGIC.to_le_bytes())?;
    w.write_all(&(n2 as i32).to_le_bytes())?;
    w.write_all(&(n1 as i32).to_le_bytes())?;
    for v in flow {
        w.write_all(&(v[0].as_f64() as f32).to_le_bytes())?;
        w.write_all(&(v[1].as_f64() as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads one `.flo` frame, returning `(n1, n2, values)`.
pub fn read_flo<T: Scalar>(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<[T; 2]>)> {
    let mut r = Reader::open(path.as_ref())?;
    let magic = r.f32le()?;
    if magic != FLO_MAGIC {
        return Err(Error::FormatError(format!("{}: bad flo magic {magic}", r.what)));
    }
    let n2 = r.dim()?;
    let n1 = r.dim()?;
    let mut flow = Vec::with_capacity(n1 * n2);
    for _ in 0..n1 * n2 {
        let a = r.f32le()?;
        let b = r.f32le()?;
        flow.push([T::lit(a as f64), T::lit(b as f64)]);
    }
    Ok((n1, n2, flow))
}

/// Writes the per-frame `.flo` files `flow_0000.flo, ...` of a sequence.
pub fn write_flo_sequence<T: Scalar>(
    dir: impl AsRef<Path>,
    dims: &GridDims,
    flow: &[[T; 2]],
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir.as_ref())?;
    let frame_len = dims.n1 * dims.n2;
    let mut paths = Vec::with_capacity(dims.nt);
    for t in 0..dims.nt {
        let path = dir.as_ref().join(format!("flow_{t:04}.flo"));
        write_flo(&path, dims.n1, dims.n2, &flow[t * frame_len..(t + 1) * frame_len])?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reads all `.flo` files of a directory in lexicographic order as one
/// sequence, returning `(dims, values)`.
pub fn read_flo_sequence<T: Scalar>(dir: impl AsRef<Path>) -> Result<(GridDims, Vec<[T; 2]>)> {
    let mut paths: Vec<_> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e.eq_ignore_ascii_case("flo")).unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::FormatError(format!(
            "{}: no .flo frames found",
            dir.as_ref().display()
        )));
    }
    let mut values = Vec::new();
    let (mut n1, mut n2) = (0usize, 0usize);
    for (k, p) in paths.iter().enumerate() {
        let (a, b, frame) = read_flo::<T>(p)?;
        if k == 0 {
            n1 = a;
            n2 = b;
        } else if (a, b) != (n1, n2) {
            return Err(Error::shape_mismatch(
                format!("{n1}x{n2} (frame 0)"),
                format!("{a}x{b} ({})", p.display()),
            ));
        }
        values.extend(frame);
    }
    Ok((GridDims::new(paths.len(), n1, n2), values))
}

/// Writes the ambient flow stack (float32 triples, `[t][x1][x2]` order).
pub fn write_fl3d<T: Scalar>(path: impl AsRef<Path>, dims: &GridDims, flow: &[[T; 3]]) -> Result<()> {
    if flow.len() != dims.len() {
        return Err(Error::shape_mismatch(format!("{} vectors", dims.len()), format!("{}", flow.len())));
    }
    let mut w = BufWriter::new(std::fs::File::create(path.as_ref())?);
    w.write_all(b"FL3D")?;
    for d in [dims.nt, dims.n1, dims.n2] {
        w.write_all(&(d as i32).to_le_bytes())?;
    }
    for v in flow {
        for k in 0..3 {
            w.write_all(&(v[k].as_f64() as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_fl3d<T: Scalar>(path: impl AsRef<Path>) -> Result<(GridDims, Vec<[T; 3]>)> {
    let mut r = Reader::open(path.as_ref())?;
    r.magic(b"FL3D")?;
    let dims = GridDims::new(r.dim()?, r.dim()?, r.dim()?);
    let mut flow = Vec::with_capacity(dims.len());
    for _ in 0..dims.len() {
        let a = r.f32le()? as f64;
        let b = r.f32le()? as f64;
        let c = r.f32le()? as f64;
        flow.push([T::lit(a), T::lit(b), T::lit(c)]);
    }
    Ok((dims, flow))
}

/// Writes a binary PPM (P6) image; `rgb` is row-major `height x width`.
pub fn write_ppm(path: impl AsRef<Path>, width: usize, height: usize, rgb: &[[u8; 3]]) -> Result<()> {
    if rgb.len() != width * height {
        return Err(Error::shape_mismatch(format!("{} pixels", width * height), format!("{}", rgb.len())));
    }
    let mut w = BufWriter::new(std::fs::File::create(path.as_ref())?);
    write!(w, "P6\n{width} {height}\n255\n")?;
    for px in rgb {
        w.write_all(px)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes an 8-bit binary PGM (P5) image.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, gray: &[u8]) -> Result<()> {
    if gray.len() != width * height {
        return Err(Error::shape_mismatch(format!("{} pixels", width * height), format!("{}", gray.len())));
    }
    let mut w = BufWriter::new(std::fs::File::create(path.as_ref())?);
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(gray)?;
    w.flush()?;
    Ok(())
}

/// Dumps a sparse matrix in MatrixMarket coordinate format (1-based).
pub fn write_matrix_market<T: Scalar>(path: impl AsRef<Path>, m: &CsrMatrix<T>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.n_rows, m.n_cols, m.nnz())?;
    for r in 0..m.n_rows {
        for (c, v) in m.row_entries(r) {
            writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v.as_f64())?;
        }
    }
    w.flush()?;
    Ok(())
}
