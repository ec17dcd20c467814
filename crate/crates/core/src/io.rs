//! File formats: raw fields with JSON sidecars, 16-bit PGM images and CSV
//! tables for slices, sinograms, DN maps, boundary maps and paths.

use crate::error::{Error, Result};
use crate::fields::{GridSpec, ScalarField, VectorField};
use crate::geodesic::{BoundaryDistanceMap, GeodesicPath};
use crate::xray::Sinogram;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Sidecar of a raw field file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSidecar {
    pub dim: usize,
    pub n_per_axis: usize,
    pub extent: f64,
    /// `"scalar"` or `"vector"`; vector components are stacked.
    pub kind: String,
}

fn with_ext(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn write_raw(stem: &Path, grid: &GridSpec, kind: &str, blocks: &[&[f64]]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * grid.len() * blocks.len());
    for b in blocks {
        for v in *b {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(with_ext(stem, "f64"), bytes)?;
    let side = FieldSidecar { dim: grid.dim(), n_per_axis: grid.n(), extent: grid.extent(), kind: kind.into() };
    write_json(&with_ext(stem, "json"), &side)
}

/// Writes `<stem>.f64` (little-endian, row-major) and `<stem>.json`.
pub fn write_field(stem: &Path, f: &ScalarField) -> Result<()> {
    write_raw(stem, f.grid(), "scalar", &[f.values()])
}

pub fn write_vector_field(stem: &Path, h: &VectorField) -> Result<()> {
    let blocks: Vec<&[f64]> = h.components().iter().map(|c| c.values()).collect();
    write_raw(stem, h.grid(), "vector", &blocks)
}

fn read_raw(stem: &Path) -> Result<(GridSpec, FieldSidecar, Vec<f64>)> {
    let side: FieldSidecar = serde_json::from_str(&fs::read_to_string(with_ext(stem, "json"))?)?;
    let grid = GridSpec::new(side.dim, side.n_per_axis, side.extent)?;
    let bytes = fs::read(with_ext(stem, "f64"))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Shape("raw file length is not a multiple of 8".into()));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((grid, side, values))
}

pub fn read_field(stem: &Path) -> Result<ScalarField> {
    let (grid, side, values) = read_raw(stem)?;
    if side.kind != "scalar" || values.len() != grid.len() {
        return Err(Error::Shape(format!("{} is not a scalar field on its grid", stem.display())));
    }
    ScalarField::new(grid, values)
}

pub fn read_vector_field(stem: &Path) -> Result<VectorField> {
    let (grid, side, values) = read_raw(stem)?;
    if side.kind != "vector" || values.len() != grid.dim() * grid.len() {
        return Err(Error::Shape(format!("{} is not a vector field on its grid", stem.display())));
    }
    let comps = values.chunks(grid.len()).map(|c| ScalarField::new(grid, c.to_vec())).collect::<Result<_>>()?;
    VectorField::new(comps)
}

/// Display window of a PGM file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgmWindow {
    pub min: f64,
    pub max: f64,
    pub width: usize,
    pub height: usize,
}

/// 16-bit binary PGM of a `height × width` row-major array, linearly mapped
/// from `window` (data min/max when `None`). Writes the window to `<path>.json`.
pub fn write_pgm(
    path: &Path,
    values: &[f64],
    height: usize,
    width: usize,
    window: Option<(f64, f64)>,
) -> Result<PgmWindow> {
    if values.len() != height * width {
        return Err(Error::Shape(format!("{} values for a {height}×{width} image", values.len())));
    }
    let finite = values.iter().filter(|v| v.is_finite());
    let (lo, hi) =
        window.unwrap_or_else(|| finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))));
    let (lo, hi) = if lo.is_finite() && hi.is_finite() { (lo, hi) } else { (0.0, 0.0) };
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &v in values {
        let level = if v.is_finite() { ((v - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16 } else { 0 };
        out.extend_from_slice(&level.to_be_bytes());
    }
    fs::write(path, out)?;
    let win = PgmWindow { min: lo, max: hi, width, height };
    write_json(&with_ext(path, "json"), &win)?;
    Ok(win)
}

/// PGM of a planar field; rows follow axis 0.
pub fn write_field_pgm(path: &Path, f: &ScalarField) -> Result<PgmWindow> {
    f.grid().require_2d("images are planar")?;
    write_pgm(path, f.values(), f.grid().n(), f.grid().n(), None)
}

/// Rows are angles, columns offsets; missing entries render black.
pub fn write_sinogram_pgm(path: &Path, g: &Sinogram) -> Result<PgmWindow> {
    write_pgm(path, g.values(), g.lines().n_angles(), g.lines().n_offsets(), None)
}

/// Reads the header and samples of a 16-bit PGM.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = fs::read(path)?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::InvalidData("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::InvalidData(format!("bad PGM header field {s}")));
    if fields[0] != "P5" || parse(&fields[3])? != 65535 {
        return Err(Error::InvalidData("only 16-bit P5 images are supported".into()));
    }
    let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
    let data = bytes.get(pos..pos + 2 * w * h).ok_or_else(|| Error::InvalidData("truncated PGM data".into()))?;
    Ok((w, h, data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()))
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:e}")
    }
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for l in lines {
        writeln!(f, "{l}")?;
    }
    f.flush()?;
    Ok(())
}

/// CSV of the 1-D slice through node `index` along `axis` of a planar field.
pub fn write_slice_csv(path: &Path, f: &ScalarField, axis: usize, index: usize) -> Result<()> {
    let grid = f.grid();
    grid.require_2d("slices are taken from planar fields")?;
    if axis > 1 || index >= grid.n() {
        return Err(Error::Shape(format!("slice axis {axis} index {index}")));
    }
    let rows = (0..grid.n()).map(|i| {
        let idx = if axis == 0 { [i, index] } else { [index, i] };
        format!("{},{}", fmt(grid.coord(i)), fmt(f.at(&idx)))
    });
    write_lines(path, std::iter::once("coordinate,value".to_string()).chain(rows))
}

#[derive(Serialize)]
struct SinogramSidecar<'a> {
    angles: &'a [f64],
    offsets: &'a [f64],
    grid: Option<GridSpec>,
    missing: usize,
}

/// Header row of offsets, one row per angle, plus `<path>.json`. Missing
/// entries are written as `nan`.
pub fn write_sinogram_csv(path: &Path, g: &Sinogram, grid: Option<&GridSpec>) -> Result<()> {
    let lines = g.lines();
    let header = lines.offsets().iter().map(|&s| fmt(s)).collect::<Vec<_>>().join(",");
    let rows = (0..lines.n_angles()).map(|a| g.row(a).iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(","));
    write_lines(path, std::iter::once(header).chain(rows))?;
    let side = SinogramSidecar {
        angles: lines.angles(),
        offsets: lines.offsets(),
        grid: grid.copied(),
        missing: g.missing_count(),
    };
    write_json(&with_ext(path, "json"), &side)
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let rows = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| fmt(m[(i, j)])).collect::<Vec<_>>().join(","));
    write_lines(path, rows)
}

/// DN matrix CSV (rows W₂ cells, columns W₁ cells) with a JSON sidecar.
pub fn write_dn_csv(path: &Path, lambda: &DMatrix<f64>, sidecar: &impl Serialize) -> Result<()> {
    write_matrix_csv(path, lambda)?;
    write_json(&with_ext(path, "json"), sidecar)
}

/// First row: blank cell then the boundary angles; each further row starts
/// with its angle.
pub fn write_boundary_map_csv(path: &Path, map: &BoundaryDistanceMap) -> Result<()> {
    let header =
        std::iter::once("angle".to_string()).chain(map.angles().iter().map(|&a| fmt(a))).collect::<Vec<_>>().join(",");
    let rows = (0..map.len()).map(|i| {
        std::iter::once(fmt(map.angles()[i]))
            .chain((0..map.len()).map(|j| fmt(map.at(i, j))))
            .collect::<Vec<_>>()
            .join(",")
    });
    write_lines(path, std::iter::once(header).chain(rows))
}

pub fn write_path_csv(path: &Path, p: &GeodesicPath) -> Result<()> {
    let rows = p
        .samples()
        .iter()
        .map(|s| [s.t, s.x[0], s.x[1], s.p[0], s.p[1]].iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(","));
    write_lines(path, std::iter::once("t,x,y,p1,p2".to_string()).chain(rows))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::square(9).unwrap();
        let f = ScalarField::from_fn(g, |x| (3.0 * x[0]).sin() + x[1] / 7.0);
        write_field(&dir.path().join("f"), &f).unwrap();
        assert_eq!(read_field(&dir.path().join("f")).unwrap(), f);
        let h = VectorField::from_fn(g, |x| [x[0], -x[1], 0.0]);
        write_vector_field(&dir.path().join("h"), &h).unwrap();
        assert_eq!(read_vector_field(&dir.path().join("h")).unwrap(), h);
        assert!(read_vector_field(&dir.path().join("f")).is_err());
    }

    #[test]
    fn pgm_dimensions_and_window() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::square(12).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0]);
        let p = dir.path().join("f.pgm");
        let win = write_field_pgm(&p, &f).unwrap();
        assert_eq!((win.min, win.max), (-1.0, 1.0));
        let (w, h, data) = read_pgm(&p).unwrap();
        assert_eq!((w, h), (12, 12));
        assert_eq!(data[0], 0);
        assert_eq!(data[143], 65535);
    }
}
