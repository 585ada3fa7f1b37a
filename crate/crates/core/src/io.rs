//! File formats.
//!
//! * Directions: CSV, one `x,y,z` row per direction, no header.
//! * Fields: `HRFIELD1` magic, then `nx, ny, nz, channels` as u64 and the
//!   row-major payload as f64, all little-endian. CSV export writes one row
//!   per voxel: `ix,iy,iz,v0,v1,...`.
//! * Sensing matrices: `kind` (u32), `K`, `M` (u64) followed by the row-major
//!   f64 entries, little-endian. CSV export writes one matrix row per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dictionary::DictionaryKind;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::linalg::Matrix;
use crate::sphere::UnitDirection;

pub const FIELD_MAGIC: &[u8; 8] = b"HRFIELD1";

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |cause| Error::File {
        path: path.to_path_buf(),
        cause,
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(file_err(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(file_err(path))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(file_err(parent))?;
    }
    let mut f = fs::File::create(path).map_err(file_err(path))?;
    f.write_all(bytes).map_err(file_err(path))
}

/// Shortest round-trip decimal representation of an `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn directions_to_csv(dirs: &[UnitDirection]) -> String {
    let mut out = String::new();
    for d in dirs {
        let [x, y, z] = d.as_array();
        out.push_str(&format!("{},{},{}\n", fmt_f64(x), fmt_f64(y), fmt_f64(z)));
    }
    out
}

pub fn directions_from_csv(text: &str) -> Result<Vec<UnitDirection>> {
    let mut dirs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        if vals.len() != 3 {
            return Err(Error::Format(format!(
                "line {}: expected 3 values, found {}",
                lineno + 1,
                vals.len()
            )));
        }
        dirs.push(
            UnitDirection::new(vals[0], vals[1], vals[2])
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?,
        );
    }
    Ok(dirs)
}

pub fn write_directions(path: &Path, dirs: &[UnitDirection]) -> Result<()> {
    write_bytes(path, directions_to_csv(dirs).as_bytes())
}

pub fn read_directions(path: &Path) -> Result<Vec<UnitDirection>> {
    directions_from_csv(&read_text(path)?)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = pos
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Format("truncated file".into()))?;
    let out = &bytes[*pos..end];
    *pos = end;
    Ok(out)
}

fn take_u64(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    Ok(u64::from_le_bytes(take(bytes, pos, 8)?.try_into().expect("8 bytes")))
}

fn take_usize(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    usize::try_from(take_u64(bytes, pos)?).map_err(|_| Error::Format("size does not fit in memory".into()))
}

fn take_f64s(bytes: &[u8], pos: &mut usize, count: usize) -> Result<Vec<f64>> {
    let n = count
        .checked_mul(8)
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let raw = take(bytes, pos, n)?;
    if *pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} unexpected trailing bytes",
            bytes.len() - *pos
        )));
    }
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn field_to_bytes(field: &VectorField) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + 8 * field.data().len());
    out.extend_from_slice(FIELD_MAGIC);
    for d in field.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.extend_from_slice(&(field.channels() as u64).to_le_bytes());
    for v in field.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<VectorField> {
    let mut pos = 0;
    if take(bytes, &mut pos, 8)? != FIELD_MAGIC {
        return Err(Error::Format("not a field file (bad magic)".into()));
    }
    let dims = [
        take_usize(bytes, &mut pos)?,
        take_usize(bytes, &mut pos)?,
        take_usize(bytes, &mut pos)?,
    ];
    let channels = take_usize(bytes, &mut pos)?;
    let count = dims
        .iter()
        .try_fold(channels, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::Format("field size overflows".into()))?;
    let data = take_f64s(bytes, &mut pos, count)?;
    VectorField::new(dims, channels, data)
}

pub fn write_field(path: &Path, field: &VectorField) -> Result<()> {
    write_bytes(path, &field_to_bytes(field))
}

pub fn read_field(path: &Path) -> Result<VectorField> {
    field_from_bytes(&read_bytes(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn field_to_csv(field: &VectorField) -> String {
    let [_, ny, nz] = field.dims();
    let mut out = String::new();
    for (r, v) in field.voxels().enumerate() {
        out.push_str(&format!("{},{},{}", r / (ny * nz), (r / nz) % ny, r % nz));
        for x in v {
            out.push(',');
            out.push_str(&fmt_f64(*x));
        }
        out.push('\n');
    }
    out
}

pub fn matrix_to_bytes(kind: DictionaryKind, m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * m.data().len());
    out.extend_from_slice(&kind.code().to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn matrix_from_bytes(bytes: &[u8]) -> Result<(DictionaryKind, Matrix)> {
    let mut pos = 0;
    let code = u32::from_le_bytes(take(bytes, &mut pos, 4)?.try_into().expect("4 bytes"));
    let kind = DictionaryKind::from_code(code).map_err(|e| Error::Format(e.to_string()))?;
    let rows = take_usize(bytes, &mut pos)?;
    let cols = take_usize(bytes, &mut pos)?;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
    let data = take_f64s(bytes, &mut pos, count)?;
    Ok((kind, Matrix::new(rows, cols, data)?))
}

pub fn write_matrix(path: &Path, kind: DictionaryKind, m: &Matrix) -> Result<()> {
    write_bytes(path, &matrix_to_bytes(kind, m))
}

pub fn read_matrix(path: &Path) -> Result<(DictionaryKind, Matrix)> {
    matrix_from_bytes(&read_bytes(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes a numeric series as a one-column CSV with a header.
pub fn series_to_csv(header: &str, columns: &[&[f64]]) -> String {
    let mut out = format!("{header}\n");
    let n = columns.iter().map(|c| c.len()).max().unwrap_or(0);
    for i in 0..n {
        let row: Vec<String> = std::iter::once((i + 1).to_string())
            .chain(columns.iter().map(|c| c.get(i).map_or(String::new(), |v| fmt_f64(*v))))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_bytes_round_trip() {
        let f = VectorField::new([2, 1, 3], 2, (0..12).map(|i| i as f64 * 0.1 - 0.3).collect()).unwrap();
        let bytes = field_to_bytes(&f);
        assert_eq!(bytes.len(), 40 + 12 * 8);
        assert_eq!(field_from_bytes(&bytes).unwrap(), f);
        assert!(field_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(field_from_bytes(&bad).is_err());
    }

    #[test]
    fn matrix_bytes_round_trip() {
        let m = Matrix::new(2, 3, vec![1.0, -2.0, 3.5, 0.0, 1e-300, 7.0]).unwrap();
        let bytes = matrix_to_bytes(DictionaryKind::Ridgelet, &m);
        let (k, back) = matrix_from_bytes(&bytes).unwrap();
        assert_eq!(k, DictionaryKind::Ridgelet);
        assert_eq!(back, m);
        assert_eq!(matrix_to_csv(&m).lines().count(), 2);
    }

    #[test]
    fn directions_csv_round_trip() {
        let dirs = vec![UnitDirection::X, UnitDirection::new(1.0, 2.0, 3.0).unwrap()];
        let back = directions_from_csv(&directions_to_csv(&dirs)).unwrap();
        assert_eq!(back, dirs);
        assert!(directions_from_csv("1,2\n").is_err());
        assert!(directions_from_csv("a,b,c\n").is_err());
    }

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(1.0), "1.0");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!("0.30000000000000004".parse::<f64>().unwrap(), 0.1 + 0.2);
    }
}
