//! Matrix persistence: a small binary format and CSV export.
//!
//! Binary layout: 8-byte magic, rows and cols as 64-bit little-endian
//! unsigned integers, then the row-major entries as 64-bit little-endian
//! IEEE floats. CSV is one matrix row per line, comma separated, `.` decimal
//! separator, no header.

use super::{LinalgError, Matrix};
use std::io::{Read, Write};
use std::path::Path;

pub const MATRIX_MAGIC: &[u8; 8] = b"SRNMAT01";

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<(), LinalgError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix_to(&mut f, m)?;
    f.flush()?;
    Ok(())
}

/// Stream form, used by matrix files and embedded blobs (checkpoints).
pub fn write_matrix_to(f: &mut impl Write, m: &Matrix) -> Result<(), LinalgError> {
    f.write_all(MATRIX_MAGIC)?;
    f.write_all(&(m.rows() as u64).to_le_bytes())?;
    f.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.data() {
        f.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Matrix, LinalgError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_matrix_from(&mut f)
}

pub fn read_matrix_from(f: &mut impl Read) -> Result<Matrix, LinalgError> {
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)
        .map_err(|_| LinalgError::BadFormat("file shorter than the 8-byte magic".into()))?;
    if &magic != MATRIX_MAGIC {
        return Err(LinalgError::BadFormat(format!(
            "magic mismatch: expected {:?}, found {:?}",
            MATRIX_MAGIC, magic
        )));
    }
    let mut buf8 = [0u8; 8];
    f.read_exact(&mut buf8)
        .map_err(|_| LinalgError::BadFormat("truncated row count".into()))?;
    let rows = u64::from_le_bytes(buf8) as usize;
    f.read_exact(&mut buf8)
        .map_err(|_| LinalgError::BadFormat("truncated column count".into()))?;
    let cols = u64::from_le_bytes(buf8) as usize;
    if rows == 0 || cols == 0 || rows.saturating_mul(cols) > (1 << 32) {
        return Err(LinalgError::BadFormat(format!(
            "implausible dimensions {rows}x{cols}"
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for idx in 0..rows * cols {
        f.read_exact(&mut buf8).map_err(|_| {
            LinalgError::BadFormat(format!("truncated at entry {idx} of {}", rows * cols))
        })?;
        data.push(f64::from_le_bytes(buf8));
    }
    Ok(Matrix::from_vec(rows, cols, data))
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<(), LinalgError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..m.rows() {
        let line = m
            .row(i)
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(f, "{line}")?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sample_gaussian_matrix;
    use crate::SeedRng;

    #[test]
    fn binary_round_trip_is_exact() {
        let dir = std::env::temp_dir().join("srnet_linalg_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.bin");
        let m = sample_gaussian_matrix(&mut SeedRng::new(55), 7, 3, 1.0);
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn bad_magic_is_reported() {
        let dir = std::env::temp_dir().join("srnet_linalg_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.bin");
        std::fs::write(&path, b"NOTMAGIC\x01\x00").unwrap();
        let err = read_matrix(&path).unwrap_err();
        assert!(format!("{err}").contains("magic mismatch"));
    }

    #[test]
    fn csv_export_format() {
        let dir = std::env::temp_dir().join("srnet_linalg_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.csv");
        let m = Matrix::from_rows(&[vec![1.0, -0.5], vec![0.25, 3.0]]);
        write_matrix_csv(&path, &m).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "1,-0.5\n0.25,3\n");
    }
}
