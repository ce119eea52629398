use std::fs;
use std::io::Write;
use std::path::Path;

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Leading bytes of a RAWF64 matrix file.
pub const RAW_MAGIC: &[u8; 4] = b"HYBM";

/// On-disk matrix encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    /// Numeric, one matrix row per line, optional non-numeric header line.
    Csv,
    /// `HYBM`, u32 rows, u32 cols, then row-major little-endian f64.
    RawF64,
}

impl MatrixFormat {
    /// `.csv` and `.txt` are CSV, anything else RAWF64.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(ext) if ext == "csv" || ext == "txt" => MatrixFormat::Csv,
            _ => MatrixFormat::RawF64,
        }
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        MatrixFormat::Csv => parse_csv(path, &bytes),
        MatrixFormat::RawF64 => parse_raw(path, &bytes),
    }
}

pub fn save_matrix(path: &Path, m: &Matrix, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Csv => encode_csv(m),
        MatrixFormat::RawF64 => encode_raw(path, m)?,
    };
    write_atomic(path, &bytes)
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<Matrix> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(bytes);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let line = |r: &csv::StringRecord| r.position().map_or(i + 1, |p| p.line() as usize);
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line(&record),
                    message: format!("non-numeric field: {e}"),
                })
            }
        };
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line(&record),
                    message: format!("expected {c} fields, found {}", values.len()),
                })
            }
            Some(_) => {}
        }
        data.extend(values);
        rows += 1;
    }
    let cols = match cols {
        Some(c) if rows > 0 && c > 0 => c,
        _ => return Err(Error::EmptyMatrix(path.display().to_string())),
    };
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

fn encode_csv(m: &Matrix) -> Vec<u8> {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn parse_raw(path: &Path, bytes: &[u8]) -> Result<Matrix> {
    let bad = |message: String| Error::Format { path: path.to_path_buf(), message };
    if bytes.is_empty() {
        return Err(Error::EmptyMatrix(path.display().to_string()));
    }
    if bytes.len() < 12 || &bytes[..4] != RAW_MAGIC {
        return Err(bad("missing HYBM header".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| bad(format!("shape {rows}x{cols} overflows")))?;
    if bytes.len() - 12 != payload {
        return Err(bad(format!("shape {rows}x{cols} needs {payload} payload bytes, found {}", bytes.len() - 12)));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix(path.display().to_string()));
    }
    let data: Vec<f64> = bytes[12..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

fn encode_raw(path: &Path, m: &Matrix) -> Result<Vec<u8>> {
    let dim = |d: usize| {
        u32::try_from(d).map_err(|_| Error::Format {
            path: path.to_path_buf(),
            message: format!("dimension {d} does not fit in u32"),
        })
    };
    let (rows, cols) = (dim(m.nrows())?, dim(m.ncols())?);
    let mut out = Vec::with_capacity(12 + 8 * m.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for row in m.row_iter() {
        for v in row.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// One non-negative integer per line; blank lines are skipped.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(line.parse::<usize>().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("bad label {line:?}: {e}"),
        })?);
    }
    if labels.is_empty() {
        return Err(Error::EmptyMatrix(format!("no labels in {}", path.display())));
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut text = String::with_capacity(labels.len() * 3);
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_identity_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eye.bin");
        let m = Matrix::identity(2, 2);
        save_matrix(&path, &m, MatrixFormat::RawF64).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"HYBM");
        assert_eq!(bytes.len(), 12 + 32);
        assert_eq!(load_matrix(&path, MatrixFormat::RawF64).unwrap(), m);
    }

    #[test]
    fn csv_round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = Matrix::from_row_slice(2, 3, &[0.1, -2.5, 1e-300, 3.0, 1.0 / 3.0, 7.0]);
        save_matrix(&path, &m, MatrixFormat::Csv).unwrap();
        assert_eq!(load_matrix(&path, MatrixFormat::Csv).unwrap(), m);

        fs::write(&path, "a,b\n1,2\n3,4\n").unwrap();
        let m = load_matrix(&path, MatrixFormat::Csv).unwrap();
        assert_eq!(m, Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn csv_ragged_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, "1,2\n3,4\n5\n").unwrap();
        match load_matrix(&path, MatrixFormat::Csv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        fs::write(&path, "").unwrap();
        assert!(matches!(load_matrix(&path, MatrixFormat::Csv), Err(Error::EmptyMatrix(_))));
        assert!(matches!(load_matrix(&path, MatrixFormat::RawF64), Err(Error::EmptyMatrix(_))));
    }

    #[test]
    fn raw_truncated_and_overflow() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let mut bytes = RAW_MAGIC.to_vec();
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_matrix(&path, MatrixFormat::RawF64), Err(Error::Format { .. })));

        let mut bytes = RAW_MAGIC.to_vec();
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_matrix(&path, MatrixFormat::RawF64), Err(Error::Format { .. })));
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.txt");
        write_labels(&path, &[0, 2, 1]).unwrap();
        assert_eq!(read_labels(&path).unwrap(), vec![0, 2, 1]);
        fs::write(&path, "0\n-1\n").unwrap();
        assert!(matches!(read_labels(&path), Err(Error::Parse { line: 2, .. })));
    }
}
