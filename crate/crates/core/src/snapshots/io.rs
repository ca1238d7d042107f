use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;

use super::{ComponentLayout, SnapshotMatrix};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ROMSNAP1";
const HEADER_LEN: usize = 8 + 8 + 8 + 8 + 4;

/// Writes the `ROMSNAP1` binary format: magic, u64 n, u64 m, f64 dt,
/// u32 layout tag, then n·m f64 values row-major, all little-endian.
pub fn save_snapshots(x: &SnapshotMatrix, path: &Path) -> Result<()> {
    let (n, m) = x.data().shape();
    let mut buf = Vec::with_capacity(HEADER_LEN + n * m * 8);
    buf.extend_from_slice(MAGIC);
    buf.write_u64::<LittleEndian>(n as u64).expect("vec write");
    buf.write_u64::<LittleEndian>(m as u64).expect("vec write");
    buf.write_f64::<LittleEndian>(x.dt()).expect("vec write");
    buf.write_u32::<LittleEndian>(x.layout().tag()).expect("vec write");
    for r in 0..n {
        for c in 0..m {
            buf.write_f64::<LittleEndian>(x.data()[(r, c)]).expect("vec write");
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_snapshots(path: &Path) -> Result<SnapshotMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::format(path, "malformed header: expected ROMSNAP1 magic"));
    }
    let mut rd = &bytes[8..HEADER_LEN];
    let n = rd.read_u64::<LittleEndian>().expect("header length checked") as usize;
    let m = rd.read_u64::<LittleEndian>().expect("header length checked") as usize;
    let dt = rd.read_f64::<LittleEndian>().expect("header length checked");
    let tag = rd.read_u32::<LittleEndian>().expect("header length checked");
    let layout = ComponentLayout::from_tag(tag)
        .ok_or_else(|| Error::format(path, format!("malformed header: unknown layout tag {tag}")))?;
    let expected = n
        .checked_mul(m)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| Error::format(path, "malformed header: dimensions overflow"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "dimension mismatch: header declares {n}x{m} ({expected} bytes) but body has {} bytes",
                body.len()
            ),
        ));
    }
    let mut rd = body;
    let mut data = DMatrix::zeros(n, m);
    for r in 0..n {
        for c in 0..m {
            let v = rd.read_f64::<LittleEndian>().expect("body length checked");
            if !v.is_finite() {
                return Err(Error::format(
                    path,
                    format!("non-finite value {v} at row {r}, column {c}"),
                ));
            }
            data[(r, c)] = v;
        }
    }
    SnapshotMatrix::new(data, dt, layout).map_err(|e| Error::format(path, e.to_string()))
}

/// CSV export: header `t,c0,...,c{m-1}`, one row per step.
pub fn save_snapshots_csv(x: &SnapshotMatrix, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = Vec::with_capacity(x.m() + 1);
    header.push("t".to_string());
    header.extend((0..x.m()).map(|c| format!("c{c}")));
    wtr.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in 0..x.n() {
        let mut rec = Vec::with_capacity(x.m() + 1);
        rec.push(x.time(r).to_string());
        rec.extend(x.data().row(r).iter().map(|v| v.to_string()));
        wtr.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path, format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SnapshotMatrix {
        let data = DMatrix::from_fn(3, 4, |r, c| (r * 4 + c) as f64 * 0.1 - 0.3);
        SnapshotMatrix::new(data, 0.5, ComponentLayout::VELOCITY_2D).unwrap()
    }

    #[test]
    fn round_trip_3x4() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.romsnap");
        let x = sample();
        save_snapshots(&x, &path).unwrap();
        assert_eq!(load_snapshots(&path).unwrap(), x);
    }

    #[test]
    fn nan_entry_is_rejected_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.romsnap");
        save_snapshots(&sample(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // row 1, column 2
        let offset = HEADER_LEN + (4 + 2) * 8;
        bytes[offset..offset + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = load_snapshots(&path).unwrap_err().to_string();
        assert!(err.contains("row 1, column 2"), "{err}");
    }

    #[test]
    fn empty_file_has_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.romsnap");
        std::fs::write(&path, b"").unwrap();
        assert!(matches!(load_snapshots(&path), Err(Error::EmptyInput { .. })));
    }

    #[test]
    fn truncated_body_is_a_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.romsnap");
        save_snapshots(&sample(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        let err = load_snapshots(&path).unwrap_err().to_string();
        assert!(err.contains("dimension mismatch"), "{err}");
    }

    #[test]
    fn bad_magic_is_malformed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.romsnap");
        std::fs::write(&path, [0u8; 64]).unwrap();
        let err = load_snapshots(&path).unwrap_err().to_string();
        assert!(err.contains("malformed header"), "{err}");
    }

    #[test]
    fn csv_has_time_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        save_snapshots_csv(&sample(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,c0,c1,c2,c3");
        assert!(lines.nth(1).unwrap().starts_with("0.5,"));
    }
}
