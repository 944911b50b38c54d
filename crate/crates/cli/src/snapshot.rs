//! Binary field snapshots.
//!
//! One ASCII header line `EVOPIEZO1 <name> <n1> <n2> <n3> <comps>\n`, then
//! `n1·n2·n3·comps` little-endian `f64`, components fastest, cells in grid
//! order (x fastest).

use std::io::Write;
use std::path::{Path, PathBuf};

pub const MAGIC: &str = "EVOPIEZO1";

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot format error: {0}")]
    Format(String),
    #[error("snapshot payload truncated: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("snapshot i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub name: String,
    pub n: [usize; 3],
    pub comps: usize,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn new(
        name: &str,
        n: [usize; 3],
        comps: usize,
        values: Vec<f64>,
    ) -> Result<Self, SnapshotError> {
        if name.is_empty() || name.chars().any(|c| c.is_whitespace()) {
            return Err(SnapshotError::Format(format!(
                "invalid field name {name:?}"
            )));
        }
        let expected = n.iter().product::<usize>() * comps;
        if values.len() != expected {
            return Err(SnapshotError::Format(format!(
                "{} values for a {}x{}x{} grid with {comps} components",
                values.len(),
                n[0],
                n[1],
                n[2]
            )));
        }
        Ok(Self {
            name: name.to_string(),
            n,
            comps,
            values,
        })
    }

    pub fn header(&self) -> String {
        format!(
            "{MAGIC} {} {} {} {} {}",
            self.name, self.n[0], self.n[1], self.n[2], self.comps
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.header().len() + 1 + 8 * self.values.len());
        out.extend_from_slice(self.header().as_bytes());
        out.push(b'\n');
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| SnapshotError::Format("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| SnapshotError::Format("header is not UTF-8".into()))?;
        let parts: Vec<&str> = header.split(' ').collect();
        if parts.len() != 6 || parts[0] != MAGIC {
            return Err(SnapshotError::Format(format!(
                "malformed header {header:?}"
            )));
        }
        let num = |s: &str| -> Result<usize, SnapshotError> {
            s.parse()
                .map_err(|_| SnapshotError::Format(format!("bad integer {s:?} in header")))
        };
        let n = [num(parts[2])?, num(parts[3])?, num(parts[4])?];
        let comps = num(parts[5])?;
        let count = n
            .iter()
            .try_fold(comps, |acc, &k| acc.checked_mul(k))
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| SnapshotError::Format("header sizes overflow".into()))?;
        let payload = &bytes[nl + 1..];
        if payload.len() != count {
            return Err(SnapshotError::Truncated {
                expected: count,
                actual: payload.len(),
            });
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Snapshot::new(parts[1], n, comps, values)
    }
}

pub fn snapshot_file_name(name: &str, step: usize) -> String {
    format!("{name}_{step:06}.bin")
}

pub fn write_snapshot(snap: &Snapshot, path: &Path) -> Result<(), SnapshotError> {
    let io = |source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&snap.to_bytes()).map_err(io)?;
    f.flush().map_err(io)
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, SnapshotError> {
    let bytes = std::fs::read(path).map_err(|source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Snapshot::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_format() {
        let s = Snapshot::new("E", [2, 2, 2], 3, vec![0.0; 24]).unwrap();
        assert_eq!(s.header(), "EVOPIEZO1 E 2 2 2 3");
    }

    #[test]
    fn truncated_payload_reports_counts() {
        let s = Snapshot::new("theta", [1, 1, 2], 1, vec![1.0, 2.0]).unwrap();
        let mut b = s.to_bytes();
        b.truncate(b.len() - 3);
        match Snapshot::from_bytes(&b) {
            Err(SnapshotError::Truncated { expected, actual }) => {
                assert_eq!((expected, actual), (16, 13))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_headers() {
        for h in [
            "EVOPIEZO2 E 1 1 1 1\n",
            "EVOPIEZO1 E 1 1 1\n",
            "EVOPIEZO1 E 1 x 1 1\n",
            "no newline",
        ] {
            assert!(
                matches!(
                    Snapshot::from_bytes(h.as_bytes()),
                    Err(SnapshotError::Format(_))
                ),
                "{h}"
            );
        }
    }

    #[test]
    fn file_name() {
        assert_eq!(snapshot_file_name("v", 42), "v_000042.bin");
    }
}
