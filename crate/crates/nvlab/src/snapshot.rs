//! Binary field snapshots: raw little-endian f64 samples next to a JSON
//! header describing grid, time, energy and memory layout.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{NvError, Result};
use crate::grid::{GridSpec, RealField2D};
use crate::solver::NvState;

pub const FORMAT: &str = "nvlab-snapshot";
pub const FORMAT_VERSION: u32 = 1;
pub const LAYOUT: &str = "row-major: sample (ix, iy) at index ix*ny + iy, x outer, fields stored consecutively";

/// JSON header written next to each binary snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub format_version: u32,
    pub grid: GridSpec,
    pub t: f64,
    pub e: f64,
    /// Field names in storage order.
    pub fields: Vec<String>,
    pub dtype: String,
    pub endianness: String,
    pub layout: String,
    /// File name of the binary payload, relative to the header.
    pub data_file: String,
}

/// Writes v, w1, w2 of `state` to `<dir>/<stem>.bin` with header `<dir>/<stem>.json`.
/// Returns the header path.
pub fn write_snapshot(dir: &Path, stem: &str, state: &NvState) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let data_file = format!("{stem}.bin");
    let header = SnapshotHeader {
        format: FORMAT.into(),
        format_version: FORMAT_VERSION,
        grid: state.grid(),
        t: state.t,
        e: state.e,
        fields: vec!["v".into(), "w1".into(), "w2".into()],
        dtype: "f64".into(),
        endianness: "little".into(),
        layout: LAYOUT.into(),
        data_file: data_file.clone(),
    };
    let fields = [&state.v, &state.w1, &state.w2];
    let mut bytes = Vec::with_capacity(fields.len() * state.v.data.len() * 8);
    for f in fields {
        for x in &f.data {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(dir.join(&data_file), bytes)?;
    let hp = dir.join(format!("{stem}.json"));
    fs::write(&hp, serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(hp)
}

/// Reads a snapshot back from its header path.
pub fn read_snapshot(header_path: &Path) -> Result<NvState> {
    let header: SnapshotHeader = serde_json::from_str(&fs::read_to_string(header_path)?)?;
    if header.format != FORMAT || header.dtype != "f64" || header.endianness != "little" {
        return Err(NvError::InvalidInput(format!(
            "unsupported snapshot: format {}, dtype {}, endianness {}",
            header.format, header.dtype, header.endianness
        )));
    }
    header.grid.validate()?;
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let bytes = fs::read(dir.join(&header.data_file))?;
    let n = header.grid.len();
    if bytes.len() != header.fields.len() * n * 8 {
        return Err(NvError::InvalidInput(format!(
            "snapshot payload has {} bytes, expected {}",
            bytes.len(),
            header.fields.len() * n * 8
        )));
    }
    let field = |name: &str| -> Result<RealField2D> {
        let k = header
            .fields
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| NvError::InvalidInput(format!("snapshot lacks field {name}")))?;
        let data = bytes[k * n * 8..(k + 1) * n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
            .collect();
        Ok(RealField2D { grid: header.grid, data })
    };
    Ok(NvState { v: field("v")?, w1: field("w1")?, w2: field("w2")?, t: header.t, e: header.e })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = GridSpec::new(8, 8, 3.0, 2.0).unwrap();
        let v = RealField2D::from_fn(g, |x, y| (x + 0.3 * y).sin());
        let s = NvState::new(v, -1.5, 0.25).unwrap();
        let dir = std::env::temp_dir().join(format!("nvlab-snap-{}", std::process::id()));
        let hp = write_snapshot(&dir, "snap", &s).unwrap();
        let r = read_snapshot(&hp).unwrap();
        assert_eq!(r.v.data, s.v.data);
        assert_eq!(r.w1.data, s.w1.data);
        assert_eq!(r.w2.data, s.w2.data);
        assert_eq!((r.t, r.e), (s.t, s.e));
        let first = fs::read(dir.join("snap.bin")).unwrap();
        assert_eq!(&first[..8], &s.v.data[0].to_le_bytes());
        assert_eq!(&first[8..16], &s.v.at(0, 1).to_le_bytes());
        fs::remove_dir_all(&dir).unwrap();
    }
}
