//! Field dumps: raw little-endian complex128 data, row-major over grid points
//! and then matrix entries, with a JSON sidecar describing the layout.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

use super::grid::{Field, GridSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub name: String,
    pub dtype: String,
    pub byte_order: String,
    pub layout: String,
    /// Grid extents followed by the matrix shape.
    pub shape: Vec<usize>,
    pub axes: Vec<String>,
    pub grid: GridSpec,
}

fn axis_names(grid: &GridSpec) -> Vec<String> {
    (0..grid.ndim()).map(|a| format!("u{}", a + 1)).chain(["row".into(), "col".into()]).collect()
}

fn paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.bin")), dir.join(format!("{name}.json")))
}

/// Write `<dir>/<name>.bin` and `<dir>/<name>.json`.
pub fn write_field(dir: &Path, name: &str, field: &Field) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (bin, json) = paths(dir, name);
    let (rows, cols) = field.shape();
    let mut w = BufWriter::new(fs::File::create(bin)?);
    for m in &field.data {
        for i in 0..rows {
            for j in 0..cols {
                w.write_all(&m[(i, j)].re.to_le_bytes())?;
                w.write_all(&m[(i, j)].im.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    let mut shape = field.grid.extent.clone();
    shape.extend([rows, cols]);
    let side = Sidecar {
        name: name.into(),
        dtype: "complex128".into(),
        byte_order: "little".into(),
        layout: "row-major".into(),
        shape,
        axes: axis_names(&field.grid),
        grid: field.grid.clone(),
    };
    fs::write(json, serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn read_field(dir: &Path, name: &str) -> Result<Field> {
    let (bin, json) = paths(dir, name);
    let side: Sidecar = serde_json::from_str(&fs::read_to_string(json)?)?;
    if side.dtype != "complex128" || side.byte_order != "little" || side.layout != "row-major" {
        return Err(Error::Invalid(format!("unsupported dump layout in {name}.json")));
    }
    let k = side.shape.len();
    if k < 2 || side.shape[..k - 2] != side.grid.extent[..] {
        return Err(Error::Dimension(format!("shape {:?} does not match the grid", side.shape)));
    }
    let (rows, cols) = (side.shape[k - 2], side.shape[k - 1]);
    let bytes = fs::read(bin)?;
    let npts = side.grid.npoints();
    if bytes.len() != npts * rows * cols * 16 {
        return Err(Error::Dimension(format!("{name}.bin has {} bytes, expected {}", bytes.len(), npts * rows * cols * 16)));
    }
    let num = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let data = (0..npts)
        .map(|p| {
            CMatrix::from_fn(rows, cols, |i, j| {
                let o = ((p * rows + i) * cols + j) * 16;
                C64::new(num(o), num(o + 8))
            })
        })
        .collect();
    Ok(Field { grid: side.grid, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn roundtrip() {
        let dir = std::env::temp_dir().join(format!("quadrica-io-{}", std::process::id()));
        let g = GridSpec::new(2, 1, 0.1, vec![3, 4, 3]).unwrap();
        let f = Field::from_fn(&g, |u| CMatrix::from_fn(2, 3, |i, j| c(u[0] + i as f64, u[1] * j as f64 - u[2])));
        write_field(&dir, "probe", &f).unwrap();
        let back = read_field(&dir, "probe").unwrap();
        assert_eq!(back.data, f.data);
        assert_eq!(back.grid, g);
        let len = fs::metadata(dir.join("probe.bin")).unwrap().len();
        assert_eq!(len as usize, 36 * 6 * 16);
        fs::remove_dir_all(dir).unwrap();
    }
}
