//! Geometry exports of a realized net.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use quadrica_core::netgrid::Field;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Ply,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Ply => "ply",
        }
    }
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "ply" => Ok(Format::Ply),
            _ => Err(CliError::Usage(format!("unsupported export format {s:?} (expected csv or ply)"))),
        }
    }
}

/// One real coordinate of a complex point: real or imaginary part of an
/// ambient component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub index: usize,
    pub imaginary: bool,
}

impl FromStr for Component {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("projection component {s:?} must look like re0 or im2"));
        let (imaginary, rest) = if let Some(r) = s.strip_prefix("re") {
            (false, r)
        } else if let Some(r) = s.strip_prefix("im") {
            (true, r)
        } else {
            return Err(bad());
        };
        Ok(Component { index: rest.parse().map_err(|_| bad())?, imaginary })
    }
}

pub type Projection = [Component; 3];

pub fn parse_projection(p: Option<&[String; 3]>) -> Result<Projection, CliError> {
    match p {
        Some([a, b, c]) => Ok([a.parse()?, b.parse()?, c.parse()?]),
        None => Ok([0, 1, 2].map(|index| Component { index, imaginary: false })),
    }
}

/// CSV: one row per grid point, `u` coordinates then re/im of each ambient
/// coordinate. Masked points are written as `NaN`.
pub fn to_csv(x: &Field, mask: Option<&[bool]>) -> String {
    let g = &x.grid;
    let dim = x.data.first().map_or(0, |m| m.nrows());
    let mut out = String::new();
    let mut head: Vec<String> = (0..g.ndim()).map(|a| format!("u{a}")).collect();
    for j in 0..dim {
        head.push(format!("re{j}"));
        head.push(format!("im{j}"));
    }
    out.push_str(&head.join(","));
    out.push('\n');
    for (i, p) in x.data.iter().enumerate() {
        let masked = mask.is_some_and(|m| m[i]);
        let mut row: Vec<String> = g.coords(i).iter().map(|u| u.to_string()).collect();
        for j in 0..dim {
            let z = if masked { quadrica_core::C64::new(f64::NAN, f64::NAN) } else { p[(j, 0)] };
            row.push(z.re.to_string());
            row.push(z.im.to_string());
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// ASCII PLY point cloud of a real 3-projection of the unmasked points.
pub fn to_ply(x: &Field, mask: Option<&[bool]>, proj: &Projection) -> Result<String, CliError> {
    let dim = x.data.first().map_or(0, |m| m.nrows());
    if let Some(c) = proj.iter().find(|c| c.index >= dim) {
        return Err(CliError::Usage(format!("projection index {} exceeds ambient dimension {dim}", c.index)));
    }
    let keep: Vec<usize> = (0..x.data.len()).filter(|&i| !mask.is_some_and(|m| m[i])).collect();
    let mut out = String::new();
    writeln!(out, "ply\nformat ascii 1.0").unwrap();
    writeln!(out, "comment projection {}", proj.map(|c| format!("{}{}", if c.imaginary { "im" } else { "re" }, c.index)).join(" ")).unwrap();
    writeln!(out, "element vertex {}", keep.len()).unwrap();
    writeln!(out, "property double x\nproperty double y\nproperty double z\nend_header").unwrap();
    for i in keep {
        let v = proj.map(|c| {
            let z = x.data[i][(c.index, 0)];
            if c.imaginary { z.im } else { z.re }
        });
        writeln!(out, "{} {} {}", v[0], v[1], v[2]).unwrap();
    }
    Ok(out)
}

pub fn export_geometry(
    x: &Field,
    mask: Option<&[bool]>,
    format: Format,
    proj: &Projection,
    path: &Path,
) -> Result<(), CliError> {
    let text = match format {
        Format::Csv => to_csv(x, mask),
        Format::Ply => to_ply(x, mask, proj)?,
    };
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
