//! CSV output: a header row, then one line per record. Floats use 17
//! significant digits so values round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Field {
    Float(f64),
    Int(usize),
    Bool(bool),
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v)
    }
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Bool(v)
    }
}

fn push_field(out: &mut String, f: &Field) {
    let _ = match f {
        Field::Float(v) => write!(out, "{v:.16e}"),
        Field::Int(v) => write!(out, "{v}"),
        Field::Bool(v) => write!(out, "{v}"),
    };
}

/// Renders a table; panics if a row's width differs from the header's.
pub fn render(header: &[&str], rows: &[Vec<Field>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        assert_eq!(row.len(), header.len(), "row width does not match header");
        for (i, f) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            push_field(&mut out, f);
        }
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, header: &[&str], rows: &[Vec<Field>]) -> Result<(), CliError> {
    write_text(path, &render(header, rows))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
