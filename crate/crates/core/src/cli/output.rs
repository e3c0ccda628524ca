// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic result files.
//!
//! Every float is written with 17 significant digits in lowercase
//! scientific notation, so values round-trip exactly and identical runs
//! produce byte-identical files.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::hs::ComplexMatrix;

/// `1.2345678901234567e-3` style; non-finite values as `nan`, `inf`, `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// A CSV table assembled in memory.
pub struct Csv {
    header: Vec<String>,
    rows: Vec<String>,
}

impl Csv {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells.join(","));
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(row);
            out.push('\n');
        }
        out
    }
}

/// Column names `re_ij`, `im_ij` for a `d × d` matrix, row-major.
pub fn matrix_columns(prefix: &str, d: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(2 * d * d);
    for i in 0..d {
        for j in 0..d {
            cols.push(format!("{prefix}re_{i}{j}"));
            cols.push(format!("{prefix}im_{i}{j}"));
        }
    }
    cols
}

pub fn matrix_cells(m: &ComplexMatrix) -> Vec<String> {
    let d = m.dim();
    let mut cells = Vec::with_capacity(2 * d * d);
    for i in 0..d {
        for j in 0..d {
            cells.push(fmt_f64(m[(i, j)].re));
            cells.push(fmt_f64(m[(i, j)].im));
        }
    }
    cells
}

/// Real and imaginary parts as nested row-major arrays.
#[derive(Serialize)]
pub struct JsonMatrix {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&ComplexMatrix> for JsonMatrix {
    fn from(m: &ComplexMatrix) -> Self {
        let d = m.dim();
        let re = (0..d).map(|i| (0..d).map(|j| m[(i, j)].re).collect()).collect();
        let im = (0..d).map(|i| (0..d).map(|j| m[(i, j)].im).collect()).collect();
        Self { re, im }
    }
}

/// Pretty JSON with the fixed float format.
struct FloatFormatter(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for FloatFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let fmt = FloatFormatter(serde_json::ser::PrettyFormatter::with_indent(b"  "));
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Writes through a temporary file in the destination directory and
/// renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// `<out>.<suffix>` next to the main output.
pub fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 0.0, -0.0, 1.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            assert!(!s.contains('E'));
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn json_uses_fixed_floats_and_null_for_non_finite() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: Vec<f64>,
        }
        let s = to_json(&S { a: 0.25, b: vec![f64::NAN, 3.0] });
        assert!(s.contains("\"a\": 2.5000000000000000e-1"), "{s}");
        assert!(s.contains("null"));
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["b"][1].as_f64(), Some(3.0));
    }

    #[test]
    fn csv_rendering() {
        let mut c = Csv::new(vec!["t".into(), "x".into()]);
        c.push(vec![fmt_f64(0.0), fmt_f64(2.0)]);
        assert_eq!(c.render(), "t,x\n0.0000000000000000e0,2.0000000000000000e0\n");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, "a").unwrap();
        write_atomic(&p, "b").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "b");
        assert_eq!(sibling(&p, "scaling.json").file_name().unwrap(), "out.csv.scaling.json");
    }
}
