//! CSV and JSON writers with 17 significant digits, and the run manifest.

use std::io;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// `x` with 17 significant digits; `NaN`/`inf` spelled out.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Comma-separated table with a mandatory header row.
pub struct Csv {
    columns: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self {
            columns: header.len(),
            text,
        }
    }

    /// Appends a row; `None` cells are left empty.
    pub fn row(&mut self, cells: impl IntoIterator<Item = Option<f64>>) {
        let cells: Vec<String> = cells
            .into_iter()
            .map(|c| c.map(float).unwrap_or_default())
            .collect();
        assert_eq!(
            cells.len(),
            self.columns,
            "row width does not match the header"
        );
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

struct Precise;

impl serde_json::ser::Formatter for Precise {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Compact JSON, floats with 17 significant digits, trailing newline.
/// Non-finite floats become `null`.
pub fn json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Precise);
    value
        .serialize(&mut ser)
        .expect("serializing to memory cannot fail");
    out.push(b'\n');
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub config: &'a C,
    pub exit_code: i32,
    pub artifacts: Vec<ManifestEntry>,
}
