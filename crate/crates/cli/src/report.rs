//! Machine-readable emission: flat JSON documents with sorted keys and CSV
//! tables with a frozen column order. All floats carry 17 significant
//! digits so reruns are byte-stable.

use spvar_core::diagnostics::FlatValue;
use std::io::Write;
use std::path::Path;

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "\"nan\"".into()
    } else if v > 0.0 {
        "\"inf\"".into()
    } else {
        "\"-inf\"".into()
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Flat JSON object with keys emitted in sorted order.
pub fn write_flat_json(path: &Path, entries: &[(String, FlatValue)]) -> std::io::Result<()> {
    let mut sorted: Vec<&(String, FlatValue)> = entries.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{{")?;
    for (i, (k, v)) in sorted.iter().enumerate() {
        let comma = if i + 1 == sorted.len() { "" } else { "," };
        let val = match v {
            FlatValue::F(x) => fmt_f64(*x),
            FlatValue::B(b) => b.to_string(),
            FlatValue::S(s) => format!("\"{}\"", escape(s)),
        };
        writeln!(f, "  \"{}\": {}{}", escape(k), val, comma)?;
    }
    writeln!(f, "}}")?;
    Ok(())
}

/// CSV with a fixed header; every cell preformatted by the caller.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", header.join(","))?;
    for row in rows {
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Convenience builder for flat documents.
pub struct FlatDoc(pub Vec<(String, FlatValue)>);

impl FlatDoc {
    pub fn new() -> Self {
        FlatDoc(Vec::new())
    }
    pub fn f(&mut self, key: &str, v: f64) -> &mut Self {
        self.0.push((key.into(), FlatValue::F(v)));
        self
    }
    pub fn b(&mut self, key: &str, v: bool) -> &mut Self {
        self.0.push((key.into(), FlatValue::B(v)));
        self
    }
    pub fn s(&mut self, key: &str, v: &str) -> &mut Self {
        self.0.push((key.into(), FlatValue::S(v.into())));
        self
    }
}

impl Default for FlatDoc {
    fn default() -> Self {
        Self::new()
    }
}
