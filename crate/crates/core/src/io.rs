//! Output formatting shared by every CSV/JSON writer.

use std::io::Write;

use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits in scientific notation; round-trips any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Hex SHA-256 of a configuration document.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Leading comment line of every data file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvHeader {
    pub config_hash: String,
}

impl CsvHeader {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self { config_hash: config_hash.into() }
    }

    pub fn line(&self) -> String {
        format!("# framesim {VERSION} config_hash={}", self.config_hash)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", self.line())
    }
}

/// Writes rows of numbers under a named-column header.
pub fn write_table<W: Write>(mut w: W, header: &CsvHeader, columns: &[&str], rows: &[Vec<f64>]) -> std::io::Result<()> {
    header.write(&mut w)?;
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        writeln!(w, "{}", row.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 1e-300, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn table_layout() {
        let mut buf = Vec::new();
        write_table(&mut buf, &CsvHeader::new("h"), &["x", "y"], &[vec![1.0, 2.0]]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().nth(1), Some("x,y"));
        assert_eq!(s.lines().count(), 3);
    }
}
