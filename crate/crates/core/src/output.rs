//! Shared formatting for the CSV and JSON artifacts.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Formats a float with 17 significant digits, enough to round-trip any
/// `f64` exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `#`-prefixed provenance lines.
pub fn write_provenance<W: Write>(w: &mut W, lines: &[String]) -> io::Result<()> {
    writeln!(w, "# qjcal {}", env!("CARGO_PKG_VERSION"))?;
    for line in lines {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// Writes a CSV row of floats.
pub fn write_row<W: Write>(w: &mut W, values: &[f64]) -> io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        w.write_all(fmt_f64(*v).as_bytes())?;
    }
    w.write_all(b"\n")
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for &x in &[0.1, 1.0 / 3.0, 2.541494082536798, -1e-300, 6.02214076e23] {
            let text = fmt_f64(x);
            let digits: String = text.split('e').next().unwrap().chars().filter(char::is_ascii_digit).collect();
            assert_eq!(digits.len(), 17, "{text}");
            assert_eq!(text.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn rows_are_comma_separated() {
        let mut buf = Vec::new();
        write_row(&mut buf, &[1.0, 0.5]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "1.0000000000000000e0,5.0000000000000000e-1\n"
        );
    }
}
