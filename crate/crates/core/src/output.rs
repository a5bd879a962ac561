//! Plain-text numeric output shared by every CSV writer.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

/// 17 significant digits, `.` radix.
pub fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}

/// Writes a header and rows of numbers as CSV.
pub fn write_csv<W: Write>(mut w: W, header: &[String], rows: &[Vec<f64>]) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for row in rows {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            let _ = write!(line, "{}", fmt_num(*v));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_csv_file(path: &Path, header: &[String], rows: &[Vec<f64>]) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = io::BufWriter::new(file);
    write_csv(&mut w, header, rows)?;
    w.flush()
}

pub(crate) fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}
