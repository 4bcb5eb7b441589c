//! CSV emission: a `#`-prefixed block of resolved parameters, one header
//! row, then values with 17 significant digits. Missing values are empty
//! cells.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::circuit::ShotRecord;
use crate::error::Result;
use crate::observables::{ObservableRow, ObservableSeries};

/// Resolved parameters written above the table.
pub type Header = Vec<(String, String)>;

pub fn format_value(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

/// Writes a table to any sink.
pub fn write_table<W: Write>(
    mut out: W,
    header: &[(String, String)],
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    for (key, value) in header {
        writeln!(out, "# {key} = {value}")?;
    }
    writeln!(out, "{}", columns.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_series(path: &Path, header: &[(String, String)], series: &ObservableSeries) -> Result<()> {
    let rows = series.rows().iter().map(|r| r.csv_fields().map(cell).to_vec());
    write_table(create(path)?, header, &ObservableRow::CSV_HEADER, rows)
}

/// Numeric table with optional cells.
pub fn write_values(
    path: &Path,
    header: &[(String, String)],
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<Option<f64>>>,
) -> Result<()> {
    let rows = rows.into_iter().map(|r| r.into_iter().map(cell).collect());
    write_table(create(path)?, header, columns, rows)
}

/// Per-shot summary: shot index, jump count, first jump time.
pub fn write_shots(path: &Path, header: &[(String, String)], shots: &[ShotRecord]) -> Result<()> {
    let rows = shots.iter().map(|s| vec![s.shot.to_string(), s.jump_count().to_string(), cell(s.first_jump_time())]);
    write_table(create(path)?, header, &["shot", "jump_count", "first_jump_time"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let s = format_value(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
        for v in [std::f64::consts::PI, -2.5e-300, 1.0 / 3.0, 6.02e23] {
            assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_value(0.0), "0.0000000000000000e0");
        assert_eq!(format_value(-0.0), "0.0000000000000000e0");
    }

    #[test]
    fn table_layout() {
        let mut buf = Vec::new();
        let header = vec![("g".to_string(), "0.2".to_string())];
        let rows = vec![vec![cell(Some(1.5)), cell(None)]];
        write_table(&mut buf, &header, &["a", "b"], rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# g = 0.2\na,b\n1.5000000000000000e0,\n");
    }
}
