//! CSV and JSON output of sweep tables.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::sweep::{SweepRow, SweepTable};
use crate::error::{Error, Result};
use crate::mechanisms::MechanismKind;

const HEADER: [&str; 11] = [
    "axis_value",
    "mechanism",
    "r1_mean",
    "r1_std",
    "r2_mean",
    "r2_std",
    "worker_utility_mean",
    "worker_utility_std",
    "server_utility_mean",
    "server_utility_std",
    "runs",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Parse(format!(
                "unknown format `{other}` (expected csv|json)"
            ))),
        }
    }
}

/// `x` rounded to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Shortest decimal text of `x` rounded to 9 significant digits, in
/// exponent form for magnitudes outside `[1e-5, 1e16)`.
pub fn format_sig(x: f64) -> String {
    let r = round_sig(x);
    if r != 0.0 && r.is_finite() && !(1e-5..1e16).contains(&r.abs()) {
        format!("{r:e}")
    } else {
        r.to_string()
    }
}

impl SweepTable {
    /// The table as it reads back from an emitted file.
    pub fn rounded(&self) -> SweepTable {
        let rows = self
            .rows
            .iter()
            .map(|r| SweepRow {
                axis_value: round_sig(r.axis_value),
                r1_mean: round_sig(r.r1_mean),
                r1_std: round_sig(r.r1_std),
                r2_mean: round_sig(r.r2_mean),
                r2_std: round_sig(r.r2_std),
                worker_utility_mean: round_sig(r.worker_utility_mean),
                worker_utility_std: round_sig(r.worker_utility_std),
                server_utility_mean: round_sig(r.server_utility_mean),
                server_utility_std: round_sig(r.server_utility_std),
                ..r.clone()
            })
            .collect();
        SweepTable { rows }
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

pub fn write_csv<W: Write>(table: &SweepTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(csv_err)?;
    for r in &table.rows {
        let nums = [
            r.r1_mean,
            r.r1_std,
            r.r2_mean,
            r.r2_std,
            r.worker_utility_mean,
            r.worker_utility_std,
            r.server_utility_mean,
            r.server_utility_std,
        ];
        let mut record = vec![format_sig(r.axis_value), r.mechanism.to_string()];
        record.extend(nums.iter().map(|&x| format_sig(x)));
        record.push(r.runs.to_string());
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<SweepTable> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(HEADER) {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| {
                Error::Parse(format!("bad number `{}` in column {}", &rec[i], HEADER[i]))
            })
        };
        rows.push(SweepRow {
            axis_value: num(0)?,
            mechanism: rec[1].parse::<MechanismKind>()?,
            r1_mean: num(2)?,
            r1_std: num(3)?,
            r2_mean: num(4)?,
            r2_std: num(5)?,
            worker_utility_mean: num(6)?,
            worker_utility_std: num(7)?,
            server_utility_mean: num(8)?,
            server_utility_std: num(9)?,
            runs: rec[10]
                .parse()
                .map_err(|_| Error::Parse(format!("bad run count `{}`", &rec[10])))?,
        });
    }
    Ok(SweepTable { rows })
}

/// A JSON array of row objects with the CSV column names as keys.
pub fn write_json<W: Write>(table: &SweepTable, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &table.rounded().rows)
        .map_err(|e| Error::Parse(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<SweepTable> {
    let rows = serde_json::from_reader(input).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(SweepTable { rows })
}

/// Writes `table` to `path`.
pub fn emit(table: &SweepTable, format: OutputFormat, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        OutputFormat::Csv => write_csv(table, &mut out)?,
        OutputFormat::Json => write_json(table, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> SweepRow {
        SweepRow {
            axis_value: 3.0,
            mechanism: MechanismKind::IFedCrowd,
            r1_mean: 3.386_294_361_119_89,
            r1_std: 0.0,
            r2_mean: 13.795_582_974_561_72,
            r2_std: 1.0 / 3.0,
            worker_utility_mean: -0.123_456_789_123,
            worker_utility_std: 2e-12,
            server_utility_mean: 71.233_256_015_450_82,
            server_utility_std: 12_345_678_912.0,
            runs: 10,
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&SweepTable::default(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{}\n", HEADER.join(","))
        );
    }

    #[test]
    fn one_row_two_lines() {
        let mut buf = Vec::new();
        write_csv(&SweepTable { rows: vec![row()] }, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[1],
            "3,ifedcrowd,3.38629436,0,13.795583,0.333333333,-0.123456789,2e-12,71.233256,12345678900,10"
        );
    }

    #[test]
    fn round_trips() {
        let table = SweepTable {
            rows: vec![
                row(),
                SweepRow {
                    mechanism: MechanismKind::Max,
                    ..row()
                },
            ],
        };
        let mut buf = Vec::new();
        write_json(&table, &mut buf).unwrap();
        assert_eq!(read_json(buf.as_slice()).unwrap(), table.rounded());
        let mut buf = Vec::new();
        write_csv(&table, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), table.rounded());
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig(-2.0 / 3.0 * 1e5), "-66666.6667");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(30.0), "30");
        assert_eq!(format_sig(-1.234_567_891_2e-300), "-1.23456789e-300");
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = emit(
            &SweepTable::default(),
            OutputFormat::Csv,
            "/nonexistent/dir/out.csv",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
