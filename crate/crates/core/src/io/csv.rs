//! Diagnostics time series as CSV.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), which parses
//! back to the same `f64`. Missing bubble fits are empty fields.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::diagnostics::{BubbleFit, DiagnosticsRecord};

pub const TIME_SERIES_COLUMNS: [&str; 13] = [
    "t",
    "mass",
    "kinetic",
    "potential",
    "energy",
    "K",
    "s_accum",
    "sup_abs",
    "bubble_lambda",
    "bubble_cx",
    "bubble_cy",
    "bubble_cz",
    "boundary_mass_frac",
];

/// One CSV row; `bubble` holds `(λ, cx, cy, cz)` with absent center
/// components (`d < 3`) as NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub mass: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub energy: f64,
    pub k_functional: f64,
    pub s_accum: f64,
    pub sup_abs: f64,
    pub bubble: Option<[f64; 4]>,
    pub boundary_mass_frac: f64,
}

impl From<&DiagnosticsRecord> for TimeSeriesRow {
    fn from(r: &DiagnosticsRecord) -> Self {
        let bubble = r.bubble.as_ref().map(|b: &BubbleFit| {
            let c = |i: usize| b.center.get(i).copied().unwrap_or(f64::NAN);
            [b.lambda, c(0), c(1), c(2)]
        });
        Self {
            t: r.t,
            mass: r.mass,
            kinetic: r.kinetic,
            potential: r.potential,
            energy: r.energy,
            k_functional: r.k_functional,
            s_accum: r.s_accumulator,
            sup_abs: r.sup_abs,
            bubble,
            boundary_mass_frac: r.boundary_mass_fraction,
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

impl TimeSeriesRow {
    pub fn to_line(&self) -> String {
        let mut fields: Vec<String> = [
            self.t,
            self.mass,
            self.kinetic,
            self.potential,
            self.energy,
            self.k_functional,
            self.s_accum,
            self.sup_abs,
        ]
        .iter()
        .map(|&v| num(v))
        .collect();
        match self.bubble {
            Some(b) => fields.extend(b.iter().map(|&v| num(v))),
            None => fields.extend(std::iter::repeat_n(String::new(), 4)),
        }
        fields.push(num(self.boundary_mass_frac));
        fields.join(",")
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != TIME_SERIES_COLUMNS.len() {
            return Err(format!(
                "expected {} fields, found {}",
                TIME_SERIES_COLUMNS.len(),
                fields.len()
            ));
        }
        let parse = |i: usize| -> Result<f64, String> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| format!("column {}: {e}", TIME_SERIES_COLUMNS[i]))
        };
        let bubble = if fields[8..12].iter().all(|f| f.is_empty()) {
            None
        } else {
            Some([parse(8)?, parse(9)?, parse(10)?, parse(11)?])
        };
        Ok(Self {
            t: parse(0)?,
            mass: parse(1)?,
            kinetic: parse(2)?,
            potential: parse(3)?,
            energy: parse(4)?,
            k_functional: parse(5)?,
            s_accum: parse(6)?,
            sup_abs: parse(7)?,
            bubble,
            boundary_mass_frac: parse(12)?,
        })
    }
}

pub fn header() -> String {
    TIME_SERIES_COLUMNS.join(",")
}

/// Streams rows to a file; the header is written on creation.
pub struct TimeSeriesWriter {
    out: BufWriter<File>,
}

impl TimeSeriesWriter {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", header())?;
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &DiagnosticsRecord) -> std::io::Result<()> {
        writeln!(self.out, "{}", TimeSeriesRow::from(r).to_line())
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

pub fn write_time_series(path: &Path, records: &[DiagnosticsRecord]) -> std::io::Result<()> {
    let mut w = TimeSeriesWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

pub fn read_time_series(path: &Path) -> std::io::Result<Vec<TimeSeriesRow>> {
    let invalid = |m: String| std::io::Error::new(std::io::ErrorKind::InvalidData, m);
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = lines.next().transpose()?;
    if first.as_deref() != Some(header().as_str()) {
        return Err(invalid("missing or unexpected header".into()));
    }
    lines
        .map(|l| TimeSeriesRow::parse_line(&l?).map_err(invalid))
        .collect()
}

/// Writes a small table of preformatted fields.
pub fn write_table(path: &Path, columns: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", columns.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()
}

pub fn format_f64(v: f64) -> String {
    num(v)
}

pub fn format_opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
