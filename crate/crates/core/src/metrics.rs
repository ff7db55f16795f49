//! Per-round metrics and their CSV form.
//!
//! Columns, in order: `t, wall_seconds, primal_value, suboptimality,
//! duality_gap, theta, reduces, broadcasts, bytes_total, eps_measured`.
//! Floats use 17 significant digits so a parse reproduces them exactly;
//! absent values are empty fields.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const COLUMNS: [&str; 10] = [
    "t",
    "wall_seconds",
    "primal_value",
    "suboptimality",
    "duality_gap",
    "theta",
    "reduces",
    "broadcasts",
    "bytes_total",
    "eps_measured",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t: usize,
    pub wall_seconds: f64,
    pub primal_value: f64,
    pub suboptimality: Option<f64>,
    pub duality_gap: Option<f64>,
    pub theta: Option<f64>,
    pub reduces: u64,
    pub broadcasts: u64,
    pub bytes_total: u64,
    pub eps_measured: Option<f64>,
}

impl MetricsRow {
    /// Looks up a float column by name.
    pub fn column(&self, name: &str) -> Option<f64> {
        match name {
            "t" => Some(self.t as f64),
            "wall_seconds" => Some(self.wall_seconds),
            "primal_value" => Some(self.primal_value),
            "suboptimality" => self.suboptimality,
            "duality_gap" => self.duality_gap,
            "theta" => self.theta,
            "reduces" => Some(self.reduces as f64),
            "broadcasts" => Some(self.broadcasts as f64),
            "bytes_total" => Some(self.bytes_total as f64),
            "eps_measured" => self.eps_measured,
            _ => None,
        }
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

pub fn write_csv<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            fmt_f(r.wall_seconds),
            fmt_f(r.primal_value),
            fmt_opt(r.suboptimality),
            fmt_opt(r.duality_gap),
            fmt_opt(r.theta),
            r.reduces.to_string(),
            r.broadcasts.to_string(),
            r.bytes_total.to_string(),
            fmt_opt(r.eps_measured),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_csv(std::fs::File::create(path)?, rows)
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(Error::InvalidConfig(format!("unexpected metrics header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let bad = |c: usize| Error::ParseError {
            line,
            token: c + 1,
            msg: format!("bad {} value {:?}", COLUMNS[c], field(c)),
        };
        let float = |c: usize| field(c).parse::<f64>().map_err(|_| bad(c));
        let opt = |c: usize| {
            if field(c).is_empty() {
                Ok(None)
            } else {
                float(c).map(Some)
            }
        };
        let int = |c: usize| field(c).parse::<u64>().map_err(|_| bad(c));
        rows.push(MetricsRow {
            t: int(0)? as usize,
            wall_seconds: float(1)?,
            primal_value: float(2)?,
            suboptimality: opt(3)?,
            duality_gap: opt(4)?,
            theta: opt(5)?,
            reduces: int(6)?,
            broadcasts: int(7)?,
            bytes_total: int(8)?,
            eps_measured: opt(9)?,
        });
    }
    Ok(rows)
}

pub fn load_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    read_csv(std::fs::File::open(path)?)
}
