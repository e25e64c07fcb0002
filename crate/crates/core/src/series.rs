//! Column-oriented experiment output.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// A named numeric table, one row per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Series { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Writes CSV; infinities are written as `inf` / `-inf`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns)?;
        for r in &self.rows {
            wr.write_record(r.iter().map(|x| format_value(*x)))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let columns: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let mut out = Series { columns, rows: Vec::new() };
        for rec in rd.records() {
            let rec = rec?;
            let row = rec.iter().map(parse_value).collect::<Result<Vec<_>>>()?;
            if row.len() != out.columns.len() {
                return Err(invalid("ragged CSV row"));
            }
            out.rows.push(row);
        }
        Ok(out)
    }
}

pub fn format_value(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        x.to_string()
    }
}

pub fn parse_value(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse::<f64>().map_err(|e| invalid(format!("bad number `{t}`: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_infinity() {
        let mut s = Series::new(&["t", "x"]);
        s.push(vec![0.0, f64::INFINITY]);
        s.push(vec![1.0, -0.25]);
        let text = s.to_csv_string();
        assert_eq!(text, "t,x\n0,inf\n1,-0.25\n");
        assert_eq!(Series::read_csv(text.as_bytes()).unwrap(), s);
    }
}
