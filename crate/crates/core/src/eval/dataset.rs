use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub obs: Vec<f64>,
    pub action: f64,
}

/// Supervised (observation, action) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    arity: usize,
    pub rows: Vec<Row>,
}

impl Dataset {
    pub fn new(arity: usize) -> Dataset {
        Dataset {
            arity,
            rows: Vec::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, obs: Vec<f64>, action: f64) -> Result<()> {
        if obs.len() != self.arity {
            return Err(Error::Dataset(format!(
                "observation has {} values, expected {}",
                obs.len(),
                self.arity
            )));
        }
        if !action.is_finite() {
            return Err(Error::Dataset(format!("non-finite action {action}")));
        }
        self.rows.push(Row { obs, action });
        Ok(())
    }

    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if other.arity != self.arity {
            return Err(Error::Dataset("arity mismatch".into()));
        }
        self.rows.extend(other.rows.iter().cloned());
        Ok(())
    }

    pub fn actions(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.action).collect()
    }

    pub fn observations(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.iter().map(|r| r.obs.as_slice())
    }

    /// Reads CSV with header `x1,...,xN,action`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let n = headers.len();
        if n < 1 || &headers[n - 1] != "action" {
            return Err(Error::Dataset("last column must be `action`".into()));
        }
        for (i, h) in headers.iter().take(n - 1).enumerate() {
            if h != format!("x{}", i + 1) {
                return Err(Error::Dataset(format!("column {} must be `x{}`", i + 1, i + 1)));
            }
        }
        let mut data = Dataset::new(n - 1);
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Dataset(format!("row {}: {e}", line + 1)))?;
            let action = vals[n - 1];
            data.push(vals[..n - 1].to_vec(), action)?;
        }
        Ok(data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        Dataset::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.arity).map(|i| format!("x{i}")).collect();
        header.push("action".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.obs.iter().map(|x| x.to_string()).collect();
            rec.push(row.action.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
