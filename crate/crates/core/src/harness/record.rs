//! Per-replication records and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RrrError};

pub const SCHEMA_VERSION: u32 = 1;

/// One method applied to one replication. `None` fields are written as
/// empty CSV cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub schema_version: u32,
    pub experiment: String,
    pub setting: String,
    pub b0: f64,
    pub true_rank: usize,
    pub rep: u64,
    pub method: String,
    pub selected: Option<usize>,
    pub snr: Option<f64>,
    /// `‖(PY)_k̂ − XA‖ / √(nm)`.
    pub fit_err: Option<f64>,
    /// `‖Â − A‖ / √(pm)`, low-dimensional designs only.
    pub pred_err: Option<f64>,
    pub lambda_start: Option<f64>,
    pub lambda_final: Option<f64>,
    pub steps: Option<usize>,
    pub k_cap: Option<usize>,
    pub note: Option<String>,
}

impl ReplicationRecord {
    pub fn recovered(&self) -> bool {
        self.selected == Some(self.true_rank)
    }
}

pub fn write_records<W: Write>(out: W, records: &[ReplicationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_file(path: &Path, records: &[ReplicationRecord]) -> Result<()> {
    write_records(std::fs::File::create(path)?, records)
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ReplicationRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let rec: ReplicationRecord = row?;
        if rec.schema_version != SCHEMA_VERSION {
            return Err(RrrError::ConfigError(format!(
                "unsupported record schema_version {}",
                rec.schema_version
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_records_file(path: &Path) -> Result<Vec<ReplicationRecord>> {
    read_records(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(selected: Option<usize>) -> ReplicationRecord {
        ReplicationRecord {
            schema_version: SCHEMA_VERSION,
            experiment: "t".into(),
            setting: "s".into(),
            b0: 0.25,
            true_rank: 3,
            rep: 0,
            method: "BSW-1.1".into(),
            selected,
            snr: Some(2.5),
            fit_err: None,
            pred_err: None,
            lambda_start: None,
            lambda_final: None,
            steps: None,
            k_cap: None,
            note: selected.is_none().then(|| "n = q".into()),
        }
    }

    #[test]
    fn na_is_empty_field_and_round_trips() {
        let recs = vec![sample(Some(3)), sample(None)];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("schema_version,experiment,"));
        let na_row = text.lines().nth(2).unwrap();
        assert!(na_row.starts_with("1,t,s,0.25,3,0,BSW-1.1,,2.5,"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), recs);
    }
}
