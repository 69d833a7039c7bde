//! Delimited-text tables with header rows.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolver::{EvolutionRecord, Snapshot};

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Purely numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct NumTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(&self.columns)
            .map_err(|e| csv_err(path, e))?;
        for row in &self.rows {
            // `Display` for f64 is the shortest exact representation.
            w.write_record(row.iter().map(|v| v.to_string()))
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let columns = r
            .headers()
            .map_err(|e| csv_err(path, e))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 2,
                        message: format!("not a number: `{s}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_err(path, e))
}

pub fn snapshot_table(radii: &[f64], snap: &Snapshot) -> NumTable {
    let mut t = NumTable::new(["r", "chi", "pi", "rho"]);
    for (i, &r) in radii.iter().enumerate() {
        t.push(vec![r, snap.chi[i], snap.pi[i], snap.rho[i]]);
    }
    t
}

pub fn series_table(record: &EvolutionRecord) -> NumTable {
    let mut cols: Vec<String> = [
        "t",
        "energy",
        "inner_energy",
        "central_density",
        "chi_range",
        "centroid",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend(record.probe_radii.iter().map(|r| format!("chi_at_{r}")));
    let mut t = NumTable::new(cols);
    for s in &record.samples {
        let mut row = vec![
            s.t,
            s.energy,
            s.inner_energy,
            s.central_density,
            s.chi_range,
            s.centroid,
        ];
        row.extend(&s.chi_probes);
        t.push(row);
    }
    t
}

/// Write `<id>_series.csv` and one `<id>_snap_<index>.csv` per snapshot.
pub fn write_record(dir: &Path, id: &str, record: &EvolutionRecord) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let p = dir.join(format!("{id}_series.csv"));
    series_table(record).write(&p)?;
    written.push(p);
    for s in &record.snapshots {
        let p = dir.join(format!("{id}_snap_{}.csv", s.index));
        snapshot_table(&record.radii, s).write(&p)?;
        written.push(p);
    }
    Ok(written)
}

/// `(x, value, slope)` samples of a profile or mode.
pub fn profile_table(x_name: &str, samples: &[(f64, f64, f64)]) -> NumTable {
    let mut t = NumTable::new([x_name, "chi", "dchi"]);
    for &(x, f, d) in samples {
        t.push(vec![x, f, d]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde::Deserialize;

    proptest! {
        #[test]
        fn numeric_tables_round_trip(rows in proptest::collection::vec(
            proptest::collection::vec(-1e300f64..1e300, 3), 0..20)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("t.csv");
            let mut t = NumTable::new(["a", "b", "c"]);
            for r in rows { t.push(r); }
            t.write(&p).unwrap();
            prop_assert_eq!(NumTable::read(&p).unwrap(), t);
        }
    }

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        x: f64,
        label: String,
        y: Option<f64>,
    }

    #[test]
    fn typed_rows_round_trip_with_missing_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        let rows = vec![
            Row {
                x: 0.1,
                label: "singular".into(),
                y: Some(2.5),
            },
            Row {
                x: 1e-9,
                label: "dispersed".into(),
                y: None,
            },
        ];
        write_rows(&p, &rows).unwrap();
        assert_eq!(read_rows::<Row>(&p).unwrap(), rows);
    }

    #[test]
    fn bad_cell_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "a,b\n1,2\n3,x\n").unwrap();
        assert!(matches!(
            NumTable::read(&p),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
