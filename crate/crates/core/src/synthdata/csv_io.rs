//! CSV persistence for datasets plus the JSON sidecar carrying group labels
//! and the generating task.
//!
//! Layout: header `id,f1,...,fK,y`; one row per sample; a missing feature is
//! an empty cell. Floats use the shortest representation that round-trips,
//! so write-then-read is the identity.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, MaskedSample, TaskSpec};
use crate::fsutil::atomic_write_bytes;
use crate::{Error, Result};

/// Sidecar content stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub feature_count: usize,
    pub group_labels: Vec<u8>,
    pub task: TaskSpec,
}

/// Sidecar path for a dataset CSV: the extension becomes `meta.json`
/// (`bench.csv` → `bench.meta.json`).
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes the dataset CSV and its sidecar atomically.
pub fn write_csv(dataset: &Dataset, task: &TaskSpec, path: &Path) -> Result<()> {
    dataset.validate()?;
    task.validate()?;

    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend((1..=dataset.feature_count).map(|i| format!("f{i}")));
    header.push("y".to_string());
    writer
        .write_record(&header)
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;

    let mut row: Vec<String> = Vec::with_capacity(dataset.feature_count + 2);
    for (id, sample) in dataset.samples.iter().enumerate() {
        row.clear();
        row.push(id.to_string());
        for i in 0..dataset.feature_count {
            if sample.is_present(i) {
                row.push(format!("{}", sample.values()[i]));
            } else {
                row.push(String::new());
            }
        }
        row.push(format!("{}", sample.target()));
        writer
            .write_record(&row)
            .map_err(|e| Error::Parse { line: id + 2, msg: e.to_string() })?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Numerical(format!("csv flush: {e}")))?;
    atomic_write_bytes(path, &bytes)?;

    let meta = DatasetMeta {
        feature_count: dataset.feature_count,
        group_labels: dataset.group_labels.clone(),
        task: task.clone(),
    };
    crate::fsutil::atomic_write_json(&sidecar_path(path), &meta, true)
}

/// Reads a dataset CSV and its sidecar back. Inverse of [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Dataset, TaskSpec)> {
    let meta_file = std::fs::File::open(sidecar_path(path))?;
    let meta: DatasetMeta = serde_json::from_reader(std::io::BufReader::new(meta_file))?;

    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));

    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        let expected = meta.feature_count + 2;
        if headers.len() != expected {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header has {} columns, sidecar implies {expected}", headers.len()),
            });
        }
        if &headers[0] != "id" || &headers[headers.len() - 1] != "y" {
            return Err(Error::Parse {
                line: 1,
                msg: "header must be id,f1,...,fK,y".into(),
            });
        }
    }

    let mut samples = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        if record.len() != meta.feature_count + 2 {
            return Err(Error::Parse {
                line,
                msg: format!(
                    "expected {} cells, found {}",
                    meta.feature_count + 2,
                    record.len()
                ),
            });
        }
        record[0].parse::<usize>().map_err(|e| Error::Parse {
            line,
            msg: format!("bad id {:?}: {e}", &record[0]),
        })?;
        let mut values = Vec::with_capacity(meta.feature_count);
        let mut mask = Vec::with_capacity(meta.feature_count);
        for i in 0..meta.feature_count {
            let cell = &record[i + 1];
            if cell.is_empty() {
                values.push(f64::NAN);
                mask.push(false);
            } else {
                let v: f64 = cell.parse().map_err(|e| Error::Parse {
                    line,
                    msg: format!("bad value {cell:?} in f{}: {e}", i + 1),
                })?;
                values.push(v);
                mask.push(true);
            }
        }
        let y_cell = &record[meta.feature_count + 1];
        let target: f64 = y_cell.parse().map_err(|e| Error::Parse {
            line,
            msg: format!("bad target {y_cell:?}: {e}"),
        })?;
        let sample = MaskedSample::new(values, mask, target).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        samples.push(sample);
    }

    let dataset = Dataset::new(samples, meta.feature_count, meta.group_labels)?;
    Ok((dataset, meta.task))
}
