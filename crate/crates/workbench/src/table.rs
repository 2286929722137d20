//! Datasets as CSV: `f0..f{d-1}`, one column per region facet holding
//! partition names, optional `watch_time`, `video_length` and `time`, then
//! one column per label. Comma separated, LF line endings.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use mfh_core::data::{derive_labels, Dataset, LabelConfig, PlayRecord, Sample};
use mfh_core::lattice::{Code, FacetSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The columns a file is expected to carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub facets: FacetSpec,
    pub feature_dim: usize,
    /// Label columns, read as numbers.
    #[serde(default)]
    pub labels: Vec<String>,
    /// Whether `watch_time` and `video_length` are present.
    #[serde(default)]
    pub raw: bool,
    #[serde(default)]
    pub time: bool,
    /// Derive `cmpl`, `finish` and `skip` from the raw columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derive: Option<LabelConfig>,
}

impl CsvSchema {
    /// Schema that writes every column `dataset` carries.
    pub fn of(dataset: &Dataset) -> Self {
        let first = dataset.samples.first();
        Self {
            facets: dataset.facets.clone(),
            feature_dim: dataset.feature_dim,
            labels: dataset.label_names(),
            raw: first.is_some_and(|s| s.raw.is_some()),
            time: first.is_some_and(|s| s.time.is_some()),
            derive: None,
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols: Vec<String> = (0..self.feature_dim).map(|i| format!("f{i}")).collect();
        for f in self.facets.region_facets() {
            cols.push(self.facets.facets[f].name.clone());
        }
        if self.raw {
            cols.push("watch_time".into());
            cols.push("video_length".into());
        }
        if self.time {
            cols.push("time".into());
        }
        cols.extend(self.labels.iter().cloned());
        cols
    }
}

fn csv_error(source: &str, e: csv::Error) -> Error {
    Error::Schema(format!("{source}: {e}"))
}

fn number(cell: &str, row: usize, column: &str) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| mfh_core::Error::Data(format!("row {row}, column {column:?}: {cell:?} is not a number")).into())
}

/// Parses CSV text from `reader`. Rows are numbered from 1 after the header.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema, source: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("{source}: missing column {name:?}")))
    };
    let features = (0..schema.feature_dim)
        .map(|i| find(&format!("f{i}")))
        .collect::<Result<Vec<_>>>()?;
    let regions = schema
        .facets
        .region_facets()
        .into_iter()
        .map(|f| Ok((f, find(&schema.facets.facets[f].name)?)))
        .collect::<Result<Vec<_>>>()?;
    let raw = if schema.raw || schema.derive.is_some() {
        Some((find("watch_time")?, find("video_length")?))
    } else {
        None
    };
    let time = if schema.time { Some(find("time")?) } else { None };
    let labels = schema
        .labels
        .iter()
        .map(|l| Ok((l.clone(), find(l)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(source, e))?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        let x = features
            .iter()
            .enumerate()
            .map(|(k, &c)| number(cell(c), row, &format!("f{k}")))
            .collect::<Result<Vec<_>>>()?;
        let mut pairs = Vec::with_capacity(regions.len());
        for &(f, c) in &regions {
            let value = cell(c);
            let facet = &schema.facets.facets[f];
            let p = facet.partitions.iter().position(|p| p == value).ok_or_else(|| {
                mfh_core::Error::Data(format!("row {row}: unknown partition {value:?} in column {:?}", facet.name))
            })?;
            pairs.push((f, p));
        }
        let raw = match raw {
            Some((w, l)) => Some(PlayRecord {
                watch_time: number(cell(w), row, "watch_time")?,
                video_length: number(cell(l), row, "video_length")?,
            }),
            None => None,
        };
        let mut label_map = BTreeMap::new();
        if let (Some(cfg), Some(r)) = (schema.derive, raw) {
            let l = derive_labels(r.watch_time, r.video_length, cfg.skip_threshold, cfg.cmpl_cap)
                .map_err(|e| mfh_core::Error::Data(format!("row {row}: {e}")))?;
            label_map.insert("cmpl".to_string(), l.cmpl);
            label_map.insert("finish".to_string(), l.finish);
            label_map.insert("skip".to_string(), l.skip);
        }
        for (name, c) in &labels {
            label_map.insert(name.clone(), number(cell(*c), row, name)?);
        }
        samples.push(Sample {
            features: x,
            region: Code::new(pairs, &schema.facets)?,
            raw: if schema.raw { raw } else { None },
            time: time.map(|c| number(cell(c), row, "time")).transpose()?,
            labels: label_map,
        });
    }
    Ok(Dataset::new(schema.facets.clone(), schema.feature_dim, samples, source.to_string())?)
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = File::open(path).map_err(Error::io(path))?;
    read_csv(file, schema, &path.display().to_string())
}

/// Writes `dataset` with the columns of `schema`. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(writer: W, dataset: &Dataset, schema: &CsvSchema) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let fail = |e: csv::Error| Error::Schema(format!("writing csv: {e}"));
    w.write_record(schema.header()).map_err(fail)?;
    let region_facets = schema.facets.region_facets();
    for (i, s) in dataset.samples.iter().enumerate() {
        let row = i + 1;
        let mut rec: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
        for &f in &region_facets {
            let p = s
                .region
                .partition_of(f)
                .ok_or_else(|| mfh_core::Error::Data(format!("row {row} has no partition for facet {f}")))?;
            rec.push(schema.facets.facets[f].partitions[p].clone());
        }
        if schema.raw {
            let r = s.raw.ok_or_else(|| mfh_core::Error::Data(format!("row {row} has no raw play record")))?;
            rec.push(r.watch_time.to_string());
            rec.push(r.video_length.to_string());
        }
        if schema.time {
            let t = s.time.ok_or_else(|| mfh_core::Error::Data(format!("row {row} has no time")))?;
            rec.push(t.to_string());
        }
        for l in &schema.labels {
            let v = s
                .labels
                .get(l)
                .ok_or_else(|| mfh_core::Error::Data(format!("row {row} has no label {l:?}")))?;
            rec.push(v.to_string());
        }
        w.write_record(&rec).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::Schema(format!("writing csv: {e}")))?;
    Ok(())
}

pub fn write_csv_file(path: &Path, dataset: &Dataset, schema: &CsvSchema) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    write_csv(std::io::BufWriter::new(file), dataset, schema)
}
