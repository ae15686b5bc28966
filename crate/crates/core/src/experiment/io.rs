//! Result tables and the run manifest.
//!
//! CSV files are UTF-8 with LF line endings. Floats are written in Rust's
//! shortest round-trip form, so parsing a file reproduces the in-memory
//! values bit for bit.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AggregateRecord, SweepConfig, SweepRecord};
use crate::error::{Error, Result};

pub const RECORDS_CSV: &str = "records.csv";
pub const AGGREGATES_CSV: &str = "aggregates.csv";
pub const RECORDS_JSON: &str = "records.json";
pub const AGGREGATES_JSON: &str = "aggregates.json";
pub const MANIFEST: &str = "run-manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::config(format!(
                "format must be csv or json, got {other:?}"
            ))),
        }
    }
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub config: SweepConfig,
    pub seeds: Vec<u64>,
    pub rho_grid: Vec<f64>,
    pub workers: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Records are a pure function of `config`; rerunning it reproduces them bit for bit.
    pub deterministic_replay: bool,
    pub record_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(config: &SweepConfig, workers: usize) -> Self {
        RunManifest {
            artifact: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config: config.clone(),
            seeds: config.seeds(),
            rho_grid: config.rho_grid.clone(),
            workers,
            started_unix: unix_now(),
            finished_unix: 0,
            deterministic_replay: true,
            record_count: 0,
            error: None,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::data(format!("{}: not a run manifest: {e}", path.display())))
    }
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn float(x: f64) -> String {
    format!("{x:?}")
}

fn k_max_of<'a>(curves: impl Iterator<Item = &'a Vec<f64>>, fallback: usize) -> usize {
    curves.map(Vec::len).max().unwrap_or(fallback)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::data(format!("{}: {other:?}", path.display())),
    }
}

/// `rho,seed,layer,mc_total,mc_k_1,...,mc_k_{k_max}`
pub fn write_records_csv(path: &Path, records: &[SweepRecord], k_max: usize) -> Result<()> {
    let k_max = k_max_of(records.iter().map(|r| &r.forgetting_curve), k_max);
    let mut w = csv_writer(path)?;
    let mut header = vec![
        "rho".to_owned(),
        "seed".into(),
        "layer".into(),
        "mc_total".into(),
    ];
    header.extend((1..=k_max).map(|k| format!("mc_k_{k}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in records {
        let mut row = vec![
            float(r.rho),
            r.seed.to_string(),
            r.layer.to_string(),
            float(r.mc_total),
        ];
        row.extend(r.forgetting_curve.iter().map(|&v| float(v)));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `rho,layer,mc_mean,mc_std,curve_mean_1,...,curve_mean_{k_max}`
pub fn write_aggregates_csv(
    path: &Path,
    aggregates: &[AggregateRecord],
    k_max: usize,
) -> Result<()> {
    let k_max = k_max_of(aggregates.iter().map(|a| &a.curve_mean), k_max);
    let mut w = csv_writer(path)?;
    let mut header = vec![
        "rho".to_owned(),
        "layer".into(),
        "mc_mean".into(),
        "mc_std".into(),
    ];
    header.extend((1..=k_max).map(|k| format!("curve_mean_{k}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for a in aggregates {
        let mut row = vec![
            float(a.rho),
            a.layer.to_string(),
            float(a.mc_mean),
            float(a.mc_std),
        ];
        row.extend(a.curve_mean.iter().map(|&v| float(v)));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path, leading: &[&str], curve_prefix: &str) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    for (i, name) in leading.iter().enumerate() {
        if header.get(i) != Some(*name) {
            return Err(Error::data(format!(
                "{}: column {} should be {name:?}, found {:?}",
                path.display(),
                i + 1,
                header.get(i).unwrap_or("")
            )));
        }
    }
    for (k, name) in header.iter().skip(leading.len()).enumerate() {
        if name != format!("{curve_prefix}{}", k + 1) {
            return Err(Error::data(format!(
                "{}: unexpected column {name:?}",
                path.display()
            )));
        }
    }
    reader
        .records()
        .map(|row| {
            let row = row.map_err(|e| csv_error(path, e))?;
            Ok(row.iter().map(str::to_owned).collect())
        })
        .collect()
}

fn parse<T: FromStr>(path: &Path, line: usize, field: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::data(format!(
            "{}: row {line}: {field} = {value:?} is not a valid number",
            path.display()
        ))
    })
}

pub fn read_records_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    read_rows(path, &["rho", "seed", "layer", "mc_total"], "mc_k_")?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(SweepRecord {
                rho: parse(path, i + 1, "rho", &row[0])?,
                seed: parse(path, i + 1, "seed", &row[1])?,
                layer: parse(path, i + 1, "layer", &row[2])?,
                mc_total: parse(path, i + 1, "mc_total", &row[3])?,
                forgetting_curve: row[4..]
                    .iter()
                    .map(|v| parse(path, i + 1, "mc_k", v))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

pub fn read_aggregates_csv(path: &Path) -> Result<Vec<AggregateRecord>> {
    read_rows(path, &["rho", "layer", "mc_mean", "mc_std"], "curve_mean_")?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(AggregateRecord {
                rho: parse(path, i + 1, "rho", &row[0])?,
                layer: parse(path, i + 1, "layer", &row[1])?,
                mc_mean: parse(path, i + 1, "mc_mean", &row[2])?,
                mc_std: parse(path, i + 1, "mc_std", &row[3])?,
                curve_mean: row[4..]
                    .iter()
                    .map(|v| parse(path, i + 1, "curve_mean", v))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// Reads aggregates from `.csv` or `.json`, chosen by extension.
pub fn read_aggregates(path: &Path) -> Result<Vec<AggregateRecord>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_json(path),
        _ => read_aggregates_csv(path),
    }
}

/// Reads records from `.csv` or `.json`, chosen by extension.
pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_json(path),
        _ => read_records_csv(path),
    }
}

pub fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join(MANIFEST);
    write_json(&path, manifest)?;
    Ok(path)
}

/// Writes the record and aggregate tables plus the manifest into `out_dir`,
/// returning the paths written.
pub fn emit_results(
    records: &[SweepRecord],
    aggregates: &[AggregateRecord],
    manifest: &RunManifest,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let k_max = manifest.config.protocol.k_max;
    let mut written = Vec::new();
    match format {
        OutputFormat::Csv => {
            let p = out_dir.join(RECORDS_CSV);
            write_records_csv(&p, records, k_max)?;
            written.push(p);
            let p = out_dir.join(AGGREGATES_CSV);
            write_aggregates_csv(&p, aggregates, k_max)?;
            written.push(p);
        }
        OutputFormat::Json => {
            let p = out_dir.join(RECORDS_JSON);
            write_json(&p, records)?;
            written.push(p);
            let p = out_dir.join(AGGREGATES_JSON);
            write_json(&p, aggregates)?;
            written.push(p);
        }
    }
    let mut manifest = manifest.clone();
    manifest.record_count = records.len();
    if manifest.finished_unix == 0 {
        manifest.finished_unix = unix_now();
    }
    written.push(write_manifest(out_dir, &manifest)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<SweepRecord> {
        vec![
            SweepRecord {
                rho: 0.1,
                seed: 0,
                layer: 1,
                mc_total: 1.0 / 3.0,
                forgetting_curve: vec![0.25, 1e-17, 0.083_333_333_333_333_33],
            },
            SweepRecord {
                rho: 1.0,
                seed: 7,
                layer: 2,
                mc_total: 2.5,
                forgetting_curve: vec![1.0, 0.0, 0.1 + 0.2],
            },
        ]
    }

    #[test]
    fn records_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(RECORDS_CSV);
        let recs = sample_records();
        write_records_csv(&path, &recs, 3).unwrap();
        assert_eq!(read_records_csv(&path).unwrap(), recs);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("rho,seed,layer,mc_total,mc_k_1,mc_k_2,mc_k_3\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn aggregates_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(AGGREGATES_CSV);
        let aggs = super::super::aggregate(&sample_records());
        write_aggregates_csv(&path, &aggs, 3).unwrap();
        assert_eq!(read_aggregates_csv(&path).unwrap(), aggs);
    }

    #[test]
    fn empty_tables_have_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let config = SweepConfig {
            protocol: crate::McProtocol {
                k_max: 2,
                ..Default::default()
            },
            ..Default::default()
        };
        let manifest = RunManifest::new(&config, 1);
        emit_results(&[], &[], &manifest, dir.path(), OutputFormat::Csv).unwrap();
        let text = fs::read_to_string(dir.path().join(RECORDS_CSV)).unwrap();
        assert_eq!(text, "rho,seed,layer,mc_total,mc_k_1,mc_k_2\n");
        assert!(read_records_csv(&dir.path().join(RECORDS_CSV))
            .unwrap()
            .is_empty());
        let m = RunManifest::read(&dir.path().join(MANIFEST)).unwrap();
        assert_eq!(m.record_count, 0);
        assert_eq!(m.config, config);
    }

    #[test]
    fn json_format_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let recs = sample_records();
        let aggs = super::super::aggregate(&recs);
        let manifest = RunManifest::new(&SweepConfig::default(), 2);
        let written =
            emit_results(&recs, &aggs, &manifest, dir.path(), OutputFormat::Json).unwrap();
        assert_eq!(written.len(), 3);
        assert_eq!(read_records(&dir.path().join(RECORDS_JSON)).unwrap(), recs);
        assert_eq!(
            read_aggregates(&dir.path().join(AGGREGATES_JSON)).unwrap(),
            aggs
        );
    }

    #[test]
    fn malformed_csv_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(
            &path,
            "rho,layer,mc_mean,mc_std,curve_mean_1\n0.9,1,abc,0,0\n",
        )
        .unwrap();
        assert!(matches!(read_aggregates_csv(&path), Err(Error::Data(_))));
        fs::write(&path, "rho,layer,mean\n").unwrap();
        assert!(matches!(read_aggregates_csv(&path), Err(Error::Data(_))));
        assert!(matches!(
            read_aggregates_csv(&dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("csv".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
