//! Delimited matrix input and bicluster output.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bicluster::{Bicluster, Provenance};
use crate::error::{Error, Result};
use crate::matrix::ExpressionMatrix;

/// Header of the long-format cell table.
pub const LONG_TABLE_HEADER: &str = "gene,condition,value,bicluster";

const MISSING_TOKENS: &[&str] = &["", "na", "nan", "null", "none", "?"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Field delimiter; detected from the header line when `None`.
    pub delimiter: Option<u8>,
    /// Replace missing or non-finite cells with the mean of the row's other cells.
    pub impute_row_mean: bool,
}

fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    let tabs = header.matches('\t').count();
    let commas = header.matches(',').count();
    if tabs > 0 && tabs >= commas {
        b'\t'
    } else {
        b','
    }
}

/// Parses a matrix whose first row holds condition identifiers and whose
/// first column holds gene identifiers. The top-left cell is ignored.
pub fn parse_matrix(text: &str, options: LoadOptions) -> Result<ExpressionMatrix> {
    let delimiter = options.delimiter.unwrap_or_else(|| detect_delimiter(text));
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| parse_error(&e, 1))?,
        None => return Err(Error::Parse { line: 1, column: 1, message: "empty input".into() }),
    };
    let width = header.len();
    if width < 3 {
        return Err(Error::Parse {
            line: 1,
            column: width,
            message: format!(
                "ragged header: {width} field(s), need a gene column and at least two conditions (wrong delimiter?)"
            ),
        });
    }
    let condition_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();

    let mut gene_ids = Vec::new();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for record in records {
        let record = record.map_err(|e| parse_error(&e, 0))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != width {
            return Err(Error::Parse {
                line,
                column: record.len().min(width) + 1,
                message: format!("ragged row: {} field(s), header has {width}", record.len()),
            });
        }
        gene_ids.push(record[0].to_string());
        let mut row = Vec::with_capacity(width - 1);
        for (k, cell) in record.iter().enumerate().skip(1) {
            let value = if MISSING_TOKENS.contains(&cell.to_ascii_lowercase().as_str()) {
                None
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    line,
                    column: k + 1,
                    message: format!("cannot parse {cell:?} as a number"),
                })?;
                v.is_finite().then_some(v)
            };
            if value.is_none() && !options.impute_row_mean {
                return Err(Error::Parse {
                    line,
                    column: k + 1,
                    message: format!(
                        "missing or non-finite value {cell:?} at gene {:?}, condition {:?}",
                        &record[0],
                        condition_ids[k - 1]
                    ),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 2, column: 1, message: "no gene rows".into() });
    }

    let values = rows
        .into_iter()
        .zip(&gene_ids)
        .map(|(row, gene)| {
            let present: Vec<f64> = row.iter().flatten().copied().collect();
            if present.is_empty() {
                return Err(Error::InvalidMatrix(format!("gene {gene:?} has no observed values to impute from")));
            }
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            Ok(row.into_iter().map(|v| v.unwrap_or(mean)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    ExpressionMatrix::from_rows(gene_ids, condition_ids, values)
}

fn parse_error(e: &csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    Error::Parse { line, column: 0, message: e.to_string() }
}

pub fn load_matrix(path: &Path, options: LoadOptions) -> Result<ExpressionMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text, options)
}

/// Writes a matrix in the format [`load_matrix`] reads.
pub fn write_matrix(path: &Path, matrix: &ExpressionMatrix, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    let header = std::iter::once("gene").chain(matrix.condition_ids().iter().map(String::as_str));
    w.write_record(header).map_err(csv_io(path))?;
    for (id, row) in matrix.gene_ids().iter().zip(matrix.rows()) {
        let fields = std::iter::once(id.clone()).chain(row.iter().map(|v| v.to_string()));
        w.write_record(fields).map_err(csv_io(path))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

/// A bicluster with indices resolved to identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiclusterRecord {
    pub id: usize,
    pub genes: Vec<String>,
    pub conditions: Vec<String>,
    pub msr: f64,
    pub mfd: f64,
    pub provenance: Provenance,
}

pub fn records(matrix: &ExpressionMatrix, biclusters: &[Bicluster]) -> Vec<BiclusterRecord> {
    biclusters
        .iter()
        .enumerate()
        .map(|(id, b)| BiclusterRecord {
            id,
            genes: b.rows.iter().map(|&i| matrix.gene_ids()[i].clone()).collect(),
            conditions: b.cols.iter().map(|&j| matrix.condition_ids()[j].clone()).collect(),
            msr: b.msr,
            mfd: b.mfd,
            provenance: b.provenance.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    /// Array of bicluster records.
    Json,
    /// Long-format cell table, one line per (gene, condition, bicluster).
    Csv,
}

/// Long-format table text: header [`LONG_TABLE_HEADER`], then one row per cell.
pub fn long_table(matrix: &ExpressionMatrix, biclusters: &[Bicluster]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Invariant(format!("csv encoding failed: {e}"));
    w.write_record(LONG_TABLE_HEADER.split(',')).map_err(to_err)?;
    for (id, b) in biclusters.iter().enumerate() {
        for &i in &b.rows {
            for &j in &b.cols {
                w.write_record([
                    matrix.gene_ids()[i].as_str(),
                    matrix.condition_ids()[j].as_str(),
                    &matrix.get(i, j).to_string(),
                    &id.to_string(),
                ])
                .map_err(to_err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Invariant(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invariant(e.to_string()))
}

pub fn emit_results(matrix: &ExpressionMatrix, biclusters: &[Bicluster], path: &Path, format: OutputFormat) -> Result<()> {
    let text = match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&records(matrix, biclusters))?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => long_table(matrix, biclusters)?,
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a long-format table back into `bicluster id -> {(gene, condition)}`.
pub fn read_long_table(path: &Path) -> Result<BTreeMap<usize, BTreeSet<(String, String)>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(&e, 1))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != LONG_TABLE_HEADER {
        return Err(Error::Parse { line: 1, column: 1, message: format!("unexpected header {header:?}") });
    }
    let mut out: BTreeMap<usize, BTreeSet<(String, String)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(&e, 0))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id: usize = record[3].parse().map_err(|_| Error::Parse {
            line,
            column: 4,
            message: format!("bad bicluster id {:?}", &record[3]),
        })?;
        out.entry(id).or_default().insert((record[0].to_string(), record[1].to_string()));
    }
    Ok(out)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
