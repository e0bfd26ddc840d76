//! File formats.
//!
//! - Matrix: headerless CSV, one row per event, one column per group.
//! - Model: a JSON document with `dims {M, N, K}`, `group_prior`,
//!   `mixture` (K rows of length N), `components` (M rows of length K) and
//!   `format_version: 1`.
//! - Corpus: a `# plca-corpus v1 M=<M> N=<N> seed=<seed>` header followed
//!   by one `e g` pair per line.
//! - Trace: CSV with header `iter,fobj,kld,max_param_delta,wall_ms` and a
//!   final `# terminated: <reason>` line.
//!
//! Floats are written with the shortest decimal form that parses back to
//! the same bits (never more than 17 significant digits), so every writer
//! round-trips exactly through its reader. Output is UTF-8 with LF line
//! endings and no locale dependence.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::em::{FitTrace, IterationRecord, Termination};
use crate::error::{PlcaError, Result};
use crate::model::PlcaModel;
use crate::sampler::SampleCorpus;

pub const MODEL_FORMAT_VERSION: u64 = 1;
pub const TRACE_HEADER: &str = "iter,fobj,kld,max_param_delta,wall_ms";

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-5, 1e16)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| PlcaError::io(path, e))
}

fn write_string(path: &Path, s: &str) -> Result<()> {
    fs::write(path, s).map_err(|e| PlcaError::io(path, e))
}

// ---------------------------------------------------------------- matrix

/// Parses a headerless CSV of non-negative finite numbers.
pub fn parse_matrix(text: &str) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            PlcaError::Parse {
                line,
                col: 0,
                msg: e.to_string(),
            }
        })?;
        let line = record.position().map_or(nrows + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match ncols {
            None => ncols = Some(record.len()),
            Some(expected) if expected != record.len() => {
                return Err(PlcaError::RaggedRows {
                    line,
                    expected,
                    found: record.len(),
                })
            }
            _ => {}
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| PlcaError::Parse {
                line,
                col: col + 1,
                msg: format!("{field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(PlcaError::NonFinite { row: nrows, col });
            }
            if v < 0.0 {
                return Err(PlcaError::NegativeValue {
                    row: nrows,
                    col,
                    value: v,
                });
            }
            values.push(v);
        }
        nrows += 1;
    }
    let ncols = ncols.ok_or(PlcaError::EmptyFile)?;
    Ok(Array2::from_shape_vec((nrows, ncols), values).expect("row lengths checked"))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    parse_matrix(&read_to_string(path.as_ref())?)
}

pub fn format_matrix(matrix: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in matrix.rows() {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(matrix: &Array2<f64>, path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &format_matrix(matrix))
}

// ----------------------------------------------------------------- model

#[derive(Debug, Serialize, Deserialize)]
struct Dims {
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    dims: Dims,
    group_prior: Vec<f64>,
    mixture: Vec<Vec<f64>>,
    components: Vec<Vec<f64>>,
    format_version: u64,
}

pub fn model_to_json(model: &PlcaModel) -> String {
    let (m, n, k) = model.dims();
    let doc = ModelDoc {
        dims: Dims { m, n, k },
        group_prior: model.group_prior().to_vec(),
        mixture: model.mixture().rows().into_iter().map(|r| r.to_vec()).collect(),
        components: model.components().rows().into_iter().map(|r| r.to_vec()).collect(),
        format_version: MODEL_FORMAT_VERSION,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("model document serializes");
    s.push('\n');
    s
}

fn table(rows: Vec<Vec<f64>>, shape: (usize, usize), name: &str) -> Result<Array2<f64>> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(PlcaError::Schema(format!(
            "field `{name}` must be {} arrays of length {}",
            shape.0, shape.1
        )));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec(shape, flat).expect("shape checked"))
}

pub fn model_from_json(text: &str) -> Result<PlcaModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| PlcaError::Schema(e.to_string()))?;
    match value.get("format_version") {
        None => return Err(PlcaError::Schema("missing field `format_version`".into())),
        Some(v) => match v.as_u64() {
            Some(MODEL_FORMAT_VERSION) => {}
            Some(found) => {
                return Err(PlcaError::VersionMismatch {
                    found,
                    expected: MODEL_FORMAT_VERSION,
                })
            }
            None => {
                return Err(PlcaError::Schema(
                    "field `format_version` must be an unsigned integer".into(),
                ))
            }
        },
    }
    let doc: ModelDoc = serde_json::from_value(value).map_err(|e| PlcaError::Schema(e.to_string()))?;
    let Dims { m, n, k } = doc.dims;
    if doc.group_prior.len() != n {
        return Err(PlcaError::Schema(format!(
            "field `group_prior` has length {}, expected N={n}",
            doc.group_prior.len()
        )));
    }
    let mixture = table(doc.mixture, (k, n), "mixture")?;
    let components = table(doc.components, (m, k), "components")?;
    PlcaModel::new(Array1::from(doc.group_prior), mixture, components)
}

pub fn write_model(model: &PlcaModel, path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &model_to_json(model))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<PlcaModel> {
    model_from_json(&read_to_string(path.as_ref())?)
}

// ---------------------------------------------------------------- corpus

pub fn format_corpus(corpus: &SampleCorpus, dims: (usize, usize)) -> String {
    let mut out = format!(
        "# plca-corpus v1 M={} N={} seed={}\n",
        dims.0,
        dims.1,
        corpus.seed()
    );
    for &(e, g) in corpus.pairs() {
        writeln!(out, "{e} {g}").unwrap();
    }
    out
}

/// Parses a corpus file, returning it with its declared `(M, N)`.
pub fn parse_corpus(text: &str) -> Result<(SampleCorpus, (usize, usize))> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(PlcaError::EmptyFile)?;
    let bad_header = || PlcaError::Parse {
        line: 1,
        col: 1,
        msg: format!("expected `# plca-corpus v1 M=<M> N=<N> seed=<seed>`, got {header:?}"),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != "#" || fields[1] != "plca-corpus" || fields[2] != "v1" {
        return Err(bad_header());
    }
    let kv = |field: &str, key: &str| -> Result<u64> {
        field
            .strip_prefix(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(bad_header)
    };
    let m = kv(fields[3], "M=")? as usize;
    let n = kv(fields[4], "N=")? as usize;
    let seed = kv(fields[5], "seed=")?;

    let mut pairs = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut index = |col: usize| -> Result<usize> {
            parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| PlcaError::Parse {
                    line: lineno,
                    col,
                    msg: format!("expected two non-negative integers, got {line:?}"),
                })
        };
        let e = index(1)?;
        let g = index(2)?;
        if parts.next().is_some() {
            return Err(PlcaError::Parse {
                line: lineno,
                col: 3,
                msg: format!("trailing data in {line:?}"),
            });
        }
        if e >= m || g >= n {
            return Err(PlcaError::Validation(format!(
                "line {lineno}: pair ({e}, {g}) out of range for M={m} N={n}"
            )));
        }
        pairs.push((e, g));
    }
    Ok((SampleCorpus::new(pairs, seed), (m, n)))
}

pub fn write_corpus(corpus: &SampleCorpus, dims: (usize, usize), path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &format_corpus(corpus, dims))
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<(SampleCorpus, (usize, usize))> {
    parse_corpus(&read_to_string(path.as_ref())?)
}

// ----------------------------------------------------------------- trace

/// The contents of a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

pub fn format_trace(trace: &FitTrace) -> Result<String> {
    if trace.records.is_empty() {
        return Err(PlcaError::Validation("cannot write an empty trace".into()));
    }
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iter,
            fmt_f64(r.fobj),
            fmt_f64(r.kld),
            fmt_f64(r.max_param_delta),
            fmt_f64(r.wall_ms)
        )
        .unwrap();
    }
    writeln!(out, "# terminated: {}", trace.termination).unwrap();
    Ok(out)
}

pub fn write_trace(trace: &FitTrace, path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &format_trace(trace)?)
}

pub fn parse_trace(text: &str) -> Result<TraceFile> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRACE_HEADER => {}
        Some((_, h)) => {
            return Err(PlcaError::Parse {
                line: 1,
                col: 1,
                msg: format!("expected header {TRACE_HEADER:?}, got {h:?}"),
            })
        }
        None => return Err(PlcaError::EmptyFile),
    }
    let mut records = Vec::new();
    let mut termination = None;
    for (i, line) in lines {
        let lineno = i + 1;
        if let Some(reason) = line.strip_prefix("# terminated: ") {
            termination = Some(reason.trim().parse()?);
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(PlcaError::RaggedRows {
                line: lineno,
                expected: 5,
                found: fields.len(),
            });
        }
        let num = |col: usize| -> Result<f64> {
            fields[col].trim().parse().map_err(|_| PlcaError::Parse {
                line: lineno,
                col: col + 1,
                msg: format!("{:?} is not a number", fields[col]),
            })
        };
        let iter = fields[0].trim().parse().map_err(|_| PlcaError::Parse {
            line: lineno,
            col: 1,
            msg: format!("{:?} is not an iteration index", fields[0]),
        })?;
        records.push(IterationRecord {
            iter,
            fobj: num(1)?,
            kld: num(2)?,
            max_param_delta: num(3)?,
            wall_ms: num(4)?,
        });
    }
    if records.is_empty() {
        return Err(PlcaError::Validation("trace has no iterations".into()));
    }
    let termination =
        termination.ok_or_else(|| PlcaError::Schema("missing `# terminated:` line".into()))?;
    Ok(TraceFile {
        records,
        termination,
    })
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<TraceFile> {
    parse_trace(&read_to_string(path.as_ref())?)
}
