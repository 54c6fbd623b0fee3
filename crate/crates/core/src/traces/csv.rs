//! CSV ingestion and export.
//!
//! Header `time,<vars...>[,trace_id]`. Without a `trace_id` column a file holds
//! one trace; with it, rows are grouped by id in order of first appearance.
//! A directory is read as one or more traces per `*.csv` file, files sorted by name.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Trace, TraceError};
use crate::scalar::Scalar;

const TIME: &str = "time";
const TRACE_ID: &str = "trace_id";

/// Loads every trace from a CSV file, or from all `*.csv` files of a directory.
pub fn load_traces_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Trace<T>>, TraceError> {
    let path = path.as_ref();
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .map_err(|e| io_err(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
            .collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            out.extend(load_file(&f)?);
        }
        Ok(out)
    } else {
        load_file(path)
    }
}

struct Pending<T> {
    id: Option<String>,
    first_row: usize,
    times: Vec<T>,
    values: Vec<T>,
}

fn load_file<T: Scalar>(path: &Path) -> Result<Vec<Trace<T>>, TraceError> {
    let file = path.display().to_string();
    let data = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(data.as_slice());
    let err = |row: usize, trace_id: Option<&str>, message: String| TraceError::Csv {
        file: file.clone(),
        row,
        trace_id: trace_id.map(str::to_owned),
        message,
    };

    let header = reader.headers().map_err(|e| err(1, None, e.to_string()))?.clone();
    if header.get(0) != Some(TIME) {
        return Err(err(1, None, format!("header must start with {TIME:?}")));
    }
    let id_col = header.iter().position(|h| h == TRACE_ID);
    let variables: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != 0 && Some(i) != id_col)
        .map(|(_, h)| h.to_owned())
        .collect();
    if variables.iter().any(String::is_empty) {
        return Err(err(1, None, "empty column name".into()));
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());

    let mut order: Vec<Pending<T>> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        // header is row 1
        let row = i + 2;
        let record = record.map_err(|e| err(row, None, e.to_string()))?;
        let id = id_col.and_then(|c| record.get(c)).map(str::to_owned);
        if record.len() != header.len() {
            return Err(err(
                row,
                id.as_deref(),
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let key = id.clone().unwrap_or_default();
        let slot = *by_id.entry(key).or_insert_with(|| {
            order.push(Pending {
                id: id.clone(),
                first_row: row,
                times: Vec::new(),
                values: Vec::new(),
            });
            order.len() - 1
        });
        let pending = &mut order[slot];
        let parse = |col: usize| -> Result<T, TraceError> {
            let text = record.get(col).unwrap_or("");
            let v: f64 = text.parse().map_err(|_| {
                err(
                    row,
                    id.as_deref(),
                    format!("invalid number {text:?} in column {:?}", &header[col]),
                )
            })?;
            if !v.is_finite() {
                return Err(err(
                    row,
                    id.as_deref(),
                    format!("non-finite value in column {:?}", &header[col]),
                ));
            }
            T::from_f64(v).filter(|x| x.is_finite()).ok_or_else(|| {
                err(
                    row,
                    id.as_deref(),
                    format!("value out of range in column {:?}", &header[col]),
                )
            })
        };
        let t = parse(0)?;
        match pending.times.last() {
            None if t != T::zero() => {
                return Err(err(row, id.as_deref(), "first timestamp of a trace must be 0".into()))
            }
            Some(&last) if !(t > last) => {
                return Err(err(
                    row,
                    id.as_deref(),
                    format!("non-increasing timestamp at row {row}"),
                ))
            }
            _ => {}
        }
        pending.times.push(t);
        for col in 1..header.len() {
            if Some(col) != id_col {
                let v = parse(col)?;
                pending.values.push(v);
            }
        }
    }
    if order.is_empty() {
        return Err(err(1, None, "no data rows".into()));
    }

    order
        .into_iter()
        .map(|p| {
            let row = p.first_row;
            let id = p.id.clone().or_else(|| stem.clone());
            Trace::from_flat(variables.clone(), p.times, p.values)
                .map(|t| match &id {
                    Some(id) => t.with_id(id.clone()),
                    None => t,
                })
                .map_err(|e| err(row, p.id.as_deref(), e.to_string()))
        })
        .collect()
}

/// Writes one trace without a `trace_id` column.
pub fn write_trace_csv<T: Scalar>(trace: &Trace<T>, path: impl AsRef<Path>) -> Result<(), TraceError> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(TIME);
    for v in trace.variables() {
        out.push(',');
        out.push_str(v);
    }
    out.push('\n');
    for (t, row) in trace.rows() {
        push_number(&mut out, t);
        for &v in row {
            out.push(',');
            push_number(&mut out, v);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes several traces with identical variables into one file keyed by `trace_id`.
/// Traces without an id are labelled by position.
pub fn write_traces_csv<T: Scalar>(traces: &[Trace<T>], path: impl AsRef<Path>) -> Result<(), TraceError> {
    let path = path.as_ref();
    let Some(first) = traces.first() else {
        return Err(TraceError::Empty);
    };
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = String::new();
    out.push_str(TIME);
    for v in first.variables() {
        out.push(',');
        out.push_str(v);
    }
    out.push_str(",trace_id\n");
    for (k, trace) in traces.iter().enumerate() {
        if trace.variables() != first.variables() {
            return Err(TraceError::Io {
                path: path.display().to_string(),
                message: format!("trace {k} has different variables"),
            });
        }
        let id = trace.id().map(str::to_owned).unwrap_or_else(|| k.to_string());
        for (t, row) in trace.rows() {
            push_number(&mut out, t);
            for &v in row {
                out.push(',');
                push_number(&mut out, v);
            }
            out.push(',');
            out.push_str(&id);
            out.push('\n');
        }
    }
    file.write_all(out.as_bytes()).map_err(|e| io_err(path, e))
}

// `Display` for floats is the shortest representation that parses back exactly.
fn push_number<T: Scalar>(out: &mut String, v: T) {
    use std::fmt::Write as _;
    let _ = write!(out, "{v}");
}

fn io_err(path: &Path, e: std::io::Error) -> TraceError {
    TraceError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}
