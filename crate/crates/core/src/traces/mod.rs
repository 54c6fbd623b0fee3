//! Finite sampled paths and their CSV form.
//!
//! A [`Trace`] stores strictly increasing timestamps starting at zero and one
//! row of values per timestamp. Between samples the signal is held: the value
//! at time `t` is the row of the greatest timestamp `<= t`. Categorical state
//! components are encoded as integer-valued reals.

mod csv;

pub use self::csv::{load_traces_csv, write_trace_csv, write_traces_csv};

use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("trace must have at least one sample")]
    Empty,
    #[error("first timestamp must be 0, got {0}")]
    FirstTimestamp(String),
    #[error("non-increasing timestamp at sample {index}")]
    NonIncreasing { index: usize },
    #[error("row {index} has {got} values, expected {expected}")]
    Ragged { index: usize, got: usize, expected: usize },
    #[error("non-finite value at sample {index}, column {column}")]
    NonFinite { index: usize, column: usize },
    #[error("duplicate variable name {0:?}")]
    DuplicateVariable(String),
    #[error("time {t} outside trace domain [0, {end}]")]
    OutOfDomain { t: String, end: String },
    #[error("{file}: row {row}{}: {message}", trace_id.as_ref().map(|id| format!(" (trace {id})")).unwrap_or_default())]
    Csv {
        file: String,
        row: usize,
        trace_id: Option<String>,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// A finite, timestamped, vector-valued sample path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    variables: Vec<String>,
    times: Vec<T>,
    // row-major, `times.len() * variables.len()` entries
    values: Vec<T>,
    id: Option<String>,
}

impl<T: Scalar> Trace<T> {
    pub fn new(variables: Vec<String>, times: Vec<T>, rows: Vec<Vec<T>>) -> Result<Self, TraceError> {
        let width = variables.len();
        if rows.len() != times.len() {
            return Err(TraceError::Ragged {
                index: rows.len().min(times.len()),
                got: rows.len(),
                expected: times.len(),
            });
        }
        let mut values = Vec::with_capacity(width * rows.len());
        for (index, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(TraceError::Ragged {
                    index,
                    got: row.len(),
                    expected: width,
                });
            }
            values.extend(row);
        }
        Self::from_flat(variables, times, values)
    }

    /// Builds a trace from row-major values.
    pub fn from_flat(variables: Vec<String>, times: Vec<T>, values: Vec<T>) -> Result<Self, TraceError> {
        let width = variables.len();
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].contains(v) {
                return Err(TraceError::DuplicateVariable(v.clone()));
            }
        }
        let Some(first) = times.first() else {
            return Err(TraceError::Empty);
        };
        if *first != T::zero() {
            return Err(TraceError::FirstTimestamp(first.to_string()));
        }
        for (index, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(TraceError::NonIncreasing { index: index + 1 });
            }
        }
        if values.len() != width * times.len() {
            return Err(TraceError::Ragged {
                index: values.len() / width.max(1),
                got: values.len(),
                expected: width * times.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(TraceError::NonFinite {
                index: pos / width,
                column: pos % width,
            });
        }
        Ok(Self {
            variables,
            times,
            values,
            id: None,
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn timestamps(&self) -> &[T] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> T {
        *self.times.last().expect("trace is non-empty")
    }

    pub fn row(&self, index: usize) -> &[T] {
        let w = self.variables.len();
        &self.values[index * w..(index + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = (T, &[T])> + '_ {
        (0..self.len()).map(move |i| (self.times[i], self.row(i)))
    }

    /// Held value at `t`: the row at the greatest timestamp `<= t`.
    pub fn sample_at(&self, t: T) -> Result<&[T], TraceError> {
        if !(t >= T::zero() && t <= self.end_time()) {
            return Err(self.out_of_domain(t));
        }
        Ok(self.row(self.index_at(t)))
    }

    /// Index of the greatest timestamp `<= t`, clamped to the trace.
    pub(crate) fn index_at(&self, t: T) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Like [`Self::index_at`] but absorbs floating error from time arithmetic.
    pub(crate) fn index_at_tol(&self, t: T) -> usize {
        self.index_at(t + T::time_tol(t))
    }

    /// Zero-copy suffix view re-based so that time 0 maps to `t`.
    pub fn shift(&self, t: T) -> Result<TraceView<'_, T>, TraceError> {
        TraceView::new(self, T::zero()).shift(t)
    }

    pub fn view(&self) -> TraceView<'_, T> {
        TraceView::new(self, T::zero())
    }

    fn out_of_domain(&self, t: T) -> TraceError {
        TraceError::OutOfDomain {
            t: t.to_string(),
            end: self.end_time().to_string(),
        }
    }
}

/// A trace seen through a time offset, `view(t') = trace(offset + t')`.
#[derive(Debug, Clone, Copy)]
pub struct TraceView<'a, T> {
    trace: &'a Trace<T>,
    offset: T,
}

impl<'a, T: Scalar> TraceView<'a, T> {
    fn new(trace: &'a Trace<T>, offset: T) -> Self {
        Self { trace, offset }
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn trace(&self) -> &'a Trace<T> {
        self.trace
    }

    pub fn end_time(&self) -> T {
        self.trace.end_time() - self.offset
    }

    pub fn sample_at(&self, t: T) -> Result<&'a [T], TraceError> {
        if !(t >= T::zero() && t <= self.end_time()) {
            return Err(TraceError::OutOfDomain {
                t: t.to_string(),
                end: self.end_time().to_string(),
            });
        }
        let abs = (self.offset + t).min(self.trace.end_time());
        Ok(self.trace.row(self.trace.index_at(abs)))
    }

    pub fn shift(&self, t: T) -> Result<TraceView<'a, T>, TraceError> {
        if !(t >= T::zero() && t <= self.end_time()) {
            return Err(TraceError::OutOfDomain {
                t: t.to_string(),
                end: self.end_time().to_string(),
            });
        }
        Ok(Self::new(self.trace, self.offset + t))
    }

    /// Timestamps of the view: 0 followed by every original timestamp after the offset.
    pub fn timestamps(&self) -> impl Iterator<Item = T> + '_ {
        let first = self.trace.times.partition_point(|&s| s <= self.offset);
        std::iter::once(T::zero()).chain(self.trace.times[first..].iter().map(move |&s| s - self.offset))
    }

    /// Copies the view into an owned trace.
    pub fn to_trace(&self) -> Trace<T> {
        let times: Vec<T> = self.timestamps().collect();
        let mut values = Vec::with_capacity(times.len() * self.trace.variables.len());
        for &t in &times {
            let abs = (self.offset + t).min(self.trace.end_time());
            values.extend_from_slice(self.trace.row(self.trace.index_at(abs)));
        }
        Trace {
            variables: self.trace.variables.clone(),
            times,
            values,
            id: self.trace.id.clone(),
        }
    }
}
