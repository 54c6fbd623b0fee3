//! Boolean monitor over held (piecewise-constant) signals.
//!
//! Each subformula's satisfaction, as a function of time, is piecewise
//! constant with finitely many breakpoints. [`Monitor::breakpoints`] computes
//! a superset of them for a window, so the time quantifiers of Until can be
//! decided exactly by checking every breakpoint plus one interior point of
//! every gap between consecutive breakpoints. Interior points are skipped
//! for subformulas known to be right-continuous (value on `[p_i, p_i+1)`
//! equals the value at `p_i`).

use super::ast::{Formula, Node};
use super::FormulaError;
use crate::scalar::Scalar;
use crate::traces::Trace;

/// Least `T` such that satisfaction at time 0 only depends on `[0, T]`.
pub fn formula_horizon<T: Scalar>(f: &Formula<T>) -> Result<T, FormulaError> {
    if let Some(i) = f.root.first_param() {
        return Err(FormulaError::Uninstantiated(format!("#{i}")));
    }
    horizon(&f.root, &[])
}

pub(crate) fn horizon<T: Scalar>(node: &Node<T>, params: &[T]) -> Result<T, FormulaError> {
    match node {
        Node::Atom(_) => Ok(T::zero()),
        Node::Not(a) => horizon(a, params),
        Node::And(a, b) => Ok(horizon(a, params)?.max(horizon(b, params)?)),
        Node::Until { interval, left, right } => {
            let (a, b) = (interval.lo.value(params), interval.hi.value(params));
            if a.is_infinite() || b.is_infinite() {
                return Err(FormulaError::Unbounded);
            }
            let children = horizon(left, params)?.max(horizon(right, params)?);
            match interval.resolve(params) {
                Some((_, b)) => Ok(b + children),
                // constant false
                None => Ok(T::zero()),
            }
        }
    }
}

/// Decides `trace^(t0) |= f`.
pub fn evaluate<T: Scalar>(f: &Formula<T>, trace: &Trace<T>, t0: T) -> Result<bool, FormulaError> {
    if let Some(i) = f.root.first_param() {
        return Err(FormulaError::Uninstantiated(format!("#{i}")));
    }
    Monitor::new(f, trace)?.holds_at(&f.root, &[], t0)
}

/// A formula bound to one trace: signal columns resolved once, parameter
/// values supplied per query.
pub(crate) struct Monitor<'a, T> {
    trace: &'a Trace<T>,
    cols: Vec<usize>,
}

impl<'a, T: Scalar> Monitor<'a, T> {
    pub(crate) fn new(f: &Formula<T>, trace: &'a Trace<T>) -> Result<Self, FormulaError> {
        let cols = f
            .signals
            .iter()
            .map(|s| {
                trace
                    .variable_index(s)
                    .ok_or_else(|| FormulaError::MissingSignal(s.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { trace, cols })
    }

    /// Checked entry point: validates `t0` and the horizon, then evaluates.
    pub(crate) fn holds_at(&self, root: &Node<T>, params: &[T], t0: T) -> Result<bool, FormulaError> {
        let end = self.trace.end_time();
        let needed = t0 + horizon(root, params)?;
        if !(t0 >= T::zero()) || needed > end + T::time_tol(end) {
            return Err(FormulaError::TraceTooShort {
                needed: needed.to_string(),
                end: end.to_string(),
            });
        }
        Ok(self.holds(root, params, t0))
    }

    fn holds(&self, node: &Node<T>, params: &[T], t: T) -> bool {
        match node {
            Node::Atom(e) => {
                let row = self.trace.row(self.trace.index_at_tol(t));
                e.eval(row, &self.cols, params) > T::zero()
            }
            Node::Not(a) => !self.holds(a, params, t),
            Node::And(a, b) => self.holds(a, params, t) && self.holds(b, params, t),
            Node::Until { interval, left, right } => {
                let Some((a, b)) = interval.resolve(params) else {
                    return false;
                };
                let last = t + b;
                // phi1 must hold on [t, s); s may not pass its first failure
                let limit = match left.constant() {
                    Some(true) => last,
                    Some(false) => t,
                    None => self.first_failure(left, params, t, last).unwrap_or(last).min(last),
                };
                let first = t + a;
                if first > limit + T::time_tol(limit) {
                    return false;
                }
                self.exists(right, params, first, limit.max(first))
            }
        }
    }

    /// Sorted candidate points `lo`, breakpoints in `(lo, hi]`, and `hi`.
    fn candidates(&self, node: &Node<T>, params: &[T], lo: T, hi: T) -> Vec<T> {
        let mut pts = Vec::new();
        self.breakpoints(node, params, lo, hi, &mut pts);
        pts.push(lo);
        pts.push(hi);
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        dedup_tol(&mut pts);
        pts
    }

    fn exists(&self, node: &Node<T>, params: &[T], lo: T, hi: T) -> bool {
        if let Some(v) = node.constant() {
            return v;
        }
        if is_state(node) {
            return self.state_rows(lo, hi).any(|i| self.holds_row(node, params, i));
        }
        let pts = self.candidates(node, params, lo, hi);
        let rc = right_continuous(node);
        for (i, &p) in pts.iter().enumerate() {
            if self.holds(node, params, p) {
                return true;
            }
            if !rc {
                if let Some(&q) = pts.get(i + 1) {
                    if self.holds(node, params, midpoint(p, q)) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Infimum of the failure set of `node` within `[lo, hi]`.
    fn first_failure(&self, node: &Node<T>, params: &[T], lo: T, hi: T) -> Option<T> {
        if is_state(node) {
            let times = self.trace.timestamps();
            return self
                .state_rows(lo, hi)
                .find(|&i| !self.holds_row(node, params, i))
                .map(|i| times[i].max(lo));
        }
        let pts = self.candidates(node, params, lo, hi);
        let rc = right_continuous(node);
        for (i, &p) in pts.iter().enumerate() {
            if !self.holds(node, params, p) {
                return Some(p);
            }
            if !rc {
                if let Some(&q) = pts.get(i + 1) {
                    if !self.holds(node, params, midpoint(p, q)) {
                        return Some(p);
                    }
                }
            }
        }
        None
    }

    /// Rows whose hold intervals cover `[lo, hi]`.
    fn state_rows(&self, lo: T, hi: T) -> std::ops::RangeInclusive<usize> {
        self.trace.index_at_tol(lo)..=self.trace.index_at_tol(hi.max(lo))
    }

    /// Satisfaction of an Until-free formula on the hold interval of row `i`.
    fn holds_row(&self, node: &Node<T>, params: &[T], i: usize) -> bool {
        match node {
            Node::Atom(e) => e.eval(self.trace.row(i), &self.cols, params) > T::zero(),
            Node::Not(a) => !self.holds_row(a, params, i),
            Node::And(a, b) => self.holds_row(a, params, i) && self.holds_row(b, params, i),
            Node::Until { .. } => unreachable!("state formulas contain no Until"),
        }
    }

    /// Pushes times in `(lo, hi]` where the satisfaction of `node` may change.
    fn breakpoints(&self, node: &Node<T>, params: &[T], lo: T, hi: T, out: &mut Vec<T>) {
        if node.constant().is_some() || hi < lo {
            return;
        }
        match node {
            Node::Atom(_) => {
                let times = self.trace.timestamps();
                let from = times.partition_point(|&s| s <= lo + T::time_tol(lo));
                let to = times.partition_point(|&s| s <= hi + T::time_tol(hi));
                if from < to {
                    out.extend_from_slice(&times[from..to]);
                }
            }
            Node::Not(a) => self.breakpoints(a, params, lo, hi, out),
            Node::And(a, b) => {
                self.breakpoints(a, params, lo, hi, out);
                self.breakpoints(b, params, lo, hi, out);
            }
            Node::Until { interval, left, right } => {
                let Some((a, b)) = interval.resolve(params) else {
                    return;
                };
                let keep = |v: T| v > lo + T::time_tol(lo) && v <= hi + T::time_tol(hi);
                let mut inner = Vec::new();
                self.breakpoints(right, params, lo + a, hi + b, &mut inner);
                sort_dedup(&mut inner);
                for &p in &inner {
                    out.extend([p - a, p - b].into_iter().filter(|&v| keep(v)));
                }
                if left.constant().is_none() {
                    inner.clear();
                    self.breakpoints(left, params, lo, hi + b, &mut inner);
                    sort_dedup(&mut inner);
                    for &p in &inner {
                        out.extend([p, p - a, p - b].into_iter().filter(|&v| keep(v)));
                    }
                }
            }
        }
    }
}

/// Until-free formulas only depend on the current sample.
fn is_state<T>(node: &Node<T>) -> bool {
    match node {
        Node::Atom(_) => true,
        Node::Not(a) => is_state(a),
        Node::And(a, b) => is_state(a) && is_state(b),
        Node::Until { .. } => false,
    }
}

/// Whether satisfaction is constant on `[p_i, p_i+1)` between breakpoints.
/// Atoms over held signals are; boolean combinations and Finally preserve it,
/// while a general Until with a positive lower bound does not.
fn right_continuous<T: Scalar>(node: &Node<T>) -> bool {
    match node {
        Node::Atom(_) => true,
        Node::Not(a) => right_continuous(a),
        Node::And(a, b) => right_continuous(a) && right_continuous(b),
        Node::Until { interval, left, right } => {
            let lower_is_zero = matches!(interval.lo, super::ast::Bound::Lit(v) if v == T::zero());
            right_continuous(right) && (left.constant() == Some(true) || (lower_is_zero && right_continuous(left)))
        }
    }
}

fn midpoint<T: Scalar>(p: T, q: T) -> T {
    p + (q - p) / T::lit(2.0)
}

fn sort_dedup<T: Scalar>(v: &mut Vec<T>) {
    v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    dedup_tol(v);
}

fn dedup_tol<T: Scalar>(v: &mut Vec<T>) {
    v.dedup_by(|cur, prev| *cur <= *prev + T::time_tol(*prev));
}
