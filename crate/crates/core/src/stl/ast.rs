use std::fmt;

use super::FormulaError;
use crate::scalar::Scalar;

/// Arithmetic over signal values. Signals index into the owning formula's signature.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr<T> {
    Const(T),
    Signal(usize),
    Param(usize),
    Neg(Box<Expr<T>>),
    Add(Box<Expr<T>>, Box<Expr<T>>),
    Sub(Box<Expr<T>>, Box<Expr<T>>),
    Mul(Box<Expr<T>>, Box<Expr<T>>),
    Abs(Box<Expr<T>>),
}

impl<T: Scalar> Expr<T> {
    pub(crate) fn eval(&self, row: &[T], cols: &[usize], params: &[T]) -> T {
        match self {
            Expr::Const(c) => *c,
            Expr::Signal(i) => row[cols[*i]],
            Expr::Param(i) => params[*i],
            Expr::Neg(e) => -e.eval(row, cols, params),
            Expr::Add(a, b) => a.eval(row, cols, params) + b.eval(row, cols, params),
            Expr::Sub(a, b) => a.eval(row, cols, params) - b.eval(row, cols, params),
            Expr::Mul(a, b) => a.eval(row, cols, params) * b.eval(row, cols, params),
            Expr::Abs(e) => e.eval(row, cols, params).abs(),
        }
    }

    pub(crate) fn reads_signals(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Param(_) => false,
            Expr::Signal(_) => true,
            Expr::Neg(e) | Expr::Abs(e) => e.reads_signals(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.reads_signals() || b.reads_signals(),
        }
    }

    fn map_params(&self, f: &impl Fn(usize) -> Expr<T>) -> Expr<T> {
        let bx = |e: &Expr<T>| Box::new(e.map_params(f));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Signal(i) => Expr::Signal(*i),
            Expr::Param(i) => f(*i),
            Expr::Neg(e) => Expr::Neg(bx(e)),
            Expr::Add(a, b) => Expr::Add(bx(a), bx(b)),
            Expr::Sub(a, b) => Expr::Sub(bx(a), bx(b)),
            Expr::Mul(a, b) => Expr::Mul(bx(a), bx(b)),
            Expr::Abs(e) => Expr::Abs(bx(e)),
        }
    }

    fn first_param(&self) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Signal(_) => None,
            Expr::Param(i) => Some(*i),
            Expr::Neg(e) | Expr::Abs(e) => e.first_param(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.first_param().or_else(|| b.first_param()),
        }
    }
}

/// Interval endpoint: a literal, or a (possibly negated) parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound<T> {
    Lit(T),
    Param { index: usize, negated: bool },
}

impl<T: Scalar> Bound<T> {
    pub(crate) fn value(&self, params: &[T]) -> T {
        match *self {
            Bound::Lit(v) => v,
            Bound::Param { index, negated } => {
                let v = params[index];
                if negated {
                    -v
                } else {
                    v
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: Bound<T>,
    pub hi: Bound<T>,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self {
            lo: Bound::Lit(lo),
            hi: Bound::Lit(hi),
        }
    }

    /// Resolved endpoints, or `None` when the interval makes Until false.
    pub(crate) fn resolve(&self, params: &[T]) -> Option<(T, T)> {
        let (a, b) = (self.lo.value(params), self.hi.value(params));
        if b < a || a < T::zero() || b < T::zero() {
            None
        } else {
            Some((a, b))
        }
    }
}

/// Core STL syntax. Atoms are `expr > 0`; derived operators are built by the
/// constructor functions below and never stored.
#[derive(Debug, Clone, PartialEq)]
pub enum Node<T> {
    Atom(Expr<T>),
    Not(Box<Node<T>>),
    And(Box<Node<T>>, Box<Node<T>>),
    Until {
        interval: Interval<T>,
        left: Box<Node<T>>,
        right: Box<Node<T>>,
    },
}

impl<T: Scalar> Node<T> {
    pub fn atom(expr: Expr<T>) -> Self {
        Node::Atom(expr)
    }

    /// `1 > 0`
    pub fn tt() -> Self {
        Node::Atom(Expr::Const(T::one()))
    }

    pub fn ff() -> Self {
        Self::not(Self::tt())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Self) -> Self {
        Node::Not(Box::new(a))
    }

    pub fn and(a: Self, b: Self) -> Self {
        Node::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Self, b: Self) -> Self {
        Self::not(Self::and(Self::not(a), Self::not(b)))
    }

    pub fn implies(a: Self, b: Self) -> Self {
        Self::or(Self::not(a), b)
    }

    pub fn until(interval: Interval<T>, left: Self, right: Self) -> Self {
        Node::Until {
            interval,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// `F_I a = true U_I a`
    pub fn finally(interval: Interval<T>, a: Self) -> Self {
        Self::until(interval, Self::tt(), a)
    }

    /// `G_I a = !F_I !a`
    pub fn globally(interval: Interval<T>, a: Self) -> Self {
        Self::not(Self::finally(interval, Self::not(a)))
    }

    /// True for atoms that do not read any signal and hold on every trace.
    pub(crate) fn constant(&self) -> Option<bool> {
        match self {
            Node::Atom(e) if !e.reads_signals() && e.first_param().is_none() => Some(e.eval(&[], &[], &[]) > T::zero()),
            Node::Not(a) => a.constant().map(|v| !v),
            _ => None,
        }
    }

    pub(crate) fn first_param(&self) -> Option<usize> {
        match self {
            Node::Atom(e) => e.first_param(),
            Node::Not(a) => a.first_param(),
            Node::And(a, b) => a.first_param().or_else(|| b.first_param()),
            Node::Until { interval, left, right } => [interval.lo, interval.hi]
                .iter()
                .find_map(|b| match b {
                    Bound::Param { index, .. } => Some(*index),
                    Bound::Lit(_) => None,
                })
                .or_else(|| left.first_param())
                .or_else(|| right.first_param()),
        }
    }

    fn rewrite(&self, expr: &impl Fn(usize) -> Expr<T>, bound: &impl Fn(Bound<T>) -> Bound<T>) -> Self {
        match self {
            Node::Atom(e) => Node::Atom(e.map_params(expr)),
            Node::Not(a) => Node::Not(Box::new(a.rewrite(expr, bound))),
            Node::And(a, b) => Node::And(Box::new(a.rewrite(expr, bound)), Box::new(b.rewrite(expr, bound))),
            Node::Until { interval, left, right } => Node::Until {
                interval: Interval {
                    lo: bound(interval.lo),
                    hi: bound(interval.hi),
                },
                left: Box::new(left.rewrite(expr, bound)),
                right: Box::new(right.rewrite(expr, bound)),
            },
        }
    }
}

/// A formula together with the signal names its atoms refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula<T> {
    pub root: Node<T>,
    pub signals: Vec<String>,
}

impl<T: Scalar> Formula<T> {
    pub fn new(root: Node<T>, signals: Vec<String>) -> Self {
        Self { root, signals }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotonicity {
    /// Satisfaction can only switch from false to true as the parameter grows.
    Increasing,
    /// Satisfaction can only switch from true to false as the parameter grows.
    Decreasing,
}

impl Monotonicity {
    pub fn flipped(self) -> Self {
        match self {
            Monotonicity::Increasing => Monotonicity::Decreasing,
            Monotonicity::Decreasing => Monotonicity::Increasing,
        }
    }
}

impl fmt::Display for Monotonicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Monotonicity::Increasing => "increasing",
            Monotonicity::Decreasing => "decreasing",
        })
    }
}

/// Declared parameter: name, monotonicity direction and bisection bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl<T> {
    pub name: String,
    pub monotonicity: Monotonicity,
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> ParamDecl<T> {
    pub fn new(name: impl Into<String>, monotonicity: Monotonicity, lo: T, hi: T) -> Self {
        Self {
            name: name.into(),
            monotonicity,
            lo,
            hi,
        }
    }

    pub fn increasing(name: impl Into<String>, lo: T, hi: T) -> Self {
        Self::new(name, Monotonicity::Increasing, lo, hi)
    }

    pub fn decreasing(name: impl Into<String>, lo: T, hi: T) -> Self {
        Self::new(name, Monotonicity::Decreasing, lo, hi)
    }

    pub fn midpoint(&self) -> T {
        (self.lo + self.hi) / T::lit(2.0)
    }

    /// Bracket end at which the parameter is easiest to satisfy.
    pub fn permissive(&self) -> T {
        match self.monotonicity {
            Monotonicity::Increasing => self.hi,
            Monotonicity::Decreasing => self.lo,
        }
    }
}

/// A formula whose atoms and interval endpoints may refer to `params`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterizedFormula<T> {
    pub formula: Formula<T>,
    pub params: Vec<ParamDecl<T>>,
}

impl<T: Scalar> ParameterizedFormula<T> {
    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub(crate) fn check_dim(&self, d: &[T]) -> Result<(), FormulaError> {
        if d.len() != self.params.len() {
            return Err(FormulaError::DimensionMismatch {
                expected: self.params.len(),
                got: d.len(),
            });
        }
        Ok(())
    }

    /// Substitutes parameter values. Empty or negative intervals are kept as is.
    pub fn instantiate(&self, d: &[T]) -> Result<Formula<T>, FormulaError> {
        self.check_dim(d)?;
        let root = self
            .formula
            .root
            .rewrite(&|i| Expr::Const(d[i]), &|b| Bound::Lit(b.value(d)));
        Ok(Formula::new(root, self.formula.signals.clone()))
    }

    /// The template `d -> phi_{pi(d)}`: every occurrence of a flipped
    /// parameter is negated, its direction reversed and its bracket mirrored.
    pub fn alternate(&self, pi: &Alternation) -> Result<Self, FormulaError> {
        if pi.dim() != self.dim() {
            return Err(FormulaError::DimensionMismatch {
                expected: self.dim(),
                got: pi.dim(),
            });
        }
        let root = self.formula.root.rewrite(
            &|i| {
                if pi.flips(i) {
                    Expr::Neg(Box::new(Expr::Param(i)))
                } else {
                    Expr::Param(i)
                }
            },
            &|b| match b {
                Bound::Param { index, negated } if pi.flips(index) => Bound::Param {
                    index,
                    negated: !negated,
                },
                other => other,
            },
        );
        let params = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if pi.flips(i) {
                    ParamDecl::new(p.name.clone(), p.monotonicity.flipped(), -p.hi, -p.lo)
                } else {
                    p.clone()
                }
            })
            .collect();
        Ok(Self {
            formula: Formula::new(root, self.formula.signals.clone()),
            params,
        })
    }
}

/// Coordinate-wise sign flip of a parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alternation {
    negate: Vec<bool>,
}

impl Alternation {
    pub fn new(negate: Vec<bool>) -> Self {
        Self { negate }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(vec![false; dim])
    }

    /// All `2^dim` alternations, identity first.
    pub fn all(dim: usize) -> Vec<Self> {
        (0..1usize << dim)
            .map(|mask| Self::new((0..dim).map(|i| mask >> i & 1 == 1).collect()))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.negate.len()
    }

    pub fn flips(&self, i: usize) -> bool {
        self.negate[i]
    }

    pub fn signs(&self) -> Vec<i8> {
        self.negate.iter().map(|&n| if n { -1 } else { 1 }).collect()
    }

    pub fn apply<T: Scalar>(&self, d: &[T]) -> Vec<T> {
        d.iter()
            .zip(&self.negate)
            .map(|(&v, &n)| if n { -v } else { v })
            .collect()
    }
}

impl<T: Scalar> fmt::Display for Expr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Signal(i) => write!(f, "s{i}"),
            Expr::Param(i) => write!(f, "p{i}"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Abs(e) => write!(f, "abs({e})"),
        }
    }
}

impl<T: Scalar> fmt::Display for Bound<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Lit(v) => write!(f, "{v}"),
            Bound::Param { index, negated } => {
                write!(f, "{}p{index}", if *negated { "-" } else { "" })
            }
        }
    }
}

impl<T: Scalar> fmt::Display for Node<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Atom(e) => write!(f, "{e} > 0"),
            Node::Not(a) => write!(f, "!({a})"),
            Node::And(a, b) => write!(f, "({a}) && ({b})"),
            Node::Until { interval, left, right } => {
                write!(f, "({left}) U[{}, {}] ({right})", interval.lo, interval.hi)
            }
        }
    }
}
