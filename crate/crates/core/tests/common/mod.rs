//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use conforma::stats::SampleSet;
use conforma::stl::{Alternation, Expr, Formula, Interval, Node};
use conforma::Trace64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Kolmogorov distribution through the Jacobi theta transform,
/// `sqrt(2 pi)/x sum_k exp(-(2k-1)^2 pi^2 / (8 x^2))`.
pub fn theta_ks(x: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut sum = 0.0;
    for k in 1..400 {
        let j = (2 * k - 1) as f64;
        let term = (-j * j * pi * pi / (8.0 * x * x)).exp();
        sum += term;
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * pi).sqrt() / x * sum
}

/// Double-loop statistic: every sample value is a query; counts by scanning.
pub fn naive_delta(x: &[f64], y: &[f64]) -> f64 {
    let (n, m) = (x.len() as i64, y.len() as i64);
    let mut best = 0i64;
    for &a in x.iter().chain(y) {
        let cx = x.iter().filter(|&&v| v <= a).count() as i64;
        let cy = y.iter().filter(|&&v| v <= a).count() as i64;
        best = best.max((cx * m - cy * n).abs());
    }
    best as f64 / (n as f64 * m as f64)
}

/// Every alternation, every corner of the grid of sample coordinates.
pub fn corner_delta(x: &SampleSet<f64>, y: &SampleSet<f64>) -> f64 {
    let k = x.dim();
    let axes: Vec<Vec<f64>> = (0..k)
        .map(|c| x.points().chain(y.points()).map(|p| p[c]).collect())
        .collect();
    let count = |set: &SampleSet<f64>, pi: &Alternation, q: &[f64]| {
        set.points()
            .filter(|p| (0..k).all(|c| if pi.flips(c) { p[c] >= q[c] } else { p[c] <= q[c] }))
            .count() as i64
    };
    let (n, m) = (x.len() as i64, y.len() as i64);
    let total: usize = axes.iter().map(Vec::len).product();
    let mut best = 0i64;
    for pi in Alternation::all(k) {
        for code in 0..total {
            let mut rest = code;
            let q: Vec<f64> = axes
                .iter()
                .map(|ax| {
                    let v = ax[rest % ax.len()];
                    rest /= ax.len();
                    v
                })
                .collect();
            best = best.max((count(x, &pi, &q) * m - count(y, &pi, &q) * n).abs());
        }
    }
    best as f64 / (n as f64 * m as f64)
}

/// Small formulas over two signals with integer thresholds and interval
/// endpoints counted in units of the sample period `h`.
#[derive(Debug, Clone)]
pub enum Gen {
    /// `signal > threshold`, or `x - y > threshold` for `signal == 2`.
    Atom {
        signal: usize,
        threshold: i32,
    },
    Not(Box<Gen>),
    And(Box<Gen>, Box<Gen>),
    Until {
        a: i32,
        b: i32,
        left: Box<Gen>,
        right: Box<Gen>,
    },
}

impl Gen {
    pub fn random(rng: &mut ChaCha8Rng, depth: usize) -> Gen {
        let pick = if depth == 0 { 0 } else { rng.random_range(0..10) };
        match pick {
            0..=2 => Gen::Atom {
                signal: rng.random_range(0..3),
                threshold: rng.random_range(-2..2),
            },
            3 => Gen::Not(Box::new(Gen::random(rng, depth - 1))),
            4 | 5 => Gen::And(
                Box::new(Gen::random(rng, depth - 1)),
                Box::new(Gen::random(rng, depth - 1)),
            ),
            _ => {
                // mostly proper intervals; now and then reversed or negative
                let (a, b) = match rng.random_range(0..10) {
                    0 => (2, 1),
                    1 => (-1, 2),
                    2 => (-2, -1),
                    _ => {
                        let a = rng.random_range(0..3);
                        (a, a + rng.random_range(0..3))
                    }
                };
                let left = if rng.random_bool(0.25) {
                    Gen::Not(Box::new(Gen::Atom {
                        signal: 0,
                        threshold: 100,
                    }))
                } else {
                    Gen::random(rng, depth - 1)
                };
                Gen::Until {
                    a,
                    b,
                    left: Box::new(left),
                    right: Box::new(Gen::random(rng, depth - 1)),
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Gen::Atom { .. } => 0,
            Gen::Not(a) => 1 + a.depth(),
            Gen::And(a, b) => 1 + a.depth().max(b.depth()),
            Gen::Until { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Horizon in periods, with invalid intervals counting as zero.
    pub fn horizon(&self) -> i32 {
        match self {
            Gen::Atom { .. } => 0,
            Gen::Not(a) => a.horizon(),
            Gen::And(a, b) => a.horizon().max(b.horizon()),
            Gen::Until { a, b, left, right } => {
                if b < a || *a < 0 || *b < 0 {
                    0
                } else {
                    b + left.horizon().max(right.horizon())
                }
            }
        }
    }

    pub fn to_node(&self, h: f64) -> Node<f64> {
        match self {
            Gen::Atom { signal, threshold } => {
                let lhs = match signal {
                    0 | 1 => Expr::Signal(*signal),
                    _ => Expr::Sub(Box::new(Expr::Signal(0)), Box::new(Expr::Signal(1))),
                };
                Node::atom(Expr::Sub(Box::new(lhs), Box::new(Expr::Const(f64::from(*threshold)))))
            }
            Gen::Not(a) => Node::not(a.to_node(h)),
            Gen::And(a, b) => Node::and(a.to_node(h), b.to_node(h)),
            Gen::Until { a, b, left, right } => Node::until(
                Interval::new(f64::from(*a) * h, f64::from(*b) * h),
                left.to_node(h),
                right.to_node(h),
            ),
        }
    }

    pub fn to_formula(&self, h: f64) -> Formula<f64> {
        Formula::new(self.to_node(h), vec!["x".into(), "y".into()])
    }
}

pub const TICKS: i64 = 10;

/// Brute-force monitor on a grid ten times finer than the samples.
///
/// Every breakpoint of every subformula is a multiple of the period, so
/// satisfaction is constant on each open period and one fine tick inside it
/// stands for the whole open interval. `values[k]` holds `(x, y)` on
/// `[k h, (k + 1) h)`. Returns satisfaction at every tick `0..=len`, where
/// only ticks `t` with `t + horizon <= len` are meaningful.
pub fn brute_force(g: &Gen, values: &[(i32, i32)]) -> Vec<bool> {
    let len = (values.len() as i64 - 1) * TICKS;
    let at = |t: i64| values[(t / TICKS).min(values.len() as i64 - 1) as usize];
    match g {
        Gen::Atom { signal, threshold } => (0..=len)
            .map(|t| {
                let (x, y) = at(t);
                let v = match signal {
                    0 => x,
                    1 => y,
                    _ => x - y,
                };
                v > *threshold
            })
            .collect(),
        Gen::Not(a) => brute_force(a, values).into_iter().map(|v| !v).collect(),
        Gen::And(a, b) => brute_force(a, values)
            .into_iter()
            .zip(brute_force(b, values))
            .map(|(p, q)| p && q)
            .collect(),
        Gen::Until { a, b, left, right } => {
            let l = brute_force(left, values);
            let r = brute_force(right, values);
            (0..=len)
                .map(|t| {
                    if b < a || *a < 0 || *b < 0 {
                        return false;
                    }
                    let (lo, hi) = (t + i64::from(*a) * TICKS, (t + i64::from(*b) * TICKS).min(len));
                    (lo..=hi).any(|s| {
                        let s_u = s as usize;
                        // left must hold on [t, s); an interior tick s also
                        // stands for the open stretch just before it
                        r[s_u] && (t..s).all(|u| l[u as usize]) && (s == t || s % TICKS == 0 || l[s_u])
                    })
                })
                .collect()
        }
    }
}

pub fn random_values(rng: &mut ChaCha8Rng, len: usize) -> Vec<(i32, i32)> {
    (0..len)
        .map(|_| (rng.random_range(-2..3), rng.random_range(-2..3)))
        .collect()
}

pub fn values_trace(values: &[(i32, i32)], h: f64) -> Trace64 {
    let times = (0..values.len()).map(|i| i as f64 * h).collect();
    let rows = values.iter().map(|&(x, y)| vec![f64::from(x), f64::from(y)]).collect();
    Trace64::new(vec!["x".into(), "y".into()], times, rows).expect("valid trace")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
