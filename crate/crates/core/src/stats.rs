//! Empirical distributions and the two-sample Kolmogorov-Smirnov machinery.
//!
//! ECDFs follow `F(a) = #{X <= a} / n`. Under an alternation the flipped
//! coordinates use `X_k >= a_k` instead, so that every orthant CDF of a
//! sample is covered. Infinite values are ordinary points: `+inf` is never
//! below a finite query and `-inf` always is.

use crate::scalar::{total_cmp, Scalar};
use crate::stl::Alternation;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("empty sample set")]
    Empty,
    #[error("sample dimension must be at least 1")]
    ZeroDimension,
    #[error("expected points of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension {0} is not supported (at most 3)")]
    UnsupportedDimension(usize),
    #[error("NaN sample value")]
    NaN,
    #[error("ks_cdf argument must be non-negative, got {0}")]
    NegativeArgument(String),
}

/// A multiset of `dim`-dimensional points, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SampleSet<T> {
    pub fn new(dim: usize) -> Result<Self, StatsError> {
        if dim == 0 {
            return Err(StatsError::ZeroDimension);
        }
        Ok(Self { dim, data: Vec::new() })
    }

    pub fn from_points<P: AsRef<[T]>>(dim: usize, points: impl IntoIterator<Item = P>) -> Result<Self, StatsError> {
        let mut set = Self::new(dim)?;
        for p in points {
            set.push(p.as_ref())?;
        }
        Ok(set)
    }

    /// One-dimensional sample.
    pub fn scalar(values: &[T]) -> Result<Self, StatsError> {
        Self::from_points(1, values.iter().map(std::slice::from_ref))
    }

    pub fn push(&mut self, point: &[T]) -> Result<(), StatsError> {
        if point.len() != self.dim {
            return Err(StatsError::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        if point.iter().any(|v| v.is_nan()) {
            return Err(StatsError::NaN);
        }
        self.data.extend_from_slice(point);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks(self.dim)
    }

    /// All values of coordinate `k`.
    pub fn coordinate(&self, k: usize) -> Vec<T> {
        self.points().map(|p| p[k]).collect()
    }

    pub fn ecdf(&self) -> Ecdf<T> {
        Ecdf::new(self.clone())
    }
}

/// Orthant ECDFs `F^pi` of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf<T> {
    samples: SampleSet<T>,
    /// Sorted values, kept only for one-dimensional samples.
    sorted: Vec<T>,
}

impl<T: Scalar> Ecdf<T> {
    pub fn new(samples: SampleSet<T>) -> Self {
        let sorted = if samples.dim() == 1 {
            let mut v = samples.data.clone();
            v.sort_by(total_cmp);
            v
        } else {
            Vec::new()
        };
        Self { samples, sorted }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.dim()
    }

    /// `F^pi(a)`. An empty sample evaluates to 0 everywhere.
    pub fn eval(&self, pi: &Alternation, a: &[T]) -> T {
        let n = self.len();
        if n == 0 {
            return T::zero();
        }
        let count = if self.dim() == 1 {
            let below = self.sorted.partition_point(|&x| x <= a[0]);
            if pi.flips(0) {
                n - self.sorted.partition_point(|&x| x < a[0])
            } else {
                below
            }
        } else {
            self.samples
                .points()
                .filter(|p| {
                    p.iter()
                        .zip(a)
                        .enumerate()
                        .all(|(k, (&x, &q))| if pi.flips(k) { x >= q } else { x <= q })
                })
                .count()
        };
        T::lit(count as f64 / n as f64)
    }
}

/// Kolmogorov distribution `H(x) = 1 - 2 sum_{i>=1} (-1)^(i-1) exp(-2 i^2 x^2)`.
///
/// The series is cut when a term drops below `1e-12`. Below `x = 0.05` it
/// returns 0, where the true value is under `1e-200`.
pub fn ks_cdf<T: Scalar>(x: T) -> Result<T, StatsError> {
    if x.is_nan() {
        return Err(StatsError::NaN);
    }
    if x < T::zero() {
        return Err(StatsError::NegativeArgument(x.to_string()));
    }
    let x = x.as_f64();
    if x < 0.05 {
        return Ok(T::zero());
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for i in 1..=100_000u32 {
        let term = (-2.0 * f64::from(i * i) * x * x).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    Ok(T::lit((1.0 - 2.0 * sum).clamp(0.0, 1.0)))
}

fn check_pair<T: Scalar>(x: &SampleSet<T>, y: &SampleSet<T>) -> Result<(), StatsError> {
    if x.dim() != y.dim() {
        return Err(StatsError::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(())
}

/// `sup_a |F_X(a) - G_Y(a)|` for one-dimensional samples.
pub fn delta_scalar<T: Scalar>(x: &SampleSet<T>, y: &SampleSet<T>) -> Result<T, StatsError> {
    check_pair(x, y)?;
    if x.dim() != 1 {
        return Err(StatsError::DimensionMismatch {
            expected: 1,
            got: x.dim(),
        });
    }
    let mut xs = x.data.clone();
    let mut ys = y.data.clone();
    xs.sort_by(total_cmp);
    ys.sort_by(total_cmp);
    Ok(delta_sorted(&xs, &ys))
}

/// [`delta_scalar`] on already sorted, non-empty slices.
pub(crate) fn delta_sorted<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    let (n, m) = (xs.len() as i64, ys.len() as i64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0i64;
    while i < xs.len() || j < ys.len() {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        best = best.max((i as i64 * m - j as i64 * n).abs());
    }
    ratio(best, n, m)
}

fn ratio<T: Scalar>(num: i64, n: i64, m: i64) -> T {
    T::lit(num as f64 / (n as f64 * m as f64))
}

/// `max_pi sup_a |F^pi_X(a) - G^pi_Y(a)|` over all `2^K` alternations.
///
/// The supremum is taken exactly over the grid of sample coordinates, which
/// contains every region of constancy of the difference. Two dimensions use
/// a sweep with a range-add segment tree, `O(N log N)` per alternation for
/// `N = n + m`; three dimensions repeat it per threshold of the last axis.
pub fn delta_multi<T: Scalar>(x: &SampleSet<T>, y: &SampleSet<T>) -> Result<T, StatsError> {
    check_pair(x, y)?;
    let k = x.dim();
    if k == 1 {
        return delta_scalar(x, y);
    }
    if k > 3 {
        return Err(StatsError::UnsupportedDimension(k));
    }
    let (n, m) = (x.len() as i64, y.len() as i64);
    let mut best = 0i64;
    for pi in Alternation::all(k) {
        let signs: Vec<T> = pi.signs().iter().map(|&s| T::lit(f64::from(s))).collect();
        // flipping a coordinate turns `X_k >= a_k` into `-X_k <= -a_k`
        let pts: Vec<Weighted<T>> = x
            .points()
            .map(|p| (p, m))
            .chain(y.points().map(|p| (p, -n)))
            .map(|(p, w)| Weighted {
                c: [
                    p[0] * signs[0],
                    p[1] * signs[1],
                    if k == 3 { p[2] * signs[2] } else { T::zero() },
                ],
                w,
            })
            .collect();
        best = best.max(if k == 2 { sweep2(&pts) } else { sweep3(pts) });
    }
    Ok(ratio(best, n, m))
}

#[derive(Clone, Copy)]
struct Weighted<T> {
    c: [T; 3],
    w: i64,
}

fn sweep3<T: Scalar>(mut pts: Vec<Weighted<T>>) -> i64 {
    pts.sort_by(|a, b| total_cmp(&a.c[2], &b.c[2]));
    let mut best = 0;
    let mut end = 0;
    while end < pts.len() {
        let z = pts[end].c[2];
        while end < pts.len() && pts[end].c[2] <= z {
            end += 1;
        }
        best = best.max(sweep2(&pts[..end]));
    }
    best
}

/// `max_{a,b} |sum of w over points with x <= a, y <= b|`.
fn sweep2<T: Scalar>(pts: &[Weighted<T>]) -> i64 {
    let mut ys: Vec<T> = pts.iter().map(|p| p.c[1]).collect();
    ys.sort_by(total_cmp);
    ys.dedup();
    let mut order: Vec<&Weighted<T>> = pts.iter().collect();
    order.sort_by(|a, b| total_cmp(&a.c[0], &b.c[0]));
    let mut tree = SuffixAddTree::new(ys.len());
    let mut best = 0;
    let mut i = 0;
    while i < order.len() {
        let x = order[i].c[0];
        while i < order.len() && order[i].c[0] <= x {
            let rank = ys.partition_point(|&v| v < order[i].c[1]);
            tree.add_from(rank, order[i].w);
            i += 1;
        }
        best = best.max(tree.max_abs());
    }
    best
}

/// Segment tree over `len` slots supporting "add `w` to every slot from `i`
/// on" and a global max/min query.
struct SuffixAddTree {
    len: usize,
    max: Vec<i64>,
    min: Vec<i64>,
    lazy: Vec<i64>,
}

impl SuffixAddTree {
    fn new(len: usize) -> Self {
        let size = 4 * len.max(1);
        Self {
            len,
            max: vec![0; size],
            min: vec![0; size],
            lazy: vec![0; size],
        }
    }

    fn add_from(&mut self, from: usize, w: i64) {
        if from < self.len {
            self.add(1, 0, self.len - 1, from, w);
        }
    }

    fn add(&mut self, node: usize, lo: usize, hi: usize, from: usize, w: i64) {
        if from <= lo {
            self.max[node] += w;
            self.min[node] += w;
            self.lazy[node] += w;
            return;
        }
        let mid = (lo + hi) / 2;
        if from <= mid {
            self.add(2 * node, lo, mid, from, w);
        }
        self.add(2 * node + 1, mid + 1, hi, from, w);
        let l = self.lazy[node];
        self.max[node] = self.max[2 * node].max(self.max[2 * node + 1]) + l;
        self.min[node] = self.min[2 * node].min(self.min[2 * node + 1]) + l;
    }

    fn max_abs(&self) -> i64 {
        self.max[1].abs().max(self.min[1].abs())
    }
}

/// Running one-dimensional statistic for samples that grow in fixed
/// proportion, `n = t k1` and `m = t k2`.
///
/// With that proportion, `m F_X - n G_Y = t (k2 #X<=a - k1 #Y<=a)`, so the
/// supremum is a maximum prefix sum over distinct values with fixed per-side
/// weights. Values live in a treap keyed by value, making each insertion
/// `O(log N)` and each query `O(1)`. The result always agrees with
/// [`delta_scalar`] on the same data (counts are exact integers).
pub struct IncrementalDelta<T> {
    wx: i64,
    wy: i64,
    n: usize,
    m: usize,
    nodes: Vec<TreapNode<T>>,
    root: Option<usize>,
    rng: u64,
}

struct TreapNode<T> {
    key: T,
    prio: u64,
    left: Option<usize>,
    right: Option<usize>,
    w: i64,
    sum: i64,
    max_prefix: i64,
    min_prefix: i64,
}

impl<T: Scalar> IncrementalDelta<T> {
    pub fn new(k1: usize, k2: usize) -> Self {
        Self {
            wx: k2.max(1) as i64,
            wy: -(k1.max(1) as i64),
            n: 0,
            m: 0,
            nodes: Vec::new(),
            root: None,
            rng: 0x9E37_79B9_7F4A_7C15,
        }
    }

    pub fn push_x(&mut self, v: T) -> Result<(), StatsError> {
        self.insert(v, self.wx)?;
        self.n += 1;
        Ok(())
    }

    pub fn push_y(&mut self, v: T) -> Result<(), StatsError> {
        self.insert(v, self.wy)?;
        self.m += 1;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Current statistic. Only meaningful when `n : m = k1 : k2`.
    pub fn delta(&self) -> T {
        let Some(r) = self.root else {
            return T::zero();
        };
        if self.n == 0 || self.m == 0 {
            return T::zero();
        }
        let node = &self.nodes[r];
        let best = node.max_prefix.abs().max(node.min_prefix.abs());
        // best = t k1 k2 sup|F - G|, with t = n / k1
        let t = self.n as f64 / (-self.wy) as f64;
        T::lit(best as f64 / (t * (self.wx * -self.wy) as f64))
    }

    fn insert(&mut self, v: T, w: i64) -> Result<(), StatsError> {
        if v.is_nan() {
            return Err(StatsError::NaN);
        }
        // xorshift for priorities; deterministic and independent of the data
        self.rng ^= self.rng << 13;
        self.rng ^= self.rng >> 7;
        self.rng ^= self.rng << 17;
        let prio = self.rng;
        self.root = Some(self.insert_at(self.root, v, w, prio));
        Ok(())
    }

    fn insert_at(&mut self, at: Option<usize>, v: T, w: i64, prio: u64) -> usize {
        let Some(i) = at else {
            self.nodes.push(TreapNode {
                key: v,
                prio,
                left: None,
                right: None,
                w,
                sum: w,
                max_prefix: w.max(0),
                min_prefix: w.min(0),
            });
            return self.nodes.len() - 1;
        };
        let key = self.nodes[i].key;
        let mut top = i;
        if v == key {
            self.nodes[i].w += w;
        } else if v < key {
            let child = self.insert_at(self.nodes[i].left, v, w, prio);
            self.nodes[i].left = Some(child);
            if self.nodes[child].prio > self.nodes[i].prio {
                top = self.rotate_right(i);
            }
        } else {
            let child = self.insert_at(self.nodes[i].right, v, w, prio);
            self.nodes[i].right = Some(child);
            if self.nodes[child].prio > self.nodes[i].prio {
                top = self.rotate_left(i);
            }
        }
        self.pull(i);
        if top != i {
            self.pull(top);
        }
        top
    }

    fn rotate_right(&mut self, i: usize) -> usize {
        let l = self.nodes[i].left.expect("left child");
        self.nodes[i].left = self.nodes[l].right;
        self.nodes[l].right = Some(i);
        self.pull(i);
        l
    }

    fn rotate_left(&mut self, i: usize) -> usize {
        let r = self.nodes[i].right.expect("right child");
        self.nodes[i].right = self.nodes[r].left;
        self.nodes[r].left = Some(i);
        self.pull(i);
        r
    }

    fn pull(&mut self, i: usize) {
        let agg = |c: Option<usize>| {
            c.map_or((0, 0, 0), |c| {
                (self.nodes[c].sum, self.nodes[c].max_prefix, self.nodes[c].min_prefix)
            })
        };
        let (ls, lmax, lmin) = agg(self.nodes[i].left);
        let (rs, rmax, rmin) = agg(self.nodes[i].right);
        let here = ls + self.nodes[i].w;
        let node = &mut self.nodes[i];
        node.sum = here + rs;
        node.max_prefix = lmax.max(here).max(here + rmax);
        node.min_prefix = lmin.min(here).min(here + rmin);
    }
}

/// Lower bound `H(|delta - c| sqrt(nm / (n + m)))` on the confidence of
/// [`assert_hypothesis`]; exactly 0 on a tie.
pub fn confidence_level<T: Scalar>(delta: T, c: T, n: usize, m: usize) -> T {
    if delta == c || n == 0 || m == 0 {
        return T::zero();
    }
    let (nf, mf) = (n as f64, m as f64);
    let arg = (delta - c).abs().as_f64() * (nf * mf / (nf + mf)).sqrt();
    ks_cdf(T::lit(arg)).unwrap_or(T::zero())
}

/// Outcome of comparing the statistic against the closeness threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    /// `H0`: the distributions are within distance `c`.
    Conform,
    /// `H1`: they are at least `c` apart.
    NonConform,
}

/// `H0` if `delta < c`, otherwise `H1` (ties go to `H1`).
pub fn assert_hypothesis<T: Scalar>(delta: T, c: T) -> Hypothesis {
    if delta < c {
        Hypothesis::Conform
    } else {
        Hypothesis::NonConform
    }
}
