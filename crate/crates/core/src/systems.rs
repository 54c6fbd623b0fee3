//! Grey-box stochastic systems: anything that turns an input and a seed into
//! one sampled path.
//!
//! The random parameter of a path is drawn once from `ChaCha8Rng` seeded with
//! the path seed, so a path depends on nothing but `(input, seed, horizon,
//! step)`. [`path_seed`] derives per-path seeds from a master seed in a
//! counter-based way, which keeps parallel sampling reproducible.

use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::scalar::Scalar;
use crate::traces::{Trace, TraceError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SystemError {
    #[error("invalid {system} parameters: {message}")]
    InvalidParams { system: String, message: String },
    #[error("horizon and step must be positive and finite (got horizon {horizon}, step {step})")]
    BadControls { horizon: String, step: String },
    #[error("no positive gravity drawn in {0} attempts")]
    GravityRejected(usize),
    #[error("trace pool exhausted after {0} draws (need more recorded samples)")]
    PoolExhausted(usize),
    #[error("input signal {0:?} is not defined")]
    MissingInput(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

fn invalid(system: &str, message: impl Into<String>) -> SystemError {
    SystemError::InvalidParams {
        system: system.into(),
        message: message.into(),
    }
}

/// Seed of path `index` on side `side` (0 or 1) under `master`.
pub fn path_seed(master: u64, side: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(side);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

/// One input signal: a constant or a held table.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal<T> {
    Constant(T),
    Table { times: Vec<T>, values: Vec<T> },
}

impl<T: Scalar> InputSignal<T> {
    /// Value at `t`, held from the last table entry at or before `t` (the
    /// first entry before the table starts).
    pub fn at(&self, t: T) -> T {
        match self {
            InputSignal::Constant(v) => *v,
            InputSignal::Table { times, values } => {
                let i = times.partition_point(|&s| s <= t + T::time_tol(t)).saturating_sub(1);
                values[i]
            }
        }
    }
}

/// Named input signals shared by both systems under test.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Input<T> {
    signals: Vec<(String, InputSignal<T>)>,
}

impl<T: Scalar> Input<T> {
    pub fn new() -> Self {
        Self { signals: Vec::new() }
    }

    pub fn with(mut self, name: impl Into<String>, signal: InputSignal<T>) -> Self {
        let name = name.into();
        self.signals.retain(|(n, _)| *n != name);
        self.signals.push((name, signal));
        self
    }

    pub fn constant(name: impl Into<String>, value: T) -> Self {
        Self::new().with(name, InputSignal::Constant(value))
    }

    /// Every variable of `trace` becomes a tabulated signal.
    pub fn from_trace(trace: &Trace<T>) -> Self {
        let mut input = Self::new();
        for (k, name) in trace.variables().iter().enumerate() {
            let values = trace.rows().map(|(_, row)| row[k]).collect();
            input = input.with(
                name.clone(),
                InputSignal::Table {
                    times: trace.timestamps().to_vec(),
                    values,
                },
            );
        }
        input
    }

    pub fn get(&self, name: &str) -> Option<&InputSignal<T>> {
        self.signals.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.signals.iter().map(|(n, _)| n.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }
}

/// The sampling interface of a probabilistic system.
pub trait GreyBoxSystem<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn variables(&self) -> Vec<String>;

    /// One path on `[0, horizon]`. Timestamps include `0, step, 2 step, ...`
    /// and possibly extra event times.
    fn sample_path(&self, input: &Input<T>, seed: u64, horizon: T, step: T) -> Result<Trace<T>, SystemError>;

    /// True for systems whose draws depend on call order rather than the
    /// seed; those are sampled strictly sequentially.
    fn is_sequential(&self) -> bool {
        false
    }
}

fn check_controls<T: Scalar>(horizon: T, step: T) -> Result<(), SystemError> {
    if !(horizon > T::zero() && step > T::zero() && horizon.is_finite() && step.is_finite()) {
        return Err(SystemError::BadControls {
            horizon: horizon.to_string(),
            step: step.to_string(),
        });
    }
    Ok(())
}

/// `i * step` for every `i` with `i * step <= horizon`.
pub fn time_grid<T: Scalar>(horizon: T, step: T) -> Vec<T> {
    let count = ((horizon + T::time_tol(horizon)) / step)
        .floor()
        .to_usize()
        .unwrap_or(0);
    (0..=count).map(|i| T::lit(i as f64) * step).collect()
}

/// Sorted union of a grid and event times inside `[0, horizon]`.
fn merge_events<T: Scalar>(grid: Vec<T>, mut events: Vec<T>, horizon: T) -> Vec<T> {
    events.retain(|&e| e > T::zero() && e <= horizon);
    let mut all = grid;
    all.extend(events);
    all.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    all.dedup_by(|cur, prev| *cur - *prev <= T::time_tol(*prev));
    all
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Distribution of the hitting model's event time.
#[derive(Debug, Clone, PartialEq)]
pub enum EventTime<T> {
    Uniform {
        a: T,
        b: T,
    },
    Normal {
        mu: T,
        sd: T,
    },
    /// `base + by`.
    Shifted {
        base: Box<EventTime<T>>,
        by: T,
    },
}

impl<T: Scalar> EventTime<T> {
    pub fn shifted(self, by: T) -> Self {
        EventTime::Shifted {
            base: Box::new(self),
            by,
        }
    }

    fn validate(&self) -> Result<(), SystemError> {
        match self {
            EventTime::Uniform { a, b } if !(a <= b) || !a.is_finite() || !b.is_finite() => {
                Err(invalid("hitting", format!("uniform bounds [{a}, {b}]")))
            }
            EventTime::Normal { mu, sd } if !(*sd >= T::zero()) || !mu.is_finite() || !sd.is_finite() => {
                Err(invalid("hitting", format!("normal({mu}, {sd})")))
            }
            EventTime::Shifted { base, by } => {
                if !by.is_finite() {
                    return Err(invalid("hitting", "non-finite shift"));
                }
                base.validate()
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            EventTime::Uniform { a, b } => {
                let u: f64 = rng.random();
                a.as_f64() + (b.as_f64() - a.as_f64()) * u
            }
            EventTime::Normal { mu, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mu.as_f64() + sd.as_f64() * z
            }
            EventTime::Shifted { base, by } => base.draw(rng) + by.as_f64(),
        }
    }
}

/// A signal that switches from `before` to `after` at a random event time
/// `T`, clipped to `[0, horizon]` and inserted as a timestamp. The
/// template `F[0, tau](x < th)` with `after < th <= before` then has critical
/// value `T` on every path.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingModel<T> {
    pub name: String,
    pub variable: String,
    pub event: EventTime<T>,
    pub before: T,
    pub after: T,
}

impl<T: Scalar> HittingModel<T> {
    pub fn new(event: EventTime<T>) -> Result<Self, SystemError> {
        event.validate()?;
        Ok(Self {
            name: "hitting".into(),
            variable: "x".into(),
            event,
            before: T::one(),
            after: T::zero(),
        })
    }

    pub fn with_variable(mut self, variable: impl Into<String>) -> Self {
        self.variable = variable.into();
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// The event time a given seed produces, before clipping.
    pub fn event_time(&self, seed: u64) -> T {
        T::lit(self.event.draw(&mut rng_for(seed)))
    }
}

impl<T: Scalar> GreyBoxSystem<T> for HittingModel<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn variables(&self) -> Vec<String> {
        vec![self.variable.clone()]
    }

    fn sample_path(&self, _input: &Input<T>, seed: u64, horizon: T, step: T) -> Result<Trace<T>, SystemError> {
        check_controls(horizon, step)?;
        let event = self.event_time(seed).max(T::zero()).min(horizon);
        let times = merge_events(time_grid(horizon, step), vec![event], horizon);
        let rows = times
            .iter()
            .map(|&t| {
                // within the snapping tolerance the event time is the sample
                let hit = t >= event || event - t <= T::time_tol(t);
                vec![if hit { self.after } else { self.before }]
            })
            .collect();
        Ok(Trace::new(self.variables(), times, rows)?.with_id(format!("{}-{seed}", self.name)))
    }
}

/// Height and velocity of a ball dropped from `x0` under gravity drawn once
/// from `N(g0, sigma^2)`. Arcs are integrated in closed form; bounce and apex
/// times become timestamps. A bounce with post-impact speed below
/// `rest_speed` leaves the ball at rest, which stops the Zeno cascade of an
/// inelastic ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BouncingBall<T> {
    pub name: String,
    pub x0: T,
    pub g0: T,
    pub sigma: T,
    pub restitution: T,
    pub rest_speed: T,
}

const GRAVITY_TRIES: usize = 100;

impl<T: Scalar> BouncingBall<T> {
    pub fn new(x0: T, g0: T, sigma: T, restitution: T) -> Result<Self, SystemError> {
        let ok = x0 > T::zero()
            && g0 > T::zero()
            && sigma >= T::zero()
            && restitution > T::zero()
            && restitution <= T::one()
            && x0.is_finite()
            && g0.is_finite()
            && sigma.is_finite();
        if !ok {
            return Err(invalid(
                "bouncing_ball",
                format!(
                    "need x0 > 0, g0 > 0, sigma >= 0, restitution in (0, 1]; got {x0}, {g0}, {sigma}, {restitution}"
                ),
            ));
        }
        Ok(Self {
            name: "bouncing_ball".into(),
            x0,
            g0,
            sigma,
            restitution,
            rest_speed: T::lit(1e-3),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Gravity of the path with this seed, redrawn while non-positive.
    pub fn draw_gravity(&self, seed: u64) -> Result<T, SystemError> {
        let mut rng = rng_for(seed);
        let normal =
            Normal::new(self.g0.as_f64(), self.sigma.as_f64()).map_err(|e| invalid("bouncing_ball", e.to_string()))?;
        for _ in 0..GRAVITY_TRIES {
            let g = normal.sample(&mut rng);
            if g > 0.0 {
                return Ok(T::lit(g));
            }
        }
        Err(SystemError::GravityRejected(GRAVITY_TRIES))
    }
}

/// One flight phase: leaves the ground (or the drop height) at `start`.
struct Arc<T> {
    start: T,
    height: T,
    speed: T,
}

impl<T: Scalar> Arc<T> {
    fn state(&self, t: T, g: T) -> (T, T) {
        let s = t - self.start;
        let x = self.height + self.speed * s - g * s * s / T::lit(2.0);
        (x.max(T::zero()), self.speed - g * s)
    }
}

impl<T: Scalar> GreyBoxSystem<T> for BouncingBall<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn variables(&self) -> Vec<String> {
        vec!["x".into(), "v".into()]
    }

    fn sample_path(&self, _input: &Input<T>, seed: u64, horizon: T, step: T) -> Result<Trace<T>, SystemError> {
        check_controls(horizon, step)?;
        let g = self.draw_gravity(seed)?;
        let two = T::lit(2.0);
        let mut arcs = vec![Arc {
            start: T::zero(),
            height: self.x0,
            speed: T::zero(),
        }];
        let mut events = Vec::new();
        let mut contact = (two * self.x0 / g).sqrt();
        let mut impact = (two * g * self.x0).sqrt();
        let mut rest_from = None;
        while contact <= horizon {
            events.push(contact);
            let up = impact * self.restitution;
            if up < self.rest_speed {
                rest_from = Some(contact);
                break;
            }
            events.push(contact + up / g);
            arcs.push(Arc {
                start: contact,
                height: T::zero(),
                speed: up,
            });
            contact = contact + two * up / g;
            impact = up;
        }
        let times = merge_events(time_grid(horizon, step), events, horizon);
        let mut k = 0;
        let rows = times
            .iter()
            .map(|&t| {
                if rest_from.is_some_and(|r| t >= r - T::time_tol(r)) {
                    return vec![T::zero(), T::zero()];
                }
                while k + 1 < arcs.len() && t >= arcs[k + 1].start - T::time_tol(arcs[k + 1].start) {
                    k += 1;
                }
                let (x, v) = arcs[k].state(t.max(arcs[k].start), g);
                vec![x, v]
            })
            .collect();
        Ok(Trace::new(self.variables(), times, rows)?.with_id(format!("{}-{seed}", self.name)))
    }
}

/// `y'' = wn^2 (u - y) - 2 zeta wn y' + w`, with `y(0) ~ N(y0, init_sd^2)`,
/// `y'(0) = 0` and actuation noise `w` drawn per step from
/// `N(0, noise_sd^2)` and held over the step. Integrated by fixed-step RK4.
/// Outputs `y`, the tracking error `e = y - u` and `u` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrder<T> {
    pub name: String,
    pub wn: T,
    pub zeta: T,
    pub noise_sd: T,
    pub band: T,
    pub y0: T,
    pub init_sd: T,
    /// Name of the reference input; missing inputs default to 1.
    pub input: String,
}

impl<T: Scalar> SecondOrder<T> {
    pub fn new(wn: T, zeta: T, noise_sd: T, band: T) -> Result<Self, SystemError> {
        let ok = wn > T::zero() && zeta > T::zero() && noise_sd >= T::zero() && band > T::zero();
        if !ok || !(wn.is_finite() && zeta.is_finite() && noise_sd.is_finite() && band.is_finite()) {
            return Err(invalid(
                "second_order",
                format!("need wn > 0, zeta > 0, noise_sd >= 0, band > 0; got {wn}, {zeta}, {noise_sd}, {band}"),
            ));
        }
        Ok(Self {
            name: "second_order".into(),
            wn,
            zeta,
            noise_sd,
            band,
            y0: T::zero(),
            init_sd: T::zero(),
            input: "u".into(),
        })
    }

    pub fn with_initial(mut self, y0: T, init_sd: T) -> Result<Self, SystemError> {
        if !(init_sd >= T::zero()) || !y0.is_finite() || !init_sd.is_finite() {
            return Err(invalid("second_order", format!("initial N({y0}, {init_sd}^2)")));
        }
        self.y0 = y0;
        self.init_sd = init_sd;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// First timestamp after which `|e|` stays within `band`; `None` if the
    /// path ends outside the band.
    pub fn settling_time(&self, trace: &Trace<T>) -> Option<T> {
        let col = trace.variable_index("e")?;
        let mut settled = None;
        for (t, row) in trace.rows() {
            if row[col].abs() > self.band {
                settled = None;
            } else if settled.is_none() {
                settled = Some(t);
            }
        }
        settled
    }
}

impl<T: Scalar> GreyBoxSystem<T> for SecondOrder<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn variables(&self) -> Vec<String> {
        vec!["y".into(), "e".into(), "u".into()]
    }

    fn sample_path(&self, input: &Input<T>, seed: u64, horizon: T, step: T) -> Result<Trace<T>, SystemError> {
        check_controls(horizon, step)?;
        let reference = input
            .get(&self.input)
            .cloned()
            .unwrap_or(InputSignal::Constant(T::one()));
        let mut rng = rng_for(seed);
        let z: f64 = StandardNormal.sample(&mut rng);
        let mut y = self.y0 + self.init_sd * T::lit(z);
        let mut yd = T::zero();
        let times = time_grid(horizon, step);
        let (two, six) = (T::lit(2.0), T::lit(6.0));
        let wn2 = self.wn * self.wn;
        let damp = two * self.zeta * self.wn;
        let mut rows = Vec::with_capacity(times.len());
        for (i, &t) in times.iter().enumerate() {
            let u = reference.at(t);
            rows.push(vec![y, y - u, u]);
            if i + 1 == times.len() {
                break;
            }
            let h = times[i + 1] - t;
            let zw: f64 = StandardNormal.sample(&mut rng);
            let w = self.noise_sd * T::lit(zw);
            let acc = |y: T, yd: T| wn2 * (u - y) - damp * yd + w;
            let (k1y, k1v) = (yd, acc(y, yd));
            let (k2y, k2v) = (yd + h / two * k1v, acc(y + h / two * k1y, yd + h / two * k1v));
            let (k3y, k3v) = (yd + h / two * k2v, acc(y + h / two * k2y, yd + h / two * k2v));
            let (k4y, k4v) = (yd + h * k3v, acc(y + h * k3y, yd + h * k3v));
            y = y + h / six * (k1y + two * k2y + two * k3y + k4y);
            yd = yd + h / six * (k1v + two * k2v + two * k3v + k4v);
        }
        Ok(Trace::new(self.variables(), times, rows)?.with_id(format!("{}-{seed}", self.name)))
    }
}

/// Replays recorded traces in a random order without replacement. The order
/// is fixed by the seed given at construction; per-call seeds are ignored.
pub struct TraceReplay<T> {
    name: String,
    traces: Vec<Trace<T>>,
    order: Vec<usize>,
    cursor: Mutex<usize>,
}

impl<T: Scalar> TraceReplay<T> {
    pub fn new(traces: Vec<Trace<T>>, seed: u64) -> Result<Self, SystemError> {
        if traces.is_empty() {
            return Err(invalid("replay", "empty trace pool"));
        }
        let vars = traces[0].variables();
        if traces.iter().any(|t| t.variables() != vars) {
            return Err(invalid("replay", "traces have different variables"));
        }
        let mut order: Vec<usize> = (0..traces.len()).collect();
        order.shuffle(&mut rng_for(seed));
        Ok(Self {
            name: "replay".into(),
            traces,
            order,
            cursor: Mutex::new(0),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn pool_size(&self) -> usize {
        self.traces.len()
    }
}

impl<T: Scalar> GreyBoxSystem<T> for TraceReplay<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn variables(&self) -> Vec<String> {
        self.traces[0].variables().to_vec()
    }

    fn sample_path(&self, _input: &Input<T>, _seed: u64, _horizon: T, _step: T) -> Result<Trace<T>, SystemError> {
        let mut cursor = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
        let Some(&i) = self.order.get(*cursor) else {
            return Err(SystemError::PoolExhausted(self.order.len()));
        };
        *cursor += 1;
        Ok(self.traces[i].clone())
    }

    fn is_sequential(&self) -> bool {
        true
    }
}

/// Convenience for the replay constructor.
pub fn trace_replay_system<T: Scalar>(traces: Vec<Trace<T>>, seed: u64) -> Result<TraceReplay<T>, SystemError> {
    TraceReplay::new(traces, seed)
}
