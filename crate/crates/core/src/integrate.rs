//! Fixed-step explicit integration (classical RK4, with forward Euler for
//! cross-checks) of differentiators and generic small systems.

use crate::differentiator::{DiffState, DifferentiatorConfig};
use crate::error::{Error, Result};
use crate::signals::TestSignal;

/// Required ratio between the fastest time scale `1/g_max` and the step.
pub const STIFFNESS_FACTOR: f64 = 20.0;

/// Any state component beyond this magnitude aborts a run.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// Upper bound on retained samples under [`Retention::Auto`].
pub const AUTO_MAX_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSpec {
    pub method: Method,
    pub h: f64,
}

impl IntegratorSpec {
    pub fn new(method: Method, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid(format!("step h = {h} must be > 0")));
        }
        Ok(IntegratorSpec { method, h })
    }

    pub fn rk4(h: f64) -> Result<Self> {
        Self::new(Method::Rk4, h)
    }

    pub fn euler(h: f64) -> Result<Self> {
        Self::new(Method::Euler, h)
    }

    /// Largest step allowed for a differentiator whose gain peaks at `max_gain`.
    pub fn max_step_for(max_gain: f64) -> f64 {
        1.0 / (max_gain * STIFFNESS_FACTOR)
    }

    pub fn check_guard(&self, max_gain: f64) -> Result<()> {
        let required = Self::max_step_for(max_gain);
        if self.h > required {
            Err(Error::StepTooLarge {
                h: self.h,
                max_gain,
                required,
            })
        } else {
            Ok(())
        }
    }
}

fn axpy<const N: usize>(x: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| x[i] + a * k[i])
}

fn finite_or<const N: usize>(v: [f64; N], t: f64) -> Result<[f64; N]> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            what: "integrator stage",
            t,
        })
    }
}

/// One step with a fallible vector field; every stage is checked for
/// finiteness.
pub fn try_step<const N: usize, F>(
    f: &mut F,
    state: &[f64; N],
    t: f64,
    h: f64,
    method: Method,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    match method {
        Method::Euler => {
            let k1 = finite_or(f(t, state)?, t)?;
            finite_or(axpy(state, h, &k1), t)
        }
        Method::Rk4 => {
            let k1 = finite_or(f(t, state)?, t)?;
            let k2 = finite_or(f(t + 0.5 * h, &axpy(state, 0.5 * h, &k1))?, t)?;
            let k3 = finite_or(f(t + 0.5 * h, &axpy(state, 0.5 * h, &k2))?, t)?;
            let k4 = finite_or(f(t + h, &axpy(state, h, &k3))?, t)?;
            let next = std::array::from_fn(|i| {
                state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            });
            finite_or(next, t)
        }
    }
}

/// One step of `x' = f(t, x)`.
pub fn step<const N: usize, F>(
    mut f: F,
    state: &[f64; N],
    t: f64,
    h: f64,
    method: Method,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    if !(h > 0.0) || !state.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid(format!(
            "bad step input at t = {t} (h = {h})"
        )));
    }
    try_step(&mut |t, x| Ok(f(t, x)), state, t, h, method)
}

fn step_count(t0: f64, t1: f64, h: f64) -> Result<usize> {
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::invalid(format!(
            "time span ({t0}, {t1}) must have t1 > t0"
        )));
    }
    Ok(((t1 - t0) / h - 1e-9).ceil().max(1.0) as usize)
}

fn check_divergence<const N: usize>(x: &[f64; N], t: f64) -> Result<()> {
    if x.iter().any(|v| v.abs() > DIVERGENCE_LIMIT) {
        Err(Error::Diverged {
            t,
            limit: DIVERGENCE_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// Uniformly sampled solution of a generic system, retained at full rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrajectory<const N: usize> {
    pub h: f64,
    pub samples: Vec<(f64, [f64; N])>,
}

impl<const N: usize> RawTrajectory<N> {
    pub fn last(&self) -> (f64, [f64; N]) {
        *self
            .samples
            .last()
            .expect("trajectory has at least one sample")
    }
}

/// Integrates `x' = f(t, x)` over `t_span` on the grid `t0 + i h`.
pub fn simulate_raw<const N: usize, F>(
    mut f: F,
    init: [f64; N],
    t_span: (f64, f64),
    spec: IntegratorSpec,
) -> Result<RawTrajectory<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let (t0, t1) = t_span;
    let n = step_count(t0, t1, spec.h)?;
    finite_or(init, t0)?;
    let mut samples = Vec::with_capacity(n + 1);
    samples.push((t0, init));
    let mut x = init;
    let mut field = |t: f64, x: &[f64; N]| Ok(f(t, x));
    for i in 0..n {
        let t = t0 + i as f64 * spec.h;
        let t_next = t0 + (i + 1) as f64 * spec.h;
        x = try_step(&mut field, &x, t, t_next - t, spec.method)?;
        check_divergence(&x, t_next)?;
        samples.push((t_next, x));
    }
    Ok(RawTrajectory { h: spec.h, samples })
}

/// One retained record of a differentiator run. `v` and `vdot` are the clean
/// signal and its right derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub v: f64,
    pub vdot: f64,
    pub e1: f64,
    pub e2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    /// Spacing of retained samples (integration step times stride).
    pub h: f64,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(self.t0, |s| s.t)
    }

    pub fn final_state(&self) -> Option<DiffState> {
        self.samples.last().map(|s| DiffState::new(s.x1, s.x2))
    }

    /// Samples with `t >= from`.
    pub fn since(&self, from: f64) -> &[Sample] {
        let i = self.samples.partition_point(|s| s.t < from);
        &self.samples[i..]
    }

    /// Keeps every `stride`-th sample starting from the first.
    pub fn decimate(&self, stride: usize) -> Trajectory {
        let stride = stride.max(1);
        Trajectory {
            t0: self.t0,
            h: self.h * stride as f64,
            samples: self.samples.iter().step_by(stride).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Retention {
    /// Stride chosen so at most [`AUTO_MAX_SAMPLES`] samples follow the
    /// initial one.
    #[default]
    Auto,
    Full,
    Every(usize),
}

impl Retention {
    pub fn stride(&self, steps: usize) -> usize {
        match *self {
            Retention::Auto => steps.div_ceil(AUTO_MAX_SAMPLES).max(1),
            Retention::Full => 1,
            Retention::Every(n) => n.max(1),
        }
    }
}

/// How the input is evaluated inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputHold {
    /// `v(t)` at every stage time.
    #[default]
    Continuous,
    /// `v(t_i)` held over `[t_i, t_{i+1})`, as a sampling device would.
    ZeroOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimOptions {
    pub retention: Retention,
    pub hold: InputHold,
}

fn record(signal: &TestSignal, t: f64, x: &[f64; 2]) -> Result<Sample> {
    let v = signal.clean_value(t)?;
    let vdot = signal.right_derivative(t)?;
    Ok(Sample {
        t,
        x1: x[0],
        x2: x[1],
        v,
        vdot,
        e1: x[0] - v,
        e2: x[1] - vdot,
    })
}

/// Runs a differentiator on `signal` from `init` over `t_span`.
///
/// Gains are evaluated at elapsed time `t - t0`. Fails up front if the step
/// violates the stiffness guard for the schedule's peak gain.
pub fn simulate(
    config: &DifferentiatorConfig,
    signal: &TestSignal,
    t_span: (f64, f64),
    spec: IntegratorSpec,
    init: DiffState,
    opts: SimOptions,
) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    let n = step_count(t0, t1, spec.h)?;
    spec.check_guard(config.schedule().max_gain())?;
    check_inputs(signal, init, t0, n, spec.h)?;
    let schedule = config.schedule();
    drive(
        signal,
        t0,
        n,
        spec,
        opts,
        [init.x1, init.x2],
        |s, x, v| {
            let g = schedule.gain_unchecked(s - t0);
            let (d1, d2) = config.rhs_with_gain(DiffState::new(x[0], x[1]), v, g);
            [d1, d2]
        },
        |x| *x,
    )
}

/// Runs the linear differentiator in observer coordinates `w` and records
/// the canonical states. Needs a linear configuration with a fixed gain.
pub fn simulate_observer(
    config: &DifferentiatorConfig,
    signal: &TestSignal,
    t_span: (f64, f64),
    spec: IntegratorSpec,
    init: DiffState,
    opts: SimOptions,
) -> Result<Trajectory> {
    let form = config
        .observer_form()
        .ok_or_else(|| Error::invalid("observer form needs a fixed-gain linear differentiator"))?;
    let (t0, t1) = t_span;
    let n = step_count(t0, t1, spec.h)?;
    spec.check_guard(config.schedule().max_gain())?;
    check_inputs(signal, init, t0, n, spec.h)?;
    drive(
        signal,
        t0,
        n,
        spec,
        opts,
        form.from_canonical(init),
        |_, w, v| form.rhs(*w, v),
        |w| {
            let x = form.to_canonical(*w);
            [x.x1, x.x2]
        },
    )
}

fn check_inputs(signal: &TestSignal, init: DiffState, t0: f64, n: usize, h: f64) -> Result<()> {
    if !init.is_finite() {
        return Err(Error::invalid("initial state must be finite"));
    }
    if let Some((start, end)) = signal.domain() {
        let t_end = t0 + n as f64 * h;
        if t0 < start || t_end > end {
            return Err(Error::invalid(format!(
                "run [{t0}, {t_end}] exceeds sampled signal domain [{start}, {end}]"
            )));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn drive<F, C>(
    signal: &TestSignal,
    t0: f64,
    n: usize,
    spec: IntegratorSpec,
    opts: SimOptions,
    init: [f64; 2],
    mut field: F,
    canonical: C,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64; 2], f64) -> [f64; 2],
    C: Fn(&[f64; 2]) -> [f64; 2],
{
    let stride = opts.retention.stride(n);
    let mut samples = Vec::with_capacity(n / stride + 1);
    let mut x = init;
    samples.push(record(signal, t0, &canonical(&x))?);

    for i in 0..n {
        let t = t0 + i as f64 * spec.h;
        let t_next = t0 + (i + 1) as f64 * spec.h;
        let held = match opts.hold {
            InputHold::ZeroOrder => Some(signal.value(t)?),
            InputHold::Continuous => None,
        };
        let mut stage = |s: f64, x: &[f64; 2]| -> Result<[f64; 2]> {
            let v = match held {
                Some(v) => v,
                None => signal.value(s)?,
            };
            Ok(field(s, x, v))
        };
        x = try_step(&mut stage, &x, t, t_next - t, spec.method)?;
        check_divergence(&x, t_next)?;
        if (i + 1) % stride == 0 {
            samples.push(record(signal, t_next, &canonical(&x))?);
        }
    }
    Ok(Trajectory {
        t0,
        h: spec.h * stride as f64,
        samples,
    })
}

/// Sample-by-sample differentiator for online use.
///
/// Each incoming value is held until the next sample arrives; the interval
/// is covered by RK4 sub-steps no longer than `h_max`. Memory use does not
/// depend on the number of samples.
#[derive(Debug, Clone)]
pub struct OnlineDifferentiator {
    config: DifferentiatorConfig,
    state: DiffState,
    h_max: f64,
    t_start: Option<f64>,
    last: Option<(f64, f64)>,
}

impl OnlineDifferentiator {
    pub fn new(config: DifferentiatorConfig, init: DiffState, h_max: f64) -> Result<Self> {
        IntegratorSpec::rk4(h_max)?.check_guard(config.schedule().max_gain())?;
        if !init.is_finite() {
            return Err(Error::invalid("initial state must be finite"));
        }
        Ok(OnlineDifferentiator {
            config,
            state: init,
            h_max,
            t_start: None,
            last: None,
        })
    }

    pub fn state(&self) -> DiffState {
        self.state
    }

    /// Feeds the sample `(t, v)` and returns the estimate at `t`.
    pub fn push(&mut self, t: f64, v: f64) -> Result<DiffState> {
        if !t.is_finite() || !v.is_finite() {
            return Err(Error::invalid(format!("non-finite sample ({t}, {v})")));
        }
        let Some((t_prev, v_prev)) = self.last else {
            self.t_start = Some(t);
            self.last = Some((t, v));
            return Ok(self.state);
        };
        if t <= t_prev {
            return Err(Error::invalid(format!(
                "sample time {t} does not increase past {t_prev}"
            )));
        }
        let t_start = self.t_start.unwrap_or(t_prev);
        let dt = t - t_prev;
        let n = (dt / self.h_max - 1e-9).ceil().max(1.0) as usize;
        let sub = dt / n as f64;
        let schedule = self.config.schedule();
        let config = &self.config;
        let mut field = |s: f64, x: &[f64; 2]| -> Result<[f64; 2]> {
            let g = schedule.gain_unchecked(s - t_start);
            let (d1, d2) = config.rhs_with_gain(DiffState::new(x[0], x[1]), v_prev, g);
            Ok([d1, d2])
        };
        let mut x = [self.state.x1, self.state.x2];
        for j in 0..n {
            let (s, s_next) = if n == 1 {
                (t_prev, t)
            } else {
                (t_prev + j as f64 * sub, t_prev + (j + 1) as f64 * sub)
            };
            x = try_step(&mut field, &x, s, s_next - s, Method::Rk4)?;
            check_divergence(&x, s_next)?;
        }
        self.state = DiffState::new(x[0], x[1]);
        self.last = Some((t, v));
        Ok(self.state)
    }
}
