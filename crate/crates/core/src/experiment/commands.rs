//! The experiment commands behind the CLI. Each returns its results and,
//! given an output directory, writes them as CSV or `key = value` text.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Realization};
use crate::differentiator::{DiffState, DifferentiatorConfig, GainSchedule, Gains, Variant};
use crate::error::{Error, Result};
use crate::format::{float, opt_float};
use crate::integrate::{
    simulate, simulate_observer, IntegratorSpec, OnlineDifferentiator, Retention, SimOptions,
    Trajectory,
};
use crate::metrics::{
    epsilon_order, least_squares, linear_freq_response, sine_fit, steady_state_error, EpsilonOrder,
    LinearFit, MetricsReport,
};
use crate::reference::{homogeneity_residual, settling_time, TimeScaleSystem};
use crate::signals::{read_samples, TestSignal};

pub const TRAJECTORY_HEADER: &str = "t,v,vdot,x1,x2,e1,e2";

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Simulates an experiment in its configured realization.
pub fn simulate_experiment(cfg: &ExperimentConfig) -> Result<Trajectory> {
    let opts = SimOptions {
        retention: cfg.retention,
        ..SimOptions::default()
    };
    let run = match cfg.realization {
        Realization::Canonical => simulate,
        Realization::ObserverForm => simulate_observer,
    };
    run(
        &cfg.differentiator,
        &cfg.signal,
        cfg.t_span(),
        cfg.integrator,
        cfg.init,
        opts,
    )
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io_err = |e: csv::Error| Error::invalid(format!("writing trajectory: {e}"));
    w.write_record(TRAJECTORY_HEADER.split(','))
        .map_err(io_err)?;
    for s in &traj.samples {
        w.write_record([s.t, s.v, s.vdot, s.x1, s.x2, s.e1, s.e2].map(float))
            .map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Error::invalid(format!("writing trajectory: {e}")))
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub report: MetricsReport,
}

/// Simulates one experiment and computes its metrics. With `out`, writes
/// `trajectory.csv` and `report.txt`.
pub fn cmd_run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutput> {
    let started = Instant::now();
    let trajectory = simulate_experiment(cfg)?;
    let wall = started.elapsed().as_secs_f64();
    let fast = 1.0 / cfg.differentiator.schedule().max_gain();
    let mut report = MetricsReport::compute(&cfg.label, &trajectory, &cfg.metrics, fast)?;
    report.wall_clock_s = Some(wall);
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_trajectory(&trajectory, create(&dir.join("trajectory.csv"))?)?;
        write_file(&dir.join("report.txt"), &report.to_key_value())?;
    }
    Ok(RunOutput { trajectory, report })
}

/// Runs every configuration concurrently and tabulates their metrics.
/// With `out`, writes `compare.csv`.
pub fn cmd_compare(cfgs: &[ExperimentConfig], out: Option<&Path>) -> Result<Vec<MetricsReport>> {
    if cfgs.len() < 2 {
        return Err(Error::invalid("compare needs at least two configurations"));
    }
    let reports: Vec<Result<MetricsReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfgs
            .iter()
            .map(|cfg| scope.spawn(move || cmd_run(cfg, None).map(|r| r.report)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_file(&dir.join("compare.csv"), &compare_csv(&reports))?;
    }
    Ok(reports)
}

pub fn compare_csv(reports: &[MetricsReport]) -> String {
    let mut s = String::from(MetricsReport::CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.to_csv_row());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub h: f64,
    pub steady_state_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub order: EpsilonOrder,
}

/// Re-runs `cfg` at gain `1/eps` for each `eps` and fits the log-log slope
/// of steady-state error. A ramp schedule keeps its `t_max` and rescales
/// `mu`. Steps are tightened where the guard requires.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    epsilons: &[f64],
    out: Option<&Path>,
) -> Result<SweepOutput> {
    if epsilons.len() < 3 {
        return Err(Error::invalid("sweep needs at least three epsilon values"));
    }
    let mut members = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("epsilon {eps} must be > 0")));
        }
        let schedule = match cfg.differentiator.schedule() {
            GainSchedule::Fixed { .. } => GainSchedule::from_epsilon(eps)?,
            GainSchedule::Ramp { t_max, .. } => GainSchedule::ramp(1.0 / (eps * t_max), t_max)?,
        };
        let mut member = cfg.clone();
        member.differentiator = cfg.differentiator.with_schedule(schedule)?;
        let h = cfg
            .integrator
            .h
            .min(IntegratorSpec::max_step_for(1.0 / eps));
        member.integrator = IntegratorSpec::new(cfg.integrator.method, h)?;
        members.push(member);
    }
    let errors: Vec<Result<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = members
            .iter()
            .map(|m| {
                scope.spawn(move || {
                    let traj = simulate_experiment(m)?;
                    steady_state_error(&traj, m.metrics.steady_fraction)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep thread panicked"))
            .collect()
    });
    let mut rows = Vec::with_capacity(members.len());
    for ((&eps, m), err) in epsilons.iter().zip(&members).zip(errors) {
        rows.push(SweepRow {
            epsilon: eps,
            h: m.integrator.h,
            steady_state_error: err?,
        });
    }
    let points: Vec<_> = rows
        .iter()
        .map(|r| (r.epsilon, r.steady_state_error))
        .collect();
    let order = epsilon_order(&points)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let mut csv = String::from("epsilon,h,steady_state_error\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{}\n",
                float(r.epsilon),
                float(r.h),
                float(r.steady_state_error)
            ));
        }
        write_file(&dir.join("sweep.csv"), &csv)?;
        write_file(&dir.join("sweep_fit.txt"), &sweep_fit_text(&order))?;
    }
    Ok(SweepOutput { rows, order })
}

pub fn sweep_fit_text(order: &EpsilonOrder) -> String {
    let mut s = format!(
        "slope = {}\nused_points = {}\n",
        float(order.slope),
        order.used
    );
    for n in &order.notes {
        s.push_str(&format!("note = {n}\n"));
    }
    s
}

/// Time-scale systems checked by `lemma`, all with unit gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LemmaSystem {
    Linear,
    Nonlinear { alpha: f64 },
    NonlinearAlt { alpha1: f64, alpha2: f64 },
    Hybrid { alpha: f64 },
    HybridAlt { alpha1: f64, alpha2: f64 },
}

impl LemmaSystem {
    pub fn parse(name: &str, alpha: f64, alpha1: f64, alpha2: f64) -> Result<Self> {
        Ok(match name {
            "linear" => LemmaSystem::Linear,
            "nonlinear" => LemmaSystem::Nonlinear { alpha },
            "nonlinear-alt" => LemmaSystem::NonlinearAlt { alpha1, alpha2 },
            "hybrid" => LemmaSystem::Hybrid { alpha },
            "hybrid-alt" => LemmaSystem::HybridAlt { alpha1, alpha2 },
            other => return Err(Error::invalid(format!("unknown lemma system {other:?}"))),
        })
    }

    pub fn system(&self) -> Result<TimeScaleSystem> {
        let variant = match *self {
            LemmaSystem::Linear => Variant::Linear,
            LemmaSystem::Nonlinear { alpha } => Variant::Nonlinear { alpha },
            LemmaSystem::NonlinearAlt { alpha1, alpha2 } => {
                Variant::NonlinearAlt { alpha1, alpha2 }
            }
            LemmaSystem::Hybrid { alpha } => Variant::Hybrid { alpha },
            LemmaSystem::HybridAlt { alpha1, alpha2 } => Variant::HybridAlt { alpha1, alpha2 },
        };
        TimeScaleSystem::new(
            variant,
            Gains {
                a10: 1.0,
                a11: 1.0,
                a20: 1.0,
                a21: 1.0,
            },
        )
    }

    fn finite_time(&self) -> bool {
        !matches!(self, LemmaSystem::Linear)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaOptions {
    pub horizon: f64,
    pub h: f64,
    pub settle_tolerance: f64,
    pub dissipation_tolerance: f64,
    pub homogeneity_tolerance: f64,
    /// Minimum `R^2` of the log-linear fit for the linear system.
    pub min_r_squared: f64,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        LemmaOptions {
            horizon: 20.0,
            h: 1e-3,
            settle_tolerance: 1e-3,
            dissipation_tolerance: 1e-4,
            homogeneity_tolerance: 1e-9,
            min_r_squared: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRow {
    pub init: [f64; 2],
    pub settling_time: Option<f64>,
    /// Smallest `V` over samples away from the origin.
    pub min_lyapunov: f64,
    /// Largest `dV/dt` over all samples.
    pub max_rate: f64,
    pub dissipation_residual: f64,
    /// Same check differenced between samples; informational only.
    pub sampled_dissipation_residual: f64,
    /// Log-linear fit of `ln |z|` against `t`; linear system only.
    pub decay_fit: Option<LinearFit>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub system: LemmaSystem,
    pub rows: Vec<LemmaRow>,
    pub homogeneity_residual: Option<f64>,
    pub passed: bool,
}

/// `count` initial conditions drawn uniformly from `[-5, 5]^2`.
pub fn random_inits(count: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| [rng.random_range(-5.0..=5.0), rng.random_range(-5.0..=5.0)])
        .collect()
}

fn lemma_row(
    sys: &TimeScaleSystem,
    kind: LemmaSystem,
    init: [f64; 2],
    opts: &LemmaOptions,
) -> Result<LemmaRow> {
    let traj = sys.simulate(init, opts.horizon, opts.h)?;
    let settling = settling_time(&traj, opts.settle_tolerance)?;
    let mut min_lyapunov = f64::INFINITY;
    let mut max_rate = f64::NEG_INFINITY;
    let mut positive = true;
    for (_, z) in &traj.samples {
        let v = sys.lyapunov(z[0], z[1])?;
        if z[0] != 0.0 || z[1] != 0.0 {
            min_lyapunov = min_lyapunov.min(v);
            positive &= v > 0.0;
        }
        max_rate = max_rate.max(sys.lyapunov_rate(z[0], z[1])?);
    }
    let dissipation = sys.dissipation_residual(&traj)?;
    let sampled = sys.sampled_dissipation_residual(&traj)?;
    let decay_fit = if kind.finite_time() {
        None
    } else {
        let points: Vec<_> = traj
            .samples
            .iter()
            .map(|(t, z)| (*t, z[0].hypot(z[1])))
            .filter(|&(_, n)| n > 1e-12)
            .map(|(t, n)| (t, n.ln()))
            .collect();
        // a run starting at the origin leaves nothing to fit
        if points.len() < 2 {
            None
        } else {
            Some(least_squares(&points)?)
        }
    };
    let trend_ok = match &decay_fit {
        Some(fit) => fit.slope < 0.0 && fit.r_squared >= opts.min_r_squared,
        None => settling.is_some(),
    };
    let passed =
        positive && max_rate <= 0.0 && dissipation <= opts.dissipation_tolerance && trend_ok;
    Ok(LemmaRow {
        init,
        settling_time: settling,
        min_lyapunov,
        max_rate,
        dissipation_residual: dissipation,
        sampled_dissipation_residual: sampled,
        decay_fit,
        passed,
    })
}

/// Checks convergence and Lyapunov dissipation from every initial
/// condition, plus the homogeneity identity for the nonlinear system.
/// With `out`, writes `lemma.csv` and `lemma.txt`.
pub fn cmd_lemma(
    kind: LemmaSystem,
    inits: &[[f64; 2]],
    opts: &LemmaOptions,
    seed: u64,
    out: Option<&Path>,
) -> Result<LemmaReport> {
    if inits.is_empty() {
        return Err(Error::invalid("lemma needs at least one initial condition"));
    }
    let sys = kind.system()?;
    let rows = inits
        .iter()
        .map(|&z| lemma_row(&sys, kind, z, opts))
        .collect::<Result<Vec<_>>>()?;
    let homogeneity = match kind {
        LemmaSystem::Nonlinear { .. } => {
            let mut worst: f64 = 0.0;
            for z in random_inits(100, seed) {
                for lambda in [0.5, 2.0, 10.0] {
                    worst = worst.max(homogeneity_residual(&sys, -1.0, lambda, z)?);
                }
            }
            Some(worst)
        }
        _ => None,
    };
    let passed = rows.iter().all(|r| r.passed)
        && homogeneity.is_none_or(|r| r <= opts.homogeneity_tolerance);
    let report = LemmaReport {
        system: kind,
        rows,
        homogeneity_residual: homogeneity,
        passed,
    };
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_file(&dir.join("lemma.csv"), &lemma_csv(&report))?;
        write_file(&dir.join("lemma.txt"), &lemma_summary(&report))?;
    }
    Ok(report)
}

pub fn lemma_csv(report: &LemmaReport) -> String {
    let mut s = String::from(
        "z1_0,z2_0,settling_time,min_lyapunov,max_rate,dissipation_residual,sampled_dissipation_residual,decay_slope,decay_r_squared,passed\n",
    );
    for r in &report.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            float(r.init[0]),
            float(r.init[1]),
            opt_float(r.settling_time),
            float(r.min_lyapunov),
            float(r.max_rate),
            float(r.dissipation_residual),
            float(r.sampled_dissipation_residual),
            opt_float(r.decay_fit.map(|f| f.slope)),
            opt_float(r.decay_fit.map(|f| f.r_squared)),
            r.passed
        ));
    }
    s
}

pub fn lemma_summary(report: &LemmaReport) -> String {
    let failed = report.rows.iter().filter(|r| !r.passed).count();
    let mut s = format!(
        "system = {:?}\ninitial_conditions = {}\nfailed = {failed}\n",
        report.system,
        report.rows.len()
    );
    if let Some(h) = report.homogeneity_residual {
        s.push_str(&format!("homogeneity_residual = {}\n", float(h)));
    }
    s.push_str(&format!("passed = {}\n", report.passed));
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqRow {
    pub omega: f64,
    pub magnitude: f64,
    pub phase: f64,
    pub sim_magnitude: f64,
    pub sim_phase: f64,
    /// `|sim - analytic| / analytic` on magnitude.
    pub magnitude_deviation: f64,
    /// Absolute phase difference, wrapped to `[0, pi]`.
    pub phase_deviation: f64,
}

/// Slowest decay rate of `eps^2 s^2 + a20 eps s + a10`.
fn slowest_decay(a10: f64, a20: f64, eps: f64) -> f64 {
    let disc = a20 * a20 - 4.0 * a10;
    if disc < 0.0 {
        a20 / (2.0 * eps)
    } else {
        (a20 - disc.sqrt()) / (2.0 * eps)
    }
}

/// Magnitude and phase of the simulated linear differentiator's `x2` against
/// the input `sin(wt)`, fitted over one period once transients have decayed
/// below `e^-30`.
pub fn simulated_freq_response(
    a10: f64,
    a20: f64,
    epsilon: f64,
    omega: f64,
    h: f64,
) -> Result<(f64, f64)> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::invalid(format!("omega {omega} must be >= 0")));
    }
    if omega == 0.0 {
        // sin(0 t) is identically zero and so is the response from rest
        return Ok((0.0, 0.0));
    }
    let config = DifferentiatorConfig::linear(a10, a20, GainSchedule::from_epsilon(epsilon)?)?;
    let warmup = 30.0 / slowest_decay(a10, a20, epsilon);
    let period = 2.0 * std::f64::consts::PI / omega;
    let t1 = warmup + period;
    let steps = (t1 / h).ceil() as usize;
    let stride = steps.div_ceil(200_000).max(1);
    let traj = simulate(
        &config,
        &TestSignal::sine(1.0, omega, 0.0)?,
        (0.0, t1),
        IntegratorSpec::rk4(h)?,
        DiffState::default(),
        SimOptions {
            retention: Retention::Every(stride),
            ..SimOptions::default()
        },
    )?;
    let points: Vec<_> = traj.since(warmup).iter().map(|s| (s.t, s.x2)).collect();
    sine_fit(&points, omega)
}

fn wrap_angle(d: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let r = d.rem_euclid(tau);
    r.min(tau - r)
}

/// Analytic and simulated frequency response of the linear differentiator.
/// With `out`, writes `freq.csv`.
pub fn cmd_freq(
    a10: f64,
    a20: f64,
    epsilon: f64,
    omegas: &[f64],
    h: Option<f64>,
    out: Option<&Path>,
) -> Result<Vec<FreqRow>> {
    if omegas.is_empty() {
        return Err(Error::invalid("freq needs at least one omega"));
    }
    let h = h.unwrap_or(epsilon / 50.0);
    IntegratorSpec::rk4(h)?.check_guard(1.0 / epsilon)?;
    let results: Vec<Result<FreqRow>> = std::thread::scope(|scope| {
        let handles: Vec<_> = omegas
            .iter()
            .map(|&omega| {
                scope.spawn(move || {
                    let (magnitude, phase) = linear_freq_response(a10, a20, epsilon, omega);
                    let (sim_magnitude, sim_phase) =
                        simulated_freq_response(a10, a20, epsilon, omega, h)?;
                    Ok(FreqRow {
                        omega,
                        magnitude,
                        phase,
                        sim_magnitude,
                        sim_phase,
                        magnitude_deviation: if magnitude > 0.0 {
                            (sim_magnitude - magnitude).abs() / magnitude
                        } else {
                            sim_magnitude
                        },
                        phase_deviation: wrap_angle(sim_phase - phase),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("freq thread panicked"))
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_file(&dir.join("freq.csv"), &freq_csv(&rows))?;
    }
    Ok(rows)
}

pub fn freq_csv(rows: &[FreqRow]) -> String {
    let mut s = String::from(
        "omega,magnitude,phase,sim_magnitude,sim_phase,magnitude_deviation,phase_deviation\n",
    );
    for r in rows {
        let cols = [
            r.omega,
            r.magnitude,
            r.phase,
            r.sim_magnitude,
            r.sim_phase,
            r.magnitude_deviation,
            r.phase_deviation,
        ]
        .map(float);
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamSummary {
    pub samples: u64,
    pub final_state: DiffState,
}

/// Single pass over `(t, v)` CSV samples, writing `t,x2` rows as each sample
/// arrives. With `sample_rate`, spacing must match `1/rate` to 1e-6 relative.
pub fn cmd_stream<R: Read, W: Write>(
    cfg: &ExperimentConfig,
    input: R,
    source_name: &str,
    sample_rate: Option<f64>,
    output: W,
) -> Result<StreamSummary> {
    if let Some(rate) = sample_rate {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate {rate} must be > 0")));
        }
    }
    let h_max = cfg.integrator.h.min(IntegratorSpec::max_step_for(
        cfg.differentiator.schedule().max_gain(),
    ));
    let mut online = OnlineDifferentiator::new(cfg.differentiator, cfg.init, h_max)?;
    let mut w = BufWriter::new(output);
    let write_err = |e: std::io::Error| Error::io(source_name.to_string() + " (output)", e);
    w.write_all(b"t,x2\n").map_err(write_err)?;
    let mut count = 0u64;
    let mut prev_t: Option<f64> = None;
    for sample in read_samples(input, source_name) {
        let (t, v) = sample?;
        if let (Some(rate), Some(p)) = (sample_rate, prev_t) {
            let expected = 1.0 / rate;
            if ((t - p) - expected).abs() > 1e-6 * expected {
                return Err(Error::invalid(format!(
                    "sample at t = {t} breaks the stated rate {rate} Hz"
                )));
            }
        }
        let state = online.push(t, v)?;
        writeln!(w, "{},{}", float(t), float(state.x2)).map_err(write_err)?;
        prev_t = Some(t);
        count += 1;
    }
    w.flush().map_err(write_err)?;
    if count == 0 {
        return Err(Error::invalid(format!("{source_name}: no samples")));
    }
    Ok(StreamSummary {
        samples: count,
        final_state: online.state(),
    })
}
