//! Tracking metrics over differentiator trajectories and the analytic
//! frequency response of the linear differentiator.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::format::{float, opt_float};
use crate::integrate::{Sample, Trajectory};

pub const DEFAULT_BAND_FRACTION: f64 = 0.01;
/// Final share of the horizon treated as steady state.
pub const STEADY_STATE_FRACTION: f64 = 0.2;
pub const DEFAULT_PEAK_WINDOW: f64 = 0.1;
pub const DEFAULT_DEADBAND: f64 = 1e-4;

fn max_abs_vdot(samples: &[Sample]) -> f64 {
    samples.iter().map(|s| s.vdot.abs()).fold(0.0, f64::max)
}

/// First `t*` with `|e2(t)| <= band_fraction * max|vdot|` for every retained
/// sample from `t*` to the end. A constant input (max|vdot| = 0) uses
/// `band_fraction` as an absolute band. `None` if the last sample is outside.
pub fn convergence_time(traj: &Trajectory, band_fraction: f64) -> Result<Option<f64>> {
    if !(band_fraction > 0.0 && band_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "band fraction {band_fraction} not in (0, 1)"
        )));
    }
    if traj.samples.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    let scale = max_abs_vdot(&traj.samples);
    let band = band_fraction * if scale > 0.0 { scale } else { 1.0 };
    let n = traj.samples.len();
    Ok(match traj.samples.iter().rposition(|s| s.e2.abs() > band) {
        None => Some(traj.samples[0].t),
        Some(i) if i + 1 == n => None,
        Some(i) => Some(traj.samples[i + 1].t),
    })
}

/// `sup |e2|` over the final `fraction` of the horizon.
pub fn steady_state_error(traj: &Trajectory, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "window fraction {fraction} not in (0, 1]"
        )));
    }
    let end = traj.end_time();
    let from = end - fraction * (end - traj.t0);
    let window = traj.since(from);
    if window.is_empty() {
        return Err(Error::invalid("empty steady-state window"));
    }
    Ok(window.iter().map(|s| s.e2.abs()).fold(0.0, f64::max))
}

/// `max |x2|` over `[t0, t0 + window]`.
pub fn peak_transient(traj: &Trajectory, window: f64) -> Result<f64> {
    if !(window > 0.0) || traj.t0 + window > traj.end_time() + 1e-12 {
        return Err(Error::invalid(format!(
            "peak window {window} must be positive and within the horizon"
        )));
    }
    let limit = traj.t0 + window;
    Ok(traj
        .samples
        .iter()
        .take_while(|s| s.t <= limit)
        .map(|s| s.x2.abs())
        .fold(0.0, f64::max))
}

/// Sign reversals per second of successive `e2` increments larger than
/// `deadband`, counted over samples with `t >= from`.
pub fn chattering_index(traj: &Trajectory, deadband: f64, from: f64) -> Result<f64> {
    let window = traj.since(from);
    if window.len() < 3 {
        return Err(Error::invalid(
            "steady-state window too short for chattering index",
        ));
    }
    let length = window[window.len() - 1].t - window[0].t;
    let mut last_sign = 0.0;
    let mut reversals = 0usize;
    for w in window.windows(2) {
        let d = w[1].e2 - w[0].e2;
        if d.abs() <= deadband {
            continue;
        }
        let sign = d.signum();
        if last_sign != 0.0 && sign != last_sign {
            reversals += 1;
        }
        last_sign = sign;
    }
    Ok(reversals as f64 / length)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least-squares line through `(x, y)` points.
pub fn least_squares(points: &[(f64, f64)]) -> Result<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::invalid("need at least two points for a fit"));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("fit abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = points
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        1.0 - ss_res / syy
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonOrder {
    pub slope: f64,
    pub used: usize,
    pub notes: Vec<String>,
}

/// Log-log slope of steady-state error against `eps`. Points with a
/// non-positive error are dropped with a note.
pub fn epsilon_order(points: &[(f64, f64)]) -> Result<EpsilonOrder> {
    let mut notes = Vec::new();
    let mut logs = Vec::with_capacity(points.len());
    for &(eps, err) in points {
        if !(eps > 0.0) {
            return Err(Error::invalid(format!("epsilon {eps} must be > 0")));
        }
        if err > 0.0 && err.is_finite() {
            logs.push((eps.ln(), err.ln()));
        } else {
            notes.push(format!(
                "excluded eps={eps}: error {err} at or below noise floor"
            ));
        }
    }
    if logs.len() < 2 {
        return Err(Error::invalid(format!(
            "only {} usable points for the epsilon fit",
            logs.len()
        )));
    }
    let fit = least_squares(&logs)?;
    Ok(EpsilonOrder {
        slope: fit.slope,
        used: logs.len(),
        notes,
    })
}

/// `H(jw) = jw / (1 + (eps^2 (jw)^2 + a20 eps jw) / a10)`, the input to
/// `x2` transfer function of the linear differentiator, as
/// `(magnitude, phase)`.
pub fn linear_freq_response(a10: f64, a20: f64, epsilon: f64, omega: f64) -> (f64, f64) {
    let s = Complex64::new(0.0, omega);
    let h = s / (1.0 + (epsilon * epsilon * s * s + a20 * epsilon * s) / a10);
    (h.norm(), h.arg())
}

/// Least-squares fit `y ~ c + a sin(wt) + b cos(wt)`, returned as the
/// `(amplitude, phase)` of `amplitude * sin(wt + phase)`.
pub fn sine_fit(points: &[(f64, f64)], omega: f64) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::invalid("need at least three points for a sine fit"));
    }
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for &(t, y) in points {
        let basis = [1.0, (omega * t).sin(), (omega * t).cos()];
        for i in 0..3 {
            rhs[i] += basis[i] * y;
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
        }
    }
    let coef = solve3(m, rhs).ok_or_else(|| Error::invalid("degenerate sine fit"))?;
    let (a, b) = (coef[1], coef[2]);
    Ok((a.hypot(b), b.atan2(a)))
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (dst, src) in m[row].iter_mut().zip(pivot_row).skip(col) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / m[row][row];
    }
    Some(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsOptions {
    pub band_fraction: f64,
    pub steady_fraction: f64,
    pub peak_window: f64,
    pub deadband: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            band_fraction: DEFAULT_BAND_FRACTION,
            steady_fraction: STEADY_STATE_FRACTION,
            peak_window: DEFAULT_PEAK_WINDOW,
            deadband: DEFAULT_DEADBAND,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub label: String,
    pub convergence_time: Option<f64>,
    pub steady_state_error: f64,
    pub peak_transient: f64,
    pub chattering_index: Option<f64>,
    pub wall_clock_s: Option<f64>,
    pub notes: Vec<String>,
}

impl MetricsReport {
    /// Column order of [`to_csv_row`](Self::to_csv_row).
    pub const CSV_HEADER: &'static str =
        "label,convergence_time,steady_state_error,peak_transient,chattering_index,notes";

    /// `fast_time_constant` is `1 / max gain`; a horizon shorter than ten of
    /// them is flagged in the notes.
    pub fn compute(
        label: &str,
        traj: &Trajectory,
        opts: &MetricsOptions,
        fast_time_constant: f64,
    ) -> Result<Self> {
        let mut notes = Vec::new();
        let horizon = traj.end_time() - traj.t0;
        if horizon < 10.0 * fast_time_constant {
            notes.push(format!(
                "horizon {horizon} shorter than 10x fast time constant {fast_time_constant}"
            ));
        }
        let convergence_time = convergence_time(traj, opts.band_fraction)?;
        let steady_state_error = steady_state_error(traj, opts.steady_fraction)?;
        let peak_transient = peak_transient(traj, opts.peak_window.min(horizon))?;
        let chattering_index = match convergence_time {
            Some(t) => match chattering_index(traj, opts.deadband, t) {
                Ok(c) => Some(c),
                Err(e) => {
                    notes.push(format!("chattering index unavailable: {e}"));
                    None
                }
            },
            None => {
                notes.push("not converged within horizon".to_string());
                None
            }
        };
        Ok(MetricsReport {
            label: label.to_string(),
            convergence_time,
            steady_state_error,
            peak_transient,
            chattering_index,
            wall_clock_s: None,
            notes,
        })
    }

    /// `key = value` lines.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let conv = self
            .convergence_time
            .map_or_else(|| "not_converged".to_string(), float);
        let _ = writeln!(out, "label = {}", self.label);
        let _ = writeln!(out, "convergence_time = {conv}");
        let _ = writeln!(
            out,
            "steady_state_error = {}",
            float(self.steady_state_error)
        );
        let _ = writeln!(out, "peak_transient = {}", float(self.peak_transient));
        let _ = writeln!(
            out,
            "chattering_index = {}",
            opt_float(self.chattering_index)
        );
        if let Some(w) = self.wall_clock_s {
            let _ = writeln!(out, "wall_clock_s = {w:.3}");
        }
        for note in &self.notes {
            let _ = writeln!(out, "note = {note}");
        }
        out
    }

    /// One CSV row; notes are joined with `;` and stripped of commas.
    pub fn to_csv_row(&self) -> String {
        let notes = self.notes.join("; ").replace([',', '\n'], " ");
        format!(
            "{},{},{},{},{},{}",
            self.label.replace(',', " "),
            opt_float(self.convergence_time),
            float(self.steady_state_error),
            float(self.peak_transient),
            opt_float(self.chattering_index),
            notes
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn traj(points: &[(f64, f64, f64)]) -> Trajectory {
        // (t, x2, vdot)
        Trajectory {
            t0: points[0].0,
            h: points[1].0 - points[0].0,
            samples: points
                .iter()
                .map(|&(t, x2, vdot)| Sample {
                    t,
                    x1: 0.0,
                    x2,
                    v: 0.0,
                    vdot,
                    e1: 0.0,
                    e2: x2 - vdot,
                })
                .collect(),
        }
    }

    #[test]
    fn convergence_examples() {
        let exact = traj(&(0..10).map(|i| (i as f64, 1.0, 1.0)).collect::<Vec<_>>());
        assert_eq!(convergence_time(&exact, 0.01).unwrap(), Some(0.0));

        let pts: Vec<_> = (0..10)
            .map(|i| (i as f64, if i < 4 { 0.0 } else { 1.0 }, 1.0))
            .collect();
        assert_eq!(convergence_time(&traj(&pts), 0.01).unwrap(), Some(4.0));

        let pts: Vec<_> = (0..10).map(|i| (i as f64, 0.0, 1.0)).collect();
        assert_eq!(convergence_time(&traj(&pts), 0.01).unwrap(), None);
        assert!(convergence_time(&traj(&pts), 1.0).is_err());
    }

    #[test]
    fn steady_state_and_peak() {
        let pts: Vec<_> = (0..=10)
            .map(|i| (i as f64, if i == 9 { 1.5 } else { 1.0 }, 1.0))
            .collect();
        let tr = traj(&pts);
        assert_relative_eq!(steady_state_error(&tr, 0.2).unwrap(), 0.5);
        let zero: Vec<_> = (0..=10).map(|i| (i as f64, 0.0, 0.0)).collect();
        assert_eq!(peak_transient(&traj(&zero), 5.0).unwrap(), 0.0);
        assert_eq!(peak_transient(&tr, 9.0).unwrap(), 1.5);
        assert!(peak_transient(&tr, 20.0).is_err());
    }

    #[test]
    fn chattering_examples() {
        let constant: Vec<_> = (0..100).map(|i| (i as f64 * 0.01, 0.3, 0.0)).collect();
        assert_eq!(chattering_index(&traj(&constant), 1e-4, 0.0).unwrap(), 0.0);

        let smooth: Vec<_> = (0..1000)
            .map(|i| {
                let t = i as f64 * 1e-3;
                (t, 1e-3 * (10.0 * t).sin(), 0.0)
            })
            .collect();
        // increments are at most 1e-5, below the deadband
        assert_eq!(chattering_index(&traj(&smooth), 1e-4, 0.0).unwrap(), 0.0);

        let alternating: Vec<_> = (0..=10)
            .map(|i| (i as f64 * 0.1, if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        assert_relative_eq!(
            chattering_index(&traj(&alternating), 1e-4, 0.0).unwrap(),
            9.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn epsilon_order_examples() {
        let a = epsilon_order(&[(1e-2, 1e-3), (1e-3, 1e-4)]).unwrap();
        assert_relative_eq!(a.slope, 1.0, epsilon = 1e-12);
        let b = epsilon_order(&[(1e-2, 1e-4), (1e-3, 1e-6)]).unwrap();
        assert_relative_eq!(b.slope, 2.0, epsilon = 1e-12);
        let c = epsilon_order(&[(1e-2, 1e-4), (1e-3, 0.0), (1e-4, 1e-8)]).unwrap();
        assert_eq!(c.used, 2);
        assert_eq!(c.notes.len(), 1);
        assert!(epsilon_order(&[(1e-2, 1e-4), (1e-3, 0.0)]).is_err());
    }

    #[test]
    fn freq_response_examples() {
        assert_eq!(linear_freq_response(5.0, 2.0, 1.0 / 300.0, 0.0).0, 0.0);
        let (mag, phase) = linear_freq_response(5.0, 2.0, 1.0 / 300.0, 1.0);
        assert!((mag - 1.0).abs() < 2e-3);
        let eps: f64 = 1.0 / 300.0;
        // arg of the denominator 1 - eps^2/5 + j 2 eps/5
        let lag = (2.0 * eps / 5.0).atan2(1.0 - eps * eps / 5.0);
        assert_relative_eq!(phase, std::f64::consts::FRAC_PI_2 - lag, epsilon = 1e-15);
        assert_relative_eq!(lag, 1.333e-3, epsilon = 1e-6);

        let (mag, phase) = linear_freq_response(5.0, 2.0, 1e-9, 3.0);
        assert_relative_eq!(mag, 3.0, max_relative = 1e-6);
        assert_relative_eq!(phase, std::f64::consts::FRAC_PI_2, epsilon = 1e-6);

        // at w = 1/eps the denominator is 0.8 + 0.4j
        let (mag, phase) = linear_freq_response(5.0, 2.0, eps, 300.0);
        assert_relative_eq!(mag, 300.0 / 0.8f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(
            phase,
            std::f64::consts::FRAC_PI_2 - 0.5f64.atan(),
            epsilon = 1e-12
        );
        // well above 1/eps the response rolls off as a10 / (eps^2 w)
        let (mag, _) = linear_freq_response(5.0, 2.0, eps, 3e5);
        assert_relative_eq!(mag, 5.0 / (eps * eps * 3e5), max_relative = 1e-2);
    }

    #[test]
    fn sine_fit_recovers_phasor() {
        let pts: Vec<_> = (0..2000)
            .map(|i| {
                let t = i as f64 * 1e-3;
                (t, 0.2 + 1.7 * (3.0 * t + 0.4).sin())
            })
            .collect();
        let (a, p) = sine_fit(&pts, 3.0).unwrap();
        assert_relative_eq!(a, 1.7, epsilon = 1e-10);
        assert_relative_eq!(p, 0.4, epsilon = 1e-10);
    }

    #[test]
    fn report_serialization() {
        let report = MetricsReport {
            label: "a,b".into(),
            convergence_time: None,
            steady_state_error: 0.5,
            peak_transient: 2.0,
            chattering_index: Some(0.0),
            wall_clock_s: None,
            notes: vec!["x, y".into(), "z".into()],
        };
        let row = report.to_csv_row();
        assert_eq!(
            row.split(',').count(),
            MetricsReport::CSV_HEADER.split(',').count()
        );
        assert!(row.starts_with("a b,NaN,5.0000000000000000e-1,"));
        let kv = report.to_key_value();
        assert!(kv.contains("convergence_time = not_converged\n"));
        assert!(kv.contains("note = x, y\n"));
    }
}
