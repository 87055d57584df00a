//! Experiment configuration: presets plus flat `section.key = value` files.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::differentiator::{DiffState, DifferentiatorConfig, GainSchedule, Gains, Variant};
use crate::error::{Error, Result};
use crate::integrate::{IntegratorSpec, Method, Retention};
use crate::metrics::MetricsOptions;
use crate::signals::{ingest_csv, Noise, TestSignal};

/// How the differentiator equations are realized in state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Realization {
    /// `(x1, x2)` coordinates.
    Canonical,
    /// Linear variant only: the `w`-coordinate high-gain observer form.
    ObserverForm,
}

/// Named configurations: the three reference simulations plus an observer-form
/// realization of the linear one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// a10 = 5, a20 = 2, g = 300.
    LinearSec6,
    /// 5 sig(e)^0.5 + 2 sig(x2/g)^0.5, g = 300.
    NonlinearSec6,
    /// 5 e + 0.5 sig(e)^0.5 + 2 x2/g + 0.5 sig(x2/g)^0.5, g = 300.
    HybridSec6,
    /// `LinearSec6` run in observer coordinates.
    LinearSec6WForm,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::LinearSec6,
        Preset::NonlinearSec6,
        Preset::HybridSec6,
        Preset::LinearSec6WForm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::LinearSec6 => "linear-sec6",
            Preset::NonlinearSec6 => "nonlinear-sec6",
            Preset::HybridSec6 => "hybrid-sec6",
            Preset::LinearSec6WForm => "linear-sec6-wform",
        }
    }

    pub fn draft(&self) -> ConfigDraft {
        let mut d = ConfigDraft {
            label: self.name().to_string(),
            ..ConfigDraft::default()
        };
        match self {
            Preset::LinearSec6 | Preset::LinearSec6WForm => {
                d.variant = "linear".into();
                d.a10 = 5.0;
                d.a20 = 2.0;
                if *self == Preset::LinearSec6WForm {
                    d.realization = "observer".into();
                }
            }
            Preset::NonlinearSec6 => {
                d.variant = "nonlinear-alt".into();
                d.a11 = 5.0;
                d.a21 = 2.0;
                d.alpha1 = 0.5;
                d.alpha2 = 0.5;
            }
            Preset::HybridSec6 => {
                d.variant = "hybrid-alt".into();
                d.a10 = 5.0;
                d.a11 = 0.5;
                d.a20 = 2.0;
                d.a21 = 0.5;
                d.alpha1 = 0.5;
                d.alpha2 = 0.5;
            }
        }
        d
    }

    pub fn config(&self) -> ExperimentConfig {
        self.draft().build().expect("presets are valid")
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(Preset::name).collect();
                Error::invalid(format!(
                    "unknown preset {s:?} (known: {})",
                    names.join(", ")
                ))
            })
    }
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub label: String,
    pub differentiator: DifferentiatorConfig,
    pub realization: Realization,
    pub signal: TestSignal,
    pub integrator: IntegratorSpec,
    pub t0: f64,
    pub horizon: f64,
    pub init: DiffState,
    pub retention: Retention,
    pub metrics: MetricsOptions,
}

impl ExperimentConfig {
    pub fn t_span(&self) -> (f64, f64) {
        (self.t0, self.t0 + self.horizon)
    }
}

/// Unvalidated experiment parameters; presets, config files and CLI flags
/// all edit a draft, which [`build`](ConfigDraft::build) then validates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDraft {
    pub label: String,
    pub variant: String,
    pub realization: String,
    pub a10: f64,
    pub a11: f64,
    pub a20: f64,
    pub a21: f64,
    pub alpha: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub gain_mode: String,
    pub gain: f64,
    pub mu: f64,
    pub t_max: f64,
    pub signal_kind: String,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub period: f64,
    pub offset: f64,
    pub coefficients: Vec<f64>,
    pub signal_path: Option<PathBuf>,
    pub noise_amplitude: f64,
    pub noise_seed: u64,
    pub noise_period: f64,
    pub method: String,
    pub h: f64,
    pub t0: f64,
    pub horizon: f64,
    pub x1: f64,
    pub x2: f64,
    pub retention: Retention,
    pub metrics: MetricsOptions,
}

impl Default for ConfigDraft {
    fn default() -> Self {
        ConfigDraft {
            label: "custom".into(),
            variant: String::new(),
            realization: "canonical".into(),
            a10: 0.0,
            a11: 0.0,
            a20: 0.0,
            a21: 0.0,
            alpha: 0.5,
            alpha1: 0.5,
            alpha2: 0.5,
            gain_mode: "fixed".into(),
            gain: 300.0,
            mu: 0.0,
            t_max: 0.0,
            signal_kind: "sine".into(),
            amplitude: 1.0,
            omega: 1.0,
            phase: 0.0,
            period: 2.0 * std::f64::consts::PI,
            offset: 0.0,
            coefficients: vec![0.0],
            signal_path: None,
            noise_amplitude: 0.0,
            noise_seed: 0,
            noise_period: 1e-3,
            method: "rk4".into(),
            h: 1e-6,
            t0: 0.0,
            horizon: 5.0,
            x1: 0.0,
            x2: 0.0,
            retention: Retention::Auto,
            metrics: MetricsOptions::default(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse {value:?}")))
}

fn one_of(key: &str, value: &str, allowed: &[&str]) -> Result<String> {
    if allowed.contains(&value) {
        Ok(value.to_string())
    } else {
        Err(Error::invalid(format!(
            "{key}: {value:?} is not one of {}",
            allowed.join(", ")
        )))
    }
}

pub fn parse_retention(value: &str) -> Result<Retention> {
    match value {
        "auto" => Ok(Retention::Auto),
        "full" => Ok(Retention::Full),
        n => match n.parse::<usize>() {
            Ok(k) if k > 0 => Ok(Retention::Every(k)),
            _ => Err(Error::invalid(format!(
                "decimate: expected auto, full or a positive integer, got {n:?}"
            ))),
        },
    }
}

impl ConfigDraft {
    /// Applies one `section.key = value` entry.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "preset" => {
                let preset: Preset = v.parse()?;
                *self = preset.draft();
            }
            "run.label" => self.label = v.to_string(),
            "run.t0" => self.t0 = parse_num(key, v)?,
            "run.horizon" => self.horizon = parse_num(key, v)?,
            "differentiator.variant" => {
                self.variant = one_of(
                    key,
                    v,
                    &[
                        "linear",
                        "nonlinear",
                        "nonlinear-alt",
                        "hybrid",
                        "hybrid-alt",
                    ],
                )?
            }
            "differentiator.realization" => {
                self.realization = one_of(key, v, &["canonical", "observer"])?
            }
            "differentiator.a10" => self.a10 = parse_num(key, v)?,
            "differentiator.a11" => self.a11 = parse_num(key, v)?,
            "differentiator.a20" => self.a20 = parse_num(key, v)?,
            "differentiator.a21" => self.a21 = parse_num(key, v)?,
            "differentiator.alpha" => self.alpha = parse_num(key, v)?,
            "differentiator.alpha1" => self.alpha1 = parse_num(key, v)?,
            "differentiator.alpha2" => self.alpha2 = parse_num(key, v)?,
            "gain.mode" => self.gain_mode = one_of(key, v, &["fixed", "ramp"])?,
            "gain.value" => self.gain = parse_num(key, v)?,
            "gain.epsilon" => {
                let eps: f64 = parse_num(key, v)?;
                if !(eps > 0.0) {
                    return Err(Error::invalid(format!("gain.epsilon {eps} must be > 0")));
                }
                self.gain = 1.0 / eps;
            }
            "gain.mu" => self.mu = parse_num(key, v)?,
            "gain.t_max" => self.t_max = parse_num(key, v)?,
            "signal.kind" => {
                self.signal_kind = one_of(key, v, &["sine", "triangular", "polynomial", "csv"])?
            }
            "signal.amplitude" => self.amplitude = parse_num(key, v)?,
            "signal.omega" => self.omega = parse_num(key, v)?,
            "signal.phase" => self.phase = parse_num(key, v)?,
            "signal.period" => self.period = parse_num(key, v)?,
            "signal.offset" => self.offset = parse_num(key, v)?,
            "signal.coefficients" => {
                self.coefficients = v
                    .split_whitespace()
                    .map(|c| parse_num(key, c))
                    .collect::<Result<_>>()?
            }
            "signal.path" => self.signal_path = Some(PathBuf::from(v)),
            "noise.amplitude" => self.noise_amplitude = parse_num(key, v)?,
            "noise.seed" => self.noise_seed = parse_num(key, v)?,
            "noise.period" => self.noise_period = parse_num(key, v)?,
            "integrator.method" => self.method = one_of(key, v, &["rk4", "euler"])?,
            "integrator.h" => self.h = parse_num(key, v)?,
            "init.x1" => self.x1 = parse_num(key, v)?,
            "init.x2" => self.x2 = parse_num(key, v)?,
            "output.decimate" => self.retention = parse_retention(v)?,
            "metrics.band" => self.metrics.band_fraction = parse_num(key, v)?,
            "metrics.steady_fraction" => self.metrics.steady_fraction = parse_num(key, v)?,
            "metrics.peak_window" => self.metrics.peak_window = parse_num(key, v)?,
            "metrics.deadband" => self.metrics.deadband = parse_num(key, v)?,
            _ => return Err(Error::invalid(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses a config file body. A `preset` line resets the draft, so it
    /// should come first.
    pub fn apply_text(&mut self, text: &str, source_name: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                source_name: source_name.to_string(),
                line: i as u64 + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got {line:?}")))?;
            self.apply(key.trim(), value.trim())
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut draft = ConfigDraft::default();
        draft.apply_text(&text, &path.display().to_string())?;
        Ok(draft)
    }

    fn variant(&self) -> Result<Variant> {
        Ok(match self.variant.as_str() {
            "linear" => Variant::Linear,
            "nonlinear" => Variant::Nonlinear { alpha: self.alpha },
            "nonlinear-alt" => Variant::NonlinearAlt {
                alpha1: self.alpha1,
                alpha2: self.alpha2,
            },
            "hybrid" => Variant::Hybrid { alpha: self.alpha },
            "hybrid-alt" => Variant::HybridAlt {
                alpha1: self.alpha1,
                alpha2: self.alpha2,
            },
            "" => return Err(Error::invalid("differentiator.variant is required")),
            other => return Err(Error::invalid(format!("unknown variant {other:?}"))),
        })
    }

    fn schedule(&self) -> Result<GainSchedule> {
        match self.gain_mode.as_str() {
            "fixed" => GainSchedule::fixed(self.gain),
            "ramp" => GainSchedule::ramp(self.mu, self.t_max),
            other => Err(Error::invalid(format!("unknown gain.mode {other:?}"))),
        }
    }

    fn signal(&self) -> Result<TestSignal> {
        let base = match self.signal_kind.as_str() {
            "sine" => TestSignal::sine(self.amplitude, self.omega, self.phase)?,
            "triangular" => TestSignal::triangular(self.amplitude, self.period)?,
            "polynomial" => TestSignal::polynomial(self.coefficients.clone())?,
            "csv" => {
                let path = self
                    .signal_path
                    .as_ref()
                    .ok_or_else(|| Error::invalid("signal.kind = csv needs signal.path"))?;
                let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
                ingest_csv(std::io::BufReader::new(file), &path.display().to_string())?
            }
            other => return Err(Error::invalid(format!("unknown signal.kind {other:?}"))),
        };
        let signal = if self.offset != 0.0 {
            base.offset(self.offset)?
        } else {
            base
        };
        Ok(if self.noise_amplitude > 0.0 {
            signal.with_noise(Noise::new(
                self.noise_amplitude,
                self.noise_seed,
                self.noise_period,
            )?)
        } else {
            signal
        })
    }

    pub fn build(&self) -> Result<ExperimentConfig> {
        let gains = Gains {
            a10: self.a10,
            a11: self.a11,
            a20: self.a20,
            a21: self.a21,
        };
        let differentiator = DifferentiatorConfig::new(self.variant()?, gains, self.schedule()?)?;
        let realization = match self.realization.as_str() {
            "canonical" => Realization::Canonical,
            "observer" => {
                if differentiator.observer_form().is_none() {
                    return Err(Error::invalid(
                        "observer realization needs the linear variant with a fixed gain",
                    ));
                }
                Realization::ObserverForm
            }
            other => return Err(Error::invalid(format!("unknown realization {other:?}"))),
        };
        let method = match self.method.as_str() {
            "rk4" => Method::Rk4,
            "euler" => Method::Euler,
            other => return Err(Error::invalid(format!("unknown integrator {other:?}"))),
        };
        let integrator = IntegratorSpec::new(method, self.h)?;
        integrator.check_guard(differentiator.schedule().max_gain())?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) || !self.t0.is_finite() {
            return Err(Error::invalid(format!(
                "run needs finite t0 and horizon > 0 (got {}, {})",
                self.t0, self.horizon
            )));
        }
        let init = DiffState::new(self.x1, self.x2);
        if !init.is_finite() {
            return Err(Error::invalid("initial state must be finite"));
        }
        let m = self.metrics;
        if !(m.band_fraction > 0.0 && m.band_fraction < 1.0)
            || !(m.steady_fraction > 0.0 && m.steady_fraction <= 1.0)
            || !(m.peak_window > 0.0)
            || !(m.deadband >= 0.0)
        {
            return Err(Error::invalid(format!("invalid metrics options {m:?}")));
        }
        Ok(ExperimentConfig {
            label: self.label.clone(),
            differentiator,
            realization,
            signal: self.signal()?,
            integrator,
            t0: self.t0,
            horizon: self.horizon,
            init,
            retention: self.retention,
            metrics: m,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build() {
        for p in Preset::ALL {
            let cfg = p.config();
            assert_eq!(cfg.label, p.name());
            assert_eq!(cfg.horizon, 5.0);
            assert_eq!(cfg.integrator.h, 1e-6);
            assert_eq!(
                cfg.differentiator.schedule(),
                GainSchedule::Fixed { gain: 300.0 }
            );
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        let hybrid = Preset::HybridSec6.config();
        assert_eq!(
            hybrid.differentiator.gains(),
            Gains {
                a10: 5.0,
                a11: 0.5,
                a20: 2.0,
                a21: 0.5
            }
        );
        assert!("nope".parse::<Preset>().is_err());
    }

    #[test]
    fn config_text_overrides_preset() {
        let text = "\
# hybrid on a triangular wave
preset = hybrid-sec6
signal.kind = triangular
signal.period = 4
gain.mode = ramp
gain.mu = 6000
gain.t_max = 0.05
run.horizon = 1.5
output.decimate = 10
";
        let mut d = ConfigDraft::default();
        d.apply_text(text, "test.cfg").unwrap();
        let cfg = d.build().unwrap();
        assert_eq!(cfg.horizon, 1.5);
        assert_eq!(cfg.retention, Retention::Every(10));
        assert_eq!(cfg.signal, TestSignal::triangular(1.0, 4.0).unwrap());
        assert_eq!(cfg.differentiator.schedule().max_gain(), 300.0);
    }

    #[test]
    fn config_errors_have_line_numbers() {
        let mut d = ConfigDraft::default();
        let err = d
            .apply_text("preset = linear-sec6\n\nintegrator.h = fast\n", "x.cfg")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = d.apply_text("bogus.key = 1\n", "x.cfg").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = d.apply_text("no equals sign\n", "x.cfg").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn build_validates() {
        let mut d = Preset::LinearSec6.draft();
        d.h = 1e-3;
        assert!(matches!(d.build(), Err(Error::StepTooLarge { .. })));
        let mut d = Preset::HybridSec6.draft();
        d.realization = "observer".into();
        assert!(d.build().is_err());
        let d = ConfigDraft::default();
        assert!(d.build().is_err());
        let mut d = Preset::LinearSec6.draft();
        d.metrics.band_fraction = 0.0;
        assert!(d.build().is_err());
    }
}
