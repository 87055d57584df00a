//! Test signals with analytic derivatives and corner (generalized
//! derivative) metadata.

use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A non-differentiable instant with its one-sided derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub t: f64,
    pub left: f64,
    pub right: f64,
}

/// Piecewise-linear interpolant through strictly increasing sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} sample times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::invalid("need at least two samples"));
        }
        if let Some(bad) = times.iter().chain(&values).find(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample {bad}")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "sample times not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(SampledSignal { times, values })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    fn check(&self, t: f64) -> Result<()> {
        let (start, end) = self.domain();
        if t >= start && t <= end {
            Ok(())
        } else {
            Err(Error::OutOfDomain { t, start, end })
        }
    }

    /// Index of the segment `[times[i], times[i+1]]` used for the right
    /// derivative at `t` (the last segment at the final sample).
    fn segment(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&s| s <= t);
        i.saturating_sub(1).min(self.times.len() - 2)
    }

    fn segment_slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.times[i + 1] - self.times[i])
    }

    fn value(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        let i = self.segment(t);
        Ok(self.values[i] + self.segment_slope(i) * (t - self.times[i]))
    }

    fn interior_index(&self, t: f64) -> Option<usize> {
        let n = self.times.len();
        self.times[1..n - 1]
            .binary_search_by(|s| s.total_cmp(&t))
            .ok()
            .map(|i| i + 1)
    }

    fn one_sided(&self, t: f64) -> Result<(f64, f64)> {
        self.check(t)?;
        if let Some(i) = self.interior_index(t) {
            return Ok((self.segment_slope(i - 1), self.segment_slope(i)));
        }
        let s = self.segment_slope(self.segment(t));
        Ok((s, s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalKind {
    /// `amplitude * sin(omega t + phase)`
    Sine {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// Zero at `t = 0`, rising with slope `4A/T`; peaks at `T/4 + kT`.
    Triangular {
        amplitude: f64,
        period: f64,
    },
    /// `c0 + c1 t + c2 t^2 + ...`
    Polynomial {
        coefficients: Vec<f64>,
    },
    Sampled(SampledSignal),
    Sum(Vec<SignalKind>),
}

impl SignalKind {
    fn value(&self, t: f64) -> Result<f64> {
        Ok(match self {
            SignalKind::Sine {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * t + phase).sin(),
            SignalKind::Triangular { amplitude, period } => {
                let p = (t / period).rem_euclid(1.0);
                let a = *amplitude;
                if p < 0.25 {
                    4.0 * a * p
                } else if p < 0.75 {
                    2.0 * a - 4.0 * a * p
                } else {
                    4.0 * a * p - 4.0 * a
                }
            }
            SignalKind::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            SignalKind::Sampled(s) => s.value(t)?,
            SignalKind::Sum(parts) => {
                let mut total = 0.0;
                for p in parts {
                    total += p.value(t)?;
                }
                total
            }
        })
    }

    /// Left and right derivatives at `t` (equal away from corners).
    fn one_sided(&self, t: f64) -> Result<(f64, f64)> {
        Ok(match self {
            SignalKind::Sine {
                amplitude,
                omega,
                phase,
            } => {
                let d = amplitude * omega * (omega * t + phase).cos();
                (d, d)
            }
            SignalKind::Triangular { amplitude, period } => {
                let s = 4.0 * amplitude / period;
                match triangular_corner_index(t, *period) {
                    Some(k) if k.rem_euclid(2) == 0 => (s, -s),
                    Some(_) => (-s, s),
                    None => {
                        let p = (t / period).rem_euclid(1.0);
                        let d = if (0.25..0.75).contains(&p) { -s } else { s };
                        (d, d)
                    }
                }
            }
            SignalKind::Polynomial { coefficients } => {
                let d = coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c);
                (d, d)
            }
            SignalKind::Sampled(s) => s.one_sided(t)?,
            SignalKind::Sum(parts) => {
                let (mut l, mut r) = (0.0, 0.0);
                for p in parts {
                    let (pl, pr) = p.one_sided(t)?;
                    l += pl;
                    r += pr;
                }
                (l, r)
            }
        })
    }

    fn corner_times(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        match self {
            SignalKind::Triangular { period, .. } => {
                let half = period / 2.0;
                let first = ((t0 - period / 4.0) / half).ceil() as i64;
                let last = ((t1 - period / 4.0) / half).floor() as i64;
                out.extend((first..=last).map(|k| period / 4.0 + k as f64 * half));
            }
            SignalKind::Sampled(s) => {
                let n = s.times.len();
                out.extend(
                    s.times[1..n - 1]
                        .iter()
                        .copied()
                        .filter(|&t| t >= t0 && t <= t1),
                );
            }
            SignalKind::Sum(parts) => parts.iter().for_each(|p| p.corner_times(t0, t1, out)),
            SignalKind::Sine { .. } | SignalKind::Polynomial { .. } => {}
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |name: &str, x: f64| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("signal {name} {x} is not finite")))
            }
        };
        match self {
            SignalKind::Sine {
                amplitude,
                omega,
                phase,
            } => {
                finite("amplitude", *amplitude)?;
                finite("omega", *omega)?;
                finite("phase", *phase)
            }
            SignalKind::Triangular { amplitude, period } => {
                finite("amplitude", *amplitude)?;
                if !(period.is_finite() && *period > 0.0) {
                    return Err(Error::invalid(format!(
                        "triangular period {period} must be > 0"
                    )));
                }
                Ok(())
            }
            SignalKind::Polynomial { coefficients } => coefficients
                .iter()
                .try_for_each(|&c| finite("coefficient", c)),
            SignalKind::Sampled(_) => Ok(()),
            SignalKind::Sum(parts) => parts.iter().try_for_each(SignalKind::validate),
        }
    }

    fn domain(&self) -> Option<(f64, f64)> {
        match self {
            SignalKind::Sampled(s) => Some(s.domain()),
            SignalKind::Sum(parts) => parts
                .iter()
                .filter_map(SignalKind::domain)
                .reduce(|(a0, a1), (b0, b1)| (a0.max(b0), a1.min(b1))),
            _ => None,
        }
    }
}

/// `k` such that `t = T/4 + k T/2`, if `t` is (numerically) a corner.
fn triangular_corner_index(t: f64, period: f64) -> Option<i64> {
    let x = (t - period / 4.0) / (period / 2.0);
    let k = x.round();
    if (x - k).abs() <= 1e-12 * (1.0 + x.abs()) {
        Some(k as i64)
    } else {
        None
    }
}

/// Additive uniform noise on `[-amplitude, amplitude]`, held constant over
/// each `period`-long slot. Slot `i` draws from ChaCha stream `i`, so the
/// value depends only on `(seed, i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub amplitude: f64,
    pub seed: u64,
    pub period: f64,
}

impl Noise {
    pub fn new(amplitude: f64, seed: u64, period: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::invalid(format!(
                "noise amplitude {amplitude} must be >= 0"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::invalid(format!("noise period {period} must be > 0")));
        }
        Ok(Noise {
            amplitude,
            seed,
            period,
        })
    }

    pub fn sample(&self, index: i64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        self.amplitude * rng.random_range(-1.0..=1.0)
    }

    pub fn at(&self, t: f64) -> f64 {
        self.sample((t / self.period).floor() as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSignal {
    kind: SignalKind,
    noise: Option<Noise>,
}

impl TestSignal {
    pub fn new(kind: SignalKind) -> Result<Self> {
        kind.validate()?;
        Ok(TestSignal { kind, noise: None })
    }

    pub fn sine(amplitude: f64, omega: f64, phase: f64) -> Result<Self> {
        Self::new(SignalKind::Sine {
            amplitude,
            omega,
            phase,
        })
    }

    pub fn triangular(amplitude: f64, period: f64) -> Result<Self> {
        Self::new(SignalKind::Triangular { amplitude, period })
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        Self::new(SignalKind::Polynomial { coefficients })
    }

    /// Adds a constant offset to the signal.
    pub fn offset(self, c: f64) -> Result<Self> {
        let kind = SignalKind::Sum(vec![
            SignalKind::Polynomial {
                coefficients: vec![c],
            },
            self.kind,
        ]);
        kind.validate()?;
        Ok(TestSignal {
            kind,
            noise: self.noise,
        })
    }

    pub fn with_noise(mut self, noise: Noise) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn kind(&self) -> &SignalKind {
        &self.kind
    }

    pub fn noise(&self) -> Option<&Noise> {
        self.noise.as_ref()
    }

    /// `[start, end]` for sampled signals; `None` when defined everywhere.
    pub fn domain(&self) -> Option<(f64, f64)> {
        self.kind.domain()
    }

    /// Signal value including noise, if any.
    pub fn value(&self, t: f64) -> Result<f64> {
        let clean = self.kind.value(t)?;
        Ok(match &self.noise {
            Some(n) => clean + n.at(t),
            None => clean,
        })
    }

    pub fn clean_value(&self, t: f64) -> Result<f64> {
        self.kind.value(t)
    }

    pub fn is_corner(&self, t: f64) -> bool {
        let mut ts = Vec::new();
        self.kind.corner_times(t, t, &mut ts);
        !ts.is_empty() || matches!(self.kind.one_sided(t), Ok((l, r)) if l != r)
    }

    /// Analytic derivative of the clean signal. Fails at corner instants.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        let (l, r) = self.kind.one_sided(t)?;
        if l != r || self.is_corner(t) {
            return Err(Error::AtCorner { t });
        }
        Ok(r)
    }

    /// Right derivative; equals [`derivative`](Self::derivative) off corners.
    pub fn right_derivative(&self, t: f64) -> Result<f64> {
        Ok(self.kind.one_sided(t)?.1)
    }

    /// Corners with `t0 <= t <= t1`, sorted by time.
    pub fn corners(&self, t0: f64, t1: f64) -> Result<Vec<Corner>> {
        let mut ts = Vec::new();
        self.kind.corner_times(t0, t1, &mut ts);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts.into_iter()
            .map(|t| {
                let (left, right) = self.kind.one_sided(t)?;
                Ok(Corner { t, left, right })
            })
            .collect()
    }
}

/// Linear-interpolated signal through `(times, values)`; interior samples
/// become corners.
pub fn ingest_samples(times: Vec<f64>, values: Vec<f64>) -> Result<TestSignal> {
    TestSignal::new(SignalKind::Sampled(SampledSignal::new(times, values)?))
}

/// Streams `(t, v)` rows from a two-column CSV with a header row.
///
/// Errors carry the 1-based line number within `source_name`.
pub fn read_samples<R: Read>(
    reader: R,
    source_name: &str,
) -> impl Iterator<Item = Result<(f64, f64)>> {
    let source_name = source_name.to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header_error = match rdr.headers() {
        Ok(h) if h.len() == 2 => None,
        Ok(h) => Some(Error::Parse {
            source_name: source_name.clone(),
            line: 1,
            message: format!("expected 2 header columns (t, v), found {}", h.len()),
        }),
        Err(e) => Some(csv_error(&source_name, e)),
    };
    let mut records = rdr.into_records();
    let mut pending = header_error;
    let mut failed = false;
    std::iter::from_fn(move || {
        if let Some(e) = pending.take() {
            failed = true;
            return Some(Err(e));
        }
        if failed {
            return None;
        }
        let record = match records.next()? {
            Ok(r) => r,
            Err(e) => {
                failed = true;
                return Some(Err(csv_error(&source_name, e)));
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let parse = |i: usize| -> Result<f64> {
            let field = &record[i];
            match field.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(Error::Parse {
                    source_name: source_name.clone(),
                    line,
                    message: format!("invalid number {field:?} in column {}", i + 1),
                }),
            }
        };
        let row = parse(0).and_then(|t| Ok((t, parse(1)?)));
        failed = row.is_err();
        Some(row)
    })
}

fn csv_error(source_name: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: e.to_string(),
    }
}

/// Reads a whole `(t, v)` CSV into a sampled signal.
pub fn ingest_csv<R: Read>(reader: R, source_name: &str) -> Result<TestSignal> {
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for row in read_samples(reader, source_name) {
        let (t, v) = row?;
        times.push(t);
        values.push(v);
    }
    ingest_samples(times, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sine_values() {
        let s = TestSignal::sine(1.0, 1.0, 0.0).unwrap();
        assert_eq!(s.value(0.0).unwrap(), 0.0);
        assert_relative_eq!(
            s.value(0.5).unwrap(),
            0.479_425_538_604_203,
            epsilon = 1e-15
        );
        assert_eq!(s.derivative(0.0).unwrap(), 1.0);
        assert!(s.corners(0.0, 100.0).unwrap().is_empty());
    }

    #[test]
    fn triangular_shape() {
        let s = TestSignal::triangular(1.0, 4.0).unwrap();
        assert_eq!(s.value(1.0).unwrap(), 1.0);
        assert_eq!(s.value(3.0).unwrap(), -1.0);
        assert_eq!(s.value(4.0).unwrap(), 0.0);
        assert_eq!(s.derivative(0.5).unwrap(), 1.0);
        assert_eq!(s.derivative(2.0).unwrap(), -1.0);
        assert_eq!(s.derivative(3.5).unwrap(), 1.0);
        assert!(matches!(s.derivative(1.0), Err(Error::AtCorner { .. })));
        let corners = s.corners(0.0, 6.0).unwrap();
        assert_eq!(
            corners,
            vec![
                Corner {
                    t: 1.0,
                    left: 1.0,
                    right: -1.0
                },
                Corner {
                    t: 3.0,
                    left: -1.0,
                    right: 1.0
                },
                Corner {
                    t: 5.0,
                    left: 1.0,
                    right: -1.0
                },
            ]
        );
        assert_eq!(s.right_derivative(1.0).unwrap(), -1.0);
    }

    #[test]
    fn triangular_continuous_at_corners() {
        let s = TestSignal::triangular(1.3, 2.0 * std::f64::consts::PI).unwrap();
        for c in s.corners(0.0, 30.0).unwrap() {
            let d = 1e-9;
            let left = s.value(c.t - d).unwrap() + c.left * d;
            let right = s.value(c.t + d).unwrap() - c.right * d;
            assert_relative_eq!(left, s.value(c.t).unwrap(), epsilon = 1e-12);
            assert_relative_eq!(right, s.value(c.t).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn polynomial_and_offset() {
        let p = TestSignal::polynomial(vec![1.0, -2.0, 3.0]).unwrap();
        assert_eq!(p.value(2.0).unwrap(), 9.0);
        assert_eq!(p.derivative(2.0).unwrap(), 10.0);
        let s = TestSignal::sine(1.0, 1.0, 0.0)
            .unwrap()
            .offset(1.0)
            .unwrap();
        assert_eq!(s.value(0.0).unwrap(), 1.0);
        assert_eq!(s.derivative(0.0).unwrap(), 1.0);
    }

    #[test]
    fn ingest_linear() {
        let s = ingest_samples(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(s.value(0.5).unwrap(), 0.5);
        assert_eq!(s.derivative(0.5).unwrap(), 1.0);
        assert!(matches!(s.value(1.5), Err(Error::OutOfDomain { .. })));
        assert!(s.value(-0.1).is_err());
    }

    #[test]
    fn ingest_corner() {
        let s = ingest_samples(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(
            s.corners(0.0, 2.0).unwrap(),
            vec![Corner {
                t: 1.0,
                left: 1.0,
                right: -1.0
            }]
        );
        assert!(s.derivative(1.0).is_err());
        assert_eq!(s.derivative(1.5).unwrap(), -1.0);
        assert_eq!(s.value(2.0).unwrap(), 0.0);
    }

    #[test]
    fn ingest_constant() {
        let s = ingest_samples(vec![0.0, 1.0], vec![3.0, 3.0]).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(s.derivative(t).unwrap(), 0.0);
            assert_eq!(s.value(t).unwrap(), 3.0);
        }
    }

    #[test]
    fn ingest_rejects_bad_samples() {
        assert!(ingest_samples(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(ingest_samples(vec![0.0, 2.0, 1.0], vec![1.0, 2.0, 3.0]).is_err());
        assert!(ingest_samples(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(ingest_samples(vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn csv_ingestion() {
        let text = "t,v\n0,0\n1,2\n2,2\n";
        let s = ingest_csv(text.as_bytes(), "mem").unwrap();
        assert_eq!(s.value(0.5).unwrap(), 1.0);
        assert_eq!(s.derivative(1.5).unwrap(), 0.0);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = ingest_csv("t,v\n0,0\n1,abc\n".as_bytes(), "in.csv").unwrap_err();
        match err {
            Error::Parse {
                line,
                ref source_name,
                ..
            } => {
                assert_eq!(line, 3);
                assert_eq!(source_name, "in.csv");
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = ingest_csv("t,v\n0,0\n1,2,3\n".as_bytes(), "in.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = ingest_csv("t\n0\n".as_bytes(), "in.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn noise_is_reproducible() {
        let n = Noise::new(0.1, 42, 1e-3).unwrap();
        let s = TestSignal::sine(1.0, 1.0, 0.0).unwrap().with_noise(n);
        let a: Vec<f64> = (0..100)
            .map(|i| s.value(i as f64 * 1e-3).unwrap())
            .collect();
        let b: Vec<f64> = (0..100)
            .rev()
            .map(|i| s.value(i as f64 * 1e-3).unwrap())
            .collect();
        let b: Vec<f64> = b.into_iter().rev().collect();
        assert_eq!(a, b);
        for (i, x) in a.iter().enumerate() {
            let clean = (i as f64 * 1e-3).sin();
            assert!((x - clean).abs() <= 0.1);
        }
        let other = Noise::new(0.1, 43, 1e-3).unwrap();
        assert_ne!(n.sample(5), other.sample(5));
        assert!(Noise::new(-1.0, 0, 1.0).is_err());
    }
}
