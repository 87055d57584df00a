//! Second-order singular-perturbation differentiators.
//!
//! Every variant has the structure
//!
//! ```text
//! x1' = x2
//! x2' = g^2 * f(x1 - v, x2 / g)
//! ```
//!
//! where `g = 1/eps` is the gain and `f` is the acceleration law of the
//! corresponding time-scale system (see [`Dynamics`]). Working with the gain
//! instead of `eps` keeps a ramped schedule well defined at `g = 0`.

use crate::error::{Error, Result};

/// Exponent of the signed power function, restricted to `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
            Ok(Exponent(alpha))
        } else {
            Err(Error::invalid(format!("exponent {alpha} not in (0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Signed power `|y|^alpha * sgn(y)`, with `sig(0) = 0`.
pub fn sig(y: f64, alpha: Exponent) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::invalid(format!("sig argument {y} is not finite")));
    }
    Ok(sig_pow(y, alpha.0))
}

#[inline]
pub(crate) fn sig_pow(y: f64, alpha: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        y.abs().powf(alpha).copysign(y)
    }
}

/// Gain `g = 1/eps` as a function of elapsed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainSchedule {
    Fixed {
        gain: f64,
    },
    /// `g(t) = mu * min(t, t_max)`; starts at zero and saturates.
    Ramp {
        mu: f64,
        t_max: f64,
    },
}

impl GainSchedule {
    pub fn fixed(gain: f64) -> Result<Self> {
        let s = GainSchedule::Fixed { gain };
        s.validate()?;
        Ok(s)
    }

    pub fn from_epsilon(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon {epsilon} must be > 0")));
        }
        Self::fixed(1.0 / epsilon)
    }

    pub fn ramp(mu: f64, t_max: f64) -> Result<Self> {
        let s = GainSchedule::Ramp { mu, t_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        match *self {
            GainSchedule::Fixed { gain } if !ok(gain) => {
                Err(Error::invalid(format!("fixed gain {gain} must be > 0")))
            }
            GainSchedule::Ramp { mu, t_max } if !ok(mu) || !ok(t_max) => Err(Error::invalid(
                format!("ramp needs mu > 0 and t_max > 0 (got {mu}, {t_max})"),
            )),
            _ => Ok(()),
        }
    }

    pub fn gain_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!(
                "gain requested at negative time {t}"
            )));
        }
        Ok(self.gain_unchecked(t))
    }

    #[inline]
    pub(crate) fn gain_unchecked(&self, t: f64) -> f64 {
        match *self {
            GainSchedule::Fixed { gain } => gain,
            GainSchedule::Ramp { mu, t_max } => mu * t.min(t_max),
        }
    }

    pub fn max_gain(&self) -> f64 {
        match *self {
            GainSchedule::Fixed { gain } => gain,
            GainSchedule::Ramp { mu, t_max } => mu * t_max,
        }
    }
}

/// Which right-hand side family is used, with its exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Linear,
    /// Position term uses `alpha / (2 - alpha)`, velocity term `alpha`.
    Nonlinear {
        alpha: f64,
    },
    NonlinearAlt {
        alpha1: f64,
        alpha2: f64,
    },
    Hybrid {
        alpha: f64,
    },
    HybridAlt {
        alpha1: f64,
        alpha2: f64,
    },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Linear => "linear",
            Variant::Nonlinear { .. } => "nonlinear",
            Variant::NonlinearAlt { .. } => "nonlinear-alt",
            Variant::Hybrid { .. } => "hybrid",
            Variant::HybridAlt { .. } => "hybrid-alt",
        }
    }

    fn has_linear_part(&self) -> bool {
        matches!(
            self,
            Variant::Linear | Variant::Hybrid { .. } | Variant::HybridAlt { .. }
        )
    }

    fn has_nonlinear_part(&self) -> bool {
        !matches!(self, Variant::Linear)
    }

    /// `(position exponent, velocity exponent)` of the nonlinear part.
    pub fn exponents(&self) -> Option<(f64, f64)> {
        match *self {
            Variant::Linear => None,
            Variant::Nonlinear { alpha } | Variant::Hybrid { alpha } => {
                Some((alpha / (2.0 - alpha), alpha))
            }
            Variant::NonlinearAlt { alpha1, alpha2 } | Variant::HybridAlt { alpha1, alpha2 } => {
                Some((alpha1, alpha2))
            }
        }
    }
}

/// Coefficients: `a10`, `a20` weight the linear part, `a11`, `a21` the
/// signed-power part.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Gains {
    pub a10: f64,
    pub a11: f64,
    pub a20: f64,
    pub a21: f64,
}

/// Validated acceleration law `f(z1, z2)` shared by a differentiator and its
/// time-scale reference system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dynamics {
    variant: Variant,
    gains: Gains,
    p1: f64,
    p2: f64,
}

impl Dynamics {
    /// Validates parameters and zeroes the gains the variant does not use.
    pub fn new(variant: Variant, gains: Gains) -> Result<Self> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{} requires {name} > 0 (got {x})",
                    variant.name()
                )))
            }
        };
        let mut g = gains;
        if variant.has_linear_part() {
            positive("a10", g.a10)?;
            positive("a20", g.a20)?;
        } else {
            g.a10 = 0.0;
            g.a20 = 0.0;
        }
        if variant.has_nonlinear_part() {
            positive("a11", g.a11)?;
            positive("a21", g.a21)?;
        } else {
            g.a11 = 0.0;
            g.a21 = 0.0;
        }
        match variant {
            Variant::Linear => {}
            Variant::Nonlinear { alpha } | Variant::Hybrid { alpha } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::invalid(format!("alpha {alpha} not in (0, 1)")));
                }
            }
            Variant::NonlinearAlt { alpha1, alpha2 } | Variant::HybridAlt { alpha1, alpha2 } => {
                if !(alpha2 > 0.0 && alpha2 < 1.0) {
                    return Err(Error::invalid(format!("alpha2 {alpha2} not in (0, 1)")));
                }
                let lower = alpha2 / (2.0 - alpha2);
                if !(alpha1 > lower && alpha1 < 1.0) {
                    return Err(Error::invalid(format!(
                        "alpha1 {alpha1} not in ({lower}, 1) for alpha2 = {alpha2}"
                    )));
                }
            }
        }
        let (p1, p2) = variant.exponents().unwrap_or((1.0, 1.0));
        Ok(Dynamics {
            variant,
            gains: g,
            p1,
            p2,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn gains(&self) -> Gains {
        self.gains
    }

    /// Exponent on the position error (`alpha/(2-alpha)` or `alpha1`).
    pub fn position_exponent(&self) -> Option<f64> {
        self.variant.exponents().map(|(p, _)| p)
    }

    pub fn velocity_exponent(&self) -> Option<f64> {
        self.variant.exponents().map(|(_, p)| p)
    }

    /// `f(z1, z2)`: the second component of the time-scale vector field.
    #[inline]
    pub fn accel(&self, z1: f64, z2: f64) -> f64 {
        let Gains { a10, a11, a20, a21 } = self.gains;
        let mut acc = 0.0;
        if self.variant.has_linear_part() {
            acc -= a10 * z1 + a20 * z2;
        }
        if self.variant.has_nonlinear_part() {
            acc -= a11 * sig_pow(z1, self.p1) + a21 * sig_pow(z2, self.p2);
        }
        acc
    }

    /// Gain-form acceleration `g^2 f(e, x2/g)`, expanded so the linear
    /// velocity term is `g * a20 * x2`. Returns 0 when `g = 0`.
    #[inline]
    pub fn accel_with_gain(&self, e: f64, x2: f64, g: f64) -> f64 {
        if g == 0.0 {
            return 0.0;
        }
        let Gains { a10, a11, a20, a21 } = self.gains;
        let g2 = g * g;
        let mut acc = 0.0;
        if self.variant.has_linear_part() {
            acc -= g2 * a10 * e + g * a20 * x2;
        }
        if self.variant.has_nonlinear_part() {
            acc -= g2 * (a11 * sig_pow(e, self.p1) + a21 * sig_pow(x2 / g, self.p2));
        }
        acc
    }
}

/// Differentiator estimate: `x1` tracks the signal, `x2` its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiffState {
    pub x1: f64,
    pub x2: f64,
}

impl DiffState {
    pub fn new(x1: f64, x2: f64) -> Self {
        DiffState { x1, x2 }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    /// `(e1, e2) = (x1 - v, x2 - vdot)`.
    pub fn errors(&self, v: f64, vdot: f64) -> (f64, f64) {
        (self.x1 - v, self.x2 - vdot)
    }
}

/// A complete differentiator: acceleration law plus gain schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferentiatorConfig {
    dynamics: Dynamics,
    schedule: GainSchedule,
}

impl DifferentiatorConfig {
    pub fn new(variant: Variant, gains: Gains, schedule: GainSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(DifferentiatorConfig {
            dynamics: Dynamics::new(variant, gains)?,
            schedule,
        })
    }

    pub fn linear(a10: f64, a20: f64, schedule: GainSchedule) -> Result<Self> {
        let gains = Gains {
            a10,
            a20,
            ..Gains::default()
        };
        Self::new(Variant::Linear, gains, schedule)
    }

    pub fn nonlinear(a11: f64, a21: f64, alpha: f64, schedule: GainSchedule) -> Result<Self> {
        let gains = Gains {
            a11,
            a21,
            ..Gains::default()
        };
        Self::new(Variant::Nonlinear { alpha }, gains, schedule)
    }

    pub fn nonlinear_alt(
        a11: f64,
        a21: f64,
        alpha1: f64,
        alpha2: f64,
        schedule: GainSchedule,
    ) -> Result<Self> {
        let gains = Gains {
            a11,
            a21,
            ..Gains::default()
        };
        Self::new(Variant::NonlinearAlt { alpha1, alpha2 }, gains, schedule)
    }

    pub fn hybrid(gains: Gains, alpha: f64, schedule: GainSchedule) -> Result<Self> {
        Self::new(Variant::Hybrid { alpha }, gains, schedule)
    }

    pub fn hybrid_alt(
        gains: Gains,
        alpha1: f64,
        alpha2: f64,
        schedule: GainSchedule,
    ) -> Result<Self> {
        Self::new(Variant::HybridAlt { alpha1, alpha2 }, gains, schedule)
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn variant(&self) -> Variant {
        self.dynamics.variant
    }

    pub fn gains(&self) -> Gains {
        self.dynamics.gains
    }

    pub fn schedule(&self) -> GainSchedule {
        self.schedule
    }

    pub fn with_schedule(mut self, schedule: GainSchedule) -> Result<Self> {
        schedule.validate()?;
        self.schedule = schedule;
        Ok(self)
    }

    /// `(dx1, dx2)` at elapsed time `t` for input value `v`.
    pub fn rhs(&self, state: DiffState, v: f64, t: f64) -> Result<(f64, f64)> {
        if !state.is_finite() || !v.is_finite() || !t.is_finite() {
            return Err(Error::NonFinite {
                what: "differentiator input",
                t,
            });
        }
        let g = self.schedule.gain_at(t)?;
        Ok(self.rhs_with_gain(state, v, g))
    }

    #[inline]
    pub(crate) fn rhs_with_gain(&self, state: DiffState, v: f64, g: f64) -> (f64, f64) {
        (
            state.x2,
            self.dynamics.accel_with_gain(state.x1 - v, state.x2, g),
        )
    }

    /// The equivalent `w`-coordinate realization, available for the linear
    /// variant under a fixed gain.
    pub fn observer_form(&self) -> Option<ObserverForm> {
        match (self.dynamics.variant, self.schedule) {
            (Variant::Linear, GainSchedule::Fixed { gain }) => Some(ObserverForm {
                a1: self.dynamics.gains.a10,
                a2: self.dynamics.gains.a20,
                epsilon: 1.0 / gain,
            }),
            _ => None,
        }
    }
}

/// Linear differentiator written as a high-gain observer:
///
/// ```text
/// w1' = w2 - a2 (w1 - v) / eps
/// w2' = -a1 (w1 - v) / eps^2
/// ```
///
/// related to the canonical form by `x1 = w1 - eps a2 w2 / a1`, `x2 = w2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverForm {
    pub a1: f64,
    pub a2: f64,
    pub epsilon: f64,
}

impl ObserverForm {
    pub fn rhs(&self, w: [f64; 2], v: f64) -> [f64; 2] {
        let e = w[0] - v;
        [
            w[1] - self.a2 * e / self.epsilon,
            -self.a1 * e / (self.epsilon * self.epsilon),
        ]
    }

    pub fn to_canonical(&self, w: [f64; 2]) -> DiffState {
        DiffState::new(w[0] - self.epsilon * self.a2 * w[1] / self.a1, w[1])
    }

    pub fn from_canonical(&self, x: DiffState) -> [f64; 2] {
        [x.x1 + self.epsilon * self.a2 * x.x2 / self.a1, x.x2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hybrid_alt_sec6() -> DifferentiatorConfig {
        let gains = Gains {
            a10: 5.0,
            a11: 0.5,
            a20: 2.0,
            a21: 0.5,
        };
        DifferentiatorConfig::hybrid_alt(gains, 0.5, 0.5, GainSchedule::fixed(300.0).unwrap())
            .unwrap()
    }

    #[test]
    fn sig_values() {
        let half = Exponent::new(0.5).unwrap();
        assert_relative_eq!(sig(2.0, half).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(sig(0.0, Exponent::new(0.3).unwrap()).unwrap(), 0.0);
        assert_eq!(sig(-4.0, half).unwrap(), -2.0);
        assert_eq!(sig(-3.5, Exponent::new(1.0).unwrap()).unwrap(), -3.5);
    }

    #[test]
    fn sig_rejects_bad_input() {
        assert!(Exponent::new(0.0).is_err());
        assert!(Exponent::new(1.5).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
        assert!(sig(f64::INFINITY, Exponent::new(0.5).unwrap()).is_err());
        assert!(sig(f64::NAN, Exponent::new(0.5).unwrap()).is_err());
    }

    #[test]
    fn ramp_gain() {
        let ramp = GainSchedule::ramp(1000.0, 0.1).unwrap();
        assert_relative_eq!(ramp.gain_at(0.05).unwrap(), 50.0, epsilon = 1e-12);
        assert_relative_eq!(ramp.gain_at(0.2).unwrap(), 100.0, epsilon = 1e-12);
        assert_eq!(ramp.gain_at(0.0).unwrap(), 0.0);
        assert!(ramp.gain_at(-1e-9).is_err());
        assert_eq!(ramp.max_gain(), 100.0);
        assert_eq!(GainSchedule::fixed(7.0).unwrap().gain_at(3.0).unwrap(), 7.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(GainSchedule::fixed(0.0).is_err());
        assert!(GainSchedule::fixed(-1.0).is_err());
        assert!(GainSchedule::ramp(0.0, 1.0).is_err());
        assert!(GainSchedule::ramp(1.0, f64::INFINITY).is_err());
        assert!(GainSchedule::from_epsilon(0.0).is_err());
        assert_eq!(
            GainSchedule::from_epsilon(0.5).unwrap(),
            GainSchedule::Fixed { gain: 2.0 }
        );
    }

    #[test]
    fn config_validation() {
        let fixed = GainSchedule::fixed(1.0).unwrap();
        assert!(DifferentiatorConfig::linear(0.0, 1.0, fixed).is_err());
        assert!(DifferentiatorConfig::linear(1.0, -1.0, fixed).is_err());
        assert!(DifferentiatorConfig::nonlinear(1.0, 1.0, 1.0, fixed).is_err());
        assert!(DifferentiatorConfig::nonlinear(1.0, 0.0, 0.5, fixed).is_err());
        // alpha1 must exceed alpha2 / (2 - alpha2) = 1/3
        assert!(DifferentiatorConfig::nonlinear_alt(1.0, 1.0, 0.3, 0.5, fixed).is_err());
        assert!(DifferentiatorConfig::nonlinear_alt(1.0, 1.0, 0.34, 0.5, fixed).is_ok());
        assert!(DifferentiatorConfig::nonlinear_alt(1.0, 1.0, 1.0, 0.5, fixed).is_err());
        let partial = Gains {
            a10: 1.0,
            a11: 1.0,
            a20: 0.0,
            a21: 1.0,
        };
        assert!(DifferentiatorConfig::hybrid(partial, 0.5, fixed).is_err());
    }

    #[test]
    fn unused_gains_are_ignored() {
        let gains = Gains {
            a10: 5.0,
            a11: 99.0,
            a20: 2.0,
            a21: 99.0,
        };
        let cfg =
            DifferentiatorConfig::new(Variant::Linear, gains, GainSchedule::fixed(1.0).unwrap())
                .unwrap();
        assert_eq!(cfg.gains().a11, 0.0);
        assert_eq!(cfg.dynamics().accel(1.0, 0.0), -5.0);
    }

    #[test]
    fn inner_exponent_in_unit_interval() {
        for alpha in [0.01, 0.3, 0.5, 0.9, 0.999] {
            let (p, q) = Variant::Nonlinear { alpha }.exponents().unwrap();
            assert!(p > 0.0 && p < 1.0);
            assert_eq!(q, alpha);
        }
    }

    #[test]
    fn linear_rhs_example() {
        let cfg =
            DifferentiatorConfig::linear(5.0, 2.0, GainSchedule::fixed(300.0).unwrap()).unwrap();
        let v = 0.7;
        let (dx1, dx2) = cfg.rhs(DiffState::new(v + 0.1, 0.0), v, 1.0).unwrap();
        assert_eq!(dx1, 0.0);
        assert_relative_eq!(dx2, -45000.0, max_relative = 1e-12);
    }

    #[test]
    fn hybrid_alt_rhs_example() {
        // -300^2 * (5 * 0.01 + 0.5 * 0.01^0.5) = -90000 * 0.1
        let (_, dx2) = hybrid_alt_sec6()
            .rhs(DiffState::new(0.01, 0.0), 0.0, 0.0)
            .unwrap();
        assert_relative_eq!(dx2, -9000.0, max_relative = 1e-12);
    }

    #[test]
    fn equilibrium_is_exact() {
        let fixed = GainSchedule::fixed(300.0).unwrap();
        let gains = Gains {
            a10: 5.0,
            a11: 2.0,
            a20: 2.0,
            a21: 0.5,
        };
        let configs = [
            DifferentiatorConfig::linear(5.0, 2.0, fixed).unwrap(),
            DifferentiatorConfig::nonlinear(5.0, 2.0, 0.5, fixed).unwrap(),
            DifferentiatorConfig::nonlinear_alt(5.0, 2.0, 0.5, 0.5, fixed).unwrap(),
            DifferentiatorConfig::hybrid(gains, 0.5, fixed).unwrap(),
            DifferentiatorConfig::hybrid_alt(gains, 0.5, 0.5, fixed).unwrap(),
        ];
        for cfg in configs {
            for v in [-3.0, 0.0, 0.25, 10.0] {
                assert_eq!(cfg.rhs(DiffState::new(v, 0.0), v, 0.3).unwrap(), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn ramp_start_has_zero_acceleration() {
        let cfg = hybrid_alt_sec6()
            .with_schedule(GainSchedule::ramp(6000.0, 0.05).unwrap())
            .unwrap();
        assert_eq!(
            cfg.rhs(DiffState::new(-1.0, 2.0), 1.0, 0.0).unwrap(),
            (2.0, 0.0)
        );
    }

    #[test]
    fn rhs_rejects_non_finite() {
        let cfg = hybrid_alt_sec6();
        assert!(cfg.rhs(DiffState::new(f64::NAN, 0.0), 0.0, 0.0).is_err());
        assert!(cfg.rhs(DiffState::default(), f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn observer_form_round_trip() {
        let cfg =
            DifferentiatorConfig::linear(5.0, 2.0, GainSchedule::fixed(300.0).unwrap()).unwrap();
        let form = cfg.observer_form().unwrap();
        let x = DiffState::new(0.3, -1.7);
        let back = form.to_canonical(form.from_canonical(x));
        assert_relative_eq!(back.x1, x.x1, epsilon = 1e-15);
        assert_eq!(back.x2, x.x2);
        assert!(hybrid_alt_sec6().observer_form().is_none());
    }

    #[test]
    fn observer_form_maps_vector_fields() {
        // d/dt of the change of variables must map one field onto the other.
        let cfg =
            DifferentiatorConfig::linear(5.0, 2.0, GainSchedule::fixed(300.0).unwrap()).unwrap();
        let form = cfg.observer_form().unwrap();
        let x = DiffState::new(0.2, 0.9);
        let v = 0.15;
        let (dx1, dx2) = cfg.rhs(x, v, 0.0).unwrap();
        let dw = form.rhs(form.from_canonical(x), v);
        let eps = form.epsilon;
        assert_relative_eq!(
            dw[0],
            dx1 + eps * form.a2 * dx2 / form.a1,
            max_relative = 1e-12
        );
        assert_relative_eq!(dw[1], dx2, max_relative = 1e-12);
    }
}
