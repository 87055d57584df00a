//! Time-scale reference systems `z1' = z2, z2' = f(z1, z2)` whose boundary
//! layers are the differentiators, with Lyapunov functions, dilation weights
//! and settling-time measurement.

use crate::differentiator::{Dynamics, Gains, Variant};
use crate::error::{Error, Result};
use crate::integrate::{simulate_raw, step, IntegratorSpec, Method, RawTrajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScaleSystem {
    dynamics: Dynamics,
}

impl TimeScaleSystem {
    pub fn new(variant: Variant, gains: Gains) -> Result<Self> {
        Ok(TimeScaleSystem {
            dynamics: Dynamics::new(variant, gains)?,
        })
    }

    pub fn from_dynamics(dynamics: Dynamics) -> Self {
        TimeScaleSystem { dynamics }
    }

    pub fn linear(a10: f64, a20: f64) -> Result<Self> {
        let gains = Gains {
            a10,
            a20,
            ..Gains::default()
        };
        Self::new(Variant::Linear, gains)
    }

    pub fn nonlinear(a11: f64, a21: f64, alpha: f64) -> Result<Self> {
        let gains = Gains {
            a11,
            a21,
            ..Gains::default()
        };
        Self::new(Variant::Nonlinear { alpha }, gains)
    }

    pub fn nonlinear_alt(a11: f64, a21: f64, alpha1: f64, alpha2: f64) -> Result<Self> {
        let gains = Gains {
            a11,
            a21,
            ..Gains::default()
        };
        Self::new(Variant::NonlinearAlt { alpha1, alpha2 }, gains)
    }

    pub fn hybrid(gains: Gains, alpha: f64) -> Result<Self> {
        Self::new(Variant::Hybrid { alpha }, gains)
    }

    pub fn hybrid_alt(gains: Gains, alpha1: f64, alpha2: f64) -> Result<Self> {
        Self::new(Variant::HybridAlt { alpha1, alpha2 }, gains)
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn variant(&self) -> Variant {
        self.dynamics.variant()
    }

    pub fn rhs(&self, z1: f64, z2: f64) -> Result<(f64, f64)> {
        finite(z1, z2)?;
        Ok((z2, self.dynamics.accel(z1, z2)))
    }

    /// Energy-like function: `a11 |z1|^(1+p) / (1+p) + (a10 z1^2 + z2^2) / 2`,
    /// with `p` the position exponent. For the nonlinear family this is
    /// `a11 (2-a)/2 |z1|^(2/(2-a)) + z2^2/2`.
    pub fn lyapunov(&self, z1: f64, z2: f64) -> Result<f64> {
        finite(z1, z2)?;
        let g = self.dynamics.gains();
        let mut v = 0.5 * (g.a10 * z1 * z1 + z2 * z2);
        if let Some(p) = self.dynamics.position_exponent() {
            v += g.a11 * z1.abs().powf(1.0 + p) / (1.0 + p);
        }
        Ok(v)
    }

    /// Derivative of [`lyapunov`](Self::lyapunov) along the flow:
    /// `-a21 |z2|^(1+q) - a20 z2^2`, never positive.
    pub fn lyapunov_rate(&self, z1: f64, z2: f64) -> Result<f64> {
        finite(z1, z2)?;
        let g = self.dynamics.gains();
        let mut rate = -g.a20 * z2 * z2;
        if let Some(q) = self.dynamics.velocity_exponent() {
            rate -= g.a21 * z2.abs().powf(1.0 + q);
        }
        Ok(rate)
    }

    /// Integrates from `init` over `[0, horizon]` with RK4 step `h`.
    pub fn simulate(&self, init: [f64; 2], horizon: f64, h: f64) -> Result<RawTrajectory<2>> {
        let dynamics = self.dynamics;
        simulate_raw(
            move |_, z: &[f64; 2]| [z[1], dynamics.accel(z[0], z[1])],
            init,
            (0.0, horizon),
            IntegratorSpec::rk4(h)?,
        )
    }

    /// Largest `|fd - rate| / (1 + |rate|)` over the samples, where `fd` is
    /// the central difference of `V` over RK4 flow steps of
    /// `+-LOCAL_FD_STEP` from each sample.
    pub fn dissipation_residual(&self, traj: &RawTrajectory<2>) -> Result<f64> {
        let d = LOCAL_FD_STEP;
        let mut worst: f64 = 0.0;
        for (_, z) in &traj.samples {
            let ahead = self.flow(*z, d)?;
            let behind = self.flow(*z, -d)?;
            let fd = (self.lyapunov(ahead[0], ahead[1])? - self.lyapunov(behind[0], behind[1])?)
                / (2.0 * d);
            let rate = self.lyapunov_rate(z[0], z[1])?;
            worst = worst.max((fd - rate).abs() / (1.0 + rate.abs()));
        }
        Ok(worst)
    }

    /// As [`dissipation_residual`](Self::dissipation_residual) but differencing
    /// neighbouring samples. `V` is not twice differentiable where `z1 = 0`,
    /// so the error near sign changes of `z1` decays only like `h^(1/3)`.
    pub fn sampled_dissipation_residual(&self, traj: &RawTrajectory<2>) -> Result<f64> {
        let values = traj
            .samples
            .iter()
            .map(|(_, z)| self.lyapunov(z[0], z[1]))
            .collect::<Result<Vec<_>>>()?;
        let mut worst: f64 = 0.0;
        for i in 1..values.len().saturating_sub(1) {
            let dt = traj.samples[i + 1].0 - traj.samples[i - 1].0;
            let fd = (values[i + 1] - values[i - 1]) / dt;
            let z = traj.samples[i].1;
            let rate = self.lyapunov_rate(z[0], z[1])?;
            worst = worst.max((fd - rate).abs() / (1.0 + rate.abs()));
        }
        Ok(worst)
    }

    /// One RK4 step of signed length `dt` (negative runs the flow backwards).
    fn flow(&self, z: [f64; 2], dt: f64) -> Result<[f64; 2]> {
        let dynamics = self.dynamics;
        let s = dt.signum();
        step(
            move |_, z: &[f64; 2]| [s * z[1], s * dynamics.accel(z[0], z[1])],
            &z,
            0.0,
            dt.abs(),
            Method::Rk4,
        )
    }
}

/// Time step of the local central difference in
/// [`TimeScaleSystem::dissipation_residual`].
pub const LOCAL_FD_STEP: f64 = 1e-9;

fn finite(z1: f64, z2: f64) -> Result<()> {
    if z1.is_finite() && z2.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: "time-scale state",
            t: f64::NAN,
        })
    }
}

/// Dilation weights `(r1, r2) = (k (2-a)/(a-1), k/(a-1))` under which the
/// nonlinear field is homogeneous of degree `k < 0`.
pub fn homogeneity_weights(alpha: f64, k: f64) -> Result<(f64, f64)> {
    if alpha == 1.0 {
        return Err(Error::invalid("alpha = 1 has no dilation weights"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} not in (0, 1)")));
    }
    if !(k < 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!("degree k = {k} must be negative")));
    }
    Ok((k * (2.0 - alpha) / (alpha - 1.0), k / (alpha - 1.0)))
}

/// Relative residual of `f2(l^r1 z1, l^r2 z2) = l^(r2+k) f2(z1, z2)`.
pub fn homogeneity_residual(
    system: &TimeScaleSystem,
    k: f64,
    lambda: f64,
    z: [f64; 2],
) -> Result<f64> {
    let Variant::Nonlinear { alpha } = system.variant() else {
        return Err(Error::invalid(
            "homogeneity identity applies to the nonlinear system",
        ));
    };
    let (r1, r2) = homogeneity_weights(alpha, k)?;
    let (_, scaled) = system.rhs(lambda.powf(r1) * z[0], lambda.powf(r2) * z[1])?;
    let (_, base) = system.rhs(z[0], z[1])?;
    let expected = lambda.powf(r2 + k) * base;
    Ok((scaled - expected).abs() / expected.abs().max(f64::MIN_POSITIVE))
}

/// First time after which `max(|z1|, |z2|) <= tolerance` through the end of
/// the trajectory; `None` if the final sample is still outside.
pub fn settling_time(traj: &RawTrajectory<2>, tolerance: f64) -> Result<Option<f64>> {
    if traj.samples.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    let outside = |z: &[f64; 2]| z[0].abs().max(z[1].abs()) > tolerance;
    match traj.samples.iter().rposition(|(_, z)| outside(z)) {
        None => Ok(Some(traj.samples[0].0)),
        Some(i) if i + 1 == traj.samples.len() => Ok(None),
        Some(i) => Ok(Some(traj.samples[i + 1].0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_gains() -> Gains {
        Gains {
            a10: 1.0,
            a11: 1.0,
            a20: 1.0,
            a21: 1.0,
        }
    }

    #[test]
    fn rhs_examples() {
        let lin = TimeScaleSystem::linear(1.0, 1.0).unwrap();
        assert_eq!(lin.rhs(1.0, 1.0).unwrap(), (1.0, -2.0));
        let nl = TimeScaleSystem::nonlinear(1.0, 1.0, 0.5).unwrap();
        assert_eq!(nl.rhs(0.0, 0.0).unwrap(), (0.0, 0.0));
        let hy = TimeScaleSystem::hybrid(unit_gains(), 0.5).unwrap();
        assert_eq!(hy.rhs(1.0, 0.0).unwrap(), (0.0, -2.0));
        assert!(hy.rhs(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn hybrid_alt_matches_printed_form() {
        let sys = TimeScaleSystem::hybrid_alt(unit_gains(), 0.5, 0.5).unwrap();
        let (z1, z2) = (0.7, -2.3);
        let expected = -z1 - 0.7f64.sqrt() - z2 + 2.3f64.sqrt();
        assert_relative_eq!(sys.rhs(z1, z2).unwrap().1, expected, epsilon = 1e-15);
    }

    #[test]
    fn lyapunov_examples() {
        let sys = [
            TimeScaleSystem::linear(1.0, 1.0).unwrap(),
            TimeScaleSystem::nonlinear(5.0, 1.0, 0.5).unwrap(),
            TimeScaleSystem::hybrid_alt(unit_gains(), 0.5, 0.5).unwrap(),
        ];
        for s in &sys {
            assert_eq!(s.lyapunov(0.0, 0.0).unwrap(), 0.0);
        }
        assert_relative_eq!(sys[1].lyapunov(1.0, 2.0).unwrap(), 5.75, epsilon = 1e-14);
        assert_relative_eq!(sys[0].lyapunov(3.0, 4.0).unwrap(), 12.5, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_rate_examples() {
        let hy = TimeScaleSystem::hybrid(unit_gains(), 0.5).unwrap();
        let nl = TimeScaleSystem::nonlinear(1.0, 2.0, 0.5).unwrap();
        for z1 in [-3.0, 0.0, 2.5] {
            assert_eq!(hy.lyapunov_rate(z1, 0.0).unwrap(), 0.0);
            assert_eq!(nl.lyapunov_rate(z1, 0.0).unwrap(), 0.0);
            assert_relative_eq!(hy.lyapunov_rate(z1, 1.0).unwrap(), -2.0, epsilon = 1e-15);
            assert_relative_eq!(nl.lyapunov_rate(z1, 4.0).unwrap(), -16.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn rate_is_chain_rule_of_v() {
        // grad V . f, by central differences on V.
        let systems = [
            TimeScaleSystem::linear(2.0, 0.5).unwrap(),
            TimeScaleSystem::nonlinear(1.5, 0.7, 0.4).unwrap(),
            TimeScaleSystem::nonlinear_alt(1.0, 1.0, 0.6, 0.5).unwrap(),
            TimeScaleSystem::hybrid(unit_gains(), 0.5).unwrap(),
            TimeScaleSystem::hybrid_alt(unit_gains(), 0.5, 0.5).unwrap(),
        ];
        let d = 1e-6;
        for s in &systems {
            for &(z1, z2) in &[(1.3, -0.4), (-2.0, 1.1), (0.5, 3.0)] {
                let dv1 =
                    (s.lyapunov(z1 + d, z2).unwrap() - s.lyapunov(z1 - d, z2).unwrap()) / (2.0 * d);
                let dv2 =
                    (s.lyapunov(z1, z2 + d).unwrap() - s.lyapunov(z1, z2 - d).unwrap()) / (2.0 * d);
                let (f1, f2) = s.rhs(z1, z2).unwrap();
                let rate = s.lyapunov_rate(z1, z2).unwrap();
                assert_relative_eq!(
                    dv1 * f1 + dv2 * f2,
                    rate,
                    epsilon = 1e-6,
                    max_relative = 1e-6
                );
            }
        }
    }

    #[test]
    fn weights() {
        assert_eq!(homogeneity_weights(0.5, -1.0).unwrap(), (3.0, 2.0));
        assert_eq!(homogeneity_weights(0.5, -2.0).unwrap(), (6.0, 4.0));
        for alpha in [0.2, 0.5, 0.8] {
            let (_, r2) = homogeneity_weights(alpha, -(1.0 - alpha)).unwrap();
            assert_relative_eq!(r2, 1.0, epsilon = 1e-15);
        }
        assert!(homogeneity_weights(1.0, -1.0).is_err());
        assert!(homogeneity_weights(0.5, 1.0).is_err());
    }

    #[test]
    fn homogeneity_identity_holds() {
        let sys = TimeScaleSystem::nonlinear(1.0, 1.0, 0.5).unwrap();
        for lambda in [0.5, 2.0, 10.0] {
            let r = homogeneity_residual(&sys, -1.0, lambda, [0.8, -1.9]).unwrap();
            assert!(r < 1e-12, "{r}");
        }
        let lin = TimeScaleSystem::linear(1.0, 1.0).unwrap();
        assert!(homogeneity_residual(&lin, -1.0, 2.0, [1.0, 1.0]).is_err());
    }

    #[test]
    fn settling_examples() {
        let zero = RawTrajectory {
            h: 0.1,
            samples: (0..10).map(|i| (i as f64 * 0.1, [0.0, 0.0])).collect(),
        };
        assert_eq!(settling_time(&zero, 1e-3).unwrap(), Some(0.0));
        let empty = RawTrajectory::<2> {
            h: 0.1,
            samples: vec![],
        };
        assert!(settling_time(&empty, 1e-3).is_err());

        let lin = TimeScaleSystem::linear(1.0, 1.0).unwrap();
        let traj = lin.simulate([1.0, 0.0], 20.0, 1e-3).unwrap();
        assert_eq!(settling_time(&traj, 0.0).unwrap(), None);
    }

    #[test]
    fn nonlinear_settling_is_grid_independent() {
        let nl = TimeScaleSystem::nonlinear(1.0, 1.0, 0.5).unwrap();
        let coarse = settling_time(&nl.simulate([1.0, 0.0], 20.0, 1e-3).unwrap(), 1e-3)
            .unwrap()
            .expect("settles");
        let fine = settling_time(&nl.simulate([1.0, 0.0], 20.0, 5e-4).unwrap(), 1e-3)
            .unwrap()
            .expect("settles");
        assert!(coarse < 20.0);
        assert!((coarse - fine).abs() / fine < 0.05, "{coarse} vs {fine}");
    }

    #[test]
    fn dissipation_residuals() {
        let lin = TimeScaleSystem::linear(1.0, 1.0).unwrap();
        let traj = lin.simulate([3.0, -2.0], 20.0, 1e-3).unwrap();
        assert!(lin.dissipation_residual(&traj).unwrap() < 1e-6);
        assert!(lin.sampled_dissipation_residual(&traj).unwrap() < 1e-5);

        // |z1|^(4/3) in V: sample differences degrade at z1 sign changes
        let nl = TimeScaleSystem::nonlinear(1.0, 1.0, 0.5).unwrap();
        let traj = nl.simulate([3.0, -2.0], 20.0, 1e-3).unwrap();
        assert!(nl.dissipation_residual(&traj).unwrap() < 1e-5);
        assert!(nl.sampled_dissipation_residual(&traj).unwrap() > 1e-3);
    }
}
