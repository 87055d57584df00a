//! Linear, nonlinear and hybrid high-gain differentiators.
//!
//! A differentiator tracks a signal `v(t)` with state `(x1, x2)`, where `x2`
//! estimates `v'(t)`:
//!
//! ```text
//! x1' = x2
//! x2' = g^2 f(x1 - v, x2 / g)
//! ```
//!
//! with gain `g = 1/eps`, fixed or ramped. The hybrid field combines the
//! linear terms, which dominate far from the origin, with fractional-power
//! terms that give finite-time convergence near it.
//!
//! ```
//! use rapid_diff::{simulate, DiffState, DifferentiatorConfig, GainSchedule, Gains};
//! use rapid_diff::{IntegratorSpec, SimOptions, TestSignal};
//!
//! let gains = Gains { a10: 5.0, a11: 0.5, a20: 2.0, a21: 0.5 };
//! let cfg = DifferentiatorConfig::hybrid(gains, 0.5, GainSchedule::fixed(300.0)?)?;
//! let traj = simulate(
//!     &cfg,
//!     &TestSignal::sine(1.0, 1.0, 0.0)?,
//!     (0.0, 1.0),
//!     IntegratorSpec::rk4(1e-5)?,
//!     DiffState::default(),
//!     SimOptions::default(),
//! )?;
//! let last = traj.samples.last().unwrap();
//! assert!((last.x2 - 1f64.cos()).abs() < 1e-2);
//! # Ok::<(), rapid_diff::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod differentiator;
pub mod error;
pub mod experiment;
pub mod format;
pub mod integrate;
pub mod metrics;
pub mod reference;
pub mod signals;

pub use differentiator::{
    sig, DiffState, DifferentiatorConfig, Dynamics, Exponent, GainSchedule, Gains, ObserverForm,
    Variant,
};
pub use error::{Error, Result};
pub use integrate::{
    simulate, simulate_observer, simulate_raw, IntegratorSpec, Method, OnlineDifferentiator,
    Retention, SimOptions, Trajectory,
};
pub use metrics::{MetricsOptions, MetricsReport};
pub use reference::TimeScaleSystem;
pub use signals::{Noise, TestSignal};
