//! Hybrid differentiator tracking the derivative of sin t.

use rapid_diff::{simulate, DiffState, DifferentiatorConfig, GainSchedule, Gains};
use rapid_diff::{IntegratorSpec, Retention, SimOptions, TestSignal};

fn main() -> rapid_diff::Result<()> {
    let gains = Gains {
        a10: 5.0,
        a11: 0.5,
        a20: 2.0,
        a21: 0.5,
    };
    let cfg = DifferentiatorConfig::hybrid_alt(
        gains,
        0.5,
        0.5,
        GainSchedule::from_epsilon(1.0 / 300.0)?,
    )?;
    let traj = simulate(
        &cfg,
        &TestSignal::sine(1.0, 1.0, 0.0)?,
        (0.0, 2.0),
        IntegratorSpec::rk4(1e-5)?,
        DiffState::default(),
        SimOptions {
            retention: Retention::Every(20_000),
            ..SimOptions::default()
        },
    )?;
    println!("{:>6} {:>12} {:>12} {:>10}", "t", "x2", "cos t", "error");
    for s in &traj.samples {
        println!(
            "{:>6.2} {:>12.6} {:>12.6} {:>10.2e}",
            s.t, s.x2, s.vdot, s.e2
        );
    }
    Ok(())
}
