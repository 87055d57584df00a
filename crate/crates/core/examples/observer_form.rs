//! The linear differentiator in canonical and observer coordinates.

use rapid_diff::{simulate, simulate_observer, DiffState, DifferentiatorConfig, GainSchedule};
use rapid_diff::{IntegratorSpec, Retention, SimOptions, TestSignal};

fn main() -> rapid_diff::Result<()> {
    let cfg = DifferentiatorConfig::linear(5.0, 2.0, GainSchedule::fixed(300.0)?)?;
    let form = cfg.observer_form().expect("fixed-gain linear");
    println!(
        "observer gains a1 = {}, a2 = {}, eps = {:.6}",
        form.a1, form.a2, form.epsilon
    );
    let signal = TestSignal::sine(1.0, 1.0, 0.0)?;
    let opts = SimOptions {
        retention: Retention::Full,
        ..SimOptions::default()
    };
    let spec = IntegratorSpec::rk4(1e-5)?;
    let a = simulate(&cfg, &signal, (0.0, 1.0), spec, DiffState::default(), opts)?;
    let b = simulate_observer(&cfg, &signal, (0.0, 1.0), spec, DiffState::default(), opts)?;
    let gap = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (x.x2 - y.x2).abs())
        .fold(0.0, f64::max);
    println!("sup |x2 - x2_w| over 1 s = {gap:.2e}");
    Ok(())
}
