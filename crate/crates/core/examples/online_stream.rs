//! Sample-by-sample differentiation of a noisy 10 kHz signal.

use rapid_diff::{
    DiffState, DifferentiatorConfig, GainSchedule, Gains, Noise, OnlineDifferentiator, TestSignal,
};

fn main() -> rapid_diff::Result<()> {
    let gains = Gains {
        a10: 5.0,
        a11: 0.5,
        a20: 2.0,
        a21: 0.5,
    };
    let cfg = DifferentiatorConfig::hybrid_alt(gains, 0.5, 0.5, GainSchedule::ramp(6000.0, 0.05)?)?;
    let mut online = OnlineDifferentiator::new(cfg, DiffState::default(), 1e-5)?;
    let signal = TestSignal::sine(1.0, 1.0, 0.0)?.with_noise(Noise::new(1e-5, 7, 1e-4)?);
    for k in 0..=20_000 {
        let t = k as f64 * 1e-4;
        let est = online.push(t, signal.value(t)?)?;
        if k % 2_500 == 0 {
            println!("t = {t:.2}  x2 = {:+.5}  cos t = {:+.5}", est.x2, t.cos());
        }
    }
    Ok(())
}
