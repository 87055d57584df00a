//! Convergence, Lyapunov dissipation and homogeneity of the time-scale systems.

use rapid_diff::experiment::{cmd_lemma, random_inits, LemmaOptions, LemmaSystem};
use rapid_diff::reference::{homogeneity_residual, homogeneity_weights};
use rapid_diff::TimeScaleSystem;

fn main() -> rapid_diff::Result<()> {
    let inits = random_inits(5, 42);
    for sys in [
        LemmaSystem::Linear,
        LemmaSystem::Nonlinear { alpha: 0.5 },
        LemmaSystem::Hybrid { alpha: 0.5 },
    ] {
        let report = cmd_lemma(sys, &inits, &LemmaOptions::default(), 42, None)?;
        let worst = report
            .rows
            .iter()
            .filter_map(|r| r.settling_time)
            .fold(0.0, f64::max);
        println!(
            "{sys:?}: passed = {}, slowest settling = {worst:.3}",
            report.passed
        );
    }

    let nl = TimeScaleSystem::nonlinear(1.0, 1.0, 0.5)?;
    let (r1, r2) = homogeneity_weights(0.5, -1.0)?;
    let resid = homogeneity_residual(&nl, -1.0, 2.0, [0.7, -1.3])?;
    println!("dilation weights ({r1}, {r2}); residual at lambda = 2: {resid:.1e}");
    Ok(())
}
