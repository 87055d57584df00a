//! Tracking the left and right derivatives of a triangular wave.

use rapid_diff::experiment::{cmd_run, Preset};

fn main() -> rapid_diff::Result<()> {
    let mut d = Preset::HybridSec6.draft();
    d.signal_kind = "triangular".into();
    d.period = 2.0 * std::f64::consts::PI;
    d.h = 1e-5;
    let cfg = d.build()?;
    let traj = cmd_run(&cfg, None)?.trajectory;
    for c in cfg.signal.corners(0.0, cfg.horizon)? {
        let before = traj.since(c.t - 0.05)[0];
        let after = traj.since(c.t + 0.05)[0];
        println!(
            "corner t = {:.4}: slope {:+.4} -> {:+.4}, x2 {:+.4} -> {:+.4}",
            c.t, c.left, c.right, before.x2, after.x2
        );
    }
    Ok(())
}
