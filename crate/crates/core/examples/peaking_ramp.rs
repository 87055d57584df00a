//! A ramped gain reduces the initial peaking of a high-gain differentiator.

use rapid_diff::experiment::{cmd_run, Preset};

fn main() -> rapid_diff::Result<()> {
    for (label, ramp) in [("fixed g = 300", false), ("ramp to 300 over 0.05 s", true)] {
        let mut d = Preset::LinearSec6.draft();
        d.offset = 1.0;
        d.horizon = 0.2;
        d.h = 1e-6;
        if ramp {
            d.gain_mode = "ramp".into();
            d.mu = 6000.0;
            d.t_max = 0.05;
        }
        let report = cmd_run(&d.build()?, None)?.report;
        println!(
            "{label:>24}: peak |x2| over first 0.1 s = {:.2}",
            report.peak_transient
        );
    }
    Ok(())
}
