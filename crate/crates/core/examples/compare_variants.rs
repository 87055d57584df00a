//! Linear, nonlinear and hybrid presets side by side.

use rapid_diff::experiment::{cmd_compare, Preset};
use rapid_diff::MetricsReport;

fn main() -> rapid_diff::Result<()> {
    let cfgs: Vec<_> = [
        Preset::LinearSec6,
        Preset::NonlinearSec6,
        Preset::HybridSec6,
    ]
    .iter()
    .map(|p| {
        let mut d = p.draft();
        d.horizon = 1.0;
        d.h = 1e-5;
        d.build()
    })
    .collect::<rapid_diff::Result<_>>()?;
    let reports = cmd_compare(&cfgs, None)?;
    println!("{}", MetricsReport::CSV_HEADER);
    for r in &reports {
        println!("{}", r.to_csv_row());
    }
    Ok(())
}
