//! Steady-state error of the linear differentiator scales like eps.

use rapid_diff::experiment::{cmd_sweep, Preset};

fn main() -> rapid_diff::Result<()> {
    let mut d = Preset::LinearSec6.draft();
    d.h = 1e-5;
    d.horizon = 2.0;
    let sweep = cmd_sweep(
        &d.build()?,
        &[1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0, 1.0 / 800.0],
        None,
    )?;
    for row in &sweep.rows {
        println!(
            "eps = {:.6}  h = {:.2e}  steady-state error = {:.4e}",
            row.epsilon, row.h, row.steady_state_error
        );
    }
    println!("log-log slope = {:.4}", sweep.order.slope);
    Ok(())
}
