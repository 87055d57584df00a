//! Analytic versus simulated frequency response of the linear differentiator.

use rapid_diff::experiment::cmd_freq;

fn main() -> rapid_diff::Result<()> {
    let rows = cmd_freq(
        5.0,
        2.0,
        1.0 / 300.0,
        &[0.5, 1.0, 5.0, 50.0, 300.0],
        Some(1e-5),
        None,
    )?;
    println!(
        "{:>7} {:>10} {:>10} {:>10} {:>10}",
        "omega", "|H|", "arg H", "sim |H|", "sim arg"
    );
    for r in rows {
        println!(
            "{:>7} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            r.omega, r.magnitude, r.phase, r.sim_magnitude, r.sim_phase
        );
    }
    Ok(())
}
