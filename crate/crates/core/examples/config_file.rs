//! Building an experiment from flat `section.key = value` text.

use rapid_diff::experiment::{cmd_run, ConfigDraft};

const CONFIG: &str = "\
preset = hybrid-sec6
signal.kind = polynomial
signal.coefficients = 0 1 0 -0.5
noise.amplitude = 1e-7
noise.period = 1e-3
noise.seed = 3
run.horizon = 0.5
integrator.h = 1e-5
";

fn main() -> rapid_diff::Result<()> {
    let mut draft = ConfigDraft::default();
    draft.apply_text(CONFIG, "inline")?;
    let run = cmd_run(&draft.build()?, None)?;
    print!("{}", run.report.to_key_value());
    Ok(())
}
