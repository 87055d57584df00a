//! Command-line front end. Exit codes: 0 success, 1 I/O, 2 validation,
//! 3 numerical failure; `lemma` also exits 3 when a check fails.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiment::commands::{compare_csv, freq_csv, lemma_summary, sweep_fit_text};
use crate::experiment::config::parse_retention;
use crate::experiment::{
    cmd_compare, cmd_freq, cmd_lemma, cmd_run, cmd_stream, cmd_sweep, random_inits, ConfigDraft,
    ExperimentConfig, LemmaOptions, LemmaSystem, Preset,
};
use crate::format::float;

#[derive(Debug, Parser)]
#[command(
    name = "rapid-diff",
    version,
    about = "High-gain differentiator experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `section.key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset, applied before any config file.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integration step.
    #[arg(long)]
    h: Option<f64>,
    /// Simulated duration.
    #[arg(long)]
    horizon: Option<f64>,
    /// Retained-sample stride: a positive integer, `auto` or `full`.
    #[arg(long)]
    decimate: Option<String>,
    /// Noise and initial-condition seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn draft(&self) -> Result<ConfigDraft> {
        let mut draft = match &self.preset {
            Some(name) => name.parse::<Preset>()?.draft(),
            None if self.config.is_none() => Preset::HybridSec6.draft(),
            None => ConfigDraft::default(),
        };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            draft.apply_text(&text, &path.display().to_string())?;
        }
        self.overrides(&mut draft)?;
        Ok(draft)
    }

    fn overrides(&self, draft: &mut ConfigDraft) -> Result<()> {
        if let Some(h) = self.h {
            draft.h = h;
        }
        if let Some(t) = self.horizon {
            draft.horizon = t;
        }
        if let Some(d) = &self.decimate {
            draft.retention = parse_retention(d)?;
        }
        if let Some(seed) = self.seed {
            draft.noise_seed = seed;
        }
        Ok(())
    }

    fn build(&self) -> Result<ExperimentConfig> {
        self.draft()?.build()
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one configuration; writes trajectory.csv and report.txt.
    Run(Common),
    /// Run several presets or config files concurrently; writes compare.csv.
    Compare {
        /// Presets to compare (repeatable).
        #[arg(long = "preset")]
        presets: Vec<String>,
        /// Config files to compare (repeatable).
        #[arg(long = "config")]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        decimate: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Steady-state error against epsilon; writes sweep.csv and sweep_fit.txt.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated epsilon values (at least three).
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
    },
    /// Convergence and Lyapunov checks on a unit-gain time-scale system.
    Lemma {
        /// linear, nonlinear, nonlinear-alt, hybrid or hybrid-alt.
        #[arg(long, default_value = "hybrid")]
        system: String,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha1: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha2: f64,
        /// Initial condition `z1,z2` (repeatable); random when absent.
        #[arg(long = "init", value_parser = parse_pair)]
        inits: Vec<[f64; 2]>,
        /// Number of random initial conditions.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic and simulated frequency response of the linear differentiator.
    Freq {
        #[arg(long, default_value_t = 5.0)]
        a10: f64,
        #[arg(long, default_value_t = 2.0)]
        a20: f64,
        #[arg(long, default_value_t = 1.0 / 300.0)]
        epsilon: f64,
        /// Comma-separated angular frequencies.
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,5")]
        omega: Vec<f64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Differentiate a `t,v` CSV sample by sample; writes `t,x2` rows.
    Stream {
        #[command(flatten)]
        common: Common,
        /// Input CSV; `-` for stdin.
        #[arg(long)]
        input: PathBuf,
        /// Expected sampling rate in Hz.
        #[arg(long)]
        sample_rate: Option<f64>,
        /// Output CSV; stdout when absent and no --out is given.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected z1,z2, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok([p(a)?, p(b)?])
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn stdout_write(s: &str) {
    let _ = io::stdout().lock().write_all(s.as_bytes());
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Run(common) => {
            let cfg = common.build()?;
            let out = cmd_run(&cfg, common.out.as_deref())?;
            stdout_write(&out.report.to_key_value());
            Ok(0)
        }
        Command::Compare {
            presets,
            configs,
            out,
            h,
            horizon,
            decimate,
            seed,
        } => {
            let mut cfgs = Vec::new();
            let base = |preset: Option<String>, config: Option<PathBuf>| Common {
                config,
                preset,
                out: None,
                h,
                horizon,
                decimate: decimate.clone(),
                seed,
            };
            for p in presets {
                cfgs.push(base(Some(p), None).build()?);
            }
            for c in configs {
                cfgs.push(base(None, Some(c)).build()?);
            }
            let reports = cmd_compare(&cfgs, out.as_deref())?;
            stdout_write(&compare_csv(&reports));
            Ok(0)
        }
        Command::Sweep { common, epsilons } => {
            let cfg = common.build()?;
            let sweep = cmd_sweep(&cfg, &epsilons, common.out.as_deref())?;
            stdout_write(&sweep_fit_text(&sweep.order));
            Ok(0)
        }
        Command::Lemma {
            system,
            alpha,
            alpha1,
            alpha2,
            inits,
            count,
            seed,
            horizon,
            h,
            out,
        } => {
            let kind = LemmaSystem::parse(&system, alpha, alpha1, alpha2)?;
            let inits = if inits.is_empty() {
                random_inits(count, seed)
            } else {
                inits
            };
            let opts = LemmaOptions {
                horizon,
                h,
                ..LemmaOptions::default()
            };
            let report = cmd_lemma(kind, &inits, &opts, seed, out.as_deref())?;
            stdout_write(&lemma_summary(&report));
            Ok(if report.passed { 0 } else { 3 })
        }
        Command::Freq {
            a10,
            a20,
            epsilon,
            omega,
            h,
            out,
        } => {
            let rows = cmd_freq(a10, a20, epsilon, &omega, h, out.as_deref())?;
            stdout_write(&freq_csv(&rows));
            Ok(0)
        }
        Command::Stream {
            common,
            input,
            sample_rate,
            output,
        } => {
            let cfg = common.build()?;
            let name = input.display().to_string();
            let output = output.or_else(|| common.out.as_ref().map(|d| d.join("stream.csv")));
            let summary = match output {
                Some(path) => {
                    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    }
                    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                    stream_from(&cfg, &input, &name, sample_rate, file)?
                }
                None => stream_from(&cfg, &input, &name, sample_rate, io::stdout().lock())?,
            };
            eprintln!(
                "streamed {} samples; final x2 = {}",
                summary.samples,
                float(summary.final_state.x2)
            );
            Ok(0)
        }
    }
}

fn stream_from<W: Write>(
    cfg: &ExperimentConfig,
    input: &Path,
    name: &str,
    rate: Option<f64>,
    out: W,
) -> Result<crate::experiment::StreamSummary> {
    if input == Path::new("-") {
        cmd_stream(cfg, io::stdin().lock(), name, rate, out)
    } else {
        let file = fs::File::open(input).map_err(|e| Error::io(input, e))?;
        cmd_stream(cfg, BufReader::new(file), name, rate, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_subcommand() {
        for args in [
            vec![
                "rapid-diff",
                "run",
                "--preset",
                "linear-sec6",
                "--h",
                "1e-5",
            ],
            vec!["rapid-diff", "compare", "--preset", "a", "--preset", "b"],
            vec!["rapid-diff", "sweep", "--epsilons", "0.01,0.005,0.0025"],
            vec![
                "rapid-diff",
                "lemma",
                "--system",
                "linear",
                "--init",
                "1,-2",
            ],
            vec!["rapid-diff", "freq", "--omega", "1,2"],
            vec![
                "rapid-diff",
                "stream",
                "--input",
                "-",
                "--sample-rate",
                "1000",
            ],
        ] {
            Cli::try_parse_from(args.clone()).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        }
    }

    #[test]
    fn validation_exit_codes() {
        assert_eq!(run(["rapid-diff", "run", "--preset", "nope"]), 2);
        assert_eq!(run(["rapid-diff", "run", "--h", "0.01"]), 2);
        assert_eq!(run(["rapid-diff", "bogus"]), 2);
        assert_eq!(run(["rapid-diff", "lemma", "--init", "1"]), 2);
    }
}
