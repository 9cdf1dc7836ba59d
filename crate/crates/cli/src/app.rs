//! Command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bdris::experiment::Experiment;
use clap::{Parser, Subcommand};

use crate::{apply_overrides, describe_issues, emit_plotdata, ensure_valid, load_config, run_experiment};

#[derive(Parser)]
#[command(name = "bdris", version, about = "Monte Carlo studies of frequency-dependent BD-RIS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run a named experiment and write its CSV tables.
    Run {
        /// freq-response, target-shift, per-bs-power, network-power or interference
        experiment: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory (default: output.dir from the config)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Set a config value, e.g. `--override circuit.bits=8`
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check a config file and list every problem.
    Validate { path: PathBuf },
    /// Split a results CSV into one `x mean stderr` file per curve.
    Plotdata {
        results: PathBuf,
        /// Output directory (default: next to the results file)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Executes one command. `Ok` carries the process exit code.
pub fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { experiment, config, seed, trials, out, overrides } => {
            let experiment: Experiment = experiment.parse()?;
            let mut loaded = load_config(config.as_deref())?;
            let mut all = overrides;
            if let Some(s) = seed {
                all.push(format!("simulation.seed={s}"));
            }
            if let Some(t) = trials {
                all.push(format!("simulation.trials={t}"));
            }
            apply_overrides(&mut loaded, &all)?;
            ensure_valid(&loaded)?;
            let out = out.unwrap_or_else(|| PathBuf::from(&loaded.config.output.dir));
            for p in run_experiment(experiment, &loaded.config, &out)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { path } => {
            let loaded = load_config(Some(&path))?;
            let issues = loaded.config.validate();
            if issues.is_empty() {
                println!("{}: valid", path.display());
                return Ok(ExitCode::SUCCESS);
            }
            for line in describe_issues(&loaded, &issues) {
                println!("{line}");
            }
            Ok(ExitCode::FAILURE)
        }
        Command::Plotdata { results, out } => {
            let dir = out.unwrap_or_else(|| results.parent().map(PathBuf::from).unwrap_or_default());
            for p in emit_plotdata(&results, &dir)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn cli(args: &[&str]) -> Result<ExitCode> {
        let mut v = vec!["bdris"];
        v.extend(args);
        execute(Cli::try_parse_from(v)?)
    }

    const TINY: &[&str] = &[
        "--trials",
        "2",
        "--override",
        "scenario.antennas=4",
        "--override",
        "freq_response.elements=[4]",
        "--override",
        "freq_response.grid={start_ghz = 7.0, stop_ghz = 8.0, step_ghz = 0.5}",
        "--override",
        "optimization.fw_iterations=10",
    ];

    fn run_tiny(out: &std::path::Path, extra: &[&str]) -> Result<ExitCode> {
        let mut args = vec!["run", "freq-response", "--out", out.to_str().unwrap()];
        if !extra.contains(&"--seed") {
            args.extend(["--seed", "7"]);
        }
        args.extend(TINY);
        args.extend(extra);
        cli(&args)
    }

    #[test]
    fn validate_reports_and_sets_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let shipped = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
        assert_eq!(cli(&["validate", shipped]).unwrap(), ExitCode::SUCCESS);

        let bad = dir.path().join("bad.toml");
        fs::write(&bad, "[optimization]\ngroups = 3\n\n[circuit]\nself_range_pf = [2.0, 0.1]\n").unwrap();
        assert_eq!(cli(&["validate", bad.to_str().unwrap()]).unwrap(), ExitCode::FAILURE);

        assert!(cli(&["validate", dir.path().join("missing.toml").to_str().unwrap()]).is_err());
    }

    #[test]
    fn run_rejects_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let err = cli(&["run", "fig-4", "--out", dir.path().to_str().unwrap()]).unwrap_err().to_string();
        assert!(err.contains("unknown experiment"), "{err}");
        let err = run_tiny(dir.path(), &["--override", "optimization.groups=3"]).unwrap_err().to_string();
        assert!(err.contains("G must divide D"), "{err}");
        assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
    }

    #[test]
    fn run_writes_deterministic_csv() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_tiny(a.path(), &[]).unwrap();
        run_tiny(b.path(), &[]).unwrap();
        let fa = fs::read(a.path().join("freq-response-d4.csv")).unwrap();
        assert_eq!(fa, fs::read(b.path().join("freq-response-d4.csv")).unwrap());
        let text = String::from_utf8(fa).unwrap();
        assert!(text.contains("# seed: 7\n# trials: 2\n"));

        let c = tempfile::tempdir().unwrap();
        run_tiny(c.path(), &["--seed", "8"]).unwrap();
        assert_ne!(text, fs::read_to_string(c.path().join("freq-response-d4.csv")).unwrap());

        let d = tempfile::tempdir().unwrap();
        run_tiny(d.path(), &["--override", "simulation.seed=8"]).unwrap();
        assert_eq!(text, fs::read_to_string(d.path().join("freq-response-d4.csv")).unwrap());
    }

    #[test]
    fn plotdata_command_splits_curves() {
        let dir = tempfile::tempdir().unwrap();
        run_tiny(dir.path(), &[]).unwrap();
        let plots = dir.path().join("plots");
        let csv = dir.path().join("freq-response-d4.csv");
        cli(&["plotdata", csv.to_str().unwrap(), "--out", plots.to_str().unwrap()]).unwrap();
        assert_eq!(fs::read_dir(&plots).unwrap().count(), 3);
    }
}
