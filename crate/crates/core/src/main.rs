//! Command-line front end: `run`, `certify`, `rate`, `sweep`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use netnewton::cli::{
    self, certify, format_summary_table, format_sweep_table, parse_grid, rate_report,
    run_experiment, run_sweep, ExperimentConfig,
};

const USAGE: &str = "\
netnewton — distributed Newton-type optimization simulator with momentum

USAGE:
    netnewton run <config>                      run the configured experiment
    netnewton certify <config> --alpha A --beta B
                                                judge (alpha, beta) against the
                                                convergence certificate
    netnewton rate <trace.csv>                  fit the observed linear rate
    netnewton sweep <config> --grid <file>      run a hyperparameter grid

The NETNEWTON_OUTPUT_DIR environment variable overrides output_dir.
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: &str) -> Result<ExperimentConfig, cli::CliError> {
    let mut cfg = ExperimentConfig::load(Path::new(path))?;
    cfg.apply_env_override();
    Ok(cfg)
}

fn flag_value(args: &[String], flag: &str) -> Option<String> {
    args.iter().position(|a| a == flag).and_then(|i| args.get(i + 1)).cloned()
}

fn dispatch(args: &[String]) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match args.first().map(String::as_str) {
        Some("run") => {
            let path = args.get(1).ok_or("run needs a config path")?;
            let cfg = load_config(path)?;
            let outcome = run_experiment(&cfg)?;
            print!("{}", format_summary_table(&outcome));
            println!("artifacts: {}", outcome.output_dir.display());
            if outcome.any_diverged {
                eprintln!("warning: at least one run diverged");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Some("certify") => {
            let path = args.get(1).ok_or("certify needs a config path")?;
            let alpha: f64 = flag_value(args, "--alpha")
                .ok_or("certify needs --alpha")?
                .parse()
                .map_err(|_| "bad --alpha value")?;
            let beta: f64 = flag_value(args, "--beta")
                .ok_or("certify needs --beta")?
                .parse()
                .map_err(|_| "bad --beta value")?;
            let cfg = load_config(path)?;
            let report = certify(&cfg, alpha, beta)?;
            print!("{}", report.render());
            Ok(ExitCode::SUCCESS)
        }
        Some("rate") => {
            let path = args.get(1).ok_or("rate needs a trace path")?;
            let report = rate_report(&PathBuf::from(path))?;
            print!("{}", report.render());
            Ok(ExitCode::SUCCESS)
        }
        Some("sweep") => {
            let path = args.get(1).ok_or("sweep needs a config path")?;
            let grid_path = flag_value(args, "--grid").ok_or("sweep needs --grid <file>")?;
            let cfg = load_config(path)?;
            let grid_text = std::fs::read_to_string(&grid_path)?;
            let grid = parse_grid(&grid_text)?;
            let entries = run_sweep(&cfg, &grid)?;
            print!("{}", format_sweep_table(&entries, cfg.max_rounds));
            Ok(ExitCode::SUCCESS)
        }
        Some("--help") | Some("-h") | None => {
            print!("{USAGE}");
            Ok(ExitCode::SUCCESS)
        }
        Some(other) => Err(format!("unknown verb {other:?}\n\n{USAGE}").into()),
    }
}
