use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quadpcac::sim::{emit_outputs, run_scenario, sweep, RunError, Scenario};

#[derive(Parser)]
#[command(name = "quadpcac", version, about = "Closed-loop PCAC quadrotor simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV trace and plots.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Run a scenario once per value of a dotted parameter path.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        no_plots: bool,
    },
    /// Run the built-in oracle checks.
    Verify,
}

const EXIT_FAULT: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn summarize(scenario: &Scenario, trace: &quadpcac::sim::Trace) {
    let end = scenario.duration;
    let start = (end / 2.0).max(end - 10.0);
    let rms = trace.rms_tracking_error(start, end);
    let lambda_min = trace.records.iter().map(|r| r.lambda).fold(1.0, f64::min);
    let slack = trace.records.iter().map(|r| r.slack_max).fold(0.0, f64::max);
    println!(
        "{}: {} steps, RMS error over [{start}, {end}] s = [{:.4}, {:.4}, {:.4}] m, min lambda {:.3}, max slack {:.2e}",
        scenario.name,
        trace.len(),
        rms[0],
        rms[1],
        rms[2],
        lambda_min,
        slack
    );
}

fn report_failure(name: &str, err: &RunError, out: &Path) -> u8 {
    match err {
        RunError::Config(e) => {
            eprintln!("{name}: {e}");
            EXIT_CONFIG
        }
        RunError::Aborted(a) => {
            eprintln!("{name}: {a}");
            let path = out.join(format!("{name}_partial.csv"));
            let saved = std::fs::create_dir_all(out)
                .map_err(|e| e.to_string())
                .and_then(|_| a.trace.save_csv(&path).map_err(|e| e.to_string()));
            match saved {
                Ok(()) => eprintln!("partial trace written to {}", path.display()),
                Err(e) => eprintln!("{e}"),
            }
            EXIT_FAULT
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            no_plots,
        } => {
            let mut s = match Scenario::from_file(&scenario) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if let Some(seed) = seed {
                s.seed = seed;
            }
            match run_scenario(&s) {
                Ok(trace) => {
                    summarize(&s, &trace);
                    match emit_outputs(&trace, &s, &out, !no_plots) {
                        Ok(files) => {
                            for f in files {
                                println!("wrote {}", f.display());
                            }
                            ExitCode::SUCCESS
                        }
                        Err(e) => {
                            eprintln!("{e}");
                            ExitCode::from(EXIT_FAULT)
                        }
                    }
                }
                Err(e) => ExitCode::from(report_failure(&s.name, &e, &out)),
            }
        }
        Command::Sweep {
            scenario,
            param,
            values,
            out,
            no_plots,
        } => {
            let text = match std::fs::read_to_string(&scenario) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", scenario.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let mut code = 0u8;
            for (value, result) in sweep(&text, &param, &values) {
                match result {
                    Ok((s, trace)) => {
                        summarize(&s, &trace);
                        if let Err(e) = emit_outputs(&trace, &s, &out, !no_plots) {
                            eprintln!("{e}");
                            code = code.max(EXIT_FAULT);
                        }
                    }
                    Err(e) => {
                        let label = format!("{param}={value}").replace(['/', '\\'], "_");
                        code = code.max(report_failure(&label, &e, &out));
                    }
                }
            }
            ExitCode::from(code)
        }
        Command::Verify => {
            let checks = quadpcac::verify::run_oracle_suite();
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAULT)
            }
        }
    }
}
