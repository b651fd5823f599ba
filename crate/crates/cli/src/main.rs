use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use drdcbf::plot::Boundary;
use drdcbf::{cmd_plot, cmd_simulate, cmd_verify, load_scenario, summary_line, Failure, Overrides};

#[derive(Parser)]
#[command(name = "drdcbf", version, about = "Dual-relative-degree CBF scenarios: simulate, sweep, verify, plot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file, or the name of a bundled scenario.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, dt: self.dt, horizon: self.horizon }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every initial state of a scenario in order.
    Simulate(Common),
    /// Run every initial state concurrently.
    Sweep(Common),
    /// Run the verification suites declared in the scenario.
    Verify(Common),
    /// Draw the output path and certificate channels from trajectory CSVs.
    Plot {
        files: Vec<PathBuf>,
        /// Scenario whose safe set is drawn on the path plot.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the bundled scenarios.
    List,
}

fn simulate(c: &Common, parallel: bool) -> Result<(), Failure> {
    let sc = load_scenario(&c.config, c.overrides())?;
    let outcome = cmd_simulate(&sc, &c.out, parallel)?;
    for (s, _) in &outcome.filtered {
        println!("{}", summary_line(s));
    }
    for (s, _) in &outcome.unfiltered {
        println!("{} (unfiltered)", summary_line(s));
    }
    if outcome.monitors_pass() {
        Ok(())
    } else {
        Err(Failure::Check("safety monitor failed".into()))
    }
}

fn verify(c: &Common) -> Result<(), Failure> {
    let sc = load_scenario(&c.config, c.overrides())?;
    let (report, path) = cmd_verify(&sc, &c.out)?;
    for s in &report.suites {
        let name = serde_json::to_value(s).ok().and_then(|v| v["suite"].as_str().map(String::from)).unwrap_or_default();
        println!("{name}: {}", if s.passed() { "pass" } else { "FAIL" });
    }
    println!("report: {}", path.display());
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Check("verification failed".into()))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(c) => simulate(&c, false),
        Command::Sweep(c) => simulate(&c, true),
        Command::Verify(c) => verify(&c),
        Command::Plot { files, config, out } => {
            let boundary = match config {
                Some(p) => Boundary::from_spec(&load_scenario(&p, Overrides::default())?.h0),
                None => None,
            };
            for p in cmd_plot(&files, boundary.as_ref(), &out)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::List => {
            for (name, _) in drdcbf::BUNDLED {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
