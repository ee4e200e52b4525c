use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use phia::scenario::{self, Scenario, ScenarioError};
use phia::verify::{self, Suite};

/// Exit codes.
const OK: u8 = 0;
const CHECK_FAILED: u8 = 1;
const PARSE_ERROR: u8 = 2;
const SEMANTIC_ERROR: u8 = 3;
const RUNTIME_ERROR: u8 = 4;

#[derive(Parser)]
#[command(name = "phia", version, about = "Validate and run integral-action scenarios, run verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print a report.
    Validate {
        path: PathBuf,
        /// Override a config value, e.g. `integrator.step=5e-4`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run a scenario, write its outputs and print a summary.
    Run {
        path: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Directory for CSV and gnuplot outputs.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a built-in verification suite.
    Verify {
        #[arg(default_value = "all", value_parser = Suite::NAMES)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(path: &Path, set: &[String]) -> Result<Scenario, u8> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        PARSE_ERROR
    })?;
    Scenario::load(&text, set).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            ScenarioError::Parse(_) => PARSE_ERROR,
            ScenarioError::Invalid(_) => SEMANTIC_ERROR,
        }
    })
}

fn run(path: &Path, set: &[String], out: &Path) -> Result<(), u8> {
    let sc = load(path, set)?;
    let output = sc.run().map_err(|e| {
        eprintln!("error: run failed: {e}");
        RUNTIME_ERROR
    })?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> std::io::Result<()> {
        fs::create_dir_all(out)?;
        if let Some(name) = &sc.config.outputs.csv {
            let p = out.join(name);
            written.push(p.clone());
            let file = fs::File::create(&p)?;
            output.trajectory.write_csv(std::io::BufWriter::new(file))?;
        }
        if let Some(name) = &sc.config.outputs.gnuplot {
            let csv = sc.config.outputs.csv.as_deref().unwrap_or("trajectory.csv");
            let p = out.join(name);
            written.push(p.clone());
            fs::write(&p, scenario::gnuplot_script(csv, output.trajectory.layout))?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        eprintln!("error: writing outputs: {e}");
        return Err(RUNTIME_ERROR);
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    print!("{}", output.summary);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PHIA_LOG", "off")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { path, set } => match load(&path, &set) {
            Ok(sc) => {
                println!("{}", sc.report());
                OK
            }
            Err(code) => code,
        },
        Command::Run { path, set, out } => match run(&path, &set, &out) {
            Ok(()) => OK,
            Err(code) => code,
        },
        Command::Verify { suite, seed } => {
            let suite: Suite = suite.parse().expect("clap restricts suite names");
            match verify::run(suite, seed) {
                Ok(report) => {
                    println!("{report}");
                    for c in report.failures() {
                        error!("failed check: {} {} {}", c.suite, c.system, c.name);
                    }
                    if report.all_passed() {
                        OK
                    } else {
                        CHECK_FAILED
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    CHECK_FAILED
                }
            }
        }
    };
    ExitCode::from(code)
}
