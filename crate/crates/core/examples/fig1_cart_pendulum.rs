//! Runs the bundled cart-pendulum scenario and writes its CSV trace and
//! gnuplot script.
//!
//! `cargo run --release --example fig1_cart_pendulum -- [OUT_DIR]`

use std::fs;
use std::path::PathBuf;

use phia::scenario::{gnuplot_script, Scenario, FIG1_TOML};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fig1-output".into()));
    let scenario = Scenario::load(FIG1_TOML, &[])?;
    println!("{}\n", scenario.report());

    let run = scenario.run()?;
    print!("{}", run.summary);

    fs::create_dir_all(&out)?;
    let csv = out.join("fig1.csv");
    run.trajectory.write_csv(std::io::BufWriter::new(fs::File::create(&csv)?))?;
    fs::write(out.join("fig1.gp"), gnuplot_script("fig1.csv", run.trajectory.layout))?;
    println!("\nwrote {} ({} rows); plot with `cd {} && gnuplot -p fig1.gp`", csv.display(), run.trajectory.len(), out.display());
    Ok(())
}
