//! Fixed-step RK4 against adaptive RK45 on the cart-pendulum scenario,
//! compared at t = 35 s while the post-step transient is under way.

use phia::linalg;
use phia::scenario::{Scenario, FIG1_TOML};

fn final_state(overrides: &[&str]) -> Result<(phia::Vector, usize), Box<dyn std::error::Error>> {
    let mut overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    overrides.push("integrator.t_final=35.0".into());
    let traj = Scenario::load(FIG1_TOML, &overrides)?.run()?.trajectory;
    Ok((traj.states[traj.len() - 1].clone(), traj.len()))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (reference, n_ref) = final_state(&["integrator.step=5e-4"])?;
    println!("reference: fixed RK4, h = 5e-4 ({n_ref} samples)");
    let mut previous: Option<f64> = None;
    for step in ["8e-3", "4e-3", "2e-3", "1e-3"] {
        let (x, n) = final_state(&[&format!("integrator.step={step}")])?;
        let err = linalg::max_abs_vec(&(x - &reference));
        let ratio = previous.map(|p| format!(", error ratio {:.1}", p / err)).unwrap_or_default();
        println!("fixed RK4 h = {step:>5}: {n:>6} samples, |x(35) − ref| = {err:.3e}{ratio}");
        previous = Some(err);
    }
    for tol in ["1e-6", "1e-8", "1e-10"] {
        let (x, n) = final_state(&["integrator.method=\"adaptive-rk45\"", &format!("integrator.rel_tol={tol}"), &format!("integrator.abs_tol={tol}")])?;
        println!("adaptive RK45 tol = {tol:>5}: {n:>6} samples, |x(35) − ref| = {:.3e}", linalg::max_abs_vec(&(x - &reference)));
    }
    Ok(())
}
