//! Samples the Lyapunov function `𝒲` and its analytic rate along the
//! cart-pendulum run, once per second.

use phia::ia::ClosedLoopState;
use phia::scenario::{Scenario, FIG1_TOML};
use phia::{CartPendulum, IaController};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::load(FIG1_TOML, &[])?;
    let ctrl = IaController::new(scenario.built.transform.clone(), CartPendulum::fig1_gains()?)?;
    let traj = scenario.run()?.trajectory;

    println!("{:>5} {:>14} {:>14} {:>12} {:>8}", "t", "W", "dW/dt", "|y_p1|", "d");
    for k in (0..traj.len()).step_by(1000) {
        let x = ClosedLoopState::from_vector(&traj.states[k], traj.layout.n, traj.layout.m);
        let d = &traj.disturbances[k];
        let rate = ctrl.lyapunov_rate(&x, d)?;
        let y = ctrl.detectability_output(&x, d)?.norm();
        println!("{:>5.1} {:>14.6e} {:>14.6e} {:>12.3e} {:>8.2}", traj.times[k], traj.w[k], rate, y, d[0]);
    }

    let worst = (0..traj.len() - 1)
        .filter(|&k| traj.disturbances[k] == traj.disturbances[k + 1])
        .map(|k| traj.w[k + 1] - traj.w[k])
        .fold(f64::NEG_INFINITY, f64::max);
    println!("largest per-step W change within a disturbance segment: {worst:.3e}");
    Ok(())
}
