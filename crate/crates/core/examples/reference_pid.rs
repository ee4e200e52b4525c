//! The reference nonlinear PID on the linear benchmark, and its rejection of
//! the cart-pendulum (non-constant `G` and `𝐌_d`).

use std::collections::BTreeMap;

use nalgebra::dvector;

use phia::pid::{check_assumptions, probe_states};
use phia::sim::{self, DisturbanceSchedule, IntegratorConfig};
use phia::systems;
use phia::{CartPendulum, PidGains, PidLoop, ReferencePid, Vector};

fn main() -> phia::Result<()> {
    let built = systems::build("linear-2dof", &BTreeMap::new())?;
    let pid = ReferencePid::new(built.system.clone(), PidGains::scalar(1.0, 4.0, 1.0, 2.0)?)?;
    let d = dvector![1.0];

    let traj = sim::simulate(&PidLoop::new(pid.clone()), &Vector::zeros(5), &IntegratorConfig::FixedRk4 { step: 1e-3, t_final: 60.0 }, &DisturbanceSchedule::constant(d.clone()))?;
    let last = traj.len() - 1;
    println!("K2 = {}", pid.k2());
    println!("q(60) = {:?}, q* = {:?}", traj.q(last).as_slice(), built.system.q_star().as_slice());
    println!("ζ(60) = {:.9}, α = {:.9}", traj.zeta(last)[0], pid.alpha(&d)?[0]);
    println!("u(60) = {:.9} (rejects d = {})", traj.inputs[last][0], d[0]);

    let cp = CartPendulum::fig1()?;
    let report = check_assumptions(cp.system(), &probe_states(cp.system(), 1, 20))?;
    println!("cart-pendulum P.1 violation {:.3e} (passed: {}), P.2 violation {:.3e}", report.p1.violation, report.p1.passed, report.p2.violation);
    match ReferencePid::new(cp.system().clone(), PidGains::scalar(1.0, 10.0, 0.05, 1.0)?) {
        Ok(_) => println!("unexpected: PID accepted the cart-pendulum"),
        Err(e) => println!("PID on cart-pendulum: {e}"),
    }
    Ok(())
}
