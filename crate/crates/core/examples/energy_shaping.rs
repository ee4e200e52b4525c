//! Drives the partially linearised cart-pendulum plant with the
//! energy-shaping law plus the integral-action input `u′ = ũ/μ`, and compares
//! the result with the shaped-system simulation.

use nalgebra::dvector;

use phia::linalg;
use phia::sim::{self, DisturbanceSchedule, IntegratorConfig};
use phia::{CartPendulum, IaController, IaLoop, PlantState, Vector};

fn main() -> phia::Result<()> {
    let cp = CartPendulum::fig1()?;
    let plant = cp.open_loop();
    let ctrl = IaController::new(cp.transform()?, CartPendulum::fig1_gains()?)?;
    let schedule = DisturbanceSchedule::step(30.0, dvector![2.0])?;
    let cfg = IntegratorConfig::FixedRk4 { step: 1e-3, t_final: 60.0 };
    let initial = PlantState::new(dvector![0.0, 1.0], dvector![0.0, 0.0]);

    let raw_plant = |x: &Vector, d: &Vector| -> phia::Result<Vector> {
        let s = PlantState::new(linalg::segment(x, 0, 2), linalg::segment(x, 2, 2));
        let w = ctrl.from_plant(&s, linalg::segment(x, 4, 1))?;
        let u_prime = ctrl.control(&w)?[0] / cp.params().mu(s.q[0]);
        let u = cp.energy_shaping_input(&s, u_prime)?;
        let rates = plant.dynamics(&s, u, d[0])?;
        Ok(linalg::concat(&[&rates.q_dot, &rates.momentum_dot, &ctrl.integrator_dynamics(&w)?]))
    };
    let x0 = linalg::concat(&[&initial.q, &initial.momentum, &dvector![0.0]]);
    let raw = sim::integrate(&raw_plant, &x0, &cfg, &schedule)?;

    let lp = IaLoop::new(ctrl.clone());
    let shaped = sim::integrate(&lp, &lp.initial_state(&initial, dvector![0.0])?, &cfg, &schedule)?;

    let end_raw = raw.last_state();
    let end_shaped = ctrl.to_plant(&phia::ClosedLoopState::from_vector(shaped.last_state(), 2, 1))?;
    println!("plant + shaping law: q(60) = {:?}, ζ(60) = {:.6}", linalg::segment(end_raw, 0, 2).as_slice(), end_raw[4]);
    println!("shaped closed loop:  q(60) = {:?}, ζ(60) = {:.6}", end_shaped.q.as_slice(), shaped.last_state()[4]);
    println!("max |Δq| at t = 60: {:.2e}", linalg::max_abs_vec(&(linalg::segment(end_raw, 0, 2) - end_shaped.q)));
    Ok(())
}
