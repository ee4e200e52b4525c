//! The integral-action closed loop as `ẇ = F(w)∇𝓗_cl − col(0, d, 0, 0)`,
//! compared with the plant driven by the control law.

use nalgebra::dvector;

use phia::linalg;
use phia::{CartPendulum, IaController, PlantState};

fn main() -> phia::Result<()> {
    let cp = CartPendulum::fig1()?;
    let ctrl = IaController::new(cp.transform()?, CartPendulum::fig1_gains()?)?;
    let d = dvector![2.0];

    for (q1, q2, p1, p2, zeta) in [(0.2, 1.0, 0.0, 0.0, 0.0), (-0.6, -0.4, 1.1, 0.3, 2.5), (1.2, 2.0, -0.7, 1.4, -1.0)] {
        let x = ctrl.from_plant(&PlantState::new(dvector![q1, q2], dvector![p1, p2]), dvector![zeta])?;
        let via_f = ctrl.closed_loop_dynamics(&x, &d)?.to_vector();
        let via_plant = ctrl.plant_route_dynamics(&x, &d)?.to_vector();
        let f = ctrl.f_matrix(&x)?;
        println!("w = {:?}", x.to_vector().as_slice());
        println!("  u = {:.6}, ζ̇ = {:.6}", ctrl.control(&x)?[0], ctrl.integrator_dynamics(&x)?[0]);
        println!("  |F∇H − plant route| = {:.2e}", linalg::max_abs_vec(&(via_f - via_plant)));
        println!("  max eig(F + Fᵀ) = {:.2e}", linalg::max_symmetric_eigenvalue(&(&f + f.transpose())));
    }

    let eq = ctrl.equilibrium(&d)?;
    println!("equilibrium for d = 2: ζ* = {:.6}", eq.zeta[0]);
    println!("rates there: {:?}", ctrl.closed_loop_dynamics(&eq, &d)?.to_vector().as_slice());
    Ok(())
}
