//! Integral action on a user-defined three-degree-of-freedom system with two
//! inputs and a configuration-dependent input matrix. No closed-form
//! derivatives are supplied, so finite differences fill in. Damping reaches
//! the unactuated direction only through coupling, so convergence is slow.

use std::sync::Arc;

use nalgebra::{dmatrix, dvector};

use phia::model::{Domain, MechanicalModel};
use phia::sim::{self, DisturbanceSchedule, IntegratorConfig};
use phia::transform::{Annihilator, TransformedSystem};
use phia::{IaController, IaGains, IaLoop, Matrix, PlantState, ShapedMechanicalSystem, Vector};

#[derive(Debug)]
struct TiltedChain;

impl MechanicalModel for TiltedChain {
    fn name(&self) -> &str {
        "tilted-chain"
    }
    fn dof(&self) -> usize {
        3
    }
    fn inputs(&self) -> usize {
        2
    }
    fn domain(&self) -> Domain {
        Domain::new(vec![(-1.2, 1.2), (f64::NEG_INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::INFINITY)])
    }
    fn q_star(&self) -> Vector {
        dvector![0.0, 0.5, -0.5]
    }
    fn mass(&self, _q: &Vector) -> Matrix {
        Matrix::identity(3, 3)
    }
    fn shaped_mass(&self, q: &Vector) -> Matrix {
        let c = q[0].cos();
        dmatrix![2.0 + c * c, 0.3, 0.0; 0.3, 1.5, 0.2 * c; 0.0, 0.2 * c, 1.0]
    }
    /// `V_d = 2(1 − cos q₁) + ½|q₂₃ − q₂₃*|² + ¼ q₁²(q₂ − q₂*)²`.
    fn potential(&self, q: &Vector) -> f64 {
        let e = q - self.q_star();
        2.0 * (1.0 - q[0].cos()) + 0.5 * (e[1] * e[1] + e[2] * e[2]) + 0.25 * q[0] * q[0] * e[1] * e[1]
    }
    fn potential_grad(&self, q: &Vector) -> Vector {
        let e = q - self.q_star();
        dvector![2.0 * q[0].sin() + 0.5 * q[0] * e[1] * e[1], e[1] + 0.5 * q[0] * q[0] * e[1], e[2]]
    }
    fn j2(&self, _q: &Vector, momentum: &Vector) -> Matrix {
        let w = 0.1 * momentum[0];
        dmatrix![0.0, w, 0.0; -w, 0.0, 0.0; 0.0, 0.0, 0.0]
    }
    fn input_matrix(&self, q: &Vector) -> Matrix {
        dmatrix![1.0, 0.0; 0.0, 1.0; 0.4 * q[0].sin(), 0.5]
    }
    fn damping_gain(&self, _q: &Vector) -> Matrix {
        dmatrix![3.0, 0.0; 0.0, 2.0]
    }
}

fn main() -> phia::Result<()> {
    let system = ShapedMechanicalSystem::new(Arc::new(TiltedChain))?;
    let transform = TransformedSystem::new(system.clone(), Annihilator::computed(&system)?)?;
    let gains = IaGains::new(dmatrix![0.5, 0.0; 0.0, 0.5], dmatrix![0.0, 0.5; -0.5, 0.0], dmatrix![3.0, 0.0; 0.0, 2.0], Matrix::identity(2, 2))?;
    let ctrl = IaController::new(transform, gains)?;
    let d = dvector![1.0, -0.5];
    println!("ζ* for d = {:?}: {:?}", d.as_slice(), ctrl.equilibrium(&d)?.zeta.as_slice());

    let lp = IaLoop::new(ctrl.clone());
    let x0 = lp.initial_state(&PlantState::new(dvector![0.6, 0.0, 0.0], Vector::zeros(3)), Vector::zeros(2))?;
    let schedule = DisturbanceSchedule::step(5.0, d.clone())?;
    let traj = sim::simulate(&lp, &x0, &IntegratorConfig::FixedRk4 { step: 5e-3, t_final: 400.0 }, &schedule)?;
    for t in [0.0, 5.0, 10.0, 25.0, 50.0, 100.0, 200.0, 300.0, 400.0] {
        let k = traj.index_at(t);
        println!("t = {:>4}: q = {:>8.5?}  ζ = {:>8.5?}  u = {:>8.5?}  W = {:.6}", traj.times[k], traj.q(k).as_slice(), traj.zeta(k).as_slice(), traj.inputs[k].as_slice(), traj.w[k]);
    }
    Ok(())
}
