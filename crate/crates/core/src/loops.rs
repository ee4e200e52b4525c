//! Closed loops as integrable [`Recordable`] vector fields.
//!
//! State layouts:
//! - [`IaLoop`]: `w = col(q, p₁, p₂, ζ)` in transformed momentum coordinates.
//! - [`PidLoop`]: `col(q, 𝐩, ζ)` in original momentum coordinates.
//! - [`OpenLoop`]: `col(q, 𝐩)` with `u = 0`.

use crate::error::Result;
use crate::ia::{ClosedLoopState, IaController};
use crate::linalg::{self, Vector};
use crate::model::{PlantState, ShapedMechanicalSystem};
use crate::pid::ReferencePid;
use crate::sim::{Dynamics, Layout, Recordable, Sample};

/// Integral-action closed loop.
#[derive(Debug, Clone)]
pub struct IaLoop {
    pub controller: IaController,
}

impl IaLoop {
    pub fn new(controller: IaController) -> Self {
        IaLoop { controller }
    }

    fn split(&self, x: &Vector) -> ClosedLoopState {
        ClosedLoopState::from_vector(x, self.controller.system().dof(), self.controller.system().inputs())
    }

    /// Initial `w` from an original-coordinate plant state.
    pub fn initial_state(&self, plant: &PlantState, zeta: Vector) -> Result<Vector> {
        Ok(self.controller.from_plant(plant, zeta)?.to_vector())
    }
}

impl Dynamics for IaLoop {
    fn derivative(&self, x: &Vector, d: &Vector) -> Result<Vector> {
        Ok(self.controller.closed_loop_dynamics(&self.split(x), d)?.to_vector())
    }

    fn check_state(&self, x: &Vector) -> Result<()> {
        let n = self.controller.system().dof();
        self.controller.system().base().model().simulation_domain().check(&linalg::segment(x, 0, n))
    }
}

impl Recordable for IaLoop {
    fn layout(&self) -> Layout {
        let ts = self.controller.system();
        Layout {
            n: ts.dof(),
            zeta: ts.inputs(),
            m: ts.inputs(),
        }
    }

    fn sample(&self, x: &Vector, d: &Vector) -> Result<Sample> {
        let w = self.split(x);
        Ok(Sample {
            u: self.controller.control(&w)?,
            h_d: self.controller.system().hamiltonian(&w.q, &w.p())?,
            w: self.controller.lyapunov(&w, d)?,
        })
    }
}

/// Reference PID closed loop.
#[derive(Debug, Clone)]
pub struct PidLoop {
    pub pid: ReferencePid,
}

impl PidLoop {
    pub fn new(pid: ReferencePid) -> Self {
        PidLoop { pid }
    }

    fn split(&self, x: &Vector) -> (PlantState, Vector) {
        let n = self.pid.system().dof();
        let m = self.pid.system().inputs();
        (PlantState::new(linalg::segment(x, 0, n), linalg::segment(x, n, n)), linalg::segment(x, 2 * n, m))
    }
}

impl Dynamics for PidLoop {
    fn derivative(&self, x: &Vector, d: &Vector) -> Result<Vector> {
        let (s, zeta) = self.split(x);
        let (rates, zeta_dot) = self.pid.closed_loop_dynamics(&s, &zeta, d)?;
        Ok(linalg::concat(&[&rates.q_dot, &rates.momentum_dot, &zeta_dot]))
    }

    fn check_state(&self, x: &Vector) -> Result<()> {
        let n = self.pid.system().dof();
        self.pid.system().model().simulation_domain().check(&linalg::segment(x, 0, n))
    }
}

impl Recordable for PidLoop {
    fn layout(&self) -> Layout {
        let sys = self.pid.system();
        Layout {
            n: sys.dof(),
            zeta: sys.inputs(),
            m: sys.inputs(),
        }
    }

    fn sample(&self, x: &Vector, d: &Vector) -> Result<Sample> {
        let (s, zeta) = self.split(x);
        let (_, h_z) = self.pid.z2_coordinates(&s, &zeta, d)?;
        Ok(Sample {
            u: self.pid.control(&s, &zeta)?.u,
            h_d: self.pid.system().hamiltonian(&s)?,
            w: h_z,
        })
    }
}

/// Shaped system with `u = 0`.
#[derive(Debug, Clone)]
pub struct OpenLoop {
    pub system: ShapedMechanicalSystem,
}

impl Dynamics for OpenLoop {
    fn derivative(&self, x: &Vector, d: &Vector) -> Result<Vector> {
        let s = PlantState::from_vector(x);
        let u = Vector::zeros(self.system.inputs());
        let rates = self.system.open_loop_dynamics(&s, &u, d)?;
        Ok(linalg::concat(&[&rates.q_dot, &rates.momentum_dot]))
    }

    fn check_state(&self, x: &Vector) -> Result<()> {
        let n = self.system.dof();
        self.system.model().simulation_domain().check(&linalg::segment(x, 0, n))
    }
}

impl Recordable for OpenLoop {
    fn layout(&self) -> Layout {
        Layout {
            n: self.system.dof(),
            zeta: 0,
            m: self.system.inputs(),
        }
    }

    fn sample(&self, x: &Vector, _d: &Vector) -> Result<Sample> {
        let h = self.system.hamiltonian(&PlantState::from_vector(x))?;
        Ok(Sample {
            u: Vector::zeros(self.system.inputs()),
            h_d: h,
            w: h,
        })
    }
}
