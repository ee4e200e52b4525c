//! Integral action for underactuated mechanical port-Hamiltonian systems
//! stabilised by interconnection and damping assignment.
//!
//! The pipeline: a [`MechanicalModel`] supplies the shaped closed-loop data
//! (`M`, `𝐌_d`, `V_d`, `𝐉_2`, `G`, `K_p`); [`ShapedMechanicalSystem`] wraps it
//! with validation; [`TransformedSystem`] applies the momentum change
//! `p = T(q)𝐩` that splits actuated and unactuated momenta; [`IaController`]
//! closes the loop with the integral-action law; [`sim`] integrates and
//! records trajectories. [`ReferencePid`] is the benchmark controller.
//!
//! See `examples/` for one runnable program per capability.

pub mod error;
pub mod fd;
pub mod ia;
pub mod linalg;
pub mod loops;
pub mod model;
pub mod pid;
pub mod scenario;
pub mod sim;
pub mod systems;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
pub use ia::{ClosedLoopState, IaController, IaGains};
pub use linalg::{Matrix, Vector};
pub use loops::{IaLoop, OpenLoop, PidLoop};
pub use model::{DerivativeMode, Domain, MechanicalModel, PlantRates, PlantState, ShapedMechanicalSystem};
pub use pid::{PidGains, ReferencePid};
pub use scenario::{Scenario, ScenarioConfig, ScenarioError};
pub use sim::{DisturbanceSchedule, IntegratorConfig, Trajectory};
pub use systems::cart_pendulum::CartPendulum;
pub use systems::linear::Linear2Dof;
pub use transform::{Annihilator, SBlocks, TransformedSystem};
