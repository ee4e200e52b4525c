//! Built-in numerical verification suites.
//!
//! Each check samples seeded random states on every registered system and
//! reports the largest residual against a fixed tolerance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ia::{ClosedLoopState, IaController, IaGains};
use crate::linalg::{self, Vector};
use crate::loops::IaLoop;
use crate::model::PlantState;
use crate::pid::probe_states;
use crate::sim::{self, DisturbanceSchedule, IntegratorConfig};
use crate::systems::{self, BuiltSystem, SYSTEM_IDS};
use crate::transform::TransformedSystem;

pub const SAMPLES_PER_SYSTEM: usize = 64;
pub const PUSHFORWARD_TOL: f64 = 1e-6;
pub const MATCHING_TOL: f64 = 1e-9;
pub const ROUND_TRIP_TOL: f64 = 1e-12;
pub const DISSIPATION_TOL: f64 = 1e-9;
/// Per-step `W` increase allowed along RK4 trajectories, relative to `max(1, W)`.
pub const MONOTONICITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Transform,
    Matching,
    Lyapunov,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 4] = ["transform", "matching", "lyapunov", "all"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transform" => Ok(Suite::Transform),
            "matching" => Ok(Suite::Matching),
            "lyapunov" => Ok(Suite::Lyapunov),
            "all" => Ok(Suite::All),
            other => Err(Error::Config {
                field: "suite".into(),
                message: format!("unknown suite `{other}` (expected one of {})", Suite::NAMES.join(", ")),
            }),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Suite::Transform => "transform",
            Suite::Matching => "matching",
            Suite::Lyapunov => "lyapunov",
            Suite::All => "all",
        };
        f.write_str(name)
    }
}

/// One check: the largest residual seen over all samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub system: String,
    pub name: &'static str,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.max_residual.is_finite() && self.max_residual <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed: {}", self.seed)?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<4} {:<9} {:<13} {:<28} max residual {:.3e} (tol {:.0e}, {} samples)",
                if c.passed() { "PASS" } else { "FAIL" },
                c.suite,
                c.system,
                c.name,
                c.max_residual,
                c.tolerance,
                c.samples
            )?;
        }
        let failed = self.failures().count();
        if failed == 0 {
            write!(f, "all {} checks passed", self.checks.len())
        } else {
            write!(f, "{failed} of {} checks failed", self.checks.len())
        }
    }
}

/// IA gains used by the suites: the worked-example gains for the
/// cart-pendulum, plant-damping-matched gains elsewhere.
fn suite_gains(built: &BuiltSystem) -> Result<IaGains> {
    match built.id.as_str() {
        "cart-pendulum" => IaGains::scalar(0.05, 0.0, 10.0, 1.0),
        _ => {
            let m = built.system.inputs();
            let k_p = built.system.damping_gain(&built.system.q_star());
            IaGains::new(linalg::Matrix::identity(m, m), linalg::Matrix::zeros(m, m), k_p, linalg::Matrix::identity(m, m))
        }
    }
}

struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    fn new(seed: u64, salt: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        }
    }

    fn vector(&mut self, len: usize, scale: f64) -> Vector {
        Vector::from_fn(len, |_, _| self.rng.gen_range(-scale..scale))
    }
}

fn salt(system: &str, suite: Suite) -> u64 {
    let s = system.bytes().fold(suite as u64 + 1, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
    s.rotate_left(17)
}

fn closed_loop_samples(ts: &TransformedSystem, sampler: &mut Sampler, plants: &[PlantState]) -> Result<Vec<(ClosedLoopState, Vector)>> {
    let m = ts.inputs();
    let n = ts.dof();
    plants
        .iter()
        .map(|s| {
            let p = ts.to_transformed(s)?;
            let zeta = sampler.vector(m, 2.0);
            let d = sampler.vector(m, 2.0);
            Ok((ClosedLoopState::new(s.q.clone(), linalg::segment(&p, 0, m), linalg::segment(&p, m, n - m), zeta), d))
        })
        .collect()
}

fn transform_checks(built: &BuiltSystem, seed: u64) -> Result<Vec<Check>> {
    let ts = &built.transform;
    let m = ts.inputs();
    let mut sampler = Sampler::new(seed, salt(&built.id, Suite::Transform));
    let plants = probe_states(&built.system, sampler.rng.gen(), SAMPLES_PER_SYSTEM);
    let (mut push, mut output, mut trip) = (0.0_f64, 0.0_f64, 0.0_f64);
    for s in &plants {
        let u = sampler.vector(m, 2.0);
        let d = sampler.vector(m, 2.0);
        push = push.max(ts.verify_pushforward(s, &u, &d)?);
        output = output.max(ts.output_equivalence(s)?);
        let p = ts.to_transformed(s)?;
        let back = ts.to_plant(&s.q, &p)?;
        trip = trip.max(linalg::max_abs_vec(&(&back.momentum - &s.momentum)) / linalg::max_abs_vec(&s.momentum).max(1.0));
    }
    let check = |name, max_residual, tolerance| Check {
        suite: Suite::Transform,
        system: built.id.clone(),
        name,
        samples: plants.len(),
        max_residual,
        tolerance,
    };
    Ok(vec![
        check("push-forward", push, PUSHFORWARD_TOL),
        check("passive-output-equivalence", output, MATCHING_TOL),
        check("momentum-round-trip", trip, ROUND_TRIP_TOL),
    ])
}

fn matching_checks(built: &BuiltSystem, seed: u64) -> Result<Vec<Check>> {
    let ctrl = IaController::new(built.transform.clone(), suite_gains(built)?)?;
    let mut sampler = Sampler::new(seed, salt(&built.id, Suite::Matching));
    let plants = probe_states(&built.system, sampler.rng.gen(), SAMPLES_PER_SYSTEM);
    let samples = closed_loop_samples(&built.transform, &mut sampler, &plants)?;
    let mut route = 0.0_f64;
    let mut rest = 0.0_f64;
    for (x, d) in &samples {
        let a = ctrl.closed_loop_dynamics(x, d)?.to_vector();
        let b = ctrl.plant_route_dynamics(x, d)?.to_vector();
        route = route.max(linalg::max_abs_vec(&(&a - &b)) / linalg::max_abs_vec(&b).max(1.0));
        let eq = ctrl.equilibrium(d)?;
        rest = rest.max(linalg::max_abs_vec(&ctrl.closed_loop_dynamics(&eq, d)?.to_vector()));
    }
    let check = |name, max_residual| Check {
        suite: Suite::Matching,
        system: built.id.clone(),
        name,
        samples: samples.len(),
        max_residual,
        tolerance: MATCHING_TOL,
    };
    Ok(vec![check("closed-loop-matching", route), check("equilibrium-at-rest", rest)])
}

fn lyapunov_checks(built: &BuiltSystem, seed: u64) -> Result<Vec<Check>> {
    let ctrl = IaController::new(built.transform.clone(), suite_gains(built)?)?;
    let mut sampler = Sampler::new(seed, salt(&built.id, Suite::Lyapunov));
    let plants = probe_states(&built.system, sampler.rng.gen(), SAMPLES_PER_SYSTEM);
    let samples = closed_loop_samples(&built.transform, &mut sampler, &plants)?;

    let mut sym = f64::NEG_INFINITY;
    let mut rate = f64::NEG_INFINITY;
    for (x, d) in &samples {
        let f = ctrl.f_matrix(x)?;
        let scale = linalg::max_abs(&f).max(1.0);
        sym = sym.max(linalg::max_symmetric_eigenvalue(&(0.5 * (&f + f.transpose()))) / scale);
        let grad = ctrl.lyapunov_gradient(x, d)?;
        rate = rate.max(ctrl.lyapunov_rate(x, d)? / grad.norm_squared().max(1.0));
    }

    // Short trajectories from a few of the samples.
    let lp = IaLoop::new(ctrl);
    let cfg = IntegratorConfig::FixedRk4 { step: 1e-3, t_final: 2.0 };
    let mut increase = f64::NEG_INFINITY;
    let mut runs = 0;
    for (x, d) in samples.iter().take(4) {
        let schedule = DisturbanceSchedule::constant(d.clone());
        let traj = match sim::simulate(&lp, &x.to_vector(), &cfg, &schedule) {
            Ok(t) => t,
            Err(Error::DomainViolation { .. }) => continue,
            Err(e) => return Err(e),
        };
        runs += 1;
        for k in 0..traj.len() - 1 {
            increase = increase.max((traj.w[k + 1] - traj.w[k]) / traj.w[k].abs().max(1.0));
        }
    }

    let check = |name, samples, max_residual, tolerance| Check {
        suite: Suite::Lyapunov,
        system: built.id.clone(),
        name,
        samples,
        max_residual: f64::max(max_residual, 0.0),
        tolerance,
    };
    Ok(vec![
        check("F-symmetric-part-nonpositive", samples.len(), sym, DISSIPATION_TOL),
        check("W-rate-nonpositive", samples.len(), rate, DISSIPATION_TOL),
        check("W-monotone-along-rk4", runs, if runs == 0 { f64::NAN } else { increase }, MONOTONICITY_TOL),
    ])
}

/// Runs `suite` over every registered system in a fixed order.
pub fn run(suite: Suite, seed: u64) -> Result<VerifyReport> {
    let mut built = Vec::new();
    for id in SYSTEM_IDS {
        built.push(systems::build(id, &BTreeMap::new())?);
    }
    let suites: &[Suite] = match suite {
        Suite::All => &[Suite::Transform, Suite::Matching, Suite::Lyapunov],
        Suite::Transform => &[Suite::Transform],
        Suite::Matching => &[Suite::Matching],
        Suite::Lyapunov => &[Suite::Lyapunov],
    };
    let mut checks = Vec::new();
    for s in suites {
        for b in &built {
            checks.extend(match s {
                Suite::Transform => transform_checks(b, seed)?,
                Suite::Matching => matching_checks(b, seed)?,
                Suite::Lyapunov => lyapunov_checks(b, seed)?,
                Suite::All => unreachable!("expanded above"),
            });
        }
    }
    Ok(VerifyReport { seed, checks })
}
