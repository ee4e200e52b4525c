//! Energy-shaped mechanical port-Hamiltonian systems with a matched
//! disturbance:
//!
//! ```text
//! q̇ = M⁻¹𝐌_d ∇_𝐩𝐇_d
//! 𝐩̇ = −𝐌_d M⁻¹ ∇_q𝐇_d + (𝐉_2 − G K_p Gᵀ) ∇_𝐩𝐇_d + G (u − d)
//! 𝐲 = Gᵀ ∇_𝐩𝐇_d,        𝐇_d = ½ 𝐩ᵀ 𝐌_d⁻¹ 𝐩 + V_d(q)
//! ```
//!
//! A concrete system implements [`MechanicalModel`]; [`ShapedMechanicalSystem`]
//! wraps it, validates the structural invariants and evaluates energies,
//! gradients and the open-loop vector field.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fd;
use crate::linalg::{self, Matrix, Vector};

/// Validity region for the configuration: a product of open intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        Domain { bounds }
    }

    pub fn unbounded(dim: usize) -> Self {
        Domain {
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, q: &Vector) -> bool {
        q.len() == self.bounds.len()
            && q.iter().zip(&self.bounds).all(|(x, (lo, hi))| x.is_finite() && *x > *lo && *x < *hi)
    }

    pub fn check(&self, q: &Vector) -> Result<()> {
        if self.contains(q) {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                q: q.iter().copied().collect(),
                t: None,
            })
        }
    }
}

/// State-dependent data of a shaped mechanical system.
///
/// Closed-form derivatives are optional; when absent, the wrapper falls back
/// to central differences.
pub trait MechanicalModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    /// Degrees of freedom `n`.
    fn dof(&self) -> usize;
    /// Number of actuated directions `m`.
    fn inputs(&self) -> usize;
    fn domain(&self) -> Domain;
    /// Tighter box used to stop simulations before they reach the edge of the
    /// domain.
    fn simulation_domain(&self) -> Domain {
        self.domain()
    }
    fn q_star(&self) -> Vector;

    fn mass(&self, q: &Vector) -> Matrix;
    fn shaped_mass(&self, q: &Vector) -> Matrix;
    fn shaped_mass_partial(&self, _q: &Vector, _i: usize) -> Option<Matrix> {
        None
    }
    fn potential(&self, q: &Vector) -> f64;
    fn potential_grad(&self, q: &Vector) -> Vector;
    fn j2(&self, q: &Vector, momentum: &Vector) -> Matrix;
    fn input_matrix(&self, q: &Vector) -> Matrix;
    fn damping_gain(&self, q: &Vector) -> Matrix;
}

/// Whether derivative data comes from the model's closed forms or from
/// finite differences only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeMode {
    #[default]
    Analytic,
    FiniteDifference,
}

/// Configuration and original momentum `(q, 𝐩)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub q: Vector,
    pub momentum: Vector,
}

impl PlantState {
    pub fn new(q: Vector, momentum: Vector) -> Self {
        PlantState { q, momentum }
    }

    pub fn at_rest(q: Vector) -> Self {
        let n = q.len();
        PlantState {
            q,
            momentum: Vector::zeros(n),
        }
    }

    pub fn to_vector(&self) -> Vector {
        linalg::concat(&[&self.q, &self.momentum])
    }

    pub fn from_vector(x: &Vector) -> Self {
        let n = x.len() / 2;
        PlantState {
            q: linalg::segment(x, 0, n),
            momentum: linalg::segment(x, n, n),
        }
    }
}

/// `(q̇, 𝐩̇)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantRates {
    pub q_dot: Vector,
    pub momentum_dot: Vector,
}

/// Absolute tolerance on `|∇V_d(q*)|` and on symmetry checks at construction.
const STRUCTURE_TOL: f64 = 1e-8;

/// A validated shaped mechanical system.
#[derive(Clone)]
pub struct ShapedMechanicalSystem {
    model: Arc<dyn MechanicalModel>,
    mode: DerivativeMode,
}

impl fmt::Debug for ShapedMechanicalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShapedMechanicalSystem")
            .field("model", &self.model.name())
            .field("mode", &self.mode)
            .finish()
    }
}

impl ShapedMechanicalSystem {
    /// Wraps a model after checking dimensions and the strict minimum of the
    /// shaped potential at `q*`.
    pub fn new(model: Arc<dyn MechanicalModel>) -> Result<Self> {
        let sys = ShapedMechanicalSystem {
            model,
            mode: DerivativeMode::Analytic,
        };
        sys.check_dimensions()?;
        let q_star = sys.model.q_star();
        sys.model.domain().check(&q_star)?;
        sys.validate_at(&[PlantState::at_rest(q_star.clone())])?;
        sys.check_strict_minimum()?;
        Ok(sys)
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn model(&self) -> &Arc<dyn MechanicalModel> {
        &self.model
    }

    pub fn dof(&self) -> usize {
        self.model.dof()
    }

    pub fn inputs(&self) -> usize {
        self.model.inputs()
    }

    pub fn q_star(&self) -> Vector {
        self.model.q_star()
    }

    pub fn domain(&self) -> Domain {
        self.model.domain()
    }

    fn check_dimensions(&self) -> Result<()> {
        let n = self.dof();
        let m = self.inputs();
        if n == 0 || m == 0 || m > n {
            return Err(Error::InvalidSystem(format!("need 0 < m <= n, got n = {n}, m = {m}")));
        }
        if self.model.domain().dim() != n {
            return Err(Error::dimension("domain", n, self.model.domain().dim()));
        }
        let q = self.model.q_star();
        if q.len() != n {
            return Err(Error::dimension("q_star", n, q.len()));
        }
        let shape = |name: &str, mat: Matrix, r: usize, c: usize| -> Result<()> {
            if mat.shape() != (r, c) {
                return Err(Error::dimension(name, format!("{r}x{c}"), format!("{}x{}", mat.nrows(), mat.ncols())));
            }
            Ok(())
        };
        shape("mass", self.model.mass(&q), n, n)?;
        shape("shaped_mass", self.model.shaped_mass(&q), n, n)?;
        shape("j2", self.model.j2(&q, &Vector::zeros(n)), n, n)?;
        shape("input_matrix", self.model.input_matrix(&q), n, m)?;
        shape("damping_gain", self.model.damping_gain(&q), m, m)?;
        let grad = self.model.potential_grad(&q);
        if grad.len() != n {
            return Err(Error::dimension("potential_grad", n, grad.len()));
        }
        Ok(())
    }

    fn check_strict_minimum(&self) -> Result<()> {
        let q = self.q_star();
        let grad = self.model.potential_grad(&q);
        if linalg::max_abs_vec(&grad) > STRUCTURE_TOL {
            return Err(Error::InvalidSystem(format!("grad V_d(q*) = {:?} is not zero", grad.as_slice())));
        }
        let hess = fd::fd_hessian(|x| self.model.potential(x), &q, 1e-4)?;
        if linalg::min_symmetric_eigenvalue(&hess) <= 0.0 {
            return Err(Error::InvalidSystem("Hessian of V_d at q* is not positive definite".into()));
        }
        Ok(())
    }

    /// Checks the structural invariants at each sampled state: `M`, `𝐌_d`
    /// symmetric positive-definite, `𝐉_2` skew, `G` of rank `m`, `K_p`
    /// symmetric positive-semidefinite.
    pub fn validate_at(&self, states: &[PlantState]) -> Result<()> {
        let m = self.inputs();
        for s in states {
            self.model.domain().check(&s.q)?;
            let q = &s.q;
            for (name, mat) in [("mass", self.model.mass(q)), ("shaped_mass", self.model.shaped_mass(q))] {
                if !linalg::is_positive_definite(&mat) {
                    return Err(Error::InvalidSystem(format!("{name} is not symmetric positive-definite at q = {:?}", q.as_slice())));
                }
            }
            let j2 = self.model.j2(q, &s.momentum);
            if linalg::skew_defect(&j2) > STRUCTURE_TOL * linalg::max_abs(&j2).max(1.0) {
                return Err(Error::InvalidSystem(format!("J2 is not skew-symmetric at q = {:?}", q.as_slice())));
            }
            let g = self.model.input_matrix(q);
            if linalg::rank(&g, 1e-10) != m {
                return Err(Error::RankDeficientG { q: q.iter().copied().collect() });
            }
            let kp = self.model.damping_gain(q);
            if linalg::symmetry_defect(&kp) > STRUCTURE_TOL || linalg::min_symmetric_eigenvalue(&kp) < -STRUCTURE_TOL {
                return Err(Error::InvalidSystem(format!("K_p is not symmetric positive-semidefinite at q = {:?}", q.as_slice())));
            }
        }
        Ok(())
    }

    pub fn check_domain(&self, q: &Vector) -> Result<()> {
        self.model.domain().check(q)
    }

    pub fn mass(&self, q: &Vector) -> Matrix {
        self.model.mass(q)
    }

    pub fn mass_inverse(&self, q: &Vector) -> Result<Matrix> {
        let m = self.model.mass(q);
        linalg::inverse_with_condition(&m)
            .map(|(inv, _)| inv)
            .ok_or_else(|| Error::MassMatrixSingular {
                q: q.iter().copied().collect(),
                condition: linalg::condition_estimate(&m),
            })
    }

    pub fn shaped_mass(&self, q: &Vector) -> Matrix {
        self.model.shaped_mass(q)
    }

    pub fn shaped_mass_inverse(&self, q: &Vector) -> Result<Matrix> {
        let md = self.model.shaped_mass(q);
        linalg::inverse_with_condition(&md)
            .map(|(inv, _)| inv)
            .ok_or_else(|| Error::MassMatrixSingular {
                q: q.iter().copied().collect(),
                condition: linalg::condition_estimate(&md),
            })
    }

    /// `∂𝐌_d/∂q_i`, closed form when available and the mode allows it.
    pub fn shaped_mass_partial(&self, q: &Vector, i: usize) -> Result<Matrix> {
        if self.mode == DerivativeMode::Analytic {
            if let Some(d) = self.model.shaped_mass_partial(q, i) {
                return Ok(d);
            }
        }
        fd::fd_matrix_partial(|x| Ok(self.model.shaped_mass(x)), q, i, fd::RELATIVE_STEP)
    }

    pub fn input_matrix(&self, q: &Vector) -> Matrix {
        self.model.input_matrix(q)
    }

    pub fn damping_gain(&self, q: &Vector) -> Matrix {
        self.model.damping_gain(q)
    }

    /// `R_d = G K_p Gᵀ`.
    pub fn damping_matrix(&self, q: &Vector) -> Matrix {
        let g = self.model.input_matrix(q);
        &g * self.model.damping_gain(q) * g.transpose()
    }

    pub fn j2(&self, q: &Vector, momentum: &Vector) -> Matrix {
        self.model.j2(q, momentum)
    }

    pub fn potential(&self, q: &Vector) -> f64 {
        self.model.potential(q)
    }

    pub fn potential_grad(&self, q: &Vector) -> Vector {
        self.model.potential_grad(q)
    }

    /// `𝐇_d = ½ 𝐩ᵀ 𝐌_d⁻¹ 𝐩 + V_d`.
    pub fn hamiltonian(&self, s: &PlantState) -> Result<f64> {
        self.check_domain(&s.q)?;
        let v = self.shaped_mass_inverse(&s.q)? * &s.momentum;
        Ok(0.5 * s.momentum.dot(&v) + self.model.potential(&s.q))
    }

    /// `(∇_q𝐇_d, ∇_𝐩𝐇_d)`.
    pub fn grad_hamiltonian(&self, s: &PlantState) -> Result<(Vector, Vector)> {
        self.check_domain(&s.q)?;
        let v = self.shaped_mass_inverse(&s.q)? * &s.momentum;
        let mut grad_q = self.model.potential_grad(&s.q);
        if v.iter().any(|x| *x != 0.0) {
            for i in 0..self.dof() {
                let dmd = self.shaped_mass_partial(&s.q, i)?;
                grad_q[i] -= 0.5 * v.dot(&(dmd * &v));
            }
        }
        Ok((grad_q, v))
    }

    /// Open-loop vector field with the matched input `u − d`.
    pub fn open_loop_dynamics(&self, s: &PlantState, u: &Vector, d: &Vector) -> Result<PlantRates> {
        let m = self.inputs();
        if u.len() != m || d.len() != m {
            return Err(Error::dimension("u/d", m, u.len().max(d.len())));
        }
        let (grad_q, grad_p) = self.grad_hamiltonian(s)?;
        let q = &s.q;
        let minv = self.mass_inverse(q)?;
        let md = self.model.shaped_mass(q);
        let g = self.model.input_matrix(q);
        let q_dot = &minv * &md * &grad_p;
        let momentum_dot = -(&md * &minv * grad_q) + (self.model.j2(q, &s.momentum) - self.damping_matrix(q)) * &grad_p + g * (u - d);
        Ok(PlantRates { q_dot, momentum_dot })
    }

    /// Passive output `𝐲 = Gᵀ ∇_𝐩𝐇_d`.
    pub fn passive_output(&self, s: &PlantState) -> Result<Vector> {
        self.check_domain(&s.q)?;
        let v = self.shaped_mass_inverse(&s.q)? * &s.momentum;
        Ok(self.model.input_matrix(&s.q).transpose() * v)
    }

    /// `−(∇_𝐩𝐇_d)ᵀ R_d ∇_𝐩𝐇_d`, the rate of `𝐇_d` along the unforced,
    /// undisturbed flow.
    pub fn energy_rate(&self, s: &PlantState) -> Result<f64> {
        let y = self.passive_output(s)?;
        Ok(-y.dot(&(self.model.damping_gain(&s.q) * &y)))
    }
}
