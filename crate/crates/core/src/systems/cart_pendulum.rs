//! Cart-pendulum after partial feedback linearisation, stabilised upright by
//! energy shaping and expressed as a shaped mechanical system with a
//! constant matched disturbance.
//!
//! Coordinates: `q₁` is the pendulum angle from vertical, `q₂` the cart
//! position. With `c = cos q₁`, `s = sin q₁`, `μ = m_c + m_p s²`:
//!
//! ```text
//! open loop:   q̇ = 𝐩,  𝐩̇ = −∇𝒱 + 𝐆 (u − d/μ),  𝒱 = a c,  𝐆 = [−b c; 1]
//! shaped:      𝐌_d = [ k b² c³/3   −k b c²/2 ]
//!                    [ −k b c²/2   k c + m₂₂⁰ ]
//!              V_d = 3a/(k b² c²) + P/2 β²
//!              β   = q₂ − q₂* + (3/b) ln(sec q₁ + tan q₁) + (6 m₂₂⁰/(k b)) τ(q₁)
//!              𝐉_2 = (𝐩ᵀ𝐌_d⁻¹ α) [0 1; −1 0],  α = (k γ₁/2) s [−b c; 1],  γ₁ = −k b² c³/6
//!              G = 𝐆/μ,  G⊥ = μ [1, b c]
//! ```
//!
//! `τ` is `tan² q₁` or `tan q₁`; see [`PotentialVariant`].

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use log::info;
use nalgebra::{dmatrix, dvector};

use crate::error::{Error, Result};
use crate::fd;
use crate::ia::{ClosedLoopState, IaGains};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{Domain, MechanicalModel, PlantRates, PlantState, ShapedMechanicalSystem};
use crate::transform::{Annihilator, MatrixMap, PartialMap, TransformedSystem};

/// Simulations stop once `|q₁|` reaches this bound.
pub const SIMULATION_ANGLE_LIMIT: f64 = 1.45;

/// Relative tolerance for the potential matching condition.
const MATCHING_TOL: f64 = 1e-9;

/// Plant parameters. `a = g/l`, `b = 1/l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPendulumParams {
    pub g: f64,
    pub l: f64,
    pub m_c: f64,
    pub m_p: f64,
}

impl Default for CartPendulumParams {
    fn default() -> Self {
        CartPendulumParams {
            g: 9.8,
            l: 1.0,
            m_c: 1.0,
            m_p: 1.0,
        }
    }
}

impl CartPendulumParams {
    pub fn a(&self) -> f64 {
        self.g / self.l
    }

    pub fn b(&self) -> f64 {
        1.0 / self.l
    }

    /// `μ = m_c + m_p sin² q₁`.
    pub fn mu(&self, q1: f64) -> f64 {
        self.m_c + self.m_p * q1.sin().powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g", self.g), ("l", self.l), ("m_c", self.m_c), ("m_p", self.m_p)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidSystem(format!("cart-pendulum parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Energy-shaping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingParams {
    pub k: f64,
    pub m22_0: f64,
    pub p: f64,
    /// Damping-injection gain `K_p`.
    pub k_p: f64,
    pub q2_star: f64,
}

impl Default for ShapingParams {
    fn default() -> Self {
        ShapingParams {
            k: 1.0,
            m22_0: 1.0,
            p: 1.0,
            k_p: 10.0,
            q2_star: 0.0,
        }
    }
}

impl ShapingParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k", self.k), ("m22_0", self.m22_0), ("p", self.p), ("k_p", self.k_p)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ShapingInvalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.q2_star.is_finite() {
            return Err(Error::ShapingInvalid("q2_star must be finite".into()));
        }
        Ok(())
    }
}

/// Last term of the bracket in `V_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialVariant {
    TanSquared,
    Tan,
}

impl PotentialVariant {
    /// Tried in this order.
    pub const ALL: [PotentialVariant; 2] = [PotentialVariant::TanSquared, PotentialVariant::Tan];

    fn tau(self, q1: f64) -> f64 {
        match self {
            PotentialVariant::TanSquared => q1.tan().powi(2),
            PotentialVariant::Tan => q1.tan(),
        }
    }

    fn tau_prime(self, q1: f64) -> f64 {
        let sec2 = 1.0 / q1.cos().powi(2);
        match self {
            PotentialVariant::TanSquared => 2.0 * q1.tan() * sec2,
            PotentialVariant::Tan => sec2,
        }
    }
}

impl fmt::Display for PotentialVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PotentialVariant::TanSquared => "tan^2",
            PotentialVariant::Tan => "tan",
        })
    }
}

/// Shaped closed loop as a [`MechanicalModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShapedCartPendulum {
    pub params: CartPendulumParams,
    pub shaping: ShapingParams,
    pub variant: PotentialVariant,
}

impl ShapedCartPendulum {
    fn bracket(&self, q: &Vector) -> f64 {
        let (b, sh) = (self.params.b(), &self.shaping);
        let q1 = q[0];
        let sec = 1.0 / q1.cos();
        q[1] - sh.q2_star + 3.0 / b * (sec + q1.tan()).ln() + 6.0 * sh.m22_0 / (sh.k * b) * self.variant.tau(q1)
    }

    fn bracket_prime(&self, q1: f64) -> f64 {
        let (b, sh) = (self.params.b(), &self.shaping);
        3.0 / (b * q1.cos()) + 6.0 * sh.m22_0 / (sh.k * b) * self.variant.tau_prime(q1)
    }

    /// `α = (k γ₁/2) sin q₁ [−b cos q₁; 1]`.
    pub fn alpha(&self, q: &Vector) -> Vector {
        let (b, k) = (self.params.b(), self.shaping.k);
        let (s, c) = q[0].sin_cos();
        let gamma1 = -k * b * b / 6.0 * c.powi(3);
        k * gamma1 / 2.0 * s * dvector![-b * c, 1.0]
    }

    /// Open-loop input vector `𝐆 = [−b cos q₁; 1]`.
    pub fn input_vector(&self, q: &Vector) -> Matrix {
        dmatrix![-self.params.b() * q[0].cos(); 1.0]
    }

    /// `G⊥ = μ [1, b cos q₁]`.
    pub fn annihilator(&self, q: &Vector) -> Matrix {
        let mu = self.params.mu(q[0]);
        dmatrix![mu, mu * self.params.b() * q[0].cos()]
    }
}

impl MechanicalModel for ShapedCartPendulum {
    fn name(&self) -> &str {
        "cart-pendulum"
    }

    fn dof(&self) -> usize {
        2
    }

    fn inputs(&self) -> usize {
        1
    }

    fn domain(&self) -> Domain {
        Domain::new(vec![(-FRAC_PI_2, FRAC_PI_2), (f64::NEG_INFINITY, f64::INFINITY)])
    }

    fn simulation_domain(&self) -> Domain {
        Domain::new(vec![(-SIMULATION_ANGLE_LIMIT, SIMULATION_ANGLE_LIMIT), (f64::NEG_INFINITY, f64::INFINITY)])
    }

    fn q_star(&self) -> Vector {
        dvector![0.0, self.shaping.q2_star]
    }

    fn mass(&self, _q: &Vector) -> Matrix {
        Matrix::identity(2, 2)
    }

    fn shaped_mass(&self, q: &Vector) -> Matrix {
        let (b, k, m22) = (self.params.b(), self.shaping.k, self.shaping.m22_0);
        let c = q[0].cos();
        dmatrix![
            k * b * b / 3.0 * c.powi(3), -k * b / 2.0 * c * c;
            -k * b / 2.0 * c * c, k * c + m22
        ]
    }

    fn shaped_mass_partial(&self, q: &Vector, i: usize) -> Option<Matrix> {
        if i == 1 {
            return Some(Matrix::zeros(2, 2));
        }
        let (b, k) = (self.params.b(), self.shaping.k);
        let (s, c) = q[0].sin_cos();
        Some(dmatrix![
            -k * b * b * c * c * s, k * b * c * s;
            k * b * c * s, -k * s
        ])
    }

    fn potential(&self, q: &Vector) -> f64 {
        let (a, b, k) = (self.params.a(), self.params.b(), self.shaping.k);
        let c = q[0].cos();
        let beta = self.bracket(q);
        3.0 * a / (k * b * b * c * c) + self.shaping.p / 2.0 * beta * beta
    }

    fn potential_grad(&self, q: &Vector) -> Vector {
        let (a, b, k) = (self.params.a(), self.params.b(), self.shaping.k);
        let (s, c) = q[0].sin_cos();
        let beta = self.bracket(q);
        let pb = self.shaping.p * beta;
        dvector![6.0 * a * s / (k * b * b * c.powi(3)) + pb * self.bracket_prime(q[0]), pb]
    }

    fn j2(&self, q: &Vector, momentum: &Vector) -> Matrix {
        let md = self.shaped_mass(q);
        let coeff = match md.lu().solve(momentum) {
            Some(v) => v.dot(&self.alpha(q)),
            None => f64::NAN,
        };
        dmatrix![0.0, coeff; -coeff, 0.0]
    }

    fn input_matrix(&self, q: &Vector) -> Matrix {
        self.input_vector(q) / self.params.mu(q[0])
    }

    fn damping_gain(&self, _q: &Vector) -> Matrix {
        Matrix::from_element(1, 1, self.shaping.k_p)
    }
}

/// Open-loop plant `q̇ = 𝐩`, `𝐩̇ = −∇𝒱 + 𝐆 (u − d/μ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPendulumOpenLoop {
    pub params: CartPendulumParams,
}

impl CartPendulumOpenLoop {
    pub fn domain(&self) -> Domain {
        Domain::new(vec![(-FRAC_PI_2, FRAC_PI_2), (f64::NEG_INFINITY, f64::INFINITY)])
    }

    /// `𝒱 = a cos q₁`.
    pub fn potential(&self, q: &Vector) -> f64 {
        self.params.a() * q[0].cos()
    }

    pub fn potential_grad(&self, q: &Vector) -> Vector {
        dvector![-self.params.a() * q[0].sin(), 0.0]
    }

    pub fn input_vector(&self, q: &Vector) -> Matrix {
        dmatrix![-self.params.b() * q[0].cos(); 1.0]
    }

    /// `𝓗 = ½|𝐩|² + 𝒱`.
    pub fn hamiltonian(&self, s: &PlantState) -> Result<f64> {
        self.domain().check(&s.q)?;
        Ok(0.5 * s.momentum.norm_squared() + self.potential(&s.q))
    }

    pub fn dynamics(&self, s: &PlantState, u: f64, d: f64) -> Result<PlantRates> {
        self.domain().check(&s.q)?;
        let mu = self.params.mu(s.q[0]);
        let forcing = self.input_vector(&s.q).column(0) * (u - d / mu);
        Ok(PlantRates {
            q_dot: s.momentum.clone(),
            momentum_dot: -self.potential_grad(&s.q) + forcing,
        })
    }
}

/// Outcome of the construction-time checks for one potential variant.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantCheck {
    pub variant: PotentialVariant,
    /// `‖∇V_d(q*)‖∞` by central differences.
    pub gradient_norm: f64,
    /// Smallest eigenvalue of the finite-difference Hessian at `q*`.
    pub min_hessian_eigenvalue: f64,
    /// Largest relative `|G⊥(∇𝒱 − 𝐌_d ∇V_d)|` over the probe configurations.
    pub matching_residual: f64,
    pub passed: bool,
}

impl VariantCheck {
    pub fn strict_minimum(&self) -> bool {
        self.gradient_norm < 1e-6 && self.min_hessian_eigenvalue > 0.0
    }
}

/// Which potential variant was selected and why.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingReport {
    pub checks: Vec<VariantCheck>,
    pub selected: PotentialVariant,
}

impl fmt::Display for ShapingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "V_d variant {:<5} |grad V_d(q*)| = {:.3e}  min eig Hessian = {:.6e}  matching residual = {:.3e}  {}",
                c.variant.to_string(),
                c.gradient_norm,
                c.min_hessian_eigenvalue,
                c.matching_residual,
                if c.passed { "pass" } else { "fail" }
            )?;
        }
        write!(f, "selected V_d variant: {}", self.selected)
    }
}

fn probe_configurations(q2_star: f64) -> Vec<Vector> {
    let mut out = Vec::new();
    for q1 in [-1.3, -0.7, -0.2, 0.3, 0.8, 1.2] {
        for dq2 in [-1.5, 0.0, 2.0] {
            out.push(dvector![q1, q2_star + dq2]);
        }
    }
    out
}

fn check_variant(params: CartPendulumParams, shaping: ShapingParams, variant: PotentialVariant) -> Result<VariantCheck> {
    let model = ShapedCartPendulum { params, shaping, variant };
    let open = CartPendulumOpenLoop { params };
    let q_star = model.q_star();
    let grad = fd::fd_gradient(|x| model.potential(x), &q_star, 1e-6)?;
    let hess = fd::fd_hessian(|x| model.potential(x), &q_star, 1e-4)?;
    let mut matching_residual: f64 = 0.0;
    for q in probe_configurations(shaping.q2_star) {
        let lhs = open.potential_grad(&q);
        let rhs = model.shaped_mass(&q) * model.potential_grad(&q);
        let scale = linalg::max_abs_vec(&lhs).max(linalg::max_abs_vec(&rhs)).max(1.0);
        let r = (model.annihilator(&q) * (lhs - rhs))[0].abs() / (model.params.mu(q[0]) * scale);
        matching_residual = matching_residual.max(r);
    }
    let mut check = VariantCheck {
        variant,
        gradient_norm: linalg::max_abs_vec(&grad),
        min_hessian_eigenvalue: linalg::min_symmetric_eigenvalue(&hess),
        matching_residual,
        passed: false,
    };
    check.passed = check.strict_minimum() && matching_residual < MATCHING_TOL;
    Ok(check)
}

/// The assembled example: shaped system, transform and helpers.
#[derive(Debug, Clone)]
pub struct CartPendulum {
    model: Arc<ShapedCartPendulum>,
    system: ShapedMechanicalSystem,
    report: ShapingReport,
}

impl CartPendulum {
    /// Builds the shaped system, trying [`PotentialVariant::ALL`] in order and
    /// keeping the first variant whose `V_d` has a strict minimum at `q*` and
    /// satisfies the potential matching condition.
    pub fn new(params: CartPendulumParams, shaping: ShapingParams) -> Result<Self> {
        params.validate()?;
        shaping.validate()?;
        let mut checks = Vec::new();
        let mut selected = None;
        for variant in PotentialVariant::ALL {
            let check = check_variant(params, shaping, variant)?;
            let passed = check.passed;
            checks.push(check);
            if passed {
                selected = Some(variant);
                break;
            }
        }
        let Some(selected) = selected else {
            return Err(Error::ShapingInvalid(format!("no V_d variant passed: {checks:?}")));
        };
        let report = ShapingReport { checks, selected };
        info!("cart-pendulum shaping: selected V_d variant {selected}");
        Self::assemble(params, shaping, selected, report)
    }

    /// Builds with a fixed variant, still requiring a strict minimum at `q*`.
    pub fn with_variant(params: CartPendulumParams, shaping: ShapingParams, variant: PotentialVariant) -> Result<Self> {
        params.validate()?;
        shaping.validate()?;
        let check = check_variant(params, shaping, variant)?;
        if !check.strict_minimum() {
            return Err(Error::ShapingInvalid(format!("V_d variant {variant} has no strict minimum at q*")));
        }
        let report = ShapingReport {
            checks: vec![check],
            selected: variant,
        };
        Self::assemble(params, shaping, variant, report)
    }

    fn assemble(params: CartPendulumParams, shaping: ShapingParams, variant: PotentialVariant, report: ShapingReport) -> Result<Self> {
        let model = Arc::new(ShapedCartPendulum { params, shaping, variant });
        let system = ShapedMechanicalSystem::new(model.clone()).map_err(|e| match e {
            Error::InvalidSystem(msg) => Error::ShapingInvalid(msg),
            other => other,
        })?;
        Ok(CartPendulum { model, system, report })
    }

    /// Plant and shaping parameters of the worked example.
    pub fn fig1() -> Result<Self> {
        CartPendulum::new(CartPendulumParams::default(), ShapingParams::default())
    }

    /// `K_I = 0.05`, `J_c1 = 0`, `R_c1 = K_p = 10`, `R_c2 = 1`.
    pub fn fig1_gains() -> Result<IaGains> {
        IaGains::scalar(0.05, 0.0, 10.0, 1.0)
    }

    pub fn params(&self) -> CartPendulumParams {
        self.model.params
    }

    pub fn shaping(&self) -> ShapingParams {
        self.model.shaping
    }

    pub fn variant(&self) -> PotentialVariant {
        self.model.variant
    }

    pub fn report(&self) -> &ShapingReport {
        &self.report
    }

    pub fn model(&self) -> &Arc<ShapedCartPendulum> {
        &self.model
    }

    pub fn system(&self) -> &ShapedMechanicalSystem {
        &self.system
    }

    pub fn open_loop(&self) -> CartPendulumOpenLoop {
        CartPendulumOpenLoop { params: self.params() }
    }

    /// Transformed system with `G⊥ = μ [1, b cos q₁]` and closed-form
    /// `∂T⁻¹/∂q`.
    pub fn transform(&self) -> Result<TransformedSystem> {
        let model = self.model.clone();
        let map: MatrixMap = Arc::new(move |q: &Vector| model.annihilator(q));
        let samples: Vec<Vector> = probe_configurations(self.shaping().q2_star);
        let annihilator = Annihilator::supplied(&self.system, map, &samples)?;
        let params = self.params();
        let partial: PartialMap = Arc::new(move |q: &Vector, i: usize| t_inverse_partial(&params, q, i));
        Ok(TransformedSystem::new(self.system.clone(), annihilator)?.with_t_inverse_partials(partial))
    }

    /// Energy-shaping input
    /// `u = (𝐆ᵀ𝐆)⁻¹𝐆ᵀ(∇𝒱 − 𝐌_d∇_q𝐇_d + 𝐉_2𝐌_d⁻¹𝐩) − (K_p/μ²)𝐆ᵀ𝐌_d⁻¹𝐩 + u′`.
    pub fn energy_shaping_input(&self, s: &PlantState, u_prime: f64) -> Result<f64> {
        self.system.check_domain(&s.q)?;
        let q = &s.q;
        let gb = self.model.input_vector(q);
        let (grad_q, grad_p) = self.system.grad_hamiltonian(s)?;
        let md = self.system.shaped_mass(q);
        let inner = self.open_loop().potential_grad(q) - &md * grad_q + self.system.j2(q, &s.momentum) * &grad_p;
        let gtg = gb.norm_squared();
        let mu = self.params().mu(q[0]);
        let shaping = (gb.transpose() * inner)[0] / gtg;
        let damping = self.shaping().k_p / (mu * mu) * (gb.transpose() * grad_p)[0];
        Ok(shaping - damping + u_prime)
    }

    /// `T = μ [−b c/D, 1/D; 1, b c]`, `D = b²c² + 1`.
    pub fn closed_form_t(&self, q: &Vector) -> Matrix {
        let b = self.params().b();
        let c = q[0].cos();
        let mu = self.params().mu(q[0]);
        let den = b * b * c * c + 1.0;
        mu * dmatrix![-b * c / den, 1.0 / den; 1.0, b * c]
    }

    /// `T⁻¹ = (1/μ) [−b c, 1/D; 1, b c/D]`.
    pub fn closed_form_t_inverse(&self, q: &Vector) -> Matrix {
        closed_form_t_inverse(&self.params(), q)
    }

    /// `S₁ = μ/D [−k b³c⁴/3 − k b c²/2; k b² c³/2 + k c + m₂₂⁰]`.
    pub fn closed_form_s1(&self, q: &Vector) -> Matrix {
        let (b, sh) = (self.params().b(), self.shaping());
        let c = q[0].cos();
        let mu = self.params().mu(q[0]);
        let den = b * b * c * c + 1.0;
        let k = sh.k;
        mu / den * dmatrix![
            -k * b.powi(3) / 3.0 * c.powi(4) - k * b / 2.0 * c * c;
            k * b * b / 2.0 * c.powi(3) + k * c + sh.m22_0
        ]
    }

    /// `S₃₂ = μ²/D [−b c, 1] J_p [1; b c]` with `J_p` assembled from the
    /// closed-form `T⁻¹` and its partials.
    pub fn closed_form_s32(&self, q: &Vector, p: &Vector) -> Result<Matrix> {
        self.system.check_domain(q)?;
        let params = self.params();
        let b = params.b();
        let c = q[0].cos();
        let mu = params.mu(q[0]);
        let den = b * b * c * c + 1.0;
        let t_inv = closed_form_t_inverse(&params, q);
        let mut a = Matrix::zeros(2, 2);
        for i in 0..2 {
            a.set_column(i, &(t_inverse_partial(&params, q, i) * p));
        }
        let md = self.system.shaped_mass(q);
        let momentum = &t_inv * p;
        let md_inv = self.system.shaped_mass_inverse(q)?;
        let coeff = (momentum.transpose() * md_inv * self.model.alpha(q))[0];
        let j2 = dmatrix![0.0, coeff; -coeff, 0.0];
        let jp = &md * a.transpose() - &a * &md + j2;
        Ok(mu * mu / den * dmatrix![-b * c, 1.0] * jp * dmatrix![1.0; b * c])
    }

    /// Simplified law for `J_c1 = 0`, `R_c1 = K_p`:
    /// `ũ = −R_c2 ∇_{p₁}𝓗_d − K_p K_I (p₁ − ζ)`.
    pub fn simplified_ia_control(&self, ts: &TransformedSystem, k_i: f64, r_c2: f64, x: &ClosedLoopState) -> Result<f64> {
        let pt = ts.evaluate(&x.q, &x.p())?;
        Ok(-r_c2 * pt.grad.p1[0] - self.shaping().k_p * k_i * (x.p1[0] - x.zeta[0]))
    }
}

fn closed_form_t_inverse(params: &CartPendulumParams, q: &Vector) -> Matrix {
    let b = params.b();
    let c = q[0].cos();
    let mu = params.mu(q[0]);
    let den = b * b * c * c + 1.0;
    dmatrix![-b * c, 1.0 / den; 1.0, b * c / den] / mu
}

/// `∂T⁻¹/∂q_i`; only `q₁` enters.
fn t_inverse_partial(params: &CartPendulumParams, q: &Vector, i: usize) -> Matrix {
    if i != 0 {
        return Matrix::zeros(2, 2);
    }
    let b = params.b();
    let (s, c) = q[0].sin_cos();
    let mu = params.mu(q[0]);
    let mu_p = 2.0 * params.m_p * s * c;
    let den = b * b * c * c + 1.0;
    let den_p = -2.0 * b * b * c * s;
    let e = 1.0 / mu;
    let e_p = -mu_p / (mu * mu);
    let f = 1.0 / (mu * den);
    let f_p = -(mu_p * den + mu * den_p) / (mu * den).powi(2);
    dmatrix![
        b * s * e - b * c * e_p, f_p;
        e_p, -b * s * f + b * c * f_p
    ]
}
