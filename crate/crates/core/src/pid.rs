//! Nonlinear PID baseline for shaped systems with constant `G` and `𝐌_d`.
//!
//! ```text
//! u = −[K_p Gᵀ𝐌_d⁻¹G K₁ GᵀM⁻¹ + K₁ Gᵀ Ṁ⁻¹ + K₂K_I (K₂ᵀ + K₃ᵀGᵀ𝐌_d⁻¹G K₁) GᵀM⁻¹] ∇V_d
//!     −[K₁ GᵀM⁻¹ ∇²V_d M⁻¹ + (GᵀG)⁻¹Gᵀ𝐉_2𝐌_d⁻¹ + K₂K_I K₃ᵀGᵀ𝐌_d⁻¹] 𝐩
//!     −(K_P Gᵀ𝐌_d⁻¹G K₂ + K₃) K_I ζ
//! ζ̇ = (K₂ᵀGᵀM⁻¹ + K₃ᵀGᵀ𝐌_d⁻¹G K₁ GᵀM⁻¹) ∇V_d + K₃ᵀGᵀ𝐌_d⁻¹𝐩
//! K₂ = (Gᵀ𝐌_d⁻¹G)⁻¹
//! ```
//!
//! `K_p` is the plant damping gain, `K_P` the outer gain. The integrator
//! settles at `α = −K_I⁻¹(K_p + K₃)⁻¹ d` when `K_P = K_p`.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fd;
use crate::linalg::{self, Matrix, Vector};
use crate::model::{PlantRates, PlantState, ShapedMechanicalSystem};
use crate::transform::left_annihilator;

/// Largest entrywise change of `G` or `𝐌_d` across samples still treated as
/// constant.
pub const CONSTANCY_TOL: f64 = 1e-12;
/// Tolerance on the kinetic-gradient condition residual.
pub const KINETIC_TOL: f64 = 1e-8;
/// Seed for the probe states used when a controller is constructed.
pub const PROBE_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct PidGains {
    k1: Matrix,
    k_p_outer: Matrix,
    k_i: Matrix,
    k3: Matrix,
}

impl PidGains {
    /// All four gains must be symmetric positive-definite and `m × m`.
    pub fn new(k1: Matrix, k_p_outer: Matrix, k_i: Matrix, k3: Matrix) -> Result<Self> {
        let m = k1.nrows();
        for (name, mat) in [("k1", &k1), ("k_p_outer", &k_p_outer), ("k_i", &k_i), ("k3", &k3)] {
            if mat.shape() != (m, m) {
                return Err(Error::dimension(name, format!("{m}x{m}"), format!("{}x{}", mat.nrows(), mat.ncols())));
            }
            if !linalg::is_positive_definite(mat) {
                return Err(Error::InvalidGains(format!("{name} must be symmetric positive-definite")));
            }
        }
        Ok(PidGains { k1, k_p_outer, k_i, k3 })
    }

    pub fn scalar(k1: f64, k_p_outer: f64, k_i: f64, k3: f64) -> Result<Self> {
        let s = |x: f64| Matrix::from_element(1, 1, x);
        PidGains::new(s(k1), s(k_p_outer), s(k_i), s(k3))
    }

    pub fn dim(&self) -> usize {
        self.k1.nrows()
    }

    pub fn k1(&self) -> &Matrix {
        &self.k1
    }

    pub fn k_p_outer(&self) -> &Matrix {
        &self.k_p_outer
    }

    pub fn k_i(&self) -> &Matrix {
        &self.k_i
    }

    pub fn k3(&self) -> &Matrix {
        &self.k3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub violation: f64,
    pub passed: bool,
}

/// P.1: `G` and `𝐌_d` constant. P.2: `G⊥ ∇_q(𝐩ᵀM⁻¹𝐩) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub p1: AssumptionCheck,
    pub p2: AssumptionCheck,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.p1.passed && self.p2.passed
    }
}

/// Seeded in-domain states: each `q_i` within `±2` of `q*` (clipped to 90% of
/// a bounded domain), each momentum component in `[−1, 1]`.
pub fn probe_states(sys: &ShapedMechanicalSystem, seed: u64, count: usize) -> Vec<PlantState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q_star = sys.q_star();
    let domain = sys.domain();
    let n = sys.dof();
    (0..count)
        .map(|_| {
            let q = Vector::from_fn(n, |i, _| {
                let (lo, hi) = domain.bounds()[i];
                let lo = if lo.is_finite() { 0.9 * lo } else { q_star[i] - 2.0 };
                let hi = if hi.is_finite() { 0.9 * hi } else { q_star[i] + 2.0 };
                rng.gen_range(lo.max(q_star[i] - 2.0)..hi.min(q_star[i] + 2.0))
            });
            let momentum = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            PlantState::new(q, momentum)
        })
        .collect()
}

/// Evaluates P.1 and P.2 over `samples`; violations are maxima.
pub fn check_assumptions(sys: &ShapedMechanicalSystem, samples: &[PlantState]) -> Result<AssumptionReport> {
    let q_ref = sys.q_star();
    let g_ref = sys.input_matrix(&q_ref);
    let md_ref = sys.shaped_mass(&q_ref);
    let mut p1: f64 = 0.0;
    let mut p2: f64 = 0.0;
    for s in samples {
        sys.check_domain(&s.q)?;
        let q = &s.q;
        p1 = p1.max(linalg::max_abs(&(sys.input_matrix(q) - &g_ref))).max(linalg::max_abs(&(sys.shaped_mass(q) - &md_ref)));
        let kinetic = |x: &Vector| match sys.mass_inverse(x) {
            Ok(minv) => s.momentum.dot(&(minv * &s.momentum)),
            Err(_) => f64::NAN,
        };
        let grad = fd::fd_gradient(kinetic, q, fd::RELATIVE_STEP)?;
        let gperp = left_annihilator(&sys.input_matrix(q))?;
        p2 = p2.max(linalg::max_abs_vec(&(gperp * grad)));
    }
    Ok(AssumptionReport {
        p1: AssumptionCheck {
            name: "P.1",
            violation: p1,
            passed: p1 <= CONSTANCY_TOL,
        },
        p2: AssumptionCheck {
            name: "P.2",
            violation: p2,
            passed: p2 <= KINETIC_TOL,
        },
    })
}

/// `(u, ζ̇)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PidOutput {
    pub u: Vector,
    pub zeta_dot: Vector,
}

#[derive(Debug, Clone)]
pub struct ReferencePid {
    system: ShapedMechanicalSystem,
    gains: PidGains,
    g: Matrix,
    md_inv: Matrix,
    k2: Matrix,
    k_p: Matrix,
    g_pinv: Matrix,
}

impl ReferencePid {
    /// Fails with `AssumptionViolated("P.1")` unless `G` and `𝐌_d` are
    /// constant over seeded probe states.
    pub fn new(system: ShapedMechanicalSystem, gains: PidGains) -> Result<Self> {
        if gains.dim() != system.inputs() {
            return Err(Error::dimension("gains", system.inputs(), gains.dim()));
        }
        let samples = probe_states(&system, PROBE_SEED, 32);
        let report = check_assumptions(&system, &samples)?;
        if !report.p1.passed {
            return Err(Error::AssumptionViolated {
                assumption: "P.1",
                violation: report.p1.violation,
            });
        }
        if !report.p2.passed {
            warn!("P.2 violated (residual {:e}); the PID baseline may not converge", report.p2.violation);
        }
        let q_star = system.q_star();
        let g = system.input_matrix(&q_star);
        let md_inv = system.shaped_mass_inverse(&q_star)?;
        let k2 = linalg::inverse(&(g.transpose() * &md_inv * &g), "G^T M_d^-1 G")?;
        let g_pinv = linalg::inverse(&(g.transpose() * &g), "G^T G")? * g.transpose();
        let k_p = system.damping_gain(&q_star);
        Ok(ReferencePid {
            system,
            gains,
            g,
            md_inv,
            k2,
            k_p,
            g_pinv,
        })
    }

    pub fn system(&self) -> &ShapedMechanicalSystem {
        &self.system
    }

    pub fn gains(&self) -> &PidGains {
        &self.gains
    }

    /// `K₂ = (Gᵀ𝐌_d⁻¹G)⁻¹`.
    pub fn k2(&self) -> &Matrix {
        &self.k2
    }

    fn check(&self, s: &PlantState, zeta: &Vector) -> Result<()> {
        let n = self.system.dof();
        let m = self.system.inputs();
        if s.q.len() != n || s.momentum.len() != n || zeta.len() != m {
            return Err(Error::dimension("(q, p, zeta)", format!("({n}, {n}, {m})"), format!("({}, {}, {})", s.q.len(), s.momentum.len(), zeta.len())));
        }
        self.system.check_domain(&s.q)
    }

    /// `Ṁ⁻¹` along `q̇ = M⁻¹𝐩`.
    fn mass_inverse_rate(&self, s: &PlantState, minv: &Matrix) -> Result<Matrix> {
        let n = self.system.dof();
        let q_dot = minv * &s.momentum;
        let mut rate = Matrix::zeros(n, n);
        for i in 0..n {
            if q_dot[i] != 0.0 {
                let d = fd::fd_matrix_partial(|x| self.system.mass_inverse(x), &s.q, i, fd::RELATIVE_STEP)?;
                rate += d * q_dot[i];
            }
        }
        Ok(rate)
    }

    /// Control input and integrator rate.
    pub fn control(&self, s: &PlantState, zeta: &Vector) -> Result<PidOutput> {
        self.check(s, zeta)?;
        let q = &s.q;
        let p = &s.momentum;
        let gn = &self.gains;
        let (g, md_inv, k2) = (&self.g, &self.md_inv, &self.k2);
        let gt = g.transpose();
        let minv = self.system.mass_inverse(q)?;
        let minv_dot = self.mass_inverse_rate(s, &minv)?;
        let grad_v = self.system.potential_grad(q);
        let hess_v = fd::fd_jacobian(|x| Ok(self.system.potential_grad(x)), q, fd::RELATIVE_STEP)?;
        let j2 = self.system.j2(q, p);
        let gmg = &gt * md_inv * g;

        let a_v = &self.k_p * &gmg * &gn.k1 * &gt * &minv
            + &gn.k1 * &gt * &minv_dot
            + k2 * &gn.k_i * (k2.transpose() + gn.k3.transpose() * &gmg * &gn.k1) * &gt * &minv;
        let a_p = &gn.k1 * &gt * &minv * &hess_v * &minv + &self.g_pinv * &j2 * md_inv + k2 * &gn.k_i * gn.k3.transpose() * &gt * md_inv;
        let a_z = (&gn.k_p_outer * &gmg * k2 + &gn.k3) * &gn.k_i;
        let u = -(a_v * &grad_v) - a_p * p - a_z * zeta;

        let zeta_dot = (k2.transpose() * &gt * &minv + gn.k3.transpose() * &gmg * &gn.k1 * &gt * &minv) * &grad_v + gn.k3.transpose() * &gt * md_inv * p;
        Ok(PidOutput { u, zeta_dot })
    }

    /// Integrator equilibrium `α = −K_I⁻¹(K_p + K₃)⁻¹ d`.
    pub fn alpha(&self, d: &Vector) -> Result<Vector> {
        let k_i_inv = linalg::inverse(&self.gains.k_i, "K_I")?;
        let inner = linalg::inverse(&(&self.k_p + &self.gains.k3), "K_p + K_3")?;
        Ok(-(k_i_inv * inner * d))
    }

    /// `z₂ = 𝐩 + G K₁ GᵀM⁻¹∇V_d + G K₂ K_I (ζ − α)` and
    /// `H_z = ½ z₂ᵀ𝐌_d⁻¹z₂ + V_d + ½ (ζ − α)ᵀK_I(ζ − α)`.
    pub fn z2_coordinates(&self, s: &PlantState, zeta: &Vector, d: &Vector) -> Result<(Vector, f64)> {
        self.check(s, zeta)?;
        let q = &s.q;
        let gn = &self.gains;
        let minv = self.system.mass_inverse(q)?;
        let e = zeta - self.alpha(d)?;
        let z2 = &s.momentum + &self.g * &gn.k1 * self.g.transpose() * minv * self.system.potential_grad(q) + &self.g * &self.k2 * &gn.k_i * &e;
        let h_z = 0.5 * z2.dot(&(&self.md_inv * &z2)) + self.system.potential(q) + 0.5 * e.dot(&(&gn.k_i * &e));
        Ok((z2, h_z))
    }

    /// Plant rates under the PID input, with `ζ̇`.
    pub fn closed_loop_dynamics(&self, s: &PlantState, zeta: &Vector, d: &Vector) -> Result<(PlantRates, Vector)> {
        let out = self.control(s, zeta)?;
        let rates = self.system.open_loop_dynamics(s, &out.u, d)?;
        Ok((rates, out.zeta_dot))
    }
}
