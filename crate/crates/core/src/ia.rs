//! Integral-action controller for the transformed system.
//!
//! ```text
//! u  = (−S₃₁ + K_p + J_c1 − R_c1 − R_c2) ∇_{p₁}𝓗_d + (J_c1 − R_c1) ∇_{p₁}𝓗_c
//! ζ̇  = −R_c2 ∇_{p₁}𝓗_d − S₁ᵀ ∇_q𝓗_d + S₃₂ ∇_{p₂}𝓗_d
//! 𝓗_c = ½ (p₁ − ζ)ᵀ K_I (p₁ − ζ)
//! ```
//!
//! The closed loop is `ẇ = F(w) ∇𝓗_cl − col(0, d, 0, 0)` with
//! `𝓗_cl = 𝓗_d + 𝓗_c` and
//!
//! ```text
//!        [  0     S₁                 S₂     S₁   ]
//! F  =   [ −S₁ᵀ   J_c1 − R_c1 − R_c2  S₃₂   −R_c2 ]
//!        [ −S₂ᵀ  −S₃₂ᵀ               S₃₄  −S₃₂ᵀ ]
//!        [ −S₁ᵀ  −R_c2                S₃₂   −R_c2 ]
//! ```
//!
//! whose symmetric part is negative semidefinite.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::PlantState;
use crate::transform::{TransformedPoint, TransformedSystem};

const SKEW_TOL: f64 = 1e-12;

/// Controller gains `K_I`, `J_c1`, `R_c1`, `R_c2` (all `m × m`).
#[derive(Debug, Clone, PartialEq)]
pub struct IaGains {
    k_i: Matrix,
    j_c1: Matrix,
    r_c1: Matrix,
    r_c2: Matrix,
}

impl IaGains {
    /// Validates `K_I, R_c1, R_c2 ≻ 0` and `J_c1 = −J_c1ᵀ`.
    pub fn new(k_i: Matrix, j_c1: Matrix, r_c1: Matrix, r_c2: Matrix) -> Result<Self> {
        let m = k_i.nrows();
        for (name, mat) in [("k_i", &k_i), ("j_c1", &j_c1), ("r_c1", &r_c1), ("r_c2", &r_c2)] {
            if mat.shape() != (m, m) {
                return Err(Error::dimension(name, format!("{m}x{m}"), format!("{}x{}", mat.nrows(), mat.ncols())));
            }
        }
        for (name, mat) in [("k_i", &k_i), ("r_c1", &r_c1), ("r_c2", &r_c2)] {
            if !linalg::is_positive_definite(mat) {
                return Err(Error::InvalidGains(format!("{name} must be symmetric positive-definite")));
            }
        }
        if linalg::skew_defect(&j_c1) > SKEW_TOL {
            return Err(Error::InvalidGains("j_c1 must be skew-symmetric".into()));
        }
        let gains = IaGains { k_i, j_c1, r_c1, r_c2 };
        gains.coupling_inverse()?;
        Ok(gains)
    }

    /// Single-input gains.
    pub fn scalar(k_i: f64, j_c1: f64, r_c1: f64, r_c2: f64) -> Result<Self> {
        let s = |x: f64| Matrix::from_element(1, 1, x);
        IaGains::new(s(k_i), s(j_c1), s(r_c1), s(r_c2))
    }

    /// Simplifying choice `J_c1 = S₃₁`, `R_c1 = K_p` for plants where both
    /// are constant. The control law then reduces to
    /// `u = −R_c2 ∇_{p₁}𝓗_d − K_p ∇_{p₁}𝓗_c`.
    pub fn with_plant_damping(k_i: Matrix, s31: Matrix, k_p: Matrix, r_c2: Matrix) -> Result<Self> {
        IaGains::new(k_i, s31, k_p, r_c2)
    }

    pub fn dim(&self) -> usize {
        self.k_i.nrows()
    }

    pub fn k_i(&self) -> &Matrix {
        &self.k_i
    }

    pub fn j_c1(&self) -> &Matrix {
        &self.j_c1
    }

    pub fn r_c1(&self) -> &Matrix {
        &self.r_c1
    }

    pub fn r_c2(&self) -> &Matrix {
        &self.r_c2
    }

    /// `(J_c1 − R_c1)⁻¹`.
    pub fn coupling_inverse(&self) -> Result<Matrix> {
        linalg::inverse(&(&self.j_c1 - &self.r_c1), "J_c1 - R_c1").map_err(|_| Error::GainsDegenerate)
    }

    #[cfg(test)]
    pub(crate) fn unchecked(k_i: Matrix, j_c1: Matrix, r_c1: Matrix, r_c2: Matrix) -> Self {
        IaGains { k_i, j_c1, r_c1, r_c2 }
    }
}

/// `w = col(q, p₁, p₂, ζ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopState {
    pub q: Vector,
    pub p1: Vector,
    pub p2: Vector,
    pub zeta: Vector,
}

impl ClosedLoopState {
    pub fn new(q: Vector, p1: Vector, p2: Vector, zeta: Vector) -> Self {
        ClosedLoopState { q, p1, p2, zeta }
    }

    pub fn p(&self) -> Vector {
        linalg::concat(&[&self.p1, &self.p2])
    }

    pub fn to_vector(&self) -> Vector {
        linalg::concat(&[&self.q, &self.p1, &self.p2, &self.zeta])
    }

    /// Splits a flat `w` of length `2n + m`.
    pub fn from_vector(w: &Vector, n: usize, m: usize) -> Self {
        ClosedLoopState {
            q: linalg::segment(w, 0, n),
            p1: linalg::segment(w, n, m),
            p2: linalg::segment(w, n + m, n - m),
            zeta: linalg::segment(w, 2 * n, m),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

/// The integral-action law bound to a transformed system.
#[derive(Debug, Clone)]
pub struct IaController {
    system: TransformedSystem,
    gains: IaGains,
    coupling_inv: Matrix,
}

impl IaController {
    pub fn new(system: TransformedSystem, gains: IaGains) -> Result<Self> {
        if gains.dim() != system.inputs() {
            return Err(Error::dimension("gains", system.inputs(), gains.dim()));
        }
        let coupling_inv = gains.coupling_inverse()?;
        Ok(IaController {
            system,
            gains,
            coupling_inv,
        })
    }

    pub fn system(&self) -> &TransformedSystem {
        &self.system
    }

    pub fn gains(&self) -> &IaGains {
        &self.gains
    }

    fn check(&self, x: &ClosedLoopState) -> Result<()> {
        let n = self.system.dof();
        let m = self.system.inputs();
        if x.q.len() != n || x.p1.len() != m || x.p2.len() != n - m || x.zeta.len() != m {
            return Err(Error::dimension("closed-loop state", format!("(q: {n}, p1: {m}, p2: {}, zeta: {m})", n - m), format!("({}, {}, {}, {})", x.q.len(), x.p1.len(), x.p2.len(), x.zeta.len())));
        }
        Ok(())
    }

    fn check_disturbance(&self, d: &Vector) -> Result<()> {
        if d.len() != self.system.inputs() {
            return Err(Error::dimension("d", self.system.inputs(), d.len()));
        }
        Ok(())
    }

    pub fn point(&self, x: &ClosedLoopState) -> Result<TransformedPoint> {
        self.check(x)?;
        self.system.evaluate(&x.q, &x.p())
    }

    /// `∇_{p₁}𝓗_c = K_I (p₁ − ζ)`.
    pub fn controller_gradient(&self, x: &ClosedLoopState) -> Vector {
        &self.gains.k_i * (&x.p1 - &x.zeta)
    }

    /// `𝓗_c = ½ (p₁ − ζ)ᵀ K_I (p₁ − ζ)`.
    pub fn controller_energy(&self, x: &ClosedLoopState) -> f64 {
        let z = &x.p1 - &x.zeta;
        0.5 * z.dot(&(&self.gains.k_i * &z))
    }

    fn control_at(&self, pt: &TransformedPoint, x: &ClosedLoopState) -> Vector {
        let g = &self.gains;
        let gain_d = -&pt.blocks.s31 + &pt.damping_gain + &g.j_c1 - &g.r_c1 - &g.r_c2;
        gain_d * &pt.grad.p1 + (&g.j_c1 - &g.r_c1) * self.controller_gradient(x)
    }

    fn integrator_at(&self, pt: &TransformedPoint) -> Vector {
        let b = &pt.blocks;
        -(&self.gains.r_c2 * &pt.grad.p1) - b.s1.transpose() * &pt.grad.q + &b.s32 * &pt.grad.p2
    }

    /// Control input `u`.
    pub fn control(&self, x: &ClosedLoopState) -> Result<Vector> {
        let pt = self.point(x)?;
        Ok(self.control_at(&pt, x))
    }

    /// Integrator rate `ζ̇`.
    pub fn integrator_dynamics(&self, x: &ClosedLoopState) -> Result<Vector> {
        let pt = self.point(x)?;
        Ok(self.integrator_at(&pt))
    }

    /// Input for the original-coordinate plant. The momentum change leaves
    /// the input channel untouched, so this is the same `u`.
    pub fn plant_input(&self, x: &ClosedLoopState) -> Result<Vector> {
        self.control(x)
    }

    fn f_at(&self, pt: &TransformedPoint) -> Matrix {
        let n = self.system.dof();
        let m = self.system.inputs();
        let s = n - m;
        let b = &pt.blocks;
        let g = &self.gains;
        let dim = 2 * n + m;
        let mut f = Matrix::zeros(dim, dim);
        let (r_q, r_p1, r_p2, r_z) = (0, n, n + m, 2 * n);
        let mut put = |r: usize, c: usize, blk: &Matrix| {
            f.view_mut((r, c), blk.shape()).copy_from(blk);
        };
        let s1t = b.s1.transpose();
        let s32t = b.s32.transpose();
        put(r_q, r_p1, &b.s1);
        put(r_q, r_p2, &b.s2);
        put(r_q, r_z, &b.s1);
        put(r_p1, r_q, &-&s1t);
        put(r_p1, r_p1, &(&g.j_c1 - &g.r_c1 - &g.r_c2));
        put(r_p1, r_p2, &b.s32);
        put(r_p1, r_z, &-&g.r_c2);
        put(r_p2, r_q, &-b.s2.transpose());
        put(r_p2, r_p1, &-&s32t);
        put(r_p2, r_p2, &b.s34);
        put(r_p2, r_z, &-&s32t);
        put(r_z, r_q, &-&s1t);
        put(r_z, r_p1, &-&g.r_c2);
        put(r_z, r_p2, &b.s32);
        put(r_z, r_z, &-&g.r_c2);
        debug_assert_eq!(s, b.s34.nrows());
        f
    }

    /// Interconnection-damping matrix `F(w)`.
    pub fn f_matrix(&self, x: &ClosedLoopState) -> Result<Matrix> {
        let pt = self.point(x)?;
        Ok(self.f_at(&pt))
    }

    fn closed_loop_gradient_at(&self, pt: &TransformedPoint, x: &ClosedLoopState) -> Vector {
        let hc = self.controller_gradient(x);
        linalg::concat(&[&pt.grad.q, &(&pt.grad.p1 + &hc), &pt.grad.p2, &-hc])
    }

    /// `∇𝓗_cl` stacked as `col(∇_q, ∇_{p₁}, ∇_{p₂}, ∇_ζ)`.
    pub fn closed_loop_gradient(&self, x: &ClosedLoopState) -> Result<Vector> {
        let pt = self.point(x)?;
        Ok(self.closed_loop_gradient_at(&pt, x))
    }

    /// `ẇ = F ∇𝓗_cl − col(0, d, 0, 0)`.
    pub fn closed_loop_dynamics(&self, x: &ClosedLoopState, d: &Vector) -> Result<ClosedLoopState> {
        self.check_disturbance(d)?;
        let pt = self.point(x)?;
        let mut w_dot = self.f_at(&pt) * self.closed_loop_gradient_at(&pt, x);
        let n = self.system.dof();
        let m = self.system.inputs();
        let mut p1_dot = w_dot.rows_mut(n, m);
        p1_dot -= d;
        Ok(ClosedLoopState::from_vector(&w_dot, n, m))
    }

    /// The plant's transformed dynamics under `u = control(w)` stacked with
    /// `ζ̇`: the second evaluation route for the closed loop.
    pub fn plant_route_dynamics(&self, x: &ClosedLoopState, d: &Vector) -> Result<ClosedLoopState> {
        self.check_disturbance(d)?;
        let pt = self.point(x)?;
        let u = self.control_at(&pt, x);
        let rates = pt.dynamics(&u, d);
        Ok(ClosedLoopState::new(rates.q_dot, rates.p1_dot, rates.p2_dot, self.integrator_at(&pt)))
    }

    /// Isolated equilibrium `(q*, 0, −K_I⁻¹(J_c1 − R_c1)⁻¹ d)`.
    pub fn equilibrium(&self, d: &Vector) -> Result<ClosedLoopState> {
        self.check_disturbance(d)?;
        let n = self.system.dof();
        let m = self.system.inputs();
        let k_i_inv = linalg::inverse(&self.gains.k_i, "K_I")?;
        let zeta = -(k_i_inv * &self.coupling_inv * d);
        Ok(ClosedLoopState::new(self.system.base().q_star(), Vector::zeros(m), Vector::zeros(n - m), zeta))
    }

    /// `z* = K_I⁻¹ (J_c1 − R_c1)⁻¹ d`.
    pub fn z_star(&self, d: &Vector) -> Result<Vector> {
        let k_i_inv = linalg::inverse(&self.gains.k_i, "K_I")?;
        Ok(k_i_inv * &self.coupling_inv * d)
    }

    /// `𝒲 = 𝓗_d + ½ (z − z*)ᵀ K_I (z − z*)` with `z = p₁ − ζ`.
    pub fn lyapunov(&self, x: &ClosedLoopState, d: &Vector) -> Result<f64> {
        self.check(x)?;
        self.check_disturbance(d)?;
        let hd = self.system.hamiltonian(&x.q, &x.p())?;
        let e = &x.p1 - &x.zeta - self.z_star(d)?;
        Ok(hd + 0.5 * e.dot(&(&self.gains.k_i * &e)))
    }

    fn lyapunov_gradient_at(&self, pt: &TransformedPoint, x: &ClosedLoopState, d: &Vector) -> Vector {
        let n = self.system.dof();
        let m = self.system.inputs();
        let shift = &self.coupling_inv * d;
        let mut grad = self.closed_loop_gradient_at(pt, x);
        let mut p1 = grad.rows_mut(n, m);
        p1 -= &shift;
        let mut zeta = grad.rows_mut(2 * n, m);
        zeta += &shift;
        grad
    }

    /// `∇_w𝒲 = ∇𝓗_cl + col(0, −(J_c1−R_c1)⁻¹d, 0, (J_c1−R_c1)⁻¹d)`.
    pub fn lyapunov_gradient(&self, x: &ClosedLoopState, d: &Vector) -> Result<Vector> {
        self.check_disturbance(d)?;
        let pt = self.point(x)?;
        Ok(self.lyapunov_gradient_at(&pt, x, d))
    }

    /// `𝒲̇ = (∇_w𝒲)ᵀ F ∇_w𝒲`.
    pub fn lyapunov_rate(&self, x: &ClosedLoopState, d: &Vector) -> Result<f64> {
        self.check_disturbance(d)?;
        let pt = self.point(x)?;
        let grad = self.lyapunov_gradient_at(&pt, x, d);
        Ok(grad.dot(&(self.f_at(&pt) * &grad)))
    }

    /// `y_{p₁} = col(∇_{p₁}𝓗_d, ∇_{p₁}𝓗_c − (J_c1 − R_c1)⁻¹ d)`.
    pub fn detectability_output(&self, x: &ClosedLoopState, d: &Vector) -> Result<Vector> {
        self.check_disturbance(d)?;
        let pt = self.point(x)?;
        let second = self.controller_gradient(x) - &self.coupling_inv * d;
        Ok(linalg::concat(&[&pt.grad.p1, &second]))
    }

    /// `𝓗_d + 𝓗_c`.
    pub fn closed_loop_hamiltonian(&self, x: &ClosedLoopState) -> Result<f64> {
        self.check(x)?;
        Ok(self.system.hamiltonian(&x.q, &x.p())? + self.controller_energy(x))
    }

    /// Closed-loop state from an original-coordinate plant state.
    pub fn from_plant(&self, s: &PlantState, zeta: Vector) -> Result<ClosedLoopState> {
        let m = self.system.inputs();
        let n = self.system.dof();
        let p = self.system.to_transformed(s)?;
        Ok(ClosedLoopState::new(s.q.clone(), linalg::segment(&p, 0, m), linalg::segment(&p, m, n - m), zeta))
    }

    pub fn to_plant(&self, x: &ClosedLoopState) -> Result<PlantState> {
        self.system.to_plant(&x.q, &x.p())
    }
}
