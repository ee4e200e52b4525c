//! Change of momentum coordinates `p = T(q) 𝐩` with
//!
//! ```text
//! T(q) = [ (GᵀG)⁻¹Gᵀ ]
//!        [    G⊥     ]
//! ```
//!
//! In the new coordinates the matched input enters the first `m` momentum
//! components through the identity:
//!
//! ```text
//! q̇  =  S₁ ∇_{p₁}𝓗_d + S₂ ∇_{p₂}𝓗_d
//! ṗ₁ = −S₁ᵀ∇_q𝓗_d + (S₃₁ − K_p)∇_{p₁}𝓗_d + S₃₂ ∇_{p₂}𝓗_d + u − d
//! ṗ₂ = −S₂ᵀ∇_q𝓗_d − S₃₂ᵀ∇_{p₁}𝓗_d + S₃₄ ∇_{p₂}𝓗_d
//! ```
//!
//! where `𝓗_d(q, p) = 𝐇_d(q, T⁻¹p)`. The gyroscopic term
//!
//! ```text
//! J_p = 𝐌_d M⁻¹ Aᵀ − A M⁻¹ 𝐌_d + 𝐉_2(q, T⁻¹p),     A = ∂(T⁻¹(q) p)/∂q
//! ```
//!
//! is skew by construction.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fd;
use crate::linalg::{self, Matrix, Vector};
use crate::model::{DerivativeMode, PlantState, ShapedMechanicalSystem};

/// `q ↦ matrix`.
pub type MatrixMap = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
/// `(q, i) ↦ ∂(matrix)/∂q_i`.
pub type PartialMap = Arc<dyn Fn(&Vector, usize) -> Matrix + Send + Sync>;

/// Tolerance for `G⊥ G = 0` when validating an annihilator.
pub const ANNIHILATOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnihilatorMode {
    /// A closed-form map supplied with the system.
    Supplied,
    /// Orthonormal rows computed from `G(q)`, aligned with those at `q*`.
    Computed,
}

/// Full-rank left annihilator `G⊥(q)`, an `s × n` map with `G⊥ G = 0`.
#[derive(Clone)]
pub struct Annihilator {
    map: MatrixMap,
    mode: AnnihilatorMode,
    rows: usize,
}

impl fmt::Debug for Annihilator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Annihilator")
            .field("mode", &self.mode)
            .field("rows", &self.rows)
            .finish()
    }
}

impl Annihilator {
    /// Orthonormal rows spanning the left null space of `G(q)`, obtained by
    /// projecting the rows of [`left_annihilator`]`(G(q*))` onto that null
    /// space and orthonormalising symmetrically. The result is smooth in `q`
    /// and equals the reference rows wherever `G(q) = G(q*)`; it is NaN where
    /// the projection loses rank.
    pub fn computed(sys: &ShapedMechanicalSystem) -> Result<Self> {
        let model = sys.model().clone();
        let reference = left_annihilator(&model.input_matrix(&sys.q_star()))?;
        let map: MatrixMap = Arc::new(move |q: &Vector| {
            let g = model.input_matrix(q);
            aligned_annihilator(&g, &reference).unwrap_or_else(|| Matrix::from_element(reference.nrows(), reference.ncols(), f64::NAN))
        });
        Ok(Annihilator {
            map,
            mode: AnnihilatorMode::Computed,
            rows: sys.dof() - sys.inputs(),
        })
    }

    /// Wraps a user-supplied map after validating `G⊥ G = 0` and full row
    /// rank at `q*` and at every sample.
    pub fn supplied(sys: &ShapedMechanicalSystem, map: MatrixMap, samples: &[Vector]) -> Result<Self> {
        let rows = sys.dof() - sys.inputs();
        let ann = Annihilator {
            map,
            mode: AnnihilatorMode::Supplied,
            rows,
        };
        let q_star = sys.q_star();
        for q in std::iter::once(&q_star).chain(samples) {
            ann.validate_at(sys, q)?;
        }
        Ok(ann)
    }

    fn validate_at(&self, sys: &ShapedMechanicalSystem, q: &Vector) -> Result<()> {
        let g = sys.input_matrix(q);
        let gp = self.eval(q);
        if gp.shape() != (self.rows, sys.dof()) {
            return Err(Error::NotAnAnnihilator {
                reason: format!("expected {}x{}, got {}x{}", self.rows, sys.dof(), gp.nrows(), gp.ncols()),
            });
        }
        let product = linalg::max_abs(&(&gp * &g));
        if product > ANNIHILATOR_TOL * linalg::max_abs(&gp).max(1.0) * linalg::max_abs(&g).max(1.0) {
            return Err(Error::NotAnAnnihilator {
                reason: format!("|G⊥G| = {product:e} at q = {:?}", q.as_slice()),
            });
        }
        if linalg::rank(&gp, 1e-10) != self.rows {
            return Err(Error::NotAnAnnihilator {
                reason: format!("G⊥ is rank deficient at q = {:?}", q.as_slice()),
            });
        }
        Ok(())
    }

    pub fn eval(&self, q: &Vector) -> Matrix {
        (self.map)(q)
    }

    pub fn mode(&self) -> AnnihilatorMode {
        self.mode
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Rows form an orthonormal basis of `{ x : xᵀ G = 0 }`, built by
/// Gram–Schmidt on the projected canonical basis in index order. Each row's
/// first nonzero entry is positive.
pub fn left_annihilator(g: &Matrix) -> Result<Matrix> {
    let (n, m) = g.shape();
    let singular = || Error::RankDeficientG { q: Vec::new() };
    if m > n || linalg::rank(g, 1e-10) != m {
        return Err(singular());
    }
    let s = n - m;
    let normal_inv = linalg::inverse(&(g.transpose() * g), "GᵀG").map_err(|_| singular())?;
    let projector = Matrix::identity(n, n) - g * normal_inv * g.transpose();
    let mut basis: Vec<Vector> = Vec::with_capacity(s);
    for j in 0..n {
        if basis.len() == s {
            break;
        }
        let mut v: Vector = projector.column(j).into_owned();
        // two passes keep the rows orthogonal to machine precision
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    if basis.len() != s {
        return Err(singular());
    }
    let mut out = Matrix::zeros(s, n);
    for (i, mut b) in basis.into_iter().enumerate() {
        if let Some(first) = b.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                b = -b;
            }
        }
        out.row_mut(i).copy_from(&b.transpose());
    }
    Ok(out)
}

/// `(X Xᵀ)^{-1/2} X` with `X = R (I − G(GᵀG)⁻¹Gᵀ)`.
fn aligned_annihilator(g: &Matrix, reference: &Matrix) -> Option<Matrix> {
    let n = g.nrows();
    let normal_inv = linalg::inverse(&(g.transpose() * g), "GᵀG").ok()?;
    let projector = Matrix::identity(n, n) - g * normal_inv * g.transpose();
    let x = reference * projector;
    let eig = (&x * x.transpose()).symmetric_eigen();
    if eig.eigenvalues.iter().any(|l| !(*l > 1e-8)) {
        return None;
    }
    let inv_sqrt = &eig.eigenvectors * Matrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt())) * eig.eigenvectors.transpose();
    Some(inv_sqrt * x)
}

/// `T = [(GᵀG)⁻¹Gᵀ; G⊥]`.
pub fn build_t(g: &Matrix, gperp: &Matrix) -> Result<Matrix> {
    let (n, m) = g.shape();
    if gperp.shape() != (n - m, n) {
        return Err(Error::dimension("G⊥", format!("{}x{}", n - m, n), format!("{}x{}", gperp.nrows(), gperp.ncols())));
    }
    let normal_inv = linalg::inverse(&(g.transpose() * g), "GᵀG").map_err(|_| Error::SingularNormalMatrix { q: Vec::new() })?;
    let top = normal_inv * g.transpose();
    let mut t = Matrix::zeros(n, n);
    t.view_mut((0, 0), (m, n)).copy_from(&top);
    t.view_mut((m, 0), (n - m, n)).copy_from(gperp);
    Ok(t)
}

/// The five interconnection blocks of the transformed system.
#[derive(Debug, Clone, PartialEq)]
pub struct SBlocks {
    /// `M⁻¹𝐌_d G (GᵀG)⁻¹`, `n × m`.
    pub s1: Matrix,
    /// `M⁻¹𝐌_d G⊥ᵀ`, `n × s`.
    pub s2: Matrix,
    /// `(GᵀG)⁻¹Gᵀ J_p G (GᵀG)⁻¹`, `m × m`, skew.
    pub s31: Matrix,
    /// `(GᵀG)⁻¹Gᵀ J_p G⊥ᵀ`, `m × s`.
    pub s32: Matrix,
    /// `G⊥ J_p G⊥ᵀ`, `s × s`, skew.
    pub s34: Matrix,
}

/// Gradients of the transformed Hamiltonian, `p` split as `col(p₁, p₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedGradient {
    pub q: Vector,
    pub p1: Vector,
    pub p2: Vector,
}

impl TransformedGradient {
    pub fn p(&self) -> Vector {
        linalg::concat(&[&self.p1, &self.p2])
    }
}

/// `(q̇, ṗ₁, ṗ₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedRates {
    pub q_dot: Vector,
    pub p1_dot: Vector,
    pub p2_dot: Vector,
}

impl TransformedRates {
    pub fn to_vector(&self) -> Vector {
        linalg::concat(&[&self.q_dot, &self.p1_dot, &self.p2_dot])
    }
}

/// Everything the transformed dynamics need at one `(q, p)`, evaluated once.
#[derive(Debug, Clone)]
pub struct TransformedPoint {
    pub q: Vector,
    pub p: Vector,
    /// Original momentum `𝐩 = T⁻¹ p`.
    pub momentum: Vector,
    pub g: Matrix,
    pub gperp: Matrix,
    /// `(GᵀG)⁻¹`.
    pub normal_inv: Matrix,
    pub t: Matrix,
    pub t_inv: Matrix,
    pub mass_inv: Matrix,
    pub shaped_mass: Matrix,
    /// `A = ∂(T⁻¹p)/∂q`.
    pub momentum_jacobian: Matrix,
    pub jp: Matrix,
    pub damping_gain: Matrix,
    pub blocks: SBlocks,
    pub grad: TransformedGradient,
}

impl TransformedPoint {
    pub fn inputs(&self) -> usize {
        self.g.ncols()
    }

    /// Transformed vector field under input `u` and disturbance `d`.
    pub fn dynamics(&self, u: &Vector, d: &Vector) -> TransformedRates {
        let b = &self.blocks;
        let gr = &self.grad;
        let q_dot = &b.s1 * &gr.p1 + &b.s2 * &gr.p2;
        let p1_dot = -(b.s1.transpose() * &gr.q) + (&b.s31 - &self.damping_gain) * &gr.p1 + &b.s32 * &gr.p2 + u - d;
        let p2_dot = -(b.s2.transpose() * &gr.q) - b.s32.transpose() * &gr.p1 + &b.s34 * &gr.p2;
        TransformedRates { q_dot, p1_dot, p2_dot }
    }

    /// Output `y = ∇_{p₁}𝓗_d`.
    pub fn output(&self) -> Vector {
        self.grad.p1.clone()
    }
}

/// A shaped system expressed in `(q, p₁, p₂)` coordinates.
#[derive(Clone)]
pub struct TransformedSystem {
    base: ShapedMechanicalSystem,
    annihilator: Annihilator,
    t_inverse_partial: Option<PartialMap>,
}

impl fmt::Debug for TransformedSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformedSystem")
            .field("base", &self.base)
            .field("annihilator", &self.annihilator)
            .field("analytic_t_inverse", &self.t_inverse_partial.is_some())
            .finish()
    }
}

impl TransformedSystem {
    pub fn new(base: ShapedMechanicalSystem, annihilator: Annihilator) -> Result<Self> {
        if annihilator.rows() != base.dof() - base.inputs() {
            return Err(Error::dimension("annihilator rows", base.dof() - base.inputs(), annihilator.rows()));
        }
        let ts = TransformedSystem {
            base,
            annihilator,
            t_inverse_partial: None,
        };
        ts.t_matrix(&ts.base.q_star())?;
        Ok(ts)
    }

    /// Supplies closed-form `∂T⁻¹/∂q_i`; used unless the base system is in
    /// finite-difference mode.
    pub fn with_t_inverse_partials(mut self, partial: PartialMap) -> Self {
        self.t_inverse_partial = Some(partial);
        self
    }

    /// Same system with every derivative taken by finite differences.
    pub fn finite_difference_only(&self) -> Self {
        TransformedSystem {
            base: self.base.clone().with_mode(DerivativeMode::FiniteDifference),
            annihilator: self.annihilator.clone(),
            t_inverse_partial: self.t_inverse_partial.clone(),
        }
    }

    pub fn base(&self) -> &ShapedMechanicalSystem {
        &self.base
    }

    pub fn annihilator(&self) -> &Annihilator {
        &self.annihilator
    }

    pub fn dof(&self) -> usize {
        self.base.dof()
    }

    pub fn inputs(&self) -> usize {
        self.base.inputs()
    }

    /// `s = n − m`.
    pub fn unactuated(&self) -> usize {
        self.base.dof() - self.base.inputs()
    }

    fn uses_analytic_partials(&self) -> bool {
        self.t_inverse_partial.is_some() && self.base.mode() == DerivativeMode::Analytic
    }

    pub fn t_matrix(&self, q: &Vector) -> Result<Matrix> {
        let g = self.base.input_matrix(q);
        build_t(&g, &self.annihilator.eval(q)).map_err(|e| match e {
            Error::SingularNormalMatrix { .. } => Error::SingularNormalMatrix { q: q.iter().copied().collect() },
            other => other,
        })
    }

    pub fn t_inverse(&self, q: &Vector) -> Result<Matrix> {
        linalg::inverse(&self.t_matrix(q)?, "T")
    }

    /// `∂(T⁻¹(q) p)/∂q`, analytic or by central differences.
    pub fn momentum_jacobian(&self, q: &Vector, p: &Vector) -> Result<Matrix> {
        let n = self.dof();
        match &self.t_inverse_partial {
            Some(partial) if self.uses_analytic_partials() => {
                let mut a = Matrix::zeros(n, n);
                for i in 0..n {
                    a.set_column(i, &(partial(q, i) * p));
                }
                Ok(a)
            }
            _ => fd::fd_jacobian(|x| Ok(self.t_inverse(x)? * p), q, fd::RELATIVE_STEP),
        }
    }

    /// Full evaluation at transformed coordinates `(q, p)`.
    pub fn evaluate(&self, q: &Vector, p: &Vector) -> Result<TransformedPoint> {
        let n = self.dof();
        let m = self.inputs();
        if q.len() != n || p.len() != n {
            return Err(Error::dimension("(q, p)", n, q.len().max(p.len())));
        }
        self.base.check_domain(q)?;
        let g = self.base.input_matrix(q);
        let gperp = self.annihilator.eval(q);
        let normal_inv = linalg::inverse(&(g.transpose() * &g), "GᵀG").map_err(|_| Error::SingularNormalMatrix { q: q.iter().copied().collect() })?;
        let t = build_t(&g, &gperp)?;
        let t_inv = linalg::inverse(&t, "T")?;
        let momentum = &t_inv * p;
        let mass_inv = self.base.mass_inverse(q)?;
        let shaped_mass = self.base.shaped_mass(q);
        let a = self.momentum_jacobian(q, p)?;
        let jp = &shaped_mass * &mass_inv * a.transpose() - &a * &mass_inv * &shaped_mass + self.base.j2(q, &momentum);

        let md_minv = &mass_inv * &shaped_mass;
        let gn = &g * &normal_inv;
        let blocks = SBlocks {
            s1: &md_minv * &gn,
            s2: &md_minv * gperp.transpose(),
            s31: gn.transpose() * &jp * &gn,
            s32: gn.transpose() * &jp * gperp.transpose(),
            s34: &gperp * &jp * gperp.transpose(),
        };

        let (grad_q_bold, grad_p_bold) = self.base.grad_hamiltonian(&PlantState::new(q.clone(), momentum.clone()))?;
        let grad_p = t_inv.transpose() * &grad_p_bold;
        let grad_q = grad_q_bold + a.transpose() * &grad_p_bold;
        let grad = TransformedGradient {
            q: grad_q,
            p1: linalg::segment(&grad_p, 0, m),
            p2: linalg::segment(&grad_p, m, n - m),
        };

        Ok(TransformedPoint {
            q: q.clone(),
            p: p.clone(),
            momentum,
            damping_gain: self.base.damping_gain(q),
            g,
            gperp,
            normal_inv,
            t,
            t_inv,
            mass_inv,
            shaped_mass,
            momentum_jacobian: a,
            jp,
            blocks,
            grad,
        })
    }

    /// `M_d = T 𝐌_d Tᵀ`.
    pub fn transformed_mass(&self, q: &Vector) -> Result<Matrix> {
        let t = self.t_matrix(q)?;
        Ok(&t * self.base.shaped_mass(q) * t.transpose())
    }

    pub fn jp(&self, q: &Vector, p: &Vector) -> Result<Matrix> {
        Ok(self.evaluate(q, p)?.jp)
    }

    pub fn s_blocks(&self, q: &Vector, p: &Vector) -> Result<SBlocks> {
        Ok(self.evaluate(q, p)?.blocks)
    }

    /// `𝓗_d(q, p) = 𝐇_d(q, T⁻¹p)`.
    pub fn hamiltonian(&self, q: &Vector, p: &Vector) -> Result<f64> {
        let momentum = self.t_inverse(q)? * p;
        self.base.hamiltonian(&PlantState::new(q.clone(), momentum))
    }

    pub fn transformed_dynamics(&self, q: &Vector, p: &Vector, u: &Vector, d: &Vector) -> Result<TransformedRates> {
        let m = self.inputs();
        if u.len() != m || d.len() != m {
            return Err(Error::dimension("u/d", m, u.len().max(d.len())));
        }
        Ok(self.evaluate(q, p)?.dynamics(u, d))
    }

    /// Original-coordinate state to `(q, p = T𝐩)`.
    pub fn to_transformed(&self, s: &PlantState) -> Result<Vector> {
        Ok(self.t_matrix(&s.q)? * &s.momentum)
    }

    pub fn to_plant(&self, q: &Vector, p: &Vector) -> Result<PlantState> {
        Ok(PlantState::new(q.clone(), self.t_inverse(q)? * p))
    }

    /// Pushes the original vector field forward through `(q, 𝐩) ↦ (q, T𝐩)`
    /// and returns the max-norm difference from the transformed vector field.
    /// `Ṫ` is taken by central differences with step `1e-6`.
    pub fn verify_pushforward(&self, s: &PlantState, u: &Vector, d: &Vector) -> Result<f64> {
        let rates = self.base.open_loop_dynamics(s, u, d)?;
        let n = self.dof();
        let mut t_dot = Matrix::zeros(n, n);
        for i in 0..n {
            if rates.q_dot[i] != 0.0 {
                let dt = fd::fd_matrix_partial(|x| self.t_matrix(x), &s.q, i, fd::RELATIVE_STEP)?;
                t_dot += dt * rates.q_dot[i];
            }
        }
        let t = self.t_matrix(&s.q)?;
        let pushed_p = t_dot * &s.momentum + &t * &rates.momentum_dot;
        let p = &t * &s.momentum;
        let direct = self.transformed_dynamics(&s.q, &p, u, d)?;
        let dq = linalg::max_abs_vec(&(rates.q_dot - direct.q_dot));
        let dp = linalg::max_abs_vec(&(pushed_p - linalg::concat(&[&direct.p1_dot, &direct.p2_dot])));
        Ok(dq.max(dp))
    }

    /// `‖Gᵀ∇_𝐩𝐇_d − ∇_{p₁}𝓗_d‖∞` with `∇_p𝓗_d = (T𝐌_dTᵀ)⁻¹ p` formed
    /// independently of the original-coordinate gradient.
    pub fn output_equivalence(&self, s: &PlantState) -> Result<f64> {
        let y_bold = self.base.passive_output(s)?;
        let p = self.to_transformed(s)?;
        let md_small = self.transformed_mass(&s.q)?;
        let grad_p = linalg::inverse(&md_small, "M_d")? * p;
        let y = linalg::segment(&grad_p, 0, self.inputs());
        Ok(linalg::max_abs_vec(&(y_bold - y)))
    }
}
