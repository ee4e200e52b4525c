//! Two-degree-of-freedom benchmark with constant `M`, `𝐌_d` and `G`, so that
//! both assumptions of the reference PID controller hold.
//!
//! ```text
//! M = I,  𝐌_d = [2 1; 1 1],  G = [1; 0],  𝐉_2 = 0
//! V_d = ½ (q − q*)ᵀ K_v (q − q*),  K_v = [2 1; 1 2]
//! ```

use nalgebra::{dmatrix, dvector};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{Domain, MechanicalModel};

#[derive(Debug, Clone, PartialEq)]
pub struct Linear2Dof {
    pub shaped_mass: Matrix,
    pub stiffness: Matrix,
    pub q_star: Vector,
    pub k_p: f64,
}

impl Default for Linear2Dof {
    fn default() -> Self {
        Linear2Dof {
            shaped_mass: dmatrix![2.0, 1.0; 1.0, 1.0],
            stiffness: dmatrix![2.0, 1.0; 1.0, 2.0],
            q_star: dvector![0.5, -0.5],
            k_p: 4.0,
        }
    }
}

impl Linear2Dof {
    pub fn validate(&self) -> Result<()> {
        if self.shaped_mass.shape() != (2, 2) {
            return Err(Error::dimension("shaped_mass", "2x2", format!("{}x{}", self.shaped_mass.nrows(), self.shaped_mass.ncols())));
        }
        if self.stiffness.shape() != (2, 2) {
            return Err(Error::dimension("stiffness", "2x2", format!("{}x{}", self.stiffness.nrows(), self.stiffness.ncols())));
        }
        if self.q_star.len() != 2 {
            return Err(Error::dimension("q_star", 2, self.q_star.len()));
        }
        if !linalg::is_positive_definite(&self.stiffness) {
            return Err(Error::InvalidSystem("stiffness must be symmetric positive-definite".into()));
        }
        if !(self.k_p > 0.0) {
            return Err(Error::InvalidSystem("k_p must be positive".into()));
        }
        Ok(())
    }
}

impl MechanicalModel for Linear2Dof {
    fn name(&self) -> &str {
        "linear-2dof"
    }

    fn dof(&self) -> usize {
        2
    }

    fn inputs(&self) -> usize {
        1
    }

    fn domain(&self) -> Domain {
        Domain::unbounded(2)
    }

    fn q_star(&self) -> Vector {
        self.q_star.clone()
    }

    fn mass(&self, _q: &Vector) -> Matrix {
        Matrix::identity(2, 2)
    }

    fn shaped_mass(&self, _q: &Vector) -> Matrix {
        self.shaped_mass.clone()
    }

    fn shaped_mass_partial(&self, _q: &Vector, _i: usize) -> Option<Matrix> {
        Some(Matrix::zeros(2, 2))
    }

    fn potential(&self, q: &Vector) -> f64 {
        let e = q - &self.q_star;
        0.5 * e.dot(&(&self.stiffness * &e))
    }

    fn potential_grad(&self, q: &Vector) -> Vector {
        &self.stiffness * (q - &self.q_star)
    }

    fn j2(&self, _q: &Vector, _momentum: &Vector) -> Matrix {
        Matrix::zeros(2, 2)
    }

    fn input_matrix(&self, _q: &Vector) -> Matrix {
        dmatrix![1.0; 0.0]
    }

    fn damping_gain(&self, _q: &Vector) -> Matrix {
        Matrix::from_element(1, 1, self.k_p)
    }
}
