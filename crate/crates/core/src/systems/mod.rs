//! Built-in systems and the id registry used by scenario configs.

pub mod cart_pendulum;
pub mod linear;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::dvector;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::ShapedMechanicalSystem;
use crate::transform::{Annihilator, PartialMap, TransformedSystem};

use cart_pendulum::{CartPendulum, CartPendulumParams, ShapingParams};
use linear::Linear2Dof;

/// Registered system ids.
pub const SYSTEM_IDS: [&str; 2] = ["cart-pendulum", "linear-2dof"];

/// A registry entry resolved into its shaped and transformed forms.
#[derive(Debug, Clone)]
pub struct BuiltSystem {
    pub id: String,
    pub system: ShapedMechanicalSystem,
    pub transform: TransformedSystem,
    /// Construction notes, e.g. the selected potential variant.
    pub notes: Vec<String>,
}

fn take(params: &mut BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.remove(key).unwrap_or(default)
}

fn reject_leftovers(params: BTreeMap<String, f64>) -> Result<()> {
    match params.into_keys().next() {
        Some(key) => Err(Error::Config {
            field: format!("system.params.{key}"),
            message: "unknown parameter".into(),
        }),
        None => Ok(()),
    }
}

/// Builds a registered system with optional parameter overrides.
///
/// `cart-pendulum` accepts `g, l, m_c, m_p, k, m22_0, p, k_p, q2_star`;
/// `linear-2dof` accepts `k_p, q1_star, q2_star`.
pub fn build(id: &str, params: &BTreeMap<String, f64>) -> Result<BuiltSystem> {
    let mut params = params.clone();
    match id {
        "cart-pendulum" => {
            let d = CartPendulumParams::default();
            let plant = CartPendulumParams {
                g: take(&mut params, "g", d.g),
                l: take(&mut params, "l", d.l),
                m_c: take(&mut params, "m_c", d.m_c),
                m_p: take(&mut params, "m_p", d.m_p),
            };
            let s = ShapingParams::default();
            let shaping = ShapingParams {
                k: take(&mut params, "k", s.k),
                m22_0: take(&mut params, "m22_0", s.m22_0),
                p: take(&mut params, "p", s.p),
                k_p: take(&mut params, "k_p", s.k_p),
                q2_star: take(&mut params, "q2_star", s.q2_star),
            };
            reject_leftovers(params)?;
            let cp = CartPendulum::new(plant, shaping)?;
            Ok(BuiltSystem {
                id: id.into(),
                system: cp.system().clone(),
                transform: cp.transform()?,
                notes: vec![format!("selected V_d variant: {}", cp.variant())],
            })
        }
        "linear-2dof" => {
            let d = Linear2Dof::default();
            let model = Linear2Dof {
                k_p: take(&mut params, "k_p", d.k_p),
                q_star: dvector![take(&mut params, "q1_star", d.q_star[0]), take(&mut params, "q2_star", d.q_star[1])],
                ..d
            };
            reject_leftovers(params)?;
            model.validate()?;
            let system = ShapedMechanicalSystem::new(Arc::new(model))?;
            let annihilator = Annihilator::computed(&system)?;
            let zero: PartialMap = Arc::new(|_, _| Matrix::zeros(2, 2));
            let transform = TransformedSystem::new(system.clone(), annihilator)?.with_t_inverse_partials(zero);
            Ok(BuiltSystem {
                id: id.into(),
                system,
                transform,
                notes: Vec::new(),
            })
        }
        other => Err(Error::UnknownSystem(other.into())),
    }
}
