//! Cart-pendulum closed forms checked against the generic machinery.

use nalgebra::dvector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phia::ia::ClosedLoopState;
use phia::linalg::{self, Vector};
use phia::sim::{self, DisturbanceSchedule, IntegratorConfig};
use phia::{CartPendulum, IaController, IaGains, IaLoop, PlantState};

const STATES: usize = 100;

fn random_states(seed: u64) -> Vec<PlantState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..STATES)
        .map(|_| PlantState::new(dvector![rng.gen_range(-1.3..1.3), rng.gen_range(-2.0..2.0)], dvector![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]))
        .collect()
}

#[test]
fn energy_shaping_law_assembles_the_shaped_system() {
    let cp = CartPendulum::fig1().unwrap();
    let plant = cp.open_loop();
    let shaped = cp.system();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for s in random_states(1) {
        let u_prime: f64 = rng.gen_range(-3.0..3.0);
        let d: f64 = rng.gen_range(-3.0..3.0);
        let u = cp.energy_shaping_input(&s, u_prime).unwrap();
        let a = plant.dynamics(&s, u, d).unwrap();
        let mu = cp.params().mu(s.q[0]);
        let b = shaped.open_loop_dynamics(&s, &dvector![mu * u_prime], &dvector![d]).unwrap();
        worst = worst.max(linalg::max_abs_vec(&(&a.q_dot - &b.q_dot))).max(linalg::max_abs_vec(&(&a.momentum_dot - &b.momentum_dot)));
    }
    assert!(worst < 1e-9, "assembly residual {worst:e}");
}

#[test]
fn energy_shaping_is_zero_at_the_target() {
    let cp = CartPendulum::fig1().unwrap();
    let u = cp.energy_shaping_input(&PlantState::at_rest(cp.system().q_star()), 0.0).unwrap();
    assert!(u.abs() < 1e-12);
    assert!(cp.energy_shaping_input(&PlantState::at_rest(dvector![1.6, 0.0]), 0.0).is_err());
}

#[test]
fn printed_blocks_match_generic_construction() {
    let cp = CartPendulum::fig1().unwrap();
    let ts = cp.transform().unwrap();
    let mut worst = 0.0_f64;
    for s in random_states(2) {
        let p = ts.to_transformed(&s).unwrap();
        let blocks = ts.s_blocks(&s.q, &p).unwrap();
        worst = worst.max(linalg::max_abs(&(&blocks.s1 - cp.closed_form_s1(&s.q))));
        worst = worst.max(linalg::max_abs(&(&blocks.s32 - cp.closed_form_s32(&s.q, &p).unwrap())));
        worst = worst.max(linalg::max_abs(&blocks.s31));
        worst = worst.max(linalg::max_abs(&(ts.t_matrix(&s.q).unwrap() - cp.closed_form_t(&s.q))));
        worst = worst.max(linalg::max_abs(&(ts.t_inverse(&s.q).unwrap() - cp.closed_form_t_inverse(&s.q))));
    }
    assert!(worst < 1e-10, "max deviation {worst:e}");
}

#[test]
fn simplified_law_equals_general_law() {
    let cp = CartPendulum::fig1().unwrap();
    let ts = cp.transform().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for s in random_states(3) {
        let k_i = rng.gen_range(0.01..2.0);
        let r_c2 = rng.gen_range(0.1..5.0);
        let ctrl = IaController::new(ts.clone(), IaGains::scalar(k_i, 0.0, cp.shaping().k_p, r_c2).unwrap()).unwrap();
        let x = ctrl.from_plant(&s, dvector![rng.gen_range(-5.0..5.0)]).unwrap();
        let general = ctrl.control(&x).unwrap()[0];
        let simple = cp.simplified_ia_control(&ts, k_i, r_c2, &x).unwrap();
        worst = worst.max((general - simple).abs());
    }
    assert!(worst < 1e-12, "residual {worst:e}");
}

/// Integrates the same closed loop in original momenta and compares with the
/// transformed-coordinate run.
#[test]
fn both_coordinate_systems_give_the_same_trajectory() {
    let cp = CartPendulum::fig1().unwrap();
    let ctrl = IaController::new(cp.transform().unwrap(), CartPendulum::fig1_gains().unwrap()).unwrap();
    let sys = cp.system().clone();
    let schedule = DisturbanceSchedule::step(5.0, dvector![2.0]).unwrap();
    let cfg = IntegratorConfig::FixedRk4 { step: 1e-3, t_final: 10.0 };
    let initial = PlantState::new(dvector![0.0, 1.0], dvector![0.0, 0.0]);

    let lp = IaLoop::new(ctrl.clone());
    let transformed = sim::integrate(&lp, &lp.initial_state(&initial, dvector![0.0]).unwrap(), &cfg, &schedule).unwrap();

    let original_field = |x: &Vector, d: &Vector| -> phia::Result<Vector> {
        let plant = PlantState::new(linalg::segment(x, 0, 2), linalg::segment(x, 2, 2));
        let w = ctrl.from_plant(&plant, linalg::segment(x, 4, 1))?;
        let u = ctrl.plant_input(&w)?;
        let rates = sys.open_loop_dynamics(&plant, &u, d)?;
        Ok(linalg::concat(&[&rates.q_dot, &rates.momentum_dot, &ctrl.integrator_dynamics(&w)?]))
    };
    let x0 = linalg::concat(&[&initial.q, &initial.momentum, &dvector![0.0]]);
    let original = sim::integrate(&original_field, &x0, &cfg, &schedule).unwrap();

    assert_eq!(transformed.times, original.times);
    let mut worst = 0.0_f64;
    for (a, b) in transformed.states.iter().zip(&original.states) {
        let w = ClosedLoopState::from_vector(a, 2, 1);
        let plant = ctrl.to_plant(&w).unwrap();
        let mapped = linalg::concat(&[&plant.q, &plant.momentum, &w.zeta]);
        worst = worst.max(linalg::max_abs_vec(&(mapped - b)));
    }
    assert!(worst < 1e-6, "coordinate mismatch {worst:e}");
}
