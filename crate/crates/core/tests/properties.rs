//! Property tests for the structural invariants of each layer.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::{dvector, DVector};
use proptest::prelude::*;

use phia::fd;
use phia::ia::ClosedLoopState;
use phia::linalg::{self, Matrix, Vector};
use phia::sim::{self, DisturbanceSchedule, IntegratorConfig, Segment};
use phia::systems::{self, BuiltSystem};
use phia::{CartPendulum, IaController, IaGains, PidGains, PidLoop, PlantState, ReferencePid};

fn cart() -> &'static BuiltSystem {
    static CELL: OnceLock<BuiltSystem> = OnceLock::new();
    CELL.get_or_init(|| systems::build("cart-pendulum", &BTreeMap::new()).unwrap())
}

fn linear() -> &'static BuiltSystem {
    static CELL: OnceLock<BuiltSystem> = OnceLock::new();
    CELL.get_or_init(|| systems::build("linear-2dof", &BTreeMap::new()).unwrap())
}

fn cart_state() -> impl Strategy<Value = PlantState> {
    (-1.3..1.3f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b, c, d)| PlantState::new(dvector![a, b], dvector![c, d]))
}

fn linear_state() -> impl Strategy<Value = PlantState> {
    (-3.0..3.0f64, -3.0..3.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b, c, d)| PlantState::new(dvector![a, b], dvector![c, d]))
}

/// Either system with a state inside its domain.
fn any_system_state() -> impl Strategy<Value = (&'static BuiltSystem, PlantState)> {
    prop_oneof![cart_state().prop_map(|s| (cart(), s)), linear_state().prop_map(|s| (linear(), s))]
}

fn ia_gains() -> impl Strategy<Value = IaGains> {
    (0.01..5.0f64, 0.1..20.0f64, 0.1..5.0f64).prop_map(|(k_i, r_c1, r_c2)| IaGains::scalar(k_i, 0.0, r_c1, r_c2).unwrap())
}

fn closed_loop(sys: &BuiltSystem, s: &PlantState, zeta: f64) -> ClosedLoopState {
    let p = sys.transform.to_transformed(s).unwrap();
    ClosedLoopState::new(s.q.clone(), linalg::segment(&p, 0, 1), linalg::segment(&p, 1, 1), dvector![zeta])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Shaped system layer.

    #[test]
    fn unforced_power_balance((sys, s) in any_system_state()) {
        let base = &sys.system;
        let m = base.inputs();
        let rates = base.open_loop_dynamics(&s, &Vector::zeros(m), &Vector::zeros(m)).unwrap();
        let x = s.to_vector();
        let f = linalg::concat(&[&rates.q_dot, &rates.momentum_dot]);
        let h = 1e-5 / linalg::max_abs_vec(&f).max(1.0);
        let at = |t: f64| base.hamiltonian(&PlantState::from_vector(&(&x + &f * t))).unwrap();
        let numeric = (at(h) - at(-h)) / (2.0 * h);
        let analytic = base.energy_rate(&s).unwrap();
        // The rate is a cancellation of terms of size |grad H| |f|.
        let (gq, gp) = base.grad_hamiltonian(&s).unwrap();
        let scale = linalg::concat(&[&gq, &gp]).norm() * f.norm();
        prop_assert!(analytic <= 0.0);
        prop_assert!((numeric - analytic).abs() <= 1e-6 * scale.max(1.0), "{numeric} vs {analytic}");
    }

    #[test]
    fn passive_output_map_has_rank_m((sys, s) in any_system_state()) {
        let base = &sys.system;
        let jac = fd::fd_jacobian(|p| base.passive_output(&PlantState::new(s.q.clone(), p.clone())), &s.momentum, fd::RELATIVE_STEP).unwrap();
        prop_assert_eq!(linalg::rank(&jac, 1e-8), base.inputs());
    }

    #[test]
    fn hamiltonian_gradient_matches_fd((sys, s) in any_system_state()) {
        let base = &sys.system;
        let (gq, gp) = base.grad_hamiltonian(&s).unwrap();
        let numeric = fd::fd_gradient(|x| base.hamiltonian(&PlantState::from_vector(x)).unwrap_or(f64::NAN), &s.to_vector(), fd::RELATIVE_STEP).unwrap();
        let analytic = linalg::concat(&[&gq, &gp]);
        prop_assert!(linalg::max_abs_vec(&(&analytic - &numeric)) <= 1e-5 * linalg::max_abs_vec(&numeric).max(1.0));
    }

    // Momentum transform.

    #[test]
    fn t_maps_g_to_leading_identity((sys, s) in any_system_state()) {
        let ts = &sys.transform;
        let tg = ts.t_matrix(&s.q).unwrap() * sys.system.input_matrix(&s.q);
        let mut expected = Matrix::zeros(ts.dof(), ts.inputs());
        expected.view_mut((0, 0), (ts.inputs(), ts.inputs())).fill_with_identity();
        prop_assert!(linalg::max_abs(&(tg - expected)) < 1e-10);
    }

    #[test]
    fn transformed_mass_is_spd((sys, s) in any_system_state()) {
        let md = sys.transform.transformed_mass(&s.q).unwrap();
        prop_assert!(linalg::symmetry_defect(&md) < 1e-12);
        prop_assert!(linalg::min_symmetric_eigenvalue(&md) > 0.0);
    }

    #[test]
    fn interconnection_blocks_are_skew((sys, s) in any_system_state()) {
        let ts = &sys.transform;
        let p = ts.to_transformed(&s).unwrap();
        prop_assert!(linalg::skew_defect(&ts.jp(&s.q, &p).unwrap()) < 1e-8);
        let b = ts.s_blocks(&s.q, &p).unwrap();
        prop_assert!(linalg::skew_defect(&b.s31) < 1e-8);
        prop_assert!(linalg::skew_defect(&b.s34) < 1e-8);
    }

    #[test]
    fn pushforward_residuals((sys, s) in any_system_state(), u in -5.0..5.0f64, d in -3.0..3.0f64) {
        let (u, d) = (dvector![u], dvector![d]);
        prop_assert!(sys.transform.verify_pushforward(&s, &u, &d).unwrap() < 1e-6);
        prop_assert!(sys.transform.finite_difference_only().verify_pushforward(&s, &u, &d).unwrap() < 1e-4);
        prop_assert!(sys.transform.output_equivalence(&s).unwrap() < 1e-10);
    }

    // Integral-action closed loop.

    #[test]
    fn closed_loop_matches_plant_route((sys, s) in any_system_state(), gains in ia_gains(), zeta in -5.0..5.0f64, d in -3.0..3.0f64) {
        let ctrl = IaController::new(sys.transform.clone(), gains).unwrap();
        let x = closed_loop(sys, &s, zeta);
        let d = dvector![d];
        let a = ctrl.closed_loop_dynamics(&x, &d).unwrap().to_vector();
        let b = ctrl.plant_route_dynamics(&x, &d).unwrap().to_vector();
        prop_assert!(linalg::max_abs_vec(&(&a - &b)) < 1e-9 * linalg::max_abs_vec(&b).max(1.0));
    }

    #[test]
    fn interconnection_is_dissipative((sys, s) in any_system_state(), gains in ia_gains(), zeta in -5.0..5.0f64, d in -3.0..3.0f64) {
        let ctrl = IaController::new(sys.transform.clone(), gains).unwrap();
        let x = closed_loop(sys, &s, zeta);
        let f = ctrl.f_matrix(&x).unwrap();
        prop_assert!(linalg::max_symmetric_eigenvalue(&(&f + f.transpose())) < 1e-10);
        prop_assert!(ctrl.lyapunov_rate(&x, &dvector![d]).unwrap() <= 1e-10);
    }

    #[test]
    fn lyapunov_rate_matches_fd((sys, s) in any_system_state(), gains in ia_gains(), zeta in -5.0..5.0f64, d in -3.0..3.0f64) {
        let ctrl = IaController::new(sys.transform.clone(), gains).unwrap();
        let x = closed_loop(sys, &s, zeta);
        let d = dvector![d];
        let analytic = ctrl.lyapunov_rate(&x, &d).unwrap();
        let w = x.to_vector();
        let f = ctrl.closed_loop_dynamics(&x, &d).unwrap().to_vector();
        let h = 1e-5 / linalg::max_abs_vec(&f).max(1.0);
        let at = |t: f64| ctrl.lyapunov(&ClosedLoopState::from_vector(&(&w + &f * t), 2, 1), &d).unwrap();
        let numeric = (at(h) - at(-h)) / (2.0 * h);
        prop_assert!((analytic - numeric).abs() <= 1e-4 * analytic.abs().max(1e-3), "{analytic} vs {numeric}");
    }

    #[test]
    fn equilibrium_is_a_fixed_point((sys, _s) in any_system_state(), gains in ia_gains(), d in -3.0..3.0f64) {
        let ctrl = IaController::new(sys.transform.clone(), gains).unwrap();
        let d = dvector![d];
        let eq = ctrl.equilibrium(&d).unwrap();
        prop_assert!(linalg::max_abs_vec(&ctrl.closed_loop_dynamics(&eq, &d).unwrap().to_vector()) < 1e-9);
    }

    #[test]
    fn lyapunov_grows_along_rays(
        (sys, s) in any_system_state(),
        gains in ia_gains(),
        dir in prop::collection::vec(-1.0..1.0f64, 3).prop_filter("non-zero direction", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2),
    ) {
        let ctrl = IaController::new(sys.transform.clone(), gains).unwrap();
        let d = dvector![0.0];
        let at = |t: f64| {
            let (p1, p2, z) = (t * dir[0], t * dir[1], t * dir[2]);
            ctrl.lyapunov(&ClosedLoopState::new(s.q.clone(), dvector![p1], dvector![p2], dvector![p1 - z]), &d).unwrap()
        };
        let base = at(0.0);
        let values: Vec<f64> = [1.0, 10.0, 100.0, 1000.0].iter().map(|&t| at(t) - base).collect();
        prop_assert!(values.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(values[3] > 1e5 * values[0]);
    }

    // Simulator.

    #[test]
    fn switch_times_land_on_the_grid(
        mut switches in prop::collection::vec(0.01..4.99f64, 1..4),
        step in prop::sample::select(vec![1e-3, 7e-3, 0.0137, 0.05]),
    ) {
        switches.sort_by(f64::total_cmp);
        switches.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let mut segments = vec![Segment { t_start: 0.0, value: dvector![0.0] }];
        segments.extend(switches.iter().enumerate().map(|(i, &t)| Segment { t_start: t, value: dvector![i as f64 + 1.0] }));
        let schedule = DisturbanceSchedule::new(segments).unwrap();
        let decay = |x: &Vector, d: &Vector| -> phia::Result<Vector> { Ok(d - x) };
        let sol = sim::integrate(&decay, &DVector::zeros(1), &IntegratorConfig::FixedRk4 { step, t_final: 5.0 }, &schedule).unwrap();
        prop_assert_eq!(sol.times.len(), sol.states.len());
        prop_assert_eq!(sol.times.len(), sol.disturbances.len());
        for t in &switches {
            prop_assert!(sol.times.contains(t), "switch {t} missing");
        }
        prop_assert_eq!(*sol.times.last().unwrap(), 5.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pid_energy_is_nonincreasing_on_the_benchmark(s in linear_state(), zeta in -1.0..1.0f64, d in -2.0..2.0f64) {
        let pid = ReferencePid::new(linear().system.clone(), PidGains::scalar(1.0, 4.0, 1.0, 2.0).unwrap()).unwrap();
        let lp = PidLoop::new(pid);
        let x0 = linalg::concat(&[&s.q, &s.momentum, &dvector![zeta]]);
        let traj = sim::simulate(&lp, &x0, &IntegratorConfig::FixedRk4 { step: 1e-3, t_final: 10.0 }, &DisturbanceSchedule::constant(dvector![d])).unwrap();
        let worst = traj.w.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(worst < 1e-8, "H_z increased by {worst}");
    }
}

#[test]
fn pid_rejects_cart_pendulum_but_ia_accepts_it() {
    let cp = CartPendulum::fig1().unwrap();
    let gains = PidGains::scalar(1.0, 10.0, 0.05, 1.0).unwrap();
    assert!(matches!(ReferencePid::new(cp.system().clone(), gains), Err(phia::Error::AssumptionViolated { assumption: "P.1", .. })));
    let ctrl = IaController::new(cp.transform().unwrap(), CartPendulum::fig1_gains().unwrap()).unwrap();
    let x = closed_loop(cart(), &PlantState::new(dvector![0.3, 0.5], dvector![0.1, -0.2]), 0.0);
    assert!(ctrl.control(&x).unwrap()[0].is_finite());
}
