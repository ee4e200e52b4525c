//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Built with `harness = false` so the lines always print.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::dvector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phia::fd;
use phia::ia::ClosedLoopState;
use phia::linalg::{self, Vector};
use phia::pid::{check_assumptions, probe_states};
use phia::scenario::{Scenario, FIG1_TOML};
use phia::sim::{self, DisturbanceSchedule, IntegratorConfig, Trajectory};
use phia::systems::{self, cart_pendulum::CartPendulum};
use phia::{DerivativeMode, IaController, IaLoop, PidGains, PidLoop, PlantState, ReferencePid, Result};

const SEED: u64 = 20_240_601;
const STATES: usize = 100;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

struct Fig1 {
    traj: Trajectory,
    controller: IaController,
    seconds: f64,
}

fn fig1_run() -> Result<Fig1> {
    let sc = Scenario::load(FIG1_TOML, &[]).expect("bundled scenario is valid");
    let start = Instant::now();
    let out = sc.run()?;
    let seconds = start.elapsed().as_secs_f64();
    let controller = IaController::new(sc.built.transform.clone(), CartPendulum::fig1_gains()?)?;
    Ok(Fig1 {
        traj: out.trajectory,
        controller,
        seconds,
    })
}

fn state(traj: &Trajectory, k: usize) -> ClosedLoopState {
    ClosedLoopState::from_vector(&traj.states[k], traj.layout.n, traj.layout.m)
}

fn random_closed_loop(ctrl: &IaController, rng: &mut ChaCha8Rng, count: usize) -> Result<Vec<(ClosedLoopState, Vector)>> {
    let plants = probe_states(ctrl.system().base(), rng.gen(), count);
    plants
        .iter()
        .map(|s| {
            let zeta = dvector![rng.gen_range(-5.0..5.0)];
            let d = dvector![rng.gen_range(-3.0..3.0)];
            Ok((ctrl.from_plant(s, zeta)?, d))
        })
        .collect()
}

fn criterion_1(fig1: &Fig1) -> Result<Outcome> {
    let t = &fig1.traj;
    let mut pre = 0.0_f64;
    let mut excursion = 0.0_f64;
    for k in 0..t.len() {
        let (time, q) = (t.times[k], t.q(k));
        if (25.0..30.0).contains(&time) {
            pre = pre.max(q[0].abs()).max(q[1].abs());
        }
        if (30.0..=40.0).contains(&time) {
            excursion = excursion.max(q[1].abs());
        }
    }
    let last = t.len() - 1;
    let q_end = t.q(last);
    let zeta_end = t.zeta(last)[0];
    let zeta_err = (zeta_end - 4.0).abs() / 4.0;
    let passed = pre < 0.02 && excursion > 0.05 && q_end[0].abs() < 0.02 && q_end[1].abs() < 0.05 && zeta_err < 0.05 && fig1.seconds < 10.0;
    outcome(
        passed,
        format!(
            "max|q| on [25,30) = {pre:.2e}; max|q2| on [30,40] = {excursion:.3}; q(60) = ({:.2e}, {:.2e}); zeta(60) = {zeta_end:.4} ({:.2}% from 4); runtime {:.2} s",
            q_end[0],
            q_end[1],
            100.0 * zeta_err,
            fig1.seconds
        ),
    )
}

fn criterion_2() -> Result<Outcome> {
    let cp = CartPendulum::fig1()?;
    let ts = cp.transform()?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let plants = probe_states(cp.system(), rng.gen(), STATES);
    let (mut push, mut output) = (0.0_f64, 0.0_f64);
    for s in &plants {
        let u = dvector![rng.gen_range(-5.0..5.0)];
        let d = dvector![rng.gen_range(-3.0..3.0)];
        push = push.max(ts.verify_pushforward(s, &u, &d)?);
        output = output.max(ts.output_equivalence(s)?);
    }
    outcome(push < 1e-6 && output < 1e-10, format!("push-forward residual {push:.2e} (< 1e-6), output invariance {output:.2e} (< 1e-10) over {STATES} states"))
}

fn criterion_3() -> Result<Outcome> {
    let cp = CartPendulum::fig1()?;
    let ctrl = IaController::new(cp.transform()?, CartPendulum::fig1_gains()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let (mut matching, mut sym) = (0.0_f64, f64::NEG_INFINITY);
    for (x, d) in random_closed_loop(&ctrl, &mut rng, STATES)? {
        let a = ctrl.closed_loop_dynamics(&x, &d)?.to_vector();
        let b = ctrl.plant_route_dynamics(&x, &d)?.to_vector();
        matching = matching.max(linalg::max_abs_vec(&(a - b)));
        let f = ctrl.f_matrix(&x)?;
        sym = sym.max(linalg::max_symmetric_eigenvalue(&(&f + f.transpose())));
    }
    outcome(matching < 1e-9 && sym < 1e-10, format!("matching residual {matching:.2e} (< 1e-9), max eig(F + F^T) {sym:.2e} (< 1e-10) over {STATES} states"))
}

fn criterion_4(fig1: &Fig1) -> Result<Outcome> {
    let ctrl = &fig1.controller;
    let mut rest = 0.0_f64;
    for d in [0.0, 2.0, -1.0] {
        let d = dvector![d];
        let eq = ctrl.equilibrium(&d)?;
        rest = rest.max(linalg::max_abs_vec(&ctrl.closed_loop_dynamics(&eq, &d)?.to_vector()));
    }

    // The switch at t = 30 moves z*, so W jumps there; steps straddling it are excluded.
    let t = &fig1.traj;
    let mut increase = f64::NEG_INFINITY;
    for k in 0..t.len() - 1 {
        if t.disturbances[k] == t.disturbances[k + 1] {
            increase = increase.max(t.w[k + 1] - t.w[k]);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut rate_err = 0.0_f64;
    let n = ctrl.system().dof();
    let m = ctrl.system().inputs();
    for (x, d) in random_closed_loop(ctrl, &mut rng, STATES)? {
        let analytic = ctrl.lyapunov_rate(&x, &d)?;
        let w = x.to_vector();
        let f = ctrl.closed_loop_dynamics(&x, &d)?.to_vector();
        let h = 1e-5 / linalg::max_abs_vec(&f).max(1.0);
        let at = |s: f64| ctrl.lyapunov(&ClosedLoopState::from_vector(&(&w + &f * s), n, m), &d);
        let numeric = (at(h)? - at(-h)?) / (2.0 * h);
        rate_err = rate_err.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12));
    }
    outcome(
        rest < 1e-9 && increase < 1e-8 && rate_err < 1e-4,
        format!("equilibrium residual {rest:.2e} (< 1e-9); max per-step W increase {increase:.2e} (< 1e-8); W-rate vs FD rel. error {rate_err:.2e} (< 1e-4)"),
    )
}

fn criterion_5(fig1: &Fig1) -> Result<Outcome> {
    let t = &fig1.traj;
    let (mut u_err, mut y) = (0.0_f64, 0.0_f64);
    for k in 0..t.len() {
        if t.times[k] > 55.0 {
            let d = &t.disturbances[k];
            u_err = u_err.max((&t.inputs[k] - d).norm());
            y = y.max(fig1.controller.detectability_output(&state(t, k), d)?.norm());
        }
    }
    outcome(u_err < 1e-2 && y < 1e-3, format!("for t > 55: max |u - d| = {u_err:.2e} (< 1e-2), max |y_p1| = {y:.2e} (< 1e-3)"))
}

fn criterion_6() -> Result<Outcome> {
    let built = systems::build("linear-2dof", &BTreeMap::new())?;
    let gains = PidGains::scalar(1.0, 4.0, 1.0, 2.0)?;
    let pid = ReferencePid::new(built.system.clone(), gains)?;
    let d = dvector![1.0];
    let lp = PidLoop::new(pid.clone());
    let x0 = Vector::zeros(5);
    let cfg = IntegratorConfig::FixedRk4 { step: 1e-3, t_final: 60.0 };
    let traj = sim::simulate(&lp, &x0, &cfg, &DisturbanceSchedule::constant(d.clone()))?;
    let last = traj.len() - 1;
    let alpha = pid.alpha(&d)?;
    let zeta_err = linalg::max_abs_vec(&(traj.zeta(last) - &alpha));
    let q_err = linalg::max_abs_vec(&(traj.q(last) - built.system.q_star()));
    let literal = -alpha[0];

    let cp = CartPendulum::fig1()?;
    let flags_p1 = !check_assumptions(cp.system(), &probe_states(cp.system(), SEED, 20))?.p1.passed;
    outcome(
        zeta_err < 1e-3 && q_err < 1e-3 && flags_p1,
        format!(
            "zeta(60) = {:.6}, alpha = -K_I^-1 (K_p + K_3)^-1 d = {:.6} (printed sign would give {literal:.6}); |zeta - alpha| = {zeta_err:.2e}, |q - q*| = {q_err:.2e}; cart-pendulum P.1 flagged: {flags_p1}",
            traj.zeta(last)[0],
            alpha[0]
        ),
    )
}

fn rel(a: &linalg::Matrix, b: &linalg::Matrix) -> f64 {
    linalg::max_abs(&(a - b)) / linalg::max_abs(b).max(1e-8)
}

fn rel_vec(a: &Vector, b: &Vector) -> f64 {
    linalg::max_abs_vec(&(a - b)) / linalg::max_abs_vec(b).max(1e-8)
}

fn step_halving() -> Result<f64> {
    let sc = Scenario::load(FIG1_TOML, &["disturbance=none".into()]).expect("bundled scenario is valid");
    let ctrl = IaController::new(sc.built.transform.clone(), CartPendulum::fig1_gains()?)?;
    let lp = IaLoop::new(ctrl);
    let x0 = lp.initial_state(&sc.initial, sc.zeta0.clone())?;
    let schedule = DisturbanceSchedule::zero(1);
    let finals = [8e-3, 4e-3, 2e-3]
        .iter()
        .map(|&step| {
            let sol = sim::integrate(&lp, &x0, &IntegratorConfig::FixedRk4 { step, t_final: 10.0 }, &schedule)?;
            Ok(sol.last_state().clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((&finals[0] - &finals[1]).norm() / (&finals[1] - &finals[2]).norm())
}

fn criterion_7() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for id in systems::SYSTEM_IDS {
        let built = systems::build(id, &BTreeMap::new())?;
        let sys = &built.system;
        let fd_sys = sys.clone().with_mode(DerivativeMode::FiniteDifference);
        let ts = &built.transform;
        let ts_fd = ts.finite_difference_only();
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
        let mut err = 0.0_f64;
        for s in probe_states(sys, rng.gen(), STATES) {
            let q = &s.q;
            err = err.max(rel_vec(&sys.potential_grad(q), &fd::fd_gradient(|x| sys.potential(x), q, fd::RELATIVE_STEP)?));
            for i in 0..sys.dof() {
                err = err.max(rel(&sys.shaped_mass_partial(q, i)?, &fd_sys.shaped_mass_partial(q, i)?));
            }
            let (gq, gp) = sys.grad_hamiltonian(&s)?;
            let h = |x: &Vector| sys.hamiltonian(&PlantState::from_vector(x)).unwrap_or(f64::NAN);
            let numeric = fd::fd_gradient(h, &s.to_vector(), fd::RELATIVE_STEP)?;
            err = err.max(rel_vec(&linalg::concat(&[&gq, &gp]), &numeric));
            let p = ts.to_transformed(&s)?;
            err = err.max(rel(&ts.momentum_jacobian(q, &p)?, &ts_fd.momentum_jacobian(q, &p)?));
        }
        parts.push(format!("{id} {err:.2e}"));
        worst = worst.max(err);
    }
    let factor = step_halving()?;
    outcome(
        worst < 1e-5 && (8.0..=32.0).contains(&factor),
        format!("max gradient rel. error {} (< 1e-5, {STATES} states/system); RK4 step-halving factor {factor:.2} (in [8, 32])", parts.join(", ")),
    )
}

fn criterion_8() -> Result<Outcome> {
    let cp = CartPendulum::fig1()?;
    let sys = cp.system();
    let q_star = sys.q_star();
    let grad = fd::fd_gradient(|x| sys.potential(x), &q_star, fd::RELATIVE_STEP)?.norm();
    let hess = fd::fd_hessian(|x| sys.potential(x), &q_star, 1e-4)?;
    let min_eig = linalg::min_symmetric_eigenvalue(&(0.5 * (&hess + hess.transpose())));
    let again = CartPendulum::fig1()?;
    let deterministic = cp.report().to_string() == again.report().to_string() && cp.variant() == again.variant();
    outcome(
        grad < 1e-6 && min_eig > 0.0 && deterministic,
        format!("|grad V_d(q*)| = {grad:.2e} (< 1e-6), min Hessian eigenvalue {min_eig:.3}; selected variant `{}`, report deterministic: {deterministic}", cp.variant()),
    )
}

fn main() -> ExitCode {
    let fig1 = fig1_run();
    let with_fig1 = |f: fn(&Fig1) -> Result<Outcome>| match &fig1 {
        Ok(run) => f(run),
        Err(e) => Err(e.clone()),
    };
    let results: Vec<Result<Outcome>> = vec![
        with_fig1(criterion_1),
        criterion_2(),
        criterion_3(),
        with_fig1(criterion_4),
        with_fig1(criterion_5),
        criterion_6(),
        criterion_7(),
        criterion_8(),
    ];
    let mut failed = 0;
    for (i, r) in results.into_iter().enumerate() {
        let (passed, detail) = match r {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!("criterion {}: {}  {}", i + 1, if passed { "PASS" } else { "FAIL" }, detail);
    }
    if failed == 0 {
        println!("acceptance: all 8 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 8 criteria failed");
        ExitCode::FAILURE
    }
}
