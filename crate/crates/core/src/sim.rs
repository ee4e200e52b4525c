//! Fixed-step RK4 and adaptive Dormand–Prince integration under
//! piecewise-constant disturbances, plus trajectory recording and CSV export.
//!
//! Disturbance switches are always grid points: each segment is integrated
//! separately, so no step straddles a switch.

use std::io::{BufRead, Write};

use log::debug;

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};

/// Above this many grid points the trajectory is decimated.
pub const MAX_RECORDED_POINTS: usize = 1_000_000;

/// `d(t) = value` for `t ∈ [t_start, next t_start)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub value: Vector,
}

/// Piecewise-constant, right-continuous disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSchedule {
    segments: Vec<Segment>,
}

impl DisturbanceSchedule {
    /// Segments must start at 0, have strictly increasing start times and a
    /// common dimension.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let Some(first) = segments.first() else {
            return Err(Error::InvalidSchedule("at least one segment is required".into()));
        };
        if first.t_start != 0.0 {
            return Err(Error::InvalidSchedule(format!("first segment must start at 0, got {}", first.t_start)));
        }
        let m = first.value.len();
        for (i, s) in segments.iter().enumerate() {
            if s.value.len() != m {
                return Err(Error::dimension(format!("disturbance[{i}].value"), m, s.value.len()));
            }
            if !s.t_start.is_finite() || s.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSchedule(format!("segment {i} is not finite")));
            }
            if i > 0 && s.t_start <= segments[i - 1].t_start {
                return Err(Error::InvalidSchedule(format!("segment start times must increase strictly (segment {i})")));
            }
        }
        Ok(DisturbanceSchedule { segments })
    }

    pub fn constant(value: Vector) -> Self {
        DisturbanceSchedule {
            segments: vec![Segment { t_start: 0.0, value }],
        }
    }

    pub fn zero(m: usize) -> Self {
        Self::constant(Vector::zeros(m))
    }

    /// `0` until `t_switch`, then `value`.
    pub fn step(t_switch: f64, value: Vector) -> Result<Self> {
        let m = value.len();
        DisturbanceSchedule::new(vec![
            Segment {
                t_start: 0.0,
                value: Vector::zeros(m),
            },
            Segment { t_start: t_switch, value },
        ])
    }

    pub fn dim(&self) -> usize {
        self.segments[0].value.len()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment_index(&self, t: f64) -> usize {
        self.segments.iter().rposition(|s| s.t_start <= t).unwrap_or(0)
    }

    pub fn value_at(&self, t: f64) -> &Vector {
        &self.segments[self.segment_index(t)].value
    }

    /// Switch times after `0`.
    pub fn switch_times(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.t_start).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegratorConfig {
    FixedRk4 {
        step: f64,
        t_final: f64,
    },
    AdaptiveRk45 {
        rel_tol: f64,
        abs_tol: f64,
        min_step: f64,
        max_step: f64,
        t_final: f64,
    },
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig::FixedRk4 { step: 1e-3, t_final: 60.0 }
    }
}

impl IntegratorConfig {
    pub fn t_final(&self) -> f64 {
        match *self {
            IntegratorConfig::FixedRk4 { t_final, .. } | IntegratorConfig::AdaptiveRk45 { t_final, .. } => t_final,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidIntegrator(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            IntegratorConfig::FixedRk4 { step, t_final } => {
                positive("step", step)?;
                positive("t_final", t_final)
            }
            IntegratorConfig::AdaptiveRk45 {
                rel_tol,
                abs_tol,
                min_step,
                max_step,
                t_final,
            } => {
                positive("rel_tol", rel_tol)?;
                positive("abs_tol", abs_tol)?;
                positive("min_step", min_step)?;
                positive("max_step", max_step)?;
                positive("t_final", t_final)?;
                if min_step > max_step {
                    return Err(Error::InvalidIntegrator("min_step exceeds max_step".into()));
                }
                Ok(())
            }
        }
    }
}

/// A vector field `ẋ = f(x, d)` with an admissibility check on states.
pub trait Dynamics {
    fn derivative(&self, x: &Vector, d: &Vector) -> Result<Vector>;

    fn check_state(&self, _x: &Vector) -> Result<()> {
        Ok(())
    }
}

impl<F> Dynamics for F
where
    F: Fn(&Vector, &Vector) -> Result<Vector>,
{
    fn derivative(&self, x: &Vector, d: &Vector) -> Result<Vector> {
        self(x, d)
    }
}

/// Integrator output on its grid. `disturbances[k]` is `d(times[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub disturbances: Vec<Vector>,
    /// Recording stride (1 unless decimated).
    pub stride: usize,
}

impl Solution {
    pub fn last_state(&self) -> &Vector {
        self.states.last().expect("solutions are never empty")
    }
}

struct Recorder {
    solution: Solution,
    index: usize,
}

impl Recorder {
    fn push(&mut self, t: f64, x: &Vector, d: &Vector, force: bool) {
        if force || self.index % self.solution.stride == 0 {
            self.solution.times.push(t);
            self.solution.states.push(x.clone());
            self.solution.disturbances.push(d.clone());
        }
        self.index += 1;
    }
}

fn rk4_step<D: Dynamics + ?Sized>(f: &D, x: &Vector, d: &Vector, h: f64) -> Result<Vector> {
    let k1 = f.derivative(x, d)?;
    let k2 = f.derivative(&(x + &k1 * (h / 2.0)), d)?;
    let k3 = f.derivative(&(x + &k2 * (h / 2.0)), d)?;
    let k4 = f.derivative(&(x + &k3 * h), d)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One Dormand–Prince step: the fifth-order solution and the embedded
/// error estimate.
fn dp_step<D: Dynamics + ?Sized>(f: &D, x: &Vector, d: &Vector, h: f64) -> Result<(Vector, Vector)> {
    debug_assert_eq!(DP_C[0], 0.0);
    let mut k: Vec<Vector> = Vec::with_capacity(7);
    for (i, row) in DP_A.iter().enumerate() {
        let mut xi = x.clone();
        for (j, a) in row.iter().enumerate().take(i) {
            if *a != 0.0 {
                xi += &k[j] * (h * a);
            }
        }
        k.push(f.derivative(&xi, d)?);
    }
    let mut x5 = x.clone();
    let mut err = Vector::zeros(x.len());
    for i in 0..7 {
        x5 += &k[i] * (h * DP_B5[i]);
        err += &k[i] * (h * (DP_B5[i] - DP_B4[i]));
    }
    Ok((x5, err))
}

/// Integrates `dynamics` from `x0` over `[0, t_final]`.
pub fn integrate<D: Dynamics + ?Sized>(dynamics: &D, x0: &Vector, cfg: &IntegratorConfig, schedule: &DisturbanceSchedule) -> Result<Solution> {
    cfg.validate()?;
    let t_final = cfg.t_final();
    dynamics.check_state(x0).map_err(|e| e.at_time(0.0))?;
    let mut ends: Vec<(f64, f64, &Vector)> = Vec::new();
    for (i, seg) in schedule.segments().iter().enumerate() {
        if seg.t_start >= t_final {
            break;
        }
        let end = schedule.segments().get(i + 1).map_or(t_final, |s| s.t_start.min(t_final));
        ends.push((seg.t_start, end, &seg.value));
    }

    let stride = match *cfg {
        IntegratorConfig::FixedRk4 { step, .. } => {
            let total: usize = ends.iter().map(|(a, b, _)| steps_for(*b - *a, step)).sum::<usize>() + 1;
            total.div_ceil(MAX_RECORDED_POINTS)
        }
        IntegratorConfig::AdaptiveRk45 { .. } => 1,
    };
    let mut rec = Recorder {
        solution: Solution {
            times: Vec::new(),
            states: Vec::new(),
            disturbances: Vec::new(),
            stride,
        },
        index: 0,
    };
    let mut x = x0.clone();
    rec.push(0.0, &x, schedule.value_at(0.0), true);

    for (k, &(t0, t1, d)) in ends.iter().enumerate() {
        let last_segment = k + 1 == ends.len();
        let d_after = if last_segment { d } else { ends[k + 1].2 };
        match *cfg {
            IntegratorConfig::FixedRk4 { step, .. } => {
                let n = steps_for(t1 - t0, step);
                let h = (t1 - t0) / n as f64;
                for i in 1..=n {
                    let t_prev = t0 + (i - 1) as f64 * h;
                    let t = if i == n { t1 } else { t0 + i as f64 * h };
                    x = rk4_step(dynamics, &x, d, t - t_prev).map_err(|e| e.at_time(t_prev))?;
                    dynamics.check_state(&x).map_err(|e| e.at_time(t))?;
                    let at_end = i == n;
                    rec.push(t, &x, if at_end { d_after } else { d }, at_end);
                }
            }
            IntegratorConfig::AdaptiveRk45 {
                rel_tol,
                abs_tol,
                min_step,
                max_step,
                ..
            } => {
                let mut t = t0;
                let mut h = max_step.min((t1 - t0) / 100.0).max(min_step);
                while t < t1 {
                    let remaining = t1 - t;
                    let last = h >= remaining;
                    let h_try = if last { remaining } else { h };
                    let (x_new, err) = dp_step(dynamics, &x, d, h_try).map_err(|e| e.at_time(t))?;
                    let scale = x.iter().zip(x_new.iter()).map(|(a, b)| abs_tol + rel_tol * a.abs().max(b.abs()));
                    let norm = (err.iter().zip(scale).map(|(e, s)| (e / s).powi(2)).sum::<f64>() / x.len().max(1) as f64).sqrt();
                    if !norm.is_finite() {
                        return Err(Error::EvalFailed);
                    }
                    let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                    if norm <= 1.0 {
                        t = if last { t1 } else { t + h_try };
                        x = x_new;
                        dynamics.check_state(&x).map_err(|e| e.at_time(t))?;
                        let at_end = t == t1;
                        rec.push(t, &x, if at_end { d_after } else { d }, at_end);
                        h = (h_try * factor).min(max_step).max(min_step);
                    } else {
                        if h_try <= min_step {
                            return Err(Error::StepUnderflow { t });
                        }
                        h = (h_try * factor).max(min_step);
                    }
                }
            }
        }
        debug!("segment [{t0}, {t1}] integrated, state {:?}", x.as_slice());
    }

    let mut sol = rec.solution;
    if sol.times.len() > MAX_RECORDED_POINTS {
        sol = decimate(sol, schedule);
    }
    Ok(sol)
}

fn steps_for(len: f64, step: f64) -> usize {
    ((len / step) - 1e-9).ceil().max(1.0) as usize
}

fn decimate(sol: Solution, schedule: &DisturbanceSchedule) -> Solution {
    let stride = sol.times.len().div_ceil(MAX_RECORDED_POINTS);
    let switches = schedule.switch_times();
    let last = sol.times.len() - 1;
    let keep: Vec<usize> = (0..sol.times.len()).filter(|&i| i % stride == 0 || i == last || switches.contains(&sol.times[i])).collect();
    Solution {
        times: keep.iter().map(|&i| sol.times[i]).collect(),
        states: keep.iter().map(|&i| sol.states[i].clone()).collect(),
        disturbances: keep.iter().map(|&i| sol.disturbances[i].clone()).collect(),
        stride: sol.stride * stride,
    }
}

/// Column counts of a recorded trajectory: `n` configuration and momentum
/// components, `zeta` integrator states, `m` inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub zeta: usize,
    pub m: usize,
}

impl Layout {
    pub fn state_len(&self) -> usize {
        2 * self.n + self.zeta
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=self.n).map(|i| format!("q{i}")));
        cols.extend((1..=self.n).map(|i| format!("p{i}")));
        cols.extend((1..=self.zeta).map(|i| format!("zeta{i}")));
        cols.extend((1..=self.m).map(|i| format!("u{i}")));
        cols.extend((1..=self.m).map(|i| format!("d{i}")));
        cols.push("H_d".into());
        cols.push("W".into());
        cols.join(",")
    }

    fn from_header(header: &str) -> Result<Self> {
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        let count = |prefix: &str| cols.iter().filter(|c| c.strip_prefix(prefix).is_some_and(|r| !r.is_empty() && r.chars().all(|ch| ch.is_ascii_digit()))).count();
        let layout = Layout {
            n: count("q"),
            zeta: count("zeta"),
            m: count("u"),
        };
        if layout.csv_header() != cols.join(",") {
            return Err(Error::Config {
                field: "csv header".into(),
                message: format!("unexpected header `{header}`"),
            });
        }
        Ok(layout)
    }
}

/// Diagnostic samples recorded alongside each state.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub u: Vector,
    pub h_d: f64,
    /// `𝒲` for integral action, `H_z` for the PID baseline, `𝐇_d` open loop.
    pub w: f64,
}

/// A closed loop that can be integrated and report diagnostics.
pub trait Recordable: Dynamics {
    fn layout(&self) -> Layout;
    fn sample(&self, x: &Vector, d: &Vector) -> Result<Sample>;
}

/// A recorded run. All columns have equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub layout: Layout,
    pub times: Vec<f64>,
    /// `col(q, p, ζ)` per time.
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub disturbances: Vec<Vector>,
    pub h_d: Vec<f64>,
    pub w: Vec<f64>,
    pub stride: usize,
}

impl Trajectory {
    pub fn from_solution<R: Recordable + ?Sized>(loop_: &R, sol: Solution) -> Result<Self> {
        let mut inputs = Vec::with_capacity(sol.times.len());
        let mut h_d = Vec::with_capacity(sol.times.len());
        let mut w = Vec::with_capacity(sol.times.len());
        for ((t, x), d) in sol.times.iter().zip(&sol.states).zip(&sol.disturbances) {
            let s = loop_.sample(x, d).map_err(|e| e.at_time(*t))?;
            inputs.push(s.u);
            h_d.push(s.h_d);
            w.push(s.w);
        }
        Ok(Trajectory {
            layout: loop_.layout(),
            times: sol.times,
            states: sol.states,
            inputs,
            disturbances: sol.disturbances,
            h_d,
            w,
            stride: sol.stride,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.len();
        self.states.len() == n && self.inputs.len() == n && self.disturbances.len() == n && self.h_d.len() == n && self.w.len() == n
    }

    pub fn q(&self, k: usize) -> Vector {
        linalg::segment(&self.states[k], 0, self.layout.n)
    }

    pub fn momentum(&self, k: usize) -> Vector {
        linalg::segment(&self.states[k], self.layout.n, self.layout.n)
    }

    pub fn zeta(&self, k: usize) -> Vector {
        linalg::segment(&self.states[k], 2 * self.layout.n, self.layout.zeta)
    }

    /// Index of the last sample with `times[k] <= t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|x| *x <= t).saturating_sub(1)
    }

    /// Writes the CSV export: header row, `{:.16e}` values, LF endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.layout.csv_header())?;
        let mut line = String::new();
        for k in 0..self.len() {
            line.clear();
            push_value(&mut line, self.times[k]);
            for v in self.states[k].iter().chain(self.inputs[k].iter()).chain(self.disturbances[k].iter()) {
                line.push(',');
                push_value(&mut line, *v);
            }
            line.push(',');
            push_value(&mut line, self.h_d[k]);
            line.push(',');
            push_value(&mut line, self.w[k]);
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Parses a CSV export. The stride is not stored in the file and is
    /// reported as 1.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let io_err = |e: std::io::Error| Error::Config {
            field: "csv".into(),
            message: e.to_string(),
        };
        let header = lines.next().ok_or_else(|| Error::Config {
            field: "csv".into(),
            message: "empty file".into(),
        })?;
        let layout = Layout::from_header(&header.map_err(io_err)?)?;
        let width = 1 + layout.state_len() + 2 * layout.m + 2;
        let mut traj = Trajectory {
            layout,
            times: Vec::new(),
            states: Vec::new(),
            inputs: Vec::new(),
            disturbances: Vec::new(),
            h_d: Vec::new(),
            w: Vec::new(),
            stride: 1,
        };
        for (row, line) in lines.enumerate() {
            let line = line.map_err(io_err)?;
            let values = line
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Config {
                    field: format!("csv row {}", row + 2),
                    message: e.to_string(),
                })?;
            if values.len() != width {
                return Err(Error::dimension(format!("csv row {}", row + 2), width, values.len()));
            }
            let sl = layout.state_len();
            traj.times.push(values[0]);
            traj.states.push(Vector::from_column_slice(&values[1..1 + sl]));
            traj.inputs.push(Vector::from_column_slice(&values[1 + sl..1 + sl + layout.m]));
            traj.disturbances.push(Vector::from_column_slice(&values[1 + sl + layout.m..1 + sl + 2 * layout.m]));
            traj.h_d.push(values[width - 2]);
            traj.w.push(values[width - 1]);
        }
        Ok(traj)
    }
}

fn push_value(line: &mut String, v: f64) {
    use std::fmt::Write as _;
    write!(line, "{v:.16e}").expect("writing to a String cannot fail");
}

/// Integrates and records diagnostics in one call.
pub fn simulate<R: Recordable + ?Sized>(loop_: &R, x0: &Vector, cfg: &IntegratorConfig, schedule: &DisturbanceSchedule) -> Result<Trajectory> {
    let sol = integrate(loop_, x0, cfg, schedule)?;
    Trajectory::from_solution(loop_, sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn decay(x: &Vector, _d: &Vector) -> Result<Vector> {
        Ok(-x)
    }

    #[test]
    fn schedule_validation() {
        assert!(DisturbanceSchedule::new(vec![]).is_err());
        let bad_start = vec![Segment {
            t_start: 1.0,
            value: dvector![0.0],
        }];
        assert!(DisturbanceSchedule::new(bad_start).is_err());
        let not_increasing = vec![
            Segment { t_start: 0.0, value: dvector![0.0] },
            Segment { t_start: 0.0, value: dvector![1.0] },
        ];
        assert!(DisturbanceSchedule::new(not_increasing).is_err());
        let s = DisturbanceSchedule::step(30.0, dvector![2.0]).unwrap();
        assert_eq!(s.value_at(29.999)[0], 0.0);
        assert_eq!(s.value_at(30.0)[0], 2.0);
    }

    #[test]
    fn constant_field_gives_constant_trajectory() {
        let zero = |x: &Vector, _d: &Vector| -> Result<Vector> { Ok(Vector::zeros(x.len())) };
        let cfg = IntegratorConfig::FixedRk4 { step: 0.1, t_final: 1.0 };
        let sol = integrate(&zero, &dvector![3.0, -1.0], &cfg, &DisturbanceSchedule::zero(1)).unwrap();
        assert_eq!(sol.times.len(), 11);
        assert!(sol.states.iter().all(|x| *x == dvector![3.0, -1.0]));
    }

    #[test]
    fn exponential_decay() {
        let cfg = IntegratorConfig::FixedRk4 { step: 1e-3, t_final: 1.0 };
        let sol = integrate(&decay, &dvector![1.0], &cfg, &DisturbanceSchedule::zero(1)).unwrap();
        assert!((sol.last_state()[0] - (-1.0f64).exp()).abs() < 1e-9);
        assert_eq!(*sol.times.last().unwrap(), 1.0);
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let osc = |x: &Vector, _d: &Vector| -> Result<Vector> { Ok(dvector![x[1], -x[0]]) };
        let cfg = IntegratorConfig::FixedRk4 { step: 1e-3, t_final: 60.0 };
        let sol = integrate(&osc, &dvector![1.0, 0.0], &cfg, &DisturbanceSchedule::zero(1)).unwrap();
        let drift = sol.states.iter().map(|x| (0.5 * x.norm_squared() - 0.5).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-7, "drift {drift:e}");
    }

    #[test]
    fn switches_land_on_grid_points() {
        let cfg = IntegratorConfig::FixedRk4 { step: 0.3, t_final: 2.0 };
        let schedule = DisturbanceSchedule::step(0.7, dvector![1.0]).unwrap();
        let forced = |_x: &Vector, d: &Vector| -> Result<Vector> { Ok(d.clone()) };
        let sol = integrate(&forced, &dvector![0.0], &cfg, &schedule).unwrap();
        let k = sol.times.iter().position(|t| *t == 0.7).expect("switch time on grid");
        assert_eq!(sol.disturbances[k][0], 1.0);
        assert_eq!(sol.disturbances[k - 1][0], 0.0);
        assert!((sol.last_state()[0] - 1.3).abs() < 1e-12);
    }

    #[test]
    fn adaptive_matches_closed_form() {
        let cfg = IntegratorConfig::AdaptiveRk45 {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            min_step: 1e-8,
            max_step: 0.1,
            t_final: 2.0,
        };
        let schedule = DisturbanceSchedule::step(1.0, dvector![0.0]).unwrap();
        let sol = integrate(&decay, &dvector![1.0], &cfg, &schedule).unwrap();
        assert!(sol.times.contains(&1.0));
        assert!((sol.last_state()[0] - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn adaptive_underflow() {
        let blowup = |x: &Vector, _d: &Vector| -> Result<Vector> { Ok(x.map(|v| v * v * 1e3)) };
        let cfg = IntegratorConfig::AdaptiveRk45 {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            min_step: 1e-3,
            max_step: 1e-3,
            t_final: 10.0,
        };
        let err = integrate(&blowup, &dvector![1.0], &cfg, &DisturbanceSchedule::zero(1)).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. } | Error::EvalFailed));
    }

    #[test]
    fn domain_violation_reports_time() {
        struct Drift;
        impl Dynamics for Drift {
            fn derivative(&self, _x: &Vector, _d: &Vector) -> Result<Vector> {
                Ok(dvector![1.0])
            }
            fn check_state(&self, x: &Vector) -> Result<()> {
                if x[0] < 0.45 {
                    Ok(())
                } else {
                    Err(Error::DomainViolation { q: vec![x[0]], t: None })
                }
            }
        }
        let cfg = IntegratorConfig::FixedRk4 { step: 0.1, t_final: 1.0 };
        match integrate(&Drift, &dvector![0.0], &cfg, &DisturbanceSchedule::zero(1)) {
            Err(Error::DomainViolation { t: Some(t), .. }) => assert!((t - 0.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_config() {
        assert!(IntegratorConfig::FixedRk4 { step: 0.0, t_final: 1.0 }.validate().is_err());
        assert!(IntegratorConfig::FixedRk4 { step: 0.1, t_final: -1.0 }.validate().is_err());
    }

    #[test]
    fn header_layout() {
        let l = Layout { n: 2, zeta: 1, m: 1 };
        assert_eq!(l.csv_header(), "t,q1,q2,p1,p2,zeta1,u1,d1,H_d,W");
        assert_eq!(Layout::from_header("t,q1,q2,p1,p2,zeta1,u1,d1,H_d,W").unwrap(), l);
        assert!(Layout::from_header("t,q1,x").is_err());
    }
}
