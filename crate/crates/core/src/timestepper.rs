//! Backward-Euler time stepping with Newton, and the exact vertex ODE
//! update used by the splitting scheme.

use serde::{Deserialize, Serialize};

use crate::analysis::{diagnostics, Diagnostics, EXTINCTION_THRESHOLD};
use crate::assembly::{DiscreteState, Problem, VertexRows};
use crate::error::{Error, Result};
use crate::sparse::{LuSolver, TripletMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Monolithic,
    Splitting,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub line_search: bool,
    pub scheme: Scheme,
    /// Fixed-point tolerance on the vertex values in the splitting scheme.
    pub splitting_tol: f64,
    pub splitting_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_end: 1.0,
            newton_tol: 1e-10,
            newton_max_iter: 30,
            line_search: true,
            scheme: Scheme::Monolithic,
            splitting_tol: 1e-10,
            splitting_max_iter: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if self.t_end > 0.0 && self.dt > self.t_end {
            return bad(format!("dt = {} exceeds t_end = {}", self.dt, self.t_end));
        }
        if !(self.newton_tol > 0.0) || !(self.splitting_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.newton_max_iter == 0 || self.splitting_max_iter == 0 {
            return bad("iteration limits must be positive".into());
        }
        Ok(())
    }

    /// Step end times `t_1 .. t_N`; the last step is short when `t_end`
    /// is not a multiple of `dt`.
    pub fn step_times(&self) -> Vec<f64> {
        if self.t_end <= 0.0 {
            return Vec::new();
        }
        let ratio = self.t_end / self.dt;
        let full = (ratio + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (1..=full).map(|n| n as f64 * self.dt).collect();
        if let Some(last) = times.last_mut() {
            if (*last - self.t_end).abs() <= 1e-9 * self.dt {
                *last = self.t_end;
            }
        }
        if times
            .last()
            .is_none_or(|&t| self.t_end - t > 1e-9 * self.dt)
        {
            times.push(self.t_end);
        }
        times
    }
}

/// A square nonlinear system `F(x) = 0` with a sparse Jacobian.
pub trait NonlinearSystem {
    fn dim(&self) -> usize;
    fn residual(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn tangent(&self, x: &[f64]) -> Result<TripletMatrix>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub line_search: bool,
}

impl From<&SolverConfig> for NewtonOptions {
    fn from(c: &SolverConfig) -> Self {
        Self {
            tol: c.newton_tol,
            max_iter: c.newton_max_iter,
            line_search: c.line_search,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Residual 2-norm before each iteration and after the last one.
    pub residuals: Vec<f64>,
    pub backtracks: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

const MAX_HALVINGS: usize = 20;
const ARMIJO: f64 = 1e-4;

pub fn newton(
    system: &dyn NonlinearSystem,
    x0: Vec<f64>,
    options: NewtonOptions,
    lu: &mut LuSolver,
) -> Result<(Vec<f64>, NewtonReport)> {
    let mut x = x0;
    let mut r = system.residual(&x)?;
    let mut rn = norm(&r);
    let mut report = NewtonReport {
        residuals: vec![rn],
        ..Default::default()
    };
    while rn > options.tol {
        if report.iterations == options.max_iter {
            return Err(Error::NonConvergence {
                iterations: report.iterations,
                residual: rn,
            });
        }
        report.iterations += 1;
        let jac = system.tangent(&x)?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = lu.solve(&jac, &neg)?;
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let step = dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let mut a = 1.0;
        let mut accepted = None;
        for halving in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi + a * di).collect();
            match system.residual(&trial) {
                Ok(rt) => {
                    let tn = norm(&rt);
                    if !options.line_search || tn <= (1.0 - ARMIJO * a) * rn {
                        accepted = Some((trial, rt, tn));
                        report.backtracks += halving;
                        break;
                    }
                }
                Err(Error::NonFinite(_)) if options.line_search => {}
                Err(e) => return Err(e),
            }
            a *= 0.5;
        }
        match accepted {
            Some((xt, rt, tn)) => {
                x = xt;
                r = rt;
                rn = tn;
                report.residuals.push(rn);
            }
            // the update is at round-off level: nothing left to gain
            None if step <= 1e-14 * scale => {
                log::debug!("Newton stagnated at residual {rn:.3e}");
                break;
            }
            None => {
                return Err(Error::LineSearchFailed {
                    iteration: report.iterations,
                    residual: rn,
                })
            }
        }
    }
    Ok((x, report))
}

/// Piecewise-linear function of time through `(times[b], values[b])`, held
/// constant outside the sampled range.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument(
                "piecewise-linear trace needs matching, non-empty samples".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "trace times must increase strictly".into(),
            ));
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            times: vec![0.0],
            values: vec![value],
        }
    }

    /// Linear between `(0, a)` and `(dt, b)`.
    pub fn segment(a: f64, b: f64, dt: f64) -> Self {
        Self {
            times: vec![0.0, dt],
            values: vec![a, b],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let b = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[b], self.times[b + 1]);
        let s = (t - t0) / (t1 - t0);
        self.values[b] + s * (self.values[b + 1] - self.values[b])
    }
}

/// `(1 - e^{-x}) / x`
fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-300 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(1 - (1 + x) e^{-x}) / x^2`
fn psi(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // sum_k (-1)^k (k + 1) x^k / (k + 2)!
        let mut sum = 0.0;
        let mut xk = 1.0;
        let mut fact = 2.0;
        for k in 0..20 {
            let term = (k as f64 + 1.0) * xk / fact;
            sum += if k % 2 == 0 { term } else { -term };
            xk *= x;
            fact *= k as f64 + 3.0;
        }
        sum
    } else {
        (1.0 - (1.0 + x) * (-x).exp()) / (x * x)
    }
}

/// Exact solution at time `t` of `z' = -lambda z + S(s)` with `z(0) = z0`,
/// where `S` is the piecewise-linear weighted trace (`sum_j delta_j w_j(v_k)`).
pub fn solve_vertex_ode_exact(z0: f64, lambda: f64, trace: &PiecewiseLinear, t: f64) -> f64 {
    assert!(lambda >= 0.0, "decay rate must be non-negative");
    if t <= 0.0 {
        return z0;
    }
    let mut z = z0 * (-lambda * t).exp();
    // breakpoints from 0 to t, including the holding intervals at both ends
    let mut knots = vec![0.0];
    knots.extend(self_knots(trace, t));
    knots.push(t);
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = b - a;
        if d <= 0.0 {
            continue;
        }
        let (sa, sb) = (trace.eval(a), trace.eval(b));
        let m = (sb - sa) / d;
        // integral of e^{-lambda (t - s)} S(s) over [a, b], written with the
        // value at the end of the interval
        let x = lambda * d;
        let local = sb * d * phi1(x) - m * d * d * psi(x);
        z += (-lambda * (t - b)).exp() * local;
    }
    z
}

fn self_knots(trace: &PiecewiseLinear, t: f64) -> impl Iterator<Item = f64> + '_ {
    trace
        .times
        .iter()
        .copied()
        .filter(move |&s| s > 0.0 && s < t)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub steps: usize,
    pub newton_iterations: usize,
    pub max_newton_iterations: usize,
    pub line_search_backtracks: usize,
    pub linear_solves: usize,
    pub fixed_point_iterations: usize,
    pub max_final_residual: f64,
}

struct StepSystem<'a> {
    problem: &'a Problem,
    prev: &'a [f64],
    dt: f64,
    t: f64,
    rows: VertexRows<'a>,
}

impl NonlinearSystem for StepSystem<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.problem
            .residual(x, self.prev, self.dt, self.t, self.rows)
    }

    fn tangent(&self, x: &[f64]) -> Result<TripletMatrix> {
        self.problem.tangent(x, self.dt, self.rows)
    }
}

/// Owns the linear-solver cache and statistics across steps.
pub struct Stepper<'a> {
    pub problem: &'a Problem,
    pub config: SolverConfig,
    pub stats: SolverStats,
    lu: LuSolver,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a Problem, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            problem,
            config,
            stats: SolverStats::default(),
            lu: LuSolver::new(),
        })
    }

    fn solve(
        &mut self,
        prev: &[f64],
        guess: Vec<f64>,
        dt: f64,
        t: f64,
        rows: VertexRows<'_>,
    ) -> Result<Vec<f64>> {
        let sys = StepSystem {
            problem: self.problem,
            prev,
            dt,
            t,
            rows,
        };
        let (x, rep) = newton(&sys, guess, NewtonOptions::from(&self.config), &mut self.lu)?;
        self.stats.newton_iterations += rep.iterations;
        self.stats.max_newton_iterations = self.stats.max_newton_iterations.max(rep.iterations);
        self.stats.line_search_backtracks += rep.backtracks;
        self.stats.max_final_residual = self
            .stats
            .max_final_residual
            .max(*rep.residuals.last().unwrap());
        self.stats.linear_solves = self.lu.factorizations;
        Ok(x)
    }

    /// Advances the stacked state `prev` over `dt`, ending at time `t`.
    pub fn step_vector(&mut self, prev: &[f64], dt: f64, t: f64) -> Result<Vec<f64>> {
        if prev.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("previous state"));
        }
        let x = match self.config.scheme {
            Scheme::Monolithic => self.solve(prev, prev.to_vec(), dt, t, VertexRows::Coupled)?,
            Scheme::Splitting => self.split_step(prev, dt, t)?,
        };
        self.stats.steps += 1;
        Ok(x)
    }

    fn split_step(&mut self, prev: &[f64], dt: f64, t: f64) -> Result<Vec<f64>> {
        let layout = &self.problem.layout;
        let zo = layout.z_offset;
        let mut z: Vec<f64> = prev[zo..].to_vec();
        let mut x = prev.to_vec();
        for it in 1..=self.config.splitting_max_iter {
            self.stats.fixed_point_iterations += 1;
            x = self.solve(prev, x, dt, t, VertexRows::Frozen(&z))?;
            let mut change = 0.0f64;
            for js in &self.problem.junctions {
                let k = js.vertex;
                let mut s0 = 0.0;
                let mut s1 = 0.0;
                for (n, &(j, end)) in js.edge_order.iter().enumerate() {
                    let node = layout.w_offsets[j] + self.problem.disc.edges[j].end_node(end);
                    s0 += js.e[n] * prev[node];
                    s1 += js.e[n] * x[node];
                }
                let trace = PiecewiseLinear::segment(s0, s1, dt);
                let zn = solve_vertex_ode_exact(prev[zo + k], js.lambda_total(), &trace, dt);
                change = change.max((zn - z[k]).abs());
                z[k] = zn;
            }
            if change <= self.config.splitting_tol {
                x[zo..].copy_from_slice(&z);
                log::trace!("splitting converged after {it} sweeps");
                return Ok(x);
            }
        }
        Err(Error::NonConvergence {
            iterations: self.config.splitting_max_iter,
            residual: f64::NAN,
        })
    }

    pub fn step(&mut self, prev: &DiscreteState, dt: f64, t: f64) -> Result<DiscreteState> {
        let x = self.step_vector(&prev.to_vector(), dt, t)?;
        DiscreteState::from_vector(&self.problem.layout, &x)
    }
}

pub fn step(
    problem: &Problem,
    prev: &DiscreteState,
    dt: f64,
    config: &SolverConfig,
) -> Result<DiscreteState> {
    let mut cfg = config.clone();
    cfg.t_end = cfg.t_end.max(dt);
    cfg.dt = dt;
    Stepper::new(problem, cfg)?.step(prev, dt, dt)
}

#[derive(Clone, Debug, Default)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    /// Stored states; empty unless requested.
    pub states: Vec<DiscreteState>,
    pub diagnostics: Vec<Diagnostics>,
    pub stats: SolverStats,
}

impl TimeSeries {
    pub fn final_state(&self) -> Option<&DiscreteState> {
        self.states.last()
    }
}

/// Runs to `t_end`, storing every state.
pub fn run(
    problem: &Problem,
    initial: &DiscreteState,
    config: &SolverConfig,
) -> Result<TimeSeries> {
    run_with(problem, initial, config, true, &mut |_, _, _| Ok(()))
}

/// Runs to `t_end`. `observer` sees every state (index, time, state),
/// including the initial one; an observer error aborts the run.
pub fn run_with(
    problem: &Problem,
    initial: &DiscreteState,
    config: &SolverConfig,
    keep_states: bool,
    observer: &mut dyn FnMut(usize, f64, &DiscreteState) -> Result<()>,
) -> Result<TimeSeries> {
    if !initial.matches(&problem.layout) {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: problem.dim(),
            found: initial.to_vector().len(),
        });
    }
    if !initial.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let mut stepper = Stepper::new(problem, config.clone())?;
    let mut series = TimeSeries::default();
    let mut x0 = None;
    let mut record = |series: &mut TimeSeries, t: f64, s: &DiscreteState, keep: bool| {
        let mut d = diagnostics(problem, s, t);
        let reference = *x0.get_or_insert(d.x);
        d.extinct = d.x <= EXTINCTION_THRESHOLD * reference;
        series.times.push(t);
        series.diagnostics.push(d);
        if keep {
            series.states.push(s.clone());
        }
    };
    observer(0, 0.0, initial)?;
    let mut current = initial.clone();
    let steps = config.step_times();
    record(&mut series, 0.0, initial, keep_states || steps.is_empty());
    let mut t_prev = 0.0;
    for (n, &t) in steps.iter().enumerate() {
        let dt = t - t_prev;
        let next = stepper
            .step(&current, dt, t)
            .map_err(|e| Error::StepFailed {
                time: t,
                source: Box::new(e),
            })?;
        current = next;
        let last = n + 1 == steps.len();
        record(&mut series, t, &current, keep_states || last);
        observer(n + 1, t, &current)?;
        t_prev = t;
    }
    series.stats = stepper.stats;
    Ok(series)
}
