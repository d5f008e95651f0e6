//! Closed-loop simulation of the epidemic population game: the normalized
//! SIRS model driven by the population's average transmission rate, the mean
//! strategy dynamics, and the payoff mechanism state.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bounds::ss_value;
use crate::edm::{ipc_dissipation, ipc_storage, mean_field, PopulationState, Protocol};
use crate::equilibrium::endemic_state;
use crate::error::{Error, Result};
use crate::params::Model;
use crate::payoff::PayoffMechanism;

/// Lower floor for the infectious fraction after each step.
pub const INFECTIOUS_FLOOR: f64 = 1e-12;

/// Largest invariant violation repaired by projection; anything larger rejects the step.
pub const PROJECTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpgState {
    /// Infectious fraction.
    pub i: f64,
    /// Recovered fraction.
    pub r: f64,
    /// Population state.
    pub x: Vec<f64>,
    /// Payoff mechanism state.
    pub q: f64,
    /// Population size, tracked only when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<f64>,
}

impl EpgState {
    pub fn new(i: f64, r: f64, x: PopulationState, q: f64) -> Result<Self> {
        let state = EpgState { i, r, x: x.into_inner(), q, population: None };
        state.check()?;
        Ok(state)
    }

    /// Endemic equilibrium of the rate `betas' x`, with the given `x` and `q`.
    pub fn endemic(model: &Model, x: PopulationState, q: f64) -> Result<Self> {
        let b = model.strategies().average_beta(x.as_slice());
        let eq = endemic_state(b, model)?;
        Self::new(eq.i_hat, eq.r_hat, x, q)
    }

    pub fn with_population(mut self, n: f64) -> Self {
        self.population = Some(n);
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.i > 0.0 && self.i <= 1.0) || !(self.r >= 0.0) || self.i + self.r > 1.0 {
            return Err(Error::EpidemicStateOutOfDomain { i: self.i, r: self.r });
        }
        if !self.q.is_finite() {
            return Err(Error::InvalidArgument(format!("mechanism state q={} is not finite", self.q)));
        }
        if let Some(n) = self.population {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::InvalidArgument(format!("population size {n} must be positive")));
            }
        }
        PopulationState::new(self.x.clone()).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateDerivative {
    pub di: f64,
    pub dr: f64,
    pub dx: Vec<f64>,
    pub dq: f64,
    pub dpopulation: Option<f64>,
}

/// Time derivative of the closed-loop state.
pub fn rhs(state: &EpgState, mech: &PayoffMechanism, proto: &Protocol) -> Result<StateDerivative> {
    derivative(state.i, state.r, &state.x, state.q, state.population, mech, proto)
}

fn derivative(
    i: f64,
    r: f64,
    x: &[f64],
    q: f64,
    population: Option<f64>,
    mech: &PayoffMechanism,
    proto: &Protocol,
) -> Result<StateDerivative> {
    let p = mech.model().params();
    let b = mech.clamped_beta(x);
    let eq = endemic_state(b, mech.model())?;
    let i_tilde = eq.i_hat - i;
    let r_tilde = eq.r_hat - r;
    let di = (b * r_tilde + (b - p.delta) * i_tilde) * i;
    let dr = (p.omega() - p.delta * i) * r_tilde - (p.gamma + p.delta * eq.r_hat) * i_tilde;
    let dx = mean_field(proto, x, &mech.payoff_vector(q));
    let dq = mech.feedback_at(i, r, b)?;
    let dpopulation = population.map(|n| (p.g() - p.delta * i) * n);
    Ok(StateDerivative { di, dr, dx, dq, dpopulation })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Step size in days.
    pub step: f64,
    /// Final time in days.
    pub horizon: f64,
    /// Record every `stride`-th step.
    pub stride: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions { step: 0.01, horizon: 1500.0, stride: 100 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub t: f64,
    pub state: EpgState,
    /// Average transmission rate.
    pub b: f64,
    pub payoffs: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Instantaneous cost `r' x`.
    pub cost: f64,
    /// Running average of the instantaneous cost.
    pub avg_cost: f64,
    /// Epidemic storage `sS(I, R, B)`.
    pub ss: f64,
    /// Lyapunov function `sS + S`.
    pub lyapunov: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub options: IntegratorOptions,
    pub samples: Vec<Sample>,
    /// Largest infectious fraction over every integration step, with its time.
    pub peak: (f64, f64),
    /// Largest correction applied by the simplex/domain projection.
    pub max_projection: f64,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// `(time, I)` at the largest infectious fraction seen during integration.
    pub fn peak_infectious(&self) -> (f64, f64) {
        self.peak
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// CSV with columns `t, I, R, x1..xn, q, B, cost, avg_cost, L`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.samples.first().map_or(0, |s| s.state.x.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "I".into(), "R".into()];
        header.extend((1..=n).map(|k| format!("x{k}")));
        header.extend(["q", "B", "cost", "avg_cost", "L"].map(String::from));
        w.write_record(&header).map_err(io_err)?;
        for s in &self.samples {
            let mut row = vec![s.t, s.state.i, s.state.r];
            row.extend(&s.state.x);
            row.extend([s.state.q, s.b, s.cost, s.avg_cost, s.lyapunov]);
            w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv write failed: {e}"))
}

/// Value of the Lyapunov function `sS(I, R, B) + S(x, p)` at a state.
pub fn lyapunov_value(state: &EpgState, mech: &PayoffMechanism, proto: &Protocol) -> Result<f64> {
    let b = mech.clamped_beta(&state.x);
    let ss = ss_value(state.i, state.r, b, mech.model(), &mech.alloc, mech.upsilon)?;
    Ok(ss + ipc_storage(proto, &state.x, &mech.payoff_vector(state.q))?)
}

/// Flat layout: `[I, R, x_1..x_n, q, cost_integral, (N)]`.
struct Layout {
    n: usize,
    tracks_population: bool,
}

impl Layout {
    fn len(&self) -> usize {
        self.n + 4 + usize::from(self.tracks_population)
    }

    fn q(&self) -> usize {
        self.n + 2
    }

    fn cost(&self) -> usize {
        self.n + 3
    }

    fn population(&self) -> usize {
        self.n + 4
    }

    fn pack(&self, s: &EpgState, cost: f64) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.len());
        y.push(s.i);
        y.push(s.r);
        y.extend(&s.x);
        y.push(s.q);
        y.push(cost);
        if let Some(n) = s.population {
            y.push(n);
        }
        y
    }

    fn unpack(&self, y: &[f64]) -> EpgState {
        EpgState {
            i: y[0],
            r: y[1],
            x: y[2..2 + self.n].to_vec(),
            q: y[self.q()],
            population: self.tracks_population.then(|| y[self.population()]),
        }
    }

    fn eval(&self, y: &[f64], mech: &PayoffMechanism, proto: &Protocol, dy: &mut [f64]) -> Result<()> {
        let x = &y[2..2 + self.n];
        let q = y[self.q()];
        let pop = self.tracks_population.then(|| y[self.population()]);
        let d = derivative(y[0], y[1], x, q, pop, mech, proto)?;
        dy[0] = d.di;
        dy[1] = d.dr;
        dy[2..2 + self.n].copy_from_slice(&d.dx);
        dy[self.q()] = d.dq;
        dy[self.cost()] = mech.instantaneous_cost(q, x);
        if let Some(dn) = d.dpopulation {
            dy[self.population()] = dn;
        }
        Ok(())
    }

    /// Repairs rounding-level drift off the state space; returns the size of the repair.
    fn project(&self, y: &mut [f64], t: f64) -> Result<f64> {
        let reject = |reason: String| Err(Error::StepRejected { t, reason });
        if y.iter().any(|v| !v.is_finite()) {
            return reject("non-finite state".into());
        }
        let mut fix: f64 = 0.0;
        let x = &mut y[2..2 + self.n];
        for xi in x.iter_mut() {
            if *xi < -PROJECTION_TOL {
                return reject(format!("population share {xi} below zero"));
            }
            if *xi < 0.0 {
                fix = fix.max(-*xi);
                *xi = 0.0;
            }
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > PROJECTION_TOL {
            return reject(format!("population state sums to {sum}"));
        }
        fix = fix.max((sum - 1.0).abs());
        x.iter_mut().for_each(|xi| *xi /= sum);

        if y[0] < INFECTIOUS_FLOOR {
            fix = fix.max(INFECTIOUS_FLOOR - y[0]);
            y[0] = INFECTIOUS_FLOOR;
        }
        if y[0] > 1.0 + PROJECTION_TOL {
            return reject(format!("infectious fraction {} above one", y[0]));
        }
        if y[1] < -PROJECTION_TOL {
            return reject(format!("recovered fraction {} below zero", y[1]));
        }
        if y[1] < 0.0 {
            fix = fix.max(-y[1]);
            y[1] = 0.0;
        }
        let excess = y[0] + y[1] - 1.0;
        if excess > PROJECTION_TOL {
            return reject(format!("I + R exceeds one by {excess}"));
        }
        if excess > 0.0 {
            fix = fix.max(excess);
            y[1] = 1.0 - y[0];
        }
        Ok(fix)
    }
}

/// Fixed-step classical Runge-Kutta integration of the closed loop.
pub fn simulate(
    initial: &EpgState,
    mech: &PayoffMechanism,
    proto: &Protocol,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if !(opts.step > 0.0 && opts.horizon > 0.0 && opts.stride > 0) {
        return Err(Error::InvalidArgument(format!("invalid integrator options {opts:?}")));
    }
    if initial.x.len() != mech.model().n() {
        return Err(Error::InvalidArgument(format!(
            "state has {} strategies, model has {}",
            initial.x.len(),
            mech.model().n()
        )));
    }
    initial.check()?;

    let layout = Layout { n: initial.x.len(), tracks_population: initial.population.is_some() };
    let dim = layout.len();
    let mut y = layout.pack(initial, 0.0);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut tmp = vec![0.0; dim];

    let steps = (opts.horizon / opts.step).round() as usize;
    let h = opts.step;
    let mut samples = Vec::with_capacity(steps / opts.stride + 2);
    samples.push(make_sample(0.0, &layout, &y, mech, proto)?);
    let mut peak = (0.0, y[0]);
    let mut max_projection: f64 = 0.0;

    for step in 1..=steps {
        let t0 = (step - 1) as f64 * h;
        layout.eval(&y, mech, proto, &mut k1)?;
        axpy(&mut tmp, &y, 0.5 * h, &k1);
        layout.eval(&tmp, mech, proto, &mut k2)?;
        axpy(&mut tmp, &y, 0.5 * h, &k2);
        layout.eval(&tmp, mech, proto, &mut k3)?;
        axpy(&mut tmp, &y, h, &k3);
        layout.eval(&tmp, mech, proto, &mut k4)?;
        for d in 0..dim {
            y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        let t = step as f64 * h;
        max_projection = max_projection.max(layout.project(&mut y, t0)?);
        if y[0] > peak.1 {
            peak = (t, y[0]);
        }
        if step % opts.stride == 0 || step == steps {
            samples.push(make_sample(t, &layout, &y, mech, proto)?);
        }
    }
    Ok(Trajectory { options: *opts, samples, peak, max_projection })
}

fn axpy(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for ((o, yi), ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + a * ki;
    }
}

fn make_sample(t: f64, layout: &Layout, y: &[f64], mech: &PayoffMechanism, proto: &Protocol) -> Result<Sample> {
    let state = layout.unpack(y);
    let b = mech.clamped_beta(&state.x);
    let payoffs = mech.payoff_vector(state.q);
    let rewards = mech.rewards(state.q);
    let cost = mech.instantaneous_cost(state.q, &state.x);
    let avg_cost = if t > 0.0 { y[layout.cost()] / t } else { cost };
    let ss = ss_value(state.i, state.r, b, mech.model(), &mech.alloc, mech.upsilon)?;
    let lyapunov = ss + ipc_storage(proto, &state.x, &payoffs)?;
    Ok(Sample { t, state, b, payoffs, rewards, cost, avg_cost, ss, lyapunov })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovPoint {
    pub t: f64,
    pub l: f64,
    /// Central-difference estimate of `dL/dt` (one-sided at the ends).
    pub dl_dt: f64,
    /// `-P(x, p) - (B - delta) Ĩ^2 - a_B (omega - delta I) R̃^2`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    /// `L` rose between consecutive samples by more than the tolerance.
    Increase { t: f64, rise: f64 },
    /// Estimated `dL/dt` exceeded the dissipation bound by more than the tolerance.
    RateAboveBound { t: f64, dl_dt: f64, bound: f64 },
    /// `L(0) >= L(t) >= sS(t)` failed.
    ChainBroken { t: f64, l0: f64, l: f64, ss: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    pub points: Vec<LyapunovPoint>,
    pub findings: Vec<Finding>,
    /// Tolerance on increases of `L` between samples.
    pub level_tol: f64,
    /// Tolerance on the rate inequality, per day.
    pub rate_tol: f64,
    /// Largest value of `dL/dt - bound` seen.
    pub worst_rate_excess: f64,
}

impl LyapunovReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Evaluates `L` along a trajectory and checks it against the dissipation inequality.
///
/// Both tolerances are `1e-6 * max(1, |L(0)|)`.
pub fn lyapunov_series(traj: &Trajectory, mech: &PayoffMechanism, proto: &Protocol) -> Result<LyapunovReport> {
    let samples = &traj.samples;
    let p = mech.model().params();
    let l0 = samples.first().map_or(0.0, |s| s.lyapunov);
    let tol = 1e-6 * l0.abs().max(1.0);
    let mut points = Vec::with_capacity(samples.len());
    let mut findings = Vec::new();
    let mut worst_rate_excess = f64::NEG_INFINITY;
    let last = samples.len().saturating_sub(1);
    for (k, s) in samples.iter().enumerate() {
        let (lo, hi) = (k.saturating_sub(1), (k + 1).min(last));
        let dl_dt =
            if hi > lo { (samples[hi].lyapunov - samples[lo].lyapunov) / (samples[hi].t - samples[lo].t) } else { 0.0 };
        let st = &s.state;
        let eq = endemic_state(s.b, mech.model())?;
        let (it, rt) = (eq.i_hat - st.i, eq.r_hat - st.r);
        let dissipation = ipc_dissipation(proto, &st.x, &s.payoffs)?;
        let bound = -dissipation - (s.b - p.delta) * it * it - eq.a * (p.omega() - p.delta * st.i) * rt * rt;
        // one-sided differences at the ends are first-order only
        if k > 0 && k < last {
            worst_rate_excess = worst_rate_excess.max(dl_dt - bound);
            if dl_dt > bound + tol {
                findings.push(Finding::RateAboveBound { t: s.t, dl_dt, bound });
            }
        }
        if k > 0 {
            let rise = s.lyapunov - samples[k - 1].lyapunov;
            if rise > tol {
                findings.push(Finding::Increase { t: s.t, rise });
            }
        }
        if s.lyapunov > l0 + tol || s.lyapunov < s.ss - tol {
            findings.push(Finding::ChainBroken { t: s.t, l0, l: s.lyapunov, ss: s.ss });
        }
        points.push(LyapunovPoint { t: s.t, l: s.lyapunov, dl_dt, bound });
    }
    Ok(LyapunovReport { points, findings, level_tol: tol, rate_tol: tol, worst_rate_excess })
}
