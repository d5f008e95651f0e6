//! Anytime upper bounds on the infectious fraction.
//!
//! Every trajectory stays inside the sublevel set `{ sS(I, R, B) <= alpha }`
//! with `alpha = L(Y(0))`. For each transmission rate on a grid we compute the
//! largest `I / I*` in that set; the maximum over the grid is the bound.

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::equilibrium::{endemic_state, transmission_grid, OptimalAllocation, RANGE_TOL};
use crate::error::{Error, Result};
use crate::params::Model;

/// Absolute tolerance on `I` for the per-rate bisection.
pub const BISECTION_TOL: f64 = 1e-10;

/// Default number of grid points.
pub const DEFAULT_GRID: usize = 30;

/// `Î ln(Î/I) - (Î - I)` written as `Î (u - ln(1 + u))` with `u = I/Î - 1`.
fn log_gap(i_hat: f64, i: f64) -> f64 {
    let u = (i - i_hat) / i_hat;
    i_hat * (u - u.ln_1p())
}

/// Epidemic storage `sS(I, R, B)`; zero only at `(I*, R*, beta*)`.
pub fn ss_value(i: f64, r: f64, b: f64, model: &Model, alloc: &OptimalAllocation, upsilon: f64) -> Result<f64> {
    if !(i > 0.0 && i.is_finite() && r.is_finite()) {
        return Err(Error::EpidemicStateOutOfDomain { i, r });
    }
    let eq = endemic_state(b, model)?;
    let r_tilde = eq.r_hat - r;
    let b_tilde = b - alloc.betastar;
    Ok(log_gap(eq.i_hat, i) + 0.5 * eq.a * r_tilde * r_tilde + 0.5 * upsilon * upsilon * b_tilde * b_tilde)
}

/// Storage level of an endemic start with `q(0) = 0` and equal payoffs on the support.
pub fn endemic_start_level(upsilon: f64, b0: f64, betastar: f64) -> f64 {
    0.5 * upsilon * upsilon * (b0 - betastar).powi(2)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundQuery {
    pub alpha: f64,
    pub upsilon: f64,
    pub grid: Vec<f64>,
}

impl BoundQuery {
    pub fn new(model: &Model, alpha: f64, upsilon: f64, grid: Vec<f64>) -> Result<Self> {
        let s = model.strategies();
        if grid.len() < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 grid points, got {}", grid.len())));
        }
        if let Some(&b) = grid.iter().find(|&&b| !(b >= s.beta_min() - RANGE_TOL && b <= s.beta_max() + RANGE_TOL)) {
            return Err(Error::OutOfRange { b, lo: s.beta_min(), hi: s.beta_max() });
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("level alpha={alpha} must be nonnegative")));
        }
        Ok(BoundQuery { alpha, upsilon, grid })
    }

    /// Query on `m` equidistant transmission rates.
    pub fn equidistant(model: &Model, alpha: f64, upsilon: f64, m: usize) -> Result<Self> {
        Self::new(model, alpha, upsilon, transmission_grid(model.strategies(), m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridValue {
    pub b: f64,
    /// `None` when the sublevel set misses this transmission rate.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundResult {
    pub alpha: f64,
    pub upsilon: f64,
    pub pi_tilde: f64,
    pub per_b: Vec<GridValue>,
    pub argmax_b: f64,
    pub istar: f64,
    pub certified_peak: f64,
}

/// Largest `I / I*` in the sublevel set at a fixed transmission rate.
///
/// For fixed `(I, B)` the storage is minimized over `R` at `R̂_B` clamped into
/// `[0, 1 - I]`; what remains is a convex function of `I` with minimum at
/// `Î_B`, so the supremum is found by bisection on `[Î_B, 1]`.
pub fn pi_b(query: &BoundQuery, b: f64, model: &Model, alloc: &OptimalAllocation) -> Result<Option<f64>> {
    let eq = endemic_state(b, model)?;
    let upsilon = query.upsilon;
    let b_term = 0.5 * upsilon * upsilon * (b - alloc.betastar).powi(2);
    let reduced = |i: f64| {
        let r_best = eq.r_hat.clamp(0.0, 1.0 - i);
        let gap = eq.r_hat - r_best;
        log_gap(eq.i_hat, i) + 0.5 * eq.a * gap * gap + b_term
    };
    let alpha = query.alpha;
    if reduced(eq.i_hat) > alpha {
        return Ok(None);
    }
    let istar = alloc.istar();
    if reduced(1.0) <= alpha {
        return Ok(Some(1.0 / istar));
    }
    let (mut lo, mut hi) = (eq.i_hat, 1.0);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if reduced(mid) <= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo / istar))
}

/// Grid approximation of the bound: the maximum of [`pi_b`] over the grid.
pub fn pi_tilde(query: &BoundQuery, model: &Model, alloc: &OptimalAllocation) -> Result<BoundResult> {
    let per_b = query
        .grid
        .iter()
        .map(|&b| pi_b(query, b, model, alloc).map(|value| GridValue { b, value }))
        .collect::<Result<Vec<_>>>()?;
    let best =
        per_b.iter().filter_map(|g| g.value.map(|v| (g.b, v))).fold(
            None,
            |acc: Option<(f64, f64)>, (b, v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((b, v)),
            },
        );
    let (argmax_b, pi) = best.ok_or(Error::AllInfeasible { alpha: query.alpha })?;
    let istar = alloc.istar();
    Ok(BoundResult {
        alpha: query.alpha,
        upsilon: query.upsilon,
        pi_tilde: pi,
        per_b,
        argmax_b,
        istar,
        certified_peak: istar * pi,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificationReport {
    pub max_infectious: f64,
    pub time_of_max: f64,
    pub certified_peak: f64,
    /// `certified_peak - max_infectious`.
    pub margin: f64,
    pub overshoot_ratio: f64,
    pub bound_ratio: f64,
    pub pass: bool,
}

/// Checks the sampled peak of a trajectory against a bound.
pub fn certify_trajectory(traj: &Trajectory, result: &BoundResult) -> CertificationReport {
    let (time_of_max, max_infectious) = traj.peak_infectious();
    certify_peak(max_infectious, time_of_max, result)
}

pub fn certify_peak(max_infectious: f64, time_of_max: f64, result: &BoundResult) -> CertificationReport {
    let margin = result.certified_peak - max_infectious;
    CertificationReport {
        max_infectious,
        time_of_max,
        certified_peak: result.certified_peak,
        margin,
        overshoot_ratio: max_infectious / result.istar,
        bound_ratio: result.pi_tilde,
        pass: margin >= 0.0,
    }
}

/// One point of a bound-versus-gain sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub upsilon: f64,
    pub beta_star: f64,
    pub delta: f64,
    pub alpha: f64,
    pub pi_tilde: f64,
}

/// Bound for an endemic start at `b0` across several gains.
pub fn upsilon_sweep(
    model: &Model,
    alloc: &OptimalAllocation,
    b0: f64,
    upsilons: &[f64],
    grid_points: usize,
) -> Result<Vec<SweepRow>> {
    upsilons
        .iter()
        .map(|&upsilon| {
            let alpha = endemic_start_level(upsilon, b0, alloc.betastar);
            let q = BoundQuery::equidistant(model, alpha, upsilon, grid_points)?;
            let res = pi_tilde(&q, model, alloc)?;
            Ok(SweepRow {
                upsilon,
                beta_star: alloc.betastar,
                delta: model.params().delta,
                alpha,
                pi_tilde: res.pi_tilde,
            })
        })
        .collect()
}
