//! Endemic equilibrium of the SIRS model at a fixed transmission rate, its
//! sensitivities with respect to that rate, and the budget-optimal strategy
//! distribution.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{Model, ModelParams, StrategySpec, BREAKPOINT_TOL};

/// Slack allowed when checking that a transmission rate lies in `[beta_1, beta_n]`.
pub const RANGE_TOL: f64 = 1e-12;

const SINGULAR_DET: f64 = 1e-14;

/// Derivatives of the endemic quantities with respect to the transmission rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sensitivity {
    pub di_db: f64,
    pub dr_db: f64,
    pub da_db: f64,
    /// Determinant of the linear system the first two derivatives solve.
    pub det: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumPoint {
    /// Transmission rate B.
    pub b: f64,
    pub i_hat: f64,
    pub r_hat: f64,
    /// Weight of the recovered term, `B / (gamma + delta * r_hat)`.
    pub a: f64,
    /// Linear coefficient of the quadratic for `i_hat`.
    pub b_coef: f64,
    pub disc: f64,
    pub sensitivity: Option<Sensitivity>,
}

impl EquilibriumPoint {
    /// Residuals of the two equilibrium equations at this point.
    pub fn residuals(&self, p: &ModelParams) -> (f64, f64) {
        let (b, i, r) = (self.b, self.i_hat, self.r_hat);
        let first = b * (i + r) - p.delta * i - (b - p.sigma());
        let second = p.gamma * i - p.omega() * r + p.delta * r * i;
        (first, second)
    }

    /// The other root of the quadratic, which lies outside `(0, 1)`.
    pub fn second_root(&self, p: &ModelParams) -> f64 {
        (self.b_coef + self.disc.sqrt()) / (2.0 * p.delta * (self.b - p.delta))
    }

    pub fn sensitivity(&self) -> Sensitivity {
        self.sensitivity.expect("sensitivities not computed for this point")
    }
}

/// Endemic equilibrium at transmission rate `b` from the closed form.
///
/// Only requires `b > max(sigma, delta)`; use [`endemic_state`] to also
/// enforce the strategy range.
pub fn solve_endemic(b: f64, p: &ModelParams) -> Result<EquilibriumPoint> {
    let (delta, omega, sigma) = (p.delta, p.omega(), p.sigma());
    let lo = sigma.max(delta);
    if !(b.is_finite() && b > lo) {
        return Err(Error::OutOfRange { b, lo, hi: f64::INFINITY });
    }
    let b_coef = p.gamma * b + omega * (b - delta) + delta * (b - sigma);
    let disc = b_coef * b_coef - 4.0 * delta * omega * (b - delta) * (b - sigma);
    if !(disc > 0.0) {
        return Err(Error::DegenerateDiscriminant { b, disc });
    }
    // Smaller root via the product of roots, free of cancellation and valid at delta = 0.
    let i_hat = 2.0 * omega * (b - sigma) / (b_coef + disc.sqrt());
    let r_hat = (1.0 - sigma / b) - (1.0 - delta / b) * i_hat;
    let a = b / (p.gamma + delta * r_hat);
    Ok(EquilibriumPoint { b, i_hat, r_hat, a, b_coef, disc, sensitivity: None })
}

/// Endemic equilibrium for a transmission rate inside the strategy range.
pub fn endemic_state(b: f64, model: &Model) -> Result<EquilibriumPoint> {
    let s = model.strategies();
    let (lo, hi) = (s.beta_min(), s.beta_max());
    if !(b >= lo - RANGE_TOL && b <= hi + RANGE_TOL) {
        return Err(Error::OutOfRange { b, lo, hi });
    }
    solve_endemic(b, model.params())
}

/// Fills in the transmission-rate derivatives of `eq`.
pub fn endemic_derivatives(eq: &EquilibriumPoint, p: &ModelParams) -> Result<EquilibriumPoint> {
    let (b, i, r) = (eq.b, eq.i_hat, eq.r_hat);
    let m00 = b - p.delta;
    let m01 = b;
    let m10 = p.gamma + p.delta * r;
    let m11 = -(p.omega() - p.delta * i);
    let det = m00 * m11 - m01 * m10;
    if !(det.abs() >= SINGULAR_DET) {
        return Err(Error::SingularSystem { b, det });
    }
    let rhs = 1.0 - i - r;
    let di_db = rhs * m11 / det;
    let dr_db = -m10 * rhs / det;
    let da_db = (p.gamma + p.delta * (r - b * dr_db)) / (m10 * m10);
    let mut out = *eq;
    out.sensitivity = Some(Sensitivity { di_db, dr_db, da_db, det });
    Ok(out)
}

/// Equilibrium with sensitivities at `b`, range-checked against the model.
pub fn endemic_full(b: f64, model: &Model) -> Result<EquilibriumPoint> {
    endemic_derivatives(&endemic_state(b, model)?, model.params())
}

/// Equidistant grid of `m` transmission rates spanning `[beta_1, beta_n]`.
pub fn transmission_grid(strategies: &StrategySpec, m: usize) -> Vec<f64> {
    let (lo, hi) = (strategies.beta_min(), strategies.beta_max());
    if m < 2 {
        return vec![lo];
    }
    (0..m).map(|k| if k == m - 1 { hi } else { lo + (hi - lo) * k as f64 / (m - 1) as f64 }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalAllocation {
    pub xstar: Vec<f64>,
    pub betastar: f64,
    /// Zero-based index `i` with the support of `xstar` in `{i, i + 1}`.
    pub istar_index: usize,
    /// Endemic equilibrium `(I*, R*)` at `betastar`, with sensitivities.
    pub endemic: EquilibriumPoint,
}

impl OptimalAllocation {
    pub fn istar(&self) -> f64 {
        self.endemic.i_hat
    }

    pub fn rstar(&self) -> f64 {
        self.endemic.r_hat
    }

    pub fn in_support(&self, i: usize) -> bool {
        self.xstar[i] > 0.0
    }
}

/// Minimizes the average transmission rate subject to the budget.
///
/// The optimum mixes the two adjacent strategies whose relative costs
/// bracket `c*`.
pub fn optimal_allocation(model: &Model) -> Result<OptimalAllocation> {
    let s = model.strategies();
    let cstar = model.policy().cstar;
    let ct = s.ctilde();
    if ct.iter().any(|c| (cstar - c).abs() <= BREAKPOINT_TOL) {
        return Err(Error::BudgetAtBreakpoint { cstar });
    }
    let istar = (0..ct.len() - 1)
        .find(|&i| ct[i + 1] < cstar && cstar < ct[i])
        .ok_or(Error::InvalidArgument(format!("budget {cstar} outside (0, {})", ct[0])))?;
    let mut xstar = vec![0.0; s.len()];
    xstar[istar] = (cstar - ct[istar + 1]) / (ct[istar] - ct[istar + 1]);
    xstar[istar + 1] = 1.0 - xstar[istar];
    let betastar = s.average_beta(&xstar);
    let endemic = endemic_full(betastar, model)?;
    Ok(OptimalAllocation { xstar, betastar, istar_index: istar, endemic })
}

/// Budget whose optimal allocation yields the average transmission rate `beta`.
pub fn budget_for_beta(strategies: &StrategySpec, beta: f64) -> Result<f64> {
    let b = &strategies.betas;
    let ct = strategies.ctilde();
    let seg = (0..b.len() - 1).find(|&i| b[i] <= beta && beta <= b[i + 1]).ok_or(Error::OutOfRange {
        b: beta,
        lo: b[0],
        hi: b[b.len() - 1],
    })?;
    let w = (b[seg + 1] - beta) / (b[seg + 1] - b[seg]);
    Ok(w * ct[seg] + (1.0 - w) * ct[seg + 1])
}

/// Uniform positive lower bound on `i_hat` over the strategy range.
pub fn ihat_lower_bound(model: &Model) -> f64 {
    let p = model.params();
    let s = model.strategies();
    let (delta, omega, sigma) = (p.delta, p.omega(), p.sigma());
    let (b1, bn) = (s.beta_min(), s.beta_max());
    let bstar = p.gamma * bn + omega * (bn - delta) + delta * (bn - sigma);
    let c = 4.0 * delta * omega * (b1 - delta) * (b1 - sigma);
    // b* - sqrt(b*^2 - c), rationalized
    let num = c / (bstar + (bstar * bstar - c).sqrt());
    num / (2.0 * delta * (bn - delta))
}
