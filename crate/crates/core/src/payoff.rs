//! Dynamic payoff mechanism: a scalar state `q` shifts payoffs along the
//! transmission-rate vector, and its rate of change is the negative
//! transmission-rate gradient of the epidemic storage.

use serde::Serialize;

use crate::equilibrium::{endemic_full, OptimalAllocation};
use crate::error::{Error, Result};
use crate::params::Model;

#[derive(Debug, Clone, Serialize)]
pub struct PayoffMechanism {
    /// Reward offset `r*`.
    pub rstar: Vec<f64>,
    /// Payoff offset `r* - c`.
    pub r_o: Vec<f64>,
    pub upsilon: f64,
    pub alloc: OptimalAllocation,
    #[serde(skip)]
    model: Model,
}

pub fn build_mechanism(alloc: &OptimalAllocation, model: &Model) -> PayoffMechanism {
    let s = model.strategies();
    let n = s.len();
    let margin = model.policy().off_support_margin;
    let rstar: Vec<f64> = s
        .ctilde()
        .into_iter()
        .enumerate()
        .map(|(i, ct)| if n == 2 || alloc.in_support(i) { ct } else { ct - margin })
        .collect();
    let r_o = rstar.iter().zip(&s.costs).map(|(r, c)| r - c).collect();
    PayoffMechanism { rstar, r_o, upsilon: model.policy().upsilon, alloc: alloc.clone(), model: model.clone() }
}

impl PayoffMechanism {
    pub fn model(&self) -> &Model {
        &self.model
    }

    /// `p = q * betas + r_o`.
    pub fn payoff_vector(&self, q: f64) -> Vec<f64> {
        self.model.strategies().betas.iter().zip(&self.r_o).map(|(b, r)| q * b + r).collect()
    }

    /// Rewards `r = q * betas + r*`.
    pub fn rewards(&self, q: f64) -> Vec<f64> {
        self.model.strategies().betas.iter().zip(&self.rstar).map(|(b, r)| q * b + r).collect()
    }

    /// Instantaneous cost of the rewards, `r' x`.
    pub fn instantaneous_cost(&self, q: f64, x: &[f64]) -> f64 {
        self.rewards(q).iter().zip(x).map(|(r, xi)| r * xi).sum()
    }

    /// Rate of change of `q` at the given epidemic and population state.
    ///
    /// `q` is accepted for signature compatibility; the designed rate does
    /// not depend on it.
    pub fn feedback(&self, i: f64, r: f64, x: &[f64], _q: f64) -> Result<f64> {
        let b = self.clamped_beta(x);
        self.feedback_at(i, r, b)
    }

    /// Feedback as a function of the average transmission rate `b`.
    pub fn feedback_at(&self, i: f64, r: f64, b: f64) -> Result<f64> {
        if !(i > 0.0) || !i.is_finite() || !r.is_finite() {
            return Err(Error::EpidemicStateOutOfDomain { i, r });
        }
        let eq = endemic_full(b, &self.model)?;
        let sens = eq.sensitivity();
        let r_tilde = eq.r_hat - r;
        let weight_grad = 0.5 * (2.0 * eq.a * sens.dr_db + r_tilde * sens.da_db);
        Ok((i / eq.i_hat).ln() * sens.di_db
            - self.upsilon * self.upsilon * (b - self.alloc.betastar)
            - weight_grad * r_tilde)
    }

    /// `betas' x`, clamped into the strategy range to absorb rounding.
    pub fn clamped_beta(&self, x: &[f64]) -> f64 {
        let s = self.model.strategies();
        s.average_beta(x).clamp(s.beta_min(), s.beta_max())
    }
}
