//! Model parameters, the strategy menu and the budget policy.
//!
//! All rates are per day. A [`Model`] can only be obtained through
//! [`validate`], which checks every standing condition at once and reports
//! the full list of violations.

use serde::{Deserialize, Serialize};

use crate::error::{ValidationErrors, Violation};

/// Absolute tolerance used to decide that a budget sits on a cost breakpoint.
pub const BREAKPOINT_TOL: f64 = 1e-12;

/// Default margin by which off-support rewards undercut their cost gap.
pub const DEFAULT_OFF_SUPPORT_MARGIN: f64 = 0.01;

/// Epidemiological rates of the normalized SIRS model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Disease recovery rate.
    pub gamma: f64,
    /// Disease death rate.
    pub delta: f64,
    /// Natural death rate.
    pub zeta: f64,
    /// Birth rate.
    pub theta: f64,
    /// Immunity waning rate.
    pub psi: f64,
}

impl ModelParams {
    /// Net natural growth rate `theta - zeta`.
    pub fn g(&self) -> f64 {
        self.theta - self.zeta
    }

    pub fn sigma_bar(&self) -> f64 {
        self.gamma + self.zeta + self.delta
    }

    pub fn sigma(&self) -> f64 {
        self.g() + self.sigma_bar()
    }

    pub fn omega_bar(&self) -> f64 {
        self.psi + self.zeta
    }

    pub fn omega(&self) -> f64 {
        self.g() + self.omega_bar()
    }

    /// Rates of the worked example: g = 0, γ = 0.1, δ = 0.005, ω = 0.011.
    pub fn example() -> Self {
        ModelParams { gamma: 0.1, delta: 0.005, zeta: 0.0, theta: 0.0, psi: 0.011 }
    }
}

/// Available strategies: transmission rates and intrinsic costs, one entry each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub betas: Vec<f64>,
    pub costs: Vec<f64>,
}

impl StrategySpec {
    pub fn new(betas: Vec<f64>, costs: Vec<f64>) -> Self {
        StrategySpec { betas, costs }
    }

    pub fn example() -> Self {
        StrategySpec { betas: vec![0.15, 0.19], costs: vec![0.2, 0.0] }
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// Costs relative to the cheapest strategy: `c_i - c_n`.
    pub fn ctilde(&self) -> Vec<f64> {
        let last = self.costs.last().copied().unwrap_or(0.0);
        self.costs.iter().map(|c| c - last).collect()
    }

    pub fn beta_min(&self) -> f64 {
        self.betas[0]
    }

    pub fn beta_max(&self) -> f64 {
        self.betas[self.betas.len() - 1]
    }

    /// Average transmission rate `betas' x`.
    pub fn average_beta(&self, x: &[f64]) -> f64 {
        self.betas.iter().zip(x).map(|(b, xi)| b * xi).sum()
    }
}

/// Planner design choices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Long-run budget c*.
    pub cstar: f64,
    /// Weight of the transmission-rate term in the epidemic storage.
    pub upsilon: f64,
    /// Margin for rewards of strategies outside the optimal support (n >= 3).
    #[serde(default = "default_margin")]
    pub off_support_margin: f64,
}

fn default_margin() -> f64 {
    DEFAULT_OFF_SUPPORT_MARGIN
}

impl PolicyConfig {
    pub fn new(cstar: f64, upsilon: f64) -> Self {
        PolicyConfig { cstar, upsilon, off_support_margin: DEFAULT_OFF_SUPPORT_MARGIN }
    }

    pub fn example() -> Self {
        PolicyConfig::new(0.1, 2.0)
    }
}

/// A validated bundle of parameters, strategies and policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Model {
    params: ModelParams,
    strategies: StrategySpec,
    policy: PolicyConfig,
}

impl Model {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn strategies(&self) -> &StrategySpec {
        &self.strategies
    }

    pub fn policy(&self) -> &PolicyConfig {
        &self.policy
    }

    pub fn n(&self) -> usize {
        self.strategies.len()
    }

    /// Revalidates with a different design gain.
    pub fn with_upsilon(&self, upsilon: f64) -> Result<Model, ValidationErrors> {
        let mut policy = self.policy;
        policy.upsilon = upsilon;
        validate(self.params, self.strategies.clone(), policy)
    }

    /// The worked example with `c* = 0.1`, `υ = 2`.
    pub fn example() -> Model {
        validate(ModelParams::example(), StrategySpec::example(), PolicyConfig::example())
            .expect("example parameters are valid")
    }
}

/// Checks every standing condition and returns either the bundle or all the
/// violations found.
pub fn validate(
    params: ModelParams,
    strategies: StrategySpec,
    policy: PolicyConfig,
) -> Result<Model, ValidationErrors> {
    let mut errs = Vec::new();
    check_params(&params, &mut errs);
    check_strategies(&params, &strategies, &mut errs);
    check_policy(&strategies, &policy, &mut errs);
    if errs.is_empty() {
        Ok(Model { params, strategies, policy })
    } else {
        Err(ValidationErrors(errs))
    }
}

fn check_params(p: &ModelParams, errs: &mut Vec<Violation>) {
    let named = [("gamma", p.gamma), ("delta", p.delta), ("zeta", p.zeta), ("theta", p.theta), ("psi", p.psi)];
    let mut all_finite = true;
    for (name, v) in named {
        if !v.is_finite() {
            all_finite = false;
            errs.push(Violation::assumption("finite", format!("{name}={v} is not finite")));
        } else if v < 0.0 {
            errs.push(Violation::assumption("nonnegative_rates", format!("{name}={v} < 0")));
        }
    }
    if !all_finite {
        return;
    }
    if p.delta <= 0.0 {
        errs.push(Violation::assumption("delta>0", format!("delta={} must be positive", p.delta)));
    }
    let (omega, sigma) = (p.omega(), p.sigma());
    if omega <= 0.0 {
        errs.push(Violation::assumption("omega>0", format!("omega={omega} must be positive")));
    }
    if sigma <= 0.0 {
        errs.push(Violation::assumption("sigma>0", format!("sigma={sigma} must be positive")));
    }
    if p.delta >= omega {
        errs.push(Violation::assumption("delta<omega", format!("delta={} is not below omega={omega}", p.delta)));
    }
    if p.delta >= p.gamma {
        errs.push(Violation::assumption("delta<gamma", format!("delta={} is not below gamma={}", p.delta, p.gamma)));
    }
    if sigma <= p.delta {
        errs.push(Violation::assumption("sigma>delta", format!("sigma={sigma} is not above delta={}", p.delta)));
    }
}

fn check_strategies(p: &ModelParams, s: &StrategySpec, errs: &mut Vec<Violation>) {
    let n = s.betas.len();
    if n < 2 {
        errs.push(Violation::assumption("strategy_count", format!("need n >= 2, got {n}")));
        return;
    }
    if s.costs.len() != n {
        errs.push(Violation::assumption(
            "strategy_shape",
            format!("{n} transmission rates but {} costs", s.costs.len()),
        ));
        return;
    }
    if s.betas.iter().chain(&s.costs).any(|v| !v.is_finite()) {
        errs.push(Violation::assumption("finite", "strategy entries must be finite"));
        return;
    }
    for i in 0..n - 1 {
        if s.betas[i] >= s.betas[i + 1] {
            errs.push(Violation::assumption(
                "beta_ordering",
                format!("beta[{i}]={} >= beta[{}]={}", s.betas[i], i + 1, s.betas[i + 1]),
            ));
        }
        if s.costs[i] <= s.costs[i + 1] {
            errs.push(Violation::assumption(
                "cost_ordering",
                format!("c[{i}]={} <= c[{}]={}", s.costs[i], i + 1, s.costs[i + 1]),
            ));
        }
    }
    let sigma = p.sigma();
    if sigma.is_finite() && s.betas[0] <= sigma {
        errs.push(Violation::assumption("sigma<beta1", format!("sigma={sigma} is not below beta[0]={}", s.betas[0])));
    }
    for i in 0..n.saturating_sub(2) {
        let lhs = (s.costs[i] - s.costs[i + 1]) / (s.betas[i + 1] - s.betas[i]);
        let rhs = (s.costs[i + 1] - s.costs[i + 2]) / (s.betas[i + 2] - s.betas[i + 1]);
        if !(lhs > rhs) {
            errs.push(Violation::assumption(
                "marginal_cost_convexity",
                format!("slope {i} = {lhs} is not above slope {} = {rhs}", i + 1),
            ));
        }
    }
}

fn check_policy(s: &StrategySpec, policy: &PolicyConfig, errs: &mut Vec<Violation>) {
    if !(policy.upsilon.is_finite() && policy.upsilon > 0.0) {
        errs.push(Violation::assumption("upsilon>0", format!("upsilon={} must be positive", policy.upsilon)));
    }
    if !(policy.off_support_margin.is_finite() && policy.off_support_margin > 0.0) {
        errs.push(Violation::assumption(
            "off_support_margin>0",
            format!("margin={} must be positive", policy.off_support_margin),
        ));
    }
    if !policy.cstar.is_finite() {
        errs.push(Violation::assumption("finite", "cstar must be finite"));
        return;
    }
    if s.costs.is_empty() || s.costs.iter().any(|c| !c.is_finite()) {
        return;
    }
    let ct = s.ctilde();
    if !(policy.cstar > 0.0 && policy.cstar < ct[0]) {
        errs.push(Violation::assumption("budget_range", format!("cstar={} must lie in (0, {})", policy.cstar, ct[0])));
    }
    for (index, &breakpoint) in ct.iter().enumerate() {
        if (policy.cstar - breakpoint).abs() <= BREAKPOINT_TOL {
            errs.push(Violation::BudgetAtBreakpoint { cstar: policy.cstar, index, breakpoint });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_is_valid() {
        let m = Model::example();
        assert_eq!(m.params().g(), 0.0);
        assert!((m.params().sigma() - 0.105).abs() < 1e-15);
        assert!((m.params().omega() - 0.011).abs() < 1e-15);
        assert_eq!(m.strategies().ctilde(), vec![0.2, 0.0]);
    }

    #[test]
    fn large_death_rate_breaks_delta_below_omega() {
        let mut p = ModelParams::example();
        p.delta = 0.02;
        let errs = validate(p, StrategySpec::example(), PolicyConfig::example()).unwrap_err();
        assert!(errs.contains("delta<omega"));
    }

    #[test]
    fn three_strategy_slopes() {
        let s = StrategySpec::new(vec![0.12, 0.15, 0.19], vec![0.4, 0.2, 0.0]);
        assert!(validate(ModelParams::example(), s, PolicyConfig::new(0.3, 1.0)).is_ok());

        // slopes 0.1/0.03 = 3.33 < 0.3/0.04 = 7.5
        let bad = StrategySpec::new(vec![0.12, 0.15, 0.19], vec![0.4, 0.3, 0.0]);
        let errs = validate(ModelParams::example(), bad, PolicyConfig::new(0.35, 1.0)).unwrap_err();
        assert!(errs.contains("marginal_cost_convexity"));
    }

    #[test]
    fn budget_on_breakpoint() {
        let s = StrategySpec::new(vec![0.12, 0.15, 0.19], vec![0.4, 0.2, 0.0]);
        let errs = validate(ModelParams::example(), s, PolicyConfig::new(0.2, 1.0)).unwrap_err();
        assert!(errs.contains("budget_at_breakpoint"));
        assert_eq!(errs.violations().len(), 1);
    }

    #[test]
    fn collects_every_violation() {
        let p = ModelParams { gamma: 0.004, delta: 0.02, zeta: 0.0, theta: 0.0, psi: 0.011 };
        let s = StrategySpec::new(vec![0.19, 0.15], vec![0.0, 0.2]);
        let errs = validate(p, s, PolicyConfig::new(0.5, -1.0)).unwrap_err();
        for name in ["delta<omega", "delta<gamma", "beta_ordering", "cost_ordering", "upsilon>0"] {
            assert!(errs.contains(name), "missing {name}: {errs}");
        }
    }

    #[test]
    fn beta_must_exceed_sigma() {
        let s = StrategySpec::new(vec![0.1, 0.19], vec![0.2, 0.0]);
        let errs = validate(ModelParams::example(), s, PolicyConfig::example()).unwrap_err();
        assert!(errs.contains("sigma<beta1"));
    }

    #[test]
    fn nonfinite_input_is_rejected() {
        let mut p = ModelParams::example();
        p.gamma = f64::NAN;
        let errs = validate(p, StrategySpec::example(), PolicyConfig::example()).unwrap_err();
        assert!(errs.contains("finite"));
    }

    #[test]
    fn ctilde_ends_in_zero_and_decreases() {
        let s = StrategySpec::new(vec![0.12, 0.15, 0.19], vec![0.5, 0.3, 0.1]);
        let ct = s.ctilde();
        assert_eq!(*ct.last().unwrap(), 0.0);
        assert!(ct.windows(2).all(|w| w[0] > w[1]));
    }
}
