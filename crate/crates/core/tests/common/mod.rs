#![allow(dead_code)]

use epg_core::dynamics::{simulate, EpgState, IntegratorOptions, Trajectory};
use epg_core::edm::{PopulationState, Protocol};
use epg_core::equilibrium::{optimal_allocation, OptimalAllocation};
use epg_core::params::{validate, Model, ModelParams, PolicyConfig, StrategySpec};
use epg_core::payoff::{build_mechanism, PayoffMechanism};
use rand::rngs::StdRng;
use rand::Rng;

pub fn example_loop(upsilon: f64) -> (Model, OptimalAllocation, PayoffMechanism, Protocol) {
    let model = Model::example().with_upsilon(upsilon).unwrap();
    let alloc = optimal_allocation(&model).unwrap();
    let mech = build_mechanism(&alloc, &model);
    (model, alloc, mech, Protocol::smith(0.1, 0.1))
}

/// Endemic start with every agent on the first strategy and `q = 0`.
pub fn example_start(model: &Model) -> EpgState {
    EpgState::endemic(model, PopulationState::vertex(model.n(), 0), 0.0).unwrap()
}

pub fn run_example(
    upsilon: f64,
    horizon: f64,
    step: f64,
    stride: usize,
) -> (Model, OptimalAllocation, PayoffMechanism, Protocol, Trajectory) {
    let (model, alloc, mech, proto) = example_loop(upsilon);
    let opts = IntegratorOptions { step, horizon, stride };
    let traj = simulate(&example_start(&model), &mech, &proto, &opts).unwrap();
    (model, alloc, mech, proto, traj)
}

/// Draws a parameter bundle satisfying every standing condition.
pub fn random_model(rng: &mut StdRng) -> Model {
    loop {
        let gamma = rng.gen_range(0.05..0.3);
        let delta = rng.gen_range(1e-4..0.02f64.min(0.9 * gamma));
        let zeta = rng.gen_range(0.0..0.01);
        let theta = rng.gen_range(0.0..0.02);
        let psi = rng.gen_range(0.002..0.05);
        let params = ModelParams { gamma, delta, zeta, theta, psi };

        let n = rng.gen_range(2..=5);
        let mut betas = vec![params.sigma() * rng.gen_range(1.05..2.0)];
        for _ in 1..n {
            let last = *betas.last().unwrap();
            betas.push(last + rng.gen_range(0.01..0.1));
        }
        let mut slopes: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.5..5.0)).collect();
        slopes.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut costs = vec![rng.gen_range(0.0..0.1); n];
        for i in (0..n - 1).rev() {
            costs[i] = costs[i + 1] + slopes[i] * (betas[i + 1] - betas[i]);
        }
        let span = costs[0] - costs[n - 1];
        let cstar = span * rng.gen_range(0.01..0.99);
        let mut policy = PolicyConfig::new(cstar, rng.gen_range(0.5..6.0));
        policy.off_support_margin = 0.01;
        if let Ok(m) = validate(params, StrategySpec::new(betas, costs), policy) {
            return m;
        }
    }
}

/// Uniform draw from the probability simplex.
pub fn random_simplex(rng: &mut StdRng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
