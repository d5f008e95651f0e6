mod common;

use common::{example_loop, example_start, run_example};
use epg_core::dynamics::EpgState;
use epg_core::dynamics::{lyapunov_series, simulate, IntegratorOptions};
use epg_core::edm::PopulationState;
use epg_core::edm::Protocol;
use epg_core::equilibrium::optimal_allocation;
use epg_core::params::{validate, ModelParams, PolicyConfig, StrategySpec};
use epg_core::payoff::build_mechanism;

#[test]
fn converges_given_enough_time() {
    let (_, a, _, _, traj) = run_example(2.0, 4000.0, 0.01, 1000);
    let s = &traj.last().state;
    assert!((s.i - a.istar()).abs() < 1e-4);
    assert!((s.r - a.rstar()).abs() < 1e-4);
    assert!(s.x.iter().zip(&a.xstar).all(|(x, xs)| (x - xs).abs() < 1e-4));
    assert!(s.q.abs() < 1e-4, "q={}", s.q);
    assert!((traj.last().cost - 0.1).abs() < 1e-4);
}

#[test]
fn peak_is_step_size_independent() {
    let (_, _, _, _, full) = run_example(2.0, 1500.0, 0.01, 1000);
    let (_, _, _, _, half) = run_example(2.0, 1500.0, 0.005, 2000);
    let (p1, p2) = (full.peak_infectious().1, half.peak_infectious().1);
    assert!(((p1 - p2) / p2).abs() < 1e-6, "{p1} vs {p2}");
}

#[test]
fn overshoot_grows_with_gain() {
    let peaks: Vec<f64> =
        [1.0, 2.0, 6.0].iter().map(|&u| run_example(u, 1500.0, 0.01, 1000).4.peak_infectious().1).collect();
    assert!(peaks[0] < peaks[1] && peaks[1] < peaks[2], "{peaks:?}");
}

#[test]
fn lyapunov_function_decreases() {
    for u in [0.5, 3.0] {
        let (_, _, mech, proto, traj) = run_example(u, 800.0, 0.01, 10);
        let rep = lyapunov_series(&traj, &mech, &proto).unwrap();
        assert!(rep.is_clean(), "{:?}", &rep.findings[..rep.findings.len().min(3)]);
    }
}

#[test]
fn state_stays_in_domain() {
    let (_, _, _, _, traj) = run_example(6.0, 1500.0, 0.01, 1);
    assert!(traj.max_projection < 1e-9);
    for s in &traj.samples {
        let st = &s.state;
        assert!(st.i > 0.0 && st.r >= 0.0 && st.i + st.r <= 1.0);
        assert!(st.x.iter().all(|&v| v >= 0.0));
        assert!((st.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn three_strategies_converge_to_mixed_optimum() {
    let s = StrategySpec::new(vec![0.12, 0.15, 0.19], vec![0.4, 0.2, 0.0]);
    let m = validate(ModelParams::example(), s, PolicyConfig::new(0.3, 2.0)).unwrap();
    let a = optimal_allocation(&m).unwrap();
    let mech = build_mechanism(&a, &m);
    let proto = Protocol::smith(0.1, 0.1);
    let start = EpgState::endemic(&m, PopulationState::vertex(3, 2), 0.0).unwrap();
    let opts = IntegratorOptions { step: 0.01, horizon: 6000.0, stride: 1000 };
    let traj = simulate(&start, &mech, &proto, &opts).unwrap();
    let last = &traj.last().state;
    assert!(last.x.iter().zip(&a.xstar).all(|(x, xs)| (x - xs).abs() < 1e-3), "{:?}", last.x);
    assert!((last.i - a.istar()).abs() < 1e-4);
}

/// Closed loop without disease deaths, written out from scratch.
mod no_deaths {
    pub struct Loop {
        pub gamma: f64,
        pub omega: f64,
        pub sigma: f64,
        pub betas: [f64; 2],
        pub betastar: f64,
        pub upsilon: f64,
        pub lambda: f64,
        pub cap: f64,
    }

    impl Loop {
        pub fn endemic(&self, b: f64) -> (f64, f64) {
            let i = self.omega * (1.0 - self.sigma / b) / (self.omega + self.gamma);
            (i, self.gamma * i / self.omega)
        }

        fn rates(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
            let f = |g: f64| if g > 0.0 { (self.lambda * g).min(self.cap) } else { 0.0 };
            [[0.0, f(p[1] - p[0])], [f(p[0] - p[1]), 0.0]]
        }

        pub fn field(&self, y: [f64; 5]) -> [f64; 5] {
            let [i, r, x1, x2, q] = y;
            let b = self.betas[0] * x1 + self.betas[1] * x2;
            let t = self.rates([q * self.betas[0], q * self.betas[1]]);
            let v1 = x2 * t[1][0] - x1 * t[0][1];
            let (ih, rh) = self.endemic(b);
            let dih = self.sigma * self.omega / (b * b * (self.omega + self.gamma));
            let drh = self.gamma / self.omega * dih;
            let a = b / self.gamma;
            let da = 1.0 / self.gamma;
            let rt = rh - r;
            let g = (i / ih).ln() * dih
                - self.upsilon * self.upsilon * (b - self.betastar)
                - 0.5 * (2.0 * a * drh + rt * da) * rt;
            [(b * (1.0 - i - r) - self.sigma) * i, self.gamma * i - self.omega * r, v1, -v1, g]
        }

        pub fn rk4(&self, mut y: [f64; 5], h: f64, steps: usize) -> [f64; 5] {
            let add = |y: [f64; 5], k: [f64; 5], s: f64| {
                let mut o = y;
                for d in 0..5 {
                    o[d] += s * k[d];
                }
                o
            };
            for _ in 0..steps {
                let k1 = self.field(y);
                let k2 = self.field(add(y, k1, 0.5 * h));
                let k3 = self.field(add(y, k2, 0.5 * h));
                let k4 = self.field(add(y, k3, h));
                for d in 0..5 {
                    y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
                }
            }
            y
        }
    }
}

#[test]
fn vanishing_death_rate_matches_death_free_model() {
    let params = ModelParams { delta: 1e-12, ..ModelParams::example() };
    let m = validate(params, StrategySpec::example(), PolicyConfig::new(0.1, 2.0)).unwrap();
    let a = optimal_allocation(&m).unwrap();
    let mech = build_mechanism(&a, &m);
    let start = example_start(&m);
    let opts = IntegratorOptions { step: 0.01, horizon: 100.0, stride: 10_000 };
    let traj = simulate(&start, &mech, &Protocol::smith(0.1, 0.1), &opts).unwrap();

    let oracle = no_deaths::Loop {
        gamma: 0.1,
        omega: 0.011,
        sigma: 0.1,
        betas: [0.15, 0.19],
        betastar: 0.17,
        upsilon: 2.0,
        lambda: 0.1,
        cap: 0.1,
    };
    let (i0, r0) = oracle.endemic(0.15);
    let y = oracle.rk4([i0, r0, 1.0, 0.0, 0.0], 0.01, 10_000);
    let s = &traj.last().state;
    let got = [s.i, s.r, s.x[0], s.x[1], s.q];
    for (g, w) in got.iter().zip(&y) {
        assert!((g - w).abs() < 1e-6, "{got:?} vs {y:?}");
    }
}

#[test]
fn example_loop_starts_from_endemic_state() {
    let (m, _, mech, _) = example_loop(2.0);
    let s = example_start(&m);
    assert!((mech.feedback(s.i, s.r, &s.x, 0.0).unwrap() - 0.08).abs() < 1e-15);
}
