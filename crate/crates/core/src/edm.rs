//! Evolutionary dynamics: pairwise-comparison revision protocols, the mean
//! vector field on the simplex, and the storage/dissipation pair that makes
//! impartial pairwise comparison (IPC) dynamics δ-passive.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for ties in [`best_response`].
pub const TIE_TOL: f64 = 1e-12;

/// Tolerance for membership of the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationState(Vec<f64>);

impl PopulationState {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidArgument("empty population state".into()));
        }
        if x.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidArgument(format!("entries of {x:?} must lie in [0, 1]")));
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!("population state sums to {sum}")));
        }
        Ok(PopulationState(x))
    }

    /// Unit mass on strategy `i` of `n`.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut x = vec![0.0; n];
        x[i] = 1.0;
        PopulationState(x)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An IPC protocol given by one switching-rate map per target strategy.
#[derive(Clone)]
pub struct IpcRates {
    rates: Vec<RateFn>,
    cap: f64,
}

impl IpcRates {
    /// `rates[j]` maps a nonnegative payoff gap to a rate in `[0, cap]`.
    pub fn new(rates: Vec<RateFn>, cap: f64) -> Self {
        IpcRates { rates, cap }
    }
}

impl fmt::Debug for IpcRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IpcRates").field("n", &self.rates.len()).field("cap", &self.cap).finish()
    }
}

#[derive(Debug, Clone)]
pub enum Protocol {
    /// Smith's protocol: rate `min(lambda * gap, cap)`.
    Smith {
        lambda: f64,
        cap: f64,
    },
    Ipc(IpcRates),
}

impl Protocol {
    pub fn smith(lambda: f64, cap: f64) -> Self {
        Protocol::Smith { lambda, cap }
    }

    pub fn cap(&self) -> f64 {
        match self {
            Protocol::Smith { cap, .. } => *cap,
            Protocol::Ipc(r) => r.cap,
        }
    }

    /// Switching rate toward strategy `j` for a nonnegative payoff gap.
    pub fn rate(&self, j: usize, gap: f64) -> f64 {
        match self {
            Protocol::Smith { lambda, cap } => (lambda * gap).min(*cap),
            Protocol::Ipc(r) => r.rates[j](gap),
        }
    }

    /// `∫_0^gap rate_j(s) ds` for a nonnegative gap.
    fn rate_integral(&self, j: usize, gap: f64) -> f64 {
        match self {
            Protocol::Smith { lambda, cap } => {
                if gap <= cap / lambda {
                    0.5 * lambda * gap * gap
                } else {
                    cap * gap - cap * cap / (2.0 * lambda)
                }
            }
            Protocol::Ipc(r) => adaptive_simpson(&*r.rates[j], 0.0, gap, 1e-13, 40),
        }
    }

    fn check_ipc(&self) -> Result<()> {
        if let Protocol::Ipc(r) = self {
            for (j, phi) in r.rates.iter().enumerate() {
                let at_zero = phi(0.0);
                if at_zero != 0.0 {
                    return Err(Error::NotIpc(format!("rate map {j} is {at_zero} at zero gap")));
                }
            }
        }
        Ok(())
    }
}

/// Row-major `n x n` switching-rate matrix; entry `(i, j)` is the rate from `i` to `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchRates {
    n: usize,
    data: Vec<f64>,
}

impl SwitchRates {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

pub fn switch_rates(proto: &Protocol, p: &[f64]) -> SwitchRates {
    let n = p.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let gap = p[j] - p[i];
                if gap > 0.0 {
                    data[i * n + j] = proto.rate(j, gap);
                }
            }
        }
    }
    SwitchRates { n, data }
}

/// Mean dynamics: inflow minus outflow for each strategy.
pub fn mean_field(proto: &Protocol, x: &[f64], p: &[f64]) -> Vec<f64> {
    let t = switch_rates(proto, p);
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut inflow = 0.0;
            let mut outflow = 0.0;
            for j in (0..n).filter(|&j| j != i) {
                inflow += x[j] * t.get(j, i);
                outflow += t.get(i, j);
            }
            inflow - x[i] * outflow
        })
        .collect()
}

/// Indices attaining the maximal payoff, ties within [`TIE_TOL`].
pub fn best_response(p: &[f64]) -> Vec<usize> {
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..p.len()).filter(|&i| p[i] >= max - TIE_TOL).collect()
}

/// True when every strategy in use is a best response to `p`.
pub fn is_best_response(x: &[f64], p: &[f64]) -> bool {
    let br = best_response(p);
    x.iter().enumerate().all(|(i, &xi)| xi <= 0.0 || br.contains(&i))
}

/// Gradient of the storage with respect to `x`; it does not depend on `x`.
pub fn storage_gradient(proto: &Protocol, p: &[f64]) -> Result<Vec<f64>> {
    proto.check_ipc()?;
    let n = p.len();
    Ok((0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let gap = p[j] - p[i];
                    if gap > 0.0 {
                        proto.rate_integral(j, gap)
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect())
}

/// Storage `S(x, p) = Σ_i x_i Σ_j ∫_0^{[p_j - p_i]_+} φ_j`.
pub fn ipc_storage(proto: &Protocol, x: &[f64], p: &[f64]) -> Result<f64> {
    let grad = storage_gradient(proto, p)?;
    Ok(x.iter().zip(&grad).map(|(xi, gi)| xi * gi).sum())
}

/// Dissipation `P(x, p)`: the decrease rate of the storage along the mean
/// dynamics with payoffs held fixed.
pub fn ipc_dissipation(proto: &Protocol, x: &[f64], p: &[f64]) -> Result<f64> {
    let grad = storage_gradient(proto, p)?;
    let v = mean_field(proto, x, p);
    let drift: f64 = grad.iter().zip(&v).map(|(g, vi)| g * vi).sum();
    Ok((-drift).max(0.0))
}

fn adaptive_simpson(f: &(dyn Fn(f64) -> f64 + Send + Sync), a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &(dyn Fn(f64) -> f64 + Send + Sync),
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, depth)
}
