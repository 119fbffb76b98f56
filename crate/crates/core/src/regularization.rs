//! The ε-regularization smoothing operator on paths and the Hölder/GRR
//! continuity constants that control it.
//!
//! `f_ε(x) = (1/2ε) ∫_{x-ε}^{x+ε} f([u]_{[0,T]}) du` with the argument
//! clamped to `[0, T]`. The integral is evaluated in closed form on the
//! piecewise-linear interpolant of the grid path, so no quadrature
//! tolerance enters the smoothing itself.

use serde::{Deserialize, Serialize};

use crate::kernels::{factorial, PathVector};
use crate::mc::{self, Rng};
use crate::{Error, Result};

/// Mean sup-norm gap `E ‖X_ε - X‖_∞` of a path sampler.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegularizationReport {
    pub epsilon: f64,
    pub mean_sup_gap: f64,
    pub std_error: f64,
    pub n: u64,
}

/// Exact antiderivative values of the piecewise-linear interpolant at grid
/// nodes, one series per dimension.
struct Antiderivative<'a> {
    path: &'a PathVector,
    cum: Vec<f64>, // (G+1) * d, A(t_i) per dim
    h: f64,
}

impl<'a> Antiderivative<'a> {
    fn new(path: &'a PathVector) -> Self {
        let d = path.dim();
        let g = path.steps();
        let h = path.t_max() / g as f64;
        let mut cum = vec![0.0; (g + 1) * d];
        for i in 1..=g {
            for k in 0..d {
                let a = path.node(i - 1)[k];
                let b = path.node(i)[k];
                cum[i * d + k] = cum[(i - 1) * d + k] + 0.5 * (a + b) * h;
            }
        }
        Antiderivative { path, cum, h }
    }

    /// `∫_0^t f_k(u) du` for `t` inside `[0, T]`, exact on the interpolant.
    fn eval(&self, t: f64, k: usize) -> f64 {
        let d = self.path.dim();
        let g = self.path.steps();
        let cell = ((t / self.h).floor() as usize).min(g.saturating_sub(1));
        let t0 = cell as f64 * self.h;
        let dt = t - t0;
        let a = self.path.node(cell)[k];
        let b = self.path.node(cell + 1)[k];
        self.cum[cell * d + k] + a * dt + (b - a) * dt * dt / (2.0 * self.h)
    }
}

/// ε-regularized version of a grid path, sampled on the same grid.
pub fn regularize(path: &PathVector, epsilon: f64) -> Result<PathVector> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon = {epsilon} must be positive")));
    }
    let t_max = path.t_max();
    let d = path.dim();
    let anti = Antiderivative::new(path);
    let mut values = Vec::with_capacity(path.values().len());
    for i in 0..=path.steps() {
        let x = path.time(i);
        let lo = x - epsilon;
        let hi = x + epsilon;
        let lo_c = lo.clamp(0.0, t_max);
        let hi_c = hi.clamp(0.0, t_max);
        for k in 0..d {
            // clamped tails contribute the boundary values times the overhang
            let left = (0.0 - lo).max(0.0).min(hi - lo) * path.node(0)[k];
            let right = (hi - t_max).max(0.0).min(hi - lo) * path.node(path.steps())[k];
            let middle = anti.eval(hi_c, k) - anti.eval(lo_c, k);
            values.push((left + middle + right) / (2.0 * epsilon));
        }
    }
    PathVector::new(t_max, d, values)
}

/// Sup-norm of `regularize(path, ε) - path` over the grid.
pub fn regularization_gap(path: &PathVector, epsilon: f64) -> Result<f64> {
    let reg = regularize(path, epsilon)?;
    Ok(reg.sub(path)?.sup_norm())
}

/// Monte Carlo mean of `‖X_ε - X‖_∞` over paths drawn from `sampler`.
pub fn regularization_gap_mc<F>(
    sampler: F,
    epsilon: f64,
    n_samples: u64,
    seed: u64,
) -> Result<RegularizationReport>
where
    F: Fn(&mut Rng) -> PathVector + Sync,
{
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample".to_string()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon = {epsilon} must be positive")));
    }
    let est = mc::estimate(n_samples, seed, |rng| {
        let path = sampler(rng);
        regularization_gap(&path, epsilon).expect("epsilon validated above")
    });
    Ok(RegularizationReport {
        epsilon,
        mean_sup_gap: est.mean,
        std_error: est.std_error,
        n: est.n,
    })
}

/// Which hypercontractivity factor enters the GRR constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrrMode {
    /// The printed constant, with factor `(p-1)^{s/2}`. Vanishes at `p = 1`.
    Paper,
    /// Standard hypercontractivity factor `(s-1)^{p/2}`.
    Hypercontractive,
}

/// Constant of the Garsia-Rodemich-Rumsey modulus bound:
/// `C = 8 · factor · √(p!) · (2/(ηs))^{1/s} · T^{(1+ηs)/s}`.
pub fn grr_constant(p: usize, s: f64, eta: f64, t_max: f64, mode: GrrMode) -> Result<f64> {
    if p == 0 {
        return Err(Error::invalid("chaos order must be at least 1".to_string()));
    }
    if !(s > 2.0) {
        return Err(Error::invalid(format!("s = {s} must exceed 2")));
    }
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta = {eta} must be positive")));
    }
    if !(t_max > 0.0) {
        return Err(Error::invalid(format!("T = {t_max} must be positive")));
    }
    let factor = match mode {
        GrrMode::Paper => ((p - 1) as f64).powf(s / 2.0),
        GrrMode::Hypercontractive => (s - 1.0).powf(p as f64 / 2.0),
    };
    Ok(8.0
        * factor
        * factorial(p).sqrt()
        * (2.0 / (eta * s)).powf(1.0 / s)
        * t_max.powf((1.0 + eta * s) / s))
}

/// Hölder regularization-gap bound `C · L · ε^{β - 1/s - η}` for an order-`p`
/// integral with `β`-Hölder kernel constant `L`.
#[allow(clippy::too_many_arguments)]
pub fn holder_reg_bound(
    l: f64,
    beta: f64,
    s: f64,
    eta: f64,
    epsilon: f64,
    p: usize,
    t_max: f64,
    mode: GrrMode,
) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid(format!("beta = {beta} outside (0, 1]")));
    }
    let exponent = beta - 1.0 / s - eta;
    if !(eta > 0.0 && exponent > 0.0) {
        return Err(Error::invalid(format!(
            "eta = {eta} outside the admissible range (0, {})",
            beta - 1.0 / s
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon = {epsilon} must be positive")));
    }
    Ok(grr_constant(p, s, eta, t_max, mode)? * l * epsilon.powf(exponent))
}

/// Standard Brownian path on a uniform grid; the reference sampler for the
/// regularization scaling checks.
pub fn brownian_path(t_max: f64, steps: usize, rng: &mut Rng) -> PathVector {
    use rand::Rng as _;
    let h = (t_max / steps as f64).sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut acc = 0.0;
    values.push(0.0);
    for _ in 0..steps {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        acc += h * z;
        values.push(acc);
    }
    PathVector::new(t_max, 1, values).expect("finite increments")
}
