//! Exact pathwise simulation of multiple Wiener-Itô integrals from
//! finite-rank kernels, Malliavin derivative components, and the product
//! formula.
//!
//! At finite rank an order-`p` integral is a polynomial in the independent
//! Gaussians `ξ_k = W(e_k)`: a rank-one kernel `e_k^{⊗p}` maps to the
//! probabilists' Hermite polynomial `H_p(ξ_k)`, and a general symmetric
//! kernel follows by multilinearity through its sorted-tuple multiplicities.

use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::kernels::{
    contract_scalar, BasisIndex, PathVector, ScalarKernel, VectorKernel,
};
use crate::mc::{self, Rng};
use crate::{Error, Result};

/// Finite vector of independent standard normals, one per basis index; the
/// randomness source for all chaos sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDraw {
    xi: Vec<f64>,
    seed: Option<u64>,
}

impl GaussianDraw {
    pub fn sample(truncation: u32, rng: &mut Rng) -> Self {
        let xi = (0..truncation)
            .map(|_| rand::Rng::sample(rng, StandardNormal))
            .collect();
        GaussianDraw { xi, seed: None }
    }

    /// Deterministic draw; records the seed for provenance.
    pub fn from_seed(truncation: u32, seed: u64) -> Self {
        let mut rng = mc::rng_from_seed(seed);
        let mut draw = Self::sample(truncation, &mut rng);
        draw.seed = Some(seed);
        draw
    }

    pub fn from_values(xi: Vec<f64>) -> Self {
        GaussianDraw { xi, seed: None }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn value(&self, index: BasisIndex) -> f64 {
        self.xi[(index.0 - 1) as usize]
    }

    fn check(&self, truncation: u32) -> Result<()> {
        if self.xi.len() < truncation as usize {
            return Err(Error::invalid(format!(
                "draw of length {} is shorter than basis truncation {truncation}",
                self.xi.len()
            )));
        }
        Ok(())
    }
}

/// One sampled chaos element together with the draw that produced it.
#[derive(Debug, Clone)]
pub struct ChaosSample {
    pub value: ChaosValue,
    pub draw: GaussianDraw,
}

#[derive(Debug, Clone)]
pub enum ChaosValue {
    Scalar(f64),
    Path(PathVector),
}

/// Probabilists' Hermite polynomial `H_k(x)` via the three-term recurrence
/// `H_{k+1}(x) = x H_k(x) - k H_{k-1}(x)`.
pub fn hermite(k: usize, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            for j in 1..k {
                let next = x * cur - j as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Evaluates `I_p(f)` at a draw: each sorted tuple with multiplicities
/// `(m_1, ..., m_j)` over distinct indices contributes
/// `coeff · #permutations · Π_i H_{m_i}(ξ_i)`.
pub fn sample_scalar_integral(f: &ScalarKernel, draw: &GaussianDraw) -> Result<f64> {
    draw.check(f.truncation())?;
    let mut acc = 0.0;
    for (key, v) in f.entries() {
        let mut prod = v * tuple_perm_count(key);
        let mut i = 0;
        while i < key.len() {
            let mut mult = 1;
            while i + mult < key.len() && key[i + mult] == key[i] {
                mult += 1;
            }
            prod *= hermite(mult, draw.value(BasisIndex(key[i])));
            i += mult;
        }
        acc += prod;
    }
    Ok(acc)
}

fn tuple_perm_count(sorted: &[u32]) -> f64 {
    let mut num = 1.0;
    let mut den = 1.0;
    let mut run = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        num *= (i + 1) as f64;
        if i > 0 && sorted[i - 1] == *v {
            run += 1.0;
        } else {
            run = 1.0;
        }
        den *= run;
    }
    num / den
}

/// Evaluates the nuclear series `I_p(f) = Σ_j I_p(f_j) x_j` at a draw.
pub fn sample_vector_integral(f: &VectorKernel, draw: &GaussianDraw) -> Result<PathVector> {
    draw.check(f.truncation())?;
    let mut acc = vec![0.0f64; (f.steps() + 1) * f.dim()];
    for term in f.terms() {
        let g = sample_scalar_integral(&term.scalar, draw)?;
        for (a, x) in acc.iter_mut().zip(term.path.values()) {
            *a += g * x;
        }
    }
    PathVector::new(f.t_max(), f.dim(), acc)
}

/// Malliavin derivative components of `I_p(f)`: component `k` is the
/// order-`p-1` kernel `p · f(e_k, ·)`, so that `D_k I_p(f) = I_{p-1}(comp_k)`
/// pathwise. Only indices actually appearing in `f` are returned.
pub fn malliavin_components(f: &ScalarKernel) -> Vec<(BasisIndex, ScalarKernel)> {
    let p = f.order();
    if p == 0 {
        return Vec::new();
    }
    let mut by_index: std::collections::BTreeMap<u32, Vec<(Vec<u32>, f64)>> = Default::default();
    for (key, v) in f.entries() {
        let mut i = 0;
        while i < key.len() {
            if i == 0 || key[i] != key[i - 1] {
                let mut rest = key.to_vec();
                rest.remove(i);
                by_index.entry(key[i]).or_default().push((rest, p as f64 * v));
            }
            i += 1;
        }
    }
    by_index
        .into_iter()
        .map(|(k, entries)| {
            let kernel = ScalarKernel::from_sym_entries(p - 1, f.truncation(), entries)
                .expect("derivative entries inherit validity from f");
            (BasisIndex(k), kernel)
        })
        .collect()
}

/// Pathwise residual of the product formula
/// `I_p(f) I_q(g) = Σ_r r! C(p,r) C(q,r) I_{p+q-2r}(f ⊗̃_r g)`.
/// The identity is exact, so the residual is floating-point noise.
pub fn product_formula_check(
    f: &ScalarKernel,
    g: &ScalarKernel,
    draw: &GaussianDraw,
) -> Result<f64> {
    let p = f.order();
    let q = g.order();
    let lhs = sample_scalar_integral(f, draw)? * sample_scalar_integral(g, draw)?;
    let mut rhs = 0.0;
    for r in 0..=p.min(q) {
        let coeff = crate::kernels::factorial(r)
            * crate::kernels::binomial(p, r)
            * crate::kernels::binomial(q, r);
        let contracted = contract_scalar(f, g, r)?;
        rhs += coeff * sample_scalar_integral(&contracted, draw)?;
    }
    Ok((lhs - rhs).abs())
}

/// Scale by which `-L^{-1}` acts on order-`q` chaos: multiplication by `1/q`.
pub fn neg_linv_scale(order: usize) -> Result<f64> {
    if order == 0 {
        return Err(Error::invalid(
            "-L^{-1} vanishes on constants; order must be at least 1".to_string(),
        ));
    }
    Ok(1.0 / order as f64)
}

/// Which norm-equivalence constants to use for multiple integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormMode {
    /// Hilbert codomain, s = 2: both constants collapse to `√(p!)`.
    Hilbert,
    /// General Banach codomain: Kahane-Khintchine-based constants for the
    /// `L^s` comparison, with `kappa` supplied by the caller.
    Generic { s: f64, kappa: f64 },
}

/// Constants `(c_{p,s}, C_{p,s})` of the Wiener-Itô norm equivalence
/// `c ‖T‖_γ ≤ ‖I_p(T)‖_{L^s} ≤ C ‖T‖_γ`.
pub fn isometry_constants(p: usize, mode: NormMode) -> (f64, f64) {
    match mode {
        NormMode::Hilbert => {
            let v = crate::kernels::factorial(p).sqrt();
            (v, v)
        }
        NormMode::Generic { s, kappa } => {
            let p_f = p as f64;
            // 0^0 = 1 keeps the p = 0 constants finite
            let p_pow = if p == 0 { 1.0 } else { p_f.powf(p_f) };
            let fact = crate::kernels::factorial(p);
            let c = 2.0f64.powf((p_f - 1.0) / s) * (fact / p_pow).sqrt() / kappa;
            let big_c = 4.0f64.powf((3.0 * p_f + 1.0) / s) * (p_pow / fact).sqrt() * kappa;
            (c, big_c)
        }
    }
}
