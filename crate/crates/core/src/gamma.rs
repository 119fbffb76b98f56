//! Carré du champ decomposition into contraction integrals, covariance
//! tensors, and the deviation quantity `E ‖Γπ(X, -L⁻¹X) - Q_Z‖` that drives
//! every distance bound.
//!
//! For `X = I_p(f)` and `Y = I_q(g)` the carré du champ expands as
//! `Γπ(X, Y) = Σ_{r=1}^{p∧q} a_{p,q,r} I_{p+q-2r}(f ⊗̃_{r,π} g)`; applying
//! `-L⁻¹` scales by `1/q`, and subtracting the covariance removes the
//! deterministic `r = p = q` term. What remains is bounded termwise through
//! nuclear-series norms of the contracted kernels.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chaos::{isometry_constants, sample_scalar_integral, GaussianDraw, NormMode};
use crate::kernels::{
    binomial, contract_vector, factorial, projective_norm_upper, VectorKernel, VectorTensorKernel,
};
use crate::mc::{self, McEstimate};
use crate::{Error, Result};

/// Coefficient `a_{p,q,r} = pq (r-1)! C(p-1, r-1) C(q-1, r-1)` of the carré
/// du champ decomposition.
pub fn a_coeff(p: usize, q: usize, r: usize) -> Result<f64> {
    if r == 0 || r > p.min(q) {
        return Err(Error::ContractionRank { r, p, q });
    }
    Ok((p * q) as f64 * factorial(r - 1) * binomial(p - 1, r - 1) * binomial(q - 1, r - 1))
}

/// One term of the decomposition: rank `r`, its coefficient, and the
/// symmetrized vector-valued contraction kernel.
#[derive(Debug, Clone)]
pub struct GammaTerm {
    pub r: usize,
    pub coeff: f64,
    pub kernel: VectorTensorKernel,
}

/// `Γπ(I_p(f), I_q(g))` expanded into multiple integrals of contracted
/// kernels, `r = 1 ..= p∧q`.
#[derive(Debug, Clone)]
pub struct GammaDecomposition {
    pub p: usize,
    pub q: usize,
    pub terms: Vec<GammaTerm>,
}

impl GammaDecomposition {
    /// Evaluates the decomposition at a draw, returning the sampled element
    /// of the projective tensor product as a nuclear series: merged
    /// coefficients keyed by path pair.
    pub fn sample(&self, draw: &GaussianDraw) -> Result<SampledTensor> {
        let mut atoms: Vec<(std::sync::Arc<crate::kernels::PathVector>, std::sync::Arc<crate::kernels::PathVector>, f64)> =
            Vec::new();
        let mut index: BTreeMap<(Vec<u64>, Vec<u64>), usize> = BTreeMap::new();
        for term in &self.terms {
            for t in term.kernel.terms() {
                let v = term.coeff * sample_scalar_integral(&t.scalar, draw)?;
                let key = (t.left.merge_key(), t.right.merge_key());
                match index.get(&key) {
                    Some(&pos) => atoms[pos].2 += v,
                    None => {
                        index.insert(key, atoms.len());
                        atoms.push((t.left.clone(), t.right.clone(), v));
                    }
                }
            }
        }
        Ok(SampledTensor { atoms })
    }
}

/// A sampled element of `E ⊗̂π F` in nuclear-series form.
pub struct SampledTensor {
    pub atoms: Vec<(std::sync::Arc<crate::kernels::PathVector>, std::sync::Arc<crate::kernels::PathVector>, f64)>,
}

impl SampledTensor {
    /// Nuclear-series upper bound on the projective norm of the sample.
    pub fn projective_norm_upper(&self) -> f64 {
        self.atoms
            .iter()
            .map(|(x, y, v)| v.abs() * x.sup_norm() * y.sup_norm())
            .sum()
    }

    /// Shifts the coefficient of a path pair (used to subtract a covariance
    /// tensor sharing the same atoms).
    pub fn subtract(&mut self, other: &SampledTensor) {
        let mut index: BTreeMap<(Vec<u64>, Vec<u64>), usize> = BTreeMap::new();
        for (pos, (x, y, _)) in self.atoms.iter().enumerate() {
            index.insert((x.merge_key(), y.merge_key()), pos);
        }
        for (x, y, v) in &other.atoms {
            match index.get(&(x.merge_key(), y.merge_key())) {
                Some(&pos) => self.atoms[pos].2 -= v,
                None => self.atoms.push((x.clone(), y.clone(), -v)),
            }
        }
    }
}

/// Expands `Γπ(I_p(f), I_q(g))` via termwise contraction and symmetrization.
pub fn gamma_decompose(f: &VectorKernel, g: &VectorKernel) -> Result<GammaDecomposition> {
    let p = f.order();
    let q = g.order();
    if p == 0 || q == 0 {
        return Err(Error::invalid("carré du champ needs orders >= 1".to_string()));
    }
    let mut terms = Vec::new();
    for r in 1..=p.min(q) {
        terms.push(GammaTerm {
            r,
            coeff: a_coeff(p, q, r)?,
            kernel: contract_vector(f, g, r)?,
        });
    }
    Ok(GammaDecomposition { p, q, terms })
}

/// Cross-covariance tensor of `I_p(f)` and `I_q(g)`, both as an order-0
/// nuclear series and as the grid matrix `Cov(F(s), G(t))`.
#[derive(Debug, Clone)]
pub struct CovTensor {
    /// `p! (f ⊗̃_{p,π} g)` when `p = q`; empty when the orders differ.
    pub tensor: VectorTensorKernel,
    /// Grid covariance, size `(G+1)d × (G+1)d`, time-major.
    pub matrix: DMatrix<f64>,
}

impl CovTensor {
    pub fn sampled(&self) -> SampledTensor {
        SampledTensor {
            atoms: self
                .tensor
                .terms()
                .iter()
                .map(|t| (t.left.clone(), t.right.clone(), t.scalar.scalar_value()))
                .collect(),
        }
    }
}

/// Covariance of two chaos elements: `p! I_0(f ⊗̃_{p,π} g)` when the orders
/// agree, zero otherwise (distinct chaoses are uncorrelated).
pub fn covariance_tensor(f: &VectorKernel, g: &VectorKernel) -> Result<CovTensor> {
    let p = f.order();
    let q = g.order();
    let rows = (f.steps() + 1) * f.dim();
    let cols = (g.steps() + 1) * g.dim();
    if p != q || p == 0 {
        return Ok(CovTensor {
            tensor: VectorTensorKernel::empty(0, f.truncation(), f.t_max(), f.dim(), f.steps()),
            matrix: DMatrix::zeros(rows, cols),
        });
    }
    let tensor = contract_vector(f, g, p)?.scale(factorial(p));
    let mut matrix = DMatrix::zeros(rows, cols);
    for term in tensor.terms() {
        let c = term.scalar.scalar_value();
        let xs = term.left.values();
        let ys = term.right.values();
        for (i, &x) in xs.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in ys.iter().enumerate() {
                matrix[(i, j)] += c * x * y;
            }
        }
    }
    Ok(CovTensor { tensor, matrix })
}

/// One term of the deviation bound report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationTerm {
    pub r: usize,
    pub a: f64,
    #[serde(rename = "C_const")]
    pub c_const: f64,
    pub contraction_norm: f64,
    pub contribution: f64,
}

/// Per-`r` breakdown of the carré du champ deviation bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationBreakdown {
    pub p: usize,
    pub q: usize,
    pub terms: Vec<DeviationTerm>,
    pub total: f64,
}

/// Termwise bound on `E ‖Γπ(X, -L⁻¹Y) - Q_{X,Y}‖_π`:
/// `(1/q) Σ_{r=1}^{p∧q-1} a_{p,q,r} C_{p+q-2r} · projective_norm_upper(f ⊗̃_{r,π} g)`.
/// Returns zero (empty sum) when `p ∧ q = 1`; the first chaos has
/// deterministic carré du champ.
pub fn gamma_deviation_bound(
    f: &VectorKernel,
    g: &VectorKernel,
    mode: NormMode,
) -> Result<DeviationBreakdown> {
    let p = f.order();
    let q = g.order();
    if p == 0 || q == 0 {
        return Err(Error::invalid("deviation bound needs orders >= 1".to_string()));
    }
    let mut terms = Vec::new();
    let mut total = 0.0;
    for r in 1..p.min(q) {
        let a = a_coeff(p, q, r)?;
        let c_const = isometry_constants(p + q - 2 * r, mode).1;
        let contraction_norm = projective_norm_upper(&contract_vector(f, g, r)?);
        let contribution = a / q as f64 * c_const * contraction_norm;
        total += contribution;
        terms.push(DeviationTerm { r, a, c_const, contraction_norm, contribution });
    }
    Ok(DeviationBreakdown { p, q, terms, total })
}

/// Monte Carlo estimate of `E ‖Γπ(X, -L⁻¹X) - Q_X‖_π` through the
/// nuclear-series upper bound of each sample: the random terms
/// (`r ≤ p-1`) of the decomposition are sampled with a shared draw, scaled
/// by `1/p`, and assembled into a nuclear series whose bound is averaged.
pub fn gamma_deviation_mc(f: &VectorKernel, n_samples: u64, seed: u64) -> Result<McEstimate> {
    let p = f.order();
    if p == 0 {
        return Err(Error::invalid("deviation needs order >= 1".to_string()));
    }
    if p == 1 {
        return Ok(McEstimate { mean: 0.0, std_error: 0.0, n: n_samples });
    }
    let mut random_terms = Vec::new();
    for r in 1..p {
        random_terms.push(GammaTerm {
            r,
            coeff: a_coeff(p, p, r)? / p as f64,
            kernel: contract_vector(f, f, r)?,
        });
    }
    let decomp = GammaDecomposition { p, q: p, terms: random_terms };
    let truncation = f.truncation();
    Ok(mc::estimate(n_samples, seed, |rng| {
        let draw = GaussianDraw::sample(truncation, rng);
        decomp
            .sample(&draw)
            .expect("draw length matches truncation")
            .projective_norm_upper()
    }))
}

/// Trace (nuclear) norm of a square matrix: the sum of its singular values.
pub fn trace_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("trace_norm input"));
    }
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "trace norm needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let svd = m.clone().svd(false, false);
    Ok(svd.singular_values.iter().sum())
}
