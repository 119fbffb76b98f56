//! Finite-rank symmetric tensor kernels over a truncated orthonormal basis,
//! the contraction calculus `f ⊗_r g`, and kernel norms.
//!
//! A [`ScalarKernel`] of order `p` is a symmetric element of the `p`-th
//! tensor power of the truncated Hilbert space span{e_1, ..., e_n}. Storage
//! is sparse: one entry per sorted multi-index, holding the common
//! coefficient of every permutation of that index tuple. Symmetry is an
//! invariant of the type; the symmetrizing constructor
//! [`ScalarKernel::from_ordered`] is the entry point for raw (ordered)
//! tensor data.
//!
//! A [`VectorKernel`] is a nuclear series `Σ_j f_j ⊗ x_j` pairing scalar
//! kernels with grid-sampled paths, and a [`VectorTensorKernel`] carries two
//! path slots per term, `Σ c_jk ⊗ x_j ⊗ y_k`, the shape produced by
//! [`contract_vector`].

use std::collections::BTreeMap;
use std::sync::Arc;

use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::mc::{self, McEstimate};
use crate::{Error, Result};

/// Flat index into the truncated orthonormal basis, 1-based: `1 ≤ i ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BasisIndex(pub u32);

impl BasisIndex {
    /// Flattens a 1-based double index `(k, m)` with `m ≤ modes` to
    /// `(k-1)*modes + m`. Bijective onto `1..=k_max*modes`.
    pub fn from_double(k: u32, m: u32, modes: u32) -> Result<Self> {
        if k == 0 || m == 0 || m > modes {
            return Err(Error::invalid(format!(
                "double index ({k},{m}) out of range for {modes} modes"
            )));
        }
        let flat = (k - 1)
            .checked_mul(modes)
            .and_then(|v| v.checked_add(m))
            .ok_or_else(|| Error::invalid("basis index overflow".to_string()))?;
        Ok(BasisIndex(flat))
    }

    /// Inverse of [`BasisIndex::from_double`].
    pub fn to_double(self, modes: u32) -> (u32, u32) {
        let zero = self.0 - 1;
        (zero / modes + 1, zero % modes + 1)
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc.round()
}

/// Number of distinct permutations of a sorted index tuple
/// (`len! / Π multiplicity_i!`).
fn perm_count(sorted: &[u32]) -> f64 {
    let mut count: u128 = 1;
    // multinomial via incremental multiplicities: product over positions of
    // (position+1)/(run length so far)
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    let mut run = 0u128;
    for (i, v) in sorted.iter().enumerate() {
        num = num.wrapping_mul((i + 1) as u128);
        if i > 0 && sorted[i - 1] == *v {
            run += 1;
        } else {
            run = 1;
        }
        den = den.wrapping_mul(run);
        if num % den == 0 {
            count = num / den;
        }
    }
    if sorted.is_empty() {
        return 1.0;
    }
    let _ = count;
    (num / den) as f64
}

/// All distinct ways to split the multiset `sorted` into a kept part of size
/// `len - r` and a contracted part of size `r`. Returns `(kept, contracted)`
/// pairs, each sorted.
fn multiset_splits(sorted: &[u32], r: usize) -> Vec<(Vec<u32>, Vec<u32>)> {
    // group into (value, count)
    let mut groups: Vec<(u32, usize)> = Vec::new();
    for &v in sorted {
        match groups.last_mut() {
            Some((g, c)) if *g == v => *c += 1,
            _ => groups.push((v, 1)),
        }
    }
    let mut out = Vec::new();
    let mut take = vec![0usize; groups.len()];
    fn rec(
        groups: &[(u32, usize)],
        take: &mut Vec<usize>,
        g: usize,
        left: usize,
        out: &mut Vec<(Vec<u32>, Vec<u32>)>,
    ) {
        if g == groups.len() {
            if left == 0 {
                let mut kept = Vec::new();
                let mut contracted = Vec::new();
                for (i, &(v, c)) in groups.iter().enumerate() {
                    for _ in 0..take[i] {
                        contracted.push(v);
                    }
                    for _ in 0..(c - take[i]) {
                        kept.push(v);
                    }
                }
                out.push((kept, contracted));
            }
            return;
        }
        let max_here = groups[g].1.min(left);
        for t in 0..=max_here {
            take[g] = t;
            rec(groups, take, g + 1, left - t, out);
        }
        take[g] = 0;
    }
    rec(&groups, &mut take, 0, r, &mut out);
    out
}

/// All distinct permutations of a sorted multiset.
pub(crate) fn distinct_permutations(sorted: &[u32]) -> Vec<Vec<u32>> {
    let mut pool = sorted.to_vec();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(sorted.len());
    fn rec(pool: &mut Vec<u32>, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pool.is_empty() {
            out.push(cur.clone());
            return;
        }
        let mut last: Option<u32> = None;
        for i in 0..pool.len() {
            if last == Some(pool[i]) {
                continue;
            }
            last = Some(pool[i]);
            let v = pool.remove(i);
            cur.push(v);
            rec(pool, cur, out);
            cur.pop();
            pool.insert(i, v);
        }
    }
    rec(&mut pool, &mut cur, &mut out);
    out
}

fn merge_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.sort_unstable();
    out
}

const PRUNE_EPS: f64 = 0.0;

/// Order-`p` symmetric coefficient tensor over a truncated orthonormal basis.
///
/// Dense semantics: the coefficient of the ordered tuple `w` is the stored
/// value at `sorted(w)`. Every kernel of this type is symmetric by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarKernel {
    order: usize,
    truncation: u32,
    coeffs: BTreeMap<Vec<u32>, f64>,
}

impl ScalarKernel {
    /// The zero kernel of the given order and truncation.
    pub fn zero(order: usize, truncation: u32) -> Self {
        ScalarKernel { order, truncation, coeffs: BTreeMap::new() }
    }

    /// Builds a kernel from entries keyed by *sorted* multi-indices; the
    /// value is the coefficient shared by every permutation of the tuple.
    pub fn from_sym_entries(
        order: usize,
        truncation: u32,
        entries: impl IntoIterator<Item = (Vec<u32>, f64)>,
    ) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (key, v) in entries {
            Self::check_key(order, truncation, &key)?;
            if key.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::invalid(format!("index tuple {key:?} is not sorted")));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("kernel coefficient"));
            }
            *coeffs.entry(key).or_insert(0.0) += v;
        }
        coeffs.retain(|_, v| v.abs() > PRUNE_EPS);
        Ok(ScalarKernel { order, truncation, coeffs })
    }

    /// Builds the symmetrization of a raw ordered tensor: each ordered entry
    /// `(tuple, v)` contributes `v/perm_count(tuple)` to the coefficient of
    /// its sorted representative, which is exactly the permutation average.
    pub fn from_ordered(
        order: usize,
        truncation: u32,
        entries: impl IntoIterator<Item = (Vec<u32>, f64)>,
    ) -> Result<Self> {
        let mut coeffs: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (key, v) in entries {
            Self::check_key(order, truncation, &key)?;
            if !v.is_finite() {
                return Err(Error::NonFinite("kernel coefficient"));
            }
            let mut sorted = key;
            sorted.sort_unstable();
            let pc = perm_count(&sorted);
            *coeffs.entry(sorted).or_insert(0.0) += v / pc;
        }
        coeffs.retain(|_, v| v.abs() > PRUNE_EPS);
        Ok(ScalarKernel { order, truncation, coeffs })
    }

    /// Rank-one kernel `e_i^{⊗p}` scaled by `weight`.
    pub fn rank_one(index: BasisIndex, order: usize, truncation: u32, weight: f64) -> Result<Self> {
        Self::from_sym_entries(order, truncation, [(vec![index.0; order], weight)])
    }

    fn check_key(order: usize, truncation: u32, key: &[u32]) -> Result<()> {
        if key.len() != order {
            return Err(Error::invalid(format!(
                "index tuple length {} does not match order {order}",
                key.len()
            )));
        }
        if key.iter().any(|&i| i == 0 || i > truncation) {
            return Err(Error::invalid(format!(
                "index tuple {key:?} outside 1..={truncation}"
            )));
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Sorted-representative entries `(sorted tuple, coefficient)`.
    pub fn entries(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.coeffs.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Coefficient of an arbitrary ordered tuple.
    pub fn coeff(&self, tuple: &[u32]) -> f64 {
        let mut key = tuple.to_vec();
        key.sort_unstable();
        self.coeffs.get(&key).copied().unwrap_or(0.0)
    }

    /// Symmetrization. Storage already holds the symmetric representative,
    /// so this is the identity projection; kept so the operator algebra
    /// reads as in the calculus.
    pub fn symmetrize(&self) -> Self {
        self.clone()
    }

    /// Hilbert-Schmidt norm: square root of the sum of squared coefficients
    /// over all ordered tuples.
    pub fn hs_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, v)| v * v * perm_count(k))
            .sum::<f64>()
            .sqrt()
    }

    /// Coefficientwise inner product `⟨f, g⟩` over all ordered tuples.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.order != other.order {
            return Err(Error::OrderMismatch { left: self.order, right: other.order });
        }
        if self.truncation != other.truncation {
            return Err(Error::TruncationMismatch {
                left: self.truncation,
                right: other.truncation,
            });
        }
        Ok(self
            .coeffs
            .iter()
            .filter_map(|(k, v)| other.coeffs.get(k).map(|w| v * w * perm_count(k)))
            .sum())
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        if factor == 0.0 {
            out.coeffs.clear();
            return out;
        }
        for v in out.coeffs.values_mut() {
            *v *= factor;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.order != other.order {
            return Err(Error::OrderMismatch { left: self.order, right: other.order });
        }
        if self.truncation != other.truncation {
            return Err(Error::TruncationMismatch {
                left: self.truncation,
                right: other.truncation,
            });
        }
        let mut coeffs = self.coeffs.clone();
        for (k, v) in &other.coeffs {
            *coeffs.entry(k.clone()).or_insert(0.0) += v;
        }
        coeffs.retain(|_, v| v.abs() > PRUNE_EPS);
        Ok(ScalarKernel { order: self.order, truncation: self.truncation, coeffs })
    }

    /// The value of the order-0 kernel (empty tuple coefficient).
    pub fn scalar_value(&self) -> f64 {
        self.coeffs.get(&Vec::new()).copied().unwrap_or(0.0)
    }

    pub(crate) fn splits(&self, r: usize) -> Vec<(Vec<u32>, Vec<u32>, f64)> {
        let mut out = Vec::new();
        for (key, &v) in &self.coeffs {
            for (kept, contracted) in multiset_splits(key, r) {
                out.push((kept, contracted, v));
            }
        }
        out
    }
}

/// Symmetrized contraction `f ⊗̃_r g` of the last `r` slots of `f` against
/// the first `r` slots of `g`. Both inputs are symmetric (a type invariant),
/// making the slot convention immaterial; the result is re-symmetrized so it
/// stays representable.
///
/// `r = 0` is the symmetrized tensor product; `r = p = q` is the full
/// contraction `⟨f, g⟩` as an order-0 kernel.
pub fn contract_scalar(f: &ScalarKernel, g: &ScalarKernel, r: usize) -> Result<ScalarKernel> {
    if r > f.order.min(g.order) {
        return Err(Error::ContractionRank { r, p: f.order, q: g.order });
    }
    if f.truncation != g.truncation {
        return Err(Error::TruncationMismatch { left: f.truncation, right: g.truncation });
    }
    let out_order = f.order + g.order - 2 * r;

    // bucket g's coefficient splits by contracted sub-multiset
    let mut buckets: BTreeMap<Vec<u32>, Vec<(Vec<u32>, f64)>> = BTreeMap::new();
    for (mu_t, mu_u, vg) in g.splits(r) {
        buckets.entry(mu_u).or_default().push((mu_t, vg));
    }

    // join against f's splits; blocks are keyed by (kept-from-f, kept-from-g)
    let mut blocks: BTreeMap<(Vec<u32>, Vec<u32>), f64> = BTreeMap::new();
    for (mu_s, mu_u, vf) in f.splits(r) {
        if let Some(list) = buckets.get(&mu_u) {
            let pc_u = perm_count(&mu_u);
            for (mu_t, vg) in list {
                *blocks.entry((mu_s.clone(), mu_t.clone())).or_insert(0.0) += pc_u * vf * vg;
            }
        }
    }

    // fold the block-symmetric contraction into its full symmetrization
    let mut coeffs: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for ((mu_s, mu_t), val) in blocks {
        let w = merge_sorted(&mu_s, &mu_t);
        let weight = perm_count(&mu_s) * perm_count(&mu_t) / perm_count(&w);
        *coeffs.entry(w).or_insert(0.0) += weight * val;
    }
    coeffs.retain(|_, v| v.abs() > PRUNE_EPS);
    Ok(ScalarKernel { order: out_order, truncation: f.truncation, coeffs })
}

/// Hilbert-Schmidt norm of a scalar kernel.
pub fn hs_norm(f: &ScalarKernel) -> f64 {
    f.hs_norm()
}

/// Uniform-grid sample of a continuous function on `[0, T]` with values in
/// `R^d`, stored row-major by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathVector {
    t_max: f64,
    dim: usize,
    steps: usize,
    values: Vec<f64>,
    /// Exact sup-norm when known analytically (e.g. closed-form
    /// eigenfunctions); otherwise the grid maximum is used.
    sup_norm_hint: Option<f64>,
}

impl PathVector {
    pub fn new(t_max: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::invalid(format!("horizon T = {t_max} must be positive")));
        }
        if dim == 0 {
            return Err(Error::invalid("path dimension must be at least 1".to_string()));
        }
        if values.len() < 2 * dim || values.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "value buffer of length {} does not hold at least two R^{dim} nodes",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("path values"));
        }
        let steps = values.len() / dim - 1;
        Ok(PathVector { t_max, dim, steps, values, sup_norm_hint: None })
    }

    /// Builds a path by evaluating `f` on the uniform grid with `steps`
    /// subintervals.
    pub fn from_fn(t_max: f64, steps: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("grid needs at least one step".to_string()));
        }
        let values = (0..=steps).map(|i| f(i as f64 * t_max / steps as f64)).collect();
        PathVector::new(t_max, 1, values)
    }

    pub fn zero(t_max: f64, dim: usize, steps: usize) -> Result<Self> {
        PathVector::new(t_max, dim, vec![0.0; (steps + 1) * dim])
    }

    /// Attaches an analytically known sup-norm.
    pub fn with_sup_norm_hint(mut self, sup: f64) -> Self {
        self.sup_norm_hint = Some(sup);
        self
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid subintervals `G`; the grid has `G + 1` nodes.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.t_max / self.steps as f64
    }

    /// `sup_t |x(t)|` with the Euclidean norm on `R^d`, taken over grid
    /// nodes unless an exact hint is attached.
    pub fn sup_norm(&self) -> f64 {
        if let Some(h) = self.sup_norm_hint {
            return h;
        }
        (0..=self.steps)
            .map(|i| self.node(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.t_max == other.t_max && self.dim == other.dim && self.steps == other.steps
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.sup_norm_hint = self.sup_norm_hint.map(|h| h * a.abs());
        for v in out.values.iter_mut() {
            *v *= a;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        PathVector::new(self.t_max, self.dim, values)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Merge key: exact bit pattern of grid metadata and values.
    pub(crate) fn merge_key(&self) -> Vec<u64> {
        let mut key = Vec::with_capacity(self.values.len() + 4);
        key.push(self.t_max.to_bits());
        key.push(self.dim as u64);
        key.push(self.steps as u64);
        key.push(self.sup_norm_hint.map(|h| h.to_bits()).unwrap_or(u64::MAX - 1));
        key.extend(self.values.iter().map(|v| v.to_bits()));
        key
    }
}

/// One term `f_j ⊗ x_j` of a nuclear series.
#[derive(Debug, Clone)]
pub struct KernelTerm {
    pub scalar: ScalarKernel,
    pub path: Arc<PathVector>,
}

/// Nuclear series `Σ_j f_j ⊗ x_j` representing an order-`p` kernel with
/// values in grid-discretized `C([0,T]; R^d)`.
#[derive(Debug, Clone)]
pub struct VectorKernel {
    order: usize,
    truncation: u32,
    t_max: f64,
    dim: usize,
    steps: usize,
    terms: Vec<KernelTerm>,
}

impl VectorKernel {
    pub fn new(
        order: usize,
        truncation: u32,
        t_max: f64,
        dim: usize,
        steps: usize,
        terms: Vec<KernelTerm>,
    ) -> Result<Self> {
        for term in &terms {
            if term.scalar.order() != order {
                return Err(Error::OrderMismatch { left: term.scalar.order(), right: order });
            }
            if term.scalar.truncation() != truncation {
                return Err(Error::TruncationMismatch {
                    left: term.scalar.truncation(),
                    right: truncation,
                });
            }
            if term.path.t_max() != t_max || term.path.dim() != dim || term.path.steps() != steps {
                return Err(Error::GridMismatch);
            }
        }
        Ok(VectorKernel { order, truncation, t_max, dim, steps, terms })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    /// Merges terms whose paths are bit-identical by adding their scalar
    /// parts. The represented tensor is unchanged; the nuclear representation
    /// gets shorter (and its nuclear-series norm bound sharper).
    pub fn merge_terms(&self) -> Self {
        let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut terms: Vec<KernelTerm> = Vec::new();
        for term in &self.terms {
            let key = term.path.merge_key();
            match index.get(&key) {
                Some(&pos) => {
                    terms[pos].scalar = terms[pos]
                        .scalar
                        .add(&term.scalar)
                        .expect("merged terms share order and truncation");
                }
                None => {
                    index.insert(key, terms.len());
                    terms.push(term.clone());
                }
            }
        }
        terms.retain(|t| !t.scalar.is_zero());
        VectorKernel { terms, ..self.clone() }
    }

    /// Nuclear-series bound `Σ_j ‖f_j‖_HS · ‖x_j‖_∞` used by the type
    /// invariant and as a crude γ-norm bound.
    pub fn nuclear_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.scalar.hs_norm() * t.path.sup_norm())
            .sum()
    }
}

/// One term of a two-slot nuclear series `c ⊗ x ⊗ y`.
#[derive(Debug, Clone)]
pub struct TensorTerm {
    pub scalar: ScalarKernel,
    pub left: Arc<PathVector>,
    pub right: Arc<PathVector>,
}

/// Nuclear series `Σ c_jk ⊗ x_j ⊗ y_k` with values in the projective tensor
/// product of two path spaces; the codomain of [`contract_vector`].
#[derive(Debug, Clone)]
pub struct VectorTensorKernel {
    order: usize,
    truncation: u32,
    t_max: f64,
    dim: usize,
    steps: usize,
    terms: Vec<TensorTerm>,
}

impl VectorTensorKernel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn terms(&self) -> &[TensorTerm] {
        &self.terms
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn empty(order: usize, truncation: u32, t_max: f64, dim: usize, steps: usize) -> Self {
        VectorTensorKernel { order, truncation, t_max, dim, steps, terms: Vec::new() }
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.order != other.order {
            return Err(Error::OrderMismatch { left: self.order, right: other.order });
        }
        if self.truncation != other.truncation {
            return Err(Error::TruncationMismatch {
                left: self.truncation,
                right: other.truncation,
            });
        }
        if self.t_max != other.t_max || self.dim != other.dim || self.steps != other.steps {
            return Err(Error::GridMismatch);
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(VectorTensorKernel { terms, ..self.clone() })
    }

    pub fn scale(&self, a: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| TensorTerm { scalar: t.scalar.scale(a), ..t.clone() })
            .collect();
        VectorTensorKernel { terms, ..self.clone() }
    }
}

/// Termwise contraction of two nuclear series: the terms of `f ⊗̃_{r} g` are
/// `(f_j ⊗̃_r g_k, x_j, y_k)` over all pairs. Pairs whose scalar contraction
/// vanishes are dropped and terms sharing a bit-identical path pair are
/// merged, which leaves the represented tensor unchanged.
pub fn contract_vector(f: &VectorKernel, g: &VectorKernel, r: usize) -> Result<VectorTensorKernel> {
    if r == 0 || r > f.order.min(g.order) {
        return Err(Error::ContractionRank { r, p: f.order, q: g.order });
    }
    if f.truncation != g.truncation {
        return Err(Error::TruncationMismatch { left: f.truncation, right: g.truncation });
    }
    if f.t_max != g.t_max || f.dim != g.dim || f.steps != g.steps {
        return Err(Error::GridMismatch);
    }
    let out_order = f.order + g.order - 2 * r;

    // global index over g's coefficient splits so sparse kernels join in
    // near-linear time instead of all-pairs
    let mut buckets: BTreeMap<Vec<u32>, Vec<(usize, Vec<u32>, f64)>> = BTreeMap::new();
    for (k, term) in g.terms.iter().enumerate() {
        for (mu_t, mu_u, vg) in term.scalar.splits(r) {
            buckets.entry(mu_u).or_default().push((k, mu_t, vg));
        }
    }

    type Block = BTreeMap<(Vec<u32>, Vec<u32>), f64>;
    let mut pair_blocks: BTreeMap<(usize, usize), Block> = BTreeMap::new();
    for (j, term) in f.terms.iter().enumerate() {
        for (mu_s, mu_u, vf) in term.scalar.splits(r) {
            if let Some(list) = buckets.get(&mu_u) {
                let pc_u = perm_count(&mu_u);
                for (k, mu_t, vg) in list {
                    *pair_blocks
                        .entry((j, *k))
                        .or_default()
                        .entry((mu_s.clone(), mu_t.clone()))
                        .or_insert(0.0) += pc_u * vf * vg;
                }
            }
        }
    }

    let mut index: BTreeMap<(Vec<u64>, Vec<u64>), usize> = BTreeMap::new();
    let mut terms: Vec<TensorTerm> = Vec::new();
    for ((j, k), blocks) in pair_blocks {
        let mut coeffs: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for ((mu_s, mu_t), val) in blocks {
            let w = merge_sorted(&mu_s, &mu_t);
            let weight = perm_count(&mu_s) * perm_count(&mu_t) / perm_count(&w);
            *coeffs.entry(w).or_insert(0.0) += weight * val;
        }
        coeffs.retain(|_, v| v.abs() > PRUNE_EPS);
        if coeffs.is_empty() {
            continue;
        }
        let scalar = ScalarKernel { order: out_order, truncation: f.truncation, coeffs };
        let left = Arc::clone(&f.terms[j].path);
        let right = Arc::clone(&g.terms[k].path);
        let key = (left.merge_key(), right.merge_key());
        match index.get(&key) {
            Some(&pos) => {
                terms[pos].scalar = terms[pos]
                    .scalar
                    .add(&scalar)
                    .expect("merged contraction terms share order and truncation");
            }
            None => {
                index.insert(key, terms.len());
                terms.push(TensorTerm { scalar, left, right });
            }
        }
    }
    terms.retain(|t| !t.scalar.is_zero());
    Ok(VectorTensorKernel {
        order: out_order,
        truncation: f.truncation,
        t_max: f.t_max,
        dim: f.dim,
        steps: f.steps,
        terms,
    })
}

/// Nuclear-series upper bound `Σ ‖c_jk‖_HS · ‖x_j‖_∞ · ‖y_k‖_∞` on the
/// γ-norm of a tensor-valued contraction. Always an upper bound computed
/// from the given representation, never an exact norm.
pub fn projective_norm_upper(u: &VectorTensorKernel) -> f64 {
    u.terms
        .iter()
        .map(|t| t.scalar.hs_norm() * t.left.sup_norm() * t.right.sup_norm())
        .sum()
}

/// Monte Carlo estimate of the γ^p-norm of a nuclear series via its defining
/// Gaussian sum: per sample, `p` independent standard Gaussian vectors are
/// drawn and `E ‖Σ_j G_j x_j‖_∞²` is estimated, where `G_j` couples the
/// kernel coefficients with products of the independent draws. Returns the
/// square root with a delta-method standard error.
pub fn gamma_norm_mc(f: &VectorKernel, n_samples: u64, seed: u64) -> Result<McEstimate> {
    if n_samples == 0 {
        return Err(Error::invalid("gamma_norm_mc needs at least one sample".to_string()));
    }
    let n_basis = f.truncation as usize;
    let order = f.order;
    let sq = mc::estimate(n_samples, seed, |rng| {
        // independent copies of the isonormal process, one per tensor slot
        let draws: Vec<Vec<f64>> = (0..order.max(1))
            .map(|_| (0..n_basis).map(|_| rand::Rng::sample(rng, StandardNormal)).collect())
            .collect();
        let mut acc = vec![0.0f64; (f.steps + 1) * f.dim];
        for term in &f.terms {
            let mut gj = 0.0;
            for (key, v) in term.scalar.entries() {
                if order == 0 {
                    gj += v;
                    continue;
                }
                for perm in distinct_permutations(key) {
                    let mut prod = v;
                    for (slot, idx) in perm.iter().enumerate() {
                        prod *= draws[slot][(*idx - 1) as usize];
                    }
                    gj += prod;
                }
            }
            for (a, x) in acc.iter_mut().zip(term.path.values()) {
                *a += gj * x;
            }
        }
        let dim = f.dim;
        (0..=f.steps)
            .map(|i| acc[i * dim..(i + 1) * dim].iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max)
    });
    let mean = sq.mean.max(0.0).sqrt();
    let std_error = if mean > 0.0 { sq.std_error / (2.0 * mean) } else { 0.0 };
    Ok(McEstimate { mean, std_error, n: sq.n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn e(i: u32) -> BasisIndex {
        BasisIndex(i)
    }

    fn random_kernel(rng: &mut mc::Rng, order: usize, truncation: u32) -> ScalarKernel {
        use rand::Rng as _;
        let mut entries = Vec::new();
        let n_entries = rng.gen_range(1..=6);
        for _ in 0..n_entries {
            let key: Vec<u32> = (0..order).map(|_| rng.gen_range(1..=truncation)).collect();
            entries.push((key, rng.gen_range(-1.0..1.0)));
        }
        ScalarKernel::from_ordered(order, truncation, entries).unwrap()
    }

    #[test]
    fn symmetrize_averages_permutations() {
        let f = ScalarKernel::from_ordered(2, 3, [(vec![1, 2], 1.0)]).unwrap();
        assert_relative_eq!(f.coeff(&[1, 2]), 0.5);
        assert_relative_eq!(f.coeff(&[2, 1]), 0.5);

        let g = ScalarKernel::from_ordered(2, 3, [(vec![1, 1], 1.0)]).unwrap();
        assert_relative_eq!(g.coeff(&[1, 1]), 1.0);
    }

    #[test]
    fn symmetrize_is_idempotent() {
        let mut rng = mc::rng_from_seed(5);
        for _ in 0..20 {
            let f = random_kernel(&mut rng, 3, 4);
            assert_eq!(f.symmetrize().symmetrize(), f.symmetrize());
        }
    }

    #[test]
    fn contraction_matches_hand_examples() {
        let one = ScalarKernel::rank_one(e(1), 2, 3, 1.0).unwrap();
        let c = contract_scalar(&one, &one, 1).unwrap();
        assert_relative_eq!(c.coeff(&[1, 1]), 1.0);
        assert_eq!(c.order(), 2);

        let sym = ScalarKernel::from_ordered(2, 3, [(vec![1, 2], 1.0)]).unwrap();
        let full = contract_scalar(&sym, &sym, 2).unwrap();
        assert_eq!(full.order(), 0);
        assert_relative_eq!(full.scalar_value(), 0.5);
    }

    #[test]
    fn full_contraction_equals_coefficientwise_inner_product() {
        let mut rng = mc::rng_from_seed(9);
        for _ in 0..20 {
            let f = random_kernel(&mut rng, 2, 3);
            let g = random_kernel(&mut rng, 2, 3);
            let via_contract = contract_scalar(&f, &g, 2).unwrap().scalar_value();
            assert_relative_eq!(via_contract, f.inner(&g).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn hs_norms_of_simple_kernels() {
        let one = ScalarKernel::rank_one(e(1), 2, 2, 1.0).unwrap();
        assert_relative_eq!(one.hs_norm(), 1.0);
        let sym = ScalarKernel::from_ordered(2, 2, [(vec![1, 2], 1.0)]).unwrap();
        assert_relative_eq!(sym.hs_norm(), std::f64::consts::FRAC_1_SQRT_2);
    }

    #[test]
    fn contraction_norm_inequality_on_random_pairs() {
        let mut rng = mc::rng_from_seed(17);
        for trial in 0..100 {
            use rand::Rng as _;
            let p = rng.gen_range(1..=3);
            let q = rng.gen_range(1..=3);
            let f = random_kernel(&mut rng, p, 4);
            let g = random_kernel(&mut rng, q, 4);
            for r in 0..=p.min(q) {
                let c = contract_scalar(&f, &g, r).unwrap();
                assert!(
                    c.hs_norm() <= f.hs_norm() * g.hs_norm() + 1e-10,
                    "trial {trial} r {r}: {} > {}",
                    c.hs_norm(),
                    f.hs_norm() * g.hs_norm()
                );
            }
        }
    }

    // Dense reference contraction: expand both kernels to ordered tuples,
    // contract slot-by-slot, symmetrize, compare. Oracle for the sparse path.
    fn dense_contract(f: &ScalarKernel, g: &ScalarKernel, r: usize) -> BTreeMap<Vec<u32>, f64> {
        let n = f.truncation();
        let p = f.order();
        let q = g.order();
        let out_order = p + q - 2 * r;
        fn tuples(n: u32, len: usize) -> Vec<Vec<u32>> {
            let mut out = vec![vec![]];
            for _ in 0..len {
                out = out
                    .into_iter()
                    .flat_map(|t| {
                        (1..=n).map(move |i| {
                            let mut t2 = t.clone();
                            t2.push(i);
                            t2
                        })
                    })
                    .collect();
            }
            out
        }
        // raw block contraction over ordered tuples
        let mut raw: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for s in tuples(n, p - r) {
            for t in tuples(n, q - r) {
                let mut val = 0.0;
                for u in tuples(n, r) {
                    let mut fu = s.clone();
                    fu.extend_from_slice(&u);
                    let mut gu = u.clone();
                    gu.extend_from_slice(&t);
                    val += f.coeff(&fu) * g.coeff(&gu);
                }
                let mut w = s.clone();
                w.extend_from_slice(&t);
                raw.insert(w, val);
            }
        }
        // symmetrize the dense result, then store one sorted representative
        let mut sym: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for w in tuples(n, out_order) {
            let perms = distinct_permutations(&{
                let mut s = w.clone();
                s.sort_unstable();
                s
            });
            let avg: f64 =
                perms.iter().map(|p| raw.get(p).copied().unwrap_or(0.0)).sum::<f64>()
                    / perms.len() as f64;
            let mut key = w.clone();
            key.sort_unstable();
            sym.insert(key, avg);
        }
        sym
    }

    #[test]
    fn sparse_contraction_matches_dense_oracle() {
        let mut rng = mc::rng_from_seed(23);
        for _ in 0..15 {
            use rand::Rng as _;
            let p = rng.gen_range(1..=3usize);
            let q = rng.gen_range(1..=3usize);
            let f = random_kernel(&mut rng, p, 3);
            let g = random_kernel(&mut rng, q, 3);
            for r in 0..=p.min(q) {
                let fast = contract_scalar(&f, &g, r).unwrap();
                let dense = dense_contract(&f, &g, r);
                for (key, v) in &dense {
                    assert_relative_eq!(fast.coeff(key), *v, epsilon = 1e-12, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn contract_rank_out_of_range_is_rejected() {
        let f = ScalarKernel::rank_one(e(1), 2, 2, 1.0).unwrap();
        assert!(matches!(
            contract_scalar(&f, &f, 3),
            Err(Error::ContractionRank { .. })
        ));
        let g = ScalarKernel::rank_one(e(1), 2, 3, 1.0).unwrap();
        assert!(matches!(
            contract_scalar(&f, &g, 1),
            Err(Error::TruncationMismatch { .. })
        ));
    }

    fn path_const(t_max: f64, steps: usize, c: f64) -> Arc<PathVector> {
        Arc::new(PathVector::from_fn(t_max, steps, |_| c).unwrap())
    }

    #[test]
    fn vector_contraction_single_term() {
        let f1 = ScalarKernel::rank_one(e(1), 2, 2, 1.0).unwrap();
        let x = path_const(1.0, 4, 2.0);
        let y = path_const(1.0, 4, 3.0);
        let f = VectorKernel::new(2, 2, 1.0, 1, 4, vec![KernelTerm { scalar: f1.clone(), path: x }])
            .unwrap();
        let g = VectorKernel::new(2, 2, 1.0, 1, 4, vec![KernelTerm { scalar: f1, path: y }])
            .unwrap();
        let u = contract_vector(&f, &g, 1).unwrap();
        assert_eq!(u.terms().len(), 1);
        assert_relative_eq!(u.terms()[0].scalar.coeff(&[1, 1]), 1.0);
        assert_relative_eq!(projective_norm_upper(&u), 6.0);
    }

    #[test]
    fn vector_contraction_is_termwise_linear() {
        let mut rng = mc::rng_from_seed(31);
        let s1 = random_kernel(&mut rng, 2, 3);
        let s2 = random_kernel(&mut rng, 2, 3);
        let s3 = random_kernel(&mut rng, 2, 3);
        let x1 = path_const(1.0, 2, 1.0);
        let x2 = path_const(1.0, 2, -0.5);
        let x3 = path_const(1.0, 2, 2.0);
        let mk = |terms: Vec<KernelTerm>| VectorKernel::new(2, 3, 1.0, 1, 2, terms).unwrap();
        let f = mk(vec![KernelTerm { scalar: s1.clone(), path: x1.clone() }]);
        let fp = mk(vec![KernelTerm { scalar: s2.clone(), path: x2.clone() }]);
        let sum = mk(vec![
            KernelTerm { scalar: s1, path: x1 },
            KernelTerm { scalar: s2, path: x2 },
        ]);
        let g = mk(vec![KernelTerm { scalar: s3, path: x3 }]);

        let lhs = contract_vector(&sum, &g, 1).unwrap();
        let rhs = contract_vector(&f, &g, 1)
            .unwrap()
            .concat(&contract_vector(&fp, &g, 1).unwrap())
            .unwrap();
        // same represented tensor: compare nuclear bounds of the difference
        let diff = lhs.concat(&rhs.scale(-1.0)).unwrap();
        // merge by path pair: all coefficients must cancel
        let mut acc: BTreeMap<(Vec<u64>, Vec<u64>, Vec<u32>), f64> = BTreeMap::new();
        for t in diff.terms() {
            for (key, v) in t.scalar.entries() {
                *acc.entry((t.left.merge_key(), t.right.merge_key(), key.to_vec()))
                    .or_insert(0.0) += v;
            }
        }
        for (_, v) in acc {
            assert_relative_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn projective_norm_upper_is_subadditive_and_homogeneous() {
        let mut rng = mc::rng_from_seed(37);
        let s1 = random_kernel(&mut rng, 2, 3);
        let s2 = random_kernel(&mut rng, 2, 3);
        let x = path_const(1.0, 2, 1.5);
        let mk = |s: &ScalarKernel| VectorKernel::new(2, 3, 1.0, 1, 2, vec![KernelTerm {
            scalar: s.clone(),
            path: x.clone(),
        }])
        .unwrap();
        let u = contract_vector(&mk(&s1), &mk(&s2), 1).unwrap();
        let v = contract_vector(&mk(&s2), &mk(&s1), 1).unwrap();
        let both = u.concat(&v).unwrap();
        assert!(
            projective_norm_upper(&both)
                <= projective_norm_upper(&u) + projective_norm_upper(&v) + 1e-12
        );
        assert_relative_eq!(
            projective_norm_upper(&u.scale(-2.5)),
            2.5 * projective_norm_upper(&u),
            max_relative = 1e-12
        );
        let zero = VectorTensorKernel::empty(2, 3, 1.0, 1, 2);
        assert_eq!(projective_norm_upper(&zero), 0.0);
    }

    #[test]
    fn gamma_norm_mc_rank_one_matches_sup_norm() {
        // products of independent standard normals have unit second moment,
        // so the exact gamma norm of e_1^{⊗p} ⊗ x is ‖x‖_∞
        for p in [1usize, 2, 3] {
            let scalar = ScalarKernel::rank_one(e(1), p, 2, 1.0).unwrap();
            let x = Arc::new(PathVector::from_fn(1.0, 8, |t| 1.0 + t).unwrap());
            let f = VectorKernel::new(p, 2, 1.0, 1, 8, vec![KernelTerm { scalar, path: x }])
                .unwrap();
            let est = gamma_norm_mc(&f, 60_000, 1234 + p as u64).unwrap();
            assert!(
                (est.mean - 2.0).abs() <= 3.0 * est.std_error,
                "p={p}: {} +- {}",
                est.mean,
                est.std_error
            );
        }
    }

    #[test]
    fn gamma_norm_mc_zero_kernel() {
        let f = VectorKernel::new(2, 2, 1.0, 1, 4, vec![]).unwrap();
        let est = gamma_norm_mc(&f, 100, 1).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn gamma_norm_mc_first_order_matches_brute_force() {
        // p = 1: closed form E ‖Σ ξ_i x_i‖_∞² via a large direct MC oracle
        let mut rng = mc::rng_from_seed(2024);
        let x1 = Arc::new(PathVector::from_fn(1.0, 6, |t| t).unwrap());
        let x2 = Arc::new(PathVector::from_fn(1.0, 6, |t| 1.0 - t).unwrap());
        let f = VectorKernel::new(
            1,
            2,
            1.0,
            1,
            6,
            vec![
                KernelTerm { scalar: ScalarKernel::rank_one(e(1), 1, 2, 1.0).unwrap(), path: x1.clone() },
                KernelTerm { scalar: ScalarKernel::rank_one(e(2), 1, 2, 1.0).unwrap(), path: x2.clone() },
            ],
        )
        .unwrap();
        use rand::Rng as _;
        let oracle: f64 = {
            let n = 1_000_000u32;
            let mut acc = 0.0;
            for _ in 0..n {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let sup = (0..=6)
                    .map(|i| (a * x1.values()[i] + b * x2.values()[i]).abs())
                    .fold(0.0, f64::max);
                acc += sup * sup;
            }
            (acc / n as f64).sqrt()
        };
        let est = gamma_norm_mc(&f, 200_000, 99).unwrap();
        assert!(
            (est.mean - oracle).abs() <= 3.0 * (est.std_error + 0.002),
            "{} vs oracle {oracle}",
            est.mean
        );
    }

    proptest! {
        #[test]
        fn symmetrization_is_norm_nonincreasing(
            entries in proptest::collection::vec(
                (proptest::collection::vec(1u32..=4, 3), -1.0f64..1.0), 1..6)
        ) {
            let f = ScalarKernel::from_ordered(3, 4, entries.clone()).unwrap();
            let raw_norm: f64 = entries
                .iter()
                .fold(BTreeMap::<Vec<u32>, f64>::new(), |mut m, (k, v)| {
                    *m.entry(k.clone()).or_insert(0.0) += v;
                    m
                })
                .values()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            prop_assert!(f.hs_norm() <= raw_norm + 1e-10);
        }

        #[test]
        fn double_index_roundtrip(k in 1u32..500, m in 1u32..64, modes in 64u32..128) {
            let flat = BasisIndex::from_double(k, m, modes).unwrap();
            prop_assert_eq!(flat.to_double(modes), (k, m));
        }
    }
}
