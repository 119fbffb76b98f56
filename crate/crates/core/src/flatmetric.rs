//! Empirical bounded-Lipschitz (flat-metric) distance between samples of
//! path-valued random elements.
//!
//! Computationally the flat metric between two empirical measures is the
//! optimal-transport value with ground cost `min(distance, 2)`; the dual of
//! that program runs over potentials that are 1-Lipschitz and bounded by one
//! after centering, which is exactly the test-function class of the metric.
//! Small instances are validated against the brute-force dual enumeration in
//! [`oracle`], and every solve can emit a feasible dual witness.

use crate::kernels::PathVector;
use crate::mc::{self, Rng};
use crate::{Error, Result};

/// Atoms with equal weights `1/N`. Atoms are flat buffers of `(G+1) * dim`
/// coordinates compared in the metric `max_t |a(t) - b(t)|_2`; plain points
/// are paths with a single node.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    atoms: Vec<Vec<f64>>,
    dim: usize,
}

/// Full exact transport is refused above this many atoms per side; use
/// [`sliced_dbl_lower`] instead.
pub const MAX_EXACT_ATOMS: usize = 2048;

impl EmpiricalMeasure {
    pub fn from_points(atoms: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty("empirical measure"));
        }
        if dim == 0 {
            return Err(Error::invalid("dimension must be >= 1".to_string()));
        }
        let len = atoms[0].len();
        if len == 0 || len % dim != 0 {
            return Err(Error::invalid(format!(
                "atom length {len} is not a positive multiple of dim {dim}"
            )));
        }
        for a in &atoms {
            if a.len() != len {
                return Err(Error::GridMismatch);
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("atom coordinates"));
            }
        }
        Ok(EmpiricalMeasure { atoms, dim })
    }

    pub fn from_paths(paths: &[PathVector]) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Empty("empirical measure"));
        }
        let first = &paths[0];
        for p in paths {
            if !p.same_grid(first) {
                return Err(Error::GridMismatch);
            }
        }
        Self::from_points(paths.iter().map(|p| p.values().to_vec()).collect(), first.dim())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    /// Sup-over-time of the Euclidean node distance.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.dim;
        a.chunks_exact(d)
            .zip(b.chunks_exact(d))
            .map(|(x, y)| {
                x.iter()
                    .zip(y)
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.atoms[0].len() != other.atoms[0].len() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

fn capped_cost(d: f64) -> f64 {
    d.min(2.0)
}

fn cost_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Vec<Vec<f64>> {
    mu.atoms
        .iter()
        .map(|a| nu.atoms.iter().map(|b| capped_cost(mu.distance(a, b))).collect())
        .collect()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Integer supplies/demands for two equal-weight measures: scale by
/// `lcm(N, N')` so every atom carries an integer number of mass units.
fn integer_marginals(n_mu: usize, n_nu: usize) -> (u64, u64, u64) {
    let (n1, n2) = (n_mu as u64, n_nu as u64);
    let l = n1 / gcd(n1, n2) * n2;
    (l / n1, l / n2, l)
}

/// Exact transport solution with value and dual potentials.
pub struct TransportSolution {
    /// Optimal value of the transportation program (already rescaled to
    /// probability mass).
    pub value: f64,
    /// Dual potential on the source atoms.
    pub u: Vec<f64>,
    /// Dual potential on the sink atoms.
    pub v: Vec<f64>,
}

/// Successive-shortest-path min-cost flow on the dense bipartite
/// transportation graph. Exact for integer marginals; every augmentation
/// retires at least one unit of supply, so termination is structural.
fn solve_transport(cost: &[Vec<f64>], supply: &[u64], demand: &[u64]) -> Result<TransportSolution> {
    let m = cost.len();
    let n = cost[0].len();
    let total: u64 = supply.iter().sum();
    if total != demand.iter().sum::<u64>() {
        return Err(Error::Solver("marginal mass mismatch".to_string()));
    }
    let mut flow = vec![vec![0u64; n]; m];
    let mut supply_rem = supply.to_vec();
    let mut demand_rem = demand.to_vec();
    let mut potential = vec![0.0f64; m + n];
    let mut remaining = total;

    while remaining > 0 {
        // multi-source Dijkstra on reduced costs
        let nv = m + n;
        let mut dist = vec![f64::INFINITY; nv];
        let mut parent = vec![usize::MAX; nv];
        let mut done = vec![false; nv];
        for (i, &s) in supply_rem.iter().enumerate() {
            if s > 0 {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nv {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for v in 0..nv {
                if !done[v] && dist[v] < best_d {
                    best = v;
                    best_d = dist[v];
                }
            }
            if best == usize::MAX {
                break;
            }
            done[best] = true;
            if best < m {
                let i = best;
                for j in 0..n {
                    let rc = (cost[i][j] + potential[i] - potential[m + j]).max(0.0);
                    if dist[i] + rc < dist[m + j] {
                        dist[m + j] = dist[i] + rc;
                        parent[m + j] = i;
                    }
                }
            } else {
                let j = best - m;
                for i in 0..m {
                    if flow[i][j] > 0 {
                        let rc = (-cost[i][j] + potential[m + j] - potential[i]).max(0.0);
                        if dist[m + j] + rc < dist[i] {
                            dist[i] = dist[m + j] + rc;
                            parent[i] = m + j;
                        }
                    }
                }
            }
        }
        let sink = (0..n)
            .filter(|&j| demand_rem[j] > 0 && dist[m + j] < f64::INFINITY)
            .min_by(|&a, &b| dist[m + a].total_cmp(&dist[m + b]))
            .ok_or_else(|| Error::Solver("no augmenting path to remaining demand".to_string()))?;
        let sink_dist = dist[m + sink];
        for v in 0..m + n {
            potential[v] += dist[v].min(sink_dist);
        }
        // trace path, find bottleneck
        let mut bottleneck = demand_rem[sink];
        let mut v = m + sink;
        loop {
            let p = parent[v];
            if v >= m {
                if p == usize::MAX {
                    return Err(Error::Solver("broken augmenting path".to_string()));
                }
                if parent[p] == usize::MAX {
                    bottleneck = bottleneck.min(supply_rem[p]);
                    break;
                }
                v = p;
            } else {
                bottleneck = bottleneck.min(flow[v][p - m]);
                v = p;
            }
        }
        // apply augmentation
        let mut v = m + sink;
        loop {
            let p = parent[v];
            if v >= m {
                flow[p][v - m] += bottleneck;
                if parent[p] == usize::MAX {
                    supply_rem[p] -= bottleneck;
                    break;
                }
                v = p;
            } else {
                flow[v][p - m] -= bottleneck;
                v = p;
            }
        }
        demand_rem[sink] -= bottleneck;
        remaining -= bottleneck;
    }

    let mut value = 0.0;
    for i in 0..m {
        for j in 0..n {
            if flow[i][j] > 0 {
                value += flow[i][j] as f64 * cost[i][j];
            }
        }
    }
    let u: Vec<f64> = potential[..m].iter().map(|p| -p).collect();
    let v: Vec<f64> = potential[m..].iter().copied().collect();
    Ok(TransportSolution { value, u, v })
}

/// Empirical flat metric: the exact optimal-transport value between the two
/// equal-weight empirical measures with ground cost `min(distance, 2)`.
pub fn empirical_dbl(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    mu.check_compatible(nu)?;
    if mu.len() > MAX_EXACT_ATOMS || nu.len() > MAX_EXACT_ATOMS {
        return Err(Error::invalid(format!(
            "exact transport refused above {MAX_EXACT_ATOMS} atoms per side; use sliced_dbl_lower"
        )));
    }
    let cost = cost_matrix(mu, nu);
    let (su, sv, scale) = integer_marginals(mu.len(), nu.len());
    let sol = solve_transport(&cost, &vec![su; mu.len()], &vec![sv; nu.len()])?;
    Ok(sol.value / scale as f64)
}

/// Solves the transport program and converts the optimal duals into a
/// bounded-Lipschitz witness: values of a test function on all atoms that is
/// 1-Lipschitz, bounded by one, and attains the transport value. Returned as
/// `(value, f_on_mu_atoms, f_on_nu_atoms)`.
pub fn dbl_witness(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    mu.check_compatible(nu)?;
    let cost = cost_matrix(mu, nu);
    let (su, sv, scale) = integer_marginals(mu.len(), nu.len());
    let sol = solve_transport(&cost, &vec![su; mu.len()], &vec![sv; nu.len()])?;
    // double c-transform tightens the duals into c-Lipschitz potentials
    let mut u = sol.u.clone();
    let v: Vec<f64> = (0..nu.len())
        .map(|j| (0..mu.len()).map(|i| cost[i][j] - u[i]).fold(f64::INFINITY, f64::min))
        .collect();
    for (i, ui) in u.iter_mut().enumerate() {
        *ui = (0..nu.len()).map(|j| cost[i][j] - v[j]).fold(f64::INFINITY, f64::min);
    }
    // witness f equals u on mu's atoms and -v on nu's atoms, centered
    let f_mu = u;
    let f_nu: Vec<f64> = v.iter().map(|x| -x).collect();
    let hi = f_mu.iter().chain(&f_nu).fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lo = f_mu.iter().chain(&f_nu).fold(f64::INFINITY, |a, &b| a.min(b));
    let shift = 0.5 * (hi + lo);
    Ok((
        sol.value / scale as f64,
        f_mu.iter().map(|x| x - shift).collect(),
        f_nu.iter().map(|x| x - shift).collect(),
    ))
}

/// Cheap lower bound for large samples: the maximum over `k` random
/// 1-Lipschitz linear functionals of the one-dimensional flat metric of the
/// projected samples. Projections contract the metric, so this never
/// exceeds [`empirical_dbl`].
pub fn sliced_dbl_lower(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    k: usize,
    seed: u64,
) -> Result<f64> {
    mu.check_compatible(nu)?;
    if k == 0 {
        return Err(Error::invalid("need at least one direction".to_string()));
    }
    let len = mu.atoms[0].len();
    let dim = mu.dim;
    let mut best: f64 = 0.0;
    let mut rng = mc::rng_from_seed(seed);
    for _ in 0..k {
        // random functional, normalized so Σ_t |w(t)|_2 = 1, which makes it
        // 1-Lipschitz for the sup-Euclidean path metric
        let mut w: Vec<f64> =
            (0..len).map(|_| rand::Rng::sample(&mut rng, rand_distr::StandardNormal)).collect();
        let norm: f64 = w
            .chunks_exact(dim)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum();
        if norm == 0.0 {
            continue;
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
        let project = |m: &EmpiricalMeasure| -> Result<EmpiricalMeasure> {
            EmpiricalMeasure::from_points(
                m.atoms
                    .iter()
                    .map(|a| vec![a.iter().zip(&w).map(|(x, c)| x * c).sum()])
                    .collect(),
                1,
            )
        };
        let value = empirical_dbl(&project(mu)?, &project(nu)?)?;
        best = best.max(value);
    }
    Ok(best)
}

/// Flat metric between two fresh same-law samples; the Monte Carlo noise
/// floor for rate experiments.
pub fn dbl_selfconsistency<F>(sampler: F, n: usize, seed: u64) -> Result<f64>
where
    F: Fn(&mut Rng) -> PathVector,
{
    if n == 0 {
        return Err(Error::Empty("selfconsistency sample"));
    }
    let mut rng = mc::rng_from_seed(seed);
    let a: Vec<PathVector> = (0..n).map(|_| sampler(&mut rng)).collect();
    let b: Vec<PathVector> = (0..n).map(|_| sampler(&mut rng)).collect();
    empirical_dbl(&EmpiricalMeasure::from_paths(&a)?, &EmpiricalMeasure::from_paths(&b)?)
}

/// Brute-force oracles for small instances. These are deliberately naive and
/// independent of the flow solver; they exist to validate it.
pub mod oracle {
    use super::*;

    /// Exhaustive enumeration of all integer transport plans (the vertices
    /// of the transportation polytope are integral, so the minimum over all
    /// integer-feasible plans is the LP optimum). Only for tiny instances.
    pub fn plan_enumeration(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
        mu.check_compatible(nu)?;
        if mu.len() > 5 || nu.len() > 5 {
            return Err(Error::invalid("plan enumeration oracle is for <= 5 atoms".to_string()));
        }
        let cost = cost_matrix(mu, nu);
        let (su, sv, scale) = integer_marginals(mu.len(), nu.len());
        let supplies = vec![su; mu.len()];
        let mut best = f64::INFINITY;
        let mut demand_rem = vec![sv; nu.len()];
        fn rec(
            cost: &[Vec<f64>],
            supplies: &[u64],
            row: usize,
            col: usize,
            row_left: u64,
            acc: f64,
            demand_rem: &mut Vec<u64>,
            best: &mut f64,
        ) {
            if acc >= *best {
                return;
            }
            if row == cost.len() {
                *best = acc;
                return;
            }
            let n = cost[0].len();
            if col == n {
                if row_left == 0 {
                    let next_left = if row + 1 < cost.len() { supplies[row + 1] } else { 0 };
                    rec(cost, supplies, row + 1, 0, next_left, acc, demand_rem, best);
                }
                return;
            }
            // remaining columns must be able to absorb the remaining supply
            let tail: u64 = demand_rem[col..].iter().sum();
            if tail < row_left {
                return;
            }
            let max_here = row_left.min(demand_rem[col]);
            for units in 0..=max_here {
                demand_rem[col] -= units;
                rec(
                    cost,
                    supplies,
                    row,
                    col + 1,
                    row_left - units,
                    acc + units as f64 * cost[row][col],
                    demand_rem,
                    best,
                );
                demand_rem[col] += units;
            }
        }
        rec(&cost, &supplies, 0, 0, supplies[0], 0.0, &mut demand_rem, &mut best);
        Ok(best / scale as f64)
    }

    /// Brute-force dual (potential) enumeration: every vertex of the
    /// gauge-fixed dual polyhedron comes from a spanning tree of tight
    /// constraints `u_i + v_j = c_ij`. Enumerates all spanning trees of the
    /// complete bipartite support graph, solves the tight system on each,
    /// keeps the feasible ones, and maximizes the dual objective. By strong
    /// duality the result equals the transport value.
    pub fn potential_enumeration(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
        mu.check_compatible(nu)?;
        let m = mu.len();
        let n = nu.len();
        if m > 4 || n > 4 {
            return Err(Error::invalid(
                "potential enumeration oracle is for <= 4 atoms".to_string(),
            ));
        }
        let cost = cost_matrix(mu, nu);
        let edges: Vec<(usize, usize)> =
            (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let tree_size = m + n - 1;
        let mut best = f64::NEG_INFINITY;

        let mut chosen = Vec::with_capacity(tree_size);
        fn rec(
            edges: &[(usize, usize)],
            start: usize,
            chosen: &mut Vec<(usize, usize)>,
            tree_size: usize,
            m: usize,
            n: usize,
            cost: &[Vec<f64>],
            best: &mut f64,
        ) {
            if chosen.len() == tree_size {
                evaluate(chosen, m, n, cost, best);
                return;
            }
            if edges.len() - start < tree_size - chosen.len() {
                return;
            }
            for e in start..edges.len() {
                chosen.push(edges[e]);
                rec(edges, e + 1, chosen, tree_size, m, n, cost, best);
                chosen.pop();
            }
        }

        fn evaluate(tree: &[(usize, usize)], m: usize, n: usize, cost: &[Vec<f64>], best: &mut f64) {
            // solve u_i + v_j = c_ij over the tree via BFS from u_0 = 0
            let mut u = vec![f64::NAN; m];
            let mut v = vec![f64::NAN; n];
            u[0] = 0.0;
            let mut changed = true;
            let mut assigned = 1;
            while changed {
                changed = false;
                for &(i, j) in tree {
                    if u[i].is_finite() && v[j].is_nan() {
                        v[j] = cost[i][j] - u[i];
                        assigned += 1;
                        changed = true;
                    } else if v[j].is_finite() && u[i].is_nan() {
                        u[i] = cost[i][j] - v[j];
                        assigned += 1;
                        changed = true;
                    }
                }
            }
            if assigned != m + n {
                return; // not spanning / not connected
            }
            for i in 0..m {
                for j in 0..n {
                    if u[i] + v[j] > cost[i][j] + 1e-12 {
                        return; // infeasible vertex
                    }
                }
            }
            let objective =
                u.iter().sum::<f64>() / m as f64 + v.iter().sum::<f64>() / n as f64;
            if objective > *best {
                *best = objective;
            }
        }

        rec(&edges, 0, &mut chosen, tree_size, m, n, &cost, &mut best);
        if !best.is_finite() {
            return Err(Error::Solver("no feasible dual vertex found".to_string()));
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn points(pts: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_points(pts.iter().map(|&p| vec![p]).collect(), 1).unwrap()
    }

    fn points2d(pts: &[(f64, f64)]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_points(pts.iter().map(|&(a, b)| vec![a, b]).collect(), 1).unwrap()
    }

    #[test]
    fn identical_measures_have_zero_distance() {
        let mu = points(&[0.0, 1.0, 5.0]);
        assert_relative_eq!(empirical_dbl(&mu, &mu).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dirac_pair_respects_cap() {
        let mu = points(&[0.0]);
        let nu = points(&[3.0]);
        assert_relative_eq!(empirical_dbl(&mu, &nu).unwrap(), 2.0);
        let near = points(&[0.7]);
        assert_relative_eq!(empirical_dbl(&mu, &near).unwrap(), 0.7);
    }

    #[test]
    fn cap_makes_crossing_matchings_optimal() {
        // far clusters: pairing both long edges through the cap is cheaper
        // than the monotone matching
        let mu = points(&[0.0, 0.1]);
        let nu = points(&[2.05, 2.1]);
        let value = empirical_dbl(&mu, &nu).unwrap();
        let monotone = 0.5 * (2.0 + 2.0);
        let crossing = 0.5 * (2.0 + 1.95);
        assert!(value <= crossing + 1e-12);
        assert!(value < monotone);
        assert_relative_eq!(value, crossing, epsilon = 1e-9);
    }

    #[test]
    fn three_atom_instances_match_both_oracles() {
        let cases: Vec<(EmpiricalMeasure, EmpiricalMeasure)> = vec![
            (points(&[0.0, 1.0, 2.0]), points(&[0.5, 1.5, 10.0])),
            (points(&[0.0, 0.0, 4.0]), points(&[1.0, 2.0, 3.0])),
            (points(&[-1.0, 0.0]), points(&[0.25, 0.5, 3.0])),
            (points2d(&[(0.0, 0.0), (1.0, 1.0)]), points2d(&[(0.0, 1.0), (5.0, 5.0)])),
        ];
        for (mu, nu) in &cases {
            let solver = empirical_dbl(mu, nu).unwrap();
            let plans = oracle::plan_enumeration(mu, nu).unwrap();
            let duals = oracle::potential_enumeration(mu, nu).unwrap();
            assert_relative_eq!(solver, plans, epsilon = 1e-9);
            assert_relative_eq!(solver, duals, epsilon = 1e-9);
        }
    }

    #[test]
    fn witness_is_feasible_and_attains_value() {
        let mut rng = mc::rng_from_seed(7);
        use rand::Rng as _;
        for _ in 0..20 {
            let n = rng.gen_range(2..=6);
            let mu = points(&(0..n).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<_>>());
            let nu = points(&(0..n).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<_>>());
            let (value, f_mu, f_nu) = dbl_witness(&mu, &nu).unwrap();
            // bounded by one
            for f in f_mu.iter().chain(&f_nu) {
                assert!(f.abs() <= 1.0 + 1e-9, "|f| = {}", f.abs());
            }
            // 1-Lipschitz across every atom pair
            let all: Vec<(&[f64], f64)> = mu
                .atoms()
                .iter()
                .map(|a| a.as_slice())
                .zip(f_mu.iter().copied())
                .chain(nu.atoms().iter().map(|a| a.as_slice()).zip(f_nu.iter().copied()))
                .collect();
            for (a, fa) in &all {
                for (b, fb) in &all {
                    let d = mu.distance(a, b);
                    assert!((fa - fb).abs() <= d.min(2.0) + 1e-9);
                }
            }
            // attains the transport value
            let attained = f_mu.iter().sum::<f64>() / f_mu.len() as f64
                - f_nu.iter().sum::<f64>() / f_nu.len() as f64;
            assert_relative_eq!(attained, value, epsilon = 1e-9);
        }
    }

    #[test]
    fn metric_axioms_on_random_triples() {
        let mut rng = mc::rng_from_seed(23);
        use rand::Rng as _;
        for _ in 0..50 {
            let gen = |rng: &mut mc::Rng| {
                let n = rng.gen_range(2..=5);
                points(&(0..n).map(|_| rng.gen_range(-4.0..4.0)).collect::<Vec<_>>())
            };
            let (a, b, c) = (gen(&mut rng), gen(&mut rng), gen(&mut rng));
            let dab = empirical_dbl(&a, &b).unwrap();
            let dba = empirical_dbl(&b, &a).unwrap();
            let dac = empirical_dbl(&a, &c).unwrap();
            let dcb = empirical_dbl(&c, &b).unwrap();
            assert_relative_eq!(dab, dba, epsilon = 1e-9);
            assert!(dab <= dac + dcb + 1e-9, "triangle: {dab} > {dac} + {dcb}");
            assert!((0.0..=2.0 + 1e-12).contains(&dab));
        }
    }

    #[test]
    fn unequal_sample_counts_are_supported() {
        let mu = points(&[0.0, 1.0]);
        let nu = points(&[0.0, 1.0, 0.5]);
        let solver = empirical_dbl(&mu, &nu).unwrap();
        let plans = oracle::plan_enumeration(&mu, &nu).unwrap();
        assert_relative_eq!(solver, plans, epsilon = 1e-9);
    }

    #[test]
    fn sliced_is_a_lower_bound() {
        let mut rng = mc::rng_from_seed(91);
        use rand::Rng as _;
        for trial in 0..50 {
            let n = rng.gen_range(2..=8);
            let gen = |rng: &mut mc::Rng| {
                EmpiricalMeasure::from_points(
                    (0..n)
                        .map(|_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect())
                        .collect(),
                    2,
                )
                .unwrap()
            };
            let mu = gen(&mut rng);
            let nu = gen(&mut rng);
            let full = empirical_dbl(&mu, &nu).unwrap();
            let sliced = sliced_dbl_lower(&mu, &nu, 8, 1000 + trial).unwrap();
            assert!(
                sliced <= full + 1e-9,
                "trial {trial}: sliced {sliced} exceeds full {full}"
            );
        }
    }

    #[test]
    fn sliced_identical_samples_zero_and_monotone_in_k() {
        let mu = points(&[0.0, 1.0, 2.0]);
        assert_relative_eq!(sliced_dbl_lower(&mu, &mu, 5, 3).unwrap(), 0.0, epsilon = 1e-12);

        let nu = points(&[0.3, 1.4, 2.2]);
        // nondecreasing in k along a common direction stream
        let k1 = sliced_dbl_lower(&mu, &nu, 2, 11).unwrap();
        let k2 = sliced_dbl_lower(&mu, &nu, 16, 11).unwrap();
        assert!(k2 >= k1 - 1e-12);
    }

    #[test]
    fn selfconsistency_shrinks_with_sample_size() {
        let sampler = |rng: &mut mc::Rng| crate::regularization::brownian_path(1.0, 32, rng);
        let d50 = dbl_selfconsistency(sampler, 50, 5).unwrap();
        let d200 = dbl_selfconsistency(sampler, 200, 7).unwrap();
        assert!(d200 <= d50 * 1.25, "noise floor grew: {d50} -> {d200}");

        let det = |_rng: &mut mc::Rng| PathVector::from_fn(1.0, 8, |t| t).unwrap();
        assert_relative_eq!(dbl_selfconsistency(det, 20, 1).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let mu = points(&[0.0]);
        let nu = points2d(&[(0.0, 0.0)]);
        assert!(matches!(empirical_dbl(&mu, &nu), Err(Error::GridMismatch)));
    }
}
