//! The Gaussian-subordinated Hermite model: Karhunen-Loève eigensystem of
//! Brownian covariance, the block-averaged chaos kernel, and the end-to-end
//! rate experiment.
//!
//! The model in chaos order `p` with `n` blocks and `M` retained modes is
//! `F_n = (p! n)^{-1/2} Σ_{k≤n} Σ_{m≤M} √λ_m φ_m H_p(ξ_{k,m})`, whose
//! covariance matches Brownian motion exactly while its distance to it
//! decays at a certified polynomial rate in `n`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::{dbl_contraction_rate_bound, BoundCertificate, SdEstimate};
use crate::chaos::{hermite, GaussianDraw, NormMode};
use crate::flatmetric::{dbl_selfconsistency, empirical_dbl, sliced_dbl_lower, EmpiricalMeasure};
use crate::gamma::{covariance_tensor, gamma_deviation_bound, CovTensor};
use crate::kernels::{
    contract_vector, factorial, projective_norm_upper, BasisIndex, KernelTerm, PathVector,
    ScalarKernel, VectorKernel,
};
use crate::mc::{self, Rng};
use crate::{Error, Result};

/// Karhunen-Loève system of Brownian covariance on `[0, T]`:
/// `λ_m = T²/((m-½)²π²)` with eigenfunctions
/// `φ_m(t) = √(2/T) sin((m-½)πt/T)` sampled on the grid. The exact sup-norm
/// `√(2/T)` is attached to each eigenfunction since grid maxima miss the
/// interior peaks.
#[derive(Debug, Clone)]
pub struct KlSystem {
    t_max: f64,
    modes: usize,
    grid_steps: usize,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Arc<PathVector>>,
}

pub fn kl_system(t_max: f64, modes: usize, grid_steps: usize) -> Result<KlSystem> {
    if modes == 0 || grid_steps == 0 {
        return Err(Error::invalid("need at least one mode and one grid step".to_string()));
    }
    if !(t_max > 0.0) {
        return Err(Error::invalid(format!("T = {t_max} must be positive")));
    }
    let pi = std::f64::consts::PI;
    let sup = (2.0 / t_max).sqrt();
    let mut eigenvalues = Vec::with_capacity(modes);
    let mut eigenfunctions = Vec::with_capacity(modes);
    for m in 1..=modes {
        let freq = (m as f64 - 0.5) * pi / t_max;
        eigenvalues.push(t_max * t_max / ((m as f64 - 0.5) * (m as f64 - 0.5) * pi * pi));
        let phi = PathVector::from_fn(t_max, grid_steps, |t| sup * (freq * t).sin())?
            .with_sup_norm_hint(sup);
        eigenfunctions.push(Arc::new(phi));
    }
    Ok(KlSystem { t_max, modes, grid_steps, eigenvalues, eigenfunctions })
}

impl KlSystem {
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn grid_steps(&self) -> usize {
        self.grid_steps
    }

    /// `λ_m`, 1-based.
    pub fn eigenvalue(&self, m: usize) -> f64 {
        self.eigenvalues[m - 1]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `φ_m` on the grid, 1-based.
    pub fn eigenfunction(&self, m: usize) -> &Arc<PathVector> {
        &self.eigenfunctions[m - 1]
    }

    /// `Σ_{m≤M} λ_m`, always below the exact total `T²/2`.
    pub fn partial_mass(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.t_max * self.t_max / 2.0
    }

    /// Fraction of the KL mass lost to truncation.
    pub fn tail_fraction(&self) -> f64 {
        1.0 - self.partial_mass() / self.total_mass()
    }
}

/// Parameters of one Hermite-model instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HermiteModelConfig {
    /// Chaos order `p`.
    pub p: usize,
    /// Number of averaged blocks `n`.
    pub n_blocks: usize,
    /// Retained KL modes `M`.
    pub modes: usize,
    pub t_max: f64,
    pub grid_steps: usize,
    /// Fold the exact KL tail mass into the last mode so global identities
    /// (total variance, contraction bounds) hold to machine precision.
    pub lump_tail: bool,
    /// Largest admissible truncated mass fraction when `lump_tail` is off.
    pub tail_tol: f64,
}

impl HermiteModelConfig {
    pub fn new(p: usize, n_blocks: usize) -> Self {
        HermiteModelConfig {
            p,
            n_blocks,
            modes: 160,
            t_max: 1.0,
            grid_steps: 48,
            lump_tail: true,
            tail_tol: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n_blocks == 0 || self.modes == 0 || self.grid_steps == 0 {
            return Err(Error::invalid("p, n, M, grid must all be positive".to_string()));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::invalid(format!("T = {} must be positive", self.t_max)));
        }
        (self.n_blocks as u64)
            .checked_mul(self.modes as u64)
            .filter(|&v| v <= u32::MAX as u64)
            .ok_or_else(|| Error::invalid("basis size n*M overflows the index space".to_string()))?;
        Ok(())
    }
}

/// A validated Hermite-model instance with its KL system and block weights.
#[derive(Debug, Clone)]
pub struct HermiteModel {
    cfg: HermiteModelConfig,
    kl: KlSystem,
    /// Effective eigenvalues (tail-lumped when configured).
    lambdas: Vec<f64>,
}

impl HermiteModel {
    pub fn new(cfg: HermiteModelConfig) -> Result<Self> {
        cfg.validate()?;
        let kl = kl_system(cfg.t_max, cfg.modes, cfg.grid_steps)?;
        let mut lambdas = kl.eigenvalues().to_vec();
        if cfg.lump_tail {
            let tail = kl.total_mass() - kl.partial_mass();
            *lambdas.last_mut().expect("modes >= 1") += tail;
        } else if kl.tail_fraction() > cfg.tail_tol {
            return Err(Error::invalid(format!(
                "KL tail fraction {:.2e} exceeds tolerance {:.2e}; raise M or enable lump_tail",
                kl.tail_fraction(),
                cfg.tail_tol
            )));
        }
        Ok(HermiteModel { cfg, kl, lambdas })
    }

    pub fn config(&self) -> &HermiteModelConfig {
        &self.cfg
    }

    pub fn kl(&self) -> &KlSystem {
        &self.kl
    }

    /// Basis truncation `n·M` of the flat index space.
    pub fn truncation(&self) -> u32 {
        (self.cfg.n_blocks * self.cfg.modes) as u32
    }

    /// Per-term weight `√(λ_m / (p! n))`.
    fn weight(&self, m: usize) -> f64 {
        (self.lambdas[m - 1] / (factorial(self.cfg.p) * self.cfg.n_blocks as f64)).sqrt()
    }

    /// The kernel as `n·M` rank-one terms `weight · h_{k,m}^{⊗p} ⊗ φ_m`.
    pub fn kernel(&self) -> Result<VectorKernel> {
        let modes = self.cfg.modes as u32;
        let mut terms = Vec::with_capacity(self.cfg.n_blocks * self.cfg.modes);
        for k in 1..=self.cfg.n_blocks as u32 {
            for m in 1..=self.cfg.modes {
                let flat = BasisIndex::from_double(k, m as u32, modes)?;
                terms.push(KernelTerm {
                    scalar: ScalarKernel::rank_one(flat, self.cfg.p, self.truncation(), self.weight(m))?,
                    path: Arc::clone(self.kl.eigenfunction(m)),
                });
            }
        }
        VectorKernel::new(
            self.cfg.p,
            self.truncation(),
            self.cfg.t_max,
            1,
            self.cfg.grid_steps,
            terms,
        )
    }

    /// The same kernel with the block sum folded into one term per mode,
    /// `(Σ_k weight · h_{k,m}^{⊗p}) ⊗ φ_m`. Identical as a tensor, `M`
    /// instead of `n·M` terms; this is the representation used at scale.
    pub fn kernel_grouped(&self) -> Result<VectorKernel> {
        let modes = self.cfg.modes as u32;
        let mut terms = Vec::with_capacity(self.cfg.modes);
        for m in 1..=self.cfg.modes {
            let w = self.weight(m);
            let entries = (1..=self.cfg.n_blocks as u32).map(|k| {
                let flat = BasisIndex::from_double(k, m as u32, modes)
                    .expect("validated in config");
                (vec![flat.0; self.cfg.p], w)
            });
            terms.push(KernelTerm {
                scalar: ScalarKernel::from_sym_entries(self.cfg.p, self.truncation(), entries)?,
                path: Arc::clone(self.kl.eigenfunction(m)),
            });
        }
        VectorKernel::new(
            self.cfg.p,
            self.truncation(),
            self.cfg.t_max,
            1,
            self.cfg.grid_steps,
            terms,
        )
    }

    /// Samples `F_n` directly through `ξ_{k,m} = H_p(ζ_{k,m})`, consuming
    /// the draw in flat-index order. Agrees with sampling the kernel through
    /// the generic chaos machinery on the same draw.
    pub fn sample_with_draw(&self, draw: &GaussianDraw) -> Result<PathVector> {
        if draw.len() < self.truncation() as usize {
            return Err(Error::invalid(format!(
                "draw of length {} shorter than basis size {}",
                draw.len(),
                self.truncation()
            )));
        }
        let modes = self.cfg.modes as u32;
        let g = self.cfg.grid_steps;
        let mut mode_sum = vec![0.0f64; self.cfg.modes];
        for k in 1..=self.cfg.n_blocks as u32 {
            for m in 1..=modes {
                let flat = BasisIndex::from_double(k, m, modes)?;
                mode_sum[(m - 1) as usize] += hermite(self.cfg.p, draw.value(flat));
            }
        }
        let mut values = vec![0.0f64; g + 1];
        for m in 1..=self.cfg.modes {
            let a = self.weight(m) * mode_sum[m - 1];
            if a == 0.0 {
                continue;
            }
            let phi = self.kl.eigenfunction(m).values();
            for (v, p) in values.iter_mut().zip(phi) {
                *v += a * p;
            }
        }
        PathVector::new(self.cfg.t_max, 1, values)
    }

    pub fn sample(&self, rng: &mut Rng) -> PathVector {
        let draw = GaussianDraw::sample(self.truncation(), rng);
        self.sample_with_draw(&draw).expect("draw length matches truncation")
    }

    /// Truncated KL Brownian motion with the same effective eigenvalues,
    /// so its covariance matches the model's exactly.
    pub fn sample_brownian(&self, rng: &mut Rng) -> PathVector {
        use rand::Rng as _;
        let g = self.cfg.grid_steps;
        let mut values = vec![0.0f64; g + 1];
        for m in 1..=self.cfg.modes {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let a = self.lambdas[m - 1].sqrt() * z;
            let phi = self.kl.eigenfunction(m).values();
            for (v, p) in values.iter_mut().zip(phi) {
                *v += a * p;
            }
        }
        PathVector::new(self.cfg.t_max, 1, values).expect("finite KL sum")
    }

    /// Covariance of the reference Brownian motion on the grid, built from
    /// the KL sum rather than from the kernel.
    pub fn brownian_cov(&self) -> CovTensor {
        let g = self.cfg.grid_steps;
        let mut matrix = nalgebra::DMatrix::zeros(g + 1, g + 1);
        for m in 1..=self.cfg.modes {
            let phi = self.kl.eigenfunction(m).values();
            let lam = self.lambdas[m - 1];
            for i in 0..=g {
                for j in 0..=g {
                    matrix[(i, j)] += lam * phi[i] * phi[j];
                }
            }
        }
        CovTensor {
            tensor: crate::kernels::VectorTensorKernel::empty(
                0,
                self.truncation(),
                self.cfg.t_max,
                1,
                g,
            ),
            matrix,
        }
    }
}

/// Computed vs stated contraction bound for one rank.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContractionCheck {
    pub r: usize,
    /// `projective_norm_upper(f_n ⊗̃_r f_n)²`.
    pub computed: f64,
    /// `T / (n (p!)²)`.
    pub stated: f64,
}

/// Squared nuclear contraction bounds for every `r = 1..p-1`, against the
/// stated `T/(n (p!)²)`. For this kernel family the two agree (the
/// eigenfunctions share one sup-norm), with equality exact at `T = 1`.
pub fn contraction_bound_check(model: &HermiteModel) -> Result<Vec<ContractionCheck>> {
    let p = model.cfg.p;
    if p < 2 {
        return Err(Error::invalid("contraction check needs p >= 2".to_string()));
    }
    let f = model.kernel_grouped()?;
    let stated =
        model.cfg.t_max / (model.cfg.n_blocks as f64 * factorial(p) * factorial(p));
    (1..p)
        .map(|r| {
            let norm = projective_norm_upper(&contract_vector(&f, &f, r)?);
            Ok(ContractionCheck { r, computed: norm * norm, stated })
        })
        .collect()
}

/// Knobs of the rate experiment that are not part of the model itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateOptions {
    /// Sample paths per side for the empirical distance.
    pub samples: usize,
    /// Random directions for the sliced bound (used above the exact-LP cutoff).
    pub directions: usize,
    /// Atom count above which empirical distances switch to sliced lower bounds.
    pub exact_cutoff: usize,
    pub seed: u64,
    /// Hölder order of the kernel driving the certificate exponent.
    pub beta: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions { samples: 160, directions: 12, exact_cutoff: 500, seed: 7, beta: 0.5 }
    }
}

/// One row of the rate table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub deviation_bound: f64,
    pub certificate_total: f64,
    pub empirical_dbl: f64,
    pub noise_floor: f64,
    pub seed: u64,
}

/// Output of the rate experiment: per-`n` rows, their log-log slopes, and
/// the certificates backing the bound column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub deviation_slope: f64,
    pub certificate_slope: f64,
    /// Whether the empirical column is an exact LP value or a sliced lower bound.
    pub empirical_method: String,
    /// Flat index convention of the double-indexed basis.
    pub index_convention: String,
    pub certificates: Vec<BoundCertificate>,
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Runs the full rate experiment over a list of block counts: deviation
/// bound, contraction-rate certificate, empirical flat metric against the
/// truncated Brownian reference, and the same-law noise floor.
pub fn rate_experiment(
    base: &HermiteModelConfig,
    n_list: &[usize],
    opts: &RateOptions,
    s_d: &SdEstimate,
) -> Result<RateTable> {
    if n_list.is_empty() {
        return Err(Error::Empty("n_list"));
    }
    let run_cell = |(cell, &n): (usize, &usize)| -> Result<(RateRow, BoundCertificate)> {
        let cfg = HermiteModelConfig { n_blocks: n, ..base.clone() };
        let model = HermiteModel::new(cfg)?;
        let f = model.kernel_grouped()?;
        let deviation = gamma_deviation_bound(&f, &f, NormMode::Hilbert)?.total;
        let r_f = covariance_tensor(&f, &f)?;
        let r_z = model.brownian_cov();
        let cert = dbl_contraction_rate_bound(&f, &r_f, &r_z, opts.beta, s_d)?;

        let seed = mc::derive_seed(opts.seed, cell as u64);
        let mut rng = mc::rng_from_seed(seed);
        let fs: Vec<PathVector> = (0..opts.samples).map(|_| model.sample(&mut rng)).collect();
        let zs: Vec<PathVector> =
            (0..opts.samples).map(|_| model.sample_brownian(&mut rng)).collect();
        let mu = EmpiricalMeasure::from_paths(&fs)?;
        let nu = EmpiricalMeasure::from_paths(&zs)?;
        let empirical = if opts.samples <= opts.exact_cutoff {
            empirical_dbl(&mu, &nu)?
        } else {
            sliced_dbl_lower(&mu, &nu, opts.directions, mc::derive_seed(seed, 1))?
        };
        let noise_floor = dbl_selfconsistency(
            |rng| model.sample_brownian(rng),
            opts.samples,
            mc::derive_seed(seed, 2),
        )?;
        Ok((
            RateRow {
                n,
                deviation_bound: deviation,
                certificate_total: cert.total,
                empirical_dbl: empirical,
                noise_floor,
                seed,
            },
            cert,
        ))
    };

    #[cfg(feature = "parallel")]
    let cells: Vec<Result<(RateRow, BoundCertificate)>> = {
        use rayon::prelude::*;
        n_list.par_iter().enumerate().map(run_cell).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<Result<(RateRow, BoundCertificate)>> =
        n_list.iter().enumerate().map(run_cell).collect();

    let mut rows = Vec::new();
    let mut certificates = Vec::new();
    for cell in cells {
        let (row, cert) = cell?;
        rows.push(row);
        certificates.push(cert);
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let deviation_slope =
        log_log_slope(&ns, &rows.iter().map(|r| r.deviation_bound).collect::<Vec<_>>());
    let certificate_slope =
        log_log_slope(&ns, &rows.iter().map(|r| r.certificate_total).collect::<Vec<_>>());
    Ok(RateTable {
        rows,
        deviation_slope,
        certificate_slope,
        empirical_method: if opts.samples <= opts.exact_cutoff {
            "exact_lp".to_string()
        } else {
            "sliced_lower_bound".to_string()
        },
        index_convention: "flat = (k-1)*M + m, 1-based".to_string(),
        certificates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::sample_vector_integral;
    use approx::assert_relative_eq;

    #[test]
    fn kl_eigenvalues_and_sups() {
        let kl = kl_system(1.0, 1000, 64).unwrap();
        assert_relative_eq!(kl.eigenvalue(1), 4.0 / std::f64::consts::PI.powi(2), epsilon = 1e-12);
        // partial sums approach T²/2 from below, within 0.1% at M = 1000
        assert!(kl.partial_mass() < kl.total_mass());
        assert!(kl.tail_fraction() < 1e-3, "tail {}", kl.tail_fraction());
        for m in [1, 2, 17, 1000] {
            assert_relative_eq!(kl.eigenfunction(m).sup_norm(), 2.0f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn kernel_term_count_and_weights() {
        let cfg = HermiteModelConfig {
            modes: 4,
            grid_steps: 8,
            ..HermiteModelConfig::new(2, 3)
        };
        let model = HermiteModel::new(cfg).unwrap();
        let f = model.kernel().unwrap();
        assert_eq!(f.terms().len(), 12); // n * M
        let g = model.kernel_grouped().unwrap();
        assert_eq!(g.terms().len(), 4); // M
        // grouped and expanded forms are the same tensor
        assert_relative_eq!(
            f.merge_terms().nuclear_bound(),
            g.nuclear_bound(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn direct_and_generic_sampling_agree() {
        let cfg = HermiteModelConfig {
            modes: 6,
            grid_steps: 16,
            ..HermiteModelConfig::new(3, 4)
        };
        let model = HermiteModel::new(cfg).unwrap();
        let f = model.kernel().unwrap();
        let draw = GaussianDraw::from_seed(model.truncation(), 2211);
        let direct = model.sample_with_draw(&draw).unwrap();
        let generic = sample_vector_integral(&f, &draw).unwrap();
        assert!(direct.sub(&generic).unwrap().sup_norm() < 1e-10);
    }

    #[test]
    fn first_order_model_is_truncated_brownian_motion() {
        // p = 1: F_1 = Σ √λ φ ζ, the KL expansion itself; empirical distance
        // to the Brownian sampler sits at the self-consistency noise floor
        let cfg = HermiteModelConfig {
            modes: 64,
            grid_steps: 32,
            ..HermiteModelConfig::new(1, 1)
        };
        let model = HermiteModel::new(cfg).unwrap();
        let n = 120;
        let mut rng = mc::rng_from_seed(5);
        let fs: Vec<PathVector> = (0..n).map(|_| model.sample(&mut rng)).collect();
        let zs: Vec<PathVector> = (0..n).map(|_| model.sample_brownian(&mut rng)).collect();
        let dist = empirical_dbl(
            &EmpiricalMeasure::from_paths(&fs).unwrap(),
            &EmpiricalMeasure::from_paths(&zs).unwrap(),
        )
        .unwrap();
        let floor = dbl_selfconsistency(|rng| model.sample_brownian(rng), n, 17).unwrap();
        assert!(
            dist <= 1.6 * floor + 0.02,
            "distance {dist} well above noise floor {floor}"
        );
    }

    #[test]
    fn empirical_covariance_matches_brownian() {
        let cfg = HermiteModelConfig {
            modes: 128,
            grid_steps: 8,
            ..HermiteModelConfig::new(2, 10)
        };
        let model = HermiteModel::new(cfg).unwrap();
        let g = model.config().grid_steps;
        let t_max = model.config().t_max;
        let paths = mc::sample_map(60_000u64, 99, |rng| model.sample(rng));
        let nodes = g + 1;
        let mut mean = vec![0.0f64; nodes];
        for p in &paths {
            for i in 0..nodes {
                mean[i] += p.values()[i];
            }
        }
        for v in mean.iter_mut() {
            *v /= paths.len() as f64;
        }
        for (i, j) in [(2, 2), (2, 6), (8, 8), (1, 8)] {
            let samples: Vec<f64> = paths
                .iter()
                .map(|p| (p.values()[i] - mean[i]) * (p.values()[j] - mean[j]))
                .collect();
            let est = mc::McEstimate::from_samples(&samples);
            let (s, t) = (i as f64 * t_max / g as f64, j as f64 * t_max / g as f64);
            assert!(
                (est.mean - s.min(t)).abs() <= 3.0 * est.std_error + 2e-3,
                "cov({i},{j}) = {} +- {} vs {}",
                est.mean,
                est.std_error,
                s.min(t)
            );
        }
    }

    #[test]
    fn contraction_bounds_meet_stated_value() {
        for (p, n) in [(2usize, 10usize), (3, 10)] {
            let cfg = HermiteModelConfig {
                modes: 96,
                grid_steps: 16,
                ..HermiteModelConfig::new(p, n)
            };
            let model = HermiteModel::new(cfg).unwrap();
            for check in contraction_bound_check(&model).unwrap() {
                assert!(
                    (check.computed - check.stated).abs() <= 1e-12,
                    "p={p} n={n} r={}: {} vs {}",
                    check.r,
                    check.computed,
                    check.stated
                );
            }
        }
    }

    #[test]
    fn contraction_bound_halves_when_n_doubles() {
        let mk = |n| {
            let cfg = HermiteModelConfig {
                modes: 32,
                grid_steps: 8,
                ..HermiteModelConfig::new(2, n)
            };
            contraction_bound_check(&HermiteModel::new(cfg).unwrap()).unwrap()[0].computed
        };
        assert_relative_eq!(mk(10), 2.0 * mk(20), max_relative = 1e-10);
    }

    #[test]
    fn deviation_bound_closed_form_small_n() {
        // p = 2, T = 1: bound = (1/2) a(2,2,1) √2 √(T/(4n)) = √2 / √n
        for n in [4usize, 25, 100] {
            let cfg = HermiteModelConfig {
                modes: 64,
                grid_steps: 12,
                ..HermiteModelConfig::new(2, n)
            };
            let model = HermiteModel::new(cfg).unwrap();
            let f = model.kernel_grouped().unwrap();
            let b = gamma_deviation_bound(&f, &f, NormMode::Hilbert).unwrap();
            assert_relative_eq!(
                b.total,
                2.0f64.sqrt() / (n as f64).sqrt(),
                max_relative = 1e-10
            );
        }
    }
}
