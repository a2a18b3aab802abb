//! The product invariant measure: single-site density proportional to
//! `exp(-V_beta(u) + lambda.u)`, its partition function, a sampler, and checks of
//! the measure-level identities.

mod quadrature;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::potential::{check_assumptions, PotentialSpec, ProbeGrid};
use crate::seed::rng_from;
use crate::stats::Estimate;

pub use quadrature::{gauss_legendre, GibbsQuadrature};

pub const BURN_IN: usize = 1000;
pub const THIN: usize = 5;

/// Parameters of `nu_{beta, lambda}`. `target` is the already rescaled `V_beta`.
#[derive(Clone, Debug)]
pub struct MeasureParams {
    target: PotentialSpec,
    pub beta: f64,
    pub lambda: Vec<f64>,
    pub proposal_scale: f64,
}

impl MeasureParams {
    /// `potential` is the unscaled `V`.
    pub fn new(potential: &PotentialSpec, beta: f64, lambda: &[f64]) -> Result<Self> {
        if lambda.len() != potential.dim() {
            return Err(invalid(format!("density has {} entries, potential has dimension {}", lambda.len(), potential.dim())));
        }
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(invalid("density must be finite"));
        }
        Ok(Self {
            target: potential.unscaled().rescale(beta)?,
            beta,
            lambda: lambda.to_vec(),
            proposal_scale: 1.0,
        })
    }

    /// `beta = n^{-1/2}`.
    pub fn for_lattice(potential: &PotentialSpec, n: usize, lambda: &[f64]) -> Result<Self> {
        Self::new(potential, 1.0 / (n as f64).sqrt(), lambda)
    }

    pub fn with_proposal_scale(mut self, s: f64) -> Self {
        self.proposal_scale = s;
        self
    }

    pub fn target(&self) -> &PotentialSpec {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Unnormalized log density.
    pub fn log_density(&self, u: &[f64]) -> f64 {
        let lin: f64 = u.iter().zip(&self.lambda).map(|(a, b)| a * b).sum();
        lin - self.target.value(u)
    }

    /// Tensor quadrature of the single-site density (`d <= 2`).
    pub fn quadrature(&self) -> Result<GibbsQuadrature> {
        GibbsQuadrature::build(&self.target, &self.lambda, 1e-12)
    }
}

/// Partition function estimate.
#[derive(Clone, Debug, Serialize)]
pub struct PartitionEstimate {
    pub z: f64,
    pub se: f64,
    pub method: &'static str,
}

/// `Z = int exp(-V_beta(u) + lambda.u) du` by quadrature when `d <= 2`, otherwise
/// by importance sampling from `N(lambda, I)` with `samples` draws.
pub fn partition_function(params: &MeasureParams) -> Result<PartitionEstimate> {
    partition_function_with(params, 200_000, 0)
}

pub fn partition_function_with(params: &MeasureParams, samples: usize, seed: u64) -> Result<PartitionEstimate> {
    let d = params.dim();
    if d <= 2 {
        let q = params.quadrature()?;
        return Ok(PartitionEstimate {
            z: q.z,
            se: q.z_error,
            method: "gauss_legendre",
        });
    }
    let mut rng = rng_from(seed);
    let log_norm = 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln();
    let mut w = Vec::with_capacity(samples);
    let mut u = vec![0.0; d];
    for _ in 0..samples {
        let mut q = 0.0;
        for (ui, li) in u.iter_mut().zip(&params.lambda) {
            let z: f64 = rng.sample(StandardNormal);
            *ui = li + z;
            q += 0.5 * z * z;
        }
        w.push((params.log_density(&u) + q + log_norm).exp());
    }
    let e = Estimate::from_samples(&w);
    if !(e.mean.is_finite() && e.se.is_finite()) || e.se > e.mean {
        return Err(Error::IllDefinedMeasure {
            beta: params.beta,
            detail: format!("importance weights have no usable variance (mean {}, se {})", e.mean, e.se),
        });
    }
    Ok(PartitionEstimate {
        z: e.mean,
        se: e.se,
        method: "importance_sampling",
    })
}

/// Outcome of a scan for the largest inverse temperature with a finite `Z`.
#[derive(Clone, Debug, Serialize)]
pub struct SafeBetaScan {
    pub betas: Vec<f64>,
    pub finite: Vec<bool>,
    /// Largest `beta` such that it and every smaller scanned value gave a finite `Z`.
    pub largest_safe: Option<f64>,
}

pub fn safe_beta_scan(potential: &PotentialSpec, lambda: &[f64], betas: &[f64]) -> Result<SafeBetaScan> {
    let mut sorted = betas.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut finite = Vec::with_capacity(sorted.len());
    let mut largest = None;
    let mut broken = false;
    for &b in &sorted {
        let ok = partition_function(&MeasureParams::new(potential, b, lambda)?).is_ok();
        finite.push(ok);
        if ok && !broken {
            largest = Some(b);
        } else {
            broken = true;
        }
    }
    Ok(SafeBetaScan {
        betas: sorted,
        finite,
        largest_safe: largest,
    })
}

/// `m` single-site draws, row-major `m x d`.
#[derive(Clone, Debug)]
pub struct SiteSampleBatch {
    pub d: usize,
    pub samples: Vec<f64>,
    pub acceptance_rate: f64,
    pub seed: u64,
    pub chains: usize,
    /// False when the convexity audit failed; the batch is then "measure unverified".
    pub measure_verified: bool,
    pub potential: PotentialSpec,
    pub lambda: Vec<f64>,
}

impl SiteSampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn site(&self, k: usize) -> &[f64] {
        &self.samples[k * self.d..(k + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.d)
    }

    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.iter().map(|u| u[i]).collect()
    }
}

/// Sampler knobs; defaults are burn-in 1000 and thinning 5.
#[derive(Clone, Copy, Debug)]
pub struct SamplerOptions {
    pub burn_in: usize,
    pub thin: usize,
    /// Number of independent chains; `None` picks one per 1024 draws (at most 64),
    /// which depends only on `m` so results do not depend on the thread count.
    pub chains: Option<usize>,
    /// Skip the convexity audit (used when sampling many small batches of the same measure).
    pub verified: Option<bool>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            burn_in: BURN_IN,
            thin: THIN,
            chains: None,
            verified: None,
        }
    }
}

/// Independence Metropolis draws from the single-site marginal.
pub fn sample_sites(params: &MeasureParams, m: usize, seed: u64) -> Result<SiteSampleBatch> {
    sample_sites_with(params, m, seed, SamplerOptions::default())
}

pub fn sample_sites_with(params: &MeasureParams, m: usize, seed: u64, opts: SamplerOptions) -> Result<SiteSampleBatch> {
    let d = params.dim();
    let chains = opts.chains.unwrap_or((m / 1024).clamp(1, 64)).max(1).min(m.max(1));
    let verified = match opts.verified {
        Some(v) => v,
        None => {
            let grid = ProbeGrid {
                points_per_axis: if d == 1 { 41 } else { 11 },
                random_probes: 0,
                ..ProbeGrid::default()
            };
            check_assumptions(&params.target.unscaled(), &grid).convex()
        }
    };
    let run_chain = |c: usize| -> (Vec<f64>, usize, usize) {
        let count = m / chains + usize::from(c < m % chains);
        let mut rng = rng_from(crate::seed!(seed, "chain", c));
        let s = params.proposal_scale;
        let log_q = |u: &[f64]| -> f64 {
            -0.5 * u.iter().zip(&params.lambda).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (s * s)
        };
        let mut x = params.lambda.clone();
        let mut lx = params.log_density(&x) - log_q(&x);
        let mut y = vec![0.0; d];
        let mut out = Vec::with_capacity(count * d);
        let (mut accepted, mut proposed) = (0usize, 0usize);
        let total = opts.burn_in + count * opts.thin.max(1);
        for step in 0..total {
            for (yi, li) in y.iter_mut().zip(&params.lambda) {
                let z: f64 = rng.sample(StandardNormal);
                *yi = li + s * z;
            }
            let ly = params.log_density(&y) - log_q(&y);
            let u: f64 = rng.random();
            proposed += 1;
            if ly.is_finite() && (ly >= lx || u.ln() < ly - lx) {
                x.copy_from_slice(&y);
                lx = ly;
                accepted += 1;
            }
            if step >= opts.burn_in && (step - opts.burn_in) % opts.thin.max(1) == opts.thin.max(1) - 1 {
                out.extend_from_slice(&x);
            }
        }
        (out, accepted, proposed)
    };
    let parts: Vec<(Vec<f64>, usize, usize)> = if chains > 1 {
        (0..chains).into_par_iter().map(run_chain).collect()
    } else {
        vec![run_chain(0)]
    };
    let mut samples = Vec::with_capacity(m * d);
    let (mut acc, mut prop) = (0usize, 0usize);
    for (s, a, p) in parts {
        samples.extend(s);
        acc += a;
        prop += p;
    }
    let rate = if prop == 0 { 1.0 } else { acc as f64 / prop as f64 };
    if rate < 0.01 {
        return Err(Error::LowAcceptance { rate });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain { point: samples.iter().copied().filter(|v| !v.is_finite()).take(1).collect() });
    }
    Ok(SiteSampleBatch {
        d,
        samples,
        acceptance_rate: rate,
        seed,
        chains,
        measure_verified: verified,
        potential: params.target.clone(),
        lambda: params.lambda.clone(),
    })
}

/// `E[exp(gamma |u|)]` from a batch; requires `gamma <= 2 gamma_V`.
pub fn exp_moment_check(batch: &SiteSampleBatch, gamma: f64) -> Result<Estimate> {
    if gamma < 0.0 || gamma > 2.0 * batch.potential.gamma_v() {
        return Err(invalid(format!("gamma {gamma} outside [0, 2 gamma_V]")));
    }
    let xs: Vec<f64> = batch
        .iter()
        .map(|u| (gamma * u.iter().map(|v| v * v).sum::<f64>().sqrt()).exp())
        .collect();
    Ok(Estimate::from_samples(&xs))
}

#[derive(Clone, Debug, Serialize)]
pub struct CoordinateCheck {
    pub coordinate: usize,
    pub estimate: Estimate,
    pub target: f64,
    pub deviation: f64,
    pub pass: bool,
}

/// `|E[W^i] - lambda^i|` per coordinate with `W = grad V_beta`.
pub fn w_mean_check(batch: &SiteSampleBatch) -> Vec<CoordinateCheck> {
    let d = batch.d;
    let mut w = vec![0.0; batch.samples.len()];
    batch.potential.gradient_sites(&batch.samples, &mut w);
    (0..d)
        .map(|i| {
            let xs: Vec<f64> = w.chunks_exact(d).map(|g| g[i]).collect();
            let e = Estimate::from_samples(&xs);
            let dev = (e.mean - batch.lambda[i]).abs();
            CoordinateCheck {
                coordinate: i,
                estimate: e,
                target: batch.lambda[i],
                deviation: dev,
                pass: dev <= 3.0 * e.se,
            }
        })
        .collect()
}

/// Single-site functionals with known gradients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SiteFunctional {
    One,
    Linear(usize),
    Square(usize),
    Product(usize, usize),
    /// `exp(u^i / 2)`.
    HalfExp(usize),
}

impl SiteFunctional {
    /// `{1, u^i, (u^i)^2, u^i u^j, e^{u^i/2}}` with `j = i + 1 mod d`.
    pub fn library(d: usize, i: usize) -> [SiteFunctional; 5] {
        [
            SiteFunctional::One,
            SiteFunctional::Linear(i),
            SiteFunctional::Square(i),
            SiteFunctional::Product(i, (i + 1) % d),
            SiteFunctional::HalfExp(i),
        ]
    }

    pub fn name(&self) -> String {
        match *self {
            SiteFunctional::One => "1".into(),
            SiteFunctional::Linear(i) => format!("u{i}"),
            SiteFunctional::Square(i) => format!("u{i}^2"),
            SiteFunctional::Product(i, j) => format!("u{i}*u{j}"),
            SiteFunctional::HalfExp(i) => format!("exp(u{i}/2)"),
        }
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        match *self {
            SiteFunctional::One => 1.0,
            SiteFunctional::Linear(i) => u[i],
            SiteFunctional::Square(i) => u[i] * u[i],
            SiteFunctional::Product(i, j) => u[i] * u[j],
            SiteFunctional::HalfExp(i) => (0.5 * u[i]).exp(),
        }
    }

    /// `d F / d u^k`.
    pub fn partial(&self, u: &[f64], k: usize) -> f64 {
        match *self {
            SiteFunctional::One => 0.0,
            SiteFunctional::Linear(i) => f64::from(u8::from(i == k)),
            SiteFunctional::Square(i) => {
                if i == k {
                    2.0 * u[i]
                } else {
                    0.0
                }
            }
            SiteFunctional::Product(i, j) => {
                let mut g = 0.0;
                if i == k {
                    g += u[j];
                }
                if j == k {
                    g += u[i];
                }
                g
            }
            SiteFunctional::HalfExp(i) => {
                if i == k {
                    0.5 * (0.5 * u[i]).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IbpCheck {
    pub functional: String,
    pub coordinate: usize,
    /// `E[(W^i - lambda^i) F]`.
    pub lhs: Estimate,
    /// `E[d_i F]`.
    pub rhs: Estimate,
    pub residual: f64,
    /// Standard error of the paired difference.
    pub combined_se: f64,
    pub pass: bool,
}

/// Integration by parts `E[(W^i - lambda^i) F] = E[d_i F]` for every coordinate.
pub fn ibp_check(batch: &SiteSampleBatch, f: &SiteFunctional) -> Vec<IbpCheck> {
    let d = batch.d;
    let mut w = vec![0.0; batch.samples.len()];
    batch.potential.gradient_sites(&batch.samples, &mut w);
    (0..d)
        .map(|i| {
            let mut l = Vec::with_capacity(batch.len());
            let mut r = Vec::with_capacity(batch.len());
            let mut diff = Vec::with_capacity(batch.len());
            for (u, g) in batch.iter().zip(w.chunks_exact(d)) {
                let a = (g[i] - batch.lambda[i]) * f.value(u);
                let b = f.partial(u, i);
                l.push(a);
                r.push(b);
                diff.push(a - b);
            }
            let lhs = Estimate::from_samples(&l);
            let rhs = Estimate::from_samples(&r);
            let de = Estimate::from_samples(&diff);
            let se = if de.se.is_finite() { de.se } else { 0.0 };
            IbpCheck {
                functional: f.name(),
                coordinate: i,
                lhs,
                rhs,
                residual: de.mean.abs(),
                combined_se: se,
                pass: de.mean.abs() <= 3.0 * se,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{correlation, ks_one_sample, std_normal_cdf, variance};

    #[test]
    fn quadratic_partition_function() {
        let p = MeasureParams::new(&PotentialSpec::quadratic(1), 1.0, &[0.0]).unwrap();
        let z = partition_function(&p).unwrap();
        assert!((z.z - 2.5066282746310002).abs() < 1e-10);
    }

    #[test]
    fn importance_sampling_in_three_dimensions() {
        let p = MeasureParams::new(&PotentialSpec::quadratic(3), 1.0, &[0.1, 0.0, -0.2]).unwrap();
        let z = partition_function(&p).unwrap();
        let want = (2.0 * std::f64::consts::PI).powf(1.5) * (0.5f64 * 0.05).exp();
        assert!((z.z - want).abs() < 1e-10 * want, "{z:?}");
        assert_eq!(z.method, "importance_sampling");
    }

    #[test]
    fn quadratic_acceptance_is_one_and_samples_gaussian() {
        let p = MeasureParams::new(&PotentialSpec::quadratic(1), 0.3, &[0.0]).unwrap();
        let b = sample_sites(&p, 4000, 1).unwrap();
        assert_eq!(b.acceptance_rate, 1.0);
        assert!(ks_one_sample(&b.coordinate(0), std_normal_cdf).p_value > 1e-3);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = MeasureParams::new(&PotentialSpec::toda(), 0.5, &[0.0]).unwrap();
        let a = sample_sites(&p, 3000, 9).unwrap();
        let b = sample_sites(&p, 3000, 9).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.chains, 2);
    }

    #[test]
    fn zero_exponential_moment_is_one() {
        let p = MeasureParams::new(&PotentialSpec::toda(), 0.5, &[0.0]).unwrap();
        let b = sample_sites(&p, 500, 2).unwrap();
        let e = exp_moment_check(&b, 0.0).unwrap();
        assert_eq!(e.mean, 1.0);
        assert!(exp_moment_check(&b, 2.5).is_err());
    }

    #[test]
    fn low_acceptance_is_an_error() {
        // narrow target far from a wide proposal
        let p = PotentialSpec::from_fn(1, 1.0, "stiff", |u| 5000.0 * u[0] * u[0]).unwrap();
        let params = MeasureParams::new(&p, 1.0, &[0.0]).unwrap().with_proposal_scale(50.0);
        let err = sample_sites_with(&params, 200, 3, SamplerOptions { verified: Some(true), ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::LowAcceptance { .. }), "{err}");
    }

    #[test]
    fn nonconvex_batches_are_flagged() {
        let p = MeasureParams::new(&PotentialSpec::fpu_alpha(0.8), 0.2, &[0.0]).unwrap();
        let b = sample_sites(&p, 200, 4).unwrap();
        assert!(!b.measure_verified);
        let ok = MeasureParams::new(&PotentialSpec::fpu_alpha(0.5), 0.2, &[0.0]).unwrap();
        assert!(sample_sites(&ok, 200, 4).unwrap().measure_verified);
    }

    #[test]
    fn independent_sub_seeds_give_uncorrelated_sites() {
        let p = MeasureParams::new(&PotentialSpec::toda(), 0.3, &[0.0]).unwrap();
        let m = 2000;
        let a = sample_sites(&p, m, crate::seed!(5, "site", 0u64)).unwrap().coordinate(0);
        let b = sample_sites(&p, m, crate::seed!(5, "site", 1u64)).unwrap().coordinate(0);
        assert!(correlation(&a, &b).abs() < 4.0 / (m as f64).sqrt());
    }

    #[test]
    fn small_beta_variance_near_one() {
        for p in [PotentialSpec::toda(), PotentialSpec::fpu_alpha(0.3), PotentialSpec::diagonal(2, 0.4, 0.7), PotentialSpec::family(1.0, 0.3)] {
            let params = MeasureParams::new(&p, 0.05, &vec![0.0; p.dim()]).unwrap();
            let b = sample_sites(&params, 20_000, 6).unwrap();
            for i in 0..p.dim() {
                let v = variance(&b.coordinate(i));
                assert!((v - 1.0).abs() < 0.05, "{} coordinate {i}: {v}", p.name());
            }
        }
    }

    #[test]
    fn safe_beta_scan_finds_threshold() {
        // Toda with lambda = 0.6 is integrable iff 1/beta > 0.6
        let s = safe_beta_scan(&PotentialSpec::toda(), &[0.6], &[0.5, 1.0, 1.5, 2.0, 3.0]).unwrap();
        assert_eq!(s.largest_safe, Some(1.5));
        assert_eq!(s.finite, vec![true, true, true, false, false]);
    }
}
