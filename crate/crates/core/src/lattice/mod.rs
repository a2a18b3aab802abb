//! Interacting diffusions on the discrete torus `T_n = Z / nZ`.
//!
//! In microscopic time the update is Euler–Maruyama for
//! `du^i_j = (W^i_{j-1} - W^i_j) ds + dB^i_j - dB^i_{j-1}`, `W = grad V_beta`.
//! One increment is drawn per bond `(j, j+1)` and species, entering site `j`
//! with a plus sign and site `j + 1` with a minus sign, so every species sum is
//! conserved exactly up to rounding.

mod generator;
mod run;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::gibbs::{sample_sites_with, MeasureParams, SamplerOptions};
use crate::potential::{check_assumptions, PotentialSpec, ProbeGrid};
use crate::seed::{rng_from, Rng as StreamRng};

pub use generator::{apply_generator, LatticeFunctional, Lyapunov, SiteProduct, SpeciesSum};
pub use run::{run, simulate, write_snapshot, Observer, Record, SimConfig, StepPlan, Trajectory};

/// Lattice configuration stored site-major: `u[j * d + i]` is `u^i_j`.
#[derive(Clone, Debug)]
pub struct LatticeState {
    pub n: usize,
    pub d: usize,
    pub beta: f64,
    pub lambda: Vec<f64>,
    pub u: Vec<f64>,
    /// Microscopic time.
    pub time: f64,
    pub steps: u64,
    potential: PotentialSpec,
    rng: StreamRng,
    w: Vec<f64>,
    noise: Vec<f64>,
}

impl LatticeState {
    /// A state with given values; `potential` must already be `V_beta`.
    pub fn from_values(potential: PotentialSpec, lambda: &[f64], u: Vec<f64>, seed: u64) -> Result<Self> {
        let d = potential.dim();
        if u.is_empty() || u.len() % d != 0 || lambda.len() != d {
            return Err(invalid("state length must be a positive multiple of the dimension"));
        }
        let n = u.len() / d;
        Ok(Self {
            n,
            d,
            beta: potential.beta(),
            lambda: lambda.to_vec(),
            w: vec![0.0; u.len()],
            noise: vec![0.0; u.len()],
            u,
            time: 0.0,
            steps: 0,
            potential,
            rng: rng_from(seed),
        })
    }

    /// Every site drawn independently from the single-site marginal of `params`.
    pub fn init_stationary(n: usize, params: &MeasureParams, seed: u64) -> Result<Self> {
        Self::init_stationary_with(n, params, seed, None)
    }

    /// As [`LatticeState::init_stationary`], with a precomputed convexity verdict so
    /// many replicas need not repeat the audit.
    pub fn init_stationary_with(n: usize, params: &MeasureParams, seed: u64, verified: Option<bool>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("lattice size must be positive"));
        }
        let opts = SamplerOptions {
            chains: Some(1),
            verified: Some(verified.unwrap_or(true)),
            ..SamplerOptions::default()
        };
        let batch = sample_sites_with(params, n, crate::seed!(seed, "init"), opts)?;
        Self::from_values(params.target().clone(), &params.lambda, batch.samples, crate::seed!(seed, "noise"))
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn site(&self, j: usize) -> &[f64] {
        &self.u[j * self.d..(j + 1) * self.d]
    }

    /// `sum_j u^i_j` for each species.
    pub fn species_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.d];
        for x in self.u.chunks_exact(self.d) {
            for (a, b) in s.iter_mut().zip(x) {
                *a += b;
            }
        }
        s
    }

    /// `W = grad V_beta` at every site, site-major.
    pub fn w_values(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.u.len()];
        self.potential.gradient_sites(&self.u, &mut w);
        w
    }

    /// Species `i` as a length-`n` vector.
    pub fn species(&self, i: usize) -> Vec<f64> {
        self.u.iter().skip(i).step_by(self.d).copied().collect()
    }

    /// Row-major `d x n` copy (species-major), the snapshot layout.
    pub fn to_species_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.u.len()];
        for j in 0..self.n {
            for i in 0..self.d {
                out[i * self.n + j] = self.u[j * self.d + i];
            }
        }
        out
    }

    /// One Euler–Maruyama step of microscopic length `dt` with fresh noise.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let sd = dt.sqrt();
        for b in self.noise.iter_mut() {
            let z: f64 = self.rng.sample(StandardNormal);
            *b = sd * z;
        }
        let noise = std::mem::take(&mut self.noise);
        let r = self.step_with_noise(dt, &noise);
        self.noise = noise;
        r
    }

    /// One step with prescribed bond increments `noise[j * d + i] = dB^i_j`
    /// (the bond between sites `j` and `j + 1`).
    pub fn step_with_noise(&mut self, dt: f64, noise: &[f64]) -> Result<()> {
        let (n, d) = (self.n, self.d);
        debug_assert_eq!(noise.len(), n * d);
        self.potential.gradient_sites(&self.u, &mut self.w);
        let mut finite = true;
        for j in 0..n {
            let jm = if j == 0 { n - 1 } else { j - 1 };
            for i in 0..d {
                let k = j * d + i;
                let km = jm * d + i;
                let v = self.u[k] + dt * (self.w[km] - self.w[k]) + (noise[k] - noise[km]);
                finite &= v.is_finite();
                self.u[k] = v;
            }
        }
        self.steps += 1;
        self.time += dt;
        if !finite {
            return Err(Error::LatticeBlowUp {
                step: self.steps,
                time: self.time,
            });
        }
        Ok(())
    }
}

/// Stable microscopic step `0.05 / (1 + max ||Hess V_beta||)` over `samples`
/// draws from the invariant measure.
pub fn dt_max(params: &MeasureParams, samples: usize, seed: u64) -> Result<f64> {
    let opts = SamplerOptions {
        verified: Some(true),
        ..SamplerOptions::default()
    };
    let batch = sample_sites_with(params, samples.max(1), seed, opts)?;
    let d = params.dim();
    let mut worst: f64 = 0.0;
    for x in batch.iter() {
        let h = params.target().hessian(x)?;
        let m = nalgebra::DMatrix::from_row_slice(d, d, h.as_slice());
        let norm = nalgebra::SymmetricEigen::new(m).eigenvalues.amax();
        worst = worst.max(norm);
    }
    Ok(0.05 / (1.0 + worst))
}

/// Convexity verdict for the unscaled potential, reused across replicas.
pub fn convexity_verdict(potential: &PotentialSpec) -> bool {
    let d = potential.dim();
    let grid = ProbeGrid {
        points_per_axis: if d == 1 { 41 } else { 11 },
        random_probes: 0,
        ..ProbeGrid::default()
    };
    check_assumptions(&potential.unscaled(), &grid).convex()
}
