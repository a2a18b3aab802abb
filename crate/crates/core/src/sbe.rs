//! Spectral Galerkin solver for the coupled stochastic Burgers equation
//! `du^i = (1/2) u^i_xx dt + (1/2) G^i_{kl} (u^k u^l)_x dt + dW^i_x` on the unit
//! torus, and the white-noise and comparison statistics built on it.
//!
//! The lattice coupling enters as `G = -2 gamma`; this is the only place where
//! the two sign conventions meet.
//!
//! Modes `|k| < M/2` are kept. The heat semigroup and the noise are integrated
//! exactly per mode (each linear mode is a complex Ornstein–Uhlenbeck process),
//! and the quadratic term is added by a Heun step in the integrating-factor frame.
//! Products are evaluated on a grid of `2M` points, so no aliasing reaches the
//! kept modes.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::fields::TestFunction;
use crate::seed::{rng_from, Rng as StreamRng};
use crate::stats::{correlation, excess_kurtosis, skewness, variance, Estimate};
use crate::tensor::SymTensor;
use crate::tensors::CouplingTensors;

#[derive(Clone, Debug)]
pub struct SbeConfig {
    /// `G^i_{kl}`, fully symmetric.
    pub coupling: SymTensor,
    /// Grid size; modes `|k| < M/2` are kept.
    pub modes: usize,
    pub t_end: f64,
    pub dt: f64,
    pub record_times: Vec<f64>,
    pub seed: u64,
    pub replica: u64,
}

impl SbeConfig {
    /// `G = -2 gamma` from the lattice tensors.
    pub fn matched(tensors: &CouplingTensors, modes: usize, t_end: f64, dt: f64, record_times: Vec<f64>, seed: u64) -> Self {
        Self {
            coupling: tensors.sbe_coupling(),
            modes,
            t_end,
            dt,
            record_times,
            seed,
            replica: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.coupling.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coupling.order() != 3 {
            return Err(invalid("coupling must be a third-order tensor"));
        }
        if self.coupling.asymmetry() > 1e-12 * (1.0 + self.coupling.max_abs()) {
            return Err(invalid("coupling must be symmetric in all indices (trilinear condition)"));
        }
        if self.modes < 4 || self.modes % 2 != 0 {
            return Err(invalid(format!("mode count must be even and at least 4, got {}", self.modes)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(invalid("step and horizon must be positive and finite"));
        }
        if self.record_times.iter().any(|t| !(*t >= 0.0 && *t <= self.t_end)) || self.record_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("recording times must be increasing and lie in [0, T]"));
        }
        Ok(())
    }

    pub fn replica_seed(&self) -> u64 {
        crate::seed!(self.seed, "sbe", self.replica)
    }
}

/// A step that keeps the explicit quadratic part well inside its stability
/// region for stationary white-noise data, where the grid sup-norm is about
/// `sqrt(2 M ln M)`.
pub fn stable_dt(coupling: &SymTensor, modes: usize) -> f64 {
    let m = modes as f64;
    let g = coupling.max_abs() * coupling.dim() as f64;
    let speed = g * (2.0 * m * m.ln()).sqrt();
    0.5 / (1.0 + 2.0 * PI * 0.5 * m * speed)
}

/// Spectral coefficients `u^i_k`, `k = 0..M/2`, species-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SbeState {
    pub d: usize,
    pub kmax: usize,
    pub time: f64,
    pub coeffs: Vec<Complex64>,
}

impl SbeState {
    pub fn mode(&self, i: usize, k: usize) -> Complex64 {
        self.coeffs[i * (self.kmax + 1) + k]
    }

    /// `u^i(phi) = int u^i phi dx` for a test function within the kept modes.
    pub fn field(&self, i: usize, phi: &TestFunction) -> f64 {
        let mut out = phi.constant * self.mode(i, 0).re;
        for m in &phi.modes {
            if (m.k as usize) <= self.kmax {
                let c = self.mode(i, m.k as usize);
                out += m.cos * c.re - m.sin * c.im;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SbeTrajectory {
    pub seed: u64,
    pub replica: u64,
    pub times: Vec<f64>,
    pub states: Vec<SbeState>,
}

pub struct SbeSolver {
    d: usize,
    kmax: usize,
    grid: usize,
    coupling: SymTensor,
    state: SbeState,
    rng: StreamRng,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    cached_h: f64,
    decay: Vec<f64>,
    noise_sd: Vec<f64>,
    buf: Vec<Vec<Complex64>>,
    prod: Vec<Complex64>,
}

impl SbeSolver {
    /// Independent white noise per species: `u_0 ~ N(0, 1)` and `E|u_k|^2 = 1`.
    pub fn new(cfg: &SbeConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.dim();
        let kmax = cfg.modes / 2 - 1;
        let mut rng = rng_from(crate::seed!(cfg.replica_seed(), "init"));
        let mut coeffs = Vec::with_capacity(d * (kmax + 1));
        for _ in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            coeffs.push(Complex64::new(z, 0.0));
            for _ in 1..=kmax {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                coeffs.push(Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2);
            }
        }
        let state = SbeState { d, kmax, time: 0.0, coeffs };
        Self::from_state(cfg, state, crate::seed!(cfg.replica_seed(), "noise"))
    }

    pub fn from_state(cfg: &SbeConfig, state: SbeState, noise_seed: u64) -> Result<Self> {
        cfg.validate()?;
        if state.d != cfg.dim() || state.kmax != cfg.modes / 2 - 1 || state.coeffs.len() != state.d * (state.kmax + 1) {
            return Err(invalid("state does not match the configuration"));
        }
        let grid = 2 * cfg.modes;
        let mut planner = FftPlanner::new();
        Ok(Self {
            d: state.d,
            kmax: state.kmax,
            grid,
            coupling: cfg.coupling.clone(),
            rng: rng_from(noise_seed),
            forward: planner.plan_fft_forward(grid),
            inverse: planner.plan_fft_inverse(grid),
            cached_h: f64::NAN,
            decay: Vec::new(),
            noise_sd: Vec::new(),
            buf: vec![vec![Complex64::new(0.0, 0.0); grid]; state.d],
            prod: vec![Complex64::new(0.0, 0.0); grid],
            state,
        })
    }

    pub fn state(&self) -> &SbeState {
        &self.state
    }

    fn prepare(&mut self, h: f64) {
        if self.cached_h == h {
            return;
        }
        self.cached_h = h;
        self.decay = (0..=self.kmax).map(|k| (-2.0 * PI * PI * (k * k) as f64 * h).exp()).collect();
        // stationary variance one: sd^2 = 1 - e^{-4 pi^2 k^2 h}
        self.noise_sd = (0..=self.kmax)
            .map(|k| (1.0 - (-4.0 * PI * PI * (k * k) as f64 * h).exp()).max(0.0).sqrt())
            .collect();
    }

    /// `(1/2) G^i_{ab} d_x (u^a u^b)` in the kept modes.
    fn nonlinear(&mut self, coeffs: &[Complex64], out: &mut [Complex64]) {
        let (d, kmax, p) = (self.d, self.kmax, self.grid);
        out.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        if self.coupling.max_abs() == 0.0 {
            return;
        }
        for i in 0..d {
            let b = &mut self.buf[i];
            b.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for k in 0..=kmax {
                let c = coeffs[i * (kmax + 1) + k];
                b[k] = c;
                if k > 0 {
                    b[p - k] = c.conj();
                }
            }
            self.inverse.process(b);
        }
        let scale = 1.0 / p as f64;
        for a in 0..d {
            for bidx in a..d {
                let mult = if a == bidx { 1.0 } else { 2.0 };
                let weights: Vec<f64> = (0..d).map(|i| 0.5 * mult * self.coupling.get(&[i, a, bidx])).collect();
                if weights.iter().all(|w| *w == 0.0) {
                    continue;
                }
                for (x, (ua, ub)) in self.prod.iter_mut().zip(self.buf[a].iter().zip(&self.buf[bidx])) {
                    *x = Complex64::new(ua.re * ub.re, 0.0);
                }
                self.forward.process(&mut self.prod);
                for (i, w) in weights.iter().enumerate() {
                    if *w == 0.0 {
                        continue;
                    }
                    for k in 1..=kmax {
                        let ik = Complex64::new(0.0, 2.0 * PI * k as f64);
                        out[i * (kmax + 1) + k] += ik * self.prod[k] * (w * scale);
                    }
                }
            }
        }
    }

    /// One step with prescribed standard complex normals `xi[i * (kmax + 1) + k]`
    /// (`E|xi|^2 = 1`; the zero mode entry is ignored).
    pub fn step_with_noise(&mut self, h: f64, xi: &[Complex64]) -> Result<()> {
        self.prepare(h);
        let (d, kmax) = (self.d, self.kmax);
        let len = d * (kmax + 1);
        let u = self.state.coeffs.clone();
        let mut n0 = vec![Complex64::new(0.0, 0.0); len];
        self.nonlinear(&u, &mut n0);
        let eta: Vec<Complex64> = (0..len)
            .map(|m| if m % (kmax + 1) == 0 { Complex64::new(0.0, 0.0) } else { xi[m] * self.noise_sd[m % (kmax + 1)] })
            .collect();
        let linear_only = self.coupling.max_abs() == 0.0;
        if linear_only {
            for m in 0..len {
                self.state.coeffs[m] = u[m] * self.decay[m % (kmax + 1)] + eta[m];
            }
        } else {
            let pred: Vec<Complex64> = (0..len)
                .map(|m| (u[m] + n0[m] * h) * self.decay[m % (kmax + 1)] + eta[m])
                .collect();
            let mut n1 = vec![Complex64::new(0.0, 0.0); len];
            self.nonlinear(&pred, &mut n1);
            for m in 0..len {
                let e = self.decay[m % (kmax + 1)];
                self.state.coeffs[m] = (u[m] + n0[m] * (0.5 * h)) * e + n1[m] * (0.5 * h) + eta[m];
            }
        }
        self.state.time += h;
        if self.state.coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite()) || c.norm_sqr() > 1e200) {
            return Err(Error::SbeBlowUp { time: self.state.time });
        }
        Ok(())
    }

    pub fn step(&mut self, h: f64) -> Result<()> {
        let len = self.d * (self.kmax + 1);
        let mut xi = Vec::with_capacity(len);
        for _ in 0..len {
            let a: f64 = self.rng.sample(StandardNormal);
            let b: f64 = self.rng.sample(StandardNormal);
            xi.push(Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2);
        }
        self.step_with_noise(h, &xi)
    }

    /// Advances to `target` in equal steps no longer than `dt`.
    pub fn advance_to(&mut self, target: f64, dt: f64) -> Result<()> {
        let gap = target - self.state.time;
        if gap <= 1e-15 {
            return Ok(());
        }
        let steps = (gap / dt * (1.0 - 1e-12)).ceil().max(1.0) as u64;
        let h = gap / steps as f64;
        for _ in 0..steps {
            self.step(h)?;
        }
        self.state.time = target;
        Ok(())
    }
}

/// Stationary white-noise start, states kept at the recording times.
pub fn solve_sbe(cfg: &SbeConfig) -> Result<SbeTrajectory> {
    let mut solver = SbeSolver::new(cfg)?;
    let times = if cfg.record_times.is_empty() { vec![0.0] } else { cfg.record_times.clone() };
    let mut states = Vec::with_capacity(times.len());
    for &t in &times {
        solver.advance_to(t, cfg.dt)?;
        states.push(solver.state().clone());
    }
    Ok(SbeTrajectory {
        seed: cfg.seed,
        replica: cfg.replica,
        times,
        states,
    })
}

pub fn solve_replicas(cfg: &SbeConfig, replicas: u64) -> Result<Vec<SbeTrajectory>> {
    (0..replicas)
        .into_par_iter()
        .map(|r| solve_sbe(&SbeConfig { replica: r, ..cfg.clone() }))
        .collect()
}

#[derive(Clone, Debug)]
pub struct VarianceCheck {
    pub species: usize,
    pub test_function: String,
    pub variance: Estimate,
    pub target: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct CorrelationCheck {
    pub label: String,
    pub correlation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct ConditionSReport {
    pub replicas: usize,
    pub variances: Vec<VarianceCheck>,
    pub correlations: Vec<CorrelationCheck>,
}

impl ConditionSReport {
    pub fn pass(&self) -> bool {
        self.variances.iter().all(|v| v.pass) && self.correlations.iter().all(|c| c.pass)
    }

    pub fn cross_species_pass(&self) -> bool {
        self.correlations.iter().filter(|c| c.label.starts_with("species")).all(|c| c.pass)
    }
}

/// White-noise checks on fixed-time field samples `samples[replica][species][tf]`:
/// variances against `||phi||^2` and skewness/kurtosis within three standard
/// errors, cross-species and cross-frequency correlations below `4 / sqrt(R)`.
pub fn condition_s_test(samples: &[Vec<Vec<f64>>], tfs: &[TestFunction]) -> Result<ConditionSReport> {
    let r = samples.len();
    if r < 200 {
        return Err(invalid(format!("condition (S) needs at least 200 replicas, got {r}")));
    }
    let d = samples[0].len();
    let col = |i: usize, f: usize| -> Vec<f64> { samples.iter().map(|s| s[i][f]).collect() };
    let rf = r as f64;
    let mut variances = Vec::new();
    for i in 0..d {
        for (f, phi) in tfs.iter().enumerate() {
            let x = col(i, f);
            let v = variance(&x);
            let se = v * (2.0 / (rf - 1.0)).sqrt();
            let target = phi.l2_norm_sq();
            let sk = skewness(&x);
            let ku = excess_kurtosis(&x);
            let pass = (v - target).abs() <= 3.0 * se && sk.abs() <= 3.0 * (6.0 / rf).sqrt() && ku.abs() <= 3.0 * (24.0 / rf).sqrt();
            variances.push(VarianceCheck {
                species: i,
                test_function: phi.name.clone(),
                variance: Estimate { mean: v, se },
                target,
                skewness: sk,
                excess_kurtosis: ku,
                pass,
            });
        }
    }
    let bound = 4.0 / rf.sqrt();
    let mut correlations = Vec::new();
    for (f, phi) in tfs.iter().enumerate() {
        for a in 0..d {
            for b in a + 1..d {
                let c = correlation(&col(a, f), &col(b, f));
                correlations.push(CorrelationCheck {
                    label: format!("species {a}-{b} {}", phi.name),
                    correlation: c,
                    pass: c.abs() < bound,
                });
            }
        }
    }
    for i in 0..d {
        for f in 0..tfs.len() {
            for g in f + 1..tfs.len() {
                let c = correlation(&col(i, f), &col(i, g));
                correlations.push(CorrelationCheck {
                    label: format!("frequency {}-{} species {i}", tfs[f].name, tfs[g].name),
                    correlation: c,
                    pass: c.abs() < bound,
                });
            }
        }
    }
    Ok(ConditionSReport {
        replicas: r,
        variances,
        correlations,
    })
}

/// `E[x_{s+lag} x_s]` averaged over the available `s` in each replica; the
/// standard error comes from the spread of the per-replica averages.
pub fn autocovariance(series: &[Vec<f64>], lag: usize) -> Estimate {
    let per: Vec<f64> = series
        .iter()
        .filter(|x| x.len() > lag)
        .map(|x| {
            let m = x.len() - lag;
            (0..m).map(|s| x[s] * x[s + lag]).sum::<f64>() / m as f64
        })
        .collect();
    Estimate::from_samples(&per)
}

#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub test_function: String,
    pub species: usize,
    pub lag: f64,
    pub lattice: Estimate,
    pub sbe: Estimate,
    /// `|C_lattice(lag) - C_sbe(lag)| / C_sbe(0)`.
    pub relative_difference: f64,
}

/// Time autocovariances of lattice and SBE fields on a common uniform grid of
/// spacing `tau`. Series are `[replica][time]` per `(species, tf)`.
pub fn compare_statistics(
    lattice: &[Vec<Vec<Vec<f64>>>],
    sbe: &[Vec<Vec<Vec<f64>>>],
    tfs: &[TestFunction],
    tau: f64,
    lags: &[f64],
) -> Result<Vec<ComparisonRow>> {
    if lattice.is_empty() || sbe.is_empty() {
        return Err(invalid("both sides need at least one replica"));
    }
    let d = lattice[0].len();
    let mut rows = Vec::new();
    for i in 0..d {
        for (f, phi) in tfs.iter().enumerate() {
            let ls: Vec<Vec<f64>> = lattice.iter().map(|r| r[i][f].clone()).collect();
            let ss: Vec<Vec<f64>> = sbe.iter().map(|r| r[i][f].clone()).collect();
            let base = autocovariance(&ss, 0).mean;
            for &lag in lags {
                let k = (lag / tau).round() as usize;
                if ((k as f64) * tau - lag).abs() > 1e-9 {
                    return Err(invalid(format!("lag {lag} is not a multiple of the grid spacing {tau}")));
                }
                if ls.iter().chain(&ss).any(|x| x.len() <= k) {
                    return Err(invalid(format!("lag {lag} does not fit inside the recorded series")));
                }
                let l = autocovariance(&ls, k);
                let s = autocovariance(&ss, k);
                rows.push(ComparisonRow {
                    test_function: phi.name.clone(),
                    species: i,
                    lag,
                    relative_difference: (l.mean - s.mean).abs() / base,
                    lattice: l,
                    sbe: s,
                });
            }
        }
    }
    Ok(rows)
}

/// Treats each test function of each replica as a separate sample:
/// `[replica][species][tf][time]` becomes `[replica * tfs + tf][species][0][time]`.
pub fn pool_test_functions(samples: &[Vec<Vec<Vec<f64>>>]) -> Vec<Vec<Vec<Vec<f64>>>> {
    let mut out = Vec::new();
    for rep in samples {
        let ntf = rep.first().map_or(0, |s| s.len());
        for f in 0..ntf {
            out.push(rep.iter().map(|sp| vec![sp[f].clone()]).collect());
        }
    }
    out
}

/// `[species][tf][time]` field values along an SBE trajectory.
pub fn sbe_series(traj: &SbeTrajectory, tfs: &[TestFunction]) -> Vec<Vec<Vec<f64>>> {
    let d = traj.states.first().map(|s| s.d).unwrap_or(0);
    (0..d)
        .map(|i| tfs.iter().map(|phi| traj.states.iter().map(|s| s.field(i, phi)).collect()).collect())
        .collect()
}
