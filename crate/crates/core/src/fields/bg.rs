use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::gibbs::MeasureParams;
use crate::lattice::{run, LatticeState, Observer, SimConfig, StepPlan};
use crate::stats::Estimate;
use crate::tensors::CouplingTensors;

use super::pairing::{sample, Stencil};
use super::{lattice_shift, local_average, shifted_square_integral, TestFunction};

/// Empirical second-order Boltzmann–Gibbs statistic
/// `E sup_t | int_0^t sum_j (Wbar^a_{j-1} Wbar^b_j - ->W^a_j ->W^b_j) phi^n_j ds |^2`
/// for a list of window lengths.
#[derive(Clone, Debug)]
pub struct BgExperiment {
    pub sim: SimConfig,
    pub phi: TestFunction,
    pub pair: (usize, usize),
    pub windows: Vec<usize>,
    /// Microscopic spacing of the quadrature grid.
    pub observe_dt: f64,
    pub params: MeasureParams,
    pub f_n: f64,
}

#[derive(Clone, Debug)]
pub struct BgResult {
    pub n: usize,
    pub t_end: f64,
    pub windows: Vec<usize>,
    pub stat: Vec<Estimate>,
    /// `int_0^T sum_j phi^n_j(s)^2 ds`, the scale of the bound.
    pub normalizer: f64,
    /// `[replica][window]` values of the supremum.
    pub per_replica: Vec<Vec<f64>>,
}

impl BgResult {
    /// Window with the smallest statistic.
    pub fn argmin(&self) -> usize {
        let k = self
            .stat
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.windows[k]
    }

    pub fn min_value(&self) -> f64 {
        self.stat.iter().map(|e| e.mean).fold(f64::INFINITY, f64::min)
    }

    /// Minimum strictly inside the window range.
    pub fn u_shaped(&self) -> bool {
        let k = self.windows.iter().position(|&l| l == self.argmin()).unwrap_or(0);
        k > 0 && k + 1 < self.windows.len()
    }
}

struct SupTracker<'a> {
    phi: &'a TestFunction,
    f_n: f64,
    pair: (usize, usize),
    windows: &'a [usize],
    prev: Option<(f64, Vec<f64>)>,
    integral: Vec<f64>,
    sup: Vec<f64>,
    w: Vec<f64>,
}

impl Observer for SupTracker<'_> {
    fn observe(&mut self, s: &LatticeState, t: f64, _record: bool) -> Result<()> {
        let (n, d) = (s.n, s.d);
        let (a, b) = self.pair;
        self.w.resize(s.u.len(), 0.0);
        s.potential().gradient_sites(&s.u, &mut self.w);
        let wa: Vec<f64> = (0..n).map(|j| self.w[j * d + a] - s.lambda[a]).collect();
        let wb: Vec<f64> = (0..n).map(|j| self.w[j * d + b] - s.lambda[b]).collect();
        let phi = sample(self.phi, n, lattice_shift(self.f_n, t), Stencil::Point);
        let local: f64 = (0..n).map(|j| wa[(j + n - 1) % n] * wb[j] * phi[j]).sum();
        let mut rates = Vec::with_capacity(self.windows.len());
        for &ell in self.windows {
            let la = local_average(&wa, ell)?;
            let lb = if a == b { la.clone() } else { local_average(&wb, ell)? };
            let windowed: f64 = (0..n).map(|j| la[j] * lb[j] * phi[j]).sum();
            rates.push(local - windowed);
        }
        if let Some((t0, r0)) = &self.prev {
            let h = t - t0;
            for (k, (x, y)) in r0.iter().zip(&rates).enumerate() {
                self.integral[k] += 0.5 * h * (x + y);
                self.sup[k] = self.sup[k].max(self.integral[k] * self.integral[k]);
            }
        }
        self.prev = Some((t, rates));
        Ok(())
    }
}

impl BgExperiment {
    /// The moving frame comes from the coupling tensors. Frame conditions must hold.
    pub fn prepare(sim: &SimConfig, phi: TestFunction, pair: (usize, usize), windows: Vec<usize>, observe_dt: f64) -> Result<Self> {
        if windows.is_empty() {
            return Err(invalid("at least one window is required"));
        }
        if let Some(&l) = windows.iter().find(|&&l| l == 0 || l > sim.n) {
            return Err(invalid(format!("window {l} must lie in 1..={}", sim.n)));
        }
        if !(observe_dt > 0.0) {
            return Err(invalid("observation spacing must be positive"));
        }
        let params = sim.measure()?;
        if pair.0 >= params.dim() || pair.1 >= params.dim() {
            return Err(invalid("species index out of range"));
        }
        let tensors = CouplingTensors::compute(&sim.potential.unscaled(), &sim.lambda)?;
        let f_n = tensors.moving_frame(sim.n)?;
        Ok(Self {
            sim: sim.clone(),
            phi,
            pair,
            windows,
            observe_dt,
            params,
            f_n,
        })
    }

    /// Supremum of the squared running integral, per window, for one replica.
    pub fn run(&self, replica: u64) -> Result<Vec<f64>> {
        let sim = SimConfig { replica, ..self.sim.clone() };
        let mut state = LatticeState::init_stationary_with(sim.n, &self.params, sim.replica_seed(), Some(true))?;
        let plan = StepPlan::new(sim.n, sim.t_end, sim.dt, vec![sim.t_end])?.with_observe_dt(self.observe_dt);
        let mut obs = SupTracker {
            phi: &self.phi,
            f_n: self.f_n,
            pair: self.pair,
            windows: &self.windows,
            prev: None,
            integral: vec![0.0; self.windows.len()],
            sup: vec![0.0; self.windows.len()],
            w: Vec::new(),
        };
        run(&mut state, &plan, &mut obs)?;
        Ok(obs.sup)
    }

    pub fn run_all(&self, replicas: u64) -> Result<BgResult> {
        let per: Vec<Vec<f64>> = (0..replicas).into_par_iter().map(|r| self.run(r)).collect::<Result<_>>()?;
        let stat = (0..self.windows.len())
            .map(|k| Estimate::from_samples(&per.iter().map(|v| v[k]).collect::<Vec<_>>()))
            .collect();
        Ok(BgResult {
            n: self.sim.n,
            t_end: self.sim.t_end,
            windows: self.windows.clone(),
            stat,
            normalizer: shifted_square_integral(self.sim.n, &self.phi, self.f_n, self.sim.t_end, Stencil::Point),
            per_replica: per,
        })
    }
}
