use std::fmt;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::gibbs::MeasureParams;
use crate::lattice::{run, LatticeState, Observer, SimConfig, StepPlan};
use crate::tensor::SymTensor;
use crate::tensors::CouplingTensors;

use super::pairing::{Stencil, Twiddles};
use super::{centering, lattice_shift, local_average, qv_estimate, TestFunction};

/// One column of the decomposition `X_t = X_0 + S_t + B_t + M_t + R_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Term {
    X,
    /// The same pairing with `Wbar` in place of `ubar`.
    XW,
    S,
    B,
    M,
    R,
    Qv,
    /// `int sum_j gamma^i_{ab} ->u^a ->u^b grad^n phi` with windows of `l` sites.
    A(usize),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::X => write!(f, "X"),
            Term::XW => write!(f, "XW"),
            Term::S => write!(f, "S"),
            Term::B => write!(f, "B"),
            Term::M => write!(f, "M"),
            Term::R => write!(f, "R"),
            Term::Qv => write!(f, "QV"),
            Term::A(l) => write!(f, "A{l}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FieldOptions {
    /// Microscopic spacing of the quadrature grid for the time integrals.
    pub observe_dt: f64,
    /// Window lengths for the quadratic fields.
    pub windows: Vec<usize>,
    /// Overrides the moving frame; without it the frame conditions must hold.
    pub frame: Option<f64>,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self {
            observe_dt: 0.25,
            windows: Vec::new(),
            frame: None,
        }
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldRow {
    pub replica: u64,
    pub time: f64,
    pub species: usize,
    pub test_function: String,
    pub term: String,
    pub value: f64,
}

/// All terms at every recording time, for one replica.
#[derive(Clone, Debug)]
pub struct FieldTrajectory {
    pub n: usize,
    pub d: usize,
    pub f_n: f64,
    pub eta: Option<f64>,
    pub eta_prime: Option<f64>,
    pub seed: u64,
    pub replica: u64,
    pub center: Vec<f64>,
    pub test_functions: Vec<String>,
    pub terms: Vec<Term>,
    pub times: Vec<f64>,
    /// `[record][term][species][test function]`.
    data: Vec<f64>,
}

impl FieldTrajectory {
    fn index(&self, record: usize, term: usize, species: usize, tf: usize) -> usize {
        ((record * self.terms.len() + term) * self.d + species) * self.test_functions.len() + tf
    }

    pub fn get(&self, record: usize, term: Term, species: usize, tf: usize) -> Option<f64> {
        let k = self.terms.iter().position(|t| *t == term)?;
        self.data.get(self.index(record, k, species, tf)).copied()
    }

    /// Values over the recording times.
    pub fn series(&self, term: Term, species: usize, tf: usize) -> Vec<f64> {
        (0..self.times.len())
            .filter_map(|r| self.get(r, term, species, tf))
            .collect()
    }

    pub fn rows(&self) -> Vec<FieldRow> {
        let mut out = Vec::with_capacity(self.data.len());
        for (r, &t) in self.times.iter().enumerate() {
            for i in 0..self.d {
                for (k, name) in self.test_functions.iter().enumerate() {
                    for (q, term) in self.terms.iter().enumerate() {
                        out.push(FieldRow {
                            replica: self.replica,
                            time: t,
                            species: i,
                            test_function: name.clone(),
                            term: term.to_string(),
                            value: self.data[self.index(r, q, i, k)],
                        });
                    }
                }
            }
        }
        out
    }
}

struct Integrator<'a> {
    tfs: &'a [TestFunction],
    tw: Twiddles,
    kmax: u32,
    f_n: f64,
    center: &'a [f64],
    gamma: &'a SymTensor,
    windows: &'a [usize],
    /// rates `[quantity][species][tf]`: D, S, B, A(l)...
    prev: Option<(f64, Vec<f64>)>,
    integrals: Vec<f64>,
    x0: Vec<f64>,
    times: Vec<f64>,
    data: Vec<f64>,
    ubar: Vec<f64>,
    wbar: Vec<f64>,
    q: Vec<f64>,
}

impl Integrator<'_> {
    fn quantities(&self) -> usize {
        3 + self.windows.len()
    }

    fn slot(&self, quantity: usize, species: usize, tf: usize, d: usize) -> usize {
        (quantity * d + species) * self.tfs.len() + tf
    }
}

impl Observer for Integrator<'_> {
    fn observe(&mut self, s: &LatticeState, t: f64, record: bool) -> Result<()> {
        let (n, d) = (s.n, s.d);
        let k = self.tfs.len();
        let nf = n as f64;
        let sq = nf.sqrt();
        self.ubar.clear();
        self.ubar.extend(s.u.iter().enumerate().map(|(m, u)| u - self.center[m % d]));
        self.wbar.resize(s.u.len(), 0.0);
        s.potential().gradient_sites(&s.u, &mut self.wbar);
        for (m, w) in self.wbar.iter_mut().enumerate() {
            *w -= s.lambda[m % d];
        }
        // q^i_j = gamma^i_{ab} Wbar^a_{j-1} Wbar^b_j
        self.q.clear();
        self.q.resize(s.u.len(), 0.0);
        for j in 0..n {
            let jm = (j + n - 1) % n;
            for i in 0..d {
                let mut acc = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        acc += self.gamma.get(&[i, a, b]) * self.wbar[jm * d + a] * self.wbar[j * d + b];
                    }
                }
                self.q[j * d + i] = acc;
            }
        }
        let c = lattice_shift(self.f_n, t);
        let mut rates = vec![0.0; self.quantities() * d * k];
        let mut fields = vec![0.0; 2 * d * k];
        for i in 0..d {
            let su = self.tw.spectrum(&self.ubar, d, i, self.kmax);
            let sw = self.tw.spectrum(&self.wbar, d, i, self.kmax);
            let sq_ = self.tw.spectrum(&self.q, d, i, self.kmax);
            for (f, phi) in self.tfs.iter().enumerate() {
                fields[i * k + f] = su.pair(phi, c, Stencil::Point) / sq;
                fields[(d + i) * k + f] = sw.pair(phi, c, Stencil::Point) / sq;
                let drift = nf * sq * sw.pair(phi, c, Stencil::Forward) - self.f_n / (nf * sq) * su.pair(phi, c, Stencil::Derivative);
                rates[self.slot(0, i, f, d)] = drift;
                rates[self.slot(1, i, f, d)] = sw.pair(phi, c, Stencil::Laplacian) / (2.0 * sq);
                rates[self.slot(2, i, f, d)] = sq_.pair(phi, c, Stencil::Gradient);
            }
        }
        for (w, &ell) in self.windows.iter().enumerate() {
            let mut avgs = Vec::with_capacity(d);
            for i in 0..d {
                let v: Vec<f64> = self.ubar.iter().skip(i).step_by(d).copied().collect();
                avgs.push(local_average(&v, ell)?);
            }
            let mut prod = vec![0.0; n * d];
            for j in 0..n {
                for i in 0..d {
                    let mut acc = 0.0;
                    for a in 0..d {
                        for b in 0..d {
                            acc += self.gamma.get(&[i, a, b]) * avgs[a][j] * avgs[b][j];
                        }
                    }
                    prod[j * d + i] = acc;
                }
            }
            for i in 0..d {
                let sp = self.tw.spectrum(&prod, d, i, self.kmax);
                for (f, phi) in self.tfs.iter().enumerate() {
                    rates[self.slot(3 + w, i, f, d)] = sp.pair(phi, c, Stencil::Gradient);
                }
            }
        }
        match &self.prev {
            Some((t0, r0)) => {
                let h = t - t0;
                for ((acc, a), b) in self.integrals.iter_mut().zip(r0).zip(&rates) {
                    *acc += 0.5 * h * (a + b);
                }
            }
            None => {
                self.integrals = vec![0.0; rates.len()];
                self.x0 = fields[..d * k].to_vec();
            }
        }
        self.prev = Some((t, rates));
        if record {
            self.times.push(t);
            let nterms = 7 + self.windows.len();
            let base = self.data.len();
            self.data.resize(base + nterms * d * k, 0.0);
            for i in 0..d {
                for (f, phi) in self.tfs.iter().enumerate() {
                    let x = fields[i * k + f];
                    let id = self.integrals[self.slot(0, i, f, d)];
                    let is = self.integrals[self.slot(1, i, f, d)];
                    let ib = self.integrals[self.slot(2, i, f, d)];
                    let mut vals = vec![
                        x,
                        fields[(d + i) * k + f],
                        is,
                        ib,
                        x - self.x0[i * k + f] - id,
                        id - is - ib,
                        qv_estimate(n, phi, self.f_n, t),
                    ];
                    for w in 0..self.windows.len() {
                        vals.push(self.integrals[self.slot(3 + w, i, f, d)]);
                    }
                    for (q, v) in vals.into_iter().enumerate() {
                        self.data[base + (q * d + i) * k + f] = v;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Shared, replica-independent inputs of a field experiment.
#[derive(Clone, Debug)]
pub struct FieldExperiment {
    pub sim: SimConfig,
    pub test_functions: Vec<TestFunction>,
    pub options: FieldOptions,
    pub params: MeasureParams,
    pub tensors: CouplingTensors,
    pub f_n: f64,
    pub center: Vec<f64>,
}

impl FieldExperiment {
    /// Computes the tensors, the moving frame and the centering. Fails when the
    /// frame conditions do not hold and no frame override is given, since the
    /// singular drift term cannot then be removed.
    pub fn prepare(sim: &SimConfig, test_functions: &[TestFunction], options: FieldOptions) -> Result<Self> {
        if test_functions.is_empty() {
            return Err(invalid("at least one test function is required"));
        }
        if !(options.observe_dt > 0.0) {
            return Err(invalid("observation spacing must be positive"));
        }
        if let Some(&l) = options.windows.iter().find(|&&l| l == 0 || l > sim.n) {
            return Err(invalid(format!("window {l} must lie in 1..={}", sim.n)));
        }
        let params = sim.measure()?;
        let tensors = CouplingTensors::compute(&sim.potential.unscaled(), &sim.lambda)?;
        let f_n = match options.frame {
            Some(f) => f,
            None => tensors.moving_frame(sim.n)?,
        };
        let center = centering(&params, sim.seed)?;
        Ok(Self {
            sim: sim.clone(),
            test_functions: test_functions.to_vec(),
            options,
            params,
            tensors,
            f_n,
            center,
        })
    }

    pub fn run(&self, replica: u64) -> Result<FieldTrajectory> {
        let sim = SimConfig { replica, ..self.sim.clone() };
        let n = sim.n;
        let mut state = LatticeState::init_stationary_with(n, &self.params, sim.replica_seed(), Some(true))?;
        let times = if sim.record_times.is_empty() { vec![0.0] } else { sim.record_times.clone() };
        let plan = StepPlan::new(n, sim.t_end, sim.dt, times)?.with_observe_dt(self.options.observe_dt);
        let kmax = self.test_functions.iter().map(|f| f.max_freq()).max().unwrap_or(0);
        let mut obs = Integrator {
            tfs: &self.test_functions,
            tw: Twiddles::new(n),
            kmax,
            f_n: self.f_n,
            center: &self.center,
            gamma: &self.tensors.gamma,
            windows: &self.options.windows,
            prev: None,
            integrals: Vec::new(),
            x0: Vec::new(),
            times: Vec::new(),
            data: Vec::new(),
            ubar: Vec::new(),
            wbar: Vec::new(),
            q: Vec::new(),
        };
        run(&mut state, &plan, &mut obs)?;
        let mut terms = vec![Term::X, Term::XW, Term::S, Term::B, Term::M, Term::R, Term::Qv];
        terms.extend(self.options.windows.iter().map(|&l| Term::A(l)));
        let frame = self.tensors.frame.as_ref();
        Ok(FieldTrajectory {
            n,
            d: state.d,
            f_n: self.f_n,
            eta: frame.map(|f| f.eta),
            eta_prime: frame.map(|f| f.eta_prime),
            seed: sim.seed,
            replica,
            center: self.center.clone(),
            test_functions: self.test_functions.iter().map(|f| f.name.clone()).collect(),
            terms,
            times: obs.times,
            data: obs.data,
        })
    }

    /// Replicas in parallel, returned in replica order.
    pub fn run_all(&self, replicas: u64) -> Result<Vec<FieldTrajectory>> {
        (0..replicas).into_par_iter().map(|r| self.run(r)).collect()
    }
}
