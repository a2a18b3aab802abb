use std::io::Write;
use std::path::Path;

use crate::error::{invalid, Result};
use crate::gibbs::MeasureParams;
use crate::potential::PotentialSpec;

use super::LatticeState;

/// Macroscopic horizon, microscopic step and recording times. A macroscopic time
/// `t` is reached at microscopic time `n^2 t`.
#[derive(Clone, Debug)]
pub struct StepPlan {
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    pub record_times: Vec<f64>,
    /// Microscopic spacing of observer calls between records; `None` observes only
    /// at recording times.
    pub observe_dt: Option<f64>,
}

impl StepPlan {
    pub fn new(n: usize, t_end: f64, dt: f64, record_times: Vec<f64>) -> Result<Self> {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(invalid(format!("horizon must be finite and non-negative, got {t_end}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("step must be positive, got {dt}")));
        }
        if record_times.iter().any(|t| !(*t >= 0.0 && *t <= t_end)) {
            return Err(invalid("recording times must lie in [0, T]"));
        }
        if record_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("recording times must be strictly increasing"));
        }
        Ok(Self {
            n,
            t_end,
            dt,
            record_times,
            observe_dt: None,
        })
    }

    /// `k` evenly spaced records on `[0, T]` including both ends.
    pub fn uniform(n: usize, t_end: f64, dt: f64, k: usize) -> Result<Self> {
        let times = if k <= 1 || t_end == 0.0 {
            vec![0.0]
        } else {
            (0..k).map(|r| t_end * r as f64 / (k - 1) as f64).collect()
        };
        Self::new(n, t_end, dt, times)
    }

    pub fn with_observe_dt(mut self, h: f64) -> Self {
        self.observe_dt = Some(h);
        self
    }

    pub fn clock(&self) -> f64 {
        (self.n * self.n) as f64
    }

    /// Microscopic stop times with a flag for recording times.
    fn stops(&self) -> Vec<(f64, bool)> {
        let c = self.clock();
        let end = c * self.t_end;
        let mut stops: Vec<(f64, bool)> = self.record_times.iter().map(|t| (c * t, true)).collect();
        if let Some(h) = self.observe_dt {
            let k = (end / h).floor() as usize;
            stops.extend((0..=k).map(|r| (r as f64 * h, false)));
        }
        stops.push((0.0, false));
        stops.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        stops.dedup_by(|later, earlier| {
            if (later.0 - earlier.0).abs() <= 1e-9 * (1.0 + earlier.0.abs()) {
                earlier.1 |= later.1;
                true
            } else {
                false
            }
        });
        stops
    }
}

/// Called at time zero, at every observation time and at every recording time.
pub trait Observer {
    fn observe(&mut self, state: &LatticeState, t_macro: f64, record: bool) -> Result<()>;
}

/// Advances `state` through the plan, landing exactly on every stop time.
pub fn run(state: &mut LatticeState, plan: &StepPlan, obs: &mut dyn Observer) -> Result<()> {
    let c = plan.clock();
    let origin = state.time;
    for (s, record) in plan.stops() {
        let target = origin + s;
        let gap = target - state.time;
        if gap > 0.0 {
            let full = ((gap / plan.dt) * (1.0 + 1e-12)).floor() as u64;
            for _ in 0..full {
                state.step(plan.dt)?;
            }
            let rest = target - state.time;
            if rest > 1e-12 * plan.dt {
                state.step(rest)?;
            }
            state.time = target;
        }
        obs.observe(state, s / c, record)?;
    }
    Ok(())
}

/// One replica of a lattice experiment.
#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Unscaled potential.
    pub potential: PotentialSpec,
    pub n: usize,
    /// Defaults to `n^{-1/2}`.
    pub beta: Option<f64>,
    pub lambda: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub record_times: Vec<f64>,
    pub seed: u64,
    pub replica: u64,
}

impl SimConfig {
    pub fn measure(&self) -> Result<MeasureParams> {
        let beta = self.beta.unwrap_or(1.0 / (self.n as f64).sqrt());
        MeasureParams::new(&self.potential, beta, &self.lambda)
    }

    pub fn replica_seed(&self) -> u64 {
        crate::seed!(self.seed, "replica", self.replica)
    }
}

/// State and diagnostics at one recording time.
#[derive(Clone, Debug)]
pub struct Record {
    pub t: f64,
    /// Site-major configuration.
    pub state: Vec<f64>,
    /// `max_i |sum_j u^i_j(t) - sum_j u^i_j(0)| / (1 + |sum_j u^i_j(0)|)`.
    pub conservation_drift: f64,
    /// `sum_j (V_beta(u_j) + 1)`.
    pub lyapunov: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub replica: u64,
    pub records: Vec<Record>,
}

struct Recorder {
    initial: Vec<f64>,
    records: Vec<Record>,
}

impl Observer for Recorder {
    fn observe(&mut self, s: &LatticeState, t: f64, record: bool) -> Result<()> {
        if !record {
            return Ok(());
        }
        let sums = s.species_sums();
        let drift = sums
            .iter()
            .zip(&self.initial)
            .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
            .fold(0.0, f64::max);
        let lyapunov = s.u.chunks_exact(s.d).map(|x| s.potential().value(x) + 1.0).sum();
        self.records.push(Record {
            t,
            state: s.u.clone(),
            conservation_drift: drift,
            lyapunov,
        });
        Ok(())
    }
}

/// Stationary start, then integration with states kept at the recording times.
/// Deterministic given the configuration.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    let params = cfg.measure()?;
    let verified = Some(true);
    let mut state = LatticeState::init_stationary_with(cfg.n, &params, cfg.replica_seed(), verified)?;
    let times = if cfg.record_times.is_empty() { vec![0.0] } else { cfg.record_times.clone() };
    let plan = StepPlan::new(cfg.n, cfg.t_end, cfg.dt, times)?;
    let mut rec = Recorder {
        initial: state.species_sums(),
        records: Vec::new(),
    };
    run(&mut state, &plan, &mut rec)?;
    Ok(Trajectory {
        n: cfg.n,
        d: state.d,
        seed: cfg.seed,
        replica: cfg.replica,
        records: rec.records,
    })
}

/// Writes `<prefix>.bin` (little-endian `f64`, row-major `d x n`) and a text
/// header `<prefix>.hdr`.
pub fn write_snapshot(prefix: &Path, state: &LatticeState, t_macro: f64, seed: u64) -> Result<()> {
    let data = state.to_species_major();
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in &data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(prefix.with_extension("bin"), bytes)?;
    let mut h = std::fs::File::create(prefix.with_extension("hdr"))?;
    writeln!(h, "format = f64-le row-major")?;
    writeln!(h, "rows = {}", state.d)?;
    writeln!(h, "cols = {}", state.n)?;
    writeln!(h, "n = {}", state.n)?;
    writeln!(h, "d = {}", state.d)?;
    writeln!(h, "beta = {:.16e}", state.beta)?;
    writeln!(h, "time = {t_macro:.16e}")?;
    writeln!(h, "micro_time = {:.16e}", state.time)?;
    writeln!(h, "seed = {seed}")?;
    writeln!(h, "potential = {}", state.potential().name())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t_end: f64, times: Vec<f64>) -> SimConfig {
        SimConfig {
            potential: PotentialSpec::toda(),
            n: 16,
            beta: None,
            lambda: vec![0.0],
            t_end,
            dt: 0.02,
            record_times: times,
            seed: 7,
            replica: 0,
        }
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let t = simulate(&cfg(0.0, vec![0.0])).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.records[0].t, 0.0);
    }

    #[test]
    fn lands_exactly_on_record_times() {
        struct Times(Vec<(f64, f64)>);
        impl Observer for Times {
            fn observe(&mut self, s: &LatticeState, t: f64, record: bool) -> Result<()> {
                if record {
                    self.0.push((t, s.time));
                }
                Ok(())
            }
        }
        let params = MeasureParams::for_lattice(&PotentialSpec::toda(), 16, &[0.0]).unwrap();
        let mut s = LatticeState::init_stationary(16, &params, 1).unwrap();
        let plan = StepPlan::new(16, 0.01, 0.03, vec![0.0, 0.0037, 0.01]).unwrap().with_observe_dt(0.5);
        let mut obs = Times(Vec::new());
        run(&mut s, &plan, &mut obs).unwrap();
        assert_eq!(obs.0.len(), 3);
        for (t, micro) in obs.0 {
            assert_eq!(micro, 256.0 * t);
        }
    }

    #[test]
    fn simulate_is_deterministic_and_conservative() {
        let a = simulate(&cfg(0.05, vec![0.0, 0.025, 0.05])).unwrap();
        let b = simulate(&cfg(0.05, vec![0.0, 0.025, 0.05])).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.state, y.state);
            assert!(x.conservation_drift < 1e-12);
        }
    }

    #[test]
    fn record_times_validated() {
        assert!(StepPlan::new(4, 1.0, 0.1, vec![0.5, 0.2]).is_err());
        assert!(StepPlan::new(4, 1.0, 0.1, vec![1.5]).is_err());
        assert!(StepPlan::new(4, 1.0, 0.0, vec![]).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = PotentialSpec::quadratic(2);
        let s = LatticeState::from_values(p, &[0.0, 0.0], vec![1.0, 2.0, 3.0, 4.0], 0).unwrap();
        let prefix = dir.path().join("snap");
        write_snapshot(&prefix, &s, 0.5, 3).unwrap();
        let bytes = std::fs::read(prefix.with_extension("bin")).unwrap();
        let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        assert_eq!(vals, vec![1.0, 3.0, 2.0, 4.0]);
        let hdr = std::fs::read_to_string(prefix.with_extension("hdr")).unwrap();
        assert!(hdr.contains("rows = 2") && hdr.contains("cols = 2"));
    }
}
