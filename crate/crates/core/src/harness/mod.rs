//! Configuration-driven experiments writing CSV results and a JSON manifest.
//!
//! Every random quantity descends from the root seed through labelled
//! [`seed_stream`](crate::seed::seed_stream) paths, and replicas are reduced in
//! replica order, so CSV bytes depend only on the configuration.

mod config;
mod csv;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

pub use config::{
    BgSection, CompareSection, ExperimentConfig, FieldsSection, Kind, SampleSection, SbeSection, SweepQuantity, SweepSection,
};
pub use csv::{fmt_f64, Cell, Table, FIELD_HEADER};

use crate::error::{Error, Result};
use crate::fields::{
    centering, qv_estimate, x_series, BgExperiment, FieldExperiment, FieldOptions, TestFunction,
};
use crate::gibbs::{ibp_check, sample_sites, MeasureParams, SiteFunctional};
use crate::lattice::{dt_max, simulate, write_snapshot, LatticeState, SimConfig};
use crate::potential::{check_assumptions, PotentialSpec, ProbeGrid};
use crate::sbe::{compare_statistics, pool_test_functions, sbe_series, solve_replicas, stable_dt, SbeConfig};
use crate::seed;
use crate::tensors::CouplingTensors;

/// Exit status for configuration problems.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for numerical blow-up.
pub const EXIT_BLOW_UP: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        _ if e.is_blow_up() => EXIT_BLOW_UP,
        Error::Config(_) | Error::InvalidArgument(_) | Error::FrameConditions { .. } => EXIT_CONFIG,
        _ => 1,
    }
}

/// Files written by a successful run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// Thread count from the config, then `KPZLAT_THREADS`, then rayon's default.
pub fn resolve_threads(cfg: &ExperimentConfig) -> Result<Option<usize>> {
    if let Some(t) = cfg.threads {
        return Ok(Some(t));
    }
    match std::env::var("KPZLAT_THREADS") {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(Error::Config(format!("KPZLAT_THREADS=`{v}` is not a positive integer"))),
        },
        _ => Ok(None),
    }
}

/// Runs the experiment and writes its artifacts under `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let threads = resolve_threads(cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    std::fs::create_dir_all(&cfg.out)?;
    let start = Instant::now();
    let ctx = Context::new(cfg)?;
    let files = pool.install(|| ctx.dispatch())?;
    let manifest = write_manifest(cfg, &ctx, &files, threads, start.elapsed().as_secs_f64())?;
    Ok(RunOutput {
        dir: cfg.out.clone(),
        files,
        manifest,
    })
}

/// [`run`] mapped to an exit status; a blow-up leaves `blowup.json` behind.
pub fn execute(cfg: &ExperimentConfig) -> i32 {
    match run(cfg) {
        Ok(out) => {
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = exit_code(&e);
            if code == EXIT_BLOW_UP {
                let diag = json!({
                    "error": e.to_string(),
                    "kind": cfg.kind.map(|k| k.as_str()),
                    "seed": cfg.seed,
                    "config": cfg,
                });
                let path = cfg.out.join("blowup.json");
                let written = std::fs::create_dir_all(&cfg.out)
                    .and_then(|_| std::fs::write(&path, serde_json::to_string_pretty(&diag).unwrap_or_default()));
                if written.is_ok() {
                    eprintln!("diagnostics in {}", path.display());
                }
            }
            code
        }
    }
}

fn write_manifest(cfg: &ExperimentConfig, ctx: &Context, files: &[PathBuf], threads: Option<usize>, wall: f64) -> Result<PathBuf> {
    let names: Vec<String> = files
        .iter()
        .map(|f| f.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let per_size: BTreeMap<String, u64> = cfg.sizes.iter().map(|&n| (n.to_string(), ctx.size_seed(n))).collect();
    let manifest = json!({
        "kind": cfg.kind.map(|k| k.as_str()),
        "config": cfg,
        "config_toml": cfg.to_toml_string()?,
        "versions": {
            "kpzlat": env!("CARGO_PKG_VERSION"),
            "csv_format": 1,
        },
        "seeds": {
            "root": cfg.seed,
            "per_size": per_size,
            "sbe": ctx.sbe_seed(),
        },
        "threads": threads,
        "wall_time_seconds": wall,
        "files": names,
    });
    let path = cfg.out.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))? + "\n")?;
    Ok(path)
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    potential: PotentialSpec,
    lambda: Vec<f64>,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let potential = PotentialSpec::builtin(cfg.potential.clone(), cfg.gamma_v)?;
        Ok(Self {
            cfg,
            potential,
            lambda: cfg.lambda(),
        })
    }

    fn out(&self) -> &Path {
        &self.cfg.out
    }

    fn size_seed(&self, n: usize) -> u64 {
        seed!(self.cfg.seed, "n", n)
    }

    fn sbe_seed(&self) -> u64 {
        seed!(self.cfg.seed, "sbe")
    }

    fn tensors(&self) -> Result<CouplingTensors> {
        CouplingTensors::compute(&self.potential, &self.lambda)
    }

    fn sim(&self, n: usize, record_times: Vec<f64>) -> Result<SimConfig> {
        let mut sim = SimConfig {
            potential: self.potential.clone(),
            n,
            beta: self.cfg.beta,
            lambda: self.lambda.clone(),
            t_end: self.cfg.t_end,
            dt: 1.0,
            record_times,
            seed: self.size_seed(n),
            replica: 0,
        };
        sim.dt = match self.cfg.dt {
            Some(dt) => dt,
            None => dt_max(&sim.measure()?, 1000, seed!(sim.seed, "dt"))?,
        };
        Ok(sim)
    }

    fn dispatch(&self) -> Result<Vec<PathBuf>> {
        match self.cfg.kind()? {
            Kind::Tensors => self.tensors_kind(),
            Kind::CheckPotential => self.check_potential(),
            Kind::Sample => self.sample(),
            Kind::Simulate => self.simulate(),
            Kind::Fields => self.fields(),
            Kind::BgTest => self.bg(),
            Kind::Sbe => self.sbe(),
            Kind::Compare => self.compare(),
            Kind::Sweep => match self.cfg.sweep.quantity {
                SweepQuantity::Qv => self.sweep_qv(),
                SweepQuantity::Bg => self.bg(),
            },
        }
    }

    fn tensors_kind(&self) -> Result<Vec<PathBuf>> {
        let t = self.tensors()?;
        let join = |xs: &[f64]| xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";");
        let mut table = Table::new(&[
            "potential",
            "d",
            "lambda",
            "gamma",
            "delta",
            "Lambda",
            "Xi",
            "constraint_residual",
            "frame_ok",
            "eta",
            "eta_prime",
            "seed",
        ]);
        let (eta, eta_prime) = t.frame.map_or((String::new(), String::new()), |f| (fmt_f64(f.eta), fmt_f64(f.eta_prime)));
        let lambda = join(&t.lambda);
        let (g, dl, lm, xi) = (
            join(t.gamma.as_slice()),
            join(t.delta.as_slice()),
            join(t.lambda_mat.as_slice()),
            join(t.xi.as_slice()),
        );
        table.row(vec![
            self.potential.name().into(),
            t.dim().into(),
            (&lambda).into(),
            (&g).into(),
            (&dl).into(),
            (&lm).into(),
            (&xi).into(),
            t.constraint_residual.into(),
            t.frame.is_some().into(),
            (&eta).into(),
            (&eta_prime).into(),
            self.cfg.seed.into(),
        ]);
        let mut files = vec![table.write(self.out(), "tensors.csv")?];
        let mut disc = Table::new(&["quantity", "quoted", "computed", "note"]);
        for d in &t.discrepancies {
            disc.row(vec![d.quantity.into(), d.quoted.into(), d.computed.into(), (&d.note).into()]);
        }
        files.push(disc.write(self.out(), "discrepancies.csv")?);
        if let Some(f) = &t.frame_failure {
            eprintln!("frame conditions fail: {}", f.detail);
        }
        Ok(files)
    }

    fn check_potential(&self) -> Result<Vec<PathBuf>> {
        let report = check_assumptions(&self.potential, &ProbeGrid::default());
        let mut table = Table::new(&["potential", "clause", "pass", "detail"]);
        for c in &report.clauses {
            table.row(vec![self.potential.name().into(), (&c.name).into(), c.pass.into(), (&c.detail).into()]);
        }
        let json_path = self.out().join("assumptions.json");
        std::fs::write(&json_path, serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))? + "\n")?;
        Ok(vec![table.write(self.out(), "assumptions.csv")?, json_path])
    }

    fn measure(&self, n: usize) -> Result<MeasureParams> {
        let beta = self.cfg.beta.unwrap_or(1.0 / (n as f64).sqrt());
        MeasureParams::new(&self.potential, beta, &self.lambda)
    }

    fn sample(&self) -> Result<Vec<PathBuf>> {
        let mut samples = Table::new(&["replica", "time", "sample", "species", "value", "n", "seed"]);
        let mut ibp = Table::new(&[
            "n", "seed", "functional", "coordinate", "lhs", "lhs_se", "rhs", "rhs_se", "residual", "combined_se", "pass",
        ]);
        for &n in &self.cfg.sizes {
            let params = self.measure(n)?;
            let batch = sample_sites(&params, self.cfg.sample.count, seed!(self.size_seed(n), "sample"))?;
            for (k, x) in batch.iter().enumerate() {
                for (i, v) in x.iter().enumerate() {
                    samples.row(vec![0u64.into(), 0.0.into(), k.into(), i.into(), (*v).into(), n.into(), self.cfg.seed.into()]);
                }
            }
            for i in 0..batch.d {
                for f in SiteFunctional::library(batch.d, i) {
                    for c in ibp_check(&batch, &f) {
                        ibp.row(vec![
                            n.into(),
                            self.cfg.seed.into(),
                            (&c.functional).into(),
                            c.coordinate.into(),
                            c.lhs.mean.into(),
                            c.lhs.se.into(),
                            c.rhs.mean.into(),
                            c.rhs.se.into(),
                            c.residual.into(),
                            c.combined_se.into(),
                            c.pass.into(),
                        ]);
                    }
                }
            }
        }
        Ok(vec![samples.write(self.out(), "samples.csv")?, ibp.write(self.out(), "ibp.csv")?])
    }

    fn simulate(&self) -> Result<Vec<PathBuf>> {
        let mut table = Table::new(&["replica", "time", "n", "seed", "conservation_drift", "lyapunov"]);
        let mut files = Vec::new();
        for &n in &self.cfg.sizes {
            let sim = self.sim(n, self.cfg.record_times())?;
            let trajs = (0..self.cfg.replicas)
                .into_par_iter()
                .map(|r| simulate(&SimConfig { replica: r, ..sim.clone() }))
                .collect::<Result<Vec<_>>>()?;
            for tr in &trajs {
                for rec in &tr.records {
                    table.row(vec![
                        tr.replica.into(),
                        rec.t.into(),
                        n.into(),
                        self.cfg.seed.into(),
                        rec.conservation_drift.into(),
                        rec.lyapunov.into(),
                    ]);
                }
                if let Some(last) = tr.records.last() {
                    let state = LatticeState::from_values(sim.measure()?.target().clone(), &self.lambda, last.state.clone(), 0)?;
                    let prefix = self.out().join(format!("snapshot_n{n}_r{}", tr.replica));
                    write_snapshot(&prefix, &state, last.t, self.cfg.seed)?;
                    files.push(prefix.with_extension("bin"));
                    files.push(prefix.with_extension("hdr"));
                }
            }
        }
        files.insert(0, table.write(self.out(), "simulate.csv")?);
        Ok(files)
    }

    fn fields(&self) -> Result<Vec<PathBuf>> {
        let tfs = self.cfg.test_function_list()?;
        let mut table = Table::new(&FIELD_HEADER);
        for &n in &self.cfg.sizes {
            let sim = self.sim(n, self.cfg.record_times())?;
            let options = FieldOptions {
                observe_dt: self.cfg.fields.observe_dt,
                windows: self.cfg.fields.windows.clone(),
                frame: self.cfg.fields.frame,
            };
            let exp = FieldExperiment::prepare(&sim, &tfs, options)?;
            for tr in exp.run_all(self.cfg.replicas)? {
                for row in tr.rows() {
                    table.row(vec![
                        row.replica.into(),
                        row.time.into(),
                        row.species.into(),
                        (&row.test_function).into(),
                        (&row.term).into(),
                        row.value.into(),
                        n.into(),
                        tr.f_n.into(),
                        self.cfg.seed.into(),
                    ]);
                }
            }
        }
        Ok(vec![table.write(self.out(), "fields.csv")?])
    }

    fn bg(&self) -> Result<Vec<PathBuf>> {
        let phi = TestFunction::from_name(&self.cfg.bg.test_function)?;
        let pair = (self.cfg.bg.pair[0], self.cfg.bg.pair[1]);
        let mut per = Table::new(&["replica", "time", "n", "seed", "window", "value"]);
        let mut summary = Table::new(&["n", "time", "seed", "window", "replicas", "mean", "se", "normalizer", "argmin"]);
        for &n in &self.cfg.sizes {
            let sim = self.sim(n, vec![self.cfg.t_end])?;
            let windows = self
                .cfg
                .bg
                .windows
                .clone()
                .unwrap_or_else(|| (0..).map(|k| 1usize << k).take_while(|&l| l <= n).collect());
            let exp = BgExperiment::prepare(&sim, phi.clone(), pair, windows, self.cfg.bg.observe_steps as f64 * sim.dt)?;
            let res = exp.run_all(self.cfg.replicas)?;
            for (r, vals) in res.per_replica.iter().enumerate() {
                for (l, v) in res.windows.iter().zip(vals) {
                    per.row(vec![r.into(), res.t_end.into(), n.into(), self.cfg.seed.into(), (*l).into(), (*v).into()]);
                }
            }
            let best = res.argmin();
            for (l, e) in res.windows.iter().zip(&res.stat) {
                summary.row(vec![
                    n.into(),
                    res.t_end.into(),
                    self.cfg.seed.into(),
                    (*l).into(),
                    self.cfg.replicas.into(),
                    e.mean.into(),
                    e.se.into(),
                    res.normalizer.into(),
                    (*l == best).into(),
                ]);
            }
        }
        Ok(vec![per.write(self.out(), "bg.csv")?, summary.write(self.out(), "bg_summary.csv")?])
    }

    fn sbe_config(&self, tensors: &CouplingTensors, record_times: Vec<f64>) -> SbeConfig {
        let modes = self.cfg.sbe.modes;
        let mut c = SbeConfig::matched(tensors, modes, self.cfg.t_end, 0.0, record_times, self.sbe_seed());
        c.dt = self.cfg.sbe.dt.unwrap_or_else(|| stable_dt(&c.coupling, modes));
        c
    }

    fn sbe_replicas(&self) -> u64 {
        self.cfg.sbe.replicas.unwrap_or(self.cfg.replicas)
    }

    fn sbe(&self) -> Result<Vec<PathBuf>> {
        let tfs = self.cfg.test_function_list()?;
        let cfg = self.sbe_config(&self.tensors()?, self.cfg.record_times());
        let mut table = Table::new(&FIELD_HEADER);
        for tr in solve_replicas(&cfg, self.sbe_replicas())? {
            let series = sbe_series(&tr, &tfs);
            for (k, t) in tr.times.iter().enumerate() {
                for (i, sp) in series.iter().enumerate() {
                    for (f, phi) in tfs.iter().enumerate() {
                        table.row(vec![
                            tr.replica.into(),
                            (*t).into(),
                            i.into(),
                            (&phi.name).into(),
                            "U".into(),
                            sp[f][k].into(),
                            cfg.modes.into(),
                            0.0.into(),
                            self.cfg.seed.into(),
                        ]);
                    }
                }
            }
        }
        Ok(vec![table.write(self.out(), "sbe.csv")?])
    }

    fn compare(&self) -> Result<Vec<PathBuf>> {
        let tfs = self.cfg.test_function_list()?;
        let tau = self.cfg.compare.tau;
        let steps = (self.cfg.t_end / tau).round() as usize;
        if ((steps as f64) * tau - self.cfg.t_end).abs() > 1e-9 {
            return Err(Error::Config("`t_end` must be a multiple of `compare.tau`".into()));
        }
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * tau).collect();
        let tensors = self.tensors()?;
        let scfg = self.sbe_config(&tensors, times.clone());
        let sbe: Vec<_> = solve_replicas(&scfg, self.sbe_replicas())?.iter().map(|t| sbe_series(t, &tfs)).collect();
        let mut pooled_name = tfs[0].clone();
        pooled_name.name = "pooled".into();
        let mut table = Table::new(&[
            "n",
            "modes",
            "seed",
            "test_function",
            "species",
            "lag",
            "lattice",
            "lattice_se",
            "sbe",
            "sbe_se",
            "relative_difference",
            "lattice_samples",
            "sbe_samples",
        ]);
        for &n in &self.cfg.sizes {
            let sim = self.sim(n, times.clone())?;
            let f_n = tensors.moving_frame(n)?;
            let center = centering(&sim.measure()?, sim.seed)?;
            let lat = (0..self.cfg.replicas)
                .into_par_iter()
                .map(|r| x_series(&SimConfig { replica: r, ..sim.clone() }, &tfs, f_n, &center))
                .collect::<Result<Vec<_>>>()?;
            let mut rows = compare_statistics(&lat, &sbe, &tfs, tau, &self.cfg.compare.lags)?;
            let counts = vec![(lat.len(), sbe.len()); rows.len()];
            let (pl, ps) = (pool_test_functions(&lat), pool_test_functions(&sbe));
            let pooled = compare_statistics(&pl, &ps, std::slice::from_ref(&pooled_name), tau, &self.cfg.compare.lags)?;
            let mut counts = counts;
            counts.extend(std::iter::repeat((pl.len(), ps.len())).take(pooled.len()));
            rows.extend(pooled);
            for (row, (nl, ns)) in rows.iter().zip(counts) {
                table.row(vec![
                    n.into(),
                    scfg.modes.into(),
                    self.cfg.seed.into(),
                    (&row.test_function).into(),
                    row.species.into(),
                    row.lag.into(),
                    row.lattice.mean.into(),
                    row.lattice.se.into(),
                    row.sbe.mean.into(),
                    row.sbe.se.into(),
                    row.relative_difference.into(),
                    nl.into(),
                    ns.into(),
                ]);
            }
        }
        Ok(vec![table.write(self.out(), "compare.csv")?])
    }

    fn sweep_qv(&self) -> Result<Vec<PathBuf>> {
        let tfs = self.cfg.test_function_list()?;
        let tensors = self.tensors()?;
        let t = self.cfg.t_end;
        let mut table = Table::new(&[
            "quantity", "n", "seed", "replica", "time", "test_function", "value", "target", "relative_error",
        ]);
        for &n in &self.cfg.sizes {
            let f_n = tensors.moving_frame(n)?;
            for phi in &tfs {
                let value = qv_estimate(n, phi, f_n, t) / t;
                let target = phi.derivative_l2_norm_sq();
                table.row(vec![
                    "qv".into(),
                    n.into(),
                    self.cfg.seed.into(),
                    0u64.into(),
                    t.into(),
                    (&phi.name).into(),
                    value.into(),
                    target.into(),
                    ((value - target).abs() / if target > 0.0 { target } else { 1.0 }).into(),
                ]);
            }
        }
        Ok(vec![table.write(self.out(), "sweep.csv")?])
    }
}
