//! Moving-frame fluctuation fields, the terms of their martingale decomposition,
//! local-average quadratic fields and the empirical Boltzmann–Gibbs and Taylor
//! remainder tests.
//!
//! With `phi^n_j(t) = phi((j - f_n t) / n)` the field is
//! `X_t(phi) = n^{-1/2} sum_j ubar_j(t) phi^n_j(t)`. Its drift splits exactly as
//! `S + (antisymmetric part)`, and the antisymmetric part is compared with the
//! quadratic term `B`; whatever is left over is the remainder `R`.

mod bg;
mod decomposition;
mod pairing;
mod testfn;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::gibbs::{gauss_legendre, MeasureParams, SiteSampleBatch};
use crate::lattice::{run, LatticeState, Observer, SimConfig, StepPlan, Trajectory};
use crate::tensor::SymTensor;
use crate::tensors::CouplingTensors;

pub use bg::{BgExperiment, BgResult};
pub use decomposition::{FieldExperiment, FieldOptions, FieldRow, FieldTrajectory, Term};
pub use pairing::{sample, Spectrum, Stencil, Twiddles};
pub use testfn::{Mode, TestFunction};

/// Sites are labelled `1..=n` and site `j` is stored at index `j - 1`, so the
/// argument `(j - f_n t) / n` at index `m` is `(m - (f_n t - 1)) / n`.
pub fn lattice_shift(f_n: f64, t: f64) -> f64 {
    f_n * t - 1.0
}

fn pair_species(values: &[f64], d: usize, i: usize, center: f64, seq: &[f64]) -> f64 {
    values
        .iter()
        .skip(i)
        .step_by(d)
        .zip(seq)
        .map(|(u, p)| (u - center) * p)
        .sum()
}

/// `X^{n,i}_t(phi) = n^{-1/2} sum_j (u^i_j - center^i) phi((j - f_n t) / n)` per species.
pub fn field_x(state: &LatticeState, t: f64, phi: &TestFunction, f_n: f64, center: &[f64]) -> Vec<f64> {
    let seq = sample(phi, state.n, lattice_shift(f_n, t), Stencil::Point);
    let scale = 1.0 / (state.n as f64).sqrt();
    (0..state.d)
        .map(|i| scale * pair_species(&state.u, state.d, i, center[i], &seq))
        .collect()
}

/// The same pairing with `Wbar^i_j = d_i V_beta(u_j) - lambda^i` in place of `ubar`.
pub fn field_w(state: &LatticeState, t: f64, phi: &TestFunction, f_n: f64) -> Vec<f64> {
    let seq = sample(phi, state.n, lattice_shift(f_n, t), Stencil::Point);
    let w = state.w_values();
    let scale = 1.0 / (state.n as f64).sqrt();
    (0..state.d)
        .map(|i| scale * pair_species(&w, state.d, i, state.lambda[i], &seq))
        .collect()
}

/// Forward window means `l^{-1} sum_{k<l} v_{j+k}` on the torus.
pub fn local_average(values: &[f64], ell: usize) -> Result<Vec<f64>> {
    let n = values.len();
    if ell == 0 || ell > n {
        return Err(invalid(format!("window {ell} must lie in 1..={n}")));
    }
    let mut prefix = Vec::with_capacity(n + ell + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for k in 0..n + ell {
        acc += values[k % n];
        prefix.push(acc);
    }
    let inv = 1.0 / ell as f64;
    Ok((0..n).map(|j| (prefix[j + ell] - prefix[j]) * inv).collect())
}

/// `int_0^t sum_j ((M phi)((j - f_n s) / n))^2 ds`. The lattice sum is 1-periodic
/// in the shift `f_n s`, so whole periods are integrated once by Gauss–Legendre.
pub fn shifted_square_integral(n: usize, phi: &TestFunction, f_n: f64, t: f64, stencil: Stencil) -> f64 {
    let span = (f_n * t).abs();
    let sign = if f_n < 0.0 { -1.0 } else { 1.0 };
    let g = |c: f64| sample(phi, n, sign * c, stencil).iter().map(|v| v * v).sum::<f64>();
    if span == 0.0 {
        return t * g(0.0);
    }
    let (x, w) = gauss_legendre(16);
    let over = |a: f64, b: f64| -> f64 {
        let h = 0.5 * (b - a);
        x.iter().zip(&w).map(|(x, w)| w * h * g(a + h * (x + 1.0))).sum()
    };
    let periods = span.floor();
    let rest = span - periods;
    let whole = if periods > 0.0 { periods * over(0.0, 1.0) } else { 0.0 };
    let part = if rest > 0.0 { over(0.0, rest) } else { 0.0 };
    (whole + part) / f_n.abs()
}

struct SeriesRecorder<'a> {
    tfs: &'a [TestFunction],
    f_n: f64,
    center: &'a [f64],
    out: Vec<Vec<Vec<f64>>>,
}

impl Observer for SeriesRecorder<'_> {
    fn observe(&mut self, s: &LatticeState, t: f64, record: bool) -> Result<()> {
        if record {
            for (f, phi) in self.tfs.iter().enumerate() {
                for (i, x) in field_x(s, t, phi, self.f_n, self.center).into_iter().enumerate() {
                    self.out[i][f].push(x);
                }
            }
        }
        Ok(())
    }
}

/// `[species][tf][time]` values of `X_t(phi)` at the recording times of one
/// stationary replica, without keeping the configurations.
pub fn x_series(sim: &SimConfig, tfs: &[TestFunction], f_n: f64, center: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
    let params = sim.measure()?;
    if center.len() != params.dim() {
        return Err(invalid("centering vector has the wrong dimension"));
    }
    let mut state = LatticeState::init_stationary_with(sim.n, &params, sim.replica_seed(), Some(true))?;
    let times = if sim.record_times.is_empty() { vec![0.0] } else { sim.record_times.clone() };
    let plan = StepPlan::new(sim.n, sim.t_end, sim.dt, times)?;
    let mut rec = SeriesRecorder {
        tfs,
        f_n,
        center,
        out: vec![vec![Vec::new(); tfs.len()]; params.dim()],
    };
    run(&mut state, &plan, &mut rec)?;
    Ok(rec.out)
}

/// `<M>_t = n int_0^t sum_j (phi^n_j(s) - phi^n_{j-1}(s))^2 ds`.
pub fn qv_estimate(n: usize, phi: &TestFunction, f_n: f64, t: f64) -> f64 {
    n as f64 * shifted_square_integral(n, phi, f_n, t, Stencil::Backward)
}

/// Mean of the single-site measure used to centre the fields: quadrature for
/// `d <= 2`, self-normalized importance sampling otherwise.
pub fn centering(params: &MeasureParams, seed: u64) -> Result<Vec<f64>> {
    let d = params.dim();
    if d <= 2 {
        return Ok(params.quadrature()?.mean());
    }
    let mut rng = crate::seed::rng_from(crate::seed!(seed, "centering"));
    let m = 1 << 18;
    let mut x = vec![0.0; d];
    let mut logs = Vec::with_capacity(m);
    let mut pts = Vec::with_capacity(m * d);
    for _ in 0..m {
        let mut q = 0.0;
        for (xi, l) in x.iter_mut().zip(&params.lambda) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *xi = l + z;
            q += 0.5 * z * z;
        }
        logs.push(params.log_density(&x) + q);
        pts.extend_from_slice(&x);
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut mean = vec![0.0; d];
    let mut total = 0.0;
    for (l, p) in logs.iter().zip(pts.chunks_exact(d)) {
        let w = (l - top).exp();
        total += w;
        for (a, b) in mean.iter_mut().zip(p) {
            *a += w * b;
        }
    }
    Ok(mean.into_iter().map(|a| a / total).collect())
}

/// `sum_j sum_{(a, b, c)} c ->u^a_j ->u^b_j grad_j` with centred window means.
fn window_product_pairing(
    u: &[f64],
    d: usize,
    ell: usize,
    weights: &[(usize, usize, f64)],
    center: &[f64],
    grad: &[f64],
) -> Result<f64> {
    let n = u.len() / d;
    let mut avgs = Vec::with_capacity(d);
    for i in 0..d {
        let v: Vec<f64> = u.iter().skip(i).step_by(d).map(|x| x - center[i]).collect();
        avgs.push(local_average(&v, ell)?);
    }
    let mut out = 0.0;
    for j in 0..n {
        let mut q = 0.0;
        for &(a, b, c) in weights {
            q += c * avgs[a][j] * avgs[b][j];
        }
        out += q * grad[j];
    }
    Ok(out)
}

/// `A^{eps,(i1,i2)}_{0,t}(phi) = int_0^t sum_j ->u^{i1}_j ->u^{i2}_j grad^n phi^n_j ds`
/// with windows of `l = eps n` sites, by the trapezoid rule over the recorded times.
pub fn quadratic_field_a(
    traj: &Trajectory,
    eps: f64,
    phi: &TestFunction,
    pair: (usize, usize),
    center: &[f64],
    f_n: f64,
) -> Result<Vec<(f64, f64)>> {
    let n = traj.n;
    let ell = (eps * n as f64).round() as usize;
    if !(eps > 0.0) || ((eps * n as f64) - ell as f64).abs() > 1e-9 || ell < 2 {
        return Err(invalid(format!("eps * n = {} must be an integer window of at least 2", eps * n as f64)));
    }
    if ell > n {
        return Err(invalid(format!("window {ell} exceeds the lattice size {n}")));
    }
    if pair.0 >= traj.d || pair.1 >= traj.d {
        return Err(invalid("species index out of range"));
    }
    let weights = [(pair.0, pair.1, 1.0)];
    let mut out = Vec::with_capacity(traj.records.len());
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for r in &traj.records {
        let grad = sample(phi, n, lattice_shift(f_n, r.t), Stencil::Gradient);
        let rate = window_product_pairing(&r.state, traj.d, ell, &weights, center, &grad)?;
        if let Some((t0, r0)) = prev {
            acc += 0.5 * (r.t - t0) * (rate + r0);
        }
        prev = Some((r.t, rate));
        out.push((r.t, acc));
    }
    Ok(out)
}

/// Largest `n^{3/2} |W^i - u^i - n^{-1/2} gamma^i uu - n^{-1} delta^i uuu| e^{-2 gamma_V |u|}`
/// over the samples, which must come from `nu_n` with `beta = n^{-1/2}`.
pub fn taylor_remainder_test(batch: &SiteSampleBatch, n: usize, tensors: &CouplingTensors) -> Result<f64> {
    let d = batch.d;
    let target = &batch.potential;
    let beta = 1.0 / (n as f64).sqrt();
    if (target.beta() - beta).abs() > 1e-12 * beta {
        return Err(invalid(format!("samples are at beta = {}, expected n^(-1/2) = {beta}", target.beta())));
    }
    let gv = target.gamma_v();
    let mut w = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for u in batch.iter() {
        target.gradient(u, &mut w);
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let damp = (-2.0 * gv * norm).exp();
        for i in 0..d {
            let r = w[i] - u[i] - beta * contract(&tensors.gamma, i, u) - beta * beta * contract(&tensors.delta, i, u);
            worst = worst.max((r / (beta * beta * beta)).abs() * damp);
        }
    }
    Ok(worst)
}

/// `T^i_{k1..km} u^{k1} .. u^{km}` for a tensor of order `m + 1`.
fn contract(t: &SymTensor, i: usize, u: &[f64]) -> f64 {
    let d = u.len();
    let order = t.order();
    let rest = order - 1;
    let total = d.pow(rest as u32);
    let mut idx = vec![0usize; order];
    idx[0] = i;
    let mut out = 0.0;
    for flat in 0..total {
        let mut r = flat;
        let mut prod = 1.0;
        for slot in idx.iter_mut().skip(1) {
            *slot = r % d;
            r /= d;
            prod *= u[*slot];
        }
        out += t.get(&idx) * prod;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;

    #[test]
    fn local_average_wraps() {
        assert_eq!(local_average(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), vec![1.5, 2.5, 3.5, 2.5]);
        assert_eq!(local_average(&[1.0, 2.0], 1).unwrap(), vec![1.0, 2.0]);
        assert!(local_average(&[1.0], 2).is_err());
    }

    #[test]
    fn field_examples() {
        let s = LatticeState::from_values(PotentialSpec::quadratic(1), &[0.0], vec![1.0, -1.0], 0).unwrap();
        let x = field_x(&s, 0.0, &TestFunction::cos(1), 0.0, &[0.0]);
        assert!((x[0] + 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(field_w(&s, 0.0, &TestFunction::cos(1), 0.0), x);
    }

    #[test]
    fn qv_small_lattice() {
        // n * sum_j (cos(pi j / 2) - cos(pi (j - 1) / 2))^2 = 4 * 4
        assert!((qv_estimate(4, &TestFunction::cos(1), 0.0, 1.0) - 16.0).abs() < 1e-12);
        assert_eq!(qv_estimate(16, &TestFunction::constant(2.0), 3.0, 1.0), 0.0);
    }

    #[test]
    fn contraction_matches_explicit_sum() {
        let mut g = SymTensor::zeros(2, 3);
        g.set_symmetric(&[0, 0, 1], 0.5);
        g.set_symmetric(&[1, 1, 1], 2.0);
        let u = [0.3, -0.7];
        // gamma^0_{kl} u u = 2 * 0.5 * u0 u1 ; gamma^1 = 0.5 u0^2 + 2 u1^2
        assert!((contract(&g, 0, &u) - 2.0 * 0.5 * 0.3 * -0.7).abs() < 1e-15);
        assert!((contract(&g, 1, &u) - (0.5 * 0.09 + 2.0 * 0.49)).abs() < 1e-15);
    }
}
