//! Composite Gauss–Legendre quadrature against the single-site Gibbs density.

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_q`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=q {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if q == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = qf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[q - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[q - 1 - i] = wi;
    }
    (x, w)
}

const NODES: usize = 16;

/// Product-rule quadrature of the density `exp(-V_beta(u) + lambda.u)` on a box
/// centred at `lambda`, valid for `d <= 2`. Log-weights are kept so that
/// expectations never overflow.
#[derive(Clone, Debug)]
pub struct GibbsQuadrature {
    d: usize,
    points: Vec<f64>,
    /// Normalized probability weights.
    probs: Vec<f64>,
    pub z: f64,
    pub z_error: f64,
    pub half_width: f64,
}

impl GibbsQuadrature {
    /// Doubles the box (and panels) until `Z` settles to `rtol`. If the largest
    /// box is reached while increments are not shrinking, the measure is reported
    /// as ill-defined.
    pub fn build(p: &PotentialSpec, lambda: &[f64], rtol: f64) -> Result<Self> {
        let d = p.dim();
        if d > 2 {
            return Err(crate::error::invalid("tensor quadrature supports d <= 2"));
        }
        let mut half: f64 = 8.0;
        // the two-dimensional grid is capped to keep memory bounded
        let max_half = if d == 1 { 256.0 } else { 64.0 };
        let mut prev: Option<Self> = None;
        let mut last_increment = f64::INFINITY;
        loop {
            let panels = if d == 1 { 2.0 * half } else { (2.0 * half).min(32.0) };
            let cur = Self::on_box(p, lambda, half, panels as usize).map_err(|e| Error::IllDefinedMeasure {
                beta: p.beta(),
                detail: e.to_string(),
            })?;
            if let Some(old) = &prev {
                let diff = (cur.z - old.z).abs();
                if diff <= rtol * cur.z {
                    return Ok(Self { z_error: diff, ..cur });
                }
                if half >= max_half {
                    // a slowly decaying tail still shrinks the increments; a divergent one does not
                    if diff < 0.5 * last_increment {
                        return Ok(Self { z_error: diff, ..cur });
                    }
                    return Err(Error::IllDefinedMeasure {
                        beta: p.beta(),
                        detail: format!(
                            "partition function keeps growing with the truncation box (Z={:.6e} at half-width {half})",
                            cur.z
                        ),
                    });
                }
                last_increment = diff;
            }
            prev = Some(cur);
            half *= 2.0;
        }
    }

    fn on_box(p: &PotentialSpec, lambda: &[f64], half: f64, panels: usize) -> Result<Self> {
        let d = p.dim();
        let (gx, gw) = gauss_legendre(NODES);
        // one-dimensional composite rule on [-half, half]
        let h = 2.0 * half / panels as f64;
        let mut ax = Vec::with_capacity(panels * NODES);
        let mut aw = Vec::with_capacity(panels * NODES);
        for k in 0..panels {
            let a = -half + k as f64 * h;
            for (x, w) in gx.iter().zip(&gw) {
                ax.push(a + 0.5 * h * (x + 1.0));
                aw.push(0.5 * h * w);
            }
        }
        let m = ax.len();
        let total = m.pow(d as u32);
        let mut points = Vec::with_capacity(total * d);
        let mut logw = Vec::with_capacity(total);
        let mut u = vec![0.0; d];
        for flat in 0..total {
            let mut rest = flat;
            let mut lw = 0.0;
            for i in 0..d {
                let k = rest % m;
                rest /= m;
                u[i] = lambda[i] + ax[k];
                lw += aw[k].ln();
            }
            let lin: f64 = u.iter().zip(lambda).map(|(a, b)| a * b).sum();
            let v = p.value(&u);
            let l = lw - v + lin;
            if l.is_nan() || l == f64::INFINITY {
                return Err(Error::Domain { point: u.clone() });
            }
            points.extend_from_slice(&u);
            logw.push(l);
        }
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let probs: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
        let s: f64 = probs.iter().sum();
        let z = s * top.exp();
        if !z.is_finite() {
            return Err(Error::IllDefinedMeasure {
                beta: p.beta(),
                detail: format!("partition function overflows on half-width {half}"),
            });
        }
        Ok(Self {
            d,
            points,
            probs: probs.into_iter().map(|q| q / s).collect(),
            z,
            z_error: f64::NAN,
            half_width: half,
        })
    }

    /// `E[f(u)]` under the normalized density.
    pub fn expect(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.points
            .chunks_exact(self.d)
            .zip(&self.probs)
            .filter(|(_, q)| **q > 0.0)
            .map(|(x, q)| q * f(x))
            .sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.d).map(|i| self.expect(|x| x[i])).collect()
    }
}
