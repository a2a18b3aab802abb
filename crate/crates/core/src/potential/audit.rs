//! Sampled audit of the standing assumptions on a potential.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::seed::rng_from;
use crate::tensors;

use super::{numeric_derivative, DerivativeMode, PotentialSpec, MAX_ORDER};

/// A regular grid on `[-half_width, half_width]^d` plus random probes for
/// derivative cross-checks.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeGrid {
    pub half_width: f64,
    pub points_per_axis: usize,
    pub random_probes: usize,
    /// Random probes are drawn from `[-probe_width, probe_width]^d`.
    pub probe_width: f64,
    pub seed: u64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            half_width: 4.0,
            points_per_axis: 33,
            random_probes: 20,
            probe_width: 2.0,
            seed: 0,
        }
    }
}

impl ProbeGrid {
    pub fn new(half_width: f64, points_per_axis: usize) -> Self {
        Self {
            half_width,
            points_per_axis,
            ..Self::default()
        }
    }

    /// Grid with `points_per_axis` on each axis; `refine` adds the midpoints.
    fn points(&self, d: usize, refine: bool) -> Vec<Vec<f64>> {
        let m = if refine { 2 * self.points_per_axis - 1 } else { self.points_per_axis };
        let axis: Vec<f64> = (0..m)
            .map(|k| -self.half_width + 2.0 * self.half_width * k as f64 / (m - 1) as f64)
            .collect();
        let total = m.pow(d as u32);
        (0..total)
            .map(|mut flat| {
                let mut p = vec![0.0; d];
                for slot in p.iter_mut() {
                    *slot = axis[flat % m];
                    flat /= m;
                }
                p
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Clause {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Outcome of [`check_assumptions`]. All residual fields are finite and non-negative.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub potential: String,
    pub mode: DerivativeMode,
    /// `|V(0)|`, `max_i |d_i V(0)|`, `max_ij |d_ij V(0) - delta_ij|`.
    pub normalization_residuals: [f64; 3],
    pub normalization_tol: f64,
    pub constraint_residual: f64,
    pub min_hessian_eigenvalue: f64,
    pub min_hessian_point: Vec<f64>,
    pub lyapunov_c1: f64,
    pub lyapunov_c2: Vec<f64>,
    /// Smallest `C1 (V + 1) + C2.u - Laplacian V` over the refined grid and random probes.
    pub lyapunov_min_margin: f64,
    pub growth_max: f64,
    pub growth_interior_max: f64,
    pub growth_shell_max: f64,
    /// Largest relative disagreement of analytic and finite-difference derivatives.
    pub derivative_mismatch: f64,
    pub clauses: Vec<Clause>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn passes(&self, name: &str) -> bool {
        self.clause(name).is_some_and(|c| c.pass)
    }

    pub fn convex(&self) -> bool {
        self.passes("convexity")
    }
}

/// Audits normalization, the algebraic constraint, convexity, the Lyapunov
/// bound and exponential growth on a grid. Never fails: problems are clauses.
pub fn check_assumptions(p: &PotentialSpec, grid: &ProbeGrid) -> AssumptionReport {
    let d = p.dim();
    let analytic = p.mode() == DerivativeMode::Analytic;
    let tol = if analytic { 1e-8 } else { 1e-4 };
    let origin = vec![0.0; d];
    let mut clauses = Vec::new();

    let fin = |v: f64| if v.is_finite() { v } else { f64::INFINITY };

    // normalization
    let v0 = p.value(&origin).abs();
    let g0 = p.eval_derivatives(&origin, 1).map(|t| t.max_abs()).unwrap_or(f64::INFINITY);
    let h0 = p
        .eval_derivatives(&origin, 2)
        .map(|t| {
            let eye = crate::tensor::SymTensor::from_fn(d, 2, |i| if i[0] == i[1] { 1.0 } else { 0.0 });
            t.max_abs_diff(&eye)
        })
        .unwrap_or(f64::INFINITY);
    let norm = [fin(v0), fin(g0), fin(h0)];
    let norm_ok = norm.iter().all(|r| *r <= tol);
    clauses.push(Clause {
        name: "normalization".into(),
        pass: norm_ok,
        detail: format!("|V(0)|={:.3e} |grad|={:.3e} |H-I|={:.3e} tol={tol:.0e}", norm[0], norm[1], norm[2]),
    });

    // algebraic constraint on the third derivatives at the origin
    let constraint = match tensors::gamma_delta(p) {
        Ok((gamma, _)) => fin(tensors::check_algebraic_constraint(&gamma)),
        Err(_) => f64::INFINITY,
    };
    let ctol = if analytic { 1e-10 } else { 1e-4 };
    clauses.push(Clause {
        name: "algebraic_constraint".into(),
        pass: constraint <= ctol,
        detail: format!("max residual {constraint:.3e}"),
    });

    let pts = grid.points(d, false);
    let refined = grid.points(d, true);

    // convexity
    let mut min_eig = f64::INFINITY;
    let mut min_pt = origin.clone();
    for x in &pts {
        let e = match p.hessian(x) {
            Ok(h) => {
                let m = DMatrix::from_row_slice(d, d, h.as_slice());
                SymmetricEigen::new(m).eigenvalues.min()
            }
            Err(_) => f64::NEG_INFINITY,
        };
        if e < min_eig {
            min_eig = e;
            min_pt = x.clone();
        }
    }
    let convex_tol = if analytic { 1e-9 } else { 1e-4 };
    clauses.push(Clause {
        name: "convexity".into(),
        pass: min_eig >= -convex_tol,
        detail: format!("min Hessian eigenvalue {min_eig:.6} at {min_pt:?}"),
    });

    // Lyapunov: Laplacian V <= C1 (V + 1) + C2.u, fitted with C2 = 0
    let laplacian = |x: &[f64]| -> f64 {
        p.hessian(x)
            .map(|h| (0..d).map(|i| h.get(&[i, i])).sum())
            .unwrap_or(f64::INFINITY)
    };
    // Fit on the refined grid, verify on it and on random interior points. A ratio
    // still rising at the edge of the box means no finite C1 works globally.
    let mut ratio: f64 = 0.0;
    let mut edge_ratio: f64 = 0.0;
    let mut inner_ratio: f64 = 0.0;
    let mut positive = true;
    for x in &refined {
        let base = p.value(x) + 1.0;
        if !(base > 0.0) {
            positive = false;
            continue;
        }
        let r = laplacian(x) / base;
        ratio = ratio.max(r);
        let inf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if inf >= 0.75 * grid.half_width {
            edge_ratio = edge_ratio.max(r);
        } else {
            inner_ratio = inner_ratio.max(r);
        }
    }
    let c1 = (1.25 * ratio).max(1e-6);
    let c2 = vec![0.0; d];
    let mut rng = rng_from(crate::seed!(grid.seed, "lyapunov"));
    let extra: Vec<Vec<f64>> = (0..50 * grid.random_probes.max(1))
        .map(|_| (0..d).map(|_| rng.random_range(-grid.half_width..=grid.half_width)).collect())
        .collect();
    let margin = refined
        .iter()
        .chain(&extra)
        .map(|x| c1 * (p.value(x) + 1.0) - laplacian(x))
        .fold(f64::INFINITY, f64::min);
    let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
    let bounded = edge_ratio <= inner_ratio.max(1e-12) * (1.0 + 1e-9);
    clauses.push(Clause {
        name: "lyapunov".into(),
        pass: positive && margin >= 0.0 && c1.is_finite() && bounded,
        detail: format!(
            "C1={c1:.6} C2=0 min margin {margin:.3e}; edge ratio {edge_ratio:.4} vs inner {inner_ratio:.4}"
        ),
    });

    // exponential growth of derivatives up to order five
    let gv = p.gamma_v();
    let mut shell: f64 = 0.0;
    let mut interior: f64 = 0.0;
    let mut bad = false;
    for x in &pts {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let inf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let w = (-gv * r).exp();
        let mut m: f64 = 0.0;
        for k in 0..=MAX_ORDER {
            match p.eval_derivatives(x, k) {
                Ok(t) => m = m.max(w * t.max_abs()),
                Err(_) => bad = true,
            }
        }
        if inf <= 0.5 * grid.half_width {
            interior = interior.max(m);
        }
        if inf >= 0.75 * grid.half_width {
            shell = shell.max(m);
        }
    }
    let growth_max = shell.max(interior);
    clauses.push(Clause {
        name: "exponential_growth".into(),
        pass: !bad && shell <= 2.0 * interior + 1e-12,
        detail: format!("gamma_V={gv} shell max {shell:.4e} interior max {interior:.4e}"),
    });

    // analytic vs finite differences
    let mut mismatch: f64 = 0.0;
    if analytic && grid.random_probes > 0 {
        let mut rng = rng_from(grid.seed);
        for _ in 0..grid.random_probes {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-grid.probe_width..=grid.probe_width)).collect();
            for k in 1..=4 {
                let (Ok(a), n) = (p.eval_derivatives(&x, k), numeric_derivative(&|z| p.value(z), &x, k)) else {
                    mismatch = f64::INFINITY;
                    continue;
                };
                for (av, nv) in a.as_slice().iter().zip(n.as_slice()) {
                    mismatch = mismatch.max(fin((av - nv).abs() / (1.0 + av.abs())));
                }
            }
        }
        clauses.push(Clause {
            name: "derivative_agreement".into(),
            pass: mismatch <= 1e-5,
            detail: format!("max relative mismatch {mismatch:.3e} over {} probes", grid.random_probes),
        });
    }

    AssumptionReport {
        potential: p.name().to_owned(),
        mode: p.mode(),
        normalization_residuals: norm,
        normalization_tol: tol,
        constraint_residual: constraint,
        min_hessian_eigenvalue: min_eig,
        min_hessian_point: min_pt,
        lyapunov_c1: c1,
        lyapunov_c2: c2,
        lyapunov_min_margin: margin,
        growth_max,
        growth_interior_max: interior,
        growth_shell_max: shell,
        derivative_mismatch: mismatch,
        clauses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;

    #[test]
    fn toda_passes_everything() {
        let r = check_assumptions(&PotentialSpec::toda(), &ProbeGrid::default());
        assert!(r.all_pass(), "{:#?}", r.clauses);
    }

    #[test]
    fn fpu_convexity_threshold() {
        let ok = check_assumptions(&PotentialSpec::fpu_alpha(0.5), &ProbeGrid::default());
        assert!(ok.convex(), "{:?}", ok.clause("convexity"));
        assert!((ok.min_hessian_eigenvalue - 0.25).abs() < 1e-3);
        let bad = check_assumptions(&PotentialSpec::fpu_alpha(0.8), &ProbeGrid::default());
        assert!(!bad.convex());
    }

    #[test]
    fn unnormalized_potential_flagged() {
        let p = PotentialSpec::from_fn(1, 1.0, "shifted", |u| 0.5 * u[0] * u[0] + 0.1).unwrap();
        let r = check_assumptions(&p, &ProbeGrid::new(2.0, 9));
        assert!(!r.passes("normalization"));
        assert!(r.passes("convexity"));
    }

    #[test]
    fn weak_growth_constant_flagged_for_toda() {
        let p = PotentialSpec::builtin(crate::potential::PotentialKind::Toda, 0.5).unwrap();
        let r = check_assumptions(&p, &ProbeGrid::default());
        assert!(!r.passes("exponential_growth"));
    }

    #[test]
    fn residuals_are_non_negative() {
        for p in [PotentialSpec::quadratic(2), PotentialSpec::family(1.0, 0.3), PotentialSpec::diagonal(3, 0.2, 0.5)] {
            let r = check_assumptions(&p, &ProbeGrid::new(3.0, 9));
            assert!(r.normalization_residuals.iter().all(|v| *v >= 0.0 && v.is_finite()));
            assert!(r.constraint_residual >= 0.0 && r.derivative_mismatch >= 0.0);
            assert!(r.all_pass(), "{}: {:#?}", p.name(), r.clauses);
        }
    }
}
