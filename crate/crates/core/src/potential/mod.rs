//! Single-site potentials `V: R^d -> R`, their derivatives up to order five,
//! and the `V_beta(x) = beta^{-2} V(beta x)` rescaling.

mod audit;
mod builtin;
mod numeric;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::SymTensor;

pub use audit::{check_assumptions, AssumptionReport, Clause, ProbeGrid};
pub use builtin::{Polynomial, Quadratic, Toda};
pub use numeric::{numeric_derivative, numeric_step};

pub const MAX_ORDER: usize = 5;
/// Largest supported number of species.
pub const MAX_DIM: usize = 8;

/// An unscaled single-site potential.
///
/// Implementors must provide the value; analytic derivative tensors are
/// optional and fall back to finite differences.
pub trait Potential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, u: &[f64]) -> f64;

    /// Analytic symmetric derivative tensor of the given order at `u`.
    fn derivative(&self, _u: &[f64], _order: usize) -> Option<SymTensor> {
        None
    }

    fn has_analytic_derivatives(&self) -> bool {
        false
    }

    /// Gradient of `V`. The default uses finite differences of [`Potential::value`].
    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        match self.derivative(u, 1) {
            Some(t) => out.copy_from_slice(t.as_slice()),
            None => {
                let t = numeric_derivative(&|x| self.value(x), u, 1);
                out.copy_from_slice(t.as_slice());
            }
        }
    }

    /// `grad V_beta` at every site of a site-major buffer (`sites.len() = n * d`).
    fn gradient_sites(&self, beta: f64, sites: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut buf = [0.0; MAX_DIM];
        let mut g = [0.0; MAX_DIM];
        for (x, w) in sites.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            for (b, xi) in buf.iter_mut().zip(x) {
                *b = beta * xi;
            }
            self.gradient(&buf[..d], &mut g[..d]);
            for (wi, gi) in w.iter_mut().zip(&g[..d]) {
                *wi = gi / beta;
            }
        }
    }
}

/// How derivatives are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    Analytic,
    Numeric,
}

/// Built-in potential families, as selected by configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialKind {
    /// `|u|^2 / 2`.
    Quadratic { d: usize },
    /// `e^{-u} - 1 + u`.
    Toda,
    /// `u^2/2 + alpha u^3 + u^4/4`.
    FpuAlpha { alpha: f64 },
    /// `sum_i F(u^i)` with `F(x) = x^2/2 + (c3/3) x^3 + (c4/4) x^4`, so that the
    /// coupling tensors are diagonal with entries `c3` and `c4`.
    Diagonal { d: usize, c3: f64, c4: f64 },
    /// Two-species family with third-order couplings proportional to
    /// `(p(p^2+3), p^2-1, p(p^2-1), -3p^2-1)` and quartic part
    /// `(1/2) sum_k (gamma^k_{ij} u^i u^j)^2`.
    Family { p: f64, scale: f64 },
}

impl PotentialKind {
    pub fn build(&self) -> Result<Arc<dyn Potential>> {
        Ok(match *self {
            PotentialKind::Quadratic { d } => {
                check_dim(d)?;
                Arc::new(Quadratic::new(d))
            }
            PotentialKind::Toda => Arc::new(Toda),
            PotentialKind::FpuAlpha { alpha } => Arc::new(Polynomial::fpu_alpha(alpha)),
            PotentialKind::Diagonal { d, c3, c4 } => {
                check_dim(d)?;
                Arc::new(Polynomial::diagonal(d, c3, c4))
            }
            PotentialKind::Family { p, scale } => Arc::new(Polynomial::family(p, scale)),
        })
    }

    pub fn dim(&self) -> usize {
        match *self {
            PotentialKind::Quadratic { d } | PotentialKind::Diagonal { d, .. } => d,
            PotentialKind::Toda | PotentialKind::FpuAlpha { .. } => 1,
            PotentialKind::Family { .. } => 2,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            PotentialKind::Quadratic { d } => format!("quadratic(d={d})"),
            PotentialKind::Toda => "toda".into(),
            PotentialKind::FpuAlpha { alpha } => format!("fpu_alpha(alpha={alpha})"),
            PotentialKind::Diagonal { d, c3, c4 } => format!("diagonal(d={d},c3={c3},c4={c4})"),
            PotentialKind::Family { p, scale } => format!("family(p={p},scale={scale})"),
        }
    }

    /// Third-order couplings `(a, b, c, d)` of the two-species family.
    pub fn family_couplings(p: f64, scale: f64) -> [f64; 4] {
        [
            scale * p * (p * p + 3.0),
            scale * (p * p - 1.0),
            scale * p * (p * p - 1.0),
            scale * (-3.0 * p * p - 1.0),
        ]
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(invalid(format!("dimension {d} outside 1..={MAX_DIM}")));
    }
    Ok(())
}

/// A potential together with its inverse temperature, growth constant and name.
///
/// Immutable; cloning shares the underlying evaluator.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    base: Arc<dyn Potential>,
    beta: f64,
    gamma_v: f64,
    name: String,
    kind: Option<PotentialKind>,
    mode: DerivativeMode,
}

impl PotentialSpec {
    pub fn new(base: Arc<dyn Potential>, gamma_v: f64, name: impl Into<String>) -> Result<Self> {
        if !(gamma_v > 0.0 && gamma_v.is_finite()) {
            return Err(invalid(format!("growth constant must be positive, got {gamma_v}")));
        }
        check_dim(base.dim())?;
        let mode = if base.has_analytic_derivatives() {
            DerivativeMode::Analytic
        } else {
            DerivativeMode::Numeric
        };
        Ok(Self {
            base,
            beta: 1.0,
            gamma_v,
            name: name.into(),
            kind: None,
            mode,
        })
    }

    pub fn builtin(kind: PotentialKind, gamma_v: f64) -> Result<Self> {
        let mut spec = Self::new(kind.build()?, gamma_v, kind.label())?;
        spec.kind = Some(kind);
        Ok(spec)
    }

    pub fn quadratic(d: usize) -> Self {
        Self::builtin(PotentialKind::Quadratic { d }, 1.0).expect("valid dimension")
    }

    pub fn toda() -> Self {
        Self::builtin(PotentialKind::Toda, 1.0).expect("valid")
    }

    pub fn fpu_alpha(alpha: f64) -> Self {
        Self::builtin(PotentialKind::FpuAlpha { alpha }, 1.0).expect("valid")
    }

    pub fn diagonal(d: usize, c3: f64, c4: f64) -> Self {
        Self::builtin(PotentialKind::Diagonal { d, c3, c4 }, 1.0).expect("valid dimension")
    }

    pub fn family(p: f64, scale: f64) -> Self {
        Self::builtin(PotentialKind::Family { p, scale }, 1.0).expect("valid")
    }

    /// Wraps a user evaluator; derivatives are taken numerically.
    pub fn from_fn(
        dim: usize,
        gamma_v: f64,
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(Arc::new(FnPotential { dim, f: Box::new(f) }), gamma_v, name)
    }

    /// Forces finite-difference derivatives even when analytic ones exist.
    pub fn with_numeric_derivatives(mut self) -> Self {
        self.mode = DerivativeMode::Numeric;
        self
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma_v(&self) -> f64 {
        self.gamma_v
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> Option<&PotentialKind> {
        self.kind.as_ref()
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    /// `V_beta(x) = beta^{-2} V(beta x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        if self.beta == 1.0 {
            return self.base.value(x);
        }
        let mut buf = [0.0; MAX_DIM];
        let y = self.scaled(x, &mut buf);
        self.base.value(y) / (self.beta * self.beta)
    }

    /// `grad V_beta(x) = beta^{-1} grad V(beta x)`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self.mode {
            DerivativeMode::Analytic => {
                let mut buf = [0.0; MAX_DIM];
                let y = self.scaled(x, &mut buf);
                self.base.gradient(y, out);
                out.iter_mut().for_each(|g| *g /= self.beta);
            }
            DerivativeMode::Numeric => {
                let t = numeric_derivative(&|z| self.value(z), x, 1);
                out.copy_from_slice(t.as_slice());
            }
        }
    }

    /// `grad V_beta` at every site of a site-major buffer.
    pub fn gradient_sites(&self, sites: &[f64], out: &mut [f64]) {
        debug_assert_eq!(sites.len(), out.len());
        match self.mode {
            DerivativeMode::Analytic => self.base.gradient_sites(self.beta, sites, out),
            DerivativeMode::Numeric => {
                let d = self.dim();
                for (x, w) in sites.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                    self.gradient(x, w);
                }
            }
        }
    }

    /// Hessian of `V_beta` at `x` as a `d x d` row-major tensor.
    pub fn hessian(&self, x: &[f64]) -> Result<SymTensor> {
        self.eval_derivatives(x, 2)
    }

    /// Full symmetric derivative tensor of `V_beta` of the given order at `point`.
    ///
    /// The k-th derivative of `V_beta` at `x` is `beta^{k-2} (d^k V)(beta x)`.
    pub fn eval_derivatives(&self, point: &[f64], order: usize) -> Result<SymTensor> {
        if order > MAX_ORDER {
            return Err(invalid(format!("derivative order {order} exceeds {MAX_ORDER}")));
        }
        if point.len() != self.dim() {
            return Err(invalid(format!(
                "point has {} coordinates, potential has {}",
                point.len(),
                self.dim()
            )));
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain { point: point.to_vec() });
        }
        let t = match self.mode {
            DerivativeMode::Analytic => {
                let mut buf = [0.0; MAX_DIM];
                let y = self.scaled(point, &mut buf);
                let raw = self
                    .base
                    .derivative(y, order)
                    .expect("analytic mode requires analytic derivatives");
                raw.scale(self.beta.powi(order as i32 - 2))
            }
            DerivativeMode::Numeric => numeric_derivative(&|z| self.value(z), point, order),
        };
        if t.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain { point: point.to_vec() });
        }
        Ok(t)
    }

    /// `V_beta` for the given `beta`, composed with any existing scaling.
    pub fn rescale(&self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid(format!("beta must be positive and finite, got {beta}")));
        }
        let mut out = self.clone();
        out.beta = self.beta * beta;
        Ok(out)
    }

    /// The same potential at `beta = 1`.
    pub fn unscaled(&self) -> Self {
        let mut out = self.clone();
        out.beta = 1.0;
        out
    }

    fn scaled<'a>(&self, x: &[f64], buf: &'a mut [f64; MAX_DIM]) -> &'a [f64] {
        let d = x.len();
        for (b, xi) in buf.iter_mut().zip(x) {
            *b = self.beta * xi;
        }
        &buf[..d]
    }
}

struct FnPotential {
    dim: usize,
    f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl fmt::Debug for FnPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPotential").field("dim", &self.dim).finish()
    }
}

impl Potential for FnPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, u: &[f64]) -> f64 {
        (self.f)(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn toda_derivatives_at_origin() {
        // d^k/du^k (e^{-u} - 1 + u) at 0: 0, 0, 1, -1, 1
        let p = PotentialSpec::toda();
        let expected = [0.0, 0.0, 1.0, -1.0, 1.0];
        for (k, want) in expected.iter().enumerate() {
            let t = p.eval_derivatives(&[0.0], k).unwrap();
            assert!((t.as_slice()[0] - want).abs() < 1e-15, "order {k}");
        }
    }

    #[test]
    fn quadratic_third_derivative_vanishes() {
        let p = PotentialSpec::quadratic(3);
        let t = p.eval_derivatives(&[0.3, -1.2, 2.0], 3).unwrap();
        assert_eq!(t.max_abs(), 0.0);
    }

    #[test]
    fn fpu_alpha_orders_two_to_four() {
        // u^2/2 + a u^3 + u^4/4 at 0: V'' = 1, V''' = 6a, V'''' = 6
        let p = PotentialSpec::fpu_alpha(0.3);
        let got: Vec<f64> = (2..=4)
            .map(|k| p.eval_derivatives(&[0.0], k).unwrap().as_slice()[0])
            .collect();
        assert!((got[0] - 1.0).abs() < 1e-15);
        assert!((got[1] - 1.8).abs() < 1e-14);
        assert!((got[2] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn order_above_five_rejected() {
        assert!(PotentialSpec::toda().eval_derivatives(&[0.0], 6).is_err());
    }

    #[test]
    fn overflow_is_a_domain_error() {
        let p = PotentialSpec::toda();
        match p.eval_derivatives(&[-1000.0], 2) {
            Err(Error::Domain { point }) => assert_eq!(point, vec![-1000.0]),
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(matches!(p.eval_derivatives(&[f64::NAN], 0), Err(Error::Domain { .. })));
    }

    #[test]
    fn rescale_quadratic_is_identity() {
        let p = PotentialSpec::quadratic(2);
        let q = p.rescale(0.37).unwrap();
        let mut rng = crate::seed::rng_from(5);
        for _ in 0..10 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            assert!((p.value(&x) - q.value(&x)).abs() < 1e-13);
        }
    }

    #[test]
    fn rescale_toda_values() {
        let p = PotentialSpec::toda();
        let same = p.rescale(1.0).unwrap();
        assert_eq!(same.value(&[0.7]), p.value(&[0.7]));
        let half = p.rescale(0.5).unwrap();
        let want = 4.0 * ((-0.5f64).exp() - 1.0 + 0.5);
        assert!((half.value(&[1.0]) - want).abs() < 1e-15);
    }

    #[test]
    fn rescale_rejects_nonpositive() {
        assert!(PotentialSpec::toda().rescale(0.0).is_err());
        assert!(PotentialSpec::toda().rescale(-1.0).is_err());
    }

    #[test]
    fn derivative_scaling_by_beta_power() {
        // k-th derivative of V_beta at x equals beta^{k-2} V^{(k)}(beta x)
        let p = PotentialSpec::toda();
        let b = 0.3;
        let q = p.rescale(b).unwrap();
        for k in 0..=5 {
            let lhs = q.eval_derivatives(&[1.4], k).unwrap().as_slice()[0];
            let rhs = b.powi(k as i32 - 2) * p.eval_derivatives(&[b * 1.4], k).unwrap().as_slice()[0];
            assert!(close(lhs, rhs, 1e-14), "order {k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn analytic_matches_numeric_for_builtins() {
        let specs = [
            PotentialSpec::quadratic(2),
            PotentialSpec::toda(),
            PotentialSpec::fpu_alpha(0.3),
            PotentialSpec::diagonal(2, 0.4, 0.7),
            PotentialSpec::family(0.5, 0.3),
        ];
        let mut rng = crate::seed::rng_from(99);
        for p in &specs {
            let num = p.clone().with_numeric_derivatives();
            for _ in 0..100 {
                let x: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
                for k in 1..=4 {
                    let a = p.eval_derivatives(&x, k).unwrap();
                    let n = num.eval_derivatives(&x, k).unwrap();
                    for (av, nv) in a.as_slice().iter().zip(n.as_slice()) {
                        assert!(
                            close(*nv, *av, 1e-5),
                            "{} order {k} at {x:?}: analytic {av} numeric {nv}",
                            p.name()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gradient_sites_matches_pointwise() {
        let p = PotentialSpec::family(1.0, 0.2).rescale(0.25).unwrap();
        let sites = [0.1, -0.4, 1.3, 0.8, -2.0, 0.05];
        let mut out = [0.0; 6];
        p.gradient_sites(&sites, &mut out);
        for j in 0..3 {
            let g = p.eval_derivatives(&sites[2 * j..2 * j + 2], 1).unwrap();
            assert!((g.as_slice()[0] - out[2 * j]).abs() < 1e-13);
            assert!((g.as_slice()[1] - out[2 * j + 1]).abs() < 1e-13);
        }
    }

    #[test]
    fn custom_potential_uses_numeric_mode() {
        let p = PotentialSpec::from_fn(1, 1.0, "cosh", |u| u[0].cosh() - 1.0).unwrap();
        assert_eq!(p.mode(), DerivativeMode::Numeric);
        let h = p.eval_derivatives(&[0.0], 2).unwrap().as_slice()[0];
        assert!((h - 1.0).abs() < 1e-7);
        let mut g = [0.0];
        p.gradient(&[0.5], &mut g);
        assert!((g[0] - 0.5f64.sinh()).abs() < 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn rescale_composes(a in 0.05f64..3.0, b in 0.05f64..3.0, x in -2.0f64..2.0) {
            let p = PotentialSpec::toda();
            let ab = p.rescale(a).unwrap().rescale(b).unwrap();
            let direct = p.rescale(a * b).unwrap();
            let (u, v) = (ab.value(&[x]), direct.value(&[x]));
            proptest::prop_assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }
}
