use std::sync::OnceLock;

use crate::tensor::SymTensor;

use super::{Potential, PotentialKind, MAX_DIM};

/// `V(u) = |u|^2 / 2`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    d: usize,
}

impl Quadratic {
    pub fn new(d: usize) -> Self {
        Self { d }
    }
}

impl Potential for Quadratic {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, u: &[f64]) -> f64 {
        0.5 * u.iter().map(|x| x * x).sum::<f64>()
    }

    fn has_analytic_derivatives(&self) -> bool {
        true
    }

    fn derivative(&self, u: &[f64], order: usize) -> Option<SymTensor> {
        let d = self.d;
        Some(match order {
            0 => SymTensor::scalar(self.value(u)),
            1 => SymTensor::from_fn(d, 1, |i| u[i[0]]),
            2 => SymTensor::from_fn(d, 2, |i| if i[0] == i[1] { 1.0 } else { 0.0 }),
            k => SymTensor::zeros(d, k),
        })
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(u);
    }

    fn gradient_sites(&self, _beta: f64, sites: &[f64], out: &mut [f64]) {
        out.copy_from_slice(sites);
    }
}

/// The Toda potential `V(u) = e^{-u} - 1 + u`.
#[derive(Clone, Copy, Debug)]
pub struct Toda;

impl Potential for Toda {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, u: &[f64]) -> f64 {
        (-u[0]).exp_m1() + u[0]
    }

    fn has_analytic_derivatives(&self) -> bool {
        true
    }

    fn derivative(&self, u: &[f64], order: usize) -> Option<SymTensor> {
        let x = u[0];
        let v = match order {
            0 => self.value(u),
            1 => -(-x).exp_m1(),
            k => {
                let e = (-x).exp();
                if k % 2 == 0 {
                    e
                } else {
                    -e
                }
            }
        };
        let mut t = SymTensor::zeros(1, order);
        t.set(&vec![0; order], v);
        Some(t)
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        out[0] = -(-u[0]).exp_m1();
    }

    fn gradient_sites(&self, beta: f64, sites: &[f64], out: &mut [f64]) {
        let inv = 1.0 / beta;
        for (w, x) in out.iter_mut().zip(sites) {
            *w = -(-beta * x).exp_m1() * inv;
        }
    }
}

/// A multivariate polynomial `sum_m c_m prod_i u_i^{e_{m,i}}`.
#[derive(Clone, Debug)]
pub struct Polynomial {
    d: usize,
    terms: Vec<(f64, Vec<u32>)>,
    grad: OnceLock<Option<Vec<GradTerm>>>,
}

/// `coef * prod_j u_j^{e_j}` contributing to `d V / d u_i`.
#[derive(Clone, Copy, Debug)]
struct GradTerm {
    i: usize,
    coef: f64,
    e: [u8; MAX_DIM],
}

/// Powers up to this exponent are tabulated per site.
const POW_TABLE: usize = 8;

impl Polynomial {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            terms: Vec::new(),
            grad: OnceLock::new(),
        }
    }

    /// The gradient as a flat term list, when the table fits.
    fn grad_terms(&self) -> Option<&[GradTerm]> {
        self.grad
            .get_or_init(|| {
                if self.d > MAX_DIM || self.degree() as usize > POW_TABLE {
                    return None;
                }
                let mut out = Vec::new();
                for (c, e) in &self.terms {
                    for i in 0..self.d {
                        if e[i] == 0 {
                            continue;
                        }
                        let mut ex = [0u8; MAX_DIM];
                        for j in 0..self.d {
                            ex[j] = (if i == j { e[j] - 1 } else { e[j] }) as u8;
                        }
                        out.push(GradTerm { i, coef: c * e[i] as f64, e: ex });
                    }
                }
                Some(out)
            })
            .as_deref()
    }

    fn eval_grad(&self, terms: &[GradTerm], u: &[f64], out: &mut [f64]) {
        let mut pw = [[1.0; POW_TABLE]; MAX_DIM];
        for (row, &x) in pw.iter_mut().zip(u) {
            for k in 1..POW_TABLE {
                row[k] = row[k - 1] * x;
            }
        }
        out.iter_mut().for_each(|g| *g = 0.0);
        for t in terms {
            let mut v = t.coef;
            for j in 0..self.d {
                v *= pw[j][t.e[j] as usize];
            }
            out[t.i] += v;
        }
    }

    /// Adds `c * prod_i u_i^{exps[i]}`, merging with an existing monomial.
    pub fn add_term(&mut self, c: f64, exps: &[u32]) -> &mut Self {
        assert_eq!(exps.len(), self.d);
        self.grad = OnceLock::new();
        if c == 0.0 {
            return self;
        }
        match self.terms.iter_mut().find(|(_, e)| e == exps) {
            Some((coef, _)) => *coef += c,
            None => self.terms.push((c, exps.to_vec())),
        }
        self
    }

    fn with_quadratic(d: usize) -> Self {
        let mut p = Self::new(d);
        for i in 0..d {
            let mut e = vec![0; d];
            e[i] = 2;
            p.add_term(0.5, &e);
        }
        p
    }

    pub fn fpu_alpha(alpha: f64) -> Self {
        let mut p = Self::with_quadratic(1);
        p.add_term(alpha, &[3]).add_term(0.25, &[4]);
        p
    }

    pub fn diagonal(d: usize, c3: f64, c4: f64) -> Self {
        let mut p = Self::with_quadratic(d);
        for i in 0..d {
            let mut e = vec![0; d];
            e[i] = 3;
            p.add_term(c3 / 3.0, &e);
            e[i] = 4;
            p.add_term(c4 / 4.0, &e);
        }
        p
    }

    /// `|u|^2/2 + (1/3) g_{ijk} u^i u^j u^k + (1/2) sum_k (g_{kij} u^i u^j)^2`
    /// for the two-species coupling `g` built from [`PotentialKind::family_couplings`].
    ///
    /// Third derivatives at the origin are `2 g`; fourth derivatives are
    /// `12 sym(sum_k g_k g_k)`. The quartic part dominates the cubic one, so
    /// `V >= |u|^2 / 3` everywhere.
    pub fn family(p: f64, scale: f64) -> Self {
        let g = family_tensor(PotentialKind::family_couplings(p, scale));
        let mut poly = Self::with_quadratic(2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut e = [0u32; 2];
                    e[i] += 1;
                    e[j] += 1;
                    e[k] += 1;
                    poly.add_term(g.get(&[i, j, k]) / 3.0, &e);
                }
            }
        }
        for k in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        for dd in 0..2 {
                            let mut e = [0u32; 2];
                            for idx in [a, b, c, dd] {
                                e[idx] += 1;
                            }
                            let coef = 0.5 * g.get(&[k, a, b]) * g.get(&[k, c, dd]);
                            poly.add_term(coef, &e);
                        }
                    }
                }
            }
        }
        poly.terms.retain(|(c, _)| *c != 0.0);
        poly.grad = OnceLock::new();
        poly
    }

    fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum()).max().unwrap_or(0)
    }
}

/// Symmetric order-3 tensor with `g_000 = a, g_001 = b, g_011 = c, g_111 = d`.
pub(crate) fn family_tensor(abcd: [f64; 4]) -> SymTensor {
    let mut g = SymTensor::zeros(2, 3);
    g.set_symmetric(&[0, 0, 0], abcd[0]);
    g.set_symmetric(&[0, 0, 1], abcd[1]);
    g.set_symmetric(&[0, 1, 1], abcd[2]);
    g.set_symmetric(&[1, 1, 1], abcd[3]);
    g
}

fn falling(e: u32, m: u32) -> f64 {
    (0..m).map(|r| (e - r) as f64).product()
}

impl Potential for Polynomial {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, u: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().zip(u).map(|(&k, x)| x.powi(k as i32)).product::<f64>())
            .sum()
    }

    fn has_analytic_derivatives(&self) -> bool {
        true
    }

    fn derivative(&self, u: &[f64], order: usize) -> Option<SymTensor> {
        let d = self.d;
        let mut t = SymTensor::zeros(d, order);
        if order as u32 > self.degree() {
            return Some(t);
        }
        let mut m = vec![0u32; d];
        for idx in SymTensor::multisets(d, order) {
            m.iter_mut().for_each(|v| *v = 0);
            for &i in &idx {
                m[i] += 1;
            }
            let mut v = 0.0;
            for (c, e) in &self.terms {
                if e.iter().zip(&m).any(|(ei, mi)| ei < mi) {
                    continue;
                }
                let mut term = *c;
                for i in 0..d {
                    term *= falling(e[i], m[i]) * u[i].powi((e[i] - m[i]) as i32);
                }
                v += term;
            }
            t.set_symmetric(&idx, v);
        }
        Some(t)
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        if let Some(terms) = self.grad_terms() {
            self.eval_grad(terms, u, out);
            return;
        }
        out.iter_mut().for_each(|g| *g = 0.0);
        for (c, e) in &self.terms {
            for i in 0..self.d {
                if e[i] == 0 {
                    continue;
                }
                let mut term = c * e[i] as f64;
                for j in 0..self.d {
                    let k = if i == j { e[j] - 1 } else { e[j] };
                    term *= u[j].powi(k as i32);
                }
                out[i] += term;
            }
        }
    }

    fn gradient_sites(&self, beta: f64, sites: &[f64], out: &mut [f64]) {
        let Some(terms) = self.grad_terms() else {
            let d = self.d;
            let mut y = vec![0.0; d];
            for (x, w) in sites.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                y.iter_mut().zip(x).for_each(|(a, b)| *a = beta * b);
                self.gradient(&y, w);
                w.iter_mut().for_each(|g| *g /= beta);
            }
            return;
        };
        let d = self.d;
        let mut y = [0.0; MAX_DIM];
        for (x, w) in sites.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            for (a, b) in y.iter_mut().zip(x) {
                *a = beta * b;
            }
            self.eval_grad(terms, &y[..d], w);
            w.iter_mut().for_each(|g| *g /= beta);
        }
    }
}
