//! Oracles shared by the integration tests. Nothing here calls into the
//! tensor code under test.
#![allow(dead_code)]

use std::collections::BTreeMap;

/// Polynomial as a map from exponent vectors to coefficients.
#[derive(Clone, Debug, Default)]
pub struct Poly {
    pub d: usize,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn new(d: usize) -> Self {
        Self { d, terms: BTreeMap::new() }
    }

    /// Adds `c * u_{idx[0]} * u_{idx[1]} * ...`.
    pub fn add(&mut self, c: f64, idx: &[usize]) {
        let mut e = vec![0u32; self.d];
        for &i in idx {
            e[i] += 1;
        }
        *self.terms.entry(e).or_insert(0.0) += c;
    }

    /// `d^k V(0) / du_{idx[0]} ... du_{idx[k-1]}`: the matching coefficient times `prod e_i!`.
    pub fn derivative_at_zero(&self, idx: &[usize]) -> f64 {
        let mut e = vec![0u32; self.d];
        for &i in idx {
            e[i] += 1;
        }
        let fact: f64 = e.iter().map(|&k| (1..=k).map(f64::from).product::<f64>()).product();
        self.terms.get(&e).copied().unwrap_or(0.0) * fact
    }

    fn quadratic(d: usize) -> Self {
        let mut p = Self::new(d);
        for i in 0..d {
            p.add(0.5, &[i, i]);
        }
        p
    }

    /// `u^2/2 + alpha u^3 + u^4/4`.
    pub fn fpu(alpha: f64) -> Self {
        let mut p = Self::quadratic(1);
        p.add(alpha, &[0, 0, 0]);
        p.add(0.25, &[0, 0, 0, 0]);
        p
    }

    /// `sum_i u_i^2/2 + (c3/3) u_i^3 + (c4/4) u_i^4`.
    pub fn diagonal(d: usize, c3: f64, c4: f64) -> Self {
        let mut p = Self::quadratic(d);
        for i in 0..d {
            p.add(c3 / 3.0, &[i, i, i]);
            p.add(c4 / 4.0, &[i, i, i, i]);
        }
        p
    }

    /// `|u|^2/2 + (1/3) g_{ijk} u_i u_j u_k + (1/2) sum_k (g_{kij} u_i u_j)^2`, term by term.
    pub fn family(p: f64, scale: f64) -> Self {
        let g = family_gamma(p, scale);
        let mut v = Self::quadratic(2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    v.add(g[i][j][k] / 3.0, &[i, j, k]);
                }
            }
        }
        for k in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        for e in 0..2 {
                            v.add(0.5 * g[k][a][b] * g[k][c][e], &[a, b, c, e]);
                        }
                    }
                }
            }
        }
        v
    }
}

/// `gamma^1_11 = a`, `gamma^1_12 = gamma^2_11 = b`, `gamma^1_22 = gamma^2_12 = c`,
/// `gamma^2_22 = d`, with `(a, b, c, d)` proportional to
/// `(p(p^2+3), p^2-1, p(p^2-1), -3p^2-1)`.
pub fn family_gamma(p: f64, scale: f64) -> [[[f64; 2]; 2]; 2] {
    let (a, b, c, d) = (
        scale * p * (p * p + 3.0),
        scale * (p * p - 1.0),
        scale * p * (p * p - 1.0),
        scale * (-3.0 * p * p - 1.0),
    );
    let mut g = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                // number of second-species indices picks the entry
                g[i][j][k] = [a, b, c, d][i + j + k];
            }
        }
    }
    g
}

/// All index tuples of a given order over `0..d`.
pub fn tuples(d: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..order {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..d).map(move |i| {
                    let mut s = t.clone();
                    s.push(i);
                    s
                })
            })
            .collect();
    }
    out
}

/// Expansion tensors computed by literal loops from third and fourth derivatives.
pub struct OracleTensors {
    pub d: usize,
    /// `gamma[a][b][c]`.
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    pub lambda_mat: Vec<f64>,
    pub xi: Vec<f64>,
}

impl OracleTensors {
    pub fn g(&self, a: usize, b: usize, c: usize) -> f64 {
        self.gamma[(a * self.d + b) * self.d + c]
    }

    pub fn dl(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        self.delta[((a * self.d + b) * self.d + c) * self.d + e]
    }

    pub fn from_derivatives(d: usize, third: impl Fn(&[usize]) -> f64, fourth: impl Fn(&[usize]) -> f64, lambda: &[f64]) -> Self {
        let gamma: Vec<f64> = tuples(d, 3).iter().map(|t| 0.5 * third(t)).collect();
        let delta: Vec<f64> = tuples(d, 4).iter().map(|t| fourth(t) / 6.0).collect();
        let mut o = Self {
            d,
            gamma,
            delta,
            lambda_mat: vec![0.0; d * d],
            xi: vec![0.0; d * d],
        };
        for i1 in 0..d {
            for i2 in 0..d {
                let mut l = 0.0;
                for i3 in 0..d {
                    l += 2.0 * o.g(i1, i2, i3) * lambda[i3];
                }
                let mut x = 0.0;
                for k2 in 0..d {
                    for k3 in 0..d {
                        x += 3.0 * o.dl(i1, i2, k2, k3) * lambda[k2] * lambda[k3];
                    }
                }
                for k2 in 0..d {
                    x += 14.0 / 5.0 * o.dl(i1, i2, k2, k2);
                }
                x += 1.0 / 5.0 * o.dl(i1, i2, i2, i2);
                for k1 in 0..d {
                    for k2 in 0..d {
                        for k3 in 0..d {
                            x -= 2.0 * o.g(i1, i2, k1) * o.g(k1, k2, k3) * lambda[k2] * lambda[k3];
                        }
                    }
                }
                for k1 in 0..d {
                    for k2 in 0..d {
                        x -= 18.0 / 5.0 * o.g(i1, i2, k1) * o.g(k1, k2, k2);
                    }
                }
                for k1 in 0..d {
                    x -= 2.0 / 5.0 * o.g(i1, i2, k1) * o.g(k1, i2, i2);
                }
                o.lambda_mat[i1 * d + i2] = l;
                o.xi[i1 * d + i2] = x;
            }
        }
        o
    }

    pub fn from_poly(p: &Poly, lambda: &[f64]) -> Self {
        Self::from_derivatives(p.d, |t| p.derivative_at_zero(t), |t| p.derivative_at_zero(t), lambda)
    }

    /// `V = e^{-u} - 1 + u`: every derivative of order `k >= 2` at zero is `(-1)^k`.
    pub fn toda(lambda: f64) -> Self {
        Self::from_derivatives(1, |_| -1.0, |_| 1.0, &[lambda])
    }
}
