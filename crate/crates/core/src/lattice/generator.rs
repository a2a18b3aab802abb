use super::LatticeState;

/// A smooth function of the whole configuration, with the derivatives the
/// generator needs.
pub trait LatticeFunctional {
    fn value(&self, s: &LatticeState) -> f64;
    /// `d F / d u^i_j` for all `(j, i)`, site-major.
    fn gradient(&self, s: &LatticeState, out: &mut [f64]);
    /// `(d^i_j - d^i_{j-1})^2 F`.
    fn bond_second_difference(&self, s: &LatticeState, j: usize, i: usize) -> f64;
}

/// `L_n F = n^2 [ (1/2) sum (d^i_j - d^i_{j-1})^2 F + sum (W^i_{j-1} - W^i_j) d^i_j F ]`.
pub fn apply_generator(f: &dyn LatticeFunctional, s: &LatticeState) -> f64 {
    let (n, d) = (s.n, s.d);
    let w = s.w_values();
    let mut g = vec![0.0; n * d];
    f.gradient(s, &mut g);
    let mut second = 0.0;
    let mut drift = 0.0;
    for j in 0..n {
        let jm = (j + n - 1) % n;
        for i in 0..d {
            second += f.bond_second_difference(s, j, i);
            drift += (w[jm * d + i] - w[j * d + i]) * g[j * d + i];
        }
    }
    let n2 = (n * n) as f64;
    n2 * (0.5 * second + drift)
}

/// `sum_j u^i_j`.
pub struct SpeciesSum(pub usize);

impl LatticeFunctional for SpeciesSum {
    fn value(&self, s: &LatticeState) -> f64 {
        s.species_sums()[self.0]
    }

    fn gradient(&self, s: &LatticeState, out: &mut [f64]) {
        for (k, g) in out.iter_mut().enumerate() {
            *g = if k % s.d == self.0 { 1.0 } else { 0.0 };
        }
    }

    fn bond_second_difference(&self, _s: &LatticeState, _j: usize, _i: usize) -> f64 {
        0.0
    }
}

/// `u^a_j u^b_j` at one site.
pub struct SiteProduct {
    pub site: usize,
    pub a: usize,
    pub b: usize,
}

impl LatticeFunctional for SiteProduct {
    fn value(&self, s: &LatticeState) -> f64 {
        let x = s.site(self.site);
        x[self.a] * x[self.b]
    }

    fn gradient(&self, s: &LatticeState, out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        let x = s.site(self.site);
        let base = self.site * s.d;
        out[base + self.a] += x[self.b];
        out[base + self.b] += x[self.a];
    }

    fn bond_second_difference(&self, s: &LatticeState, j: usize, i: usize) -> f64 {
        // u_m appears in the bonds j = m and j = m + 1
        let m = self.site;
        let touches = j == m || (j + s.n - 1) % s.n == m;
        if touches && self.a == i && self.b == i {
            2.0
        } else {
            0.0
        }
    }
}

/// `Psi(u) = sum_j (V(u_j) + 1 + C2.u_j / C1)` for the potential driving the state.
pub struct Lyapunov {
    pub c1: f64,
    pub c2: Vec<f64>,
}

impl LatticeFunctional for Lyapunov {
    fn value(&self, s: &LatticeState) -> f64 {
        s.u.chunks_exact(s.d)
            .map(|x| {
                let lin: f64 = x.iter().zip(&self.c2).map(|(a, b)| a * b).sum();
                s.potential().value(x) + 1.0 + lin / self.c1
            })
            .sum()
    }

    fn gradient(&self, s: &LatticeState, out: &mut [f64]) {
        s.potential().gradient_sites(&s.u, out);
        for (k, g) in out.iter_mut().enumerate() {
            *g += self.c2[k % s.d] / self.c1;
        }
    }

    fn bond_second_difference(&self, s: &LatticeState, j: usize, i: usize) -> f64 {
        // separable in sites: the mixed term vanishes
        let jm = (j + s.n - 1) % s.n;
        let hj = s.potential().hessian(s.site(j)).map(|h| h.get(&[i, i])).unwrap_or(f64::NAN);
        let hm = s.potential().hessian(s.site(jm)).map(|h| h.get(&[i, i])).unwrap_or(f64::NAN);
        hj + hm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::MeasureParams;
    use crate::potential::{check_assumptions, PotentialSpec, ProbeGrid};

    #[test]
    fn species_sum_is_annihilated() {
        let params = MeasureParams::new(&PotentialSpec::toda(), 0.25, &[0.2]).unwrap();
        let s = LatticeState::init_stationary(16, &params, 1).unwrap();
        assert!(apply_generator(&SpeciesSum(0), &s).abs() < 1e-9);
    }

    #[test]
    fn site_product_identity() {
        // L(u^a_j u^b_j) = (W^a_{j-1} - W^a_j) u^b_j + (W^b_{j-1} - W^b_j) u^a_j + 2 [a = b], times n^2
        let params = MeasureParams::new(&PotentialSpec::family(2.0, 0.2), 0.3, &[0.1, 0.2]).unwrap();
        let s = LatticeState::init_stationary(8, &params, 4).unwrap();
        let w = s.w_values();
        let n2 = 64.0;
        for &(a, b) in &[(0, 0), (0, 1), (1, 1)] {
            for j in [0, 3, 7] {
                let jm = (j + 7) % 8;
                let want = (w[jm * 2 + a] - w[j * 2 + a]) * s.u[j * 2 + b]
                    + (w[jm * 2 + b] - w[j * 2 + b]) * s.u[j * 2 + a]
                    + if a == b { 2.0 } else { 0.0 };
                let got = apply_generator(&SiteProduct { site: j, a, b }, &s);
                assert!((got - n2 * want).abs() < 1e-10 * (1.0 + got.abs()), "{a}{b} site {j}");
            }
        }
    }

    #[test]
    fn lyapunov_bound_on_sampled_states() {
        for p in [PotentialSpec::toda(), PotentialSpec::family(1.0, 0.3)] {
            let target = p.rescale(0.25).unwrap();
            let report = check_assumptions(&target, &ProbeGrid::new(8.0, 41));
            assert!(report.passes("lyapunov"), "{:?}", report.clause("lyapunov"));
            let psi = Lyapunov { c1: report.lyapunov_c1, c2: report.lyapunov_c2.clone() };
            let params = MeasureParams::new(&p, 0.25, &vec![0.0; p.dim()]).unwrap();
            for k in 0..100u64 {
                let s = LatticeState::init_stationary(8, &params, k).unwrap();
                // L, not L_n: divide out the n^2 clock
                let l = apply_generator(&psi, &s) / 64.0;
                assert!(l <= report.lyapunov_c1 * psi.value(&s), "{}: state {k}", p.name());
            }
        }
    }
}
