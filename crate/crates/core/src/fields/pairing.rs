//! Pairings `sum_j y_j (M phi)((j - c) / n)` of lattice sequences with shifted
//! test functions, evaluated mode by mode.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::TestFunction;

/// Discrete operator applied to the sampled test function `phi_j = phi((j - c) / n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    Point,
    /// `(n / 2)(phi_{j+1} - phi_{j-1})`.
    Gradient,
    /// `n^2 (phi_{j+1} + phi_{j-1} - 2 phi_j)`.
    Laplacian,
    /// `phi_{j+1} - phi_j`.
    Forward,
    /// `phi_j - phi_{j-1}`.
    Backward,
    /// `phi'((j - c) / n)`.
    Derivative,
}

impl Stencil {
    /// Symbol on `e^{2 pi i k (j - c) / n}`.
    pub fn multiplier(self, k: u32, n: usize) -> Complex64 {
        let theta = 2.0 * PI * k as f64 / n as f64;
        let nf = n as f64;
        let e = Complex64::from_polar(1.0, theta);
        match self {
            Stencil::Point => Complex64::new(1.0, 0.0),
            Stencil::Gradient => Complex64::new(0.0, nf * theta.sin()),
            Stencil::Laplacian => Complex64::new(nf * nf * (2.0 * theta.cos() - 2.0), 0.0),
            Stencil::Forward => e - 1.0,
            Stencil::Backward => 1.0 - e.conj(),
            Stencil::Derivative => Complex64::new(0.0, 2.0 * PI * k as f64),
        }
    }

    fn constant_part(self) -> f64 {
        if self == Stencil::Point {
            1.0
        } else {
            0.0
        }
    }
}

/// Roots of unity for one lattice size.
#[derive(Clone, Debug)]
pub struct Twiddles {
    n: usize,
    roots: Vec<Complex64>,
}

impl Twiddles {
    pub fn new(n: usize) -> Self {
        let roots = (0..n).map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64)).collect();
        Self { n, roots }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `Y(k) = sum_j y_j e^{2 pi i k j / n}` for `k <= kmax`, reading
    /// `y_j = data[j * stride + offset]`.
    pub fn spectrum(&self, data: &[f64], stride: usize, offset: usize, kmax: u32) -> Spectrum {
        let n = self.n;
        let mut total = 0.0;
        for j in 0..n {
            total += data[j * stride + offset];
        }
        let mut modes = Vec::with_capacity(kmax as usize);
        for k in 1..=kmax as usize {
            let step = k % n;
            let mut idx = 0;
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += self.roots[idx] * data[j * stride + offset];
                idx += step;
                if idx >= n {
                    idx -= n;
                }
            }
            modes.push(acc);
        }
        Spectrum { n, total, modes }
    }
}

/// Low-frequency transform of one lattice sequence.
#[derive(Clone, Debug)]
pub struct Spectrum {
    n: usize,
    total: f64,
    modes: Vec<Complex64>,
}

impl Spectrum {
    pub fn kmax(&self) -> u32 {
        self.modes.len() as u32
    }

    /// `sum_j y_j (M phi)((j - shift) / n)`; `phi` must not exceed the transform's
    /// frequency range.
    pub fn pair(&self, phi: &TestFunction, shift: f64, stencil: Stencil) -> f64 {
        assert!(phi.max_freq() <= self.kmax(), "spectrum too short for {}", phi.name);
        let mut out = phi.constant * stencil.constant_part() * self.total;
        let c = shift.rem_euclid(self.n as f64);
        for m in &phi.modes {
            let theta = 2.0 * PI * m.k as f64 / self.n as f64;
            let coef = Complex64::new(m.cos, -m.sin) * stencil.multiplier(m.k, self.n) * Complex64::from_polar(1.0, -theta * c);
            out += (coef * self.modes[m.k as usize - 1]).re;
        }
        out
    }
}

/// The sequence `(M phi)((j - shift) / n)`, `j = 0..n`.
pub fn sample(phi: &TestFunction, n: usize, shift: f64, stencil: Stencil) -> Vec<f64> {
    let c = shift.rem_euclid(n as f64);
    let mut out = vec![phi.constant * stencil.constant_part(); n];
    for m in &phi.modes {
        let theta = 2.0 * PI * m.k as f64 / n as f64;
        let coef = Complex64::new(m.cos, -m.sin) * stencil.multiplier(m.k, n);
        for (j, o) in out.iter_mut().enumerate() {
            *o += (coef * Complex64::from_polar(1.0, theta * (j as f64 - c))).re;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Mode;

    fn brute(phi: &TestFunction, n: usize, c: f64, s: Stencil) -> Vec<f64> {
        let p = |j: f64| phi.value((j - c) / n as f64);
        let nf = n as f64;
        (0..n)
            .map(|j| {
                let j = j as f64;
                match s {
                    Stencil::Point => p(j),
                    Stencil::Gradient => 0.5 * nf * (p(j + 1.0) - p(j - 1.0)),
                    Stencil::Laplacian => nf * nf * (p(j + 1.0) + p(j - 1.0) - 2.0 * p(j)),
                    Stencil::Forward => p(j + 1.0) - p(j),
                    Stencil::Backward => p(j) - p(j - 1.0),
                    Stencil::Derivative => phi.derivative((j - c) / nf),
                }
            })
            .collect()
    }

    const ALL: [Stencil; 6] = [
        Stencil::Point,
        Stencil::Gradient,
        Stencil::Laplacian,
        Stencil::Forward,
        Stencil::Backward,
        Stencil::Derivative,
    ];

    #[test]
    fn sampling_and_pairing_match_direct_evaluation() {
        let phi = TestFunction::new("mix", 0.4, vec![Mode { k: 1, cos: 0.3, sin: 1.0 }, Mode { k: 3, cos: -0.5, sin: 0.25 }]).unwrap();
        let n = 24;
        let y: Vec<f64> = (0..n).map(|j| ((j * 7 % 11) as f64 - 5.0) * 0.3).collect();
        let tw = Twiddles::new(n);
        let spec = tw.spectrum(&y, 1, 0, 3);
        for c in [0.0, 0.37, 5.9, 1234.5] {
            for s in ALL {
                let want = brute(&phi, n, c, s);
                let got = sample(&phi, n, c, s);
                for (a, b) in got.iter().zip(&want) {
                    assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{s:?} at {c}");
                }
                let pair: f64 = y.iter().zip(&want).map(|(a, b)| a * b).sum();
                let fast = spec.pair(&phi, c, s);
                assert!((fast - pair).abs() < 1e-9 * (1.0 + pair.abs()), "{s:?} at {c}: {fast} vs {pair}");
            }
        }
    }

    #[test]
    fn strided_spectrum_reads_one_species() {
        let data = [1.0, 10.0, 2.0, 20.0, 3.0, 30.0];
        let tw = Twiddles::new(3);
        let a = tw.spectrum(&data, 2, 1, 1);
        let b = tw.spectrum(&[10.0, 20.0, 30.0], 1, 0, 1);
        let phi = TestFunction::cos(1);
        assert_eq!(a.pair(&phi, 0.2, Stencil::Point), b.pair(&phi, 0.2, Stencil::Point));
    }
}
