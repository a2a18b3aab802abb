//! Nested central finite differences.
//!
//! Each index of the derivative is resolved with the fourth-order stencil
//! `(f(-2h) - 8 f(-h) + 8 f(h) - f(2h)) / 12h`, so an order-k entry costs `4^k`
//! evaluations. Truncation error is `O(h^4)`; roundoff grows like
//! `eps |f| / h^k`, which the per-order step balances. Expect about 1e-10 relative
//! accuracy at order 1 degrading to about 1e-6 at order 5 for O(1) inputs.

use crate::tensor::SymTensor;

const OFFSETS: [(f64, f64); 4] = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];

/// Step used for a derivative of the given order at `point`.
pub fn numeric_step(point: &[f64], order: usize) -> f64 {
    let inf = point.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let base = (1e-2 * (1.0 + inf)).max(1e-2);
    base * 10f64.powf(-(6.0 - order as f64) / (order as f64 + 1.0))
}

/// Full symmetric derivative tensor of `f` at `point` by nested central differences.
pub fn numeric_derivative(f: &dyn Fn(&[f64]) -> f64, point: &[f64], order: usize) -> SymTensor {
    let d = point.len();
    if order == 0 {
        return SymTensor::scalar(f(point));
    }
    let h = numeric_step(point, order);
    let mut t = SymTensor::zeros(d, order);
    let mut x = point.to_vec();
    let mut digits = vec![0usize; order];
    let combos = 4usize.pow(order as u32);
    for idx in SymTensor::multisets(d, order) {
        let mut acc = 0.0;
        for c in 0..combos {
            let mut rest = c;
            for slot in digits.iter_mut() {
                *slot = rest % 4;
                rest /= 4;
            }
            x.copy_from_slice(point);
            let mut w = 1.0;
            for (r, &dig) in digits.iter().enumerate() {
                let (off, coef) = OFFSETS[dig];
                x[idx[r]] += off * h;
                w *= coef;
            }
            acc += w * f(&x);
        }
        t.set_symmetric(&idx, acc / h.powi(order as i32));
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_exp() {
        let f = |x: &[f64]| x[0].exp();
        for k in 1..=5 {
            let v = numeric_derivative(&f, &[0.3], k).as_slice()[0];
            let want = 0.3f64.exp();
            assert!((v - want).abs() < 1e-5 * want, "order {k}: {v}");
        }
    }

    #[test]
    fn mixed_partials() {
        // f = x^2 y^3: d^3/dx dx dy = 6 y^2 and d^3/dx dy dy = 12 x y, both 24 at (1, 2)
        let f = |x: &[f64]| x[0] * x[0] * x[1].powi(3);
        let t = numeric_derivative(&f, &[1.0, 2.0], 3);
        assert!((t.get(&[0, 0, 1]) - 24.0).abs() < 1e-5 * 24.0);
        assert!((t.get(&[0, 1, 1]) - 24.0).abs() < 1e-5 * 24.0);
        assert!((t.get(&[1, 0, 1]) - 24.0).abs() < 1e-5 * 24.0);
        assert!(t.asymmetry() == 0.0);
    }

    #[test]
    fn step_grows_with_order_and_point() {
        assert!(numeric_step(&[0.0], 1) < numeric_step(&[0.0], 5));
        assert!(numeric_step(&[0.0], 2) < numeric_step(&[10.0], 2));
    }
}
