mod common;

use proptest::prelude::*;

use common::{tuples, OracleTensors, Poly};
use kpzlat::tensors::{xi_matrix, CouplingTensors};
use kpzlat::{PotentialSpec, SymTensor};

fn permutations(t: &[usize]) -> Vec<Vec<usize>> {
    if t.len() <= 1 {
        return vec![t.to_vec()];
    }
    let mut out = Vec::new();
    for k in 0..t.len() {
        let mut rest = t.to_vec();
        let head = rest.remove(k);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn max_asymmetry(t: &SymTensor) -> f64 {
    let mut worst: f64 = 0.0;
    for idx in tuples(t.dim(), t.order()) {
        for p in permutations(&idx) {
            worst = worst.max((t.get(&idx) - t.get(&p)).abs());
        }
    }
    worst
}

fn builtin() -> impl Strategy<Value = PotentialSpec> {
    prop_oneof![
        Just(PotentialSpec::toda()),
        (1usize..4).prop_map(PotentialSpec::quadratic),
        (-2.0f64..2.0).prop_map(PotentialSpec::fpu_alpha),
        (1usize..4, -1.0f64..1.0, 0.0f64..2.0).prop_map(|(d, c3, c4)| PotentialSpec::diagonal(d, c3, c4)),
        (-3.0f64..3.0, 0.01f64..1.0).prop_map(|(p, s)| PotentialSpec::family(p, s)),
    ]
}

fn random_sym(d: usize, order: usize, vals: &[f64]) -> SymTensor {
    let mut k = 0;
    SymTensor::from_fn(d, order, |_| {
        k += 1;
        vals[(k - 1) % vals.len()]
    })
    .symmetrized()
}

proptest! {
    #[test]
    fn gamma_and_delta_are_permutation_symmetric(p in builtin(), l in -1.0f64..1.0) {
        let t = CouplingTensors::compute(&p, &vec![l; p.dim()]).unwrap();
        prop_assert!(max_asymmetry(&t.gamma) <= 1e-10);
        prop_assert!(max_asymmetry(&t.delta) <= 1e-10);
    }

    #[test]
    fn xi_is_linear_in_delta(
        d in 1usize..4,
        g in proptest::collection::vec(-1.0f64..1.0, 27),
        q in proptest::collection::vec(-1.0f64..1.0, 81),
        lam in proptest::collection::vec(-1.0f64..1.0, 3),
    ) {
        let gamma = random_sym(d, 3, &g);
        let delta = random_sym(d, 4, &q);
        let lam = &lam[..d];
        let one = xi_matrix(&gamma, &delta, lam).unwrap();
        let two = xi_matrix(&gamma, &delta.clone().scale(2.0), lam).unwrap();
        let pure = xi_matrix(&SymTensor::zeros(d, 3), &delta, lam).unwrap();
        for idx in tuples(d, 2) {
            prop_assert!((two.get(&idx) - one.get(&idx) - pure.get(&idx)).abs() <= 1e-12);
        }
    }

    #[test]
    fn family_satisfies_the_frame_conditions(p in -3.0f64..3.0, s in 0.05f64..1.0) {
        let unit = CouplingTensors::compute(&PotentialSpec::family(p, s), &[0.0, 0.0]).unwrap();
        let f = unit.frame.expect("frame conditions hold for every p");
        prop_assert_eq!(f.eta, 0.0);
        prop_assert!(unit.lambda_mat.max_abs() == 0.0);
        // Xi is quadratic in the couplings
        let doubled = CouplingTensors::compute(&PotentialSpec::family(p, 2.0 * s), &[0.0, 0.0]).unwrap();
        let f2 = doubled.frame.expect("frame conditions hold after scaling");
        prop_assert!((f2.eta_prime - 4.0 * f.eta_prime).abs() <= 1e-9 * (1.0 + f2.eta_prime.abs()));
    }

    #[test]
    fn family_matches_the_expansion_oracle(p in -3.0f64..3.0, s in 0.05f64..1.0, l0 in -1.0f64..1.0, l1 in -1.0f64..1.0) {
        let lam = [l0, l1];
        let t = CouplingTensors::compute(&PotentialSpec::family(p, s), &lam).unwrap();
        let o = OracleTensors::from_poly(&Poly::family(p, s), &lam);
        for (k, idx) in tuples(2, 2).iter().enumerate() {
            prop_assert!((t.lambda_mat.get(idx) - o.lambda_mat[k]).abs() <= 1e-10);
            prop_assert!((t.xi.get(idx) - o.xi[k]).abs() <= 1e-10);
        }
        prop_assert!(t.constraint_residual <= 1e-12);
    }
}
