use rand::Rng;
use rand_distr::StandardNormal;

use kpzlat::gibbs::MeasureParams;
use kpzlat::lattice::{apply_generator, dt_max, simulate, LatticeFunctional, LatticeState, SiteProduct, SimConfig};
use kpzlat::stats::{mean, variance, Estimate};
use kpzlat::{seed, PotentialSpec};

/// Antithetic pairs of one Euler step from a fixed state: the part linear in the
/// noise cancels, the rest estimates `dt * L F` plus the known `dt^2` term.
fn dynkin(spec: PotentialSpec, f: &dyn LatticeFunctional, a: usize, b: usize, site: usize) {
    let n = 16;
    let params = MeasureParams::for_lattice(&spec, n, &vec![0.0; spec.dim()]).unwrap();
    let dt = dt_max(&params, 1000, 3).unwrap();
    let s0 = LatticeState::init_stationary(n, &params, seed!(7, "dynkin", spec.name())).unwrap();
    let f0 = f.value(&s0);
    let generator = apply_generator(f, &s0) / (n * n) as f64;
    let w = s0.w_values();
    let d = s0.d;
    let drift = |i: usize| w[((site + n - 1) % n) * d + i] - w[site * d + i];
    let bias = dt * drift(a) * drift(b);
    let mut rng = kpzlat::seed::rng_from(seed!(7, "dynkin-noise"));
    let samples: Vec<f64> = (0..1000)
        .map(|_| {
            let xi: Vec<f64> = (0..n * d).map(|_| dt.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
            let neg: Vec<f64> = xi.iter().map(|x| -x).collect();
            let mut p = s0.clone();
            let mut m = s0.clone();
            p.step_with_noise(dt, &xi).unwrap();
            m.step_with_noise(dt, &neg).unwrap();
            (0.5 * (f.value(&p) + f.value(&m)) - f0) / dt
        })
        .collect();
    let e = Estimate::from_samples(&samples);
    // the dt^2 drift term is the whole O(h) bias of one Euler step
    let gap = (e.mean - generator - bias).abs();
    assert!(gap <= 3.0 * e.se + 1e-12, "{} ({a},{b}): {} vs L F {generator} + {bias}, se {}", spec.name(), e.mean, e.se);
}

#[test]
fn dynkin_consistency_for_site_products() {
    dynkin(PotentialSpec::toda(), &SiteProduct { site: 3, a: 0, b: 0 }, 0, 0, 3);
    dynkin(PotentialSpec::fpu_alpha(0.3), &SiteProduct { site: 0, a: 0, b: 0 }, 0, 0, 0);
    let diag = PotentialSpec::diagonal(2, 0.5, 1.0);
    dynkin(diag.clone(), &SiteProduct { site: 5, a: 0, b: 1 }, 0, 1, 5);
    dynkin(diag, &SiteProduct { site: 15, a: 1, b: 1 }, 1, 1, 15);
}

#[test]
fn marginal_moments_do_not_drift() {
    let n = 32;
    let spec = PotentialSpec::toda();
    let mut cfg = SimConfig {
        potential: spec,
        n,
        beta: None,
        lambda: vec![0.0],
        t_end: 0.5,
        dt: 1.0,
        record_times: vec![0.0, 0.25, 0.5],
        seed: 99,
        replica: 0,
    };
    cfg.dt = dt_max(&cfg.measure().unwrap(), 1000, 1).unwrap();
    let reps = 100;
    // pooled over sites: every site has the same marginal
    let mut at = vec![Vec::new(); 3];
    for r in 0..reps {
        let tr = simulate(&SimConfig { replica: r, ..cfg.clone() }).unwrap();
        for (k, rec) in tr.records.iter().enumerate() {
            assert!(rec.conservation_drift < 1e-8);
            at[k].extend_from_slice(&rec.state);
        }
    }
    let m0 = mean(&at[0]);
    let v0 = variance(&at[0]);
    let count = at[0].len() as f64;
    for xs in &at[1..] {
        // sites within one replica are correlated through the conserved sum; the
        // replica count sets the scale
        let se_mean = (v0 / reps as f64).sqrt();
        let se_var = v0 * (2.0 / (count / n as f64)).sqrt();
        assert!((mean(xs) - m0).abs() <= 4.0 * se_mean, "mean {} vs {m0}", mean(xs));
        assert!((variance(xs) - v0).abs() <= 4.0 * se_var, "variance {} vs {v0}", variance(xs));
    }
}
