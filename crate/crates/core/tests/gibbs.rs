use kpzlat::gibbs::{ibp_check, sample_sites, MeasureParams, SiteFunctional};
use kpzlat::stats::{ks_one_sample, std_normal_cdf};
use kpzlat::{seed, PotentialSpec};

#[test]
fn marginal_approaches_the_gaussian_as_beta_shrinks() {
    let lam = 0.3;
    let spec = PotentialSpec::toda();
    let dist: Vec<f64> = [0.2, 0.1, 0.05, 0.02]
        .iter()
        .map(|&beta| {
            let params = MeasureParams::new(&spec, beta, &[lam]).unwrap();
            let batch = sample_sites(&params, 1_000_000, seed!(5, "beta-limit")).unwrap();
            ks_one_sample(&batch.coordinate(0), |x| std_normal_cdf(x - lam)).statistic
        })
        .collect();
    assert!(dist.windows(2).all(|w| w[1] < w[0]), "{dist:?}");
}

#[test]
fn integration_by_parts_for_the_functional_library() {
    for spec in [PotentialSpec::fpu_alpha(0.3), PotentialSpec::diagonal(2, 0.5, 1.0)] {
        let d = spec.dim();
        let params = MeasureParams::new(&spec, 0.2, &vec![0.1; d]).unwrap();
        let batch = sample_sites(&params, 200_000, seed!(6, spec.name())).unwrap();
        for i in 0..d {
            for f in SiteFunctional::library(d, i) {
                for c in ibp_check(&batch, &f) {
                    // 25 identities in all: a family-wise 4 s.e. bound, not the per-check 3
                    let z = c.residual / c.combined_se;
                    assert!(z < 4.0, "{}: {} d{} residual {} se {}", spec.name(), c.functional, c.coordinate, c.residual, c.combined_se);
                }
            }
        }
    }
}
