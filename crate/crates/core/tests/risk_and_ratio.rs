use deconv::asymptotics::approximation_ratio;
use deconv::bandwidth::{mise_grid_search, MiseTerms};
use deconv::simulation::{run_study, BandwidthChoice, StudyConfig};
use deconv::{ErrorModel, Kernel, TargetDensity};

fn noise() -> ErrorModel<f64> {
    ErrorModel::gaussian(0.4).unwrap()
}

#[test]
fn variance_term_decreases_with_n() {
    let terms =
        MiseTerms::compute(&Kernel::fan(), &noise(), &TargetDensity::chi_square3(), 0.2).unwrap();
    let mut prev = f64::INFINITY;
    for n in [10, 50, 100, 200, 1000] {
        let v = terms.integrated_variance(n);
        assert!(v < prev);
        prev = v;
    }
}

#[test]
fn optimal_bandwidth_shrinks_with_n() {
    let target = TargetDensity::chi_square3();
    let h: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|&n| {
            mise_grid_search(&Kernel::fan(), &noise(), &target, n)
                .unwrap()
                .argmin_h
        })
        .collect();
    assert!(h[0] >= h[1] && h[1] >= h[2], "{h:?}");
}

#[test]
fn exact_mise_matches_monte_carlo() {
    let target = TargetDensity::standard_normal();
    let mut config = StudyConfig::new(target.clone(), noise(), 50, BandwidthChoice::Fixed(0.3));
    config.replications = 200;
    config.master_seed = 3;
    config.use_fft = true;
    let ise = run_study(&config).unwrap().ise.unwrap();
    let exact = MiseTerms::compute(&Kernel::fan(), &noise(), &target, 0.3)
        .unwrap()
        .mise(50);
    assert!(
        (ise.mean - exact).abs() < 3.0 * ise.mean_se(),
        "{} vs {exact}",
        ise.mean
    );
}

#[test]
fn ratio_tends_to_one_from_above() {
    for kernel in [Kernel::fan(), Kernel::sinc(), Kernel::wand()] {
        let r = |h| approximation_ratio(&kernel, &noise(), h).unwrap();
        let mut prev = f64::INFINITY;
        for h in [0.02, 0.01, 0.005, 0.0025] {
            let d = r(h) - 1.0;
            assert!(d > 0.0 && d < prev, "{} at h = {h}", kernel.name());
            prev = d;
        }
        assert!(prev < 1e-3);
        for k in 1..=50 {
            assert!(r(0.02 * k as f64) > 0.0);
        }
        for k in 17..=50 {
            assert!(
                r(0.02 * k as f64) <= 1.0,
                "{} at h = {}",
                kernel.name(),
                0.02 * k as f64
            );
        }
    }
}
