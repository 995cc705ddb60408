mod common;

use common::{ks_critical_99, ks_statistic, mean_se, simpson};
use oppaccess::rng::seeded;
use oppaccess::HyperExpDist;
use proptest::prelude::*;

fn three_state() -> HyperExpDist {
    HyperExpDist::new(vec![1.0 / 3.0; 3], vec![5.0, 100.0, 6000.0]).unwrap()
}

#[test]
fn cdf_matches_quadrature_of_pdf() {
    let d = three_state();
    let t = 0.01;
    let quad = simpson(|s| d.pdf(s).unwrap(), 0.0, t, 20_000);
    assert!((d.cdf(t).unwrap() - quad).abs() < 1e-10, "{} vs {quad}", d.cdf(t).unwrap());
}

#[test]
fn single_exponential_closed_forms() {
    let d = HyperExpDist::exponential(100.0).unwrap();
    assert!((d.cdf(10f64.ln() / 100.0).unwrap() - 0.9).abs() < 1e-15);
    assert_eq!(d.cdf(0.0).unwrap(), 0.0);
    for t in [0.0, 0.3, 7.0] {
        assert!((HyperExpDist::exponential(50.0).unwrap().value_to_cost(t).unwrap() - 0.02).abs() < 1e-15);
    }
    assert!((HyperExpDist::exponential(500.0).unwrap().mean() - 0.002).abs() < 1e-18);
}

#[test]
fn value_to_cost_anchors() {
    let d = three_state();
    assert!((d.value_to_cost(0.0).unwrap() * 2035.0 - 1.0).abs() < 1e-12);
    assert!((d.value_to_cost(1.0).unwrap() - 0.2).abs() < 1e-3);
}

#[test]
fn single_exponential_sample_mean() {
    let d = HyperExpDist::exponential(100.0).unwrap();
    let xs = d.sample_n(1_000_000, &mut seeded(31));
    let (m, se) = mean_se(&xs);
    assert!((m - 0.01).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn mixture_samples_pass_ks() {
    let d = HyperExpDist::new(vec![0.5, 0.5], vec![10.0, 1000.0]).unwrap();
    let xs = d.sample_n(1_000_000, &mut seeded(32));
    let ks = ks_statistic(&xs, |t| d.cdf(t).unwrap());
    assert!(ks < ks_critical_99(xs.len()), "KS {ks}");
}

#[test]
fn record_format() {
    let d = HyperExpDist::new(vec![0.32, 0.68], vec![160.0, 3670.0]).unwrap();
    let text = serde_json::to_string(&d).unwrap();
    assert_eq!(text, r#"{"n":2,"alphas":[0.32,0.68],"lambdas":[160.0,3670.0]}"#);
    let bad = r#"{"n":3,"alphas":[0.32,0.68],"lambdas":[160.0,3670.0]}"#;
    assert!(serde_json::from_str::<HyperExpDist>(bad).is_err());
}

fn mixture() -> impl Strategy<Value = HyperExpDist> {
    (1usize..=4)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.01f64..1.0, n),
                prop::collection::vec(0.0f64..4.0, n),
            )
        })
        .prop_map(|(w, log_rates)| {
            let rates = log_rates.iter().map(|l| 10f64.powf(*l)).collect();
            HyperExpDist::from_weights(w, rates).unwrap()
        })
}

proptest! {
    #[test]
    fn weights_sum_to_one_and_rates_sorted(d in mixture()) {
        prop_assert!((d.alphas().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(d.lambdas().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(d.alphas().iter().all(|a| *a >= 0.0));
    }

    #[test]
    fn ccdf_complements_cdf(d in mixture(), t in 0.0f64..2.0) {
        let (c, s) = (d.cdf(t).unwrap(), d.ccdf(t).unwrap());
        prop_assert!((c + s - 1.0).abs() < 1e-12);
        let direct: f64 = d.components().map(|(a, l)| a * (-l * t).exp()).sum();
        prop_assert!((s - direct).abs() < 1e-12);
    }

    #[test]
    fn pdf_is_minus_derivative_of_ccdf(d in mixture(), u in 0.0f64..1.0) {
        // Probe where the density is not vanishingly small.
        let t = u * 5.0 / d.max_rate();
        let h = 1e-5 / d.max_rate();
        let fd = (d.ccdf(t).unwrap() - d.ccdf(t + h).unwrap()) / h;
        let mid = d.pdf(t + h / 2.0).unwrap();
        prop_assert!((fd - mid).abs() <= 1e-6 * mid, "{fd} vs {mid}");
    }

    #[test]
    fn value_to_cost_nondecreasing_and_bounded(d in mixture()) {
        let lo = 1.0 / d.mean_rate();
        let hi = 1.0 / d.min_rate();
        let mut prev = 0.0;
        for k in 0..400 {
            let t = 20.0 / d.min_rate() * k as f64 / 400.0;
            let r = d.value_to_cost(t).unwrap();
            prop_assert!(r >= prev * (1.0 - 1e-12));
            prop_assert!(r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12));
            prev = r;
        }
    }

    #[test]
    fn inverses_round_trip(d in mixture(), q in 1e-6f64..0.999) {
        let t = d.inverse_ccdf(q).unwrap();
        prop_assert!((d.ccdf(t).unwrap() - q).abs() <= 1e-12 * q.max(1e-3) + 1e-15);
        let s = d.inverse_cdf(q).unwrap();
        prop_assert!((d.cdf(s).unwrap() - q).abs() <= 1e-12);
    }

    #[test]
    fn interval_mass_and_integral_match_quadrature(d in mixture(), a in 0.0f64..1.0, w in 0.0f64..1.0) {
        let scale = 1.0 / d.max_rate();
        let (a, b) = (a * 3.0 * scale, a * 3.0 * scale + (w + 0.01) * 3.0 * scale);
        let mass = simpson(|t| d.pdf(t).unwrap(), a, b, 2000);
        let integral = simpson(|t| d.ccdf(t).unwrap(), a, b, 2000);
        prop_assert!((d.interval_mass(a, b) - mass).abs() < 1e-9);
        prop_assert!((d.survival_integral(a, b) - integral).abs() < 1e-9 * scale);
    }

    #[test]
    fn sampling_deterministic_under_seed(d in mixture(), seed in any::<u64>()) {
        prop_assert_eq!(d.sample_n(50, &mut seeded(seed)), d.sample_n(50, &mut seeded(seed)));
    }
}
