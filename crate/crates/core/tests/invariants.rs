//! Property checks across module boundaries.

use proptest::prelude::*;
use qeb_core::figures::{fidelity, purified_distance, trace_distance};
use qeb_core::histstats::{combine, HistogramSpec};
use qeb_core::io::{parse_dataset, to_json_string, DatasetJson};
use qeb_core::mle::mle_default;
use qeb_core::sampler::propose_jump;
use qeb_core::tomodata::{simulate_dataset, standard_pauli_settings};
use qeb_core::{
    log_likelihood, log_likelihood_ratio, point_from_rho, quantum_error_bars, random_point,
    rho_from_point, DensityMatrix, FomHistogram, LogModel, ModelVars,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(dim: usize, seed: u64) -> DensityMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rho_from_point(&random_point::<f64, _>(dim, &mut rng)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_points_give_valid_states(dim in 2usize..5, seed in any::<u64>()) {
        let rho = state(dim, seed);
        // re-validating through the public constructor checks every invariant
        prop_assert!(DensityMatrix::new(rho.matrix().clone()).is_ok());
        let purity = rho.purity();
        prop_assert!(purity <= 1.0 + 1e-12 && purity >= 1.0 / dim as f64 - 1e-12);
    }

    #[test]
    fn point_round_trip_preserves_state(dim in 2usize..4, seed in any::<u64>()) {
        let rho = state(dim, seed);
        let back = rho_from_point(&point_from_rho(&rho).unwrap()).unwrap();
        prop_assert!((back.matrix() - rho.matrix()).norm() < 1e-10);
    }

    #[test]
    fn proposals_stay_on_the_sphere(seed in any::<u64>(), eta in 1e-4f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_point::<f64, _>(3, &mut rng);
        let q = propose_jump(&p, eta, &mut rng);
        let norm: f64 = q.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_measures_are_consistent(a in any::<u64>(), b in any::<u64>()) {
        let rho = state(3, a);
        let sigma = state(3, b);
        let t = trace_distance(rho.matrix(), sigma.matrix());
        let f = fidelity(&rho, &sigma);
        let p = purified_distance(&rho, &sigma);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&t));
        prop_assert!((t - trace_distance(sigma.matrix(), rho.matrix())).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        // Fuchs-van de Graaf: 1 − √F² ≤ T ≤ √(1 − F²)
        prop_assert!(1.0 - f.sqrt() <= t + 1e-9);
        prop_assert!(t <= p + 1e-9);
    }

    #[test]
    fn likelihood_ratio_is_a_difference(a in any::<u64>(), b in any::<u64>(), seed in any::<u64>()) {
        let truth = state(2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let data = simulate_dataset(&truth, &standard_pauli_settings(1), 30, &mut rng).unwrap();
        let (r1, r2) = (state(2, a), state(2, b));
        let ratio = log_likelihood_ratio(&r1, &r2, &data).unwrap();
        let diff = log_likelihood(&r1, &data).unwrap() - log_likelihood(&r2, &data).unwrap();
        prop_assert!((ratio - diff).abs() < 1e-12 * (1.0 + diff.abs()));
    }

    #[test]
    fn mle_beats_the_maximally_mixed_start(seed in any::<u64>()) {
        let truth = state(2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = simulate_dataset(&truth, &standard_pauli_settings(1), 50, &mut rng).unwrap();
        let est = mle_default(&data).unwrap();
        let start = log_likelihood(&DensityMatrix::maximally_mixed(2), &data).unwrap();
        prop_assert!(est.lambda <= start + 1e-12);
        prop_assert!((log_likelihood(&est.state, &data).unwrap() - est.lambda).abs() < 1e-9);
    }

    #[test]
    fn dataset_json_round_trips_exactly(seed in any::<u64>(), shots in 1u64..200) {
        let truth = state(4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = simulate_dataset(&truth, &standard_pauli_settings(2), shots, &mut rng).unwrap();
        let text = to_json_string(&DatasetJson::from_dataset(&data)).unwrap();
        let back = parse_dataset::<f64>(&text).unwrap();
        prop_assert_eq!(&back, &data);
        prop_assert_eq!(to_json_string(&DatasetJson::from_dataset(&back)).unwrap(), text);
    }

    #[test]
    fn histogram_bins_cover_their_interval(lo in -10.0f64..10.0, width in 0.1f64..5.0, bins in 2usize..200, t in 0.0f64..1.0) {
        let spec = HistogramSpec::new(lo, lo + width, bins).unwrap();
        let f = lo + t * width;
        if let Some(k) = spec.bin_of(f) {
            prop_assert!(spec.bin_lower(k) <= f + 1e-12);
            prop_assert!(f < spec.bin_lower(k) + spec.bin_width() + 1e-12);
        } else {
            prop_assert!(f >= lo + width - 1e-12);
        }
    }

    #[test]
    fn combined_density_is_normalized(values in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 1..50), 1..6)) {
        let spec = HistogramSpec::new(0.0, 1.0, 10).unwrap();
        let hists: Vec<FomHistogram> = values.iter().map(|v| FomHistogram::from_values(spec, v)).collect();
        let c = combine(&hists).unwrap();
        prop_assert!((c.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mirrored_orientation_mirrors_the_peak(a2 in 10.0f64..1e4, a1 in -50.0f64..50.0, m in 0.0f64..40.0) {
        let model = LogModel::new(a2, a1, m, 0.0);
        let up = quantum_error_bars(&model, ModelVars::new(0.0, 1.0).unwrap());
        let down = quantum_error_bars(&model, ModelVars::new(1.0, -1.0).unwrap());
        if let (Ok(up), Ok(down)) = (up, down) {
            prop_assert!((up.f0 + down.f0 - 1.0).abs() < 1e-12);
            prop_assert_eq!(up.delta, down.delta);
            prop_assert_eq!(up.gamma, down.gamma);
        }
    }
}
