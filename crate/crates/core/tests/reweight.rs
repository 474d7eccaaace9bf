use loopzeta::exec::Execution;
use loopzeta::reweight::*;
use loopzeta::subdivision::charge_to_params;

#[test]
fn charges_follow_the_central_charge_relation() {
    for (c, cp) in [(0.0, -2.0), (0.0, -12.5), (0.0, 19.0), (-12.5, 12.5)] {
        let (q, q_new) = background_charges(c, cp).unwrap();
        assert!((q_new * q_new - (q * q - cp / 6.0)).abs() < 1e-12);
        let r = weight_report(c, cp, 3.0).unwrap();
        assert_eq!(r.c_new, c + cp);
        assert!((r.log_weight - cp / 4.0).abs() < 1e-15);
    }
    // γ and Q are consistent: Q = γ/2 + 2/γ.
    let p = charge_to_params(-12.5).unwrap();
    let gamma = p.gamma.unwrap();
    assert!((p.q - (gamma / 2.0 + 2.0 / gamma)).abs() < 1e-14);
    assert!(charge_to_params(23.5).unwrap().gamma.is_none());
    assert!(background_charges(0.0, 25.0).is_err());
}

#[test]
fn density_ratio_is_constant() {
    let xs = [vec![0.0; 5], vec![0.3, -1.2, 2.0, 0.1, 0.0], vec![5.0, 5.0, -5.0, 0.5, 1e-3]];
    for (c, cp) in [(0.0, -2.0), (0.0, -12.5), (-12.5, 12.5)] {
        let (q, q_new) = background_charges(c, cp).unwrap();
        let values: Vec<f64> = xs.iter().map(|x| density_ratio_check(c, cp, x).unwrap()).collect();
        for v in &values {
            assert!((v - 5.0 * (q / q_new).ln()).abs() < 1e-10);
        }
    }
}

#[test]
fn experiment_is_deterministic_and_trivial_at_zero_shift() {
    let cfg = ReweightConfig { grid_size: 32, epsilon: 0.5, c: 0.0, c_prime: 0.0, n_samples: 300, seed: 4 };
    let a = reweighting_experiment(&cfg, Execution::Parallel).unwrap();
    let b = reweighting_experiment(&cfg, Execution::Sequential).unwrap();
    assert_eq!(a, b);
    assert!((a.ess - 300.0).abs() < 1e-9);
    assert_eq!(a.q, a.q_new);
    let total: f64 = a.direct_counts.iter().sum();
    assert!((total - 300.0).abs() < 1e-9);
    assert!((a.weighted_counts.iter().sum::<f64>() - total).abs() < 1e-9);
}

#[test]
fn shifted_experiment_reports_sane_statistics() {
    let cfg = ReweightConfig { grid_size: 32, epsilon: 0.5, c: 0.0, c_prime: -12.5, n_samples: 400, seed: 9 };
    let s = reweighting_experiment(&cfg, Execution::Parallel).unwrap();
    assert!(s.ess > 0.0 && s.ess <= 400.0);
    assert!((0.0..=1.0).contains(&s.count_test.p_value));
    assert!((0.0..=1.0).contains(&s.level_test.p_value));
    assert!(s.mean_count_direct > 0.0 && s.mean_count_weighted > 0.0);
    let bad = ReweightConfig { c_prime: 2.0, ..cfg };
    assert!(reweighting_experiment(&bad, Execution::Sequential).is_err());
}
