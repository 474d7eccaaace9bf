use loopzeta::exec::Execution;
use loopzeta::graph_loops::{graph_laplacian, log_det_prime_rw, penalized_loop_mass, torus_graph};
use loopzeta::lattice_bridge::*;
use loopzeta::linalg::{self, Lu};
use loopzeta::zeta_det::log_det_zeta;
use loopzeta::surfaces::ModelSurface;

/// Matrix-tree route: det′ Δ = N · det(Δ with one row and column removed).
fn minor_log_det_prime(nx: usize, ny: usize) -> f64 {
    let l = graph_laplacian(&torus_graph(nx, ny));
    let keep: Vec<usize> = (1..nx * ny).collect();
    let (sign, log) = Lu::new(&l.principal(&keep)).log_det();
    assert_eq!(sign, 1.0);
    log + ((nx * ny) as f64).ln()
}

#[test]
fn spectral_sum_matches_minor_determinant() {
    let exact = torus_log_det_prime(48, 48, Execution::Parallel).unwrap();
    let oracle = minor_log_det_prime(48, 48);
    assert!((exact - oracle).abs() < 1e-8 * oracle, "{exact} vs {oracle}");
}

#[test]
fn spectral_sum_matches_dense_eigenvalues() {
    let l = graph_laplacian(&torus_graph(32, 32));
    let eig = linalg::symmetric_eigenvalues(&l);
    let oracle: f64 = eig.iter().filter(|e| e.abs() > 1e-9).map(|e| e.ln()).sum();
    let exact = torus_log_det_prime(32, 32, Execution::Sequential).unwrap();
    assert!((exact - oracle).abs() < 1e-9 * oracle);
}

#[test]
fn small_torus_and_validation() {
    // 2×2 torus: doubled edges give eigenvalues 4, 4, 8 on the nonzero modes.
    assert!((torus_log_det_prime(2, 2, Execution::Sequential).unwrap() - 128f64.ln()).abs() < 1e-12);
    assert!(TorusLatticeSpec::new(3, 8).is_err());
    assert!(torus_log_det_prime(1, 1, Execution::Sequential).is_err());
    assert_eq!(TorusLatticeSpec::new(8, 16).unwrap().aspect(), 2.0);
}

#[test]
fn parallel_and_sequential_agree() {
    let a = torus_log_det_prime(64, 128, Execution::Sequential).unwrap();
    let b = torus_log_det_prime(64, 128, Execution::Parallel).unwrap();
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn penalized_loops_recover_reduced_determinant() {
    // For the closed torus, −log det(I − αP) + log(1 − α) → −log det′(I − P) linearly in 1 − α.
    let g = torus_graph(16, 16);
    let reduced = log_det_prime_rw(&g).unwrap();
    let reading = |a: f64| penalized_loop_mass(&g, a).unwrap() + (1.0 - a).ln();
    let (e1, e2) = (2e-5, 1e-5);
    let extrapolated = 2.0 * reading(1.0 - e2) - reading(1.0 - e1);
    assert!((extrapolated + reduced).abs() < 1e-6, "{extrapolated} vs {}", -reduced);
    // Same number through the combinatorial Laplacian: Δ = 4(I − P).
    let combinatorial = torus_log_det_prime(16, 16, Execution::Sequential).unwrap();
    assert!((combinatorial - 255.0 * 4f64.ln() - reduced).abs() < 1e-9);
}

#[test]
fn constant_term_converges() {
    let r = constant_term(&doubling_sequence(64, 1, 3).unwrap(), Execution::Parallel).unwrap();
    assert!(!r.flagged);
    assert!(r.cauchy_gap < 1e-3);
    let unit_area = log_det_zeta(&ModelSurface::FlatTorus { a: 1.0, b: 1.0 }, 0.1).unwrap().log_det;
    assert!((r.extrapolated - unit_area).abs() < 1e-4);
    assert!(constant_term(&[TorusLatticeSpec::new(8, 8).unwrap(), TorusLatticeSpec::new(12, 12).unwrap()], Execution::Sequential).is_err());
    assert!(constant_term(&[TorusLatticeSpec::new(8, 8).unwrap(), TorusLatticeSpec::new(16, 64).unwrap()], Execution::Sequential).is_err());
}

#[test]
fn aspect_differences_match_continuum() {
    let c1 = constant_term(&doubling_sequence(64, 1, 3).unwrap(), Execution::Parallel).unwrap().extrapolated;
    let c2 = constant_term(&doubling_sequence(64, 2, 3).unwrap(), Execution::Parallel).unwrap().extrapolated;
    let s = 2f64.sqrt().recip();
    let continuum = flat_torus_log_det_closed_form(s, 2.0 * s) - flat_torus_log_det_closed_form(1.0, 1.0);
    assert!(((c2 - c1) - continuum).abs() < 1e-3);
}

#[test]
fn eta_closed_form() {
    // η(i) = Γ(1/4) / (2 π^{3/4}).
    let expected = (3.625609908221908f64 / (2.0 * std::f64::consts::PI.powf(0.75))).ln();
    assert!((log_dedekind_eta_imaginary(1.0) - expected).abs() < 1e-14);
    // Modular invariance of det′ under swapping the sides.
    assert!((flat_torus_log_det_closed_form(1.0, 3.0) - flat_torus_log_det_closed_form(3.0, 1.0)).abs() < 1e-12);
}
