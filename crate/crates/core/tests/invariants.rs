use loopzeta::exec::Execution;
use loopzeta::gff::{sample_dgff, GridField};
use loopzeta::graph_loops::*;
use loopzeta::reweight::{density_ratio_check, project_onto_partition};
use loopzeta::subdivision::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn identities_hold_on_random_killed_graphs(seed in any::<u64>()) {
        let g = random_killed_graph(8, seed);
        let d = determinant_identity(&g).unwrap();
        prop_assert!(d.relative_gap() < 1e-10);
        if let Ok(exact) = loop_mass_exact(&g) {
            let t = loop_mass_truncated(&g, 25).unwrap();
            prop_assert!((exact - t.mass).abs() <= t.tail_bound * (1.0 + 1e-9) + 1e-14);
            prop_assert!(t.terms.iter().all(|&x| x >= -1e-15));
        }
    }

    #[test]
    fn spanning_trees_do_not_depend_on_root(seed in any::<u64>(), n in 2usize..8, extra in 0usize..8) {
        let g = random_graph(n, 0, extra, seed);
        let base = spanning_tree_count(&g).unwrap();
        prop_assert!(base >= 1);
        for r in 0..n {
            prop_assert_eq!(spanning_tree_count_with_root(&g, r).unwrap(), base);
        }
    }

    #[test]
    fn partitions_tile_and_refine(seed in 0u64..1000, ratio in 0.02f64..0.5, c in -20.0f64..1.0) {
        let f = sample_dgff(32, seed).unwrap();
        let q = charge_to_params(c).unwrap().q;
        let eps = relative_epsilon(&f, q, ratio).unwrap();
        let fine = subdivide(&f, q, eps, 5).unwrap();
        let coarse = subdivide(&f, q, 2.0 * eps, 5).unwrap();
        prop_assert!(fine.covers_unit_square());
        prop_assert!(fine.refines(&coarse));
        prop_assert_eq!(&fine, &subdivide_ordered(&f, q, eps, 5, ScanOrder::DepthFirst).unwrap());
        for s in fine.squares.iter().filter(|s| !s.flagged) {
            prop_assert!(s.quantum_size <= eps);
        }
    }

    #[test]
    fn projection_is_idempotent(seed in 0u64..1000, depth in 1u32..3) {
        let f = sample_dgff(16, seed).unwrap();
        let p = subdivide(&GridField::zeros(4).unwrap(), 1.0, 0.5f64.powi(depth as i32), 4).unwrap();
        let once = project_onto_partition(&f, &p, 1.0).unwrap();
        let twice = project_onto_partition(&once.projected_field, &p, 1.0).unwrap();
        prop_assert!((once.coefficient_energy - twice.coefficient_energy).abs() < 1e-9 * once.coefficient_energy.max(1.0));
        prop_assert!(once.projected_field.dirichlet_energy() <= f.dirichlet_energy() + 1e-9);
    }

    #[test]
    fn density_ratio_is_flat(x in proptest::collection::vec(-4.0f64..4.0, 1..12), cp in -20.0f64..0.9) {
        let a = density_ratio_check(0.0, cp, &x).unwrap();
        let b = density_ratio_check(0.0, cp, &vec![0.0; x.len()]).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn lattice_determinant_is_symmetric(nx in 2usize..24, ny in 2usize..24) {
        let a = loopzeta::lattice_bridge::torus_log_det_prime(nx, ny, Execution::Sequential).unwrap();
        let b = loopzeta::lattice_bridge::torus_log_det_prime(ny, nx, Execution::Sequential).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}
