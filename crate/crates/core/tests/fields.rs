use loopzeta::exec::Execution;
use loopzeta::gff::*;
use loopzeta::reweight::*;
use loopzeta::subdivision::*;

fn quad_partition(level: u32) -> DyadicPartition {
    let field = GridField::zeros(4).unwrap();
    // Uniform field: A_h = side, so ε = 2^-level stops exactly at that level.
    subdivide(&field, 1.0, 0.5f64.powi(level as i32), 4).unwrap()
}

#[test]
fn sample_covariance_matches_green_function() {
    let size = 16;
    let green = green_oracle(size).unwrap();
    let pairs = [((8, 8), (8, 8)), ((8, 8), (8, 9)), ((4, 4), (12, 12)), ((1, 1), (1, 1)), ((3, 8), (5, 8))];
    let n = 4000;
    let mut products = vec![Vec::with_capacity(n); pairs.len()];
    for seed in 0..n as u64 {
        let f = sample_dgff_with(size, seed, Execution::Sequential).unwrap();
        for (k, &((i1, j1), (i2, j2))) in pairs.iter().enumerate() {
            products[k].push(f.site(i1, j1) * f.site(i2, j2));
        }
    }
    for (k, &((i1, j1), (i2, j2))) in pairs.iter().enumerate() {
        let expected = green[(interior_index(size, i1, j1), interior_index(size, i2, j2))];
        let mean = products[k].iter().sum::<f64>() / n as f64;
        let var = products[k].iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - expected).abs() < 5.0 * se, "pair {k}: {mean} vs {expected} (se {se})");
    }
}

#[test]
fn prefix_sums_match_direct_averages() {
    let f = sample_dgff(32, 5).unwrap();
    let w = 33;
    for sq in [DyadicSquare::root(), DyadicSquare::new(2, 1, 3), DyadicSquare::new(5, 17, 4)] {
        let span = 32 >> sq.level;
        let (r0, c0) = (sq.i as usize * span, sq.j as usize * span);
        let mut direct = 0.0;
        for r in r0..r0 + span {
            for c in c0..c0 + span {
                let v = f.values();
                direct += 0.25 * (v[r * w + c] + v[r * w + c + 1] + v[(r + 1) * w + c] + v[(r + 1) * w + c + 1]);
            }
        }
        direct /= (span * span) as f64;
        assert!((f.square_average(&sq).unwrap() - direct).abs() < 1e-12);
    }
    assert!(f.square_average(&DyadicSquare::new(6, 0, 0)).is_err());
}

#[test]
fn average_energy_is_chi_square() {
    // Square averages are Gaussian with covariance G, so aᵀG⁻¹a has mean #squares.
    let squares = quad_partition(1);
    let gram = PartitionGram::from_partition(16, &squares, Execution::Sequential).unwrap();
    let n = 2000;
    let mean: f64 = (0..n)
        .map(|seed| {
            let f = sample_dgff(16, 1000 + seed).unwrap();
            gram.energy_of_averages(&square_averages(&f, gram.squares()).unwrap()).unwrap()
        })
        .sum::<f64>()
        / n as f64;
    // Var = 2·4, so the standard error is √(8/n).
    assert!((mean - 4.0).abs() < 5.0 * (8.0 / n as f64).sqrt(), "{mean}");
}

#[test]
fn scan_orders_agree_and_tile_the_square() {
    let f = sample_dgff(64, 3).unwrap();
    let q = charge_to_params(0.0).unwrap().q;
    let eps = relative_epsilon(&f, q, 0.05).unwrap();
    let bfs = subdivide_ordered(&f, q, eps, 6, ScanOrder::BreadthFirst).unwrap();
    let dfs = subdivide_ordered(&f, q, eps, 6, ScanOrder::DepthFirst).unwrap();
    assert_eq!(bfs, dfs);
    assert!(bfs.covers_unit_square());
    let coarse = subdivide(&f, q, 2.0 * eps, 6).unwrap();
    assert!(bfs.refines(&coarse));
    assert!(bfs.len() >= coarse.len());
}

#[test]
fn only_the_product_h_over_q_matters() {
    let f = sample_dgff(64, 8).unwrap();
    let a = subdivide(&f, 2.0, 0.05, 6).unwrap();
    let b = subdivide(&f.scaled(1.5), 3.0, 0.05, 6).unwrap();
    let keys = |p: &DyadicPartition| p.squares.iter().map(|s| s.square).collect::<Vec<_>>();
    assert_eq!(keys(&a), keys(&b));
    for (x, y) in a.squares.iter().zip(&b.squares) {
        assert!((x.quantum_size - y.quantum_size).abs() < 1e-14);
    }
}

#[test]
fn uniform_field_gives_regular_grid() {
    let p = quad_partition(2);
    assert_eq!(p.len(), 16);
    assert!(p.terminated && p.covers_unit_square());
    assert_eq!(p.level_histogram(), vec![0, 0, 16]);
    let g = adjacency_graph(&p).unwrap();
    assert_eq!(g.edges().len(), 24);
    let corner = square_containing(&p, 0.01, 0.01).unwrap();
    assert_eq!(ball_growth(&g, corner, 7).unwrap(), vec![1, 2, 3, 4, 3, 2, 1, 0]);
    assert_eq!(p.to_csv().lines().count(), 17);
    assert!(p.to_svg(256).contains("<svg"));
}

#[test]
fn depth_cap_flags_squares() {
    let p = subdivide(&GridField::zeros(4).unwrap(), 1.0, 1e-3, 3).unwrap();
    assert!(!p.terminated);
    assert_eq!(p.flagged_count(), 64);
    let s = subdivide_summary(&GridField::zeros(4).unwrap(), 1.0, 1e-3, 3, true).unwrap();
    assert!(!s.terminated && s.capped == 1);
}

#[test]
fn mixed_levels_have_correct_adjacency() {
    // Root split once, then only the top-left quadrant split again: 7 squares.
    let p = subdivide_by(
        |s| Ok(if s.level == 0 || (s.level == 1 && s.i == 0 && s.j == 0) { 1.0 } else { 0.0 }),
        0.5,
        4,
        ScanOrder::BreadthFirst,
    )
    .unwrap();
    assert_eq!(p.len(), 7);
    let g = adjacency_graph(&p).unwrap();
    // 4 internal to the small quadrant, 2+2 from its sides, 2 among the large ones.
    assert_eq!(g.edges().len(), 10);
}

#[test]
fn projection_properties() {
    let f = sample_dgff(32, 17).unwrap();
    let q = 2.0;
    let p = quad_partition(2);
    let proj = project_onto_partition(&f, &p, q).unwrap();
    assert!(proj.solver_residual < 1e-10);
    // Idempotent.
    let again = project_onto_partition(&proj.projected_field, &p, q).unwrap();
    for (a, b) in again.projected_field.values().iter().zip(proj.projected_field.values()) {
        assert!((a - b).abs() < 1e-10);
    }
    // Orthogonal decomposition of the Dirichlet energy.
    let rest: Vec<f64> = f.values().iter().zip(proj.projected_field.values()).map(|(a, b)| a - b).collect();
    let lhs = f.dirichlet_energy();
    let rhs = proj.projected_field.dirichlet_energy() + dirichlet_energy_of(32, &rest);
    assert!((lhs - rhs).abs() < 1e-9 * lhs);
    // The interpolant's energy is the Gram quadratic form: Σx² · Q².
    assert!((proj.projected_field.dirichlet_energy() - proj.coefficient_energy * q * q).abs() < 1e-9);
    let direct = coefficient_energy(&f, &p, q, Execution::Parallel).unwrap();
    assert!((direct - proj.coefficient_energy).abs() < 1e-10 * direct);
}

#[test]
fn projection_is_linear() {
    let a = sample_dgff(32, 1).unwrap();
    let b = sample_dgff(32, 2).unwrap();
    let sum: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| 2.0 * x - y).collect();
    let c = GridField::from_site_values(5, 0, sum).unwrap();
    let p = quad_partition(1);
    let pa = project_onto_partition(&a, &p, 1.0).unwrap().projected_field;
    let pb = project_onto_partition(&b, &p, 1.0).unwrap().projected_field;
    let pc = project_onto_partition(&c, &p, 1.0).unwrap().projected_field;
    for k in 0..pa.values().len() {
        assert!((pc.values()[k] - (2.0 * pa.values()[k] - pb.values()[k])).abs() < 1e-10);
    }
}

#[test]
fn gram_matches_dense_green_oracle() {
    let size = 16;
    let p = quad_partition(1);
    let gram = PartitionGram::from_partition(size, &p, Execution::Sequential).unwrap();
    let green = green_oracle(size).unwrap();
    // Average functional of each square as a vector over interior sites.
    let n = size - 1;
    let functional = |sq: &DyadicSquare| -> Vec<f64> {
        let mut e = vec![0.0; n * n];
        for i in 1..size {
            for j in 1..size {
                let mut v = vec![0.0; (size + 1) * (size + 1)];
                v[i * (size + 1) + j] = 1.0;
                let unit = GridField::from_site_values(4, 0, v).unwrap();
                e[interior_index(size, i, j)] = unit.square_average(sq).unwrap();
            }
        }
        e
    };
    let us: Vec<Vec<f64>> = gram.squares().iter().map(functional).collect();
    for s in 0..4 {
        let gu = green.mat_vec(&us[s]);
        for t in 0..4 {
            let oracle: f64 = us[t].iter().zip(&gu).map(|(a, b)| a * b).sum();
            assert!((gram.gram()[(s, t)] - oracle).abs() < 1e-10, "({s}, {t})");
        }
    }
}

#[test]
fn dump_round_trip() {
    let f = sample_dgff(16, 99).unwrap();
    let mut buf = Vec::new();
    f.write_to(&mut buf).unwrap();
    let g = GridField::read_from(buf.as_slice()).unwrap();
    assert_eq!(f.values(), g.values());
    assert_eq!(g.seed(), 99);
}

#[test]
fn dirichlet_energy_counts_modes() {
    // Each of the 31² sine coefficients is a unit Gaussian in the normalized energy.
    let n = 1000;
    let energies: Vec<f64> = (0..n).map(|s| sample_dgff(32, 50_000 + s).unwrap().dirichlet_energy()).collect();
    let mean = energies.iter().sum::<f64>() / n as f64;
    let se = (2.0 * 961.0 / n as f64).sqrt();
    assert!((mean - 961.0).abs() < 3.0 * se, "{mean}");
}

#[test]
fn field_is_centered_and_averages_are_additive() {
    let n = 2000;
    let size = 16;
    let mut sum = vec![0.0; 17 * 17];
    let mut sq = vec![0.0; 17 * 17];
    for s in 0..n {
        let f = sample_dgff(size, 70_000 + s).unwrap();
        for (k, v) in f.values().iter().enumerate() {
            sum[k] += v;
            sq[k] += v * v;
        }
        let root = f.square_average(&DyadicSquare::root()).unwrap();
        let kids: f64 = DyadicSquare::root().children().iter().map(|c| f.square_average(c).unwrap()).sum();
        assert!((root - kids / 4.0).abs() < 1e-12);
    }
    for k in 0..sum.len() {
        let mean = sum[k] / n as f64;
        let se = ((sq[k] / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        assert!(mean.abs() <= 5.0 * se + 1e-300, "site {k}: {mean}");
    }
}
