use loopzeta::graph_loops::*;
use loopzeta::linalg;
use loopzeta::rng;
use rand::Rng;

fn complete(n: usize, boundary: Vec<usize>) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v));
        }
    }
    Graph::new(n, edges, boundary).unwrap()
}

fn two_interior() -> Graph {
    Graph::parse("# boundary: 2 3\n0 1\n0 2\n1 3\n").unwrap()
}

/// Counts edge subsets of size n−1 that form a spanning tree.
fn enumerate_spanning_trees(g: &Graph) -> u64 {
    let n = g.vertex_count();
    let edges = g.edges();
    let m = edges.len();
    let mut count = 0;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        let mut acyclic = true;
        for (k, &(u, v)) in edges.iter().enumerate() {
            if mask & (1 << k) != 0 {
                let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                if a == b {
                    acyclic = false;
                    break;
                }
                parent[a] = b;
            }
        }
        if acyclic {
            count += 1;
        }
    }
    count
}

#[test]
fn laplacian_examples() {
    let l = graph_laplacian(&complete(3, vec![]));
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(l[(i, j)], if i == j { 2.0 } else { -1.0 });
        }
    }
    let g = random_graph(6, 0, 5, 7);
    let l = graph_laplacian(&g);
    for i in 0..6 {
        assert_eq!(l.row(i).iter().sum::<f64>(), 0.0);
    }
}

#[test]
fn rw_laplacian_examples() {
    let m = rw_laplacian(&two_interior()).unwrap();
    assert_eq!(m.row(0), &[1.0, -0.5]);
    assert_eq!(m.row(1), &[-0.5, 1.0]);
    let k3 = rw_laplacian(&complete(3, vec![])).unwrap();
    assert!(k3.mat_vec(&[1.0, 1.0, 1.0]).iter().all(|v| v.abs() < 1e-15));
    // K4 with one boundary vertex: LU determinant against the eigenvalue product.
    let g = complete(4, vec![3]);
    let lu = linalg::det(&rw_laplacian(&g).unwrap());
    let eig: f64 = rw_eigenvalues(&g).unwrap().iter().product();
    assert!((lu - eig).abs() < 1e-12);
}

#[test]
fn determinant_identity_examples() {
    let d = determinant_identity(&two_interior()).unwrap();
    assert!((d.det_rw - 0.75).abs() < 1e-14 && (d.det_graph - 3.0).abs() < 1e-13 && d.degree_product == 4.0);
    let closed = determinant_identity(&complete(4, vec![])).unwrap();
    assert_eq!((closed.det_graph, closed.det_rw, closed.degree_product), (0.0, 0.0, 81.0));
    for seed in 0..10 {
        let g = random_killed_graph(8, seed);
        assert!(determinant_identity(&g).unwrap().relative_gap() < 1e-10, "seed {seed}");
    }
}

#[test]
fn loop_mass_examples() {
    let star = Graph::parse("# boundary: 1 2\n0 1\n0 2\n").unwrap();
    assert_eq!(loop_mass_exact(&star).unwrap(), 0.0);
    let g = two_interior();
    assert!((loop_mass_exact(&g).unwrap() - (4.0f64 / 3.0).ln()).abs() < 1e-14);
    let t = loop_mass_truncated(&g, 40).unwrap();
    assert!((t.mass - (4.0f64 / 3.0).ln()).abs() < 1e-10);
    let grid = dirichlet_grid(4);
    let exact = loop_mass_exact(&grid).unwrap();
    let t = loop_mass_truncated(&grid, 200).unwrap();
    assert!((exact - t.mass).abs() <= t.tail_bound);
}

#[test]
fn bipartite_graphs_have_no_odd_loops() {
    let t = loop_mass_truncated(&dirichlet_grid(3), 15).unwrap();
    for (k, term) in t.terms.iter().enumerate() {
        if (k + 1) % 2 == 1 {
            assert_eq!(*term, 0.0);
        }
    }
}

#[test]
fn walk_enumeration_matches_traces() {
    for seed in 0..6 {
        let g = random_killed_graph(6, 100 + seed);
        let interior = g.interior();
        if interior.len() > 5 {
            continue;
        }
        let p = transition_matrix(&g).unwrap();
        let t = loop_mass_truncated(&g, 8).unwrap();
        let n = interior.len();
        // Closed walks of length k, enumerated step by step.
        let mut walks: Vec<(usize, usize, f64)> = (0..n).map(|x| (x, x, 1.0)).collect();
        for k in 1..=8 {
            walks = walks
                .into_iter()
                .flat_map(|(start, cur, w)| {
                    let row: Vec<f64> = p.row(cur).to_vec();
                    (0..n)
                        .filter(|&y| row[y] > 0.0)
                        .map(|y| (start, y, w * row[y]))
                        .collect::<Vec<_>>()
                })
                .collect();
            let closed: f64 = walks.iter().filter(|w| w.0 == w.1).map(|w| w.2).sum();
            assert!((closed / k as f64 - t.terms[k - 1]).abs() < 1e-13, "seed {seed} k {k}");
        }
    }
}

#[test]
fn truncation_bound_holds_for_small_graphs() {
    for seed in 0..100 {
        let g = random_killed_graph(8, seed);
        let Ok(exact) = loop_mass_exact(&g) else { continue };
        for l in [1, 2, 5, 10, 30, 80] {
            let t = loop_mass_truncated(&g, l).unwrap();
            assert!((exact - t.mass).abs() <= t.tail_bound * (1.0 + 1e-9) + 1e-14, "seed {seed} L {l}");
        }
    }
}

#[test]
fn penalized_mass_limits() {
    assert!(penalized_loop_mass(&two_interior(), 1e-9).unwrap().abs() < 1e-8);
    let g = random_killed_graph(8, 3);
    let mut last = 0.0;
    for a in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
        let m = penalized_loop_mass(&g, a).unwrap();
        assert!(m >= last);
        last = m;
    }
    // K3: eigenvalues of P are 1, −1/2, −1/2, so det′(I − P) = 9/4.
    let k3 = complete(3, vec![]);
    assert!((log_det_prime_rw(&k3).unwrap() - (9.0f64 / 4.0).ln()).abs() < 1e-12);
    let mut prev = f64::INFINITY;
    for k in 2..=6 {
        let a = 1.0 - 10f64.powi(-k);
        let residual = (penalized_loop_mass(&k3, a).unwrap() + (1.0 - a).ln() + (9.0f64 / 4.0).ln()).abs();
        let expected = 2.0 * ((1.0 + a / 2.0) / 1.5).ln().abs();
        assert!((residual - expected).abs() < 1e-9);
        assert!(residual < prev);
        prev = residual;
    }
}

#[test]
fn penalized_mass_derivative_matches_series() {
    let g = random_killed_graph(7, 21);
    let t = loop_mass_truncated(&g, 200).unwrap();
    let h = 1e-5;
    let numeric = (penalized_loop_mass(&g, 0.5 + h).unwrap() - penalized_loop_mass(&g, 0.5 - h).unwrap()) / (2.0 * h);
    // d/dα Σ αᵏ tr(Pᵏ)/k = Σ α^{k−1} tr(Pᵏ); terms[k−1] = tr(Pᵏ)/k.
    let series_direct: f64 = t.terms.iter().enumerate().map(|(i, term)| (i + 1) as f64 * term * 0.5f64.powi(i as i32)).sum();
    assert!((numeric - series_direct).abs() < 1e-6, "{numeric} vs {series_direct}");
}

#[test]
fn matrix_tree_matches_enumeration() {
    assert_eq!(spanning_tree_count(&complete(3, vec![])).unwrap(), 3);
    assert_eq!(spanning_tree_count(&complete(4, vec![])).unwrap(), 16);
    let tree = Graph::new(5, vec![(0, 1), (1, 2), (1, 3), (3, 4)], vec![]).unwrap();
    assert_eq!(spanning_tree_count(&tree).unwrap(), 1);
    let mut checked = 0;
    let mut seed = 0;
    while checked < 50 {
        let mut r = rng::stream(seed, 5);
        let n = r.random_range(2..=7usize);
        let extra = r.random_range(0..=6usize);
        let g = random_graph(n, 0, extra, seed);
        seed += 1;
        if g.edges().len() > 16 {
            continue;
        }
        let expected = enumerate_spanning_trees(&g);
        assert_eq!(spanning_tree_count(&g).unwrap(), expected, "seed {}", seed - 1);
        let roots: Vec<u64> = (0..n).map(|r| spanning_tree_count_with_root(&g, r).unwrap()).collect();
        assert!(roots.iter().all(|&c| c == expected));
        checked += 1;
    }
    let disconnected = Graph::new(4, vec![(0, 1), (2, 3)], vec![]).unwrap();
    assert_eq!(spanning_tree_count(&disconnected).unwrap(), 0);
}

#[test]
fn soup_without_interior_edges_is_empty() {
    let star = Graph::parse("# boundary: 1 2\n0 1\n0 2\n").unwrap();
    let s = sample_loop_soup(&star, 1.0, 10, 4).unwrap();
    assert!(s.is_empty());
    assert_eq!(s.lambda_truncated, 0.0);
}

#[test]
fn soup_is_deterministic_and_canonical() {
    let g = dirichlet_grid(3);
    let a = sample_loop_soup(&g, 2.0, 12, 9).unwrap();
    let b = sample_loop_soup(&g, 2.0, 12, 9).unwrap();
    assert_eq!(a, b);
    for l in &a.loops {
        assert_eq!(l.first(), l.last());
        let cycle = &l[..l.len() - 1];
        let canon = canonical_rotation(cycle);
        assert_eq!(canon.len(), cycle.len());
        assert!(canon <= cycle.to_vec());
    }
}
