//! Graph Laplacians, random-walk loop masses, killing regularisation and loop soups.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
pub use crate::linalg::SquareMatrix;
use crate::linalg::{self, Lu};
use crate::rng;

/// Finite multigraph with a designated (possibly empty) boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    boundary: Vec<usize>,
    degrees: Vec<usize>,
}

impl Graph {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>, boundary: Vec<usize>) -> Result<Graph> {
        if vertex_count == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut degrees = vec![0; vertex_count];
        for &(u, v) in &edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) has an endpoint outside 0..{vertex_count}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            degrees[u] += 1;
            degrees[v] += 1;
        }
        let mut boundary = boundary;
        boundary.sort_unstable();
        boundary.dedup();
        if let Some(&b) = boundary.iter().find(|&&b| b >= vertex_count) {
            return Err(Error::VertexOutOfRange(b));
        }
        Ok(Graph {
            vertex_count,
            edges,
            boundary,
            degrees,
        })
    }

    /// Parses the edge-list format: one `u v` pair per line, `#` comments, and the
    /// optional headers `# boundary: i j k` and `# vertices: n`.
    pub fn parse(text: &str) -> Result<Graph> {
        let mut edges = Vec::new();
        let mut boundary = Vec::new();
        let mut declared = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let perr = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(list) = comment.strip_prefix("boundary:") {
                    for tok in list.split_whitespace() {
                        boundary.push(tok.parse::<usize>().map_err(|e| perr(format!("`{tok}`: {e}")))?);
                    }
                } else if let Some(n) = comment.strip_prefix("vertices:") {
                    let n = n.trim();
                    declared = Some(n.parse::<usize>().map_err(|e| perr(format!("`{n}`: {e}")))?);
                }
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(perr(format!("expected `u v`, found `{line}`")));
            }
            let u = toks[0].parse::<usize>().map_err(|e| perr(format!("`{}`: {e}", toks[0])))?;
            let v = toks[1].parse::<usize>().map_err(|e| perr(format!("`{}`: {e}", toks[1])))?;
            edges.push((u, v));
        }
        let inferred = edges
            .iter()
            .flat_map(|&(u, v)| [u, v])
            .chain(boundary.iter().copied())
            .max()
            .map_or(0, |m| m + 1);
        Graph::new(declared.unwrap_or(inferred), edges, boundary)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# vertices: {}\n", self.vertex_count);
        if !self.boundary.is_empty() {
            let b: Vec<String> = self.boundary.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("# boundary: {}\n", b.join(" ")));
        }
        for (u, v) in &self.edges {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn is_killed(&self) -> bool {
        !self.boundary.is_empty()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary.binary_search(&v).is_ok()
    }

    pub fn interior(&self) -> Vec<usize> {
        (0..self.vertex_count).filter(|&v| !self.is_boundary(v)).collect()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.neighbors();
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.vertex_count
    }
}

/// Δ_graph = D − A on all vertices.
pub fn graph_laplacian(g: &Graph) -> SquareMatrix {
    let n = g.vertex_count;
    let mut m = SquareMatrix::zeros(n);
    for v in 0..n {
        m[(v, v)] = g.degrees[v] as f64;
    }
    for &(u, v) in &g.edges {
        m[(u, v)] -= 1.0;
        m[(v, u)] -= 1.0;
    }
    m
}

/// Transition matrix of the walk killed on the boundary, indexed by the interior vertices.
pub fn transition_matrix(g: &Graph) -> Result<SquareMatrix> {
    let interior = g.interior();
    let mut index = vec![usize::MAX; g.vertex_count];
    for (k, &v) in interior.iter().enumerate() {
        index[v] = k;
    }
    if let Some(&v) = interior.iter().find(|&&v| g.degrees[v] == 0) {
        return Err(Error::UndefinedTransition(v));
    }
    let mut p = SquareMatrix::zeros(interior.len());
    for &(u, v) in &g.edges {
        for (a, b) in [(u, v), (v, u)] {
            if index[a] != usize::MAX && index[b] != usize::MAX {
                p[(index[a], index[b])] += 1.0 / g.degrees[a] as f64;
            }
        }
    }
    Ok(p)
}

/// I − P on the interior index set.
pub fn rw_laplacian(g: &Graph) -> Result<SquareMatrix> {
    Ok(transition_matrix(g)?.identity_minus())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterminantIdentity {
    pub det_graph: f64,
    pub det_rw: f64,
    pub degree_product: f64,
}

impl DeterminantIdentity {
    pub fn relative_gap(&self) -> f64 {
        let rhs = self.degree_product * self.det_rw;
        if self.det_graph == 0.0 && rhs == 0.0 {
            0.0
        } else {
            (self.det_graph - rhs).abs() / self.det_graph.abs().max(rhs.abs())
        }
    }
}

/// det Δ_graph (Dirichlet minor), det(I − P) and ∏ d over the interior.
pub fn determinant_identity(g: &Graph) -> Result<DeterminantIdentity> {
    let interior = g.interior();
    let degree_product = interior.iter().map(|&v| g.degrees[v] as f64).product();
    if !g.is_killed() {
        transition_matrix(g)?;
        return Ok(DeterminantIdentity {
            det_graph: 0.0,
            det_rw: 0.0,
            degree_product,
        });
    }
    let minor = graph_laplacian(g).principal(&interior);
    Ok(DeterminantIdentity {
        det_graph: linalg::det(&minor),
        det_rw: linalg::det(&rw_laplacian(g)?),
        degree_product,
    })
}

/// Certified upper bound on the spectral radius of a nonnegative matrix: 200 power
/// iterations on the lazy chain (I + P)/2, then the Collatz–Wielandt bound
/// max_i (Pv)_i / v_i on P itself, padded by 1e-12.
pub fn spectral_radius_bound(p: &SquareMatrix) -> f64 {
    let n = p.dimension;
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0; n];
    for _ in 0..200 {
        let pv = p.mat_vec(&v);
        let mut next: Vec<f64> = v.iter().zip(&pv).map(|(a, b)| 0.5 * (a + b)).collect();
        let norm = next.iter().cloned().fold(0.0, f64::max);
        next.iter_mut().for_each(|x| *x /= norm);
        v = next;
    }
    let pv = p.mat_vec(&v);
    let cw = pv
        .iter()
        .zip(&v)
        .map(|(a, b)| a / b)
        .fold(0.0, f64::max);
    cw + 1e-12
}

fn transient_transition(g: &Graph) -> Result<(SquareMatrix, f64)> {
    let p = transition_matrix(g)?;
    let rho = spectral_radius_bound(&p);
    if rho >= 1.0 - 1e-12 {
        return Err(Error::NonTransientWalk(rho));
    }
    Ok((p, rho))
}

/// Total mass of the random-walk loop measure, −log det(I − P).
pub fn loop_mass_exact(g: &Graph) -> Result<f64> {
    let (p, _) = transient_transition(g)?;
    let (_, log) = Lu::new(&p.identity_minus()).log_det();
    Ok(-log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMass {
    pub mass: f64,
    pub tail_bound: f64,
    pub rho_bound: f64,
    /// tr(Pᵏ)/k for k = 1..=max_len.
    pub terms: Vec<f64>,
}

fn tail_bound(n: usize, rho: f64, max_len: usize) -> f64 {
    let l1 = (max_len + 1) as f64;
    n as f64 * rho.powf(l1) / (l1 * (1.0 - rho))
}

/// Σ_{k ≤ max_len} tr(Pᵏ)/k together with the certified tail bound.
pub fn loop_mass_truncated(g: &Graph, max_len: usize) -> Result<TruncatedMass> {
    let (p, rho) = transient_transition(g)?;
    let mut power = p.clone();
    let mut terms = Vec::with_capacity(max_len);
    for k in 1..=max_len {
        if k > 1 {
            power = power.mul(&p);
        }
        terms.push(power.trace() / k as f64);
    }
    Ok(TruncatedMass {
        mass: crate::exec::compensated_sum(terms.iter().copied()),
        tail_bound: tail_bound(p.dimension, rho, max_len),
        rho_bound: rho,
        terms,
    })
}

/// −log det(I − αP); defined for closed graphs too.
pub fn penalized_loop_mass(g: &Graph, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let p = transition_matrix(g)?;
    let (_, log) = Lu::new(&p.scaled(alpha).identity_minus()).log_det();
    Ok(-log)
}

/// Eigenvalues of I − P via the symmetric similarity D^{1/2} P D^{-1/2}.
pub fn rw_eigenvalues(g: &Graph) -> Result<Vec<f64>> {
    let p = transition_matrix(g)?;
    let interior = g.interior();
    let d: Vec<f64> = interior.iter().map(|&v| (g.degrees[v] as f64).sqrt()).collect();
    let mut s = SquareMatrix::zeros(p.dimension);
    for i in 0..p.dimension {
        for j in 0..p.dimension {
            s[(i, j)] = if i == j { 1.0 } else { 0.0 } - d[i] * p[(i, j)] / d[j];
        }
    }
    Ok(linalg::symmetric_eigenvalues(&s))
}

/// log det′(I − P): eigenvalues of modulus below 1e-10 are removed.
pub fn log_det_prime_rw(g: &Graph) -> Result<f64> {
    Ok(rw_eigenvalues(g)?
        .into_iter()
        .filter(|e| e.abs() > 1e-10)
        .map(f64::ln)
        .sum())
}

/// Number of spanning trees via the matrix-tree theorem with vertex `root` deleted.
pub fn spanning_tree_count_with_root(g: &Graph, root: usize) -> Result<u64> {
    if root >= g.vertex_count {
        return Err(Error::VertexOutOfRange(root));
    }
    if !g.is_connected() {
        return Ok(0);
    }
    if g.vertex_count == 1 {
        return Ok(1);
    }
    let keep: Vec<usize> = (0..g.vertex_count).filter(|&v| v != root).collect();
    let d = linalg::det(&graph_laplacian(g).principal(&keep));
    let rounded = d.round();
    if (d - rounded).abs() > 1e-6 * rounded.max(1.0) {
        return Err(Error::InvalidGraph(format!(
            "minor determinant {d} is not within tolerance of an integer"
        )));
    }
    Ok(rounded as u64)
}

pub fn spanning_tree_count(g: &Graph) -> Result<u64> {
    spanning_tree_count_with_root(g, 0)
}

/// Lexicographically least cyclic rotation of a rooted loop (given without its closing vertex).
pub fn canonical_rotation(cycle: &[usize]) -> Vec<usize> {
    let k = cycle.len();
    (0..k)
        .map(|s| (0..k).map(|i| cycle[(s + i) % k]).collect::<Vec<_>>())
        .min()
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopSoupSample {
    /// Rooted loops `(x₁, …, x_k, x₁)` in original vertex labels.
    pub loops: Vec<Vec<usize>>,
    pub intensity: f64,
    pub truncation_length: usize,
    /// Σ_{k ≤ L} tr(Pᵏ)/k.
    pub lambda_truncated: f64,
    pub tail_bound: f64,
    /// Set when the truncation tail exceeds 1e-6 of the total mass.
    pub tail_warning: bool,
}

impl LoopSoupSample {
    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }
}

/// Precomputed matrix powers for repeated soup sampling on one graph.
pub struct LoopSoupSampler {
    interior: Vec<usize>,
    powers: Vec<SquareMatrix>,
    terms: Vec<f64>,
    lambda: f64,
    tail_bound: f64,
}

impl LoopSoupSampler {
    pub fn new(g: &Graph, max_len: usize) -> Result<Self> {
        if !g.is_killed() {
            return Err(Error::InvalidGraph("loop soups need a nonempty boundary".into()));
        }
        if max_len == 0 {
            return Err(Error::param("max_len", "must be at least 1"));
        }
        let (p, rho) = transient_transition(g)?;
        let mut powers = vec![SquareMatrix::identity(p.dimension), p.clone()];
        for k in 2..=max_len {
            let next = powers[k - 1].mul(&p);
            powers.push(next);
        }
        let terms: Vec<f64> = (1..=max_len).map(|k| powers[k].trace() / k as f64).collect();
        Ok(LoopSoupSampler {
            interior: g.interior(),
            lambda: crate::exec::compensated_sum(terms.iter().copied()),
            tail_bound: tail_bound(p.dimension, rho, max_len),
            powers,
            terms,
        })
    }

    pub fn lambda_truncated(&self) -> f64 {
        self.lambda
    }

    /// tr(Pᵏ)/k for k = 1..=L.
    pub fn length_masses(&self) -> &[f64] {
        &self.terms
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn sample<R: Rng>(&self, c: f64, rng: &mut R) -> Result<LoopSoupSample> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("c", format!("intensity must be positive, got {c}")));
        }
        let max_len = self.terms.len();
        let mut loops = Vec::new();
        for k in 1..=max_len {
            let mean = c * self.terms[k - 1];
            if mean <= 0.0 {
                continue;
            }
            let count = Poisson::new(mean)
                .map_err(|e| Error::param("c", e.to_string()))?
                .sample(rng) as usize;
            for _ in 0..count {
                loops.push(self.sample_loop(k, rng));
            }
        }
        Ok(LoopSoupSample {
            loops,
            intensity: c,
            truncation_length: max_len,
            lambda_truncated: self.lambda,
            tail_bound: self.tail_bound,
            tail_warning: self.tail_bound > 1e-6 * self.lambda.max(f64::MIN_POSITIVE),
        })
    }

    fn pick<R: Rng>(weights: impl Iterator<Item = f64> + Clone, rng: &mut R) -> usize {
        let total: f64 = weights.clone().sum();
        let mut u = rng.random::<f64>() * total;
        let mut last = 0;
        for (i, w) in weights.enumerate() {
            if w > 0.0 {
                last = i;
                if u < w {
                    return i;
                }
                u -= w;
            }
        }
        last
    }

    fn sample_loop<R: Rng>(&self, k: usize, rng: &mut R) -> Vec<usize> {
        let n = self.interior.len();
        let pk = &self.powers[k];
        let root = Self::pick((0..n).map(|x| pk[(x, x)]), rng);
        let p = &self.powers[1];
        let mut path = Vec::with_capacity(k + 1);
        path.push(root);
        let mut cur = root;
        for j in 0..k {
            let rest = &self.powers[k - 1 - j];
            let next = Self::pick((0..n).map(|y| p[(cur, y)] * rest[(y, root)]), rng);
            path.push(next);
            cur = next;
        }
        debug_assert_eq!(cur, root);
        path.into_iter().map(|i| self.interior[i]).collect()
    }
}

pub fn sample_loop_soup(g: &Graph, c: f64, max_len: usize, seed: u64) -> Result<LoopSoupSample> {
    let sampler = LoopSoupSampler::new(g, max_len)?;
    sampler.sample(c, &mut rng::stream(seed, 0))
}

/// Random connected multigraph on `vertex_count` vertices with `boundary_count`
/// boundary vertices: a random spanning tree plus `extra_edges` random edges.
pub fn random_graph(vertex_count: usize, boundary_count: usize, extra_edges: usize, seed: u64) -> Graph {
    assert!(vertex_count >= 2 && boundary_count < vertex_count);
    let mut rng = rng::stream(seed, 0x6772_6170);
    let mut edges = Vec::new();
    for v in 1..vertex_count {
        edges.push((rng.random_range(0..v), v));
    }
    for _ in 0..extra_edges {
        let u = rng.random_range(0..vertex_count);
        let mut v = rng.random_range(0..vertex_count - 1);
        if v >= u {
            v += 1;
        }
        edges.push((u, v));
    }
    let mut vertices: Vec<usize> = (0..vertex_count).collect();
    for i in (1..vertex_count).rev() {
        vertices.swap(i, rng.random_range(0..=i));
    }
    let boundary = vertices[..boundary_count].to_vec();
    Graph::new(vertex_count, edges, boundary).expect("generated graph is valid")
}

/// Random killed graph with 3 to `max_vertices` vertices.
pub fn random_killed_graph(max_vertices: usize, seed: u64) -> Graph {
    let mut rng = rng::stream(seed, 0x6b69_6c6c);
    let n = rng.random_range(3..=max_vertices.max(3));
    let b = rng.random_range(1..=n / 2);
    let extra = rng.random_range(0..=n);
    random_graph(n, b, extra, seed)
}

/// The L×L grid of interior vertices surrounded by a boundary ring (corners omitted).
pub fn dirichlet_grid(side: usize) -> Graph {
    let total = side * side + 4 * side;
    let idx = |i: usize, j: usize| i * side + j;
    let mut edges = Vec::new();
    for i in 0..side {
        for j in 0..side {
            if i + 1 < side {
                edges.push((idx(i, j), idx(i + 1, j)));
            }
            if j + 1 < side {
                edges.push((idx(i, j), idx(i, j + 1)));
            }
        }
    }
    let ring = side * side;
    for k in 0..side {
        edges.push((idx(0, k), ring + k));
        edges.push((idx(side - 1, k), ring + side + k));
        edges.push((idx(k, 0), ring + 2 * side + k));
        edges.push((idx(k, side - 1), ring + 3 * side + k));
    }
    Graph::new(total, edges, (ring..total).collect()).expect("grid is valid")
}

/// Discrete n_x × n_y torus (periodic grid); multi-edges appear for sides of length 2.
pub fn torus_graph(nx: usize, ny: usize) -> Graph {
    let idx = |i: usize, j: usize| i * ny + j;
    let mut edges = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            edges.push((idx(i, j), idx((i + 1) % nx, j)));
            edges.push((idx(i, j), idx(i, (j + 1) % ny)));
        }
    }
    Graph::new(nx * ny, edges, Vec::new()).expect("torus is valid")
}
