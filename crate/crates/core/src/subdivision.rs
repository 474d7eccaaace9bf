//! Quantum-size square subdivisions of the unit square.
//!
//! A dyadic square S has quantum size A_h(S) = e^{h_S/Q}·ℓ(S), with ℓ the side
//! length. The ε-subdivision keeps the maximal dyadic squares with A_h ≤ ε.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::gff::GridField;
use crate::graph_loops::Graph;

/// Matter central charge and the derived background charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeParams {
    pub c: f64,
    pub q: f64,
    /// Coupling γ ∈ (0, 2], defined only for c ≤ 1.
    pub gamma: Option<f64>,
}

/// Q = √((25 − c)/6), and γ = Q − √(Q² − 4) when c ≤ 1.
pub fn charge_to_params(c: f64) -> Result<ChargeParams> {
    if !(c < 25.0) || !c.is_finite() {
        return Err(Error::param("c", format!("Q undefined for c = {c}; need c < 25")));
    }
    let q = ((25.0 - c) / 6.0).sqrt();
    let gamma = (c <= 1.0).then(|| {
        let disc = (q * q - 4.0).max(0.0).sqrt();
        // 4/(Q + disc) is Q − disc without cancellation.
        4.0 / (q + disc)
    });
    Ok(ChargeParams { c, q, gamma })
}

/// Dyadic square [j, j+1)·2^{−level} × [i, i+1)·2^{−level}; `i` indexes rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicSquare {
    pub level: u32,
    pub i: u32,
    pub j: u32,
}

impl DyadicSquare {
    pub fn new(level: u32, i: u32, j: u32) -> Self {
        assert!(level < 32 && (i as u64) < (1u64 << level) && (j as u64) < (1u64 << level));
        DyadicSquare { level, i, j }
    }

    pub fn root() -> Self {
        DyadicSquare { level: 0, i: 0, j: 0 }
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn children(&self) -> [DyadicSquare; 4] {
        let (l, i, j) = (self.level + 1, 2 * self.i, 2 * self.j);
        [
            DyadicSquare { level: l, i, j },
            DyadicSquare { level: l, i, j: j + 1 },
            DyadicSquare { level: l, i: i + 1, j },
            DyadicSquare { level: l, i: i + 1, j: j + 1 },
        ]
    }

    pub fn parent(&self) -> Option<DyadicSquare> {
        (self.level > 0).then(|| DyadicSquare { level: self.level - 1, i: self.i / 2, j: self.j / 2 })
    }

    /// True if `other` lies inside `self` (or equals it).
    pub fn contains(&self, other: &DyadicSquare) -> bool {
        other.level >= self.level
            && other.i >> (other.level - self.level) == self.i
            && other.j >> (other.level - self.level) == self.j
    }

    /// Same-level neighbour across a side, if inside the unit square.
    pub fn neighbor(&self, di: i64, dj: i64) -> Option<DyadicSquare> {
        let n = 1i64 << self.level;
        let (i, j) = (self.i as i64 + di, self.j as i64 + dj);
        ((0..n).contains(&i) && (0..n).contains(&j)).then(|| DyadicSquare { level: self.level, i: i as u32, j: j as u32 })
    }
}

/// A_h(S) = e^{h_S/Q}·ℓ(S).
pub fn quantum_size(field: &GridField, q: f64, sq: &DyadicSquare) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::param("q", format!("must be positive, got {q}")));
    }
    Ok((field.square_average(sq)? / q).exp() * sq.side())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSquare {
    pub square: DyadicSquare,
    pub quantum_size: f64,
    /// Kept only because the depth cap stopped refinement.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicPartition {
    /// Sorted by (level, i, j).
    pub squares: Vec<PartitionSquare>,
    pub terminated: bool,
    pub depth_cap: u32,
    pub epsilon: f64,
}

/// Worklist discipline. The resulting set does not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanOrder {
    BreadthFirst,
    DepthFirst,
}

/// Counts from a subdivision run that does not keep the squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SubdivisionSummary {
    pub squares: usize,
    pub capped: usize,
    pub max_level: u32,
    pub terminated: bool,
}

impl DyadicPartition {
    pub fn len(&self) -> usize {
        self.squares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.squares.is_empty()
    }

    /// Σ 4^{−level}, in units of the finest level present; equals 4^{max level} for a cover.
    pub fn area_units(&self) -> (u128, u32) {
        let top = self.squares.iter().map(|s| s.square.level).max().unwrap_or(0);
        let sum = self.squares.iter().map(|s| 1u128 << (2 * (top - s.square.level))).sum();
        (sum, top)
    }

    pub fn covers_unit_square(&self) -> bool {
        let (sum, top) = self.area_units();
        sum == 1u128 << (2 * top)
    }

    pub fn flagged_count(&self) -> usize {
        self.squares.iter().filter(|s| s.flagged).count()
    }

    pub fn level_histogram(&self) -> Vec<usize> {
        let top = self.squares.iter().map(|s| s.square.level).max().unwrap_or(0) as usize;
        let mut h = vec![0; top + 1];
        for s in &self.squares {
            h[s.square.level as usize] += 1;
        }
        h
    }

    /// True if every square of `self` lies inside some square of `coarser`.
    pub fn refines(&self, coarser: &DyadicPartition) -> bool {
        let set: HashSet<DyadicSquare> = coarser.squares.iter().map(|s| s.square).collect();
        self.squares.iter().all(|s| {
            let mut cur = Some(s.square);
            while let Some(c) = cur {
                if set.contains(&c) {
                    return true;
                }
                cur = c.parent();
            }
            false
        })
    }

    /// `level,i,j,flagged` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,i,j,flagged\n");
        for s in &self.squares {
            let _ = writeln!(out, "{},{},{},{}", s.square.level, s.square.i, s.square.j, s.flagged as u8);
        }
        out
    }

    /// Squares coloured by level on a `pixels`-wide canvas.
    pub fn to_svg(&self, pixels: u32) -> String {
        const PALETTE: [&str; 14] = [
            "#3b4cc0", "#4f69d9", "#6788ee", "#80a3fa", "#9abbff", "#b3cdfb", "#c9d7f0", "#ddd3c9", "#edc5ab",
            "#f5b394", "#f59d7e", "#ec8267", "#dc6150", "#b40426",
        ];
        let p = pixels as f64;
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{pixels}\" height=\"{pixels}\" viewBox=\"0 0 {pixels} {pixels}\">\n"
        );
        for s in &self.squares {
            let side = s.square.side() * p;
            let color = PALETTE[(s.square.level as usize).min(PALETTE.len() - 1)];
            let _ = writeln!(
                out,
                "<rect x=\"{:.4}\" y=\"{:.4}\" width=\"{side:.4}\" height=\"{side:.4}\" fill=\"{color}\" stroke=\"#202020\" stroke-width=\"{:.3}\"/>",
                s.square.j as f64 * side,
                s.square.i as f64 * side,
                (side * 0.05).min(0.5),
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn check_run(epsilon: f64, depth_cap: u32, field: &GridField) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    if depth_cap > field.level() {
        return Err(Error::ResolutionExhausted { level: depth_cap, grid_level: field.level() });
    }
    Ok(())
}

/// Generic worklist driver; `visit` receives each accepted square and returns false to stop.
fn run<F, V>(size: F, epsilon: f64, depth_cap: u32, order: ScanOrder, mut visit: V) -> Result<bool>
where
    F: Fn(&DyadicSquare) -> Result<f64>,
    V: FnMut(PartitionSquare) -> bool,
{
    let mut terminated = true;
    let mut queue = VecDeque::from([DyadicSquare::root()]);
    loop {
        let next = match order {
            ScanOrder::BreadthFirst => queue.pop_front(),
            ScanOrder::DepthFirst => queue.pop_back(),
        };
        let Some(sq) = next else { break };
        let a = size(&sq)?;
        let keep = if a <= epsilon {
            PartitionSquare { square: sq, quantum_size: a, flagged: false }
        } else if sq.level >= depth_cap {
            terminated = false;
            PartitionSquare { square: sq, quantum_size: a, flagged: true }
        } else {
            let kids = sq.children();
            match order {
                ScanOrder::BreadthFirst => queue.extend(kids),
                ScanOrder::DepthFirst => queue.extend(kids.into_iter().rev()),
            }
            continue;
        };
        if !visit(keep) {
            return Ok(false);
        }
    }
    Ok(terminated)
}

/// ε-subdivision driven by an arbitrary size function (useful for synthetic fields).
pub fn subdivide_by<F>(size: F, epsilon: f64, depth_cap: u32, order: ScanOrder) -> Result<DyadicPartition>
where
    F: Fn(&DyadicSquare) -> Result<f64>,
{
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    let mut squares = Vec::new();
    let terminated = run(size, epsilon, depth_cap, order, |s| {
        squares.push(s);
        true
    })?;
    squares.sort_by_key(|s| s.square);
    Ok(DyadicPartition { squares, terminated, depth_cap, epsilon })
}

pub fn subdivide(field: &GridField, q: f64, epsilon: f64, depth_cap: u32) -> Result<DyadicPartition> {
    subdivide_ordered(field, q, epsilon, depth_cap, ScanOrder::BreadthFirst)
}

pub fn subdivide_ordered(
    field: &GridField,
    q: f64,
    epsilon: f64,
    depth_cap: u32,
    order: ScanOrder,
) -> Result<DyadicPartition> {
    check_run(epsilon, depth_cap, field)?;
    subdivide_by(|s| quantum_size(field, q, s), epsilon, depth_cap, order)
}

/// Runs the subdivision keeping only counts. With `stop_at_cap` the run ends at the
/// first capped square, which is enough to decide termination.
pub fn subdivide_summary(
    field: &GridField,
    q: f64,
    epsilon: f64,
    depth_cap: u32,
    stop_at_cap: bool,
) -> Result<SubdivisionSummary> {
    check_run(epsilon, depth_cap, field)?;
    let mut summary = SubdivisionSummary::default();
    let finished = run(|s| quantum_size(field, q, s), epsilon, depth_cap, ScanOrder::DepthFirst, |s| {
        summary.squares += 1;
        summary.max_level = summary.max_level.max(s.square.level);
        if s.flagged {
            summary.capped += 1;
            return !stop_at_cap;
        }
        true
    })?;
    summary.terminated = finished && summary.capped == 0;
    Ok(summary)
}

/// ε = ratio·A_h(unit square).
pub fn relative_epsilon(field: &GridField, q: f64, ratio: f64) -> Result<f64> {
    Ok(ratio * quantum_size(field, q, &DyadicSquare::root())?)
}

/// One vertex per square (in partition order); edges join squares sharing a side segment
/// of positive length.
pub fn adjacency_graph(partition: &DyadicPartition) -> Result<Graph> {
    let index: HashMap<DyadicSquare, usize> =
        partition.squares.iter().enumerate().map(|(k, s)| (s.square, k)).collect();
    let mut edges = HashSet::new();
    for (k, s) in partition.squares.iter().enumerate() {
        for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let Some(mut cur) = s.square.neighbor(di, dj) else { continue };
            // The neighbour region is either inside one partition square (found by walking
            // up) or split into finer squares, which find `s` from their side.
            loop {
                if let Some(&other) = index.get(&cur) {
                    edges.insert((k.min(other), k.max(other)));
                    break;
                }
                match cur.parent() {
                    Some(p) => cur = p,
                    None => break,
                }
            }
        }
    }
    let mut edges: Vec<_> = edges.into_iter().collect();
    edges.sort_unstable();
    Graph::new(partition.len().max(1), edges, Vec::new())
}

/// BFS shell sizes at radii 0..=max_radius.
pub fn ball_growth(graph: &Graph, root: usize, max_radius: usize) -> Result<Vec<usize>> {
    if root >= graph.vertex_count() {
        return Err(Error::VertexOutOfRange(root));
    }
    let nbrs = graph.neighbors();
    let mut dist = vec![usize::MAX; graph.vertex_count()];
    let mut shells = vec![0; max_radius + 1];
    let mut queue = VecDeque::from([root]);
    dist[root] = 0;
    while let Some(v) = queue.pop_front() {
        shells[dist[v]] += 1;
        if dist[v] == max_radius {
            continue;
        }
        for &w in &nbrs[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    Ok(shells)
}

/// Index of the partition square containing the point (x, y) of the unit square.
pub fn square_containing(partition: &DyadicPartition, x: f64, y: f64) -> Option<usize> {
    partition.squares.iter().position(|s| {
        let side = s.square.side();
        let (x0, y0) = (s.square.j as f64 * side, s.square.i as f64 * side);
        (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charge_examples() {
        let p = charge_to_params(0.0).unwrap();
        assert!((p.gamma.unwrap() - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((p.q - 2.0412).abs() < 1e-4);
        let p = charge_to_params(19.0).unwrap();
        assert!((p.q - 1.0).abs() < 1e-15 && p.gamma.is_none());
        let p = charge_to_params(-12.5).unwrap();
        assert!((p.gamma.unwrap() - 1.0).abs() < 1e-12 && (p.q - 2.5).abs() < 1e-12);
        assert!(charge_to_params(25.0).is_err());
    }

    #[test]
    fn square_geometry() {
        let s = DyadicSquare::new(2, 1, 3);
        assert_eq!(s.side(), 0.25);
        assert!(s.children().iter().all(|c| s.contains(c) && c.parent() == Some(s)));
        assert!(DyadicSquare::root().contains(&s));
        assert!(!s.contains(&DyadicSquare::new(2, 1, 2)));
        assert_eq!(s.neighbor(0, 1), None);
    }

    #[test]
    fn zero_field_uniform_partitions() {
        let p = subdivide_by(|s| Ok(s.side()), 0.3, 10, ScanOrder::BreadthFirst).unwrap();
        assert_eq!(p.len(), 16);
        assert!(p.terminated && p.covers_unit_square());
        let p = subdivide_by(|s| Ok(s.side()), 1.0, 10, ScanOrder::BreadthFirst).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn cap_flags_squares() {
        let p = subdivide_by(|s| Ok(s.side()), 0.01, 3, ScanOrder::DepthFirst).unwrap();
        assert!(!p.terminated);
        assert_eq!(p.flagged_count(), 64);
    }

    #[test]
    fn four_squares_form_a_cycle() {
        let p = subdivide_by(|s| Ok(s.side()), 0.5, 5, ScanOrder::BreadthFirst).unwrap();
        let g = adjacency_graph(&p).unwrap();
        assert_eq!(g.edges().len(), 4);
        assert!(g.degrees().iter().all(|&d| d == 2));
        assert_eq!(ball_growth(&g, 0, 2).unwrap(), vec![1, 2, 1]);
    }

    #[test]
    fn mixed_sizes_adjacency() {
        // Refine only the top-left quarter.
        let size = |s: &DyadicSquare| Ok(if s.level == 0 || (s.level == 1 && s.i == 0 && s.j == 0) { 1.0 } else { 0.0 });
        let p = subdivide_by(size, 0.5, 5, ScanOrder::BreadthFirst).unwrap();
        assert_eq!(p.len(), 7);
        let g = adjacency_graph(&p).unwrap();
        let big_right = p.squares.iter().position(|s| s.square == DyadicSquare::new(1, 0, 1)).unwrap();
        let touching: Vec<DyadicSquare> = g.edges().iter()
            .filter_map(|&(a, b)| if a == big_right { Some(b) } else if b == big_right { Some(a) } else { None })
            .map(|k| p.squares[k].square)
            .collect();
        assert!(touching.contains(&DyadicSquare::new(2, 0, 1)));
        assert!(touching.contains(&DyadicSquare::new(2, 1, 1)));
        assert!(touching.contains(&DyadicSquare::new(1, 1, 1)));
        assert_eq!(touching.len(), 3);
    }

    #[test]
    fn csv_and_svg() {
        let p = subdivide_by(|s| Ok(s.side()), 0.5, 5, ScanOrder::BreadthFirst).unwrap();
        let csv = p.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("level,i,j,flagged\n1,0,0,0"));
        assert_eq!(p.to_svg(100).matches("<rect").count(), 4);
    }
}
