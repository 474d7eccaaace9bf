//! Discrete Gaussian free field on a 2^k × 2^k grid with Dirichlet boundary.
//!
//! The grid has (N+1)² sites for N = 2^k, of which the outer ring is pinned to 0.
//! The field is h = Σ ξ_{mn} √(2π/λ_{mn}) φ_{mn} over the orthonormal sine modes
//! φ_{mn} of the graph Laplacian, so its covariance is 2π Δ⁻¹ and the
//! (2π)⁻¹-normalized Dirichlet energy of h is Σ ξ².

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::linalg::{self, SquareMatrix};
use crate::rng;
use crate::subdivision::DyadicSquare;

pub const MIN_LEVEL: u32 = 4;
pub const MAX_LEVEL: u32 = 13;
/// Covariance of the field is `NORMALIZATION · Δ⁻¹`.
pub const NORMALIZATION: f64 = 2.0 * PI;
pub const DUMP_MAGIC: &[u8; 4] = b"LZGF";

/// A sampled field with cell-average prefix sums.
///
/// Cell (i, j) is the lattice square with corners (i, j) … (i+1, j+1); its value is
/// the mean of the four corner sites. Square averages are means of cell values.
#[derive(Debug, Clone)]
pub struct GridField {
    level: u32,
    seed: u64,
    /// Site values, row-major, (N+1)².
    values: Vec<f64>,
    /// prefix[(i)(N+1) + j] = Σ of cell values over rows < i and columns < j.
    prefix: Vec<f64>,
}

impl GridField {
    /// Builds a field from site values (boundary entries must be zero).
    pub fn from_site_values(level: u32, seed: u64, values: Vec<f64>) -> Result<Self> {
        check_level(level)?;
        let n = 1usize << level;
        if values.len() != (n + 1) * (n + 1) {
            return Err(Error::param("values", format!("expected {} sites, got {}", (n + 1) * (n + 1), values.len())));
        }
        let on_boundary = |idx: usize| {
            let (i, j) = (idx / (n + 1), idx % (n + 1));
            i == 0 || j == 0 || i == n || j == n
        };
        if values.iter().enumerate().any(|(idx, &v)| on_boundary(idx) && v != 0.0) {
            return Err(Error::param("values", "Dirichlet field must vanish on the boundary ring"));
        }
        let prefix = cell_prefix_sums(n, &values);
        Ok(GridField { level, seed, values, prefix })
    }

    pub fn zeros(level: u32) -> Result<Self> {
        check_level(level)?;
        let n = 1usize << level;
        GridField::from_site_values(level, 0, vec![0.0; (n + 1) * (n + 1)])
    }

    /// A field whose every cell value is `c`. Not a Dirichlet field; used for checks
    /// of the averaging machinery.
    pub fn constant_cells(level: u32, c: f64) -> Result<Self> {
        check_level(level)?;
        let n = 1usize << level;
        let prefix = (0..(n + 1) * (n + 1))
            .map(|idx| c * ((idx / (n + 1)) * (idx % (n + 1))) as f64)
            .collect();
        Ok(GridField { level, seed: 0, values: Vec::new(), prefix })
    }

    /// The field t·h.
    pub fn scaled(&self, t: f64) -> GridField {
        GridField {
            level: self.level,
            seed: self.seed,
            values: self.values.iter().map(|v| t * v).collect(),
            prefix: self.prefix.iter().map(|v| t * v).collect(),
        }
    }

    /// Drops the site values and keeps only what square averages need (halves memory on
    /// large grids).
    pub fn into_averages_only(mut self) -> GridField {
        self.values = Vec::new();
        self
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Cells per side, 2^level.
    pub fn size(&self) -> usize {
        1 << self.level
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn normalization(&self) -> f64 {
        NORMALIZATION
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn site(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.size() + 1) + j]
    }

    pub fn cell(&self, i: usize, j: usize) -> f64 {
        let n = self.size();
        let v = &self.values;
        0.25 * (v[i * (n + 1) + j] + v[i * (n + 1) + j + 1] + v[(i + 1) * (n + 1) + j] + v[(i + 1) * (n + 1) + j + 1])
    }

    /// Sum of cell values over rows [r0, r1) and columns [c0, c1).
    pub fn cell_sum(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        let w = self.size() + 1;
        let p = &self.prefix;
        p[r1 * w + c1] - p[r0 * w + c1] - p[r1 * w + c0] + p[r0 * w + c0]
    }

    /// h_S: mean of the field over the dyadic square.
    pub fn square_average(&self, sq: &DyadicSquare) -> Result<f64> {
        if sq.level > self.level {
            return Err(Error::ResolutionExhausted { level: sq.level, grid_level: self.level });
        }
        let span = 1usize << (self.level - sq.level);
        let (r0, c0) = (sq.i as usize * span, sq.j as usize * span);
        Ok(self.cell_sum(r0, r0 + span, c0, c0 + span) / (span * span) as f64)
    }

    /// (2π)⁻¹ Σ_edges (h(x) − h(y))².
    pub fn dirichlet_energy(&self) -> f64 {
        dirichlet_energy_of(self.size(), &self.values)
    }

    /// Writes the 16-byte header (magic, k as u32, seed as u64) then the site values,
    /// all little-endian.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&self.level.to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * 4096);
        for chunk in self.values.chunks(4096) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; 16];
        input.read_exact(&mut header)?;
        if &header[..4] != DUMP_MAGIC {
            return Err(Error::Io("not a field dump (bad magic)".into()));
        }
        let level = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
        let seed = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
        check_level(level)?;
        let n = 1usize << level;
        let mut raw = vec![0u8; 8 * (n + 1) * (n + 1)];
        input.read_exact(&mut raw)?;
        let values = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        GridField::from_site_values(level, seed, values)
    }
}

fn check_level(level: u32) -> Result<()> {
    if (MIN_LEVEL..=MAX_LEVEL).contains(&level) {
        Ok(())
    } else {
        Err(Error::param("size", format!("grid must be 2^k with k in [{MIN_LEVEL}, {MAX_LEVEL}], got k = {level}")))
    }
}

/// log2 of a grid size, or an error if it is not an admissible power of two.
pub fn level_of_size(size: usize) -> Result<u32> {
    if !size.is_power_of_two() {
        return Err(Error::param("size", format!("must be a power of two, got {size}")));
    }
    let k = size.trailing_zeros();
    check_level(k)?;
    Ok(k)
}

fn cell_prefix_sums(n: usize, v: &[f64]) -> Vec<f64> {
    let w = n + 1;
    let mut prefix = vec![0.0; w * w];
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += 0.25 * (v[i * w + j] + v[i * w + j + 1] + v[(i + 1) * w + j] + v[(i + 1) * w + j + 1]);
            prefix[(i + 1) * w + j + 1] = prefix[i * w + j + 1] + row;
        }
    }
    prefix
}

/// Eigenvalue of the Dirichlet grid Laplacian for sine mode (m, n).
pub fn mode_eigenvalue(size: usize, m: usize, n: usize) -> f64 {
    let s = size as f64;
    4.0 - 2.0 * (PI * m as f64 / s).cos() - 2.0 * (PI * n as f64 / s).cos()
}

/// In-place DST-I, y_k = Σ_{m=1}^{N−1} x_m sin(πmk/N), through a length-2N FFT.
struct Dst {
    fft: Arc<dyn Fft<f64>>,
    size: usize,
}

impl Dst {
    fn new(size: usize) -> Self {
        Dst { fft: FftPlanner::new().plan_fft_forward(2 * size), size }
    }

    fn buffers(&self) -> (Vec<Complex<f64>>, Vec<Complex<f64>>) {
        (vec![Complex::default(); 2 * self.size], vec![Complex::default(); self.fft.get_inplace_scratch_len()])
    }

    fn apply(&self, x: &mut [f64], work: &mut [Complex<f64>], scratch: &mut [Complex<f64>]) {
        let n = self.size;
        debug_assert_eq!(x.len(), n - 1);
        work[0] = Complex::default();
        work[n] = Complex::default();
        for m in 1..n {
            work[m] = Complex::new(x[m - 1], 0.0);
            work[2 * n - m] = Complex::new(-x[m - 1], 0.0);
        }
        self.fft.process_with_scratch(work, scratch);
        for k in 1..n {
            x[k - 1] = -0.5 * work[k].im;
        }
    }
}

fn transform_rows(dst: &Dst, values: &mut [f64], n: usize, mode: Execution) {
    exec::for_each_chunk_mut(mode, values, 64 * (n + 1), |chunk_idx, rows| {
        let (mut work, mut scratch) = dst.buffers();
        for (r, row) in rows.chunks_mut(n + 1).enumerate() {
            let i = chunk_idx * 64 + r;
            if i == 0 || i == n {
                continue;
            }
            dst.apply(&mut row[1..n], &mut work, &mut scratch);
        }
    });
}

fn transpose_in_place(values: &mut [f64], w: usize) {
    const B: usize = 32;
    for bi in (0..w).step_by(B) {
        for bj in (bi..w).step_by(B) {
            for i in bi..(bi + B).min(w) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + B).min(w) {
                    values.swap(i * w + j, j * w + i);
                }
            }
        }
    }
}

/// Unnormalized 2-D DST-I of the interior of an (n+1)² site array.
fn dst_2d(values: &mut [f64], n: usize, mode: Execution) {
    let dst = Dst::new(n);
    let w = n + 1;
    transform_rows(&dst, values, n, mode);
    transpose_in_place(values, w);
    transform_rows(&dst, values, n, mode);
    transpose_in_place(values, w);
}

/// Solves Δu = rhs on the interior sites with u = 0 on the boundary ring.
/// Both arrays use the (size+1)² site layout; boundary entries of `rhs` are ignored.
pub fn solve_dirichlet_poisson(size: usize, rhs: &[f64], mode: Execution) -> Result<Vec<f64>> {
    level_of_size(size)?;
    let n = size;
    let w = n + 1;
    if rhs.len() != w * w {
        return Err(Error::param("rhs", format!("expected {} entries, got {}", w * w, rhs.len())));
    }
    let mut u = rhs.to_vec();
    for j in 0..w {
        u[j] = 0.0;
        u[n * w + j] = 0.0;
        u[j * w] = 0.0;
        u[j * w + n] = 0.0;
    }
    // Orthonormal coefficients, divided by the eigenvalues, then synthesized.
    dst_2d(&mut u, n, mode);
    let scale = (2.0 / n as f64).powi(2);
    for m in 1..n {
        for k in 1..n {
            u[m * w + k] *= scale / mode_eigenvalue(n, m, k);
        }
    }
    dst_2d(&mut u, n, mode);
    Ok(u)
}

/// (2π)⁻¹ Σ_edges (f(x) − f(y))² for an (size+1)² site array.
pub fn dirichlet_energy_of(size: usize, v: &[f64]) -> f64 {
    let w = size + 1;
    let mut sum = 0.0;
    for i in 0..w {
        for j in 0..w {
            if i < size {
                sum += (v[i * w + j] - v[(i + 1) * w + j]).powi(2);
            }
            if j < size {
                sum += (v[i * w + j] - v[i * w + j + 1]).powi(2);
            }
        }
    }
    sum / NORMALIZATION
}

/// Samples the Dirichlet GFF on a size × size grid (size = 2^k, 4 ≤ k ≤ 13).
pub fn sample_dgff(size: usize, seed: u64) -> Result<GridField> {
    sample_dgff_with(size, seed, exec::default_mode())
}

pub fn sample_dgff_with(size: usize, seed: u64, mode: Execution) -> Result<GridField> {
    let level = level_of_size(size)?;
    let n = size;
    let w = n + 1;
    let mut values = vec![0.0; w * w];
    let mut rng = rng::stream(seed, 0);
    let orthonormal = 2.0 / n as f64;
    let cos: Vec<f64> = (0..n).map(|m| 2.0 - 2.0 * (PI * m as f64 / n as f64).cos()).collect();
    for m in 1..n {
        for k in 1..n {
            let xi: f64 = rng.sample(StandardNormal);
            values[m * w + k] = xi * (NORMALIZATION / (cos[m] + cos[k])).sqrt() * orthonormal;
        }
    }
    dst_2d(&mut values, n, mode);
    for j in 0..w {
        values[j] = 0.0;
        values[n * w + j] = 0.0;
        values[j * w] = 0.0;
        values[j * w + n] = 0.0;
    }
    let prefix = cell_prefix_sums(n, &values);
    Ok(GridField { level, seed, values, prefix })
}

/// Interior-site index (i, j), 1 ≤ i, j ≤ size − 1, in the oracle's ordering.
pub fn interior_index(size: usize, i: usize, j: usize) -> usize {
    (i - 1) * (size - 1) + (j - 1)
}

/// Dirichlet grid Laplacian on the (size − 1)² interior sites.
pub fn grid_laplacian(size: usize) -> SquareMatrix {
    let m = size - 1;
    let mut lap = SquareMatrix::zeros(m * m);
    for i in 1..size {
        for j in 1..size {
            let p = interior_index(size, i, j);
            lap[(p, p)] = 4.0;
            for (a, b) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                if (1..size).contains(&a) && (1..size).contains(&b) {
                    lap[(p, interior_index(size, a, b))] = -1.0;
                }
            }
        }
    }
    lap
}

/// Dense covariance 2π Δ⁻¹ over interior sites, for size ≤ 32.
pub fn green_oracle(size: usize) -> Result<SquareMatrix> {
    if size > 32 || size < 2 {
        return Err(Error::BudgetExceeded { required: (size - 1).pow(2), budget: 31 * 31 });
    }
    Ok(linalg::inverse(&grid_laplacian(size)).scaled(NORMALIZATION))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dst_matches_direct_sum() {
        let n = 16;
        let dst = Dst::new(n);
        let x: Vec<f64> = (1..n).map(|m| (m as f64 * 0.37).sin() + 0.1 * m as f64).collect();
        let mut y = x.clone();
        let (mut w, mut s) = dst.buffers();
        dst.apply(&mut y, &mut w, &mut s);
        for k in 1..n {
            let direct: f64 = (1..n).map(|m| x[m - 1] * (PI * (m * k) as f64 / n as f64).sin()).sum();
            assert!((y[k - 1] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_dgff(32, 9).unwrap();
        let b = sample_dgff_with(32, 9, Execution::Sequential).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), sample_dgff(32, 10).unwrap().values());
    }

    #[test]
    fn boundary_is_pinned() {
        let f = sample_dgff(16, 1).unwrap();
        for t in 0..=16 {
            assert_eq!(f.site(0, t), 0.0);
            assert_eq!(f.site(16, t), 0.0);
            assert_eq!(f.site(t, 0), 0.0);
            assert_eq!(f.site(t, 16), 0.0);
        }
    }

    #[test]
    fn constant_cells_average_to_constant() {
        let f = GridField::constant_cells(5, 2.5).unwrap();
        for sq in [DyadicSquare::root(), DyadicSquare::new(3, 5, 2), DyadicSquare::new(5, 31, 0)] {
            assert!((f.square_average(&sq).unwrap() - 2.5).abs() < 1e-12);
        }
        assert!(matches!(
            f.square_average(&DyadicSquare::new(6, 0, 0)),
            Err(Error::ResolutionExhausted { level: 6, grid_level: 5 })
        ));
    }

    #[test]
    fn green_rows_solve_laplacian() {
        let g = green_oracle(8).unwrap();
        let lap = grid_laplacian(8);
        let prod = lap.mul(&g);
        for i in 0..prod.dimension {
            for j in 0..prod.dimension {
                let want = if i == j { NORMALIZATION } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-10);
            }
        }
        assert!(green_oracle(64).is_err());
    }

    #[test]
    fn poisson_solve_inverts_laplacian() {
        let n = 16;
        let f = sample_dgff(n, 2).unwrap();
        let u = solve_dirichlet_poisson(n, f.values(), Execution::Sequential).unwrap();
        let w = n + 1;
        for i in 1..n {
            for j in 1..n {
                let lap = 4.0 * u[i * w + j] - u[(i - 1) * w + j] - u[(i + 1) * w + j] - u[i * w + j - 1] - u[i * w + j + 1];
                assert!((lap - f.site(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dump_round_trip() {
        let f = sample_dgff(16, 4).unwrap();
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 * 17 * 17);
        let g = GridField::read_from(buf.as_slice()).unwrap();
        assert_eq!(g.values(), f.values());
        assert_eq!(g.seed(), 4);
    }
}
