//! Dirichlet-energy projection onto square averages and central-charge reweighting.
//!
//! Given a partition P, the averages (h_S)_{S∈P} of the field have covariance G
//! (the Gram matrix of the average functionals in the (2π)⁻¹ Dirichlet product),
//! so Σ α_S² = aᵀG⁻¹a is a sum of #P independent unit Gaussians. With x = α/Q,
//! weighting by e^{(c′/12) Σ x²} turns the N(0, Q⁻²) law of x into N(0, Q_new⁻²)
//! with Q_new² = Q² − c′/6.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::gff::{self, GridField};
use crate::linalg::{Lu, SquareMatrix};
use crate::rng;
use crate::stats::{self, TestResult};
use crate::subdivision::{self, charge_to_params, DyadicPartition, DyadicSquare};

/// Effective sample sizes below this flag an experiment as underpowered.
pub const MIN_ESS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightReport {
    pub c: f64,
    pub c_prime: f64,
    pub c_new: f64,
    pub q: f64,
    pub q_new: f64,
    pub log_weight: f64,
}

/// (Q, Q_new) for a base charge c and shift c′.
pub fn background_charges(c: f64, c_prime: f64) -> Result<(f64, f64)> {
    let q = charge_to_params(c)?.q;
    let q_new = charge_to_params(c + c_prime)?.q;
    Ok((q, q_new))
}

/// Log of the determinant weight, (c′/12)·Σ x².
pub fn det_weight(coefficient_energy: f64, c_prime: f64) -> f64 {
    c_prime / 12.0 * coefficient_energy
}

pub fn weight_report(c: f64, c_prime: f64, coefficient_energy: f64) -> Result<WeightReport> {
    let (q, q_new) = background_charges(c, c_prime)?;
    Ok(WeightReport { c, c_prime, c_new: c + c_prime, q, q_new, log_weight: det_weight(coefficient_energy, c_prime) })
}

fn log_gaussian_density(q: f64, x: &[f64]) -> f64 {
    // Coordinates i.i.d. N(0, 1/Q²).
    x.iter().map(|v| q.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * q * q * v * v).sum()
}

/// log[w(x)·ν_c(x)] − log ν_{c+c′}(x); constant in x, equal to #x·log(Q/Q_new).
pub fn density_ratio_check(c: f64, c_prime: f64, x: &[f64]) -> Result<f64> {
    let (q, q_new) = background_charges(c, c_prime)?;
    let energy: f64 = x.iter().map(|v| v * v).sum();
    Ok(det_weight(energy, c_prime) + log_gaussian_density(q, x) - log_gaussian_density(q_new, x))
}

/// C = ¼ log n − ¾ log Vol.
pub fn normalization_constant(n: usize, volume: f64) -> f64 {
    0.25 * (n as f64).ln() - 0.75 * volume.ln()
}

/// Average functionals of a partition's squares on a grid, with their Gram matrix.
pub struct PartitionGram {
    size: usize,
    squares: Vec<DyadicSquare>,
    gram: SquareMatrix,
}

/// Per-square separable site weights: u_S(i, j) = row[i]·col[j].
struct SiteWeights {
    r0: usize,
    rows: Vec<f64>,
    c0: usize,
    cols: Vec<f64>,
}

fn site_weights(size: usize, sq: &DyadicSquare) -> Result<SiteWeights> {
    let level = gff::level_of_size(size)?;
    if sq.level > level {
        return Err(Error::ResolutionExhausted { level: sq.level, grid_level: level });
    }
    let span = 1usize << (level - sq.level);
    // Each cell value is the mean of its four corners, so interior corner sites carry 2 and
    // the two end sites 1, per direction.
    let line = |_: usize| {
        let mut w = vec![2.0; span + 1];
        w[0] = 1.0;
        w[span] = 1.0;
        w
    };
    let norm = 1.0 / (4.0 * (span * span) as f64);
    let mut rows = line(span);
    rows.iter_mut().for_each(|v| *v *= norm);
    Ok(SiteWeights { r0: sq.i as usize * span, rows, c0: sq.j as usize * span, cols: line(span) })
}

impl PartitionGram {
    pub fn new(size: usize, squares: &[DyadicSquare], mode: Execution) -> Result<Self> {
        let n = size;
        let weights = squares.iter().map(|s| site_weights(size, s)).collect::<Result<Vec<_>>>()?;
        let sin_table: Vec<f64> = (0..2 * n).map(|t| (PI * t as f64 / n as f64).sin()).collect();
        let ortho = (2.0 / n as f64).sqrt();
        // 1-D orthonormal sine coefficients of each factor, modes 1..n-1.
        let transform = |start: usize, w: &[f64]| -> Vec<f64> {
            (1..n)
                .map(|m| {
                    ortho
                        * w.iter()
                            .enumerate()
                            .map(|(k, &v)| v * sin_table[(m * (start + k)) % (2 * n)])
                            .sum::<f64>()
                })
                .collect()
        };
        let coeffs: Vec<(Vec<f64>, Vec<f64>)> = exec::map_slice(mode, &weights, |w| {
            (transform(w.r0, &w.rows), transform(w.c0, &w.cols))
        });
        let inv_lambda: Vec<f64> =
            (1..n).flat_map(|m| (1..n).map(move |k| 1.0 / gff::mode_eigenvalue(n, m, k))).collect();
        let p = squares.len();
        let entries = exec::map_range(mode, p * (p + 1) / 2, |idx| {
            let (s, t) = triangle_index(idx);
            let (a_s, b_s) = &coeffs[s];
            let (a_t, b_t) = &coeffs[t];
            let mut sum = 0.0;
            for m in 0..n - 1 {
                let am = a_s[m] * a_t[m];
                let row = &inv_lambda[m * (n - 1)..(m + 1) * (n - 1)];
                let mut inner = 0.0;
                for k in 0..n - 1 {
                    inner += b_s[k] * b_t[k] * row[k];
                }
                sum += am * inner;
            }
            gff::NORMALIZATION * sum
        });
        let mut gram = SquareMatrix::zeros(p);
        for (idx, v) in entries.into_iter().enumerate() {
            let (s, t) = triangle_index(idx);
            gram[(s, t)] = v;
            gram[(t, s)] = v;
        }
        Ok(PartitionGram { size, squares: squares.to_vec(), gram })
    }

    pub fn from_partition(size: usize, partition: &DyadicPartition, mode: Execution) -> Result<Self> {
        let squares: Vec<DyadicSquare> = partition.squares.iter().map(|s| s.square).collect();
        Self::new(size, &squares, mode)
    }

    /// Covariance of the square averages of the field.
    pub fn gram(&self) -> &SquareMatrix {
        &self.gram
    }

    pub fn squares(&self) -> &[DyadicSquare] {
        &self.squares
    }

    fn lu(&self) -> Result<Lu> {
        let lu = Lu::new(&self.gram);
        if lu.is_singular() {
            return Err(Error::SingularSchur(self.squares.len()));
        }
        Ok(lu)
    }

    /// aᵀ G⁻¹ a.
    pub fn energy_of_averages(&self, averages: &[f64]) -> Result<f64> {
        let beta = self.lu()?.solve(averages);
        Ok(beta.iter().zip(averages).map(|(b, a)| b * a).sum())
    }

    /// Site values of the minimal-energy field with the given square averages.
    pub fn interpolant(&self, averages: &[f64], mode: Execution) -> Result<Vec<f64>> {
        let beta = self.lu()?.solve(averages);
        let w = self.size + 1;
        let mut rhs = vec![0.0; w * w];
        for (sq, b) in self.squares.iter().zip(&beta) {
            let sw = site_weights(self.size, sq)?;
            for (di, rv) in sw.rows.iter().enumerate() {
                for (dj, cv) in sw.cols.iter().enumerate() {
                    rhs[(sw.r0 + di) * w + sw.c0 + dj] += gff::NORMALIZATION * b * rv * cv;
                }
            }
        }
        gff::solve_dirichlet_poisson(self.size, &rhs, mode)
    }
}

fn triangle_index(idx: usize) -> (usize, usize) {
    // idx enumerates (s, t) with t ≤ s row by row.
    let s = ((((8 * idx + 1) as f64).sqrt() - 1.0) / 2.0).floor() as usize;
    let s = if (s + 1) * (s + 2) / 2 <= idx { s + 1 } else if s * (s + 1) / 2 > idx { s - 1 } else { s };
    (s, idx - s * (s + 1) / 2)
}

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub projected_field: GridField,
    /// Σ x_S² with x = α/Q.
    pub coefficient_energy: f64,
    /// max_S |average of projection − average of input|.
    pub solver_residual: f64,
}

pub fn square_averages(field: &GridField, squares: &[DyadicSquare]) -> Result<Vec<f64>> {
    squares.iter().map(|s| field.square_average(s)).collect()
}

/// Minimal-Dirichlet-energy field with the same square averages as `field` on `partition`.
pub fn project_onto_partition(field: &GridField, partition: &DyadicPartition, q: f64) -> Result<ProjectionResult> {
    if !(q > 0.0) {
        return Err(Error::param("q", format!("must be positive, got {q}")));
    }
    let mode = exec::default_mode();
    let gram = PartitionGram::from_partition(field.size(), partition, mode)?;
    let averages = square_averages(field, gram.squares())?;
    let values = gram.interpolant(&averages, mode)?;
    let projected_field = GridField::from_site_values(field.level(), field.seed(), values)?;
    let check = square_averages(&projected_field, gram.squares())?;
    let solver_residual = check.iter().zip(&averages).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let coefficient_energy = gram.energy_of_averages(&averages)? / (q * q);
    Ok(ProjectionResult { projected_field, coefficient_energy, solver_residual })
}

/// Σ x_S² without reconstructing the projected field.
pub fn coefficient_energy(field: &GridField, partition: &DyadicPartition, q: f64, mode: Execution) -> Result<f64> {
    let gram = PartitionGram::from_partition(field.size(), partition, mode)?;
    Ok(gram.energy_of_averages(&square_averages(field, gram.squares())?)? / (q * q))
}

/// Σ over cells of e^{2 h(cell)/Q}·(cell area) for a field given by site values.
pub fn discrete_volume(size: usize, values: &[f64], q: f64) -> f64 {
    let w = size + 1;
    let area = 1.0 / (size * size) as f64;
    let mut vol = 0.0;
    for i in 0..size {
        for j in 0..size {
            let cell = 0.25 * (values[i * w + j] + values[i * w + j + 1] + values[(i + 1) * w + j] + values[(i + 1) * w + j + 1]);
            vol += (2.0 * cell / q).exp() * area;
        }
    }
    vol
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReweightConfig {
    pub grid_size: usize,
    pub epsilon: f64,
    pub c: f64,
    pub c_prime: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Per-sample partition statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub count: usize,
    pub levels: Vec<f64>,
    pub capped: bool,
    /// Log importance weight (protocol B only; 0 for direct samples).
    pub log_weight: f64,
    pub normalization_constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReweightStats {
    pub config: ReweightConfig,
    pub q: f64,
    pub q_new: f64,
    /// Square-count histogram of protocol A, indexed by count.
    pub direct_counts: Vec<f64>,
    /// Self-normalized weighted histogram of protocol B, scaled to the same total.
    pub weighted_counts: Vec<f64>,
    pub count_test: TestResult,
    pub level_test: TestResult,
    pub slice_count: usize,
    pub slice_test: TestResult,
    pub ess: f64,
    pub slice_ess: f64,
    pub mean_count_direct: f64,
    pub mean_count_weighted: f64,
    pub flagged: bool,
}

fn record(field: &GridField, q: f64, epsilon: f64, weight: Option<(f64, f64)>) -> Result<SampleRecord> {
    let cap = field.level();
    let partition = subdivision::subdivide(field, q, epsilon, cap)?;
    let mut levels = vec![0.0; cap as usize + 1];
    for s in &partition.squares {
        levels[s.square.level as usize] += 1.0;
    }
    let count = partition.len();
    let (log_weight, normalization_constant) = match weight {
        None => (0.0, f64::NAN),
        Some((c_prime, q_new)) => {
            let proj = project_onto_partition(field, &partition, q)?;
            // The (Q_new/Q)^{#P} factor is the ratio of Gaussian normalizations; it is
            // constant once #P is fixed.
            let lw = det_weight(proj.coefficient_energy, c_prime) + count as f64 * (q_new / q).ln();
            let vol = discrete_volume(field.size(), proj.projected_field.values(), q);
            (lw, normalization_constant(count, vol))
        }
    };
    Ok(SampleRecord { count, levels, capped: !partition.terminated, log_weight, normalization_constant })
}

fn sample_seeds(seed: u64, stream_id: u64, n: usize) -> Vec<u64> {
    let mut r = rng::stream(seed, stream_id);
    (0..n).map(|_| r.random()).collect()
}

/// Protocol A samples normalized fields h/Q_new; protocol B samples h/Q and reweights.
pub fn run_protocols(cfg: &ReweightConfig, mode: Execution) -> Result<(Vec<SampleRecord>, Vec<SampleRecord>)> {
    validate(cfg)?;
    let (q, q_new) = background_charges(cfg.c, cfg.c_prime)?;
    let seeds_a = sample_seeds(cfg.seed, 1, cfg.n_samples);
    let seeds_b = sample_seeds(cfg.seed, 2, cfg.n_samples);
    let direct = exec::map_slice(mode, &seeds_a, |&s| {
        record(&gff::sample_dgff_with(cfg.grid_size, s, Execution::Sequential)?, q_new, cfg.epsilon, None)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let weighted = exec::map_slice(mode, &seeds_b, |&s| {
        let field = gff::sample_dgff_with(cfg.grid_size, s, Execution::Sequential)?;
        record(&field, q, cfg.epsilon, Some((cfg.c_prime, q_new)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok((direct, weighted))
}

fn validate(cfg: &ReweightConfig) -> Result<()> {
    gff::level_of_size(cfg.grid_size)?;
    if !(cfg.epsilon > 0.0) {
        return Err(Error::param("epsilon", format!("must be positive, got {}", cfg.epsilon)));
    }
    if cfg.c > 1.0 || cfg.c + cfg.c_prime > 1.0 {
        return Err(Error::param("c", "both c and c + c′ must be at most 1 for finite subdivisions"));
    }
    if cfg.n_samples < 2 {
        return Err(Error::param("n_samples", "need at least two samples per protocol"));
    }
    Ok(())
}

fn normalized_weights(records: &[SampleRecord]) -> Vec<f64> {
    let max = records.iter().map(|r| r.log_weight).fold(f64::NEG_INFINITY, f64::max);
    records.iter().map(|r| (r.log_weight - max).exp()).collect()
}

fn count_wald(direct: &[SampleRecord], weighted: &[SampleRecord], w: &[f64]) -> (TestResult, Vec<f64>, Vec<f64>) {
    let top = direct.iter().chain(weighted).map(|r| r.count).max().unwrap_or(0);
    let mut hist_a = vec![0.0; top + 1];
    let mut hist_b = vec![0.0; top + 1];
    for r in direct {
        hist_a[r.count] += 1.0;
    }
    let wsum: f64 = w.iter().sum();
    for (r, wi) in weighted.iter().zip(w) {
        hist_b[r.count] += wi / wsum * direct.len() as f64;
    }
    let pooled: Vec<f64> = hist_a.iter().zip(&hist_b).map(|(a, b)| a + b).collect();
    let bins = stats::merge_bins(&pooled, 40.0);
    let nbins = bins.last().map_or(1, |b| b + 1);
    let indicator = |count: usize| {
        let mut v = vec![0.0; nbins];
        v[bins[count]] = 1.0;
        v
    };
    let a: Vec<Vec<f64>> = direct.iter().map(|r| indicator(r.count)).collect();
    let b: Vec<Vec<f64>> = weighted.iter().map(|r| indicator(r.count)).collect();
    let ones = vec![1.0; a.len()];
    (stats::weighted_mean_test(&a, &ones, &b, w), hist_a, hist_b)
}

fn level_wald(direct: &[&SampleRecord], weighted: &[&SampleRecord], w: &[f64]) -> TestResult {
    let a: Vec<Vec<f64>> = direct.iter().map(|r| r.levels.clone()).collect();
    let b: Vec<Vec<f64>> = weighted.iter().map(|r| r.levels.clone()).collect();
    if a.len() < 2 || b.len() < 2 {
        return TestResult { statistic: 0.0, dof: 0, p_value: 1.0 };
    }
    let ones = vec![1.0; a.len()];
    stats::weighted_mean_test(&a, &ones, &b, w)
}

/// Compares the partition statistics of the two protocols.
pub fn reweighting_experiment(cfg: &ReweightConfig, mode: Execution) -> Result<ReweightStats> {
    let (q, q_new) = background_charges(cfg.c, cfg.c_prime)?;
    let (direct, weighted) = run_protocols(cfg, mode)?;
    let w = normalized_weights(&weighted);
    let (count_test, direct_counts, weighted_counts) = count_wald(&direct, &weighted, &w);
    let all_a: Vec<&SampleRecord> = direct.iter().collect();
    let all_b: Vec<&SampleRecord> = weighted.iter().collect();
    let level_test = level_wald(&all_a, &all_b, &w);

    let slice_count = direct_counts
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map_or(0, |(k, _)| k);
    let slice_a: Vec<&SampleRecord> = direct.iter().filter(|r| r.count == slice_count).collect();
    let (slice_b, slice_w): (Vec<&SampleRecord>, Vec<f64>) =
        weighted.iter().zip(&w).filter(|(r, _)| r.count == slice_count).map(|(r, &x)| (r, x)).unzip();
    let slice_test = level_wald(&slice_a, &slice_b, &slice_w);

    let ess = stats::effective_sample_size(&w);
    let slice_ess = if slice_w.is_empty() { 0.0 } else { stats::effective_sample_size(&slice_w) };
    let wsum: f64 = w.iter().sum();
    Ok(ReweightStats {
        config: *cfg,
        q,
        q_new,
        mean_count_direct: direct.iter().map(|r| r.count as f64).sum::<f64>() / direct.len() as f64,
        mean_count_weighted: weighted.iter().zip(&w).map(|(r, x)| r.count as f64 * x).sum::<f64>() / wsum,
        direct_counts,
        weighted_counts,
        count_test,
        level_test,
        slice_count,
        slice_test,
        flagged: ess < MIN_ESS || slice_ess < MIN_ESS,
        ess,
        slice_ess,
    })
}

/// ε giving a mean square count near `target` for normalized fields h/Q, by bisection in log ε
/// over `pilot` fields.
pub fn calibrate_epsilon(grid_size: usize, q: f64, target: f64, pilot: usize, seed: u64) -> Result<f64> {
    let fields = sample_seeds(seed, 3, pilot)
        .into_iter()
        .map(|s| gff::sample_dgff_with(grid_size, s, Execution::Sequential))
        .collect::<Result<Vec<_>>>()?;
    let cap = gff::level_of_size(grid_size)?;
    let mean_count = |eps: f64| -> Result<f64> {
        let mut total = 0usize;
        for f in &fields {
            total += subdivision::subdivide_summary(f, q, eps, cap, false)?.squares;
        }
        Ok(total as f64 / fields.len() as f64)
    };
    let (mut lo, mut hi) = (1e-4f64.ln(), 1e2f64.ln());
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if mean_count(mid.exp())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
