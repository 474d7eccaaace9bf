//! Subcommand execution and artifact emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use loopzeta::exec::{self, Execution};
use loopzeta::graph_loops::{self, Graph, LoopSoupSampler};
use loopzeta::lattice_bridge::{self, TorusLatticeSpec};
use loopzeta::loop_mass::{LoopMassSolver, ResidualRow};
use loopzeta::reweight::{self, ReweightConfig};
use loopzeta::subdivision::{self, charge_to_params};
use loopzeta::surfaces::ModelSurface;
use loopzeta::{gff, rng, stats, zeta_det};
use serde_json::{json, Value};
use thiserror::Error;

use crate::acceptance;
use crate::config::{Command, ConfigError, ExperimentConfig, GraphSource, TheoremCase};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Library(#[from] loopzeta::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type RunResult<T> = std::result::Result<T, RunError>;

/// What a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Numerical warnings were raised; the process exits with 2.
    pub flagged: bool,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.flagged {
            2
        } else {
            0
        }
    }
}

struct Artifacts<'a> {
    cfg: &'a ExperimentConfig,
    files: Vec<PathBuf>,
}

impl<'a> Artifacts<'a> {
    fn new(cfg: &'a ExperimentConfig) -> RunResult<Self> {
        fs::create_dir_all(&cfg.out_dir).map_err(|source| RunError::Io { path: cfg.out_dir.clone(), source })?;
        Ok(Artifacts { cfg, files: Vec::new() })
    }

    fn path(&self, ext: &str) -> PathBuf {
        self.cfg.out_dir.join(format!("{}.{ext}", self.cfg.command.name()))
    }

    fn write_to(&mut self, path: PathBuf, bytes: &[u8]) -> RunResult<()> {
        fs::write(&path, bytes).map_err(|source| RunError::Io { path: path.clone(), source })?;
        self.files.push(path);
        Ok(())
    }

    fn write(&mut self, ext: &str, text: &str) -> RunResult<()> {
        self.write_to(self.path(ext), text.as_bytes())
    }

    /// Writes the JSON summary, which always carries the resolved config and seed.
    fn finish(mut self, flagged: bool, mut summary: Value) -> RunResult<Outcome> {
        let config: serde_json::Map<String, Value> =
            self.cfg.resolved.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        summary["command"] = json!(self.cfg.command.name());
        summary["seed"] = json!(self.cfg.seed);
        summary["rng"] = json!(rng::ALGORITHM);
        summary["config"] = Value::Object(config);
        summary["flagged"] = json!(flagged);
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        self.write("json", &text)?;
        Ok(Outcome { flagged, files: self.files, summary })
    }
}

fn mode() -> Execution {
    exec::default_mode()
}

pub fn run(cfg: &ExperimentConfig) -> RunResult<Outcome> {
    cfg.validate()?;
    exec::init_workers(cfg.workers);
    if cfg.workers == Some(1) {
        exec::set_default_mode(Execution::Sequential);
    }
    match &cfg.command {
        Command::GraphLoops { graph, max_len, alpha } => graph_loops_cmd(cfg, graph, *max_len, *alpha),
        Command::SoupSample { graph, intensity, max_len, samples } => soup_cmd(cfg, graph, *intensity, *max_len, *samples),
        Command::ZetaDet { surface, deltas } => zeta_cmd(cfg, surface, deltas),
        Command::LoopMass { surface, qv_low, qv_high, kappa } => loop_mass_cmd(cfg, surface, *qv_low, *qv_high, *kappa),
        Command::VerifyTheorem { case, surface, deltas, cap_c, kappa } => verify_cmd(cfg, *case, surface, deltas, *cap_c, *kappa),
        Command::LatticeTorus { sizes, aspect } => lattice_cmd(cfg, sizes, *aspect),
        Command::GffSample { size, dump } => gff_cmd(cfg, *size, dump.as_deref()),
        Command::Subdivide { size, charge, eps_ratio, depth_cap, svg } => {
            subdivide_cmd(cfg, *size, *charge, *eps_ratio, *depth_cap, svg.as_deref())
        }
        Command::ReweightTest { size, charge, delta_charge, samples, epsilon, target_count } => {
            reweight_cmd(cfg, *size, *charge, *delta_charge, *samples, *epsilon, *target_count)
        }
        Command::Acceptance { only } => acceptance_cmd(cfg, only),
    }
}

fn load_graph(source: &GraphSource, seed: u64) -> RunResult<Graph> {
    match source {
        GraphSource::Random(n) => Ok(graph_loops::random_killed_graph(*n, seed)),
        GraphSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: path.clone(), source })?;
            Ok(Graph::parse(&text)?)
        }
    }
}

fn graph_loops_cmd(cfg: &ExperimentConfig, source: &GraphSource, max_len: usize, alpha: Option<f64>) -> RunResult<Outcome> {
    let g = load_graph(source, cfg.seed)?;
    let mut out = Artifacts::new(cfg)?;
    let trees = graph_loops::spanning_tree_count(&g)?;
    let mut summary = json!({
        "vertices": g.vertex_count(),
        "edges": g.edges().len(),
        "boundary": g.boundary(),
        "spanning_trees": trees,
    });
    let mut flagged = false;
    if g.is_killed() {
        let ident = graph_loops::determinant_identity(&g)?;
        let exact = graph_loops::loop_mass_exact(&g)?;
        let t = graph_loops::loop_mass_truncated(&g, max_len)?;
        let mut csv = String::from("k,term,partial_sum\n");
        let mut partial = 0.0;
        for (k, term) in t.terms.iter().enumerate() {
            partial += term;
            writeln!(csv, "{},{},{}", k + 1, term, partial).unwrap();
        }
        out.write("csv", &csv)?;
        flagged = t.tail_bound > 1e-6;
        summary["det_graph"] = json!(ident.det_graph);
        summary["det_rw"] = json!(ident.det_rw);
        summary["degree_product"] = json!(ident.degree_product);
        summary["identity_relative_gap"] = json!(ident.relative_gap());
        summary["loop_mass_exact"] = json!(exact);
        summary["loop_mass_truncated"] = json!(t.mass);
        summary["tail_bound"] = json!(t.tail_bound);
        summary["rho_bound"] = json!(t.rho_bound);
        if let Some(a) = alpha {
            summary["penalized_loop_mass"] = json!(graph_loops::penalized_loop_mass(&g, a)?);
        }
    } else {
        summary["log_det_prime_rw"] = json!(graph_loops::log_det_prime_rw(&g)?);
        if let Some(a) = alpha {
            summary["penalized_loop_mass"] = json!(graph_loops::penalized_loop_mass(&g, a)?);
        }
    }
    out.finish(flagged, summary)
}

fn soup_cmd(cfg: &ExperimentConfig, source: &GraphSource, c: f64, max_len: usize, samples: usize) -> RunResult<Outcome> {
    let g = load_graph(source, cfg.seed)?;
    let sampler = LoopSoupSampler::new(&g, max_len)?;
    let mut r = rng::stream(cfg.seed, 0);
    let mut csv = String::from("sample,loop,length,vertices\n");
    let mut empty = 0usize;
    let mut warning = false;
    for s in 0..samples {
        let soup = sampler.sample(c, &mut r)?;
        warning |= soup.tail_warning;
        empty += soup.is_empty() as usize;
        for (k, l) in soup.loops.iter().enumerate() {
            let verts: Vec<String> = l.iter().map(|v| v.to_string()).collect();
            writeln!(csv, "{s},{k},{},{}", l.len() - 1, verts.join(" ")).unwrap();
        }
    }
    let mut out = Artifacts::new(cfg)?;
    out.write("csv", &csv)?;
    let lambda = sampler.lambda_truncated();
    let summary = json!({
        "samples": samples,
        "intensity": c,
        "lambda_truncated": lambda,
        "tail_bound": sampler.tail_bound(),
        "empty_frequency": empty as f64 / samples as f64,
        "empty_probability": (-c * lambda).exp(),
    });
    out.finish(warning, summary)
}

fn zeta_cmd(cfg: &ExperimentConfig, surface: &ModelSurface, deltas: &[f64]) -> RunResult<Outcome> {
    let items: Vec<(ModelSurface, f64)> = deltas.iter().map(|&d| (*surface, d)).collect();
    let reports = zeta_det::log_det_batch(&items, mode()).into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("delta,log_det,integral_tail,integral_head,correction_terms,error_estimate,flagged\n");
    for r in &reports {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.delta_split, r.log_det, r.integral_tail, r.integral_head, r.correction_terms, r.error_estimate, r.flagged
        )
        .unwrap();
    }
    let mut out = Artifacts::new(cfg)?;
    out.write("csv", &csv)?;
    let (lo, hi) = reports.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.log_det), b.max(r.log_det)));
    let summary = json!({
        "log_det": reports[0].log_det,
        "spread_over_delta": hi - lo,
        "max_error_estimate": reports.iter().map(|r| r.error_estimate).fold(0.0, f64::max),
        "zeta_at_zero": zeta_det::zeta_at_zero(surface),
    });
    out.finish(reports.iter().any(|r| r.flagged), summary)
}

fn residual_csv(rows: &[ResidualRow]) -> String {
    let mut csv = String::from("delta,cap_c,kappa,lhs,rhs,residual\n");
    for r in rows {
        let c = r.cap_c.map_or(String::new(), |c| c.to_string());
        writeln!(csv, "{},{},{},{},{},{}", r.delta, c, r.kappa, r.lhs, r.rhs, r.residual).unwrap();
    }
    csv
}

fn loop_mass_cmd(cfg: &ExperimentConfig, surface: &ModelSurface, lo: f64, hi: Option<f64>, kappa: f64) -> RunResult<Outcome> {
    let solver = LoopMassSolver::new(*surface)?;
    let mass = solver.mass(lo, hi, kappa)?;
    let mut out = Artifacts::new(cfg)?;
    let hi_text = hi.map_or(String::new(), |h| h.to_string());
    out.write("csv", &format!("qv_low,qv_high,kappa,mass\n{lo},{hi_text},{kappa},{mass}\n"))?;
    let summary = json!({ "mass": mass, "log_det": solver.log_det() });
    out.finish(!mass.is_finite(), summary)
}

fn verify_cmd(
    cfg: &ExperimentConfig,
    case: TheoremCase,
    surface: &ModelSurface,
    deltas: &[f64],
    cap_c: f64,
    kappa: f64,
) -> RunResult<Outcome> {
    let solver = LoopMassSolver::new(*surface)?;
    let rows = match case {
        TheoremCase::Boundary => solver.sweep_boundary(deltas, mode())?,
        TheoremCase::Closed => solver.sweep_closed(&deltas.iter().map(|&d| (d, cap_c)).collect::<Vec<_>>(), mode())?,
        TheoremCase::Decay => solver.sweep_decay(&deltas.iter().map(|&d| (d, kappa)).collect::<Vec<_>>(), mode())?,
    };
    let mut out = Artifacts::new(cfg)?;
    out.write("csv", &residual_csv(&rows))?;
    let abs: Vec<f64> = rows.iter().map(|r| r.residual.abs()).collect();
    let slope = if rows.len() >= 2 { Some(stats::log_log_slope(deltas, &abs)) } else { None };
    let summary = json!({
        "case": case.to_string(),
        "fitted_slope": slope,
        "max_abs_residual": abs.iter().cloned().fold(0.0, f64::max),
    });
    out.finish(slope.is_some_and(|s| !s.is_finite()), summary)
}

fn lattice_cmd(cfg: &ExperimentConfig, sizes: &[usize], aspect: usize) -> RunResult<Outcome> {
    let specs = sizes.iter().map(|&n| TorusLatticeSpec::new(n, aspect * n)).collect::<Result<Vec<_>, _>>()?;
    let report = lattice_bridge::constant_term(&specs, mode())?;
    let mut csv = String::from("n_x,n_y,log_det,c_n\n");
    for ((s, l), c) in report.specs.iter().zip(&report.log_dets).zip(&report.constants) {
        writeln!(csv, "{},{},{},{}", s.n_x, s.n_y, l, c).unwrap();
    }
    let mut out = Artifacts::new(cfg)?;
    out.write("csv", &csv)?;
    let side = (aspect as f64).sqrt();
    let summary = json!({
        "aspect": aspect,
        "extrapolated": report.extrapolated,
        "cauchy_gap": report.cauchy_gap,
        "continuum_unit_area": lattice_bridge::flat_torus_log_det_closed_form(1.0 / side, side),
        "bulk_constant": lattice_bridge::bulk_constant(),
    });
    out.finish(report.flagged, summary)
}

fn gff_cmd(cfg: &ExperimentConfig, size: usize, dump: Option<&Path>) -> RunResult<Outcome> {
    let field = gff::sample_dgff_with(size, cfg.seed, mode())?;
    let mut out = Artifacts::new(cfg)?;
    let mut bytes = Vec::new();
    field.write_to(&mut bytes)?;
    let path = dump.map_or_else(|| out.path("bin"), Path::to_path_buf);
    out.write_to(path, &bytes)?;
    let v = field.values();
    let summary = json!({
        "size": size,
        "level": field.level(),
        "min": v.iter().cloned().fold(f64::INFINITY, f64::min),
        "max": v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "center": field.site(size / 2, size / 2),
        "dirichlet_energy": field.dirichlet_energy(),
    });
    out.finish(false, summary)
}

fn subdivide_cmd(
    cfg: &ExperimentConfig,
    size: usize,
    charge: f64,
    eps_ratio: f64,
    depth_cap: Option<u32>,
    svg: Option<&Path>,
) -> RunResult<Outcome> {
    let q = charge_to_params(charge)?.q;
    let field = gff::sample_dgff_with(size, cfg.seed, mode())?.into_averages_only();
    let cap = depth_cap.unwrap_or(field.level());
    let eps = subdivision::relative_epsilon(&field, q, eps_ratio)?;
    let partition = subdivision::subdivide(&field, q, eps, cap)?;
    drop(field);
    let mut out = Artifacts::new(cfg)?;
    out.write("csv", &partition.to_csv())?;
    let svg_path = svg.map_or_else(|| out.path("svg"), Path::to_path_buf);
    out.write_to(svg_path, partition.to_svg(1024).as_bytes())?;
    let summary = json!({
        "q": q,
        "epsilon": eps,
        "depth_cap": cap,
        "squares": partition.len(),
        "capped": partition.flagged_count(),
        "terminated": partition.terminated,
        "level_histogram": partition.level_histogram(),
    });
    out.finish(!partition.terminated, summary)
}

fn reweight_cmd(
    cfg: &ExperimentConfig,
    size: usize,
    charge: f64,
    delta_charge: f64,
    samples: usize,
    epsilon: Option<f64>,
    target: f64,
) -> RunResult<Outcome> {
    let (_, q_new) = reweight::background_charges(charge, delta_charge)?;
    let epsilon = match epsilon {
        Some(e) => e,
        None => reweight::calibrate_epsilon(size, q_new, target, 200, cfg.seed)?,
    };
    let rc = ReweightConfig { grid_size: size, epsilon, c: charge, c_prime: delta_charge, n_samples: samples, seed: cfg.seed };
    let s = reweight::reweighting_experiment(&rc, mode())?;
    let mut csv = String::from("count,direct,weighted\n");
    for (k, (a, b)) in s.direct_counts.iter().zip(&s.weighted_counts).enumerate() {
        writeln!(csv, "{k},{a},{b}").unwrap();
    }
    let mut out = Artifacts::new(cfg)?;
    out.write("csv", &csv)?;
    let test = |t: &stats::TestResult| json!({ "chi_square": t.statistic, "dof": t.dof, "p_value": t.p_value });
    let summary = json!({
        "epsilon": epsilon,
        "q": s.q,
        "q_new": s.q_new,
        "count_test": test(&s.count_test),
        "level_test": test(&s.level_test),
        "slice_count": s.slice_count,
        "slice_test": test(&s.slice_test),
        "ess": s.ess,
        "slice_ess": s.slice_ess,
        "mean_count_direct": s.mean_count_direct,
        "mean_count_weighted": s.mean_count_weighted,
    });
    out.finish(s.flagged, summary)
}

fn acceptance_cmd(cfg: &ExperimentConfig, only: &[u32]) -> RunResult<Outcome> {
    let results = acceptance::run_all(only, mode(), |r| println!("{}", r.line()));
    let mut out = Artifacts::new(cfg)?;
    let mut csv = String::from("id,title,passed,detail\n");
    for r in &results {
        writeln!(csv, "{},{},{},\"{}\"", r.id, r.title, r.passed, r.detail.replace('"', "'")).unwrap();
    }
    out.write("csv", &csv)?;
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    let summary = json!({ "run": results.len(), "failed": failed });
    out.finish(!failed.is_empty(), summary)
}
