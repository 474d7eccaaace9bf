//! Command-line surface: clap definitions and their resolution against a config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, ConfigError, ExperimentConfig, GraphSource, IniFile, List, Resolver, SurfaceArg, TheoremCase};

#[derive(Debug, Parser)]
#[command(name = "loopzeta", version, about = "Loop measures, zeta determinants and quantum-size subdivisions")]
pub struct Cli {
    /// INI-style config file; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed of every random stream (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for CSV/JSON/SVG artifacts (default `out`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for the parallel pool.
    #[arg(long, global = true, env = "LOOPZETA_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Determinant identity, loop masses and spanning trees of a graph.
    GraphLoops(GraphLoopsArgs),
    /// Samples random-walk loop soups.
    SoupSample(SoupArgs),
    /// Zeta-regularized log-determinant of a model surface.
    ZetaDet(ZetaArgs),
    /// Brownian loop mass in a quadratic-variation window.
    LoopMass(LoopMassArgs),
    /// Residuals of the small-loop expansion over a δ sweep.
    VerifyTheorem(VerifyArgs),
    /// Discrete torus determinants and their constant-order term.
    LatticeTorus(LatticeArgs),
    /// Samples a discrete Gaussian free field and dumps it.
    GffSample(GffArgs),
    /// Quantum-size dyadic subdivision of a sampled field.
    Subdivide(SubdivideArgs),
    /// Two-protocol central-charge reweighting test.
    ReweightTest(ReweightArgs),
    /// Runs the acceptance suite.
    Acceptance(AcceptanceArgs),
}

#[derive(Debug, Args)]
pub struct GraphLoopsArgs {
    /// Edge-list file (`# boundary: ...` header) or `random:<max vertices>`.
    #[arg(long)]
    pub graph: Option<GraphSource>,
    /// Truncation length L of the loop series (default 200).
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Penalty α in (0, 1) for the penalized loop mass.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SoupArgs {
    #[arg(long)]
    pub graph: Option<GraphSource>,
    /// Soup intensity c (default 1).
    #[arg(long)]
    pub intensity: Option<f64>,
    /// Longest loop length sampled (default 60).
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Number of soups (default 1000).
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ZetaArgs {
    /// `interval:L`, `rect:AxB`, `torus:AxB`, `sphere:R` or `disk:R`.
    #[arg(long)]
    pub surface: Option<SurfaceArg>,
    /// Comma-separated split points δ (default 0.1).
    #[arg(long)]
    pub delta: Option<List<f64>>,
}

#[derive(Debug, Args)]
pub struct LoopMassArgs {
    #[arg(long)]
    pub surface: Option<SurfaceArg>,
    /// Lower quadratic-variation bound.
    #[arg(long)]
    pub qv_low: Option<f64>,
    /// Upper quadratic-variation bound (omit for no upper bound).
    #[arg(long)]
    pub qv_high: Option<f64>,
    /// Killing rate κ (default 0).
    #[arg(long)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// boundary, closed or decay.
    #[arg(long)]
    pub case: Option<TheoremCase>,
    #[arg(long)]
    pub surface: Option<SurfaceArg>,
    /// Comma-separated δ values (default five log-spaced points in [1e-4, 1e-2]).
    #[arg(long)]
    pub delta: Option<List<f64>>,
    /// Upper cutoff C of the closed case (default 50).
    #[arg(long)]
    pub cap_c: Option<f64>,
    /// Killing rate of the decay case (default 1e-5).
    #[arg(long)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LatticeArgs {
    /// Doubling sequence of n_x values (default 64,128,256,512).
    #[arg(long)]
    pub sizes: Option<List<usize>>,
    /// n_y / n_x (default 1).
    #[arg(long)]
    pub aspect: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GffArgs {
    /// Grid side, a power of two in [16, 8192] (default 256).
    #[arg(long)]
    pub size: Option<usize>,
    /// Path of the binary dump (default `<out-dir>/gff-sample.bin`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SubdivideArgs {
    /// Grid side (default 1024).
    #[arg(long)]
    pub size: Option<usize>,
    /// Matter central charge c (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub charge: Option<f64>,
    /// ε as a fraction of the quantum size of the unit square (default 2e-4).
    #[arg(long)]
    pub eps_ratio: Option<f64>,
    /// Deepest level (default: the grid level).
    #[arg(long)]
    pub depth_cap: Option<u32>,
    /// Path of the SVG render (default `<out-dir>/subdivide.svg`).
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReweightArgs {
    /// Grid side (default 64).
    #[arg(long)]
    pub size: Option<usize>,
    /// Base central charge c (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub charge: Option<f64>,
    /// Shift c′ (default -12.5).
    #[arg(long, allow_hyphen_values = true)]
    pub delta_charge: Option<f64>,
    /// Samples per protocol (default 10000).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Absolute ε; calibrated from pilot fields when omitted.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Mean square count targeted by the calibration (default 16).
    #[arg(long)]
    pub target_count: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AcceptanceArgs {
    /// Comma-separated criterion numbers (default: all).
    #[arg(long)]
    pub only: Option<List<u32>>,
}

const DEFAULT_VERIFY_DELTAS: [f64; 5] = [1e-4, 3.1622776601683794e-4, 1e-3, 3.1622776601683794e-3, 1e-2];

impl Cli {
    fn command_name(&self) -> &'static str {
        match self.command {
            Sub::GraphLoops(_) => "graph-loops",
            Sub::SoupSample(_) => "soup-sample",
            Sub::ZetaDet(_) => "zeta-det",
            Sub::LoopMass(_) => "loop-mass",
            Sub::VerifyTheorem(_) => "verify-theorem",
            Sub::LatticeTorus(_) => "lattice-torus",
            Sub::GffSample(_) => "gff-sample",
            Sub::Subdivide(_) => "subdivide",
            Sub::ReweightTest(_) => "reweight-test",
            Sub::Acceptance(_) => "acceptance",
        }
    }

    /// Merges flags with the config file (if any) into a validated configuration.
    pub fn resolve(self) -> Result<ExperimentConfig, ConfigError> {
        let file = match &self.config {
            Some(p) => IniFile::load(p)?,
            None => IniFile::default(),
        };
        let name = self.command_name();
        let mut r = Resolver::new(&file, name);
        let seed = r.or("seed", self.seed, 0u64)?;
        let out_dir = PathBuf::from(r.or("out-dir", self.out_dir.map(|p| p.display().to_string()), "out".to_string())?);
        let workers = r.optional("workers", self.workers)?;
        // Seed, output directory and workers are reported separately.
        let mut r = Resolver::new(&file, name);
        let command = match self.command {
            Sub::GraphLoops(a) => Command::GraphLoops {
                graph: r.required("graph", a.graph)?,
                max_len: r.or("max-len", a.max_len, 200)?,
                alpha: r.optional("alpha", a.alpha)?,
            },
            Sub::SoupSample(a) => Command::SoupSample {
                graph: r.required("graph", a.graph)?,
                intensity: r.or("intensity", a.intensity, 1.0)?,
                max_len: r.or("max-len", a.max_len, 60)?,
                samples: r.or("samples", a.samples, 1000)?,
            },
            Sub::ZetaDet(a) => Command::ZetaDet {
                surface: r.required("surface", a.surface)?.0,
                deltas: r.or("delta", a.delta, List(vec![0.1]))?.0,
            },
            Sub::LoopMass(a) => Command::LoopMass {
                surface: r.required("surface", a.surface)?.0,
                qv_low: r.required("qv-low", a.qv_low)?,
                qv_high: r.optional("qv-high", a.qv_high)?,
                kappa: r.or("kappa", a.kappa, 0.0)?,
            },
            Sub::VerifyTheorem(a) => Command::VerifyTheorem {
                case: r.required("case", a.case)?,
                surface: r.required("surface", a.surface)?.0,
                deltas: r.or("delta", a.delta, List(DEFAULT_VERIFY_DELTAS.to_vec()))?.0,
                cap_c: r.or("cap-c", a.cap_c, 50.0)?,
                kappa: r.or("kappa", a.kappa, 1e-5)?,
            },
            Sub::LatticeTorus(a) => Command::LatticeTorus {
                sizes: r.or("sizes", a.sizes, List(vec![64, 128, 256, 512]))?.0,
                aspect: r.or("aspect", a.aspect, 1)?,
            },
            Sub::GffSample(a) => Command::GffSample {
                size: r.or("size", a.size, 256)?,
                dump: r.optional("out", a.out.map(|p| p.display().to_string()))?.map(PathBuf::from),
            },
            Sub::Subdivide(a) => Command::Subdivide {
                size: r.or("size", a.size, 1024)?,
                charge: r.or("charge", a.charge, 0.0)?,
                eps_ratio: r.or("eps-ratio", a.eps_ratio, 2e-4)?,
                depth_cap: r.optional("depth-cap", a.depth_cap)?,
                svg: r.optional("svg", a.svg.map(|p| p.display().to_string()))?.map(PathBuf::from),
            },
            Sub::ReweightTest(a) => Command::ReweightTest {
                size: r.or("size", a.size, 64)?,
                charge: r.or("charge", a.charge, 0.0)?,
                delta_charge: r.or("delta-charge", a.delta_charge, -12.5)?,
                samples: r.or("samples", a.samples, 10_000)?,
                epsilon: r.optional("epsilon", a.epsilon)?,
                target_count: r.or("target-count", a.target_count, 16.0)?,
            },
            Sub::Acceptance(a) => Command::Acceptance { only: r.or("only", a.only, List(Vec::new()))?.0 },
        };
        let cfg = ExperimentConfig { command, seed, out_dir, workers, resolved: r.finish() };
        cfg.validate()?;
        Ok(cfg)
    }
}
