//! Model surfaces with explicit Laplace spectra and a certified heat-trace evaluator.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::exec::compensated_sum;
use crate::special;

/// Crossover between eigen-sums and Poisson-dual sums for lattice-type spectra.
pub const T_STAR: f64 = 0.05;

/// Absolute tolerance for the discarded part of every eigen-sum.
pub const TAIL_TOLERANCE: f64 = 1e-13;

/// Default cap on the number of distinct eigenvalues materialised.
pub const DEFAULT_BUDGET: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSurface {
    IntervalDirichlet { length: f64 },
    RectangleDirichlet { a: f64, b: f64 },
    FlatTorus { a: f64, b: f64 },
    RoundSphere { radius: f64 },
    DiskDirichlet { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatCoefficients {
    /// Coefficient of 1/t.
    pub a_coef: f64,
    /// Coefficient of 1/√t.
    pub b_coef: f64,
    /// Constant term.
    pub c_coef: f64,
}

/// Bound N(λ) ≤ lin·λ + sqrt·√λ + constant on the eigenvalue counting function.
#[derive(Debug, Clone, Copy)]
struct CountingBound {
    lin: f64,
    sqrt: f64,
    constant: f64,
}

impl CountingBound {
    fn count(&self, lambda: f64) -> f64 {
        self.lin * lambda + self.sqrt * lambda.sqrt() + self.constant
    }

    /// Bound on Σ_{λ > cutoff} m e^{-λt}, by parts against the counting bound
    /// (with √λ ≤ (λ/√Λ + √Λ)/2 for the square-root part).
    fn tail(&self, cutoff: f64, t: f64) -> f64 {
        let lt = cutoff + 1.0 / t;
        let root = cutoff.sqrt().max(1e-300);
        (-cutoff * t).exp()
            * (self.lin * lt + self.sqrt * (lt / (2.0 * root) + root / 2.0) + self.constant)
    }

    /// Smallest cutoff (on a geometric grid) whose tail bound is below `tol`.
    fn cutoff_for(&self, t: f64, tol: f64) -> f64 {
        let mut cutoff = 20.0 / t;
        while self.tail(cutoff, t) > tol {
            cutoff *= 1.1;
        }
        cutoff
    }
}

impl ModelSurface {
    pub fn validate(&self) -> Result<()> {
        let ok = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("lengths must be positive and finite, got {v}")))
            }
        };
        match *self {
            ModelSurface::IntervalDirichlet { length } => ok("length", length),
            ModelSurface::RectangleDirichlet { a, b } | ModelSurface::FlatTorus { a, b } => {
                ok("a", a)?;
                ok("b", b)
            }
            ModelSurface::RoundSphere { radius } | ModelSurface::DiskDirichlet { radius } => {
                ok("radius", radius)
            }
        }
    }

    /// Parses `interval:L`, `rect:AxB`, `torus:AxB`, `sphere:R` or `disk:R`.
    pub fn parse(spec: &str) -> Result<ModelSurface> {
        let bad = |m: String| Error::param("surface", m);
        let (kind, dims) = spec
            .trim()
            .split_once(':')
            .ok_or_else(|| bad(format!("expected `kind:dimensions`, got `{spec}`")))?;
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("`{s}`: {e}")))
        };
        let pair = |s: &str| -> Result<(f64, f64)> {
            let (x, y) = s
                .split_once('x')
                .ok_or_else(|| bad(format!("expected `AxB`, got `{s}`")))?;
            Ok((num(x)?, num(y)?))
        };
        let surface = match kind.trim() {
            "interval" => ModelSurface::IntervalDirichlet { length: num(dims)? },
            "rect" | "rectangle" => {
                let (a, b) = pair(dims)?;
                ModelSurface::RectangleDirichlet { a, b }
            }
            "torus" => {
                let (a, b) = pair(dims)?;
                ModelSurface::FlatTorus { a, b }
            }
            "sphere" => ModelSurface::RoundSphere { radius: num(dims)? },
            "disk" => ModelSurface::DiskDirichlet { radius: num(dims)? },
            other => return Err(bad(format!("unknown surface kind `{other}`"))),
        };
        surface.validate()?;
        Ok(surface)
    }

    pub fn volume(&self) -> f64 {
        match *self {
            ModelSurface::IntervalDirichlet { length } => length,
            ModelSurface::RectangleDirichlet { a, b } | ModelSurface::FlatTorus { a, b } => a * b,
            ModelSurface::RoundSphere { radius } => 4.0 * PI * radius * radius,
            ModelSurface::DiskDirichlet { radius } => PI * radius * radius,
        }
    }

    /// Boundary length; the interval's two endpoints count as zero length.
    pub fn boundary_length(&self) -> f64 {
        match *self {
            ModelSurface::RectangleDirichlet { a, b } => 2.0 * (a + b),
            ModelSurface::DiskDirichlet { radius } => 2.0 * PI * radius,
            _ => 0.0,
        }
    }

    pub fn euler_char(&self) -> i32 {
        match self {
            ModelSurface::RoundSphere { .. } => 2,
            ModelSurface::FlatTorus { .. } => 0,
            _ => 1,
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, ModelSurface::FlatTorus { .. } | ModelSurface::RoundSphere { .. })
    }

    /// Multiplicity of the zero eigenvalue.
    pub fn zero_modes(&self) -> usize {
        usize::from(self.is_closed())
    }

    pub fn is_two_dimensional(&self) -> bool {
        !matches!(self, ModelSurface::IntervalDirichlet { .. })
    }

    /// True when the boundary (if any) is smooth.
    pub fn has_smooth_boundary(&self) -> bool {
        !matches!(self, ModelSurface::RectangleDirichlet { .. })
    }

    /// All lengths multiplied by `factor` (eigenvalues divided by factor²).
    pub fn scaled(&self, factor: f64) -> ModelSurface {
        match *self {
            ModelSurface::IntervalDirichlet { length } => ModelSurface::IntervalDirichlet {
                length: length * factor,
            },
            ModelSurface::RectangleDirichlet { a, b } => ModelSurface::RectangleDirichlet {
                a: a * factor,
                b: b * factor,
            },
            ModelSurface::FlatTorus { a, b } => ModelSurface::FlatTorus {
                a: a * factor,
                b: b * factor,
            },
            ModelSurface::RoundSphere { radius } => ModelSurface::RoundSphere {
                radius: radius * factor,
            },
            ModelSurface::DiskDirichlet { radius } => ModelSurface::DiskDirichlet {
                radius: radius * factor,
            },
        }
    }

    pub fn heat_coefficients(&self) -> HeatCoefficients {
        match *self {
            ModelSurface::IntervalDirichlet { length } => HeatCoefficients {
                a_coef: 0.0,
                b_coef: length / (2.0 * PI.sqrt()),
                c_coef: -0.5,
            },
            ModelSurface::RectangleDirichlet { .. } => HeatCoefficients {
                a_coef: self.volume() / (4.0 * PI),
                b_coef: -self.boundary_length() / (8.0 * PI.sqrt()),
                c_coef: 0.25,
            },
            _ => HeatCoefficients {
                a_coef: self.volume() / (4.0 * PI),
                b_coef: -self.boundary_length() / (8.0 * PI.sqrt()),
                c_coef: self.euler_char() as f64 / 6.0,
            },
        }
    }

    fn counting_bound(&self) -> CountingBound {
        let cb = |lin, sqrt, constant| CountingBound { lin, sqrt, constant };
        match *self {
            ModelSurface::IntervalDirichlet { length } => cb(0.0, length / PI, 0.0),
            ModelSurface::RectangleDirichlet { a, b } => cb(a * b / (4.0 * PI), 0.0, 0.0),
            ModelSurface::FlatTorus { a, b } => cb(a * b / (PI * PI), (a + b) / PI, 1.0),
            ModelSurface::RoundSphere { radius } => cb(radius * radius, 2.0 * radius, 1.0),
            ModelSurface::DiskDirichlet { radius } => cb(radius * radius / 2.0, 2.0 * radius, 1.0),
        }
    }

    /// Eigenvalue cutoff needed for an eigen-sum at time `t` to reach [`TAIL_TOLERANCE`].
    pub fn cutoff_for(&self, t: f64) -> f64 {
        self.counting_bound().cutoff_for(t, TAIL_TOLERANCE)
    }

    /// Upper bound on the number of eigenvalues (with multiplicity) up to `cutoff`.
    pub fn count_bound(&self, cutoff: f64) -> f64 {
        self.counting_bound().count(cutoff)
    }
}

impl fmt::Display for ModelSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSurface::IntervalDirichlet { length } => write!(f, "interval:{length}"),
            ModelSurface::RectangleDirichlet { a, b } => write!(f, "rect:{a}x{b}"),
            ModelSurface::FlatTorus { a, b } => write!(f, "torus:{a}x{b}"),
            ModelSurface::RoundSphere { radius } => write!(f, "sphere:{radius}"),
            ModelSurface::DiskDirichlet { radius } => write!(f, "disk:{radius}"),
        }
    }
}

impl std::str::FromStr for ModelSurface {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelSurface::parse(s)
    }
}

/// All eigenvalues up to a cutoff, as sorted (eigenvalue, multiplicity) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenStream {
    pub surface: ModelSurface,
    pub cutoff: f64,
    pub pairs: Vec<(f64, usize)>,
}

impl EigenStream {
    /// Number of eigenvalues counted with multiplicity.
    pub fn count(&self) -> usize {
        self.pairs.iter().map(|p| p.1).sum()
    }

    /// Smallest nonzero eigenvalue and its multiplicity.
    pub fn first_nonzero(&self) -> Option<(f64, usize)> {
        self.pairs.iter().copied().find(|p| p.0 > 0.0)
    }

    /// Σ m e^{-λt} over the stored pairs with λ ≤ `cutoff`.
    pub fn trace_up_to(&self, t: f64, cutoff: f64) -> f64 {
        compensated_sum(
            self.pairs
                .iter()
                .take_while(|p| p.0 <= cutoff)
                .map(|&(l, m)| m as f64 * (-l * t).exp()),
        )
    }
}

pub fn eigenvalues(surface: &ModelSurface, cutoff: f64) -> Result<EigenStream> {
    eigenvalues_with_budget(surface, cutoff, DEFAULT_BUDGET)
}

pub fn eigenvalues_with_budget(surface: &ModelSurface, cutoff: f64, budget: usize) -> Result<EigenStream> {
    surface.validate()?;
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::param("cutoff", format!("must be positive, got {cutoff}")));
    }
    let required = surface.count_bound(cutoff).ceil() as usize;
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let mut pairs: Vec<(f64, usize)> = Vec::new();
    match *surface {
        ModelSurface::IntervalDirichlet { length } => {
            let mut n = 1usize;
            loop {
                let l = (n as f64 * PI / length).powi(2);
                if l > cutoff {
                    break;
                }
                pairs.push((l, 1));
                n += 1;
            }
        }
        ModelSurface::RectangleDirichlet { a, b } => {
            let m_max = (a * cutoff.sqrt() / PI) as usize + 1;
            for m in 1..=m_max {
                let lm = (PI * m as f64 / a).powi(2);
                let mut n = 1usize;
                loop {
                    let l = lm + (PI * n as f64 / b).powi(2);
                    if l > cutoff {
                        break;
                    }
                    pairs.push((l, 1));
                    n += 1;
                }
            }
        }
        ModelSurface::FlatTorus { a, b } => {
            let m_max = (a * cutoff.sqrt() / (2.0 * PI)) as usize + 1;
            for m in 0..=m_max {
                let lm = (2.0 * PI * m as f64 / a).powi(2);
                let mut n = 0usize;
                loop {
                    let l = lm + (2.0 * PI * n as f64 / b).powi(2);
                    if l > cutoff {
                        break;
                    }
                    let mult = if m > 0 { 2 } else { 1 } * if n > 0 { 2 } else { 1 };
                    pairs.push((l, mult));
                    n += 1;
                }
            }
        }
        ModelSurface::RoundSphere { radius } => {
            let r2 = radius * radius;
            let mut l = 0usize;
            loop {
                let ev = (l * (l + 1)) as f64 / r2;
                if ev > cutoff {
                    break;
                }
                pairs.push((ev, 2 * l + 1));
                l += 1;
            }
        }
        ModelSurface::DiskDirichlet { radius } => {
            let x_max = radius * cutoff.sqrt();
            let table = special::bessel_zero_table(x_max);
            let r2 = radius * radius;
            for (nu, zeros) in table.per_order.iter().enumerate() {
                let mult = if nu == 0 { 1 } else { 2 };
                for &j in zeros.iter().take_while(|&&j| j <= x_max) {
                    let ev = j * j / r2;
                    if ev <= cutoff {
                        pairs.push((ev, mult));
                    }
                }
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, usize)> = Vec::with_capacity(pairs.len());
    for (l, m) in pairs {
        match merged.last_mut() {
            Some(last) if last.0 == l => last.1 += m,
            _ => merged.push((l, m)),
        }
    }
    Ok(EigenStream {
        surface: *surface,
        cutoff,
        pairs: merged,
    })
}

/// Σ_{k ≥ 1} e^{-k² x}.
fn theta_tail(x: f64) -> f64 {
    let mut s = 0.0;
    let mut k = 1.0f64;
    loop {
        let term = (-k * k * x).exp();
        s += term;
        if term < 1e-18 * s.max(1e-300) || term == 0.0 {
            break;
        }
        k += 1.0;
    }
    s
}

/// Σ_{n ≥ 1} e^{-(nπ/L)² t} by direct summation.
fn dirichlet_direct(length: f64, t: f64) -> f64 {
    theta_tail((PI / length).powi(2) * t)
}

/// Σ_{m ∈ ℤ} e^{-4π² m² t / a²} by direct summation.
fn periodic_direct(a: f64, t: f64) -> f64 {
    1.0 + 2.0 * theta_tail((2.0 * PI / a).powi(2) * t)
}

/// Dual form of the Dirichlet factor: (u − 1/2, 2uS) with u = L/(2√(πt)),
/// S = Σ_{k≥1} e^{-k²L²/t}; the factor equals their sum.
fn dirichlet_dual(length: f64, t: f64) -> (f64, f64) {
    let u = length / (2.0 * (PI * t).sqrt());
    (u - 0.5, 2.0 * u * theta_tail(length * length / t))
}

/// Dual form of the periodic factor: (u, 2uS) with u = a/(2√(πt)), S = Σ_{k≥1} e^{-k²a²/(4t)}.
fn periodic_dual(a: f64, t: f64) -> (f64, f64) {
    let u = a / (2.0 * (PI * t).sqrt());
    (u, 2.0 * u * theta_tail(a * a / (4.0 * t)))
}

/// Heat trace from direct eigen-sums for the lattice-type surfaces.
pub fn heat_trace_lattice_direct(surface: &ModelSurface, t: f64) -> Option<f64> {
    Some(match *surface {
        ModelSurface::IntervalDirichlet { length } => dirichlet_direct(length, t),
        ModelSurface::RectangleDirichlet { a, b } => dirichlet_direct(a, t) * dirichlet_direct(b, t),
        ModelSurface::FlatTorus { a, b } => periodic_direct(a, t) * periodic_direct(b, t),
        _ => return None,
    })
}

/// Heat trace from the Poisson-dual (theta) sums for the lattice-type surfaces.
pub fn heat_trace_lattice_dual(surface: &ModelSurface, t: f64) -> Option<f64> {
    let sum = |(x, y): (f64, f64)| x + y;
    Some(match *surface {
        ModelSurface::IntervalDirichlet { length } => sum(dirichlet_dual(length, t)),
        ModelSurface::RectangleDirichlet { a, b } => sum(dirichlet_dual(a, t)) * sum(dirichlet_dual(b, t)),
        ModelSurface::FlatTorus { a, b } => sum(periodic_dual(a, t)) * sum(periodic_dual(b, t)),
        _ => return None,
    })
}

/// Heat-trace evaluator. Sphere and disk spectra are cached and grown on demand.
pub struct HeatTraceEngine {
    surface: ModelSurface,
    coefficients: HeatCoefficients,
    budget: usize,
    spectrum: Mutex<Option<Arc<EigenStream>>>,
}

impl HeatTraceEngine {
    pub fn new(surface: ModelSurface) -> Self {
        Self::with_budget(surface, DEFAULT_BUDGET)
    }

    pub fn with_budget(surface: ModelSurface, budget: usize) -> Self {
        HeatTraceEngine {
            surface,
            coefficients: surface.heat_coefficients(),
            budget,
            spectrum: Mutex::new(None),
        }
    }

    pub fn surface(&self) -> &ModelSurface {
        &self.surface
    }

    pub fn coefficients(&self) -> HeatCoefficients {
        self.coefficients
    }

    fn is_lattice(&self) -> bool {
        matches!(
            self.surface,
            ModelSurface::IntervalDirichlet { .. }
                | ModelSurface::RectangleDirichlet { .. }
                | ModelSurface::FlatTorus { .. }
        )
    }

    /// Eigenvalues up to at least `cutoff`, from the cache when possible.
    pub fn spectrum(&self, cutoff: f64) -> Result<Arc<EigenStream>> {
        let mut guard = self.spectrum.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(s) = guard.as_ref() {
            if s.cutoff >= cutoff {
                return Ok(Arc::clone(s));
            }
        }
        let grown = guard.as_ref().map_or(cutoff, |s| cutoff.max(1.5 * s.cutoff));
        let s = Arc::new(eigenvalues_with_budget(&self.surface, grown, self.budget)?);
        *guard = Some(Arc::clone(&s));
        Ok(s)
    }

    /// Makes sure every t ≥ `t_min` can be evaluated without exceeding the budget.
    pub fn prepare(&self, t_min: f64) -> Result<()> {
        if !self.is_lattice() {
            self.spectrum(self.surface.cutoff_for(t_min))?;
        }
        Ok(())
    }

    /// tr e^{-tΔ}, zero modes included.
    pub fn trace(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::param("t", format!("must be positive, got {t}")));
        }
        if self.is_lattice() {
            return Ok(if t >= T_STAR {
                heat_trace_lattice_direct(&self.surface, t)
            } else {
                heat_trace_lattice_dual(&self.surface, t)
            }
            .expect("lattice surface"));
        }
        self.eigen_sum(t)
    }

    /// Eigen-sum evaluation with the certified cutoff (any surface).
    pub fn eigen_sum(&self, t: f64) -> Result<f64> {
        let cutoff = self.surface.cutoff_for(t);
        Ok(self.spectrum(cutoff)?.trace_up_to(t, cutoff))
    }

    /// tr e^{-tΔ} − n.
    pub fn trace_nonzero(&self, t: f64) -> Result<f64> {
        if !self.is_lattice() {
            let cutoff = self.surface.cutoff_for(t);
            let s = self.spectrum(cutoff)?;
            return Ok(compensated_sum(
                s.pairs
                    .iter()
                    .take_while(|p| p.0 <= cutoff)
                    .filter(|p| p.0 > 0.0)
                    .map(|&(l, m)| m as f64 * (-l * t).exp()),
            ));
        }
        if let ModelSurface::FlatTorus { a, b } = self.surface {
            if t >= T_STAR {
                // (1 + 2S_a)(1 + 2S_b) − 1 without cancellation.
                let sa = 2.0 * theta_tail((2.0 * PI / a).powi(2) * t);
                let sb = 2.0 * theta_tail((2.0 * PI / b).powi(2) * t);
                return Ok(sa + sb + sa * sb);
            }
        }
        Ok(self.trace(t)? - self.surface.zero_modes() as f64)
    }

    /// R(t) = tr e^{-tΔ} − a/t − b/√t − c.
    pub fn remainder(&self, t: f64) -> Result<f64> {
        let HeatCoefficients { a_coef, b_coef, c_coef } = self.coefficients;
        if t < T_STAR {
            match self.surface {
                ModelSurface::IntervalDirichlet { length } => return Ok(dirichlet_dual(length, t).1),
                ModelSurface::RectangleDirichlet { a, b } => {
                    let (ua, ra) = dirichlet_dual(a, t);
                    let (ub, rb) = dirichlet_dual(b, t);
                    return Ok(ua * rb + ub * ra + ra * rb);
                }
                ModelSurface::FlatTorus { a, b } => {
                    let (ua, ra) = periodic_dual(a, t);
                    let (ub, rb) = periodic_dual(b, t);
                    return Ok(ua * rb + ub * ra + ra * rb);
                }
                _ => {}
            }
        }
        Ok(self.trace(t)? - a_coef / t - b_coef / t.sqrt() - c_coef)
    }

    pub fn short_time_prediction(&self, t: f64) -> f64 {
        let c = self.coefficients;
        c.a_coef / t + c.b_coef / t.sqrt() + c.c_coef
    }

    /// Smallest nonzero eigenvalue and its multiplicity.
    pub fn first_nonzero(&self) -> Result<(f64, usize)> {
        let mut cutoff = 50.0 / self.surface.volume().max(1e-3);
        loop {
            if let Some(p) = self.spectrum(cutoff)?.first_nonzero() {
                return Ok(p);
            }
            cutoff *= 4.0;
        }
    }
}

pub fn heat_trace(surface: &ModelSurface, t: f64) -> Result<f64> {
    HeatTraceEngine::new(*surface).trace(t)
}

pub fn short_time_prediction(surface: &ModelSurface, t: f64) -> f64 {
    let c = surface.heat_coefficients();
    c.a_coef / t + c.b_coef / t.sqrt() + c.c_coef
}
