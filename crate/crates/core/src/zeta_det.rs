//! Spectral zeta functions and zeta-regularized log-determinants.
//!
//! The continuation splits the Mellin integral at δ. Above δ the heat trace is
//! integrated directly; below δ the short-time terms a/t + b/√t + c are removed
//! and integrated in closed form, leaving an integrable remainder.

use std::f64::consts::PI;
use std::sync::Arc;

use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::exec::{self, compensated_sum, Execution};
use crate::linalg;
use crate::quadrature::{self, Estimate};
use crate::special::{self, EULER_GAMMA};
use crate::surfaces::{HeatCoefficients, HeatTraceEngine, ModelSurface};

/// Reports whose error estimate exceeds this are flagged.
pub const FLAG_THRESHOLD: f64 = 1e-6;

pub(crate) const QUAD_TOL: f64 = 1e-12;
const FIT_POINTS: usize = 40;
const FIT_SPAN: f64 = 16.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ZetaDetReport {
    pub log_det: f64,
    pub delta_split: f64,
    /// ∫_δ^∞ t⁻¹ (tr e^{-tΔ} − n) dt.
    pub integral_tail: f64,
    /// ∫_0^δ t⁻¹ R(t) dt with R the remainder after the short-time terms.
    pub integral_head: f64,
    /// −a/δ − 2b/√δ + (log δ + γ)(c − n).
    pub correction_terms: f64,
    pub error_estimate: f64,
    pub flagged: bool,
}

/// Least-squares model R(t) ≈ Σ c_p t^p on [t_lo, 16 t_lo], used below t_lo.
#[derive(Debug, Clone)]
struct HeadFit {
    t_lo: f64,
    terms: Vec<(f64, f64)>,
    /// Same fit with the highest power dropped, for the error estimate.
    coarse: Vec<(f64, f64)>,
}

impl HeadFit {
    fn none(t_lo: f64) -> HeadFit {
        HeadFit {
            t_lo,
            terms: Vec::new(),
            coarse: Vec::new(),
        }
    }

    /// ∫_0^{t_lo} t^{s-1} R(t) dt under the model, with an error estimate.
    fn integral(&self, s: f64) -> Estimate {
        let eval = |terms: &[(f64, f64)]| -> f64 {
            terms
                .iter()
                .map(|&(p, c)| c * self.t_lo.powf(p + s) / (p + s))
                .sum()
        };
        let fine = eval(&self.terms);
        Estimate::new(fine, (fine - eval(&self.coarse)).abs())
    }
}

/// Spectral zeta machinery for one model surface.
pub struct ZetaSolver {
    engine: Arc<HeatTraceEngine>,
    coef: HeatCoefficients,
    zero_modes: f64,
    lambda1: f64,
    lambda1_mult: usize,
    head: HeadFit,
    mode: Execution,
}

impl ZetaSolver {
    pub fn new(surface: ModelSurface) -> Result<ZetaSolver> {
        Self::with_engine(Arc::new(HeatTraceEngine::new(surface)), exec::default_mode())
    }

    pub fn with_engine(engine: Arc<HeatTraceEngine>, mode: Execution) -> Result<ZetaSolver> {
        let surface = *engine.surface();
        surface.validate()?;
        let (lambda1, lambda1_mult) = engine.first_nonzero()?;
        let head = match surface {
            ModelSurface::IntervalDirichlet { length } => HeadFit::none(length * length / 700.0),
            ModelSurface::RectangleDirichlet { a, b } => HeadFit::none(a.min(b).powi(2) / 700.0),
            ModelSurface::FlatTorus { a, b } => HeadFit::none(a.min(b).powi(2) / 2800.0),
            _ => HeadFit::none(1e-4 * surface.volume() / PI),
        };
        let mut solver = ZetaSolver {
            coef: engine.coefficients(),
            zero_modes: surface.zero_modes() as f64,
            engine,
            lambda1,
            lambda1_mult,
            head,
            mode,
        };
        if matches!(
            surface,
            ModelSurface::RoundSphere { .. } | ModelSurface::DiskDirichlet { .. }
        ) {
            solver.head = solver.fit_head(solver.head.t_lo)?;
        }
        Ok(solver)
    }

    pub fn surface(&self) -> &ModelSurface {
        self.engine.surface()
    }

    pub fn engine(&self) -> &Arc<HeatTraceEngine> {
        &self.engine
    }

    pub fn coefficients(&self) -> HeatCoefficients {
        self.coef
    }

    pub fn mode(&self) -> Execution {
        self.mode
    }

    /// Spectral gap and its multiplicity.
    pub fn first_eigenvalue(&self) -> (f64, usize) {
        (self.lambda1, self.lambda1_mult)
    }

    /// Lowest point at which the heat trace is evaluated; the head model covers (0, t_lo).
    pub fn head_cutoff(&self) -> f64 {
        self.head.t_lo
    }

    /// Modelled ∫_0^{t_lo} t^{s-1} R(t) dt.
    pub fn head_model_integral(&self, s: f64) -> Estimate {
        self.head.integral(s)
    }

    /// ∫_0^δ t⁻¹ R(t) dt.
    pub fn head_remainder_integral(&self, delta: f64) -> Result<Estimate> {
        self.head_integral(0.0, delta)
    }

    /// Absolute rounding level of a heat-trace evaluation at t.
    pub fn rounding_floor(&self, t: f64) -> f64 {
        let HeatCoefficients { a_coef, b_coef, .. } = self.coef;
        1e-15 * (a_coef / t + b_coef.abs() / t.sqrt() + 1.0)
    }

    fn fit_head(&self, t_lo: f64) -> Result<HeadFit> {
        self.engine.prepare(t_lo)?;
        let powers: Vec<f64> = if self.surface().is_closed() {
            vec![1.0, 2.0, 3.0]
        } else {
            vec![0.5, 1.0, 1.5, 2.0, 2.5]
        };
        let ts: Vec<f64> = (0..FIT_POINTS)
            .map(|i| t_lo * FIT_SPAN.powf(i as f64 / (FIT_POINTS - 1) as f64))
            .collect();
        let rs = ts
            .iter()
            .map(|&t| self.engine.remainder(t))
            .collect::<Result<Vec<f64>>>()?;
        let solve = |ps: &[f64]| -> Vec<(f64, f64)> {
            // Scale columns to unit size at t_lo·FIT_SPAN for conditioning.
            let top = t_lo * FIT_SPAN;
            let rows: Vec<Vec<f64>> = ts
                .iter()
                .map(|&t| ps.iter().map(|&p| (t / top).powf(p)).collect())
                .collect();
            let x = linalg::least_squares(&rows, &rs);
            ps.iter().zip(x).map(|(&p, c)| (p, c / top.powf(p))).collect()
        };
        Ok(HeadFit {
            t_lo,
            terms: solve(&powers),
            coarse: solve(&powers[..powers.len() - 1]),
        })
    }

    /// Start of the analytic spectral tail for a split at δ.
    pub fn tail_start(&self, delta: f64) -> f64 {
        (2.0 / self.lambda1).max(2.0 * delta)
    }

    /// Σ_{λ>0} m λ^{-s} Γ(s, λT)/Γ(s) for s > 0, or Σ m E1(λT) for s = 0.
    pub fn spectral_tail(&self, s: f64, big_t: f64) -> Result<f64> {
        let cutoff = 700.0 / big_t;
        let spec = self.engine.spectrum(cutoff)?;
        Ok(compensated_sum(
            spec.pairs
                .iter()
                .take_while(|p| p.0 <= cutoff)
                .filter(|p| p.0 > 0.0)
                .map(|&(l, m)| {
                    let q = if s == 0.0 {
                        special::exp_integral_e1(l * big_t)
                    } else {
                        l.powf(-s) * gamma_ur(s, l * big_t)
                    };
                    m as f64 * q
                }),
        ))
    }

    fn nonzero_trace(&self, t: f64) -> f64 {
        self.engine.trace_nonzero(t).unwrap_or(f64::NAN)
    }

    fn remainder(&self, t: f64) -> f64 {
        self.engine.remainder(t).unwrap_or(f64::NAN)
    }

    /// ∫_{t_lo}^{δ} t^{s-1} R(t) dt plus the modelled part below t_lo.
    fn head_integral(&self, s: f64, delta: f64) -> Result<Estimate> {
        let t_lo = self.head.t_lo;
        if delta <= t_lo {
            if self.head.terms.is_empty() {
                return Ok(Estimate::default());
            }
            let fit = self.fit_head(delta)?;
            return Ok(fit.integral(s));
        }
        self.engine.prepare(t_lo)?;
        let q = quadrature::integrate_dt_over_t_with_floor(
            self.mode,
            |t| t.powf(s) * self.remainder(t),
            t_lo,
            delta,
            QUAD_TOL,
            |t| t.powf(s) * self.rounding_floor(t),
        );
        Ok(q + self.head.integral(s))
    }

    /// ∫_δ^T t^{s-1} (tr − n) dt + spectral tail beyond T (the tail divided by Γ(s) when s > 0).
    fn upper_integral(&self, s: f64, delta: f64) -> Result<(Estimate, f64)> {
        let big_t = self.tail_start(delta);
        self.engine.prepare(delta)?;
        let q = quadrature::integrate_dt_over_t_with_floor(
            self.mode,
            |t| t.powf(s) * self.nonzero_trace(t),
            delta,
            big_t,
            QUAD_TOL,
            |t| t.powf(s) * self.rounding_floor(t),
        );
        Ok((q, self.spectral_tail(s, big_t)?))
    }

    /// Zeta-regularized log-determinant, −ζ′(0), from the split at δ.
    pub fn log_det(&self, delta: f64) -> Result<ZetaDetReport> {
        if !(1e-5..=0.5).contains(&delta) {
            return Err(Error::param("delta", format!("must lie in [1e-5, 0.5], got {delta}")));
        }
        let HeatCoefficients { a_coef, b_coef, c_coef } = self.coef;
        let (upper, tail) = self.upper_integral(0.0, delta)?;
        let head = self.head_integral(0.0, delta)?;
        let integral_tail = upper.value + tail;
        let correction_terms =
            -a_coef / delta - 2.0 * b_coef / delta.sqrt() + (delta.ln() + EULER_GAMMA) * (c_coef - self.zero_modes);
        let zeta_prime = integral_tail + head.value + correction_terms;
        let error_estimate = upper.error + head.error + 1e-13 * (1.0 / delta).ln().max(1.0);
        Ok(ZetaDetReport {
            log_det: -zeta_prime,
            delta_split: delta,
            integral_tail,
            integral_head: head.value,
            correction_terms,
            error_estimate,
            flagged: error_estimate > FLAG_THRESHOLD,
        })
    }

    /// Analytically continued ζ(s) for s > 0 via the split at δ.
    pub fn zeta_continued(&self, s: f64, delta: f64) -> Result<Estimate> {
        if !(s > 0.0) {
            return Err(Error::param("s", format!("continued zeta is evaluated for s > 0, got {s}")));
        }
        let HeatCoefficients { a_coef, b_coef, c_coef } = self.coef;
        let (upper, tail) = self.upper_integral(s, delta)?;
        let head = self.head_integral(s, delta)?;
        let inv_gamma = 1.0 / special::gamma(s);
        let mut analytic = c_coef_term(c_coef - self.zero_modes, s, delta);
        if a_coef != 0.0 {
            analytic += inv_gamma * a_coef * delta.powf(s - 1.0) / (s - 1.0);
        }
        if b_coef != 0.0 {
            analytic += inv_gamma * b_coef * delta.powf(s - 0.5) / (s - 0.5);
        }
        let value = inv_gamma * (upper.value + head.value) + tail + analytic;
        Ok(Estimate::new(value, inv_gamma * (upper.error + head.error)))
    }

    /// ζ(s) for s > 1 from the Mellin representation (1/Γ(s))∫ t^{s-1}(tr − n) dt.
    pub fn zeta_mellin(&self, s: f64) -> Result<Estimate> {
        if s <= 1.0 + 1e-3 {
            return Err(Error::OutsideSeriesDomain(s));
        }
        self.zeta_continued(s, 0.1)
    }

    /// ζ(s) for s > 1 as an eigenvalue sum: a smooth cutoff w(λ/Λ) on the spectrum plus
    /// the Weyl-density integral of the smoothly removed part.
    pub fn zeta_eigen_sum(&self, s: f64) -> Result<Estimate> {
        if s <= 1.0 + 1e-3 {
            return Err(Error::OutsideSeriesDomain(s));
        }
        let surface = self.surface();
        let lambda = if surface.is_two_dimensional() {
            1.0e5 * 4.0 * PI / surface.volume()
        } else {
            (1.0e4 * PI / surface.volume()).powi(2)
        };
        let fine = self.smoothed_sum(s, lambda)?;
        let coarse = self.smoothed_sum(s, lambda / 2.0)?;
        Ok(Estimate::new(fine, (fine - coarse).abs()))
    }

    fn smoothed_sum(&self, s: f64, lambda: f64) -> Result<f64> {
        let spec = self.engine.spectrum(lambda)?;
        let head = compensated_sum(
            spec.pairs
                .iter()
                .take_while(|p| p.0 < lambda)
                .filter(|p| p.0 > 0.0)
                .map(|&(l, m)| m as f64 * l.powf(-s) * smooth_cutoff(l / lambda)),
        );
        let HeatCoefficients { a_coef, b_coef, .. } = self.coef;
        let rho = |l: f64| a_coef + b_coef / (PI * l).sqrt();
        let window = quadrature::adaptive(
            &|l: f64| l.powf(-s) * (1.0 - smooth_cutoff(l / lambda)) * rho(l),
            0.5 * lambda,
            lambda,
            1e-16 * lambda.powf(1.0 - s),
        );
        let beyond = a_coef * lambda.powf(1.0 - s) / (s - 1.0)
            + b_coef / PI.sqrt() * lambda.powf(0.5 - s) / (s - 0.5);
        Ok(head + window.value + beyond)
    }

    /// Richardson extrapolation of the continued ζ to s = 0 along s = 0.1, 0.05, 0.025
    /// (`levels` = 3) or further down the same halving sequence.
    pub fn zeta_at_zero_numeric(&self, levels: usize) -> Result<f64> {
        let levels = levels.max(2);
        let values = exec::map_range(self.mode, levels, |k| {
            self.zeta_continued(0.1 / 2f64.powi(k as i32), 0.1).map(|e| e.value)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        Ok(richardson(&values))
    }
}

/// Richardson table for values f(h), f(h/2), f(h/4), … of a function smooth in h.
pub fn richardson(values: &[f64]) -> f64 {
    let mut table = values.to_vec();
    for j in 1..table.len() {
        let factor = 2f64.powi(j as i32);
        for k in (j..table.len()).rev() {
            table[k] = (factor * table[k] - table[k - 1]) / (factor - 1.0);
        }
    }
    *table.last().expect("at least one value")
}

fn c_coef_term(c_minus_n: f64, s: f64, delta: f64) -> f64 {
    if c_minus_n == 0.0 {
        0.0
    } else {
        c_minus_n * (s * delta.ln() - ln_gamma(s + 1.0)).exp()
    }
}

/// C^∞ step: 1 on [0, 1/2], 0 on [1, ∞).
pub fn smooth_cutoff(x: f64) -> f64 {
    if x <= 0.5 {
        return 1.0;
    }
    if x >= 1.0 {
        return 0.0;
    }
    let f = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    let up = f(1.0 - x);
    up / (up + f(x - 0.5))
}

/// ζ(s) for s > 1 as an eigenvalue sum.
pub fn zeta(surface: &ModelSurface, s: f64) -> Result<f64> {
    if s <= 1.0 + 1e-3 {
        return Err(Error::OutsideSeriesDomain(s));
    }
    Ok(ZetaSolver::new(*surface)?.zeta_eigen_sum(s)?.value)
}

pub fn log_det_zeta(surface: &ModelSurface, delta: f64) -> Result<ZetaDetReport> {
    ZetaSolver::new(*surface)?.log_det(delta)
}

/// ζ(0) = c − n.
pub fn zeta_at_zero(surface: &ModelSurface) -> f64 {
    surface.heat_coefficients().c_coef - surface.zero_modes() as f64
}

/// Integrals entering the Polyakov–Alvarez formula for a conformal factor σ.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConformalTerms {
    /// ∫ |∇σ|² dVol₀.
    pub dirichlet_energy: f64,
    /// ∫ K₀ σ dVol₀.
    pub curvature_moment: f64,
    /// ∫_{∂M} k₀ σ dLen₀.
    pub boundary_curvature_moment: f64,
    /// ∫_{∂M} ∂_n σ dLen₀.
    pub normal_flux: f64,
    /// log Vol_g − log Vol_{g₀}.
    pub log_volume_ratio: f64,
}

/// Polyakov–Alvarez transformation law for a general conformal factor, given its integrals.
pub fn polyakov_alvarez_general(closed: bool, terms: &ConformalTerms, log_det_g0: f64) -> f64 {
    let bulk = -terms.dirichlet_energy / (12.0 * PI) - terms.curvature_moment / (6.0 * PI);
    if closed {
        bulk + terms.log_volume_ratio + log_det_g0
    } else {
        bulk - terms.boundary_curvature_moment / (6.0 * PI) - terms.normal_flux / (4.0 * PI) + log_det_g0
    }
}

/// Polyakov–Alvarez for the constant conformal factor σ (metric e^{2σ} g₀).
pub fn polyakov_alvarez(surface_g0: &ModelSurface, sigma_const: f64, log_det_g0: f64) -> Result<f64> {
    if !surface_g0.is_two_dimensional() {
        return Err(Error::param("surface", "the transformation law is two-dimensional"));
    }
    if !surface_g0.has_smooth_boundary() {
        return Err(Error::CornerGuard);
    }
    // Gauss–Bonnet: ∫K₀ + ∫k₀ = 2πχ.
    let chi = surface_g0.euler_char() as f64;
    let terms = if surface_g0.is_closed() {
        ConformalTerms {
            curvature_moment: 2.0 * PI * chi * sigma_const,
            log_volume_ratio: 2.0 * sigma_const,
            ..Default::default()
        }
    } else {
        let boundary = match *surface_g0 {
            ModelSurface::DiskDirichlet { radius } => 2.0 * PI * radius * (1.0 / radius) * sigma_const,
            _ => 2.0 * PI * chi * sigma_const,
        };
        ConformalTerms {
            curvature_moment: 2.0 * PI * chi * sigma_const - boundary,
            boundary_curvature_moment: boundary,
            ..Default::default()
        }
    };
    Ok(polyakov_alvarez_general(surface_g0.is_closed(), &terms, log_det_g0))
}

/// log-determinants for several (surface, δ) pairs, in parallel over items.
pub fn log_det_batch(items: &[(ModelSurface, f64)], mode: Execution) -> Vec<Result<ZetaDetReport>> {
    exec::map_slice(mode, items, |(s, d)| log_det_zeta(s, *d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_cutoff_is_monotone_step() {
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = smooth_cutoff(0.45 + 0.6 * i as f64 / 100.0);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert!((smooth_cutoff(0.75) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn richardson_is_exact_for_polynomials() {
        let f = |h: f64| 2.0 + 3.0 * h - h * h + 0.5 * h * h * h;
        let v: Vec<f64> = (0..4).map(|k| f(0.1 / 2f64.powi(k))).collect();
        assert!((richardson(&v) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn zeta_domain_is_checked() {
        let s = ModelSurface::FlatTorus { a: 1.0, b: 1.0 };
        assert!(matches!(zeta(&s, 1.0), Err(Error::OutsideSeriesDomain(_))));
    }

    #[test]
    fn interval_log_det_is_log_2l() {
        for l in [1.0, 2.0] {
            let r = log_det_zeta(&ModelSurface::IntervalDirichlet { length: l }, 0.1).unwrap();
            assert!((r.log_det - (2.0 * l).ln()).abs() < 1e-9, "L={l}: {}", r.log_det);
            assert!(!r.flagged);
        }
    }

    #[test]
    fn interval_zeta_is_riemann() {
        let z = zeta(&ModelSurface::IntervalDirichlet { length: PI }, 2.0).unwrap();
        assert!((z - PI.powi(4) / 90.0).abs() < 1e-10, "{z}");
    }

    #[test]
    fn corner_guard() {
        let r = polyakov_alvarez(&ModelSurface::RectangleDirichlet { a: 1.0, b: 1.0 }, 0.1, 0.0);
        assert_eq!(r, Err(Error::CornerGuard));
    }

    #[test]
    fn constant_sigma_shifts() {
        let t = ModelSurface::FlatTorus { a: 1.0, b: 1.0 };
        assert!((polyakov_alvarez(&t, 0.3, 1.0).unwrap() - 1.6).abs() < 1e-15);
        let d = ModelSurface::DiskDirichlet { radius: 1.0 };
        assert!((polyakov_alvarez(&d, 0.5, 1.0).unwrap() - (1.0 - 0.5 / 3.0)).abs() < 1e-15);
        let s = ModelSurface::RoundSphere { radius: 1.0 };
        assert!((polyakov_alvarez(&s, 0.5, 0.0).unwrap() - 4.0 * 0.5 / 3.0).abs() < 1e-15);
    }
}
