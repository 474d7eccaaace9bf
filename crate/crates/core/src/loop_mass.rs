//! Brownian loop masses in quadratic-variation windows.
//!
//! A loop of half quadratic variation `u` on a surface has mass density
//! `u⁻¹ tr(e^{−uΔ/2}) du`; with `t = u/2` this is `t⁻¹ tr(e^{−tΔ}) dt`, so the
//! QV window `(4δ, 4C)` is the heat-time window `(δ, C)`.

use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::exec::{self, compensated_sum, Execution};
use crate::quadrature::{self, Estimate};
use crate::special::{self, EULER_GAMMA};
use crate::surfaces::{HeatCoefficients, ModelSurface};
use crate::zeta_det::{ZetaSolver, QUAD_TOL};

/// Split used for the reference log-determinant in the residuals.
pub const REFERENCE_SPLIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopMassQuery {
    pub surface: ModelSurface,
    /// Lower quadratic-variation bound, 4δ.
    pub qv_low: f64,
    /// Upper bound 4C, or `None` for no upper cut.
    pub qv_high: Option<f64>,
    /// Penalization: each loop is weighted by e^{−κ·QV/4}.
    pub kappa: f64,
}

impl LoopMassQuery {
    pub fn new(surface: ModelSurface, qv_low: f64, qv_high: Option<f64>, kappa: f64) -> Self {
        LoopMassQuery { surface, qv_low, qv_high, kappa }
    }

    pub fn validate(&self) -> Result<()> {
        self.surface.validate()?;
        if !(self.qv_low > 0.0) || !self.qv_low.is_finite() {
            return Err(Error::param("qv_low", format!("must be positive, got {}", self.qv_low)));
        }
        if let Some(h) = self.qv_high {
            if !(h > self.qv_low) {
                return Err(Error::param("qv_high", format!("must exceed qv_low, got {h}")));
            }
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::param("kappa", format!("must be finite and non-negative, got {}", self.kappa)));
        }
        if self.surface.is_closed() && self.kappa == 0.0 && self.qv_high.is_none() {
            return Err(Error::DivergentQuery(format!(
                "{}: unpenalized loops of unbounded size on a closed surface have infinite mass",
                self.surface
            )));
        }
        Ok(())
    }
}

/// One row of a residual sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRow {
    pub delta: f64,
    pub cap_c: Option<f64>,
    pub kappa: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Loop masses and expansion residuals for one surface.
///
/// Holds the heat-trace engine (through its zeta solver) and the reference
/// log-determinant, so sweeps over δ, C and κ reuse both.
pub struct LoopMassSolver {
    zeta: ZetaSolver,
    log_det: f64,
}

impl LoopMassSolver {
    pub fn new(surface: ModelSurface) -> Result<Self> {
        Self::from_zeta(ZetaSolver::new(surface)?)
    }

    pub fn from_zeta(zeta: ZetaSolver) -> Result<Self> {
        let log_det = zeta.log_det(REFERENCE_SPLIT)?.log_det;
        Ok(LoopMassSolver { zeta, log_det })
    }

    pub fn surface(&self) -> &ModelSurface {
        self.zeta.surface()
    }

    pub fn zeta_solver(&self) -> &ZetaSolver {
        &self.zeta
    }

    /// log det′_ζ Δ used on the right-hand sides.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn mass(&self, qv_low: f64, qv_high: Option<f64>, kappa: f64) -> Result<f64> {
        Ok(self.mass_estimate(qv_low, qv_high, kappa, 1.0, 1.0)?.value)
    }

    /// The same mass integrated in the half-QV variable u = 2t.
    pub fn mass_u_form(&self, qv_low: f64, qv_high: Option<f64>, kappa: f64) -> Result<f64> {
        Ok(self.mass_estimate(qv_low, qv_high, kappa, 2.0, 1.0)?.value)
    }

    /// Mass with quadrature panels of the given width in log-time (default 1).
    pub fn mass_with_panels(&self, qv_low: f64, qv_high: Option<f64>, kappa: f64, panel_width: f64) -> Result<f64> {
        Ok(self.mass_estimate(qv_low, qv_high, kappa, 1.0, panel_width)?.value)
    }

    /// Integrates in the variable x = scale·t. The zero modes and the large-time spectral
    /// tail are done in closed form; the rest by log-panel quadrature.
    fn mass_estimate(
        &self,
        qv_low: f64,
        qv_high: Option<f64>,
        kappa: f64,
        scale: f64,
        panel_width: f64,
    ) -> Result<Estimate> {
        LoopMassQuery::new(*self.surface(), qv_low, qv_high, kappa).validate()?;
        let lo = qv_low / 4.0;
        let hi = qv_high.map_or(f64::INFINITY, |h| h / 4.0);
        let n = self.surface().zero_modes() as f64;

        let zero_part = if n == 0.0 {
            0.0
        } else if kappa > 0.0 {
            let upper = if hi.is_finite() { special::exp_integral_e1(kappa * hi) } else { 0.0 };
            n * (special::exp_integral_e1(kappa * lo) - upper)
        } else {
            n * (hi / lo).ln()
        };

        let big_t = self.zeta.tail_start(lo).min(hi);
        let quad = if big_t > lo {
            let engine = self.zeta.engine();
            engine.prepare(lo)?;
            quadrature::integrate_log_panels(
                self.zeta.mode(),
                |x| {
                    let t = x / scale;
                    (-kappa * t).exp() * engine.trace_nonzero(t).unwrap_or(f64::NAN)
                },
                scale * lo,
                scale * big_t,
                QUAD_TOL,
                |x| self.zeta.rounding_floor(x / scale),
                panel_width,
            )
        } else {
            Estimate::default()
        };
        if !quad.value.is_finite() {
            return Err(Error::param("qv_low", "heat trace could not be evaluated on the window"));
        }
        let tail = if hi > big_t { self.shifted_tail(kappa, big_t.max(lo), hi)? } else { 0.0 };
        Ok(Estimate::new(zero_part + quad.value + tail, quad.error))
    }

    /// Σ_{λ>0} m [E1((λ+κ)a) − E1((λ+κ)b)].
    fn shifted_tail(&self, kappa: f64, a: f64, b: f64) -> Result<f64> {
        let cutoff = 700.0 / a;
        let spec = self.zeta.engine().spectrum(cutoff)?;
        Ok(compensated_sum(
            spec.pairs
                .iter()
                .filter(|p| p.0 > 0.0 && p.0 <= cutoff)
                .map(|&(l, m)| {
                    let r = l + kappa;
                    let upper = if b.is_finite() { special::exp_integral_e1(r * b) } else { 0.0 };
                    m as f64 * (special::exp_integral_e1(r * a) - upper)
                }),
        ))
    }

    fn small_loop_terms(&self, delta: f64) -> f64 {
        let HeatCoefficients { a_coef, b_coef, c_coef } = self.zeta.coefficients();
        a_coef / delta + 2.0 * b_coef / delta.sqrt() - c_coef * (delta.ln() + EULER_GAMMA)
    }

    /// Mass of loops with QV > 4δ minus its small-loop expansion (boundary surfaces).
    ///
    /// The constant term uses the surface's own heat coefficient, which is χ/6 for
    /// smooth boundaries and picks up the corner contribution on rectangles.
    pub fn residual_boundary(&self, delta: f64) -> Result<ResidualRow> {
        if self.surface().is_closed() {
            return Err(Error::param("surface", "boundary residual needs a surface with boundary"));
        }
        check_delta(delta)?;
        let lhs = self.mass(4.0 * delta, None, 0.0)?;
        let rhs = self.small_loop_terms(delta) - self.log_det;
        Ok(row(delta, None, 0.0, lhs, rhs))
    }

    /// Mass in the window (4δ, 4C) minus the closed-surface expansion.
    pub fn residual_closed(&self, delta: f64, cap_c: f64) -> Result<ResidualRow> {
        if !self.surface().is_closed() {
            return Err(Error::param("surface", "closed residual needs a closed surface"));
        }
        check_delta(delta)?;
        if !(cap_c > delta) {
            return Err(Error::param("cap_c", format!("must exceed delta, got {cap_c}")));
        }
        let lhs = self.mass(4.0 * delta, Some(4.0 * cap_c), 0.0)?;
        let rhs = self.small_loop_terms(delta) + cap_c.ln() + EULER_GAMMA - self.log_det;
        Ok(row(delta, Some(cap_c), 0.0, lhs, rhs))
    }

    /// Penalized mass of loops with QV ≥ 4δ minus its expansion.
    pub fn residual_decay(&self, delta: f64, kappa: f64) -> Result<ResidualRow> {
        if !self.surface().is_closed() {
            return Err(Error::param("surface", "decay residual needs a closed surface"));
        }
        check_delta(delta)?;
        if !(kappa > 0.0) {
            return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
        }
        let lhs = self.mass(4.0 * delta, None, kappa)?;
        let rhs = self.small_loop_terms(delta) - kappa.ln() - self.log_det;
        Ok(row(delta, None, kappa, lhs, rhs))
    }

    /// ∫_0^∞ (2u)^s / (4^s Γ(s)) u⁻¹ tr(e^{−uΔ/2}) du, evaluated in u.
    pub fn zeta_from_weighted_loops(&self, s: f64) -> Result<f64> {
        if self.surface().is_closed() {
            return Err(Error::param("surface", "weighted-loop zeta is defined here for boundary surfaces"));
        }
        if !(s > 1.0) {
            return Err(Error::param("s", format!("must exceed 1, got {s}")));
        }
        let HeatCoefficients { a_coef, b_coef, c_coef } = self.zeta.coefficients();
        let engine = self.zeta.engine();
        let delta = REFERENCE_SPLIT;
        let t_lo = self.zeta.head_cutoff();
        let big_t = self.zeta.tail_start(delta);
        engine.prepare(t_lo)?;
        let weight = |u: f64| (u / 2.0).powf(s);
        // Short loops: expansion terms exactly, the remainder numerically.
        let analytic = a_coef * delta.powf(s - 1.0) / (s - 1.0)
            + b_coef * delta.powf(s - 0.5) / (s - 0.5)
            + c_coef * delta.powf(s) / s;
        let head = quadrature::integrate_dt_over_t_with_floor(
            self.zeta.mode(),
            |u| weight(u) * engine.remainder(u / 2.0).unwrap_or(f64::NAN),
            2.0 * t_lo,
            2.0 * delta,
            QUAD_TOL,
            |u| weight(u) * self.zeta.rounding_floor(u / 2.0),
        ) + self.zeta.head_model_integral(s);
        let body = quadrature::integrate_dt_over_t_with_floor(
            self.zeta.mode(),
            |u| weight(u) * engine.trace(u / 2.0).unwrap_or(f64::NAN),
            2.0 * delta,
            2.0 * big_t,
            QUAD_TOL,
            |u| weight(u) * self.zeta.rounding_floor(u / 2.0),
        );
        let spec = engine.spectrum(700.0 / big_t)?;
        let tail = compensated_sum(
            spec.pairs
                .iter()
                .filter(|p| p.0 > 0.0)
                .map(|&(l, m)| m as f64 * l.powf(-s) * gamma_ur(s, l * big_t)),
        );
        let value = (analytic + head.value + body.value) / special::gamma(s) + tail;
        if !value.is_finite() {
            return Err(Error::param("s", "weighted-loop integral did not converge"));
        }
        Ok(value)
    }

    pub fn sweep_boundary(&self, deltas: &[f64], mode: Execution) -> Result<Vec<ResidualRow>> {
        exec::map_slice(mode, deltas, |&d| self.residual_boundary(d)).into_iter().collect()
    }

    pub fn sweep_closed(&self, grid: &[(f64, f64)], mode: Execution) -> Result<Vec<ResidualRow>> {
        exec::map_slice(mode, grid, |&(d, c)| self.residual_closed(d, c)).into_iter().collect()
    }

    pub fn sweep_decay(&self, grid: &[(f64, f64)], mode: Execution) -> Result<Vec<ResidualRow>> {
        exec::map_slice(mode, grid, |&(d, k)| self.residual_decay(d, k)).into_iter().collect()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if (1e-5..=0.5).contains(&delta) {
        Ok(())
    } else {
        Err(Error::param("delta", format!("must lie in [1e-5, 0.5], got {delta}")))
    }
}

fn row(delta: f64, cap_c: Option<f64>, kappa: f64, lhs: f64, rhs: f64) -> ResidualRow {
    ResidualRow { delta, cap_c, kappa, lhs, rhs, residual: lhs - rhs }
}

pub fn loop_mass(query: &LoopMassQuery) -> Result<f64> {
    query.validate()?;
    LoopMassSolver::new(query.surface)?.mass(query.qv_low, query.qv_high, query.kappa)
}

pub fn theorem_residual_boundary(surface: &ModelSurface, delta: f64) -> Result<f64> {
    Ok(LoopMassSolver::new(*surface)?.residual_boundary(delta)?.residual)
}

pub fn theorem_residual_closed(surface: &ModelSurface, delta: f64, cap_c: f64) -> Result<f64> {
    Ok(LoopMassSolver::new(*surface)?.residual_closed(delta, cap_c)?.residual)
}

pub fn decay_residual(surface: &ModelSurface, delta: f64, kappa: f64) -> Result<f64> {
    Ok(LoopMassSolver::new(*surface)?.residual_decay(delta, kappa)?.residual)
}

pub fn zeta_from_weighted_loops(surface: &ModelSurface, s: f64) -> Result<f64> {
    LoopMassSolver::new(*surface)?.zeta_from_weighted_loops(s)
}

/// Rate r ≥ 0 such that the excesses `values[i] − values[last]` decay like e^{−r·x_i},
/// fitted by least squares on the points whose excess clears `floor`.
/// Returns `None` when fewer than two points clear the floor.
pub fn fitted_decay_rate(xs: &[f64], values: &[f64], floor: f64) -> Option<f64> {
    let last = *values.last()?;
    let (px, py): (Vec<f64>, Vec<f64>) = xs[..xs.len() - 1]
        .iter()
        .zip(values)
        .filter_map(|(&x, &v)| {
            let e = (v - last).abs();
            (e > floor).then(|| (x, e.ln()))
        })
        .unzip();
    if px.len() < 2 {
        return None;
    }
    Some(-crate::stats::ols(&px, &py).0)
}
