//! Adaptive Gauss–Legendre quadrature.

use std::ops::Add;
use std::sync::OnceLock;

use crate::exec::{self, Execution};

/// A quadrature value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Estimate { value, error }
    }
}

impl Add for Estimate {
    type Output = Estimate;
    fn add(self, o: Estimate) -> Estimate {
        Estimate::new(self.value + o.value, self.error + o.error)
    }
}

impl std::iter::Sum for Estimate {
    fn sum<I: Iterator<Item = Estimate>>(iter: I) -> Estimate {
        let mut values = Vec::new();
        let mut err = 0.0;
        for e in iter {
            values.push(e.value);
            err += e.error;
        }
        Estimate::new(exec::compensated_sum(values), err)
    }
}

pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

fn rules() -> &'static (Rule, Rule) {
    static RULES: OnceLock<(Rule, Rule)> = OnceLock::new();
    RULES.get_or_init(|| (gauss_legendre(10), gauss_legendre(20)))
}

pub fn apply(rule: &Rule, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        s += w * f(mid + half * x);
    }
    s * half
}

/// Adaptive bisection with a G10/G20 pair; `error` is the sum of |G20 − G10| over accepted
/// intervals, which overstates the error of the returned G20 value.
pub fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Estimate {
    let (g10, g20) = rules();
    fn rec(
        f: &impl Fn(f64) -> f64,
        g10: &Rule,
        g20: &Rule,
        a: f64,
        b: f64,
        tol: f64,
        depth: u32,
    ) -> Estimate {
        let coarse = apply(g10, f, a, b);
        let fine = apply(g20, f, a, b);
        let err = (fine - coarse).abs();
        if err <= tol || depth >= 20 {
            return Estimate::new(fine, err);
        }
        let m = 0.5 * (a + b);
        rec(f, g10, g20, a, m, 0.5 * tol, depth + 1) + rec(f, g10, g20, m, b, 0.5 * tol, depth + 1)
    }
    rec(f, g10, g20, a, b, abs_tol, 0)
}

/// ∫_lo^hi g(t) dt/t over geometric panels (unit width in log t), each adaptive.
pub fn integrate_dt_over_t<F>(mode: Execution, g: F, lo: f64, hi: f64, abs_tol: f64) -> Estimate
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    integrate_log_panels(mode, g, lo, hi, abs_tol, |_| 0.0, 1.0)
}

/// As [`integrate_dt_over_t`], for integrands that carry rounding noise: `floor(t)` is the
/// absolute noise level of `g` near `t`, and no panel is refined below what that noise allows.
pub fn integrate_dt_over_t_with_floor<F, N>(
    mode: Execution,
    g: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    floor: N,
) -> Estimate
where
    F: Fn(f64) -> f64 + Send + Sync,
    N: Fn(f64) -> f64 + Send + Sync,
{
    integrate_log_panels(mode, g, lo, hi, abs_tol, floor, 1.0)
}

/// General form: panels of width `panel_width` in log t.
pub fn integrate_log_panels<F, N>(
    mode: Execution,
    g: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    floor: N,
    panel_width: f64,
) -> Estimate
where
    F: Fn(f64) -> f64 + Send + Sync,
    N: Fn(f64) -> f64 + Send + Sync,
{
    assert!(lo > 0.0 && hi >= lo && panel_width > 0.0);
    if hi == lo {
        return Estimate::default();
    }
    let (xl, xh) = (lo.ln(), hi.ln());
    let panels = (((xh - xl) / panel_width).ceil() as usize).max(1);
    let width = (xh - xl) / panels as f64;
    let parts = exec::map_range(mode, panels, |p| {
        let a = xl + p as f64 * width;
        let b = if p + 1 == panels { xh } else { a + width };
        let tol = (abs_tol / panels as f64).max(8.0 * floor(a.exp()) * (b - a));
        adaptive(&|x: f64| g(x.exp()), a, b, tol)
    });
    parts.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let r = gauss_legendre(10);
        let v = apply(&r, &|x: f64| x.powi(19) + x.powi(18), -1.0, 1.0);
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let e = adaptive(&|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12);
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((e.value - exact).abs() < 1e-9, "{} vs {exact}", e.value);
    }

    #[test]
    fn log_panels_match_closed_form() {
        // ∫_1e-4^10 e^{-t} dt / t = E1(1e-4) - E1(10)
        let e = integrate_dt_over_t(Execution::Sequential, |t| (-t).exp(), 1e-4, 10.0, 1e-13);
        let exact = crate::special::exp_integral_e1(1e-4) - crate::special::exp_integral_e1(10.0);
        assert!((e.value - exact).abs() < 1e-12);
    }
}
