//! Special functions and constants used across the crate.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use crate::exec::{self, Execution};

/// Euler–Mascheroni constant (20 significant digits).
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;

/// Catalan's constant (20 significant digits).
pub const CATALAN: f64 = 0.915_965_594_177_219_015_05;

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Exponential integral E1(x) = ∫_x^∞ e^{-t}/t dt for x > 0.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires x > 0, got {x}");
    if x > 700.0 {
        return 0.0;
    }
    if x <= 1.0 {
        // -γ - ln x - Σ (-x)^k / (k k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // Modified Lentz on the continued fraction e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...))).
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Returns `(J_nu(x), J_{nu+1}(x))` by Miller's backward recurrence normalised
/// with `J_0 + 2 Σ J_{2k} = 1`. Accurate to a few ulps of max |J| for all x > 0.
pub fn bessel_j_pair(nu: usize, x: f64) -> (f64, f64) {
    assert!(x > 0.0);
    let m = nu.max(x.ceil() as usize);
    let mut start = m + 25 + (6.0 * (m as f64).sqrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let two_over_x = 2.0 / x;
    let mut j_next = 0.0f64; // J_{k+1}
    let mut j = 1e-30f64; // J_k, k = start
    let mut sum = 0.0f64;
    let mut j_nu = 0.0f64;
    let mut j_nu1 = 0.0f64;
    if start == nu + 1 {
        j_nu1 = j;
    }
    for k in (1..=start).rev() {
        let j_prev = (k as f64) * two_over_x * j - j_next;
        j_next = j;
        j = j_prev;
        let idx = k - 1;
        if idx == nu + 1 {
            j_nu1 = j;
        } else if idx == nu {
            j_nu = j;
        }
        if idx % 2 == 0 && idx > 0 {
            sum += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            j_next *= 1e-250;
            sum *= 1e-250;
            j_nu *= 1e-250;
            j_nu1 *= 1e-250;
        }
    }
    sum += j;
    (j_nu / sum, j_nu1 / sum)
}

pub fn bessel_j(nu: usize, x: f64) -> f64 {
    bessel_j_pair(nu, x).0
}

fn mcmahon_guess(nu: usize, k: usize) -> f64 {
    let beta = (k as f64 + nu as f64 / 2.0 - 0.25) * PI;
    let mu = 4.0 * (nu as f64).powi(2);
    let b8 = 8.0 * beta;
    beta - (mu - 1.0) / b8 - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * b8.powi(3))
}

/// Positive zeros of `J_nu` in `(0, x_max]`, ascending.
///
/// Zeros of `J_nu` are separated by more than `0.9π` for every integer order
/// (Sturm comparison on `√x J_nu`), so a scan with that step brackets each zero
/// exactly once. Each bracket is refined by Newton started from McMahon's
/// asymptotic guess, falling back to bisection whenever a step leaves the bracket.
pub fn bessel_zeros(nu: usize, x_max: f64) -> Vec<f64> {
    let step = 0.9 * PI;
    let mut zeros = Vec::new();
    let mut a = if nu == 0 { 0.5 } else { nu as f64 };
    if a > x_max {
        return zeros;
    }
    let mut fa = bessel_j(nu, a);
    while a < x_max {
        let b = a + step;
        let fb = bessel_j(nu, b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            let z = refine_zero(nu, a, b, fa, zeros.len() + 1);
            if z <= x_max {
                zeros.push(z);
            } else {
                break;
            }
        }
        a = b;
        fa = fb;
    }
    zeros
}

fn refine_zero(nu: usize, mut lo: f64, mut hi: f64, f_lo: f64, k: usize) -> f64 {
    let sign_lo = f_lo.signum();
    let guess = mcmahon_guess(nu, k);
    let mut x = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    for _ in 0..100 {
        let (j, j1) = bessel_j_pair(nu, x);
        if j == 0.0 {
            return x;
        }
        if j.signum() == sign_lo {
            lo = x;
        } else {
            hi = x;
        }
        let deriv = nu as f64 / x * j - j1;
        let mut next = x - j / deriv;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4e-16 * x || hi - lo <= 4e-16 * x {
            return next;
        }
        x = next;
    }
    x
}

/// Zeros `j_{nu,k} <= x_max` for every order `nu`.
#[derive(Debug, Clone)]
pub struct BesselZeroTable {
    pub x_max: f64,
    pub per_order: Vec<Vec<f64>>,
}

impl BesselZeroTable {
    pub fn compute(x_max: f64, mode: Execution) -> Self {
        let orders = x_max.floor() as usize + 1;
        let per_order = exec::map_range(mode, orders, |nu| bessel_zeros(nu, x_max));
        let mut per_order = per_order;
        while per_order.last().is_some_and(|z| z.is_empty()) {
            per_order.pop();
        }
        BesselZeroTable { x_max, per_order }
    }

    pub fn count(&self) -> usize {
        self.per_order.iter().map(Vec::len).sum()
    }
}

static ZERO_CACHE: Mutex<Option<Arc<BesselZeroTable>>> = Mutex::new(None);

/// Process-wide cached table covering at least `x_max`.
pub fn bessel_zero_table(x_max: f64) -> Arc<BesselZeroTable> {
    let mut guard = ZERO_CACHE.lock().unwrap_or_else(|p| p.into_inner());
    if let Some(t) = guard.as_ref() {
        if t.x_max >= x_max {
            return Arc::clone(t);
        }
    }
    // Grow geometrically so a sweep of slowly increasing cutoffs does not recompute every time.
    let target = guard.as_ref().map_or(x_max, |t| x_max.max(1.5 * t.x_max));
    let table = Arc::new(BesselZeroTable::compute(target, exec::default_mode()));
    *guard = Some(Arc::clone(&table));
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j0_series(x: f64) -> f64 {
        let q = -x * x / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..80 {
            term *= q / (k * k) as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn e1_matches_reference_values() {
        // Abramowitz & Stegun table 5.1.
        assert!((exp_integral_e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-15);
        assert!((exp_integral_e1(0.1) - 1.822_923_958_419_390_7).abs() < 1e-14);
        assert!((exp_integral_e1(5.0) - 0.001_148_295_591_275_325_8).abs() < 1e-17);
    }

    #[test]
    fn miller_matches_series_for_small_argument() {
        for &x in &[0.3, 1.0, 2.4, 5.0] {
            assert!((bessel_j(0, x) - j0_series(x)).abs() < 1e-14, "x = {x}");
        }
    }

    #[test]
    fn miller_reference_values() {
        assert!((bessel_j(0, 9.0) + 0.090_333_611_182_875_92).abs() < 1e-15);
        assert!((bessel_j(5, 30.0) + 0.143_240_295_512_077_06).abs() < 1e-14);
        assert!((bessel_j(100, 700.0) + 0.026_762_563_310_598_113).abs() < 1e-14);
        let deep = bessel_j(300, 250.0);
        assert!((deep / 2.646_448_499_976_195_5e-11 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn first_zero_of_j0_matches_bisection_on_series() {
        let (mut lo, mut hi) = (2.0, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if j0_series(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z = bessel_zeros(0, 3.0);
        assert_eq!(z.len(), 1);
        assert!((z[0] - lo).abs() < 1e-14);
    }

    #[test]
    fn known_zeros() {
        let z1 = bessel_zeros(1, 11.0);
        assert!((z1[0] - 3.831_705_970_207_512).abs() < 1e-13);
        assert!((z1[2] - 10.173_468_135_062_722).abs() < 1e-13);
        let z10 = bessel_zeros(10, 15.0);
        assert!((z10[0] - 14.475_500_686_554_541).abs() < 1e-12);
    }

    #[test]
    fn zeros_interlace() {
        let t = BesselZeroTable::compute(60.0, Execution::Sequential);
        for nu in 1..t.per_order.len() {
            let prev = &t.per_order[nu - 1];
            for (k, z) in t.per_order[nu].iter().enumerate() {
                assert!(prev[k] < *z);
                if k + 1 < prev.len() {
                    assert!(*z < prev[k + 1]);
                }
                assert!(bessel_j(nu, *z).abs() < 1e-13);
            }
        }
    }
}
