//! Sine integral `Si(x) = ∫₀ˣ sin(u)/u du`.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

const SERIES_LIMIT: f64 = 2.0;
const EPS: f64 = 1e-16;
const MAX_ITERS: usize = 500;

/// Sine integral, accurate to a few ulps of `π/2` over the whole real line.
///
/// Small arguments use the Maclaurin series; larger ones evaluate `E₁(ix)`
/// by its continued fraction (modified Lentz), which converges for every
/// `|x| ≥ 2` without the accuracy floor of the asymptotic expansion.
pub fn si(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let ax = x.abs();
    let value = if ax < SERIES_LIMIT { si_series(ax) } else { si_continued_fraction(ax) };
    value.copysign(x)
}

fn si_series(x: f64) -> f64 {
    // Si(x) = Σ (-1)^n x^{2n+1} / ((2n+1)(2n+1)!)
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0usize;
    loop {
        n += 1;
        let k = (2 * n) as f64;
        term *= -x2 / (k * (k + 1.0));
        let add = term / (k + 1.0);
        sum += add;
        if add.abs() < EPS * sum.abs() || n > MAX_ITERS {
            break;
        }
    }
    sum
}

fn si_continued_fraction(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = Complex64::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 2..MAX_ITERS {
        let a = -(((i - 1) * (i - 1)) as f64);
        b += Complex64::new(2.0, 0.0);
        d = Complex64::new(1.0, 0.0) / (d * a + b);
        c = b + Complex64::new(a, 0.0) / c;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < EPS {
            break;
        }
    }
    h *= Complex64::new(x.cos(), -x.sin());
    FRAC_PI_2 + h.im
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        // Abramowitz & Stegun table 5.1
        assert!((si(1.0) - 0.946_083_070_367_183).abs() < 1e-14);
        assert!((si(2.0) - 1.605_412_976_802_695).abs() < 1e-14);
        assert!((si(5.0) - 1.549_931_244_944_674).abs() < 1e-14);
        assert!((si(10.0) - 1.658_347_594_218_874).abs() < 1e-14);
        assert!((si(-3.0) + 1.848_652_527_999_468).abs() < 1e-14);
    }

    #[test]
    fn continuity_at_branch_point() {
        let lo = si_series(2.0);
        let hi = si_continued_fraction(2.0);
        assert!((lo - hi).abs() < 1e-14, "{lo} vs {hi}");
    }

    #[test]
    fn tends_to_half_pi() {
        assert!((si(1e6) - FRAC_PI_2).abs() < 1e-5);
    }
}
