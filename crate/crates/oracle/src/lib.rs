//! Reference computations for tests.
//!
//! Everything here is deliberately naive and shares no code with the main
//! crate: adaptive Gauss–Kronrod quadrature, compensated summation and
//! triple-loop matrix products.

use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || depth == 0 || (b - a).abs() < 1e-14 {
        return value;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive 7/15-point Gauss–Kronrod integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate(f, b, a, tol);
    }
    adapt(&f, a, b, tol, 40)
}

/// Complex-valued variant of [`integrate`], integrating both parts separately.
pub fn integrate_complex<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: f64) -> Complex64 {
    let re = integrate(|t| f(t).re, a, b, tol);
    let im = integrate(|t| f(t).im, a, b, tol);
    Complex64::new(re, im)
}

/// Neumaier compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn compensated_sum_complex<I: IntoIterator<Item = Complex64>>(values: I) -> Complex64 {
    let items: Vec<Complex64> = values.into_iter().collect();
    Complex64::new(
        compensated_sum(items.iter().map(|z| z.re)),
        compensated_sum(items.iter().map(|z| z.im)),
    )
}

/// `e^{jθ}` with the angle reduced modulo 2π in extended steps before evaluation.
pub fn cis_reduced(theta: f64) -> Complex64 {
    let two_pi = std::f64::consts::TAU;
    let r = theta - two_pi * (theta / two_pi).round();
    Complex64::new(r.cos(), r.sin())
}

/// Row-major dense complex matrix product, `a` is `n × m`, `b` is `m × p`.
pub fn matmul(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let n = a.len();
    let p = if b.is_empty() { 0 } else { b[0].len() };
    let mut out = vec![vec![Complex64::new(0.0, 0.0); p]; n];
    for i in 0..n {
        for j in 0..p {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, brow) in b.iter().enumerate() {
                acc += a[i][k] * brow[j];
            }
            out[i][j] = acc;
        }
    }
    out
}
