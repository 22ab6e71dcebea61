//! Independent numerical oracles shared by the integration tests.
//!
//! Nothing here calls into the library's special functions or derivative
//! code: quadrature is adaptive Gauss-Kronrod (7/15) and derivatives are
//! Richardson-extrapolated central differences.
#![allow(dead_code)]

pub mod fixtures;
pub mod reference;

use std::path::PathBuf;

// Kronrod 15-point abscissae (positive half) and weights, with the embedded
// 7-point Gauss weights on the odd-indexed nodes.
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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// ∫ₐᵇ f by adaptive bisection until the Kronrod/Gauss difference of every
/// piece is below its share of `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut stack = vec![(a, b, tol, 0u32)];
    let mut total = 0.0;
    while let Some((lo, hi, tol, depth)) = stack.pop() {
        let (v, err) = gk15(&f, lo, hi);
        if err <= tol.max(1e-300) || depth >= 48 {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * tol, depth + 1));
            stack.push((mid, hi, 0.5 * tol, depth + 1));
        }
    }
    total
}

/// ∫₀^∞ f via t = u/(1 − u).
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, tol: f64) -> f64 {
    integrate(
        |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - u;
            let v = f(u / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// f'(x) by Richardson extrapolation of central differences (Ridders'
/// tableau). Returns the estimate and its error indicator.
pub fn richardson<F: Fn(f64) -> f64>(f: F, x: f64, h0: f64) -> (f64, f64) {
    const N: usize = 10;
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    let mut a = [[0.0f64; N]; N];
    let mut h = h0;
    a[0][0] = (f(x + h) - f(x - h)) / (2.0 * h);
    let mut best = a[0][0];
    let mut err = f64::INFINITY;
    for i in 1..N {
        h /= CON;
        a[0][i] = (f(x + h) - f(x - h)) / (2.0 * h);
        let mut fac = CON2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let e = (a[j][i] - a[j - 1][i])
                .abs()
                .max((a[j][i] - a[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    (best, err)
}

/// Gradient of a multivariate function by coordinate-wise Richardson.
pub fn richardson_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let g = |v: f64| {
                let mut y = x.to_vec();
                y[i] = v;
                f(&y)
            };
            richardson(g, x[i], 0.1 * x[i].abs().max(1.0)).0
        })
        .collect()
}

/// Path of the colon export when COLON_CSV names an existing file.
pub fn colon_csv() -> Option<PathBuf> {
    let p = PathBuf::from(std::env::var_os("COLON_CSV")?);
    p.is_file().then_some(p)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}
