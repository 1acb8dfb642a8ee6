//! Adaptive Gauss-Kronrod (7, 15) quadrature.

use crate::error::{Error, Result};

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
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: usize = 40;

/// Kronrod estimate on [a, b] and its difference to the embedded Gauss rule.
pub fn gk15<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx)? + f(c + dx)?;
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Ok((k * h, ((k - g) * h).abs()))
}

/// Integral and error estimate; panels never exceed `max_panel` and are bisected until
/// each meets its share of the absolute tolerance.
pub fn integrate<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_panel: f64,
) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let len = (b - a).abs();
    let n = (len / max_panel).ceil().max(1.0) as usize;
    let width = (b - a) / n as f64;
    let mut total = 0.0;
    let mut err = 0.0;
    for i in 0..n {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n { b } else { lo + width };
        let (v, e) = adapt(&mut f, lo, hi, tol * (hi - lo).abs() / len, 0)?;
        total += v;
        err += e;
    }
    Ok((total, err))
}

fn adapt<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64, tol: f64, depth: usize) -> Result<(f64, f64)> {
    let (v, e) = gk15(f, a, b)?;
    if e <= tol {
        return Ok((v, e));
    }
    if depth >= MAX_DEPTH {
        return Err(Error::NoConvergence(format!("quadrature on [{a}, {b}] stalled at error {e:.3e}")));
    }
    let m = 0.5 * (a + b);
    let (v1, e1) = adapt(f, a, m, 0.5 * tol, depth + 1)?;
    let (v2, e2) = adapt(f, m, b, 0.5 * tol, depth + 1)?;
    Ok((v1 + v2, e1 + e2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_constants() {
        let (v, _) = gk15(&mut |_| Ok(1.0), -1.0, 1.0).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        let g: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exact_for_high_degree() {
        let (v, _) = gk15(&mut |x: f64| Ok(x.powi(20)), 0.0, 1.0).unwrap();
        assert!((v - 1.0 / 21.0).abs() < 1e-14);
    }

    #[test]
    fn oscillatory_integrand() {
        let (v, e) = integrate(|t: f64| Ok((3.0 * t).cos() * (-0.1 * t).exp()), 0.0, 40.0, 1e-12, 0.5).unwrap();
        let exact = {
            let (a, w) = (-0.1f64, 3.0f64);
            let f = |t: f64| (a * t).exp() * (a * (w * t).cos() + w * (w * t).sin()) / (a * a + w * w);
            f(40.0) - f(0.0)
        };
        assert!((v - exact).abs() < 1e-12);
        assert!(e < 1e-12);
    }

    #[test]
    fn reversed_limits_change_sign() {
        let (v, _) = integrate(|t: f64| Ok(t.exp()), 1.0, 0.0, 1e-12, 0.5).unwrap();
        assert!((v + (1f64.exp() - 1.0)).abs() < 1e-13);
    }
}
