//! Quadrature rules and the exponential integral.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre<T: Real>(order: usize) -> (Vec<T>, Vec<T>) {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z_prev = z;
            z = z_prev - p1 / dp;
            if (z - z_prev).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (
        nodes.into_iter().map(T::lit).collect(),
        weights.into_iter().map(T::lit).collect(),
    )
}

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

/// One 15-point Kronrod panel: (integral, error estimate).
fn kronrod15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = (a + b) * half;
    let radius = (b - a) * half;
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = radius * T::lit(XGK[j]);
        let s = f(center - dx) + f(center + dx);
        kronrod += s * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss += s * T::lit(WG[j / 2]);
        }
    }
    (kronrod * radius, ((kronrod - gauss) * radius).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the total error is
/// below `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, abs_tol: T, rel_tol: T) -> Result<(T, T)> {
    const MAX_PANELS: usize = 2000;
    let (v, e) = kronrod15(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total: T = panels.iter().map(|p| p.2).sum();
        let err: T = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok((total, err));
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::Quadrature {
                tol: abs_tol.max(rel_tol * total.abs()).to_f64_lossy(),
                estimate: total.to_f64_lossy(),
                error: err.to_f64_lossy(),
            });
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = (lo + hi) * T::lit(0.5);
        let (v1, e1) = kronrod15(&f, lo, mid);
        let (v2, e2) = kronrod15(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

/// Adaptive integration over consecutive breakpoints.
pub fn integrate_piecewise<T: Real, F: Fn(T) -> T>(f: F, breaks: &[T], abs_tol: T, rel_tol: T) -> Result<(T, T)> {
    let pieces = breaks.len().saturating_sub(1).max(1);
    let tol = abs_tol / T::from_usize_lossy(pieces);
    let mut total = T::zero();
    let mut err = T::zero();
    for w in breaks.windows(2) {
        let (v, e) = integrate(&f, w[0], w[1], tol, rel_tol)?;
        total += v;
        err += e;
    }
    Ok((total, err))
}

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E_1(x) = Γ(0, x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`.
///
/// Power series below `x = 1`, modified Lentz continued fraction above.
pub fn exp_integral_e1<T: Real>(x: T) -> T {
    if x <= T::zero() {
        return T::nan();
    }
    let eps = T::epsilon();
    if x <= T::one() {
        // E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k k!)
        let mut sum = T::zero();
        let mut term = T::one();
        for k in 1..200 {
            let kf = T::from_usize_lossy(k);
            term = term * (-x) / kf;
            let contrib = term / kf;
            sum += contrib;
            if contrib.abs() < eps * sum.abs() {
                break;
            }
        }
        -T::lit(EULER_GAMMA) - x.ln() - sum
    } else {
        // e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
        let tiny = T::min_positive_value() / eps;
        let mut b = x + T::one();
        let mut c = T::one() / tiny;
        let mut d = T::one() / b;
        let mut h = d;
        for i in 1..500 {
            let fi = T::from_usize_lossy(i);
            let an = -fi * fi;
            b += T::lit(2.0);
            d = T::one() / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - T::one()).abs() < eps {
                break;
            }
        }
        h * (-x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre::<f64>(64);
        let sum_w: f64 = w.iter().sum();
        assert!((sum_w - 2.0).abs() < 1e-13);
        // ∫ x^10 over [-1,1] = 2/11
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((v - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod_handles_smooth_and_kinked_integrands() {
        let (v, _) = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-13, 1e-13).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let (v, _) = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-11);
    }

    #[test]
    fn e1_reference_values() {
        // independent check: E1(x) = ∫_0^1 e^{-x/u}/u du
        for &x in &[0.05f64, 0.25, 0.9, 1.0, 1.1, 3.0, 12.0] {
            let (q, _) = integrate(|u: f64| if u == 0.0 { 0.0 } else { (-x / u).exp() / u }, 0.0, 1.0, 1e-14, 1e-13).unwrap();
            let e1 = exp_integral_e1(x);
            assert!((e1 - q).abs() <= 1e-11 * q.max(1e-300).max(e1), "x={x}: {e1} vs {q}");
        }
        assert!((exp_integral_e1(1.0f64) - 0.219_383_934_395_520_3).abs() < 1e-14);
    }
}
