//! Closed-form Ginibre quantities and logarithmic potentials.
//!
//! Incomplete exponential sums `Σ (nρ²)^k / k!` overflow quickly, so they are
//! carried as logarithms throughout and only exponentiated once combined with
//! the `e^{-nρ²}` weight.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::SpectralSample;
use crate::error::{Error, Result};
use crate::quadrature::{exp_integral_e1, gauss_legendre, integrate_piecewise};
use crate::scalar::{Complex, LogSumExp, Real};

/// Regularisation radius of the cutoff potentials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffParams<T> {
    pub r: T,
    pub kappa: T,
}

impl<T: Real> CutoffParams<T> {
    /// `r = κ/√n`.
    pub fn from_kappa(kappa: T, n: usize) -> Result<Self> {
        if !(kappa > T::zero()) || n == 0 {
            return Err(Error::InvalidParameter(format!("kappa {kappa} with n {n}")));
        }
        let r = kappa / T::from_usize_lossy(n).sqrt();
        Ok(Self { r, kappa })
    }

    /// `r = 1/n`, the choice used for uniform potential concentration.
    pub fn inverse_n(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDimension);
        }
        let nf = T::from_usize_lossy(n);
        Ok(Self { r: nf.recip(), kappa: nf.sqrt().recip() })
    }
}

/// A function tabulated on an increasing radial grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile<T> {
    pub grid: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> RadialProfile<T> {
    pub fn new(grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.first().is_some_and(|&g| g < T::zero()) {
            return Err(Error::InvalidParameter("radial grid must be increasing and nonnegative".into()));
        }
        Ok(Self { grid, values })
    }
}

/// `ln n!`, exact summation for small `n` and Stirling's series beyond.
pub fn ln_factorial<T: Real>(n: usize) -> T {
    if n < 24 {
        return (2..=n).map(|k| T::from_usize_lossy(k).ln()).sum();
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    T::lit(x * x.ln() - x + 0.5 * (std::f64::consts::TAU * x).ln() + series)
}

/// `log Σ_{k<n} x^k/k!` for `x ≥ 0`.
pub fn log_exp_head<T: Real>(n: usize, x: T) -> T {
    let lx = x.ln();
    let mut acc = LogSumExp::new();
    let mut lt = T::zero();
    acc.push(lt);
    for k in 1..n {
        lt = lt + lx - T::from_usize_lossy(k).ln();
        acc.push(lt);
    }
    if n == 0 {
        T::neg_infinity()
    } else {
        acc.value()
    }
}

/// `log Σ_{k≥n} x^k/k!` for `x ≥ 0`.
pub fn log_exp_tail<T: Real>(n: usize, x: T) -> T {
    if n == 0 {
        return x;
    }
    if x == T::zero() {
        return T::neg_infinity();
    }
    let head = log_exp_head(n, x);
    let ratio = head - x;
    if ratio <= -T::LN_2() {
        // the head is at most half of e^x, so the complement is accurate
        return x + (-ratio.exp()).ln_1p();
    }
    let lx = x.ln();
    let mut lt = T::from_usize_lossy(n) * lx - ln_factorial::<T>(n);
    let mut acc = LogSumExp::new();
    let cutoff = T::epsilon().ln() - T::lit(4.0);
    let mut k = n;
    loop {
        acc.push(lt);
        k += 1;
        lt = lt + lx - T::from_usize_lossy(k).ln();
        if T::from_usize_lossy(k) > x && lt - acc.value() < cutoff {
            return acc.value();
        }
    }
}

/// `Σ_{k<n} (nρ²)^k/k!`.
pub fn exp_sum_head<T: Real>(n: usize, rho: T) -> T {
    log_exp_head(n, T::from_usize_lossy(n) * rho * rho).exp()
}

/// `Σ_{k≥n} (nρ²)^k/k!`.
pub fn exp_sum_tail<T: Real>(n: usize, rho: T) -> T {
    log_exp_tail(n, T::from_usize_lossy(n) * rho * rho).exp()
}

/// Logarithm of the bound `ρ^{2n} e^n / √(2πn) · (1+1/n)/(1−ρ²+1/n)` on the
/// tail at `ρ ≤ 1`.
pub fn log_tail_bound<T: Real>(n: usize, rho: T) -> T {
    let nf = T::from_usize_lossy(n);
    let inv = nf.recip();
    let rho2 = rho * rho;
    nf * rho2.ln() + nf - T::lit(0.5) * (T::TAU() * nf).ln() + ((T::one() + inv) / (T::one() - rho2 + inv)).ln()
}

/// Logarithm of the bound `ρ^{2n} e^n / √(2πn) · 1/(ρ²−1+1/n)` on the head at
/// `ρ ≥ 1`.
pub fn log_head_bound<T: Real>(n: usize, rho: T) -> T {
    let nf = T::from_usize_lossy(n);
    let rho2 = rho * rho;
    nf * rho2.ln() + nf - T::lit(0.5) * (T::TAU() * nf).ln() - (rho2 - T::one() + nf.recip()).ln()
}

/// Mean eigenvalue density of `X/√n` for complex Ginibre `X`:
/// `(1/π) e^{-n|z|²} Σ_{k<n} (n|z|²)^k/k!`.
pub fn mean_density<T: Real>(n: usize, z: Complex<T>) -> T {
    let x = T::from_usize_lossy(n) * z.norm_sqr();
    (log_exp_head(n, x) - x).exp() * T::FRAC_1_PI()
}

/// `log |Σ_{k<n} w^k/k!|` for complex `w`.
fn log_abs_exp_head_complex<T: Real>(n: usize, w: Complex<T>) -> T {
    let lw = w.norm().ln();
    let theta = w.arg();
    let mut logs = Vec::with_capacity(n);
    let mut lt = T::zero();
    logs.push(lt);
    for k in 1..n {
        lt = lt + lw - T::from_usize_lossy(k).ln();
        logs.push(lt);
    }
    let m = logs.iter().copied().fold(T::neg_infinity(), T::max);
    let sum = logs.iter().enumerate().fold(Complex::new(T::zero(), T::zero()), |acc, (k, &l)| {
        acc + Complex::from_polar((l - m).exp(), theta * T::from_usize_lossy(k))
    });
    m + sum.norm().ln()
}

/// Joint density of two distinct eigenvalues of `X/√n`, clamped at zero
/// where the two nearly equal products cancel in floating point.
pub fn two_point_density<T: Real>(n: usize, z1: Complex<T>, z2: Complex<T>) -> Result<T> {
    if n < 2 {
        return Err(Error::InvalidParameter("two-point density needs n >= 2".into()));
    }
    let nf = T::from_usize_lossy(n);
    let (x1, x2) = (nf * z1.norm_sqr(), nf * z2.norm_sqr());
    let weight = -(x1 + x2);
    let first = (log_exp_head(n, x1) + log_exp_head(n, x2) + weight).exp();
    let w = z1 * z2.conj() * nf;
    let second = if w.norm() == T::zero() {
        weight.exp()
    } else {
        (T::lit(2.0) * log_abs_exp_head_complex(n, w) + weight).exp()
    };
    let raw = first - second;
    let prefactor = nf / ((nf - T::one()) * T::PI() * T::PI());
    if raw < T::zero() {
        let tol = T::lit(1e-10).max(T::epsilon() * T::lit(1e3));
        debug_assert!(raw >= -tol * first, "two-point density cancellation {raw:?} vs {first:?}");
        return Ok(T::zero());
    }
    Ok(prefactor * raw)
}

/// Radial defect `(μ_∞ − μ̄_n)(B_ρ(0))` for the mean ESD `μ̄_n` of Ginibre.
pub fn radial_defect<T: Real>(n: usize, rho: T) -> T {
    if rho <= T::zero() || n == 0 {
        return T::zero();
    }
    let nf = T::from_usize_lossy(n);
    let rho2 = rho * rho;
    let x = nf * rho2;
    let peak = (nf * x.ln() - ln_factorial::<T>(n) - x).exp();
    if rho2 <= T::one() {
        peak - (T::one() - rho2) * (log_exp_tail(n, x) - x).exp()
    } else {
        peak - (rho2 - T::one()) * (log_exp_head(n, x) - x).exp()
    }
}

/// Mass of `B_ρ(0)` under the mean Ginibre ESD.
pub fn mean_ball_mass<T: Real>(n: usize, rho: T) -> T {
    (rho * rho).min(T::one()) - radial_defect(n, rho)
}

/// Tabulates [`radial_defect`] on a grid.
pub fn radial_defect_profile<T: Real>(n: usize, grid: Vec<T>) -> Result<RadialProfile<T>> {
    let values = grid.iter().map(|&r| radial_defect(n, r)).collect();
    RadialProfile::new(grid, values)
}

/// `W_1(μ̄_n, μ_∞) = ∫_0^∞ D̄_n(ρ) dρ`.
///
/// Adaptive Gauss–Kronrod on `[0, 1 + 10/√n]`; beyond that the integrand is
/// below `e^{-n(ρ²−1−log ρ²)}/√(2πn)`, whose integral is added to the error.
pub fn mean_esd_w1<T: Real>(n: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::EmptyDimension);
    }
    let nf = T::from_usize_lossy(n);
    let width = T::lit(10.0) / nf.sqrt();
    let upper = T::one() + width;
    let mut breaks = vec![T::zero()];
    if T::one() - width > T::zero() {
        breaks.push(T::one() - width);
    }
    breaks.push(T::one());
    breaks.push(upper);
    let scale = nf.recip();
    let (value, _) = integrate_piecewise(|r| radial_defect(n, r), &breaks, T::lit(1e-13) * scale, T::lit(1e-10))?;
    let tail = mean_esd_tail_bound(n, upper);
    if tail > T::lit(1e-12) * value {
        return Err(Error::Quadrature {
            tol: 1e-12,
            estimate: value.to_f64_lossy(),
            error: tail.to_f64_lossy(),
        });
    }
    Ok(value)
}

/// Upper bound on `∫_a^∞ D̄_n` from the uniform Stirling bound, `a ≥ 1`.
pub fn mean_esd_tail_bound<T: Real>(n: usize, a: T) -> T {
    // g(ρ) = ρ² − 1 − log ρ² is convex with g'(a) = 2a − 2/a, so
    // ∫_a^∞ e^{-n g} ≤ e^{-n g(a)} / (n g'(a)).
    let nf = T::from_usize_lossy(n);
    let a2 = a * a;
    let g = a2 - T::one() - a2.ln();
    let slope = T::lit(2.0) * (a - a.recip());
    (-nf * g).exp() / ((T::TAU() * nf).sqrt() * nf * slope)
}

/// Logarithmic potential of the circular law.
pub fn u_infinity<T: Real>(z: Complex<T>) -> T {
    let m2 = z.norm_sqr();
    if m2 > T::one() {
        -T::lit(0.5) * m2.ln()
    } else {
        (T::one() - m2) * T::lit(0.5)
    }
}

/// `U_n(z) = −(1/n) Σ_j log|λ_j − z|`; `+∞` on the spectrum.
pub fn u_empirical<T: Real>(sample: &SpectralSample<T>, z: Complex<T>) -> T {
    let n = T::from_usize_lossy(sample.len());
    let mut s = T::zero();
    for &p in &sample.points {
        let d = (p - z).norm();
        if d == T::zero() {
            return T::infinity();
        }
        s += d.ln();
    }
    -s / n
}

/// Cutoff potential `−(1/n) Σ_j log max(r, |z − λ_j|)`.
pub fn u_cutoff<T: Real>(sample: &SpectralSample<T>, r: T, z: Complex<T>) -> T {
    let n = T::from_usize_lossy(sample.len());
    let r2 = r * r;
    -T::lit(0.5) * log_product_of_squares(&sample.points, r2, z) / n
}

/// `Σ_j log max(r², |z − λ_j|²)`, taking one logarithm per batch of products.
fn log_product_of_squares<T: Real>(points: &[Complex<T>], r2: T, z: Complex<T>) -> T {
    // f64 can hold a product of 16 factors in [1e-12, 1e12]; f32 only two
    let batch = if T::max_value().to_f64_lossy() > 1e300 { 16 } else { 2 };
    let mut total = T::zero();
    for chunk in points.chunks(batch) {
        let mut prod = T::one();
        for &p in chunk {
            let d = p - z;
            prod *= (d.re * d.re + d.im * d.im).max(r2);
        }
        if prod.is_normal() {
            total += prod.ln();
        } else {
            for &p in chunk {
                let d = p - z;
                total += (d.re * d.re + d.im * d.im).max(r2).ln();
            }
        }
    }
    total
}

/// Grid maximum of `|U_n^r − U_∞|` over the nodes of a square lattice with
/// spacing `grid_step` that lie in `B_{4R}(0)`.
pub fn potential_gap<T: Real>(sample: &SpectralSample<T>, r: T, grid_step: T, big_r: T) -> Result<T> {
    if !(r > T::zero()) || !(grid_step > T::zero()) || !(big_r > T::one()) {
        return Err(Error::InvalidParameter(format!("potential gap with r={r}, step={grid_step}, R={big_r}")));
    }
    if grid_step > r {
        return Err(Error::InvalidParameter("grid step must not exceed r".into()));
    }
    if sample.is_empty() {
        return Err(Error::EmptyDimension);
    }
    let radius = T::lit(4.0) * big_r;
    let half = (radius / grid_step).floor().to_usize().expect("finite grid");
    let n = T::from_usize_lossy(sample.len());
    let r2 = r * r;
    let rows: Vec<isize> = (-(half as isize)..=half as isize).collect();
    let gap = rows
        .par_iter()
        .map(|&i| {
            let y = T::from_isize(i).expect("grid index") * grid_step;
            let span2 = radius * radius - y * y;
            if span2 < T::zero() {
                return T::zero();
            }
            let jmax = (span2.sqrt() / grid_step).floor().to_isize().expect("grid index");
            let mut worst = T::zero();
            for j in -jmax..=jmax {
                let z = Complex::new(T::from_isize(j).expect("grid index") * grid_step, y);
                let u = -T::lit(0.5) * log_product_of_squares(&sample.points, r2, z) / n;
                worst = worst.max((u - u_infinity(z)).abs());
            }
            worst
        })
        .reduce(|| T::zero(), T::max);
    Ok(gap)
}

/// Twice circle-averaged logarithmic kernel `k_{2r}(w)`.
///
/// The single average is `−log max(r, |v|)`; the second is evaluated with
/// Gauss–Legendre nodes on the arc where `|w + r e^{iθ}| > r`, the rest of the
/// circle contributing the constant `−log r`. For `|w| ≥ 2r` the mean value
/// property gives `−log|w|` exactly.
#[derive(Clone, Debug)]
pub struct DoubleCutoffKernel<T> {
    r: T,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> DoubleCutoffKernel<T> {
    pub const ORDER: usize = 64;

    pub fn new(r: T) -> Self {
        let (nodes, weights) = gauss_legendre(Self::ORDER);
        Self { r, nodes, weights }
    }

    pub fn r(&self) -> T {
        self.r
    }

    /// Kernel value at `|w| = m`, always via the angular rule.
    pub fn eval_quadrature(&self, m: T) -> T {
        let r = self.r;
        let two = T::lit(2.0);
        if m == T::zero() {
            return -r.ln();
        }
        // |w + r e^{iφ}| > r  <=>  cos φ > −m/(2r)
        let c = -m / (two * r);
        let phi0 = if c <= -T::one() { T::PI() } else { c.acos() };
        let half = phi0 * T::lit(0.5);
        let mut outside = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let phi = half * (*x + T::one());
            let d2 = m * m + r * r + two * r * m * phi.cos();
            outside += *w * (-T::lit(0.5) * d2.max(r * r).ln());
        }
        outside *= half;
        let inside_len = T::PI() - phi0;
        (outside - inside_len * r.ln()) / T::PI()
    }

    pub fn eval(&self, w: Complex<T>) -> T {
        let m = w.norm();
        if m >= T::lit(2.0) * self.r {
            -m.ln()
        } else {
            self.eval_quadrature(m)
        }
    }
}

/// Pair-energy statistic
/// `(1/n²) Σ_{j,k} k_{2r}(λ_j − λ_k) − (1/n²) Σ_{j,k} k_{2r}(λ_j − λ'_k)`
/// with `r = κ/√n`, for two independent samples of the same size.
pub fn pair_energy<T: Real>(a: &SpectralSample<T>, b: &SpectralSample<T>, kappa: T) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if a.is_empty() {
        return Err(Error::EmptyDimension);
    }
    let n = a.len();
    let kernel = DoubleCutoffKernel::new(CutoffParams::from_kappa(kappa, n)?.r);
    let (self_sum, cross_sum) = a
        .points
        .par_iter()
        .map(|&p| {
            let s: T = a.points.iter().map(|&q| kernel.eval(p - q)).sum();
            let c: T = b.points.iter().map(|&q| kernel.eval(p - q)).sum();
            (s, c)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((T::zero(), T::zero()), |x, y| (x.0 + y.0, x.1 + y.1));
    let n2 = T::from_usize_lossy(n * n);
    Ok((self_sum - cross_sum) / n2)
}

/// Leading constant `(Γ(0, 4κ²) + log 4)/2` of `n · E[pair_energy]`.
pub fn pair_energy_constant<T: Real>(kappa: T) -> T {
    (exp_integral_e1(T::lit(4.0) * kappa * kappa) + T::lit(4.0).ln()) * T::lit(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_matches_summation() {
        for n in [0usize, 1, 5, 23, 24, 25, 100, 1000] {
            let direct: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
            assert!((ln_factorial::<f64>(n) - direct).abs() <= 1e-12 * direct.max(1.0), "n={n}");
        }
    }

    #[test]
    fn head_and_tail_at_zero() {
        assert_eq!(exp_sum_head(5, 0.0f64), 1.0);
        assert_eq!(exp_sum_tail(5, 0.0f64), 0.0);
    }

    #[test]
    fn kernel_closed_forms() {
        let k = DoubleCutoffKernel::new(0.1f64);
        assert!((k.eval(Complex::new(0.0, 0.0)) + 0.1f64.ln()).abs() < 1e-15);
        assert!((k.eval_quadrature(0.2) + 0.2f64.ln()).abs() < 1e-10);
        assert!((k.eval_quadrature(0.35) + 0.35f64.ln()).abs() < 1e-10);
    }
}
