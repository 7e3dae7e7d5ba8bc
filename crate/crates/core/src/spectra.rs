//! Eigenvalues of dense non-Hermitian complex matrices.
//!
//! The pipeline is diagonal balancing, Householder reduction to upper
//! Hessenberg form and implicitly shifted single-shift QR sweeps with
//! Givens rotations. Eigenvalues are certified afterwards by inverse
//! iteration on a Hessenberg form of the *unbalanced* input, so the reported
//! residual refers to the matrix the caller passed in.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{vec_norm, CMatrix};
use crate::scalar::{Complex, Real};
use crate::ensembles::SpectralSample;

/// Eigenvalues of one matrix together with their certification residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult<T> {
    pub eigenvalues: Vec<Complex<T>>,
    /// Largest `||(A - λI)v|| / ||A||_F` over the reported eigenvalues.
    pub max_residual: T,
    /// Total number of QR sweeps.
    pub iterations: usize,
}

/// Sweeps allowed per unit of dimension before the solver gives up.
pub const SWEEPS_PER_DIM: usize = 30;

/// All eigenvalues of `matrix`, repeated with algebraic multiplicity.
pub fn spectrum<T: Real>(matrix: &CMatrix<T>) -> Result<SpectrumResult<T>> {
    let n = check_square(matrix)?;
    let mut h = matrix.clone();
    balance(&mut h);
    reduce_to_hessenberg(&mut h);
    let (eigenvalues, iterations) = hessenberg_qr(&mut h)?;
    debug_assert_eq!(eigenvalues.len(), n);
    let mut result = SpectrumResult {
        eigenvalues,
        max_residual: T::zero(),
        iterations,
    };
    result.max_residual = certify_spectrum(matrix, &result)?;
    Ok(result)
}

/// Maximum over the reported eigenvalues of `||(A - λI)v|| / ||A||_F`, where
/// `v` comes from two steps of inverse iteration on a Hessenberg form of `A`.
///
/// Since `v` is a unit vector the value is never below
/// `σ_min(A - λI) / ||A||_F`, so a wrong eigenvalue cannot hide.
pub fn certify_spectrum<T: Real>(matrix: &CMatrix<T>, result: &SpectrumResult<T>) -> Result<T> {
    let n = check_square(matrix)?;
    if result.eigenvalues.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: result.eigenvalues.len(),
        });
    }
    let mut h = matrix.clone();
    reduce_to_hessenberg(&mut h);
    let norm = h.frobenius_norm();
    if norm == T::zero() {
        // zero matrix: every eigenvalue must be zero
        let worst = result
            .eigenvalues
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), T::max);
        return Ok(worst);
    }
    Ok(result
        .eigenvalues
        .iter()
        .map(|&lambda| inverse_iteration_residual(&h, lambda, norm))
        .fold(T::zero(), T::max))
}

/// `max_j |λ_j|`.
pub fn spectral_radius<T: Real>(sample: &SpectralSample<T>) -> T {
    sample.points.iter().map(|z| z.norm()).fold(T::zero(), T::max)
}

fn check_square<T: Real>(matrix: &CMatrix<T>) -> Result<usize> {
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch {
            expected: matrix.rows(),
            got: matrix.cols(),
        });
    }
    if matrix.rows() == 0 {
        return Err(Error::EmptyDimension);
    }
    if !matrix.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(matrix.rows())
}

#[inline]
fn abs1<T: Real>(z: Complex<T>) -> T {
    z.re.abs() + z.im.abs()
}

/// Diagonal similarity by powers of two that equalizes row and column norms.
pub(crate) fn balance<T: Real>(a: &mut CMatrix<T>) {
    let n = a.rows();
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut converged = false;
    let mut rounds = 0;
    while !converged && rounds < 100 {
        converged = true;
        rounds += 1;
        for i in 0..n {
            let mut c = T::zero();
            let mut r = T::zero();
            for j in 0..n {
                if j != i {
                    c += abs1(a[(j, i)]);
                    r += abs1(a[(i, j)]);
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < T::lit(0.95) * s {
                converged = false;
                let inv = T::one() / f;
                for j in 0..n {
                    a[(i, j)] *= inv;
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// In-place unitary similarity `A <- Q^H A Q` producing upper Hessenberg form.
pub(crate) fn reduce_to_hessenberg<T: Real>(a: &mut CMatrix<T>) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    let mut v = vec![Complex::<T>::zero(); n];
    for k in 0..n - 2 {
        // Householder reflector for x = a[k+1.., k]
        let alpha = a[(k + 1, k)];
        let tail: Vec<Complex<T>> = (k + 2..n).map(|i| a[(i, k)]).collect();
        let xnorm = vec_norm(&tail);
        if xnorm == T::zero() && alpha.im == T::zero() {
            continue;
        }
        let full = alpha.re.hypot(alpha.im).hypot(xnorm);
        let beta = if alpha.re >= T::zero() { -full } else { full };
        let tau = Complex::new((beta - alpha.re) / beta, -alpha.im / beta);
        let denom = alpha - Complex::new(beta, T::zero());
        v[k + 1] = Complex::new(T::one(), T::zero());
        for (i, x) in (k + 2..n).zip(&tail) {
            v[i] = x / denom;
        }
        // left: (I - conj(tau) v v^H) applied to columns k+1..n
        let tau_c = tau.conj();
        for j in k + 1..n {
            let mut w: Complex<T> = Complex::zero();
            for i in k + 1..n {
                w += v[i].conj() * a[(i, j)];
            }
            let w = w * tau_c;
            for i in k + 1..n {
                a[(i, j)] -= v[i] * w;
            }
        }
        a[(k + 1, k)] = Complex::new(beta, T::zero());
        for i in k + 2..n {
            a[(i, k)] = Complex::zero();
        }
        // right: (I - tau v v^H) applied to every row
        for i in 0..n {
            let mut w: Complex<T> = Complex::zero();
            for l in k + 1..n {
                w += a[(i, l)] * v[l];
            }
            let w = w * tau;
            for l in k + 1..n {
                a[(i, l)] -= w * v[l].conj();
            }
        }
    }
}

/// Complex Givens rotation `G = [[c, s], [-conj(s), c]]` with `G [a; b] = [r; 0]`.
#[inline]
fn givens<T: Real>(a: Complex<T>, b: Complex<T>) -> (T, Complex<T>) {
    let na = a.norm();
    let nb = b.norm();
    if nb == T::zero() {
        return (T::one(), Complex::zero());
    }
    if na == T::zero() {
        return (T::zero(), Complex::new(T::one(), T::zero()));
    }
    let nrm = na.hypot(nb);
    let c = na / nrm;
    let s = (a / na) * b.conj() / nrm;
    (c, s)
}

#[inline]
fn rotate_rows<T: Real>(h: &mut CMatrix<T>, p: usize, c: T, s: Complex<T>, cols: std::ops::Range<usize>) {
    let q = p + 1;
    for j in cols {
        let x = h[(p, j)];
        let y = h[(q, j)];
        h[(p, j)] = x * c + s * y;
        h[(q, j)] = y * c - s.conj() * x;
    }
}

#[inline]
fn rotate_cols<T: Real>(h: &mut CMatrix<T>, p: usize, c: T, s: Complex<T>, rows: std::ops::Range<usize>) {
    let q = p + 1;
    for j in rows {
        let x = h[(j, p)];
        let y = h[(j, q)];
        h[(j, p)] = x * c + y * s.conj();
        h[(j, q)] = y * c - x * s;
    }
}

/// Eigenvalue of the trailing 2x2 block `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> Complex<T> {
    let half = T::lit(0.5);
    let x = (a - d) * half;
    let bc = b * c;
    let root = (x * x + bc).sqrt();
    let y1 = x + root;
    let y2 = x - root;
    let y = if y1.norm() >= y2.norm() { y1 } else { y2 };
    if y.norm() == T::zero() {
        d
    } else {
        d - bc / y
    }
}

/// Deterministic pseudo-random unit phase for exceptional shifts.
fn exceptional_phase(counter: u64) -> f64 {
    let mut z = counter.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU
}

/// Single-shift QR on an upper Hessenberg matrix. Returns the eigenvalues
/// and the number of sweeps performed.
pub(crate) fn hessenberg_qr<T: Real>(h: &mut CMatrix<T>) -> Result<(Vec<Complex<T>>, usize)> {
    let n = h.rows();
    let ulp = T::epsilon();
    let safmin = T::min_positive_value();
    let smlnum = safmin * (T::from_usize_lossy(n) / ulp);
    let max_sweeps = SWEEPS_PER_DIM * n.max(1);
    let mut eig = vec![Complex::<T>::zero(); n];
    let mut sweeps = 0usize;
    let mut exceptional_counter = 0u64;

    let mut hi = n as isize - 1;
    while hi >= 0 {
        let i = hi as usize;
        let mut its = 0usize;
        let lo = loop {
            // locate the lowest negligible subdiagonal entry in 0..=i
            let mut l = 0usize;
            let mut k = i;
            while k > 0 {
                let sub = h[(k, k - 1)];
                if abs1(sub) <= smlnum {
                    l = k;
                    break;
                }
                let mut tst = abs1(h[(k - 1, k - 1)]) + abs1(h[(k, k)]);
                if tst == T::zero() {
                    if k >= 2 {
                        tst += h[(k - 1, k - 2)].re.abs();
                    }
                    if k + 1 < n {
                        tst += h[(k + 1, k)].re.abs();
                    }
                }
                if abs1(sub) <= ulp * tst {
                    // Ahues & Tisseur conservative deflation test
                    let up = h[(k - 1, k)];
                    let ab = abs1(sub).max(abs1(up));
                    let ba = abs1(sub).min(abs1(up));
                    let diff = h[(k - 1, k - 1)] - h[(k, k)];
                    let aa = abs1(h[(k, k)]).max(abs1(diff));
                    let bb = abs1(h[(k, k)]).min(abs1(diff));
                    let s = aa + ab;
                    if ba * (ab / s) <= smlnum.max(ulp * (bb * (aa / s))) {
                        l = k;
                        break;
                    }
                }
                k -= 1;
            }
            if l > 0 {
                h[(l, l - 1)] = Complex::zero();
            }
            if l >= i {
                break l;
            }
            if sweeps >= max_sweeps {
                let deflated = eig[i + 1..]
                    .iter()
                    .map(|z| (z.re.to_f64_lossy(), z.im.to_f64_lossy()))
                    .collect();
                return Err(Error::NoConvergence {
                    sweeps,
                    deflated,
                    active: (l, i),
                });
            }
            its += 1;
            sweeps += 1;

            let shift = if its.is_multiple_of(10) {
                // stagnation: random exceptional shift scaled by the subdiagonal
                exceptional_counter += 1;
                let phase = T::lit(exceptional_phase(exceptional_counter));
                let mag = abs1(h[(i, i - 1)]) * T::lit(0.75) + abs1(h[(l + 1, l)]) * T::lit(0.25);
                h[(i, i)] + Complex::new(phase.cos(), phase.sin()) * mag
            } else {
                wilkinson_shift(h[(i - 1, i - 1)], h[(i - 1, i)], h[(i, i - 1)], h[(i, i)])
            };

            // implicit single-shift sweep on the active window l..=i
            let (c, s) = givens(h[(l, l)] - shift, h[(l + 1, l)]);
            rotate_rows(h, l, c, s, l..i + 1);
            rotate_cols(h, l, c, s, l..(l + 3).min(i + 1));
            for k in l + 1..i {
                let (c, s) = givens(h[(k, k - 1)], h[(k + 1, k - 1)]);
                rotate_rows(h, k, c, s, k - 1..i + 1);
                h[(k + 1, k - 1)] = Complex::zero();
                rotate_cols(h, k, c, s, l..(k + 3).min(i + 1));
            }
        };
        let _ = lo;
        eig[i] = h[(i, i)];
        hi -= 1;
        // the trailing eigenvalue split off; continue with the leading block
    }
    Ok((eig, sweeps))
}

/// LU of an upper Hessenberg `H - λI` with adjacent-row partial pivoting.
struct HessenbergLu<T> {
    n: usize,
    /// Row-major upper-triangular factor.
    u: Vec<Complex<T>>,
    mult: Vec<Complex<T>>,
    swapped: Vec<bool>,
}

impl<T: Real> HessenbergLu<T> {
    fn new(h: &CMatrix<T>, lambda: Complex<T>, norm: T) -> Self {
        let n = h.rows();
        let mut u = h.as_slice().to_vec();
        for i in 0..n {
            u[i * n + i] -= lambda;
        }
        let tiny = T::epsilon() * norm;
        let mut mult = vec![Complex::zero(); n];
        let mut swapped = vec![false; n];
        for k in 0..n {
            if k + 1 < n {
                let piv = u[k * n + k];
                let below = u[(k + 1) * n + k];
                if below.norm() > piv.norm() {
                    for j in k..n {
                        u.swap(k * n + j, (k + 1) * n + j);
                    }
                    swapped[k] = true;
                }
            }
            if u[k * n + k].norm() == T::zero() {
                u[k * n + k] = Complex::new(tiny, T::zero());
            }
            if k + 1 < n {
                let m = u[(k + 1) * n + k] / u[k * n + k];
                mult[k] = m;
                u[(k + 1) * n + k] = Complex::zero();
                for j in k + 1..n {
                    let t = u[k * n + j];
                    u[(k + 1) * n + j] -= m * t;
                }
            }
        }
        Self { n, u, mult, swapped }
    }

    fn solve(&self, b: &mut [Complex<T>]) {
        let n = self.n;
        for k in 0..n.saturating_sub(1) {
            if self.swapped[k] {
                b.swap(k, k + 1);
            }
            let t = b[k];
            b[k + 1] -= self.mult[k] * t;
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..n {
                acc -= self.u[i * n + j] * b[j];
            }
            b[i] = acc / self.u[i * n + i];
        }
    }
}

fn normalize<T: Real>(v: &mut [Complex<T>]) -> bool {
    let nrm = vec_norm(v);
    if !(nrm > T::zero()) || !nrm.is_finite() {
        return false;
    }
    for z in v.iter_mut() {
        *z /= nrm;
    }
    true
}

fn inverse_iteration_residual<T: Real>(h: &CMatrix<T>, lambda: Complex<T>, norm: T) -> T {
    let n = h.rows();
    let lu = HessenbergLu::new(h, lambda, norm);
    let mut v = vec![Complex::new(T::one(), T::zero()); n];
    for _ in 0..2 {
        lu.solve(&mut v);
        if !normalize(&mut v) {
            return T::infinity();
        }
    }
    let mut r = h.mul_vec(&v);
    for (ri, vi) in r.iter_mut().zip(&v) {
        *ri -= lambda * vi;
    }
    vec_norm(&r) / norm
}

/// Greedy minimum-distance matching of two multisets; returns the largest
/// matched distance.
pub fn multiset_distance<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    assert_eq!(a.len(), b.len(), "multisets of equal size");
    let mut pairs: Vec<(T, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut worst = T::zero();
    for (d, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            worst = worst.max(d);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn diagonal_spectrum_is_exact() {
        let d = [c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)];
        let res = spectrum(&CMatrix::diagonal(&d)).unwrap();
        assert!(multiset_distance(&res.eigenvalues, &d) <= 1e-12);
        assert!(res.max_residual <= 1e-14);
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let a = CMatrix::from_row_major(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let res = spectrum(&a).unwrap();
        assert!(multiset_distance(&res.eigenvalues, &[c(0.0, 1.0), c(0.0, -1.0)]) < 1e-14);
    }

    #[test]
    fn companion_of_z4_minus_1_gives_roots_of_unity() {
        // companion matrix of z^4 - 1: last row holds the coefficients
        let mut a = CMatrix::<f64>::zeros(4, 4);
        for i in 0..3 {
            a[(i, i + 1)] = c(1.0, 0.0);
        }
        a[(3, 0)] = c(1.0, 0.0);
        let res = spectrum(&a).unwrap();
        let roots = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        assert!(multiset_distance(&res.eigenvalues, &roots) <= 1e-10);
    }

    #[test]
    fn one_by_one_and_zero_matrix() {
        let a = CMatrix::from_row_major(1, 1, vec![c(2.5, -1.0)]);
        let res = spectrum(&a).unwrap();
        assert_eq!(res.eigenvalues, vec![c(2.5, -1.0)]);
        let z = CMatrix::<f64>::zeros(5, 5);
        let res = spectrum(&z).unwrap();
        assert!(res.eigenvalues.iter().all(|e| e.norm() == 0.0));
        assert_eq!(res.max_residual, 0.0);
    }

    #[test]
    fn rejects_empty_and_nonfinite() {
        assert_eq!(spectrum(&CMatrix::<f64>::zeros(0, 0)), Err(Error::EmptyDimension));
        let mut a = CMatrix::<f64>::identity(3);
        a[(1, 2)] = c(f64::NAN, 0.0);
        assert_eq!(spectrum(&a), Err(Error::NonFinite));
    }

    #[test]
    fn jordan_block_converges() {
        // defective matrix: eigenvalue 2 with multiplicity 3
        let mut a = CMatrix::<f64>::identity(3).scale(2.0);
        a[(0, 1)] = c(1.0, 0.0);
        a[(1, 2)] = c(1.0, 0.0);
        let res = spectrum(&a).unwrap();
        for e in &res.eigenvalues {
            assert!((e - c(2.0, 0.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn perturbed_eigenvalue_is_caught() {
        let a = CMatrix::from_row_major(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let mut res = spectrum(&a).unwrap();
        res.eigenvalues[0] += c(0.1, 0.0);
        assert!(certify_spectrum(&a, &res).unwrap() >= 0.05);
    }

    #[test]
    fn single_precision_diagonal() {
        let d = [Complex::new(1.0f32, 0.0), Complex::new(0.0, -2.0)];
        let res = spectrum(&CMatrix::diagonal(&d)).unwrap();
        assert!(multiset_distance(&res.eigenvalues, &d) < 1e-5);
    }
}
