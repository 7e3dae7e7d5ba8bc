//! Dyadic multiscale distances, Kolmogorov discrepancies and exact areas of
//! rectangles intersected with the unit disk.
//!
//! Squares are half-open, `(a, a + h] × (b, b + h]`, so every point of
//! `K_0 = (−1, 1]²` lies in exactly one square of each level.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ensembles::SpectralSample;
use crate::error::{Error, Result};
use crate::scalar::{Complex, Real};

/// Default finest dyadic level evaluated explicitly.
pub const DEFAULT_LEVEL: u32 = 12;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x0: T,
    pub x1: T,
    pub y0: T,
    pub y1: T,
}

impl<T: Real> Rect<T> {
    pub fn new(x0: T, x1: T, y0: T, y1: T) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> T {
        (self.x1 - self.x0).max(T::zero()) * (self.y1 - self.y0).max(T::zero())
    }
}

/// A square of the dyadic partition of ring `k` at level `l`, indexed by its
/// column `i` and row `j` after rescaling the ring into `K_0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicSquare {
    pub level: u32,
    pub i: u64,
    pub j: u64,
    pub k: u32,
}

impl DyadicSquare {
    /// Bounds in the original coordinates.
    pub fn rect<T: Real>(&self) -> Rect<T> {
        let scale = T::lit(2f64.powi(self.k as i32));
        let h = T::lit(2f64.powi(1 - self.level as i32));
        let x0 = -T::one() + T::lit(self.i as f64) * h;
        let y0 = -T::one() + T::lit(self.j as f64) * h;
        Rect::new(x0 * scale, (x0 + h) * scale, y0 * scale, (y0 + h) * scale)
    }
}

/// Multiscale discrepancy between a sample and a reference measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport<T> {
    pub d_tilde_p: T,
    pub d_p: T,
    pub w_p_upper: T,
    pub p: T,
    pub truncation_level: u32,
}

/// Scanned box discrepancy: a lower bound on the supremum over boxes, with
/// the bound `resolution_gap` on how much any box can exceed it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDiscrepancy<T> {
    pub value: T,
    pub resolution_gap: T,
    pub best_box: Rect<T>,
}

/// `∫_0^x √(1 − t²) dt` for `|x| ≤ 1`.
fn segment_primitive<T: Real>(x: T) -> T {
    (x * (T::one() - x * x).max(T::zero()).sqrt() + x.asin()) * T::lit(0.5)
}

/// Area of `[0, a] × [0, b] ∩ B_1(0)` for `a, b ≥ 0`.
fn quadrant_area<T: Real>(a: T, b: T) -> T {
    let a = a.min(T::one());
    let b = b.min(T::one());
    if a * a + b * b <= T::one() {
        return a * b;
    }
    let c = (T::one() - b * b).max(T::zero()).sqrt();
    c * b + segment_primitive(a) - segment_primitive(c)
}

/// Signed area of the rectangle between the origin and `(x, y)` inside the disk.
fn signed_quadrant_area<T: Real>(x: T, y: T) -> T {
    let s = x.signum() * y.signum();
    if x == T::zero() || y == T::zero() {
        return T::zero();
    }
    s * quadrant_area(x.abs(), y.abs())
}

/// Exact area of `rect ∩ B_1(0)`.
pub fn square_disk_area<T: Real>(rect: &Rect<T>) -> T {
    if rect.x1 <= rect.x0 || rect.y1 <= rect.y0 {
        return T::zero();
    }
    let v = signed_quadrant_area(rect.x1, rect.y1) - signed_quadrant_area(rect.x0, rect.y1)
        - signed_quadrant_area(rect.x1, rect.y0)
        + signed_quadrant_area(rect.x0, rect.y0);
    v.max(T::zero())
}

/// `μ_∞(rect)` for the uniform probability measure on the unit disk.
pub fn disk_measure<T: Real>(rect: &Rect<T>) -> T {
    square_disk_area(rect) * T::FRAC_1_PI()
}

/// Index of the half-open cell `(−1 + i h, −1 + (i+1) h]` containing `x` at
/// level `level`, or `None` outside `(−1, 1]`.
fn cell_index<T: Real>(x: T, level: u32) -> Option<u64> {
    if !(x > -T::one() && x <= T::one()) {
        return None;
    }
    let u = (x + T::one()) * T::lit(2f64.powi(level as i32 - 1));
    let c = u.ceil().to_u64()?;
    Some(c.saturating_sub(1).min((1u64 << level) - 1))
}

/// Reference measure on `K_0` in a dyadic comparison.
#[derive(Clone, Copy, Debug)]
pub enum DyadicReference<'a, T> {
    /// The uniform probability measure on the unit disk.
    UniformDisk,
    /// Atoms with the given weights.
    Atoms(&'a [Complex<T>], &'a [T]),
}

#[derive(Clone, Copy, Debug, Default)]
struct Mass<T> {
    a: T,
    b: T,
}

/// `D̃_p` between atoms (with weights summing to one) in `K_0` and a reference
/// measure on `K_0`, summed explicitly to level `levels` plus the tail.
///
/// Beyond the last explicit level every nonempty square carries at least the
/// smallest atom weight, which exceeds the disk mass of the square, so
/// `Σ_F |μ(F) − ν(F)| = 2 − 2 ν(occupied)` there; the tail is evaluated with
/// `ν(occupied) = 0`, an overestimate by at most
/// `(2^p − 1) Σ_{l > L} 2^{-pl} · m · 4^{1−l}/π` for `m` atoms.
pub fn d_tilde_p<T: Real>(
    points: &[Complex<T>],
    weights: &[T],
    reference: DyadicReference<'_, T>,
    p: T,
    levels: u32,
) -> Result<T> {
    if !(p >= T::one()) {
        return Err(Error::InvalidParameter(format!("p = {p} must be at least 1")));
    }
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), got: weights.len() });
    }
    if levels == 0 || levels > 30 {
        return Err(Error::InvalidParameter(format!("dyadic level {levels} outside 1..=30")));
    }
    let finest = |pts: &[Complex<T>]| -> Result<Vec<(u64, u64)>> {
        pts.iter()
            .map(|z| match (cell_index(z.re, levels), cell_index(z.im, levels)) {
                (Some(i), Some(j)) => Ok((i, j)),
                _ => Err(Error::OutsideUnitSquare(z.re.to_f64_lossy(), z.im.to_f64_lossy())),
            })
            .collect()
    };
    let a_cells = finest(points)?;
    let b_cells = match reference {
        DyadicReference::UniformDisk => Vec::new(),
        DyadicReference::Atoms(pts, w) => {
            if pts.len() != w.len() {
                return Err(Error::DimensionMismatch { expected: pts.len(), got: w.len() });
            }
            finest(pts)?
        }
    };
    let two = T::lit(2.0);
    let two_p = two.powf(p);
    let mut total = T::zero();
    let mut map: HashMap<(u64, u64), Mass<T>> = HashMap::with_capacity(a_cells.len() * 2);
    for l in 1..=levels {
        map.clear();
        let shift = levels - l;
        for (&(i, j), &w) in a_cells.iter().zip(weights) {
            map.entry((i >> shift, j >> shift)).or_default().a += w;
        }
        let level_sum = match reference {
            DyadicReference::UniformDisk => {
                let mut occupied = T::zero();
                let mut s = T::zero();
                for (&(i, j), m) in &map {
                    let sq = DyadicSquare { level: l, i, j, k: 0 };
                    let nu = disk_measure(&sq.rect::<T>());
                    occupied += nu;
                    s += (m.a - nu).abs();
                }
                s + (T::one() - occupied).max(T::zero())
            }
            DyadicReference::Atoms(_, wb) => {
                for (&(i, j), &w) in b_cells.iter().zip(wb) {
                    map.entry((i >> shift, j >> shift)).or_default().b += w;
                }
                map.values().map(|m| (m.a - m.b).abs()).sum()
            }
        };
        total += two_p.powi(-(l as i32)) * level_sum;
    }
    // Σ_{l > L} 2^{-pl} = 2^{-pL} / (2^p − 1)
    let geometric = two_p.powi(-(levels as i32)) / (two_p - T::one());
    let tail_mass = match reference {
        DyadicReference::UniformDisk => two,
        DyadicReference::Atoms(_, wb) => {
            // at the finest level distinct cells hold distinct points
            let mut fine: HashMap<(u64, u64), Mass<T>> = HashMap::new();
            for (&c, &w) in a_cells.iter().zip(weights) {
                fine.entry(c).or_default().a += w;
            }
            for (&c, &w) in b_cells.iter().zip(wb) {
                fine.entry(c).or_default().b += w;
            }
            fine.values().map(|m| (m.a - m.b).abs()).sum()
        }
    };
    total += geometric * tail_mass;
    Ok((two_p - T::one()) * T::lit(0.5) * total)
}

/// Upper bound on the error of the tail closed form in [`d_tilde_p`] against
/// the disk for `atoms` atoms.
pub fn dyadic_tail_error<T: Real>(atoms: usize, p: T, levels: u32) -> T {
    // (2^p − 1)/2 · 2 Σ_{l > L} 2^{-pl} m 4^{1−l}/π
    let two_p = T::lit(2.0).powf(p);
    let q = two_p * T::lit(4.0);
    let sum = T::lit(4.0) * q.powi(-(levels as i32)) / (q - T::one());
    (two_p - T::one()) * sum * T::from_usize_lossy(atoms) * T::FRAC_1_PI()
}

/// Ring index `k` with `z ∈ K_k`: `K_0 = (−1, 1]²`,
/// `K_k = (−2^k, 2^k]² \ (−2^{k−1}, 2^{k−1}]²`.
pub fn ring_index<T: Real>(z: Complex<T>) -> u32 {
    let inside = |z: Complex<T>, s: T| z.re > -s && z.re <= s && z.im > -s && z.im <= s;
    let mut k = 0;
    let mut s = T::one();
    while !inside(z, s) {
        k += 1;
        s *= T::lit(2.0);
        if k > 1000 {
            break;
        }
    }
    k
}

/// Constant `4((2^p + 1)/(2^p − 1))^{1/p}` of the dyadic transport bound.
pub fn dyadic_constant<T: Real>(p: T) -> T {
    let two_p = T::lit(2.0).powf(p);
    T::lit(4.0) * ((two_p + T::one()) / (two_p - T::one())).powf(p.recip())
}

/// Groups a uniformly weighted point set by ring, rescaled into `K_0`.
fn rings<T: Real>(points: &[Complex<T>]) -> HashMap<u32, Vec<Complex<T>>> {
    let mut out: HashMap<u32, Vec<Complex<T>>> = HashMap::new();
    for &z in points {
        let k = ring_index(z);
        let s = T::lit(2f64.powi(k as i32));
        out.entry(k).or_default().push(z / s);
    }
    out
}

/// `D_p(μ_n, ν)` for the empirical measure of `sample` and either the
/// circular law or another uniformly weighted sample.
pub fn d_p_against<T: Real>(
    sample: &SpectralSample<T>,
    reference: Option<&SpectralSample<T>>,
    p: T,
    levels: u32,
) -> Result<DiscrepancyReport<T>> {
    if sample.is_empty() {
        return Err(Error::EmptyDimension);
    }
    let n = T::from_usize_lossy(sample.len());
    let ring_a = rings(&sample.points);
    let ring_b = reference.map(|r| rings(&r.points));
    let nb = reference.map(|r| T::from_usize_lossy(r.len()));
    let mut ks: Vec<u32> = ring_a.keys().copied().collect();
    if let Some(rb) = &ring_b {
        ks.extend(rb.keys().copied());
    } else {
        ks.push(0);
    }
    ks.sort_unstable();
    ks.dedup();
    let two_p = T::lit(2.0).powf(p);
    let mut d = T::zero();
    let mut d_tilde_0 = T::zero();
    for k in ks {
        let pa = ring_a.get(&k).map_or(&[][..], |v| v.as_slice());
        let mass_a = T::from_usize_lossy(pa.len()) / n;
        let (mass_b, pb): (T, &[Complex<T>]) = match (&ring_b, nb) {
            (Some(rb), Some(nb)) => {
                let pb = rb.get(&k).map_or(&[][..], |v| v.as_slice());
                (T::from_usize_lossy(pb.len()) / nb, pb)
            }
            _ => (if k == 0 { T::one() } else { T::zero() }, &[][..]),
        };
        let mut term = (mass_a - mass_b).abs();
        let overlap = mass_a.min(mass_b);
        if overlap > T::zero() {
            let wa = vec![T::one() / T::from_usize_lossy(pa.len()); pa.len()];
            let wb = vec![T::one() / T::from_usize_lossy(pb.len().max(1)); pb.len()];
            let reference = if ring_b.is_some() { DyadicReference::Atoms(pb, &wb) } else { DyadicReference::UniformDisk };
            let dt = d_tilde_p(pa, &wa, reference, p, levels)?;
            if k == 0 {
                d_tilde_0 = dt;
            }
            term += overlap * dt;
        }
        d += two_p.powi(k as i32) * term;
    }
    Ok(DiscrepancyReport {
        d_tilde_p: d_tilde_0,
        d_p: d,
        w_p_upper: dyadic_constant(p) * d.powf(p.recip()),
        p,
        truncation_level: levels,
    })
}

/// `D_p(μ_n, μ_∞)` with the default truncation level.
pub fn d_p<T: Real>(sample: &SpectralSample<T>, p: T) -> Result<DiscrepancyReport<T>> {
    d_p_against(sample, None, p, DEFAULT_LEVEL)
}

/// `sup_ρ |μ_n(B_ρ(0)) − μ_∞(B_ρ(0))|`, exact from the sorted moduli.
pub fn kolmogorov_ball<T: Real>(sample: &SpectralSample<T>) -> T {
    kolmogorov_ball_moduli(&sample.sorted_moduli())
}

/// [`kolmogorov_ball`] from sorted moduli.
pub fn kolmogorov_ball_moduli<T: Real>(sorted: &[T]) -> T {
    let n = T::from_usize_lossy(sorted.len());
    let mut worst = T::zero();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        let g = (v * v).min(T::one());
        let before = T::from_usize_lossy(i) / n;
        let after = T::from_usize_lossy(j) / n;
        worst = worst.max((before - g).abs()).max((after - g).abs());
        i = j;
    }
    worst
}

/// Scanned lower bound on `sup_K |μ_n(K) − μ_∞(K)|` over boxes
/// `K = (a_1, b_1] × (a_2, b_2]`.
///
/// Box edges range over the atom coordinates, points just below them, and a
/// uniform grid of `grid_refinement + 1` values on `[−1, 1]`.
pub fn kolmogorov_box<T: Real>(sample: &SpectralSample<T>, grid_refinement: usize) -> Result<BoxDiscrepancy<T>> {
    if grid_refinement == 0 {
        return Err(Error::InvalidParameter("grid refinement must be positive".into()));
    }
    let step = T::lit(2.0) / T::from_usize_lossy(grid_refinement);
    let candidates = |coord: &dyn Fn(&Complex<T>) -> T| -> Vec<T> {
        let mut c: Vec<T> = (0..=grid_refinement).map(|k| -T::one() + step * T::from_usize_lossy(k)).collect();
        for z in &sample.points {
            let x = coord(z);
            c.push(x);
            c.push(x - (x.abs() + T::one()) * T::epsilon() * T::lit(8.0));
        }
        c.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        c.dedup();
        c
    };
    let xs = candidates(&|z| z.re);
    let ys = candidates(&|z| z.im);
    let (nx, ny) = (xs.len(), ys.len());
    // cumulative disk measure and atom counts on the candidate lattice
    let far = -T::lit(2.0);
    let mut cum_nu = vec![T::zero(); nx * ny];
    for (a, &x) in xs.iter().enumerate() {
        for (b, &y) in ys.iter().enumerate() {
            cum_nu[a * ny + b] = disk_measure(&Rect::new(far, x, far, y));
        }
    }
    let n = T::from_usize_lossy(sample.len());
    let mut cum_mu = vec![T::zero(); nx * ny];
    for z in &sample.points {
        // first candidate index with coordinate ≥ the atom's
        let a0 = xs.partition_point(|&x| x < z.re);
        let b0 = ys.partition_point(|&y| y < z.im);
        for a in a0..nx {
            for b in b0..ny {
                cum_mu[a * ny + b] += n.recip();
            }
        }
    }
    let diff = |a: usize, b: usize| cum_mu[a * ny + b] - cum_nu[a * ny + b];
    let mut best = T::zero();
    let mut best_box = Rect::new(T::zero(), T::zero(), T::zero(), T::zero());
    let mut column = vec![T::zero(); ny];
    for a0 in 0..nx {
        for a1 in a0 + 1..nx {
            for (b, c) in column.iter_mut().enumerate() {
                *c = diff(a1, b) - diff(a0, b);
            }
            // max |column[b1] − column[b0]| over b0 < b1 via running extremes
            let (mut lo, mut hi) = (column[0], column[0]);
            let (mut lo_at, mut hi_at) = (0, 0);
            for b1 in 1..ny {
                let v = column[b1];
                if v - lo > best {
                    best = v - lo;
                    best_box = Rect::new(xs[a0], xs[a1], ys[lo_at], ys[b1]);
                }
                if hi - v > best {
                    best = hi - v;
                    best_box = Rect::new(xs[a0], xs[a1], ys[hi_at], ys[b1]);
                }
                if v < lo {
                    lo = v;
                    lo_at = b1;
                }
                if v > hi {
                    hi = v;
                    hi_at = b1;
                }
            }
        }
    }
    Ok(BoxDiscrepancy {
        value: best.min(T::one()),
        resolution_gap: T::lit(4.0) * step,
        best_box,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_index_is_half_open() {
        assert_eq!(cell_index(0.0f64, 1), Some(0));
        assert_eq!(cell_index(1e-15f64, 1), Some(1));
        assert_eq!(cell_index(1.0f64, 3), Some(7));
        assert_eq!(cell_index(-1.0f64, 3), None);
        assert_eq!(cell_index(-0.75f64, 3), Some(0));
    }

    #[test]
    fn ring_indices() {
        assert_eq!(ring_index(Complex::new(1.0f64, -0.99)), 0);
        assert_eq!(ring_index(Complex::new(-1.0f64, 0.0)), 1);
        assert_eq!(ring_index(Complex::new(2.0f64, 2.0)), 1);
        assert_eq!(ring_index(Complex::new(2.5f64, 0.0)), 2);
    }
}
