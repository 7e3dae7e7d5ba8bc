//! Concave dual ascent for the semi-discrete problem.
//!
//! Each quadrature node is allocated to the atom minimising
//! `a_j = |z − λ_j| − w_j`. The minimum is replaced by the quadratically
//! regularised minimum
//!
//! `S(a) = min_{p ∈ Δ} Σ_j p_j a_j + c Σ_j p_j² − c`, with `c = h/2`,
//!
//! whose minimiser `p` is the Euclidean projection of `−a/(2c)` onto the
//! simplex. `S` is concave and C¹ in `w`, lies below the hard minimum by at
//! most `c`, and its gradient in `a` is `p`: the node is shared between the
//! atoms within `2c` of the best one. The smoothed dual therefore has
//! gradient `target − masses` and Hessian minus a weighted graph Laplacian
//! (a complete graph on each node's active set), which makes a damped Newton
//! iteration available.

use rayon::prelude::*;

use super::grid::{QuadratureGrid, TILE_CHUNK};
use crate::scalar::Real;

/// Atoms after merging coincident points.
#[derive(Clone, Debug)]
pub(crate) struct Atoms<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub target: Vec<T>,
    /// Original indices represented by each atom.
    pub members: Vec<Vec<usize>>,
}

impl<T: Real> Atoms<T> {
    pub fn len(&self) -> usize {
        self.x.len()
    }
}

/// Value, masses and derivatives of the smoothed dual at one weight vector.
#[derive(Clone, Debug)]
pub(crate) struct Evaluation<T> {
    /// Smoothed dual value (the ascent objective).
    pub phi: T,
    /// Dual value with hard allocation at the nodes.
    pub phi_hard: T,
    pub masses: Vec<T>,
    pub costs: Vec<T>,
    /// `∂ masses / ∂ w`, row-major.
    pub jacobian: Option<Vec<T>>,
}

struct Accumulator<T> {
    phi: T,
    phi_hard: T,
    masses: Vec<T>,
    costs: Vec<T>,
    links: Vec<(u32, u32, T)>,
}

impl<T: Real> Accumulator<T> {
    fn new(n: usize) -> Self {
        Self {
            phi: T::zero(),
            phi_hard: T::zero(),
            masses: vec![T::zero(); n],
            costs: vec![T::zero(); n],
            links: Vec::new(),
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.phi += other.phi;
        self.phi_hard += other.phi_hard;
        for (a, b) in self.masses.iter_mut().zip(&other.masses) {
            *a += *b;
        }
        for (a, b) in self.costs.iter_mut().zip(&other.costs) {
            *a += *b;
        }
        self.links.extend(other.links);
        self
    }
}

pub(crate) fn evaluate<T: Real>(grid: &QuadratureGrid<T>, atoms: &Atoms<T>, w: &[T], with_jacobian: bool) -> Evaluation<T> {
    let n = atoms.len();
    let h = grid.spacing;
    let band = h * T::lit(2.0);
    let c = h * T::lit(0.5);
    let two_c = h;
    let parts: Vec<Accumulator<T>> = grid
        .tiles
        .par_chunks(TILE_CHUNK)
        .map(|tiles| {
            let mut acc = Accumulator::new(n);
            let mut cand = Vec::with_capacity(n);
            let mut near: Vec<(T, T, usize)> = Vec::new();
            for tile in tiles {
                let r = &tile.rect;
                // prune atoms that cannot be best or within the band anywhere in the tile
                let mut best_hi = T::infinity();
                for j in 0..n {
                    let fx = (atoms.x[j] - r.x0).abs().max((atoms.x[j] - r.x1).abs());
                    let fy = (atoms.y[j] - r.y0).abs().max((atoms.y[j] - r.y1).abs());
                    best_hi = best_hi.min(fx.hypot(fy) - w[j]);
                }
                cand.clear();
                for j in 0..n {
                    let dx = (r.x0 - atoms.x[j]).max(atoms.x[j] - r.x1).max(T::zero());
                    let dy = (r.y0 - atoms.y[j]).max(atoms.y[j] - r.y1).max(T::zero());
                    if dx.hypot(dy) - w[j] <= best_hi + band {
                        cand.push(j);
                    }
                }
                for p in tile.start..tile.end {
                    let (px, py, m) = (grid.x[p], grid.y[p], grid.mass[p]);
                    let mut ab = T::infinity();
                    near.clear();
                    for &j in &cand {
                        let d = (px - atoms.x[j]).hypot(py - atoms.y[j]);
                        let a = d - w[j];
                        ab = ab.min(a);
                        near.push((a, d, j));
                    }
                    acc.phi_hard += m * ab;
                    near.retain(|e| e.0 < ab + two_c);
                    near.sort_unstable_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
                    // water level t with Σ (t − a_j)₊ = 2c
                    let mut k = 1;
                    let mut sum = near[0].0;
                    while k < near.len() && near[k].0 < (two_c + sum) / T::from_usize_lossy(k) {
                        sum += near[k].0;
                        k += 1;
                    }
                    let t = (two_c + sum) / T::from_usize_lossy(k);
                    let mut smooth = -c;
                    for &(a, d, j) in &near[..k] {
                        let share = (t - a) / two_c;
                        smooth += share * a + c * share * share;
                        acc.masses[j] += m * share;
                        acc.costs[j] += m * share * d;
                    }
                    acc.phi += m * smooth;
                    if with_jacobian && k > 1 {
                        let v = m / (two_c * T::from_usize_lossy(k));
                        for x in 0..k {
                            for y in x + 1..k {
                                acc.links.push((near[x].2 as u32, near[y].2 as u32, v));
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let acc = parts.into_iter().fold(Accumulator::new(n), Accumulator::merge);
    let linear: T = atoms.target.iter().zip(w).map(|(t, w)| *t * *w).sum();
    let jacobian = with_jacobian.then(|| {
        let mut jac = vec![T::zero(); n * n];
        for &(b, s, v) in &acc.links {
            let (b, s) = (b as usize, s as usize);
            jac[b * n + b] += v;
            jac[s * n + s] += v;
            jac[b * n + s] -= v;
            jac[s * n + b] -= v;
        }
        jac
    });
    Evaluation {
        phi: acc.phi + linear,
        phi_hard: acc.phi_hard + linear,
        masses: acc.masses,
        costs: acc.costs,
        jacobian,
    }
}

/// Solves `(J + εI) x = g` for the Laplacian `J` by Cholesky factorisation.
/// Rows without any coupling get the mean diagonal so their cells still move.
fn newton_direction<T: Real>(mut jac: Vec<T>, g: &[T]) -> Option<Vec<T>> {
    let n = g.len();
    let diag: Vec<T> = (0..n).map(|i| jac[i * n + i]).collect();
    let positive: Vec<T> = diag.iter().copied().filter(|&d| d > T::zero()).collect();
    let fill = if positive.is_empty() {
        T::one()
    } else {
        positive.iter().copied().sum::<T>() / T::from_usize_lossy(positive.len())
    };
    let max_diag = diag.iter().copied().fold(fill, T::max);
    let eps = max_diag * T::lit(1e-10);
    for i in 0..n {
        if jac[i * n + i] <= T::zero() {
            jac[i * n + i] = fill;
        }
        jac[i * n + i] += eps;
    }
    // in-place lower Cholesky
    for j in 0..n {
        let mut d = jac[j * n + j];
        for k in 0..j {
            d -= jac[j * n + k] * jac[j * n + k];
        }
        if !(d > T::zero()) {
            return None;
        }
        let d = d.sqrt();
        jac[j * n + j] = d;
        for i in j + 1..n {
            let mut s = jac[i * n + j];
            for k in 0..j {
                s -= jac[i * n + k] * jac[j * n + k];
            }
            jac[i * n + j] = s / d;
        }
    }
    let mut x = g.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= jac[i * n + k] * x[k];
        }
        x[i] = s / jac[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= jac[k * n + i] * x[k];
        }
        x[i] = s / jac[i * n + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub(crate) fn normalize_mean<T: Real>(w: &mut [T]) {
    if w.is_empty() {
        return;
    }
    let mean = w.iter().copied().sum::<T>() / T::from_usize_lossy(w.len());
    for v in w.iter_mut() {
        *v -= mean;
    }
}

pub(crate) fn mass_residual<T: Real>(masses: &[T], target: &[T]) -> T {
    masses.iter().zip(target).map(|(m, t)| (*m - *t).abs()).fold(T::zero(), T::max)
}

pub(crate) struct Outcome<T> {
    pub weights: Vec<T>,
    pub eval: Evaluation<T>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<T>,
}

/// Damped Newton ascent with an Armijo test on the smoothed dual, falling
/// back to supergradient steps `w ← w + τ (target − masses)` with `τ`
/// doubled after success and halved after a decrease.
/// Accepted steps in a row without an increase above rounding noise after
/// which the ascent gives up.
const STALL_LIMIT: usize = 5;

pub(crate) fn ascend<T: Real>(grid: &QuadratureGrid<T>, atoms: &Atoms<T>, init: Vec<T>, tol: T, max_iters: usize) -> Outcome<T> {
    let n = atoms.len();
    let mut w = init;
    normalize_mean(&mut w);
    let mut eval = evaluate(grid, atoms, &w, true);
    let min_target = atoms.target.iter().copied().fold(T::infinity(), T::min);
    let min_mass = |e: &Evaluation<T>| e.masses.iter().copied().fold(T::infinity(), T::min);
    // keep every cell at least half as heavy as at the start (if all start nonempty)
    let floor = min_mass(&eval).min(min_target) * T::lit(0.5);
    let mut tau = T::from_usize_lossy(n).recip();
    let mut history = vec![eval.phi];
    let mut iterations = 0;
    let mut converged = false;
    let mut stalled = 0;
    while iterations < max_iters && stalled < STALL_LIMIT {
        if mass_residual(&eval.masses, &atoms.target) <= tol {
            converged = true;
            break;
        }
        let noise = T::epsilon() * T::lit(1e3) * (T::one() + eval.phi.abs());
        let g: Vec<T> = atoms.target.iter().zip(&eval.masses).map(|(t, m)| *t - *m).collect();
        let mut next = None;
        if let Some(dir) = eval.jacobian.clone().and_then(|jac| newton_direction(jac, &g)) {
            let slope: T = g.iter().zip(&dir).map(|(a, b)| *a * *b).sum();
            if slope > T::zero() {
                let mut step = T::one();
                for _ in 0..40 {
                    let mut trial: Vec<T> = w.iter().zip(&dir).map(|(w, d)| *w + step * *d).collect();
                    normalize_mean(&mut trial);
                    let e = evaluate(grid, atoms, &trial, true);
                    let ascent = e.phi >= eval.phi + T::lit(1e-4) * step * slope - noise;
                    if ascent && min_mass(&e) >= floor {
                        next = Some((trial, e));
                        break;
                    }
                    step *= T::lit(0.5);
                }
            }
        }
        if next.is_none() {
            for _ in 0..60 {
                let mut trial: Vec<T> = w.iter().zip(&g).map(|(w, g)| *w + tau * *g).collect();
                normalize_mean(&mut trial);
                let e = evaluate(grid, atoms, &trial, true);
                if e.phi >= eval.phi - noise {
                    next = Some((trial, e));
                    tau *= T::lit(2.0);
                    break;
                }
                tau *= T::lit(0.5);
            }
        }
        iterations += 1;
        match next {
            Some((trial, e)) => {
                stalled = if e.phi - eval.phi <= noise { stalled + 1 } else { 0 };
                w = trial;
                eval = e;
                history.push(eval.phi);
            }
            None => break,
        }
    }
    if !converged && mass_residual(&eval.masses, &atoms.target) <= tol {
        converged = true;
    }
    Outcome { weights: w, eval, iterations, converged, history }
}
