//! Semi-discrete 1-Wasserstein distance from a point cloud to the uniform
//! measure on the unit disk.
//!
//! For weights `w` the disk splits into weighted Voronoi (Apollonius) cells
//! `C_j(w) = {z : |z − λ_j| − w_j ≤ |z − λ_k| − w_k ∀k}` and
//!
//! `Φ(w) = Σ_j ∫_{C_j(w)} (|z − λ_j| − w_j) dμ_∞ + (1/n) Σ_j w_j`
//!
//! is a concave lower bound on `W₁(μ_n, μ_∞)`, attained where every cell has
//! mass `1/n`.

mod grid;
mod oracle;
mod solver;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use grid::{Integrator, QuadratureGrid, MIN_RESOLUTION};
use grid::TILE_CHUNK;

use crate::ensembles::{rng_from_seed, SpectralSample};
use crate::error::{Error, Result};
use crate::multiscale::{square_disk_area, Rect};
use crate::scalar::{Complex, Real};
use solver::Atoms;

/// Default raster resolution of the solver.
pub const DEFAULT_RESOLUTION: usize = 1024;
/// Atoms closer than this are merged into one.
pub const MERGE_DISTANCE: f64 = 1e-12;
/// Largest sample the discrete oracle accepts.
pub const ORACLE_MAX_ATOMS: usize = 64;
/// Largest raster side the discrete oracle accepts.
pub const ORACLE_MAX_GRID: usize = 256;

/// The uniform probability measure on the closed unit disk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiskMeasure;

impl DiskMeasure {
    pub fn total_mass(&self) -> f64 {
        1.0
    }

    pub fn density<T: Real>(&self, z: Complex<T>) -> T {
        if self.contains(z) {
            T::FRAC_1_PI()
        } else {
            T::zero()
        }
    }

    pub fn contains<T: Real>(&self, z: Complex<T>) -> bool {
        z.norm_sqr() <= T::one()
    }

    /// Exact measure of an axis-parallel rectangle.
    pub fn rect_mass<T: Real>(&self, rect: &Rect<T>) -> T {
        square_disk_area(rect) * T::FRAC_1_PI()
    }

    pub fn quadrature<T: Real>(&self, integrator: Integrator) -> Result<QuadratureGrid<T>> {
        QuadratureGrid::new(integrator)
    }
}

/// Dual weights and diagnostics of an ascent run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualState<T> {
    pub weights: Vec<T>,
    /// Cell masses; coincident atoms share their merged cell equally.
    pub masses: Vec<T>,
    /// Smoothed dual value at `weights` (the ascent objective).
    pub dual_value: T,
    pub iterations: usize,
    /// `max_j |masses_j − 1/n|`.
    pub mass_residual: T,
    pub converged: bool,
    /// Dual value after each accepted step, starting with the initial one.
    pub history: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportResult<T> {
    /// `Σ_j costs_j` of the transport plan induced by the final weights.
    pub w1: T,
    pub dual_state: DualState<T>,
    /// Dual value with hard cells at the final weights; a lower bound on the
    /// transport cost to the quadrature measure for any weights.
    pub lower_certificate: T,
    pub integrator: Integrator,
    /// `∫_{C_j} |z − λ_j| dμ_∞` per atom.
    pub costs: Vec<T>,
    /// Linear size of one quadrature node.
    pub spacing: T,
}

impl<T: Real> TransportResult<T> {
    /// Error scale of `w1`: the displacement of the quadrature (one node
    /// spacing) plus the cost of moving the residual cell masses across the
    /// hull of disk and atoms.
    pub fn tolerance(&self) -> T {
        let n = T::from_usize_lossy(self.dual_state.masses.len());
        let excess: T = self.dual_state.masses.iter().map(|m| (*m - n.recip()).abs()).sum();
        self.spacing + excess * T::lit(4.0)
    }
}

/// Ascent parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions<T> {
    pub tol_mass: T,
    pub max_iters: usize,
}

impl<T: Real> SolverOptions<T> {
    /// `tol_mass = 10⁻³/n`, at most 200 iterations.
    pub fn for_size(n: usize) -> Self {
        Self { tol_mass: T::lit(1e-3) / T::from_usize_lossy(n.max(1)), max_iters: 200 }
    }
}

fn check_sample<T: Real>(sample: &SpectralSample<T>) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::EmptyDimension);
    }
    if sample.points.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn check_weights<T: Real>(sample: &SpectralSample<T>, weights: &[T]) -> Result<()> {
    if weights.len() != sample.len() {
        return Err(Error::DimensionMismatch { expected: sample.len(), got: weights.len() });
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Index of the best atom for `(x, y)`. Atom `j` replaces the current best
/// `b` only if `|z − λ_j| − |z − λ_b| < w_j − w_b`, so the lowest index wins
/// ties and the result is unchanged when all weights are shifted exactly.
fn argmin<T: Real>(x: T, y: T, points: &[Complex<T>], weights: &[T]) -> (usize, T) {
    let mut best = 0;
    let mut db = (x - points[0].re).hypot(y - points[0].im);
    for j in 1..points.len() {
        let d = (x - points[j].re).hypot(y - points[j].im);
        if d - db < weights[j] - weights[best] {
            best = j;
            db = d;
        }
    }
    (best, db)
}

/// Cell of `z`: `argmin_j |z − λ_j| − w_j`, lowest index on ties.
pub fn assign_cell<T: Real>(z: Complex<T>, sample: &SpectralSample<T>, weights: &[T]) -> Result<usize> {
    check_sample(sample)?;
    check_weights(sample, weights)?;
    Ok(argmin(z.re, z.im, &sample.points, weights).0)
}

/// Cell masses `μ_∞(C_j(w))` and costs `∫_{C_j}|z − λ_j| dμ_∞` on a
/// `resolution²` raster with exact boundary pixel areas.
pub fn cell_masses_and_costs<T: Real>(
    sample: &SpectralSample<T>,
    weights: &[T],
    resolution: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    let grid = QuadratureGrid::raster(resolution)?;
    cell_masses_and_costs_on(&grid, sample, weights)
}

pub fn cell_masses_and_costs_on<T: Real>(
    grid: &QuadratureGrid<T>,
    sample: &SpectralSample<T>,
    weights: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    check_sample(sample)?;
    check_weights(sample, weights)?;
    let n = sample.len();
    let parts: Vec<(Vec<T>, Vec<T>)> = grid
        .tiles
        .par_chunks(TILE_CHUNK)
        .map(|tiles| {
            let (mut m, mut c) = (vec![T::zero(); n], vec![T::zero(); n]);
            for tile in tiles {
                for p in tile.start..tile.end {
                    let (j, d) = argmin(grid.x[p], grid.y[p], &sample.points, weights);
                    m[j] += grid.mass[p];
                    c[j] += grid.mass[p] * d;
                }
            }
            (m, c)
        })
        .collect();
    let (mut m, mut c) = (vec![T::zero(); n], vec![T::zero(); n]);
    for (m2, c2) in parts {
        for j in 0..n {
            m[j] += m2[j];
            c[j] += c2[j];
        }
    }
    Ok((m, c))
}

/// `Φ(w)` with hard cells on the quadrature nodes. Bounded above by the
/// transport cost of every coupling between the node measure and `μ_n`.
pub fn dual_objective<T: Real>(grid: &QuadratureGrid<T>, sample: &SpectralSample<T>, weights: &[T]) -> Result<T> {
    check_sample(sample)?;
    check_weights(sample, weights)?;
    let inner: T = grid
        .tiles
        .par_iter()
        .map(|tile| {
            (tile.start..tile.end)
                .map(|p| {
                    let (j, d) = argmin(grid.x[p], grid.y[p], &sample.points, weights);
                    grid.mass[p] * (d - weights[j])
                })
                .sum::<T>()
        })
        .collect::<Vec<T>>()
        .into_iter()
        .sum();
    let n = T::from_usize_lossy(sample.len());
    Ok(inner + weights.iter().copied().sum::<T>() / n)
}

fn merge_atoms<T: Real>(sample: &SpectralSample<T>) -> Atoms<T> {
    let n = sample.len();
    let eps = T::lit(MERGE_DISTANCE);
    let unit = T::from_usize_lossy(n).recip();
    let mut atoms = Atoms { x: Vec::new(), y: Vec::new(), target: Vec::new(), members: Vec::new() };
    for (i, z) in sample.points.iter().enumerate() {
        let hit = (0..atoms.x.len()).find(|&k| (z.re - atoms.x[k]).hypot(z.im - atoms.y[k]) <= eps);
        match hit {
            Some(k) => {
                atoms.members[k].push(i);
                atoms.target[k] += unit;
            }
            None => {
                atoms.x.push(z.re);
                atoms.y.push(z.im);
                atoms.target.push(unit);
                atoms.members.push(vec![i]);
            }
        }
    }
    atoms
}

fn spread<T: Real>(atoms: &Atoms<T>, per_atom: &[T], n: usize, split: bool) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (k, members) in atoms.members.iter().enumerate() {
        let share = if split { per_atom[k] / T::from_usize_lossy(members.len()) } else { per_atom[k] };
        for &i in members {
            out[i] = share;
        }
    }
    out
}

struct Solved<T> {
    state: DualState<T>,
    costs: Vec<T>,
    w1: T,
    lower: T,
}

fn run<T: Real>(grid: &QuadratureGrid<T>, sample: &SpectralSample<T>, options: &SolverOptions<T>) -> Result<Solved<T>> {
    check_sample(sample)?;
    if !(options.tol_mass > T::zero()) {
        return Err(Error::InvalidParameter("tol_mass must be positive".into()));
    }
    let n = sample.len();
    let atoms = merge_atoms(sample);
    let init: Vec<T> = (0..atoms.len())
        .map(|k| (atoms.x[k].hypot(atoms.y[k]) - T::one()).max(T::zero()))
        .collect();
    let out = solver::ascend(grid, &atoms, init, options.tol_mass, options.max_iters);
    let weights = spread(&atoms, &out.weights, n, false);
    let masses = spread(&atoms, &out.eval.masses, n, true);
    let costs = spread(&atoms, &out.eval.costs, n, true);
    let unit = T::from_usize_lossy(n).recip();
    let mass_residual = masses.iter().map(|m| (*m - unit).abs()).fold(T::zero(), T::max);
    let w1 = out.eval.costs.iter().copied().sum();
    Ok(Solved {
        state: DualState {
            weights,
            masses,
            dual_value: out.eval.phi,
            iterations: out.iterations,
            mass_residual,
            converged: out.converged,
            history: out.history,
        },
        costs,
        w1,
        lower: out.eval.phi_hard,
    })
}

/// Maximises the dual over the weights on a `resolution²` raster.
/// Exhausting `max_iters` returns the last accepted iterate with
/// `converged = false`.
pub fn solve_dual<T: Real>(sample: &SpectralSample<T>, resolution: usize, tol_mass: T, max_iters: usize) -> Result<DualState<T>> {
    let grid = QuadratureGrid::raster(resolution)?;
    Ok(run(&grid, sample, &SolverOptions { tol_mass, max_iters })?.state)
}

pub fn solve_dual_on<T: Real>(grid: &QuadratureGrid<T>, sample: &SpectralSample<T>, options: &SolverOptions<T>) -> Result<DualState<T>> {
    Ok(run(grid, sample, options)?.state)
}

/// `W₁(μ_n, μ_∞)` from the optimal cells on a `resolution²` raster.
pub fn w1_semidiscrete<T: Real>(sample: &SpectralSample<T>, resolution: usize, tol_mass: T) -> Result<TransportResult<T>> {
    let grid = QuadratureGrid::raster(resolution)?;
    let options = SolverOptions { tol_mass, ..SolverOptions::for_size(sample.len()) };
    w1_semidiscrete_on(&grid, sample, &options)
}

pub fn w1_semidiscrete_on<T: Real>(
    grid: &QuadratureGrid<T>,
    sample: &SpectralSample<T>,
    options: &SolverOptions<T>,
) -> Result<TransportResult<T>> {
    let s = run(grid, sample, options)?;
    Ok(TransportResult {
        w1: s.w1,
        dual_state: s.state,
        lower_certificate: s.lower,
        integrator: grid.integrator(),
        costs: s.costs,
        spacing: grid.spacing(),
    })
}

fn oracle_inputs<T: Real>(sample: &SpectralSample<T>, grid_m: usize) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>, Vec<f64>)> {
    check_sample(sample)?;
    if sample.len() > ORACLE_MAX_ATOMS {
        return Err(Error::InvalidParameter(format!("discrete oracle takes at most {ORACLE_MAX_ATOMS} atoms")));
    }
    if !(2..=ORACLE_MAX_GRID).contains(&grid_m) {
        return Err(Error::InvalidParameter(format!("grid_m must lie in 2..={ORACLE_MAX_GRID}")));
    }
    let atoms = sample.points.iter().map(|z| (z.re.to_f64_lossy(), z.im.to_f64_lossy())).collect();
    let h = 2.0 / grid_m as f64;
    let (mut nodes, mut mass) = (Vec::new(), Vec::new());
    for row in 0..grid_m {
        for col in 0..grid_m {
            let x0 = -1.0 + h * col as f64;
            let y0 = -1.0 + h * row as f64;
            let a = square_disk_area(&Rect::new(x0, x0 + h, y0, y0 + h));
            if a > 0.0 {
                nodes.push((x0 + 0.5 * h, y0 + 0.5 * h));
                mass.push(a);
            }
        }
    }
    Ok((atoms, nodes, mass))
}

/// Exact `W₁` between `μ_n` and the pixel-centre quantization of `μ_∞` on a
/// `grid_m²` raster. Differs from `W₁(μ_n, μ_∞)` by at most `2/grid_m`.
pub fn w1_discrete_oracle<T: Real>(sample: &SpectralSample<T>, grid_m: usize) -> Result<T> {
    wp_discrete_oracle(sample, grid_m, T::one())
}

/// Exact `W_p` against the same quantization, with cost `|x − y|^p`.
pub fn wp_discrete_oracle<T: Real>(sample: &SpectralSample<T>, grid_m: usize, p: T) -> Result<T> {
    if !(p >= T::one()) {
        return Err(Error::InvalidParameter("p must be at least 1".into()));
    }
    let (atoms, nodes, mass) = oracle_inputs(sample, grid_m)?;
    let p = p.to_f64_lossy();
    let supply = vec![1.0; atoms.len()];
    let angle = |&(x, y): &(f64, f64)| y.atan2(x);
    let supply_key: Vec<f64> = atoms.iter().map(angle).collect();
    let demand_key: Vec<f64> = nodes.iter().map(angle).collect();
    let cost = oracle::transport_cost(&supply, &mass, &supply_key, &demand_key, |i, j| {
        let d = (atoms[i].0 - nodes[j].0).hypot(atoms[i].1 - nodes[j].1);
        if p == 1.0 {
            d
        } else {
            d.powf(p)
        }
    })?;
    Ok(T::lit(cost.powf(1.0 / p)))
}

/// Kantorovich–Rubinstein lower bound from the 1-Lipschitz test function
/// `f(x) = max_j (1/√n − |x − λ_j|)₊`: `∫ f dμ_n − ∫ f dμ_∞`, the second
/// integral on the default raster.
pub fn dual_lower_bound_paper<T: Real>(sample: &SpectralSample<T>) -> Result<T> {
    let grid = QuadratureGrid::raster(DEFAULT_RESOLUTION)?;
    dual_lower_bound_on(&grid, sample)
}

pub fn dual_lower_bound_on<T: Real>(grid: &QuadratureGrid<T>, sample: &SpectralSample<T>) -> Result<T> {
    check_sample(sample)?;
    let n = T::from_usize_lossy(sample.len());
    let c = n.sqrt().recip();
    let f = |x: T, y: T| {
        sample
            .points
            .iter()
            .map(|l| c - (x - l.re).hypot(y - l.im))
            .fold(T::zero(), T::max)
    };
    let empirical: T = sample.points.iter().map(|z| f(z.re, z.im)).sum::<T>() / n;
    let reference: T = grid
        .tiles
        .par_iter()
        .map(|tile| {
            let r = &tile.rect;
            let near: Vec<Complex<T>> = sample
                .points
                .iter()
                .copied()
                .filter(|l| {
                    let dx = (r.x0 - l.re).max(l.re - r.x1).max(T::zero());
                    let dy = (r.y0 - l.im).max(l.im - r.y1).max(T::zero());
                    dx.hypot(dy) < c
                })
                .collect();
            if near.is_empty() {
                return T::zero();
            }
            (tile.start..tile.end)
                .map(|p| {
                    let v = near
                        .iter()
                        .map(|l| c - (grid.x[p] - l.re).hypot(grid.y[p] - l.im))
                        .fold(T::zero(), T::max);
                    grid.mass[p] * v
                })
                .sum::<T>()
        })
        .collect::<Vec<T>>()
        .into_iter()
        .sum();
    Ok(empirical - reference)
}

/// Moves every point a distance `r` in a uniformly random direction.
pub fn regularize_sample<T: Real>(sample: &SpectralSample<T>, r: T, seed: u64) -> Result<SpectralSample<T>> {
    if !(r >= T::zero() && r.is_finite()) {
        return Err(Error::InvalidParameter("regularization radius must be nonnegative".into()));
    }
    if r == T::zero() {
        return Ok(sample.clone());
    }
    let mut rng = rng_from_seed(seed);
    let points = sample
        .points
        .iter()
        .map(|z| {
            let theta = T::lit(rng.random::<f64>() * std::f64::consts::TAU);
            Complex::new(z.re + r * theta.cos(), z.im + r * theta.sin())
        })
        .collect();
    Ok(SpectralSample { points, ..sample.clone() })
}

/// Cell index of every pixel centre of a `resolution²` raster of
/// `[−1, 1]²`, row 0 at the top (`y` near `+1`). Pixels whose centre lies
/// outside the disk hold `None`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tessellation {
    pub resolution: usize,
    pub cells: Vec<Option<u32>>,
}

impl Tessellation {
    pub fn get(&self, row: usize, col: usize) -> Option<u32> {
        self.cells[row * self.resolution + col]
    }

    /// Number of pixels in each of `n` cells.
    pub fn counts(&self, n: usize) -> Vec<usize> {
        let mut c = vec![0; n];
        for j in self.cells.iter().flatten() {
            c[*j as usize] += 1;
        }
        c
    }
}

pub fn tessellation_raster<T: Real>(sample: &SpectralSample<T>, weights: &[T], resolution: usize) -> Result<Tessellation> {
    check_sample(sample)?;
    check_weights(sample, weights)?;
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidParameter(format!("resolution {resolution} below {MIN_RESOLUTION}")));
    }
    let h = T::lit(2.0) / T::from_usize_lossy(resolution);
    let cells = (0..resolution)
        .into_par_iter()
        .flat_map_iter(|row| {
            let y = T::one() - h * (T::from_usize_lossy(row) + T::lit(0.5));
            (0..resolution).map(move |col| {
                let x = -T::one() + h * (T::from_usize_lossy(col) + T::lit(0.5));
                (x * x + y * y <= T::one()).then(|| argmin(x, y, &sample.points, weights).0 as u32)
            })
        })
        .collect();
    Ok(Tessellation { resolution, cells })
}
