//! Quadrature of the uniform disk measure.
//!
//! A grid is a list of weighted nodes covering `B_1(0)`, bucketed into
//! rectangular tiles so that cell evaluations can prune atoms per tile.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles::rng_from_seed;
use crate::error::{Error, Result};
use crate::multiscale::{square_disk_area, Rect};
use crate::scalar::Real;

/// How the disk measure is discretised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrator {
    /// `resolution × resolution` pixels on `[−1, 1]²` with exact disk areas.
    Raster { resolution: usize },
    /// i.i.d. uniform nodes of equal mass.
    MonteCarlo { samples: usize, seed: u64 },
}

pub const MIN_RESOLUTION: usize = 64;
const TILE: usize = 16;
const SUBDIVISION: usize = 8;
/// Tiles per unit of parallel work. Partial sums are formed per chunk and
/// added in chunk order, so results do not depend on the thread count.
pub(crate) const TILE_CHUNK: usize = 32;

#[derive(Clone, Debug)]
pub(crate) struct Tile<T> {
    pub rect: Rect<T>,
    pub start: usize,
    pub end: usize,
}

/// Weighted nodes of a disk quadrature.
#[derive(Clone, Debug)]
pub struct QuadratureGrid<T> {
    pub(crate) x: Vec<T>,
    pub(crate) y: Vec<T>,
    pub(crate) mass: Vec<T>,
    /// Linear size of the region each node stands for.
    pub(crate) spacing: T,
    pub(crate) tiles: Vec<Tile<T>>,
    integrator: Integrator,
}

impl<T: Real> QuadratureGrid<T> {
    pub fn new(integrator: Integrator) -> Result<Self> {
        match integrator {
            Integrator::Raster { resolution } => Self::raster(resolution),
            Integrator::MonteCarlo { samples, seed } => Self::monte_carlo(samples, seed),
        }
    }

    /// Pixel raster. Interior pixels sit at their centres; pixels cut by the
    /// circle carry their exact area and an `8 × 8` sub-pixel estimate of the
    /// centroid of the part inside the disk.
    pub fn raster(resolution: usize) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::InvalidParameter(format!("resolution {resolution} below {MIN_RESOLUTION}")));
        }
        let h = T::lit(2.0) / T::from_usize_lossy(resolution);
        let inv_pi = T::FRAC_1_PI();
        let full = h * h;
        let edge = |k: usize| -T::one() + h * T::from_usize_lossy(k);
        let tiles_per_side = resolution.div_ceil(TILE);
        let mut grid = Self {
            x: Vec::new(),
            y: Vec::new(),
            mass: Vec::new(),
            spacing: h,
            tiles: Vec::new(),
            integrator: Integrator::Raster { resolution },
        };
        for ti in 0..tiles_per_side {
            for tj in 0..tiles_per_side {
                let start = grid.x.len();
                let (mut x0, mut x1, mut y0, mut y1) = (T::infinity(), T::neg_infinity(), T::infinity(), T::neg_infinity());
                for row in ti * TILE..((ti + 1) * TILE).min(resolution) {
                    for col in tj * TILE..((tj + 1) * TILE).min(resolution) {
                        let rect = Rect::new(edge(col), edge(col + 1), edge(row), edge(row + 1));
                        let area = square_disk_area(&rect);
                        if area <= T::zero() {
                            continue;
                        }
                        let (cx, cy) = if area >= full * (T::one() - T::epsilon() * T::lit(16.0)) {
                            ((rect.x0 + rect.x1) * T::lit(0.5), (rect.y0 + rect.y1) * T::lit(0.5))
                        } else {
                            sub_pixel_centroid(&rect)
                        };
                        x0 = x0.min(cx);
                        x1 = x1.max(cx);
                        y0 = y0.min(cy);
                        y1 = y1.max(cy);
                        grid.x.push(cx);
                        grid.y.push(cy);
                        grid.mass.push(area * inv_pi);
                    }
                }
                if grid.x.len() > start {
                    grid.tiles.push(Tile { rect: Rect::new(x0, x1, y0, y1), start, end: grid.x.len() });
                }
            }
        }
        Ok(grid)
    }

    /// `samples` i.i.d. uniform nodes, each of mass `1/samples`.
    pub fn monte_carlo(samples: usize, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidParameter("Monte Carlo integrator needs samples".into()));
        }
        let mut rng = rng_from_seed(seed);
        let side = ((samples as f64 / 64.0).sqrt().ceil() as usize).max(1);
        let mut buckets: Vec<Vec<(T, T)>> = vec![Vec::new(); side * side];
        for _ in 0..samples {
            let r = rng.random::<f64>().sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let (x, y) = (r * theta.cos(), r * theta.sin());
            let bx = (((x + 1.0) * 0.5 * side as f64) as usize).min(side - 1);
            let by = (((y + 1.0) * 0.5 * side as f64) as usize).min(side - 1);
            buckets[by * side + bx].push((T::lit(x), T::lit(y)));
        }
        let m = T::from_usize_lossy(samples).recip();
        let mut grid = Self {
            x: Vec::with_capacity(samples),
            y: Vec::with_capacity(samples),
            mass: Vec::with_capacity(samples),
            spacing: (T::PI() * m).sqrt(),
            tiles: Vec::new(),
            integrator: Integrator::MonteCarlo { samples, seed },
        };
        for bucket in buckets {
            if bucket.is_empty() {
                continue;
            }
            let start = grid.x.len();
            let (mut x0, mut x1, mut y0, mut y1) = (T::infinity(), T::neg_infinity(), T::infinity(), T::neg_infinity());
            for (x, y) in bucket {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
                grid.x.push(x);
                grid.y.push(y);
                grid.mass.push(m);
            }
            grid.tiles.push(Tile { rect: Rect::new(x0, x1, y0, y1), start, end: grid.x.len() });
        }
        Ok(grid)
    }

    pub fn integrator(&self) -> Integrator {
        self.integrator
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Total mass of the nodes.
    pub fn total_mass(&self) -> T {
        self.mass.iter().copied().sum()
    }

    /// Linear size of one node's region.
    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Iterates `(x, y, mass)` over the nodes.
    pub fn nodes(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        self.x.iter().zip(&self.y).zip(&self.mass).map(|((&x, &y), &m)| (x, y, m))
    }

    /// `Σ_nodes mass · f(x, y)`.
    pub fn integrate(&self, f: impl Fn(T, T) -> T) -> T {
        self.nodes().map(|(x, y, m)| m * f(x, y)).sum()
    }
}

fn sub_pixel_centroid<T: Real>(rect: &Rect<T>) -> (T, T) {
    let s = T::from_usize_lossy(SUBDIVISION);
    let hx = (rect.x1 - rect.x0) / s;
    let hy = (rect.y1 - rect.y0) / s;
    let (mut a, mut mx, mut my) = (T::zero(), T::zero(), T::zero());
    for i in 0..SUBDIVISION {
        for j in 0..SUBDIVISION {
            let x0 = rect.x0 + hx * T::from_usize_lossy(i);
            let y0 = rect.y0 + hy * T::from_usize_lossy(j);
            let sub = Rect::new(x0, x0 + hx, y0, y0 + hy);
            let area = square_disk_area(&sub);
            if area > T::zero() {
                let (cx, cy) = (x0 + hx * T::lit(0.5), y0 + hy * T::lit(0.5));
                a += area;
                mx += area * cx;
                my += area * cy;
            }
        }
    }
    let (cx, cy) = (mx / a, my / a);
    let r = cx.hypot(cy);
    if r > T::one() {
        (cx / r, cy / r)
    } else {
        (cx, cy)
    }
}
