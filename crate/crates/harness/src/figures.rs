//! SVG and CSV renderings of samples, transport cells and potentials.
//!
//! All numbers are written with fixed precision and every loop runs in a
//! fixed order, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use circlaw::analytics::{u_cutoff, u_empirical, u_infinity};
use circlaw::transport::{tessellation_raster, w1_semidiscrete, Tessellation};
use circlaw::{Sample, C64};

const CANVAS: f64 = 512.0;
/// Half-width of the plotted square in data units.
const VIEW: f64 = 1.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureKind {
    Scatter,
    Tessellation,
    PotentialSurface,
}

impl FromStr for FigureKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "scatter" => FigureKind::Scatter,
            "tessellation" => FigureKind::Tessellation,
            "potential_surface" => FigureKind::PotentialSurface,
            _ => bail!("unknown figure kind `{s}`"),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FigureOptions {
    /// Quadrature resolution of the transport solve behind a tessellation.
    pub resolution: usize,
    /// Pixels per side of the tessellation raster.
    pub raster: usize,
    /// Nodes per side of the potential grid.
    pub surface_nodes: usize,
    /// Half-width of the potential grid.
    pub surface_extent: f64,
    /// Cutoff radius of `U_n^r`; `None` means `1/n`.
    pub cutoff: Option<f64>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self { resolution: 512, raster: 256, surface_nodes: 121, surface_extent: 1.5, cutoff: None }
    }
}

fn to_canvas(v: f64, view: f64) -> f64 {
    (v + view) / (2.0 * view) * CANVAS
}

fn svg_open(out: &mut String) {
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{c}\" height=\"{c}\" viewBox=\"0 0 {c} {c}\">",
        c = CANVAS
    );
    let _ = writeln!(out, "<rect width=\"{c}\" height=\"{c}\" fill=\"#ffffff\"/>", c = CANVAS);
}

fn unit_circle(out: &mut String, view: f64) {
    let _ = writeln!(
        out,
        "<circle cx=\"{0:.3}\" cy=\"{0:.3}\" r=\"{1:.3}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>",
        CANVAS / 2.0,
        CANVAS / (2.0 * view)
    );
}

/// Points of every sample over the unit circle; `y` points up.
pub fn scatter_svg(samples: &[Sample]) -> String {
    let mut out = String::new();
    svg_open(&mut out);
    unit_circle(&mut out, VIEW);
    out.push_str("<g fill=\"#1f4e99\">\n");
    for s in samples {
        for z in &s.points {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"1.5\"/>",
                to_canvas(z.re, VIEW),
                to_canvas(-z.im, VIEW)
            );
        }
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// Colour of cell `j`: hues spaced by the golden angle.
pub fn cell_color(j: u32) -> String {
    let h = (j as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let (s, l) = (0.55, if j.is_multiple_of(2) { 0.55 } else { 0.7 });
    let c = (1.0 - (2.0 * l - 1.0f64).abs()) * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let byte = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    format!("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b))
}

/// Raster of the cells, one rectangle per horizontal run of a cell.
pub fn tessellation_svg(t: &Tessellation) -> String {
    let mut out = String::new();
    svg_open(&mut out);
    let px = CANVAS / (2.0 * VIEW) * 2.0 / t.resolution as f64;
    let origin = CANVAS / 2.0 - CANVAS / (2.0 * VIEW);
    for row in 0..t.resolution {
        let mut col = 0;
        while col < t.resolution {
            let Some(j) = t.get(row, col) else {
                col += 1;
                continue;
            };
            let start = col;
            while col < t.resolution && t.get(row, col) == Some(j) {
                col += 1;
            }
            let _ = writeln!(
                out,
                "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{}\"/>",
                origin + start as f64 * px,
                origin + row as f64 * px,
                (col - start) as f64 * px,
                px,
                cell_color(j)
            );
        }
    }
    unit_circle(&mut out, VIEW);
    out.push_str("</svg>\n");
    out
}

/// `U_n`, `U_n^r` and `U_∞` on a square grid, row-major with `y` increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSurface {
    pub coords: Vec<f64>,
    pub r: f64,
    pub u_n: Vec<f64>,
    pub u_n_r: Vec<f64>,
    pub u_inf: Vec<f64>,
}

impl PotentialSurface {
    pub fn new(sample: &Sample, r: f64, extent: f64, nodes: usize) -> Result<Self> {
        ensure!(nodes >= 2, "at least two nodes per side");
        ensure!(extent > 0.0 && r > 0.0, "extent and cutoff must be positive");
        let coords: Vec<f64> =
            (0..nodes).map(|i| -extent + 2.0 * extent * i as f64 / (nodes - 1) as f64).collect();
        let zs: Vec<C64> = coords.iter().flat_map(|&y| coords.iter().map(move |&x| C64::new(x, y))).collect();
        Ok(Self {
            u_n: zs.iter().map(|&z| u_empirical(sample, z)).collect(),
            u_n_r: zs.iter().map(|&z| u_cutoff(sample, r, z)).collect(),
            u_inf: zs.iter().map(|&z| u_infinity(z)).collect(),
            coords,
            r,
        })
    }

    pub fn nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn point(&self, k: usize) -> C64 {
        let m = self.nodes();
        C64::new(self.coords[k % m], self.coords[k / m])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,u_n,u_n_r,u_inf\n");
        for k in 0..self.u_n.len() {
            let z = self.point(k);
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.12e},{:.12e},{:.12e}",
                z.re, z.im, self.u_n[k], self.u_n_r[k], self.u_inf[k]
            );
        }
        out
    }

    /// Contours of `U_n^r` (solid) and `U_∞` (dashed) at common levels.
    pub fn to_svg(&self, levels: usize) -> String {
        let lo = self.u_n_r.iter().chain(&self.u_inf).copied().fold(f64::INFINITY, f64::min);
        let hi = self.u_n_r.iter().chain(&self.u_inf).copied().fold(f64::NEG_INFINITY, f64::max);
        let extent = self.coords[self.nodes() - 1];
        let mut out = String::new();
        svg_open(&mut out);
        unit_circle(&mut out, extent);
        for (field, style) in [
            (&self.u_inf, "stroke=\"#999999\" stroke-dasharray=\"4 3\""),
            (&self.u_n_r, "stroke=\"#b22222\""),
        ] {
            for l in 1..=levels {
                let level = lo + (hi - lo) * l as f64 / (levels + 1) as f64;
                let d = self.contour_path(field, level, extent);
                if !d.is_empty() {
                    let _ = writeln!(out, "<path d=\"{d}\" fill=\"none\" {style} stroke-width=\"1\"/>");
                }
            }
        }
        out.push_str("</svg>\n");
        out
    }

    /// Marching squares; saddles are split along the first pairing.
    fn contour_path(&self, field: &[f64], level: f64, extent: f64) -> String {
        let m = self.nodes();
        let c = &self.coords;
        let mut d = String::new();
        for i in 0..m - 1 {
            for j in 0..m - 1 {
                // corners counterclockwise from (x_j, y_i)
                let idx = [i * m + j, i * m + j + 1, (i + 1) * m + j + 1, (i + 1) * m + j];
                let pos = [(c[j], c[i]), (c[j + 1], c[i]), (c[j + 1], c[i + 1]), (c[j], c[i + 1])];
                let v: Vec<f64> = idx.iter().map(|&k| field[k]).collect();
                let mut crossings = Vec::with_capacity(4);
                for e in 0..4 {
                    let (a, b) = (e, (e + 1) % 4);
                    if (v[a] < level) != (v[b] < level) {
                        let t = (level - v[a]) / (v[b] - v[a]);
                        crossings.push((
                            pos[a].0 + t * (pos[b].0 - pos[a].0),
                            pos[a].1 + t * (pos[b].1 - pos[a].1),
                        ));
                    }
                }
                for seg in crossings.chunks_exact(2) {
                    let _ = write!(
                        d,
                        "M{:.2} {:.2}L{:.2} {:.2}",
                        to_canvas(seg[0].0, extent),
                        to_canvas(-seg[0].1, extent),
                        to_canvas(seg[1].0, extent),
                        to_canvas(-seg[1].1, extent)
                    );
                }
            }
        }
        d
    }
}

fn write(path: &Path, contents: &str) -> Result<PathBuf> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_path_buf())
}

/// Writes the files of one figure kind into `dir`. `scatter` overlays all
/// samples; the other kinds use the first.
pub fn emit_figures(kind: FigureKind, samples: &[Sample], options: &FigureOptions, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure!(!samples.is_empty(), "no samples to draw");
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let first = &samples[0];
    match kind {
        FigureKind::Scatter => Ok(vec![write(&dir.join("scatter.svg"), &scatter_svg(samples))?]),
        FigureKind::Tessellation => {
            let tol = 1e-3 / first.len() as f64;
            let t = w1_semidiscrete(first, options.resolution, tol)?;
            let raster = tessellation_raster(first, &t.dual_state.weights, options.raster)?;
            Ok(vec![write(&dir.join("tessellation.svg"), &tessellation_svg(&raster))?])
        }
        FigureKind::PotentialSurface => {
            let r = options.cutoff.unwrap_or(1.0 / first.len() as f64);
            let s = PotentialSurface::new(first, r, options.surface_extent, options.surface_nodes)?;
            Ok(vec![
                write(&dir.join("potential_surface.csv"), &s.to_csv())?,
                write(&dir.join("potential_surface.svg"), &s.to_svg(16))?,
            ])
        }
    }
}
