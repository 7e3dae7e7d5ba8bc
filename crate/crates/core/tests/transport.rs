use circlaw::ensembles::{sample_iid_disk, sample_spectrum};
use circlaw::multiscale::{square_disk_area, Rect};
use circlaw::quadrature::gauss_legendre;
use circlaw::transport::*;
use circlaw::{derive_seed, Complex, Ensemble, MatrixEnsemble, SpectralSample};
use proptest::prelude::*;

type C = Complex<f64>;

fn points(p: &[(f64, f64)]) -> SpectralSample<f64> {
    SpectralSample::from_points(p.iter().map(|&(x, y)| C::new(x, y)).collect())
}

fn ginibre(n: usize, seed: u64) -> SpectralSample<f64> {
    sample_spectrum(MatrixEnsemble::new(Ensemble::ComplexGinibre, n).unwrap(), seed).unwrap().0
}

/// `∫ f dμ_∞` by Gauss–Legendre in the radius and the trapezoid rule in the angle.
fn polar_integral(f: impl Fn(f64, f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre::<f64>(64);
    let k = 512;
    let mut total = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let r = 0.5 * (xi + 1.0);
        let mut ring = 0.0;
        for a in 0..k {
            let t = std::f64::consts::TAU * a as f64 / k as f64;
            ring += f(r * t.cos(), r * t.sin());
        }
        total += 0.5 * wi * r * ring * std::f64::consts::TAU / k as f64;
    }
    total / std::f64::consts::PI
}

/// Successive shortest paths on the residual network, real-valued masses.
fn ssp_transport(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> f64 {
    let (n, m) = (supply.len(), demand.len());
    let eps = 1e-15;
    let mut x = vec![vec![0.0; m]; n];
    let (mut rs, mut rd) = (supply.to_vec(), demand.to_vec());
    loop {
        if rd.iter().all(|&d| d <= eps) || rs.iter().all(|&s| s <= eps) {
            break;
        }
        let mut dist = vec![f64::INFINITY; n + m];
        let mut pred = vec![usize::MAX; n + m];
        for i in 0..n {
            if rs[i] > eps {
                dist[i] = 0.0;
            }
        }
        for _ in 0..n + m {
            let mut changed = false;
            for i in 0..n {
                for j in 0..m {
                    if dist[i] + cost(i, j) < dist[n + j] - 1e-15 {
                        dist[n + j] = dist[i] + cost(i, j);
                        pred[n + j] = i;
                        changed = true;
                    }
                    if x[i][j] > eps && dist[n + j] - cost(i, j) < dist[i] - 1e-15 {
                        dist[i] = dist[n + j] - cost(i, j);
                        pred[i] = n + j;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let j = (0..m).filter(|&j| rd[j] > eps).min_by(|&a, &b| dist[n + a].total_cmp(&dist[n + b])).unwrap();
        // walk back to a supply with spare mass
        let mut path = vec![n + j];
        while pred[*path.last().unwrap()] != usize::MAX {
            path.push(pred[*path.last().unwrap()]);
        }
        let start = *path.last().unwrap();
        let mut amount = rs[start].min(rd[j]);
        for w in path.windows(2) {
            if w[0] < n {
                // w[0] is a supply reached from demand w[1] via a reverse arc
                amount = amount.min(x[w[0]][w[1] - n]);
            }
        }
        for w in path.windows(2) {
            if w[0] >= n {
                x[w[1]][w[0] - n] += amount;
            } else {
                x[w[0]][w[1] - n] -= amount;
            }
        }
        rs[start] -= amount;
        rd[j] -= amount;
    }
    (0..n).map(|i| (0..m).map(|j| x[i][j] * cost(i, j)).sum::<f64>()).sum()
}

fn quantized_disk(grid_m: usize) -> (Vec<(f64, f64)>, Vec<f64>) {
    let h = 2.0 / grid_m as f64;
    let mut nodes = Vec::new();
    let mut mass = Vec::new();
    for r in 0..grid_m {
        for c in 0..grid_m {
            let (x0, y0) = (-1.0 + h * c as f64, -1.0 + h * r as f64);
            let a = square_disk_area(&Rect::new(x0, x0 + h, y0, y0 + h));
            if a > 0.0 {
                nodes.push((x0 + h / 2.0, y0 + h / 2.0));
                mass.push(a / std::f64::consts::PI);
            }
        }
    }
    (nodes, mass)
}

#[test]
fn assign_cell_examples() {
    let s = points(&[(-0.5, 0.0), (0.5, 0.0)]);
    assert_eq!(assign_cell(C::new(-0.1, 0.0), &s, &[0.0, 0.0]).unwrap(), 0);
    assert_eq!(assign_cell(C::new(-0.1, 0.0), &s, &[0.0, 0.8]).unwrap(), 1);
    assert_eq!(assign_cell(C::new(0.0, 0.0), &s, &[0.0, 0.0]).unwrap(), 0);
    assert!(assign_cell(C::new(0.0, 0.0), &s, &[0.0]).is_err());
}

#[test]
fn cell_masses_examples() {
    let s = points(&[(0.0, 0.0)]);
    let (m, c) = cell_masses_and_costs(&s, &[0.3], 1024).unwrap();
    assert!((m[0] - 1.0).abs() < 1e-9);
    assert!((c[0] - 2.0 / 3.0).abs() < 1e-6, "{}", c[0]);

    let s = points(&[(-0.5, 0.0), (0.5, 0.0)]);
    let (m, _) = cell_masses_and_costs(&s, &[0.0, 0.0], 1024).unwrap();
    assert!((m[0] + m[1] - 1.0).abs() < 1e-9);
    assert!((m[0] - 0.5).abs() < 1e-6 && (m[1] - 0.5).abs() < 1e-6, "{m:?}");

    let s = ginibre(16, 3);
    let w: Vec<f64> = (0..16).map(|j| 0.01 * j as f64).collect();
    let (m, _) = cell_masses_and_costs(&s, &w, 1024).unwrap();
    assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(cell_masses_and_costs(&s, &w, 32).is_err());
}

#[test]
fn solve_dual_trivial_cases() {
    let s = points(&[(0.2, -0.1)]);
    let d = solve_dual(&s, 512, 1e-3, 50).unwrap();
    assert_eq!(d.weights, vec![0.0]);
    assert!((d.masses[0] - 1.0).abs() < 1e-9);
    assert!(d.converged);
    assert_eq!(d.iterations, 0);

    let s = points(&[(-0.5, 0.0), (0.5, 0.0)]);
    let tol = 1e-3 / 2.0;
    let d = solve_dual(&s, 1024, tol, 100).unwrap();
    assert!(d.converged);
    assert!(d.weights.iter().all(|w| w.abs() < 1e-6), "{:?}", d.weights);
    assert!(d.masses.iter().all(|m| (m - 0.5).abs() <= tol));
}

#[test]
fn solve_dual_matches_oracle_small_ginibre() {
    let s = ginibre(4, 21);
    let tol = 1e-3 / 4.0;
    let d = solve_dual(&s, 1024, tol, 200).unwrap();
    assert!(d.converged && d.mass_residual <= tol);
    let oracle = w1_discrete_oracle(&s, 200).unwrap();
    assert!((d.dual_value - oracle).abs() <= 0.01 * oracle, "{} vs {}", d.dual_value, oracle);
}

#[test]
fn w1_single_atom() {
    let r = w1_semidiscrete(&points(&[(0.0, 0.0)]), 1024, 1e-3).unwrap();
    assert!((r.w1 - 2.0 / 3.0).abs() < 1e-6, "{}", r.w1);

    let r = w1_semidiscrete(&points(&[(2.0, 0.0)]), 1024, 1e-3).unwrap();
    let exact = polar_integral(|x, y| (x - 2.0).hypot(y));
    assert!(r.w1 > 1.0 && r.w1 < 3.0);
    assert!((r.w1 - exact).abs() < 1e-4, "{} vs {exact}", r.w1);
}

#[test]
fn w1_respects_lower_bound_on_ginibre() {
    for (n, reps) in [(4usize, 3usize), (16, 3), (64, 2), (256, 1), (1024, 1)] {
        for k in 0..reps {
            let s = ginibre(n, derive_seed(5, n, k));
            let r = w1_semidiscrete(&s, 1024, 1e-3 / n as f64).unwrap();
            let bound = 1.0 / (3.0 * (n as f64).sqrt());
            assert!(r.w1 >= bound - r.tolerance(), "n={n}: {} < {bound}", r.w1);
            assert!(r.lower_certificate <= r.w1 + r.tolerance());
            assert!((r.dual_state.masses.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn monte_carlo_integrator_agrees_with_raster() {
    let s = ginibre(8, 2);
    let mc = QuadratureGrid::<f64>::new(Integrator::MonteCarlo { samples: 400_000, seed: 9 }).unwrap();
    let a = w1_semidiscrete_on(&mc, &s, &SolverOptions::for_size(8)).unwrap();
    let b = w1_semidiscrete(&s, 1024, 1e-3 / 8.0).unwrap();
    assert_eq!(a.integrator, Integrator::MonteCarlo { samples: 400_000, seed: 9 });
    assert!((a.w1 - b.w1).abs() < 0.01, "{} vs {}", a.w1, b.w1);
}

#[test]
fn single_precision_solve() {
    let s64 = ginibre(8, 4);
    let s32 = SpectralSample::new(
        s64.points.iter().map(|z| Complex::new(z.re as f32, z.im as f32)).collect(),
        s64.ensemble,
        s64.seed,
    );
    let a = w1_semidiscrete(&s32, 512, 1e-3 / 8.0).unwrap();
    let b = w1_semidiscrete(&s64, 512, 1e-3 / 8.0).unwrap();
    assert!((a.w1 as f64 - b.w1).abs() < 1e-3, "{} vs {}", a.w1, b.w1);
}

#[test]
fn oracle_examples() {
    let o = w1_discrete_oracle(&points(&[(0.0, 0.0)]), 128).unwrap();
    assert!((o - 2.0 / 3.0).abs() <= 2.0 / 128.0);

    let s = points(&[(-0.5, 0.0), (0.5, 0.0)]);
    let o = w1_discrete_oracle(&s, 128).unwrap();
    let sd = w1_semidiscrete(&s, 1024, 1e-3 / 2.0).unwrap().w1;
    assert!((o - sd).abs() <= 0.01 * sd + 2.0 / 128.0, "{o} vs {sd}");

    let base = points(&[(0.0, 0.0), (0.3, 0.4), (-0.6, -0.2)]);
    let moved = points(&[(0.1, 0.0), (0.3, 0.4), (-0.6, -0.2)]);
    let a = w1_discrete_oracle(&base, 64).unwrap();
    let b = w1_discrete_oracle(&moved, 64).unwrap();
    assert!((a - b).abs() <= 0.1 / 3.0 + 1e-6);

    assert!(w1_discrete_oracle(&ginibre(65, 1), 16).is_err());
    assert!(w1_discrete_oracle(&ginibre(4, 1), 257).is_err());
}

#[test]
fn oracle_matches_shortest_path_solver() {
    for (k, grid_m) in [4usize, 6, 8, 10].into_iter().enumerate() {
        for n in 1..=4 {
            let s = sample_iid_disk::<f64>(n, derive_seed(77, n, k)).unwrap();
            let (nodes, mass) = quantized_disk(grid_m);
            let supply = vec![1.0 / n as f64; n];
            for p in [1.0, 2.0, 3.0] {
                let exact = ssp_transport(&supply, &mass, |i, j| {
                    (s.points[i].re - nodes[j].0).hypot(s.points[i].im - nodes[j].1).powf(p)
                })
                .powf(1.0 / p);
                let got = wp_discrete_oracle(&s, grid_m, p).unwrap();
                assert!((got - exact).abs() < 1e-6, "grid {grid_m} n {n} p {p}: {got} vs {exact}");
            }
        }
    }
}

#[test]
fn oracle_agreement_on_ginibre() {
    for n in [4usize, 8, 16, 32] {
        for k in 0..2 {
            let s = ginibre(n, derive_seed(31, n, k));
            let sd = w1_semidiscrete(&s, 1024, 1e-3 / n as f64).unwrap();
            let o = w1_discrete_oracle(&s, 200).unwrap();
            assert!((sd.w1 - o).abs() <= 0.01 * sd.w1 + 2.0 / 200.0, "n={n}: {} vs {o}", sd.w1);
            assert!(sd.dual_state.converged);
        }
    }
}

#[test]
fn lipschitz_lower_bound() {
    let v = dual_lower_bound_paper(&points(&[(0.0, 0.0)])).unwrap();
    assert!((v - 2.0 / 3.0).abs() < 1e-5, "{v}");

    // 7 points with pairwise distance > 2/√7
    let mut p = vec![(0.0, 0.0)];
    for k in 0..6 {
        let t = std::f64::consts::TAU * k as f64 / 6.0;
        p.push((0.8 * t.cos(), 0.8 * t.sin()));
    }
    let s = points(&p);
    let v = dual_lower_bound_paper(&s).unwrap();
    assert!(v >= 1.0 / (3.0 * 7f64.sqrt()), "{v}");

    for n in [4usize, 16, 64] {
        let s = ginibre(n, 8);
        let lb = dual_lower_bound_paper(&s).unwrap();
        let r = w1_semidiscrete(&s, 1024, 1e-3 / n as f64).unwrap();
        assert!(lb <= r.w1 + r.tolerance(), "n={n}: {lb} > {}", r.w1);
    }
}

#[test]
fn regularization() {
    let s = ginibre(8, 12);
    assert_eq!(regularize_sample(&s, 0.0, 1).unwrap(), s);
    let r = 0.1;
    let d = regularize_sample(&s, r, 1).unwrap();
    for (a, b) in s.points.iter().zip(&d.points) {
        assert!(((a - b).norm() - r).abs() < 1e-12);
    }
    let a = w1_semidiscrete(&s, 1024, 1e-3 / 8.0).unwrap();
    let b = w1_semidiscrete(&d, 1024, 1e-3 / 8.0).unwrap();
    assert!((a.w1 - b.w1).abs() <= r + a.tolerance() + b.tolerance());
    assert!(regularize_sample(&s, -1.0, 1).is_err());
}

#[test]
fn tessellation_examples() {
    let t = tessellation_raster(&points(&[(0.3, 0.3)]), &[0.0], 64).unwrap();
    assert!(t.cells.iter().flatten().all(|&j| j == 0));
    assert_eq!(t.cells.iter().flatten().count(), t.counts(1)[0]);
    assert!(t.get(0, 0).is_none());

    let res = 128;
    let t = tessellation_raster(&points(&[(-0.5, 0.0), (0.5, 0.0)]), &[0.0, 0.0], res).unwrap();
    for row in 0..res {
        for col in 0..res {
            if let Some(j) = t.get(row, col) {
                let x = -1.0 + (col as f64 + 0.5) * 2.0 / res as f64;
                if x.abs() > 2.0 / res as f64 {
                    assert_eq!(j, u32::from(x > 0.0));
                }
            }
        }
    }

    let n = 8;
    let s = ginibre(n, 6);
    let d = solve_dual(&s, 1024, 1e-3 / n as f64, 200).unwrap();
    let res = 512;
    let t = tessellation_raster(&s, &d.weights, res).unwrap();
    let expected = std::f64::consts::PI * (res * res) as f64 / 4.0 / n as f64;
    for (j, c) in t.counts(n).into_iter().enumerate() {
        // one row of boundary pixels per unit of cell perimeter
        let slack = 8.0 * res as f64;
        assert!(c as f64 >= expected * (1.0 - 1e-3) - slack, "cell {j}: {c} of {expected}");
    }
}

#[test]
fn ascent_history_is_monotone() {
    for n in [3usize, 12, 40] {
        let s = ginibre(n, 17);
        let d = solve_dual(&s, 512, 1e-4 / n as f64, 200).unwrap();
        for w in d.history.windows(2) {
            let floor = f64::EPSILON * 1e3 * (1.0 + w[0].abs());
            assert!(w[1] >= w[0] - floor, "{} -> {}", w[0], w[1]);
        }
        assert!((d.weights.iter().sum::<f64>()).abs() < 1e-12);
    }
}

#[test]
fn outliers_and_coincident_atoms() {
    let s = points(&[(0.0, 0.0), (0.0, 0.0), (1.8, 0.0), (-0.4, 0.5)]);
    let r = w1_semidiscrete(&s, 1024, 1e-3 / 4.0).unwrap();
    assert!(r.dual_state.converged);
    assert_eq!(r.dual_state.weights[0], r.dual_state.weights[1]);
    assert!(r.dual_state.masses.iter().all(|m| (m - 0.25).abs() <= 1e-3 / 4.0));
    let o = w1_discrete_oracle(&s, 200).unwrap();
    assert!((r.w1 - o).abs() <= 0.01 * o + 0.01, "{} vs {o}", r.w1);
}

#[test]
fn cells_are_star_shaped() {
    let n = 16;
    let s = ginibre(n, 40);
    let d = solve_dual(&s, 1024, 1e-3 / n as f64, 200).unwrap();
    assert!(d.converged);
    for (j, l) in s.points.iter().enumerate() {
        if l.norm() >= 1.0 {
            continue;
        }
        for k in 0..32 {
            let t = std::f64::consts::TAU * (k as f64 + 0.5) / 32.0;
            let dir = C::new(t.cos(), t.sin());
            let mut inside = true;
            for step in 1..400 {
                let z = l + dir * (step as f64 * 0.005);
                if z.norm() > 1.0 {
                    break;
                }
                let mine = assign_cell(z, &s, &d.weights).unwrap() == j;
                assert!(inside || !mine, "cell {j} re-entered along ray {k}");
                inside &= mine;
            }
        }
    }
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() }
}

fn cloud(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.3f64..1.3, -1.3f64..1.3), 1..=max)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn shift_leaves_cells_unchanged(p in cloud(12), w in prop::collection::vec(-64i32..64, 12), c in -16i32..16) {
        let s = points(&p);
        let n = s.len();
        let w: Vec<f64> = w[..n].iter().map(|&k| k as f64 / 256.0).collect();
        let shifted: Vec<f64> = w.iter().map(|x| x + c as f64 / 8.0).collect();
        let grid = QuadratureGrid::<f64>::raster(64).unwrap();
        for (x, y, _) in grid.nodes() {
            let z = C::new(x, y);
            prop_assert_eq!(assign_cell(z, &s, &w).unwrap(), assign_cell(z, &s, &shifted).unwrap());
        }
        let a = dual_objective(&grid, &s, &w).unwrap();
        let b = dual_objective(&grid, &s, &shifted).unwrap();
        prop_assert!((a - b).abs() < 1e-13, "{} vs {}", a, b);
    }

    #[test]
    fn masses_partition_the_disk(p in cloud(20), w in prop::collection::vec(-0.5f64..0.5, 20)) {
        let s = points(&p);
        let (m, c) = cell_masses_and_costs(&s, &w[..s.len()], 128).unwrap();
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(m.iter().all(|&x| (0.0..=1.0 + 1e-12).contains(&x)));
        prop_assert!(c.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn weak_duality(p in cloud(16), w in prop::collection::vec(-1.0f64..1.0, 16)) {
        let s = points(&p);
        let grid_m = 48;
        let grid = QuadratureGrid::<f64>::raster(256).unwrap();
        let phi = dual_objective(&grid, &s, &w[..s.len()]).unwrap();
        let oracle = w1_discrete_oracle(&s, grid_m).unwrap();
        // both node measures lie within half a pixel diagonal of the disk measure
        let slack = 2f64.sqrt() / grid_m as f64 + 2f64.sqrt() / 256.0;
        prop_assert!(phi <= oracle + slack, "{} > {}", phi, oracle);
    }
}
