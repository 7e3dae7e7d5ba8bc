use circlaw::analytics::mean_ball_mass;
use circlaw::ensembles::{sample_ginibre_moduli, sample_iid_disk, sample_spectrum};
use circlaw::{derive_seed, Ensemble, MatrixEnsemble};

fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn iid_disk_moments() {
    let s = sample_iid_disk::<f64>(100_000, 5).unwrap();
    assert_eq!(s.ensemble, Ensemble::IidDisk);
    assert!(s.points.iter().all(|z| z.norm() <= 1.0));
    let m2 = s.points.iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e5;
    assert!((m2 - 0.5).abs() < 0.01, "{m2}");
    let half = s.points.iter().filter(|z| z.norm() < 0.5).count() as f64 / 1e5;
    assert!((half - 0.25).abs() < 0.01, "{half}");
    for seed in 0..200 {
        assert!(sample_iid_disk::<f64>(1, seed).unwrap().points[0].norm() <= 1.0);
    }
    assert!(sample_iid_disk::<f64>(0, 1).is_err());
}

#[test]
fn single_modulus_law() {
    let draws = 20_000;
    let mut m: Vec<f64> = (0..draws).map(|k| sample_ginibre_moduli::<f64>(1, derive_seed(1, 1, k)).unwrap()[0]).collect();
    m.sort_by(f64::total_cmp);
    let ks = m
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let f = 1.0 - (-r * r).exp();
            (f - i as f64 / draws as f64).abs().max((f - (i + 1) as f64 / draws as f64).abs())
        })
        .fold(0.0, f64::max);
    // 99.9% Kolmogorov quantile 1.95/√N
    assert!(ks < 1.95 / (draws as f64).sqrt(), "{ks}");
}

#[test]
fn moduli_sorted_and_deterministic() {
    let a = sample_ginibre_moduli::<f64>(100, 3).unwrap();
    assert!(a.windows(2).all(|w| w[0] <= w[1]) && a[0] >= 0.0);
    assert_eq!(a, sample_ginibre_moduli::<f64>(100, 3).unwrap());
    assert_ne!(a, sample_ginibre_moduli::<f64>(100, 4).unwrap());
    assert!(sample_ginibre_moduli::<f64>(0, 3).is_err());
}

#[test]
fn mean_ball_count_matches_closed_form() {
    let (n, rho, draws) = (64usize, 0.5f64, 10_000usize);
    let counts: Vec<f64> = (0..draws)
        .map(|k| sample_ginibre_moduli::<f64>(n, derive_seed(9, n, k)).unwrap().iter().filter(|&&r| r <= rho).count() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / draws as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let se = (var / draws as f64).sqrt();
    let expected = n as f64 * mean_ball_mass::<f64>(n, rho);
    assert!((mean - expected).abs() <= 3.0 * se, "{mean} vs {expected} (se {se})");
}

#[test]
fn radial_sampler_matches_eigenvalue_moduli() {
    let n = 64;
    let ens = MatrixEnsemble::new(Ensemble::ComplexGinibre, n).unwrap();
    let mut full = Vec::new();
    let mut fast = Vec::new();
    for k in 0..200 {
        let (s, _) = sample_spectrum::<f64>(ens, derive_seed(2, n, k)).unwrap();
        full.extend(s.points.iter().map(|z| z.norm()));
        fast.extend(sample_ginibre_moduli::<f64>(n, derive_seed(3, n, k)).unwrap());
    }
    let d = ks_two_sample(full, fast);
    assert!(d <= 0.05, "{d}");
}

#[test]
fn seeds_are_stable_and_distinct() {
    assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
    let mut seen = std::collections::HashSet::new();
    for n in 1..20 {
        for r in 0..50 {
            assert!(seen.insert(derive_seed(42, n, r)));
        }
    }
    let ens = MatrixEnsemble::new(Ensemble::RealRademacher, 12).unwrap();
    let a = sample_spectrum::<f64>(ens, 8).unwrap().0;
    let b = sample_spectrum::<f64>(ens, 8).unwrap().0;
    assert_eq!(a.points, b.points);
    assert_eq!(a.n, 12);
    assert!(MatrixEnsemble::new(Ensemble::IidDisk, 4).is_err());
    assert!(MatrixEnsemble::new(Ensemble::ComplexGinibre, 0).is_err());
}
