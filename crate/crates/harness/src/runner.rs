//! Seeded experiment runs.

use std::collections::{BTreeMap, HashSet};
use std::sync::mpsc;
use std::time::Instant;

use anyhow::{Context, Result};
use circlaw::analytics::{mean_esd_w1, pair_energy, potential_gap, CutoffParams};
use circlaw::ensembles::{sample_iid_disk, sample_spectrum};
use circlaw::multiscale::{d_p, kolmogorov_ball};
use circlaw::transport::{dual_lower_bound_on, w1_discrete_oracle, w1_semidiscrete_on, QuadratureGrid, SolverOptions};
use circlaw::{derive_seed, Ensemble, MatrixEnsemble, Sample};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Metric, SolverParams};
use crate::store::{ResultsStore, RunRecord, Status, SCHEMA_VERSION};

/// Offset of the seed stream used for the second sample of a pair.
const PAIR_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

type Diagnostics = BTreeMap<String, f64>;

/// Identifier of everything that determines a record's value apart from
/// `(n, replica, metric)`: ensemble, master seed and solver parameters.
pub fn run_id(config: &ExperimentConfig) -> String {
    let key = serde_json::json!({
        "ensemble": config.ensemble,
        "master_seed": config.master_seed,
        "params": config.params,
    });
    let digest = Sha256::digest(key.to_string().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// A drawn sample with the eigensolver diagnostics that came with it.
pub struct Drawn {
    pub sample: Sample,
    pub diagnostics: Diagnostics,
}

pub fn draw(ensemble: Ensemble, n: usize, seed: u64) -> Result<Drawn> {
    let mut diagnostics = Diagnostics::new();
    let sample = if ensemble == Ensemble::IidDisk {
        sample_iid_disk::<f64>(n, seed)?
    } else {
        let (s, res) = sample_spectrum::<f64>(MatrixEnsemble::new(ensemble, n)?, seed)?;
        diagnostics.insert("max_residual".into(), res.max_residual);
        diagnostics.insert("qr_sweeps".into(), res.iterations as f64);
        s
    };
    Ok(Drawn { sample, diagnostics })
}

/// Evaluates one metric; `grid` must be present for the transport metrics.
pub fn evaluate(
    metric: Metric,
    drawn: &Drawn,
    partner_seed: u64,
    params: &SolverParams,
    grid: Option<&QuadratureGrid<f64>>,
) -> Result<(f64, Diagnostics)> {
    let sample = &drawn.sample;
    let n = sample.len();
    let mut diag = Diagnostics::new();
    let value = match metric {
        Metric::W1Sd => {
            let grid = grid.context("transport metric without a quadrature grid")?;
            let options = SolverOptions { tol_mass: params.tol_mass / n as f64, max_iters: params.max_iters };
            let t = w1_semidiscrete_on(grid, sample, &options)?;
            diag.insert("iterations".into(), t.dual_state.iterations as f64);
            diag.insert("converged".into(), if t.dual_state.converged { 1.0 } else { 0.0 });
            diag.insert("mass_residual".into(), t.dual_state.mass_residual);
            diag.insert("mass_total".into(), t.dual_state.masses.iter().sum());
            diag.insert("dual_value".into(), t.dual_state.dual_value);
            diag.insert("lower_certificate".into(), t.lower_certificate);
            diag.insert("tolerance".into(), t.tolerance());
            t.w1
        }
        Metric::W1Oracle => w1_discrete_oracle(sample, params.oracle_grid)?,
        Metric::KolmogorovBall => kolmogorov_ball(sample),
        Metric::DP => {
            let r = d_p(sample, params.p)?;
            diag.insert("w_p_upper".into(), r.w_p_upper);
            diag.insert("d_tilde_p".into(), r.d_tilde_p);
            r.d_p
        }
        Metric::PotentialGap => {
            let r = CutoffParams::<f64>::inverse_n(n)?.r;
            diag.insert("r".into(), r);
            potential_gap(sample, r, r, params.r_loc)?
        }
        Metric::PairEnergy => {
            let partner = draw(sample.ensemble, n, partner_seed)?;
            if let Some(res) = partner.diagnostics.get("max_residual") {
                diag.insert("partner_max_residual".into(), *res);
            }
            let e = pair_energy(sample, &partner.sample, params.kappa)?;
            diag.insert("n_times_value".into(), n as f64 * e);
            e
        }
        Metric::MeanEsdW1 => mean_esd_w1::<f64>(n)?,
        Metric::LowerBound => {
            let grid = grid.context("transport metric without a quadrature grid")?;
            dual_lower_bound_on(grid, sample)?
        }
    };
    Ok((value, diag))
}

fn needs_grid(metrics: &[Metric]) -> bool {
    metrics.iter().any(|m| matches!(m, Metric::W1Sd | Metric::LowerBound))
}

/// Runs every `(n, replica, metric)` of `config` not already in `store`,
/// appending the new records through a single writer. Returns the new
/// records ordered by `(n, replica, metric)`.
pub fn run_experiment(config: &ExperimentConfig, store: &mut ResultsStore, workers: usize) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let id = run_id(config);
    let done = store.completed()?;
    let mut metrics = config.metrics.clone();
    metrics.sort();
    metrics.dedup();
    let tasks: Vec<(usize, usize, Vec<Metric>)> = config
        .sizes
        .iter()
        .flat_map(|&n| (0..config.replicas).map(move |r| (n, r)))
        .filter_map(|(n, r)| {
            let todo: Vec<Metric> =
                metrics.iter().copied().filter(|m| !done.contains(&(id.clone(), n, r, *m))).collect();
            (!todo.is_empty()).then_some((n, r, todo))
        })
        .collect();
    if tasks.is_empty() {
        return Ok(Vec::new());
    }
    let grid = if tasks.iter().any(|t| needs_grid(&t.2)) {
        Some(QuadratureGrid::<f64>::raster(config.params.resolution)?)
    } else {
        None
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let (tx, rx) = mpsc::channel::<Vec<RunRecord>>();
    let mut writer = store.writer()?;
    let mut fresh = Vec::new();
    let mut write_result = Ok(());
    std::thread::scope(|scope| {
        let id = &id;
        let grid = grid.as_ref();
        scope.spawn(move || {
            pool.install(|| {
                tasks.par_iter().for_each_with(tx, |tx, (n, r, todo)| {
                    let rows = run_replica(config, id, *n, *r, todo, grid);
                    // the receiver only disappears if the writer failed
                    let _ = tx.send(rows);
                });
            });
        });
        for rows in rx {
            for row in rows {
                if write_result.is_ok() {
                    write_result = writer.append(&row);
                }
                fresh.push(row);
            }
        }
    });
    write_result?;
    fresh.sort_by_key(|r| (r.n, r.replica, r.metric));
    Ok(fresh)
}

fn run_replica(
    config: &ExperimentConfig,
    id: &str,
    n: usize,
    replica: usize,
    metrics: &[Metric],
    grid: Option<&QuadratureGrid<f64>>,
) -> Vec<RunRecord> {
    let seed = derive_seed(config.master_seed, n, replica);
    let partner_seed = derive_seed(config.master_seed ^ PAIR_STREAM, n, replica);
    let row = |metric: Metric, outcome: Result<(f64, Diagnostics)>, wall_ms: f64, base: &Diagnostics| {
        let (status, value, error, mut diagnostics) = match outcome {
            Ok((v, d)) => (Status::Ok, Some(v), None, d),
            Err(e) => (Status::Failed, None, Some(format!("{e:#}")), Diagnostics::new()),
        };
        diagnostics.extend(base.iter().map(|(k, v)| (k.clone(), *v)));
        RunRecord {
            schema: SCHEMA_VERSION,
            run_id: id.to_string(),
            ensemble: config.ensemble,
            n,
            replica,
            seed,
            metric,
            status,
            value,
            error,
            wall_ms,
            diagnostics,
        }
        .sanitized()
    };
    let t0 = Instant::now();
    let drawn = match draw(config.ensemble, n, seed) {
        Ok(d) => d,
        Err(e) => {
            let msg = format!("sampling failed: {e:#}");
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            return metrics.iter().map(|&m| row(m, Err(anyhow::anyhow!(msg.clone())), ms, &Diagnostics::new())).collect();
        }
    };
    let mut base = drawn.diagnostics.clone();
    base.insert("sample_ms".into(), t0.elapsed().as_secs_f64() * 1e3);
    metrics
        .iter()
        .map(|&m| {
            let t = Instant::now();
            let out = evaluate(m, &drawn, partner_seed, &config.params, grid);
            row(m, out, t.elapsed().as_secs_f64() * 1e3, &base)
        })
        .collect()
}

/// Successful values of `metric`, grouped by `n`.
pub fn values_by_size(records: &[RunRecord], metric: Metric) -> BTreeMap<usize, Vec<f64>> {
    let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.metric == metric && r.is_ok()) {
        if let Some(v) = r.value {
            out.entry(r.n).or_default().push(v);
        }
    }
    out
}

/// Records of `store` belonging to the run of `config`.
pub fn records_of(config: &ExperimentConfig, store: &ResultsStore) -> Result<Vec<RunRecord>> {
    let id = run_id(config);
    let sizes: HashSet<usize> = config.sizes.iter().copied().collect();
    Ok(store
        .load()?
        .into_iter()
        .filter(|r| r.run_id == id && sizes.contains(&r.n) && r.replica < config.replicas && config.metrics.contains(&r.metric))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(sizes: &[usize], replicas: usize, metrics: &[Metric]) -> ExperimentConfig {
        ExperimentConfig {
            sizes: sizes.to_vec(),
            replicas,
            metrics: metrics.to_vec(),
            master_seed: 99,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn single_record() {
        let c = config(&[4], 1, &[Metric::W1Sd]);
        let rows = run_experiment(&c, &mut ResultsStore::memory(), 1).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert!(r.is_ok());
        assert_eq!((r.n, r.replica, r.seed), (4, 0, derive_seed(99, 4, 0)));
        assert_eq!(r.run_id, run_id(&c));
        assert!(r.diagnostics["max_residual"] <= 1e-8);
        assert!((r.diagnostics["mass_total"] - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn reruns_are_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.jsonl");
        let c = config(&[4, 8], 2, &[Metric::W1Sd, Metric::KolmogorovBall]);
        let mut store = ResultsStore::file(&path);
        let first = run_experiment(&c, &mut store, 2).unwrap();
        assert_eq!(first.len(), 8);
        let bytes = std::fs::read(&path).unwrap();
        assert!(run_experiment(&c, &mut store, 2).unwrap().is_empty());
        assert_eq!(std::fs::read(&path).unwrap(), bytes);

        // one more replica computes only the new keys
        let more = ExperimentConfig { replicas: 3, ..c.clone() };
        let added = run_experiment(&more, &mut store, 1).unwrap();
        assert_eq!(added.len(), 4);
        assert!(added.iter().all(|r| r.replica == 2));
        assert_eq!(records_of(&more, &store).unwrap().len(), 12);
        assert_eq!(records_of(&c, &store).unwrap().len(), 8);

        // a fresh store with another worker count reproduces the values
        let again = run_experiment(&c, &mut ResultsStore::memory(), 1).unwrap();
        let v = |rows: &[RunRecord]| rows.iter().map(|r| (r.key(), r.value)).collect::<Vec<_>>();
        assert_eq!(v(&again), v(&first));

        // other parameters give another run id
        let mut other = c.clone();
        other.params.resolution = 512;
        assert_ne!(run_id(&other), run_id(&c));
        assert_eq!(run_experiment(&other, &mut store, 1).unwrap().len(), 8);
    }

    #[test]
    fn failures_are_recorded() {
        // the exact oracle refuses more than 64 atoms
        let c = config(&[4, 80], 1, &[Metric::W1Oracle, Metric::KolmogorovBall]);
        let rows = run_experiment(&c, &mut ResultsStore::memory(), 1).unwrap();
        assert_eq!(rows.len(), 4);
        let failed: Vec<&RunRecord> = rows.iter().filter(|r| !r.is_ok()).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!((failed[0].n, failed[0].metric), (80, Metric::W1Oracle));
        assert!(failed[0].value.is_none() && failed[0].error.is_some());
        assert!(rows.iter().filter(|r| r.is_ok()).all(|r| r.value.unwrap().is_finite()));
    }

    #[test]
    fn every_metric_evaluates() {
        let mut c = config(&[8], 1, &Metric::ALL);
        c.params.resolution = 256;
        c.params.oracle_grid = 64;
        let rows = run_experiment(&c, &mut ResultsStore::memory(), 1).unwrap();
        assert_eq!(rows.len(), Metric::ALL.len());
        for r in &rows {
            assert!(r.is_ok(), "{:?}", r.error);
        }
        let get = |m: Metric| rows.iter().find(|r| r.metric == m).unwrap();
        assert_eq!(get(Metric::MeanEsdW1).value.unwrap(), mean_esd_w1::<f64>(8).unwrap());
        assert!(get(Metric::LowerBound).value.unwrap() <= get(Metric::W1Sd).value.unwrap());
        assert_eq!(get(Metric::PotentialGap).diagnostics["r"], 0.125);
        assert!(get(Metric::PairEnergy).diagnostics.contains_key("partner_max_residual"));
    }

    #[test]
    fn iid_points_have_no_eigensolver() {
        let mut c = config(&[16], 2, &[Metric::KolmogorovBall]);
        c.ensemble = Ensemble::IidDisk;
        let rows = run_experiment(&c, &mut ResultsStore::memory(), 1).unwrap();
        assert!(rows.iter().all(|r| r.is_ok() && !r.diagnostics.contains_key("max_residual")));
    }

    #[test]
    fn ginibre_w1_within_bounds() {
        let c = config(&[16, 64, 256], 20, &[Metric::W1Sd]);
        let rows = run_experiment(&c, &mut ResultsStore::memory(), 0).unwrap();
        assert_eq!(rows.len(), 60);
        for r in &rows {
            let s = (r.n as f64).sqrt();
            let v = r.value.unwrap();
            assert!(v > 1.0 / (3.0 * s) && v < 4.0 / s, "n={} value {v}", r.n);
        }
    }
}
