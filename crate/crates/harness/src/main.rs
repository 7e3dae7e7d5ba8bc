use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use circlaw::analytics::{mean_ball_mass, mean_esd_w1, pair_energy_constant, radial_defect};
use circlaw::transport::w1_semidiscrete;
use circlaw::{derive_seed, Ensemble, Sample, C64};
use circlaw_harness::acceptance::run_acceptance;
use circlaw_harness::figures::{emit_figures, FigureKind, FigureOptions};
use circlaw_harness::runner::{draw, records_of};
use circlaw_harness::store::write_summary_csv;
use circlaw_harness::{fit_rate, run_experiment, ExperimentConfig, ResultsStore};
use clap::{Parser, Subcommand};

/// Random matrix spectra against the circular law.
///
/// Every global flag can also be set through the environment variable
/// `CIRCLAW_<FLAG>`, e.g. `CIRCLAW_WORKERS=4`.
#[derive(Parser, Debug)]
#[command(name = "circlaw", version)]
struct Cli {
    /// JSON experiment config; missing keys take their defaults.
    #[arg(long, global = true, env = "CIRCLAW_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, global = true, env = "CIRCLAW_SEED")]
    seed: Option<u64>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, env = "CIRCLAW_WORKERS", default_value_t = 0)]
    workers: usize,
    #[arg(long, global = true, env = "CIRCLAW_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Overrides `params.resolution`.
    #[arg(long, global = true, env = "CIRCLAW_RESOLUTION")]
    resolution: Option<usize>,
    /// Overrides `params.kappa`.
    #[arg(long, global = true, env = "CIRCLAW_KAPPA")]
    kappa: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print one spectrum as CSV.
    Sample {
        #[arg(long)]
        ensemble: Option<Ensemble>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        replica: usize,
    },
    /// Solve one semi-discrete transport problem and print it as JSON.
    W1 {
        #[arg(long)]
        ensemble: Option<Ensemble>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        replica: usize,
        /// CSV of `re,im` rows to use instead of a sampled spectrum.
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Run the configured experiment and fit rates of every metric.
    Rates,
    /// Write figures into the output directory.
    Figures {
        #[arg(long, value_parser = parse_kind)]
        kind: FigureKind,
        #[arg(long)]
        ensemble: Option<Ensemble>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
    },
    /// Tabulate closed-form Ginibre quantities.
    Analytics {
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128,256,512,1024")]
        sizes: Vec<usize>,
    },
    /// Run the acceptance suite; exits nonzero if any criterion fails.
    Validate,
}

fn parse_kind(s: &str) -> Result<FigureKind> {
    s.parse()
}

impl Cli {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            c.master_seed = s;
        }
        if let Some(r) = self.resolution {
            c.params.resolution = r;
        }
        if let Some(k) = self.kappa {
            c.params.kappa = k;
        }
        c.validate()?;
        Ok(c)
    }
}

fn read_points(path: &Path) -> Result<Sample> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("re") {
            continue;
        }
        let mut it = line.split(',').map(|f| f.trim().parse::<f64>());
        match (it.next(), it.next()) {
            (Some(Ok(re)), Some(Ok(im))) => points.push(C64::new(re, im)),
            _ => bail!("{}:{}: expected `re,im`", path.display(), i + 1),
        }
    }
    Ok(Sample::from_points(points))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = cli.experiment()?;
    match &cli.command {
        Command::Sample { ensemble, n, replica } => {
            let e = ensemble.unwrap_or(config.ensemble);
            let seed = derive_seed(config.master_seed, *n, *replica);
            let d = draw(e, *n, seed)?;
            println!("# ensemble={e} n={n} seed={seed}");
            if let Some(r) = d.diagnostics.get("max_residual") {
                println!("# max_residual={r:e}");
            }
            println!("re,im");
            for z in &d.sample.points {
                println!("{:.17e},{:.17e}", z.re, z.im);
            }
        }
        Command::W1 { ensemble, n, replica, points } => {
            let sample = match (points, n) {
                (Some(p), _) => read_points(p)?,
                (None, Some(n)) => {
                    let e = ensemble.unwrap_or(config.ensemble);
                    draw(e, *n, derive_seed(config.master_seed, *n, *replica))?.sample
                }
                (None, None) => bail!("either --n or --points is required"),
            };
            let tol = config.params.tol_mass / sample.len() as f64;
            let t = w1_semidiscrete(&sample, config.params.resolution, tol)?;
            let out = serde_json::json!({
                "n": sample.len(),
                "seed": sample.seed,
                "w1": t.w1,
                "tolerance": t.tolerance(),
                "lower_certificate": t.lower_certificate,
                "result": t,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Rates => {
            fs::create_dir_all(&cli.out_dir)?;
            let mut store = ResultsStore::file(cli.out_dir.join("results.jsonl"));
            let fresh = run_experiment(&config, &mut store, cli.workers)?;
            let failed = fresh.iter().filter(|r| !r.is_ok()).count();
            eprintln!("{} new records ({failed} failed)", fresh.len());
            let records = records_of(&config, &store)?;
            write_summary_csv(&store.load()?, &cli.out_dir.join("summary.csv"))?;
            let mut fits = serde_json::Map::new();
            for m in &config.metrics {
                match fit_rate(&records, *m) {
                    Ok(f) => {
                        println!("{m}: slope {:.4} intercept {:.4} R2 {:.4}", f.slope, f.intercept, f.r_squared);
                        fits.insert(m.to_string(), serde_json::to_value(f)?);
                    }
                    Err(e) => println!("{m}: no fit ({e})"),
                }
            }
            fs::write(cli.out_dir.join("fits.json"), serde_json::to_string_pretty(&fits)?)?;
        }
        Command::Figures { kind, ensemble, n, replicas } => {
            let e = ensemble.unwrap_or(config.ensemble);
            let samples = (0..*replicas)
                .map(|r| Ok(draw(e, *n, derive_seed(config.master_seed, *n, r))?.sample))
                .collect::<Result<Vec<_>>>()?;
            let options = FigureOptions { resolution: config.params.resolution, ..FigureOptions::default() };
            for p in emit_figures(*kind, &samples, &options, &cli.out_dir)? {
                println!("{}", p.display());
            }
        }
        Command::Analytics { sizes } => {
            let kappa = config.params.kappa;
            println!("n,mean_esd_w1,two_n_mean_esd_w1,radial_defect_at_1,mean_ball_mass_half,pair_energy_constant");
            for &n in sizes {
                let w = mean_esd_w1::<f64>(n)?;
                println!(
                    "{n},{w:.12e},{:.8},{:.8},{:.8},{:.8}",
                    2.0 * n as f64 * w,
                    radial_defect::<f64>(n, 1.0),
                    mean_ball_mass::<f64>(n, 0.5),
                    pair_energy_constant(kappa)
                );
            }
        }
        Command::Validate => {
            let report = run_acceptance(cli.workers, |row| println!("{row}"));
            let failures = report.failures();
            println!("{}/{} criteria passed", report.rows.len() - failures.len(), report.rows.len());
            if !failures.is_empty() {
                eprintln!("failed criteria: {failures:?}");
                std::process::exit(1);
            }
        }
    }
    Ok(())
}
