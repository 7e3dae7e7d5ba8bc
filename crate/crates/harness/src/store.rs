//! Append-only JSON-lines results store and its CSV summary.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use circlaw::Ensemble;
use serde::{Deserialize, Serialize};

use crate::config::Metric;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

/// One metric evaluated on one replica.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: u32,
    pub run_id: String,
    pub ensemble: Ensemble,
    pub n: usize,
    pub replica: usize,
    pub seed: u64,
    pub metric: Metric,
    pub status: Status,
    /// `None` exactly when the row failed.
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_ms: f64,
    /// Solver and eigensolver diagnostics, keyed by name.
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
}

pub type RecordKey = (String, usize, usize, Metric);

impl RunRecord {
    pub fn key(&self) -> RecordKey {
        (self.run_id.clone(), self.n, self.replica, self.metric)
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    /// Marks non-finite values as failures so that every persisted value is finite.
    pub fn sanitized(mut self) -> Self {
        if let Some(v) = self.value {
            if !v.is_finite() {
                self.value = None;
                self.status = Status::Failed;
                self.error = Some(format!("non-finite value {v}"));
            }
        }
        self.diagnostics.retain(|_, v| v.is_finite());
        self
    }
}

/// Where records are kept: a JSON-lines file, or memory only.
#[derive(Debug)]
pub enum ResultsStore {
    File(PathBuf),
    Memory(Vec<RunRecord>),
}

impl ResultsStore {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        ResultsStore::File(path.into())
    }

    pub fn memory() -> Self {
        ResultsStore::Memory(Vec::new())
    }

    pub fn load(&self) -> Result<Vec<RunRecord>> {
        match self {
            ResultsStore::Memory(v) => Ok(v.clone()),
            ResultsStore::File(path) => read_jsonl(path),
        }
    }

    pub fn completed(&self) -> Result<HashSet<RecordKey>> {
        Ok(self.load()?.iter().map(RunRecord::key).collect())
    }

    /// Opens the single writer through which all new records pass.
    pub fn writer(&mut self) -> Result<StoreWriter<'_>> {
        match self {
            ResultsStore::Memory(v) => Ok(StoreWriter::Memory(v)),
            ResultsStore::File(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                }
                let f = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&*path)
                    .with_context(|| format!("opening {}", path.display()))?;
                Ok(StoreWriter::File(BufWriter::new(f)))
            }
        }
    }
}

pub enum StoreWriter<'a> {
    File(BufWriter<File>),
    Memory(&'a mut Vec<RunRecord>),
}

impl StoreWriter<'_> {
    pub fn append(&mut self, record: &RunRecord) -> Result<()> {
        match self {
            StoreWriter::Memory(v) => v.push(record.clone()),
            StoreWriter::File(w) => {
                serde_json::to_writer(&mut *w, record)?;
                w.write_all(b"\n")?;
                w.flush()?;
            }
        }
        Ok(())
    }
}

pub fn read_jsonl(path: &Path) -> Result<Vec<RunRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: RunRecord =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: malformed record", path.display(), i + 1))?;
        if r.schema != SCHEMA_VERSION {
            bail!("{}:{}: schema {} (expected {SCHEMA_VERSION})", path.display(), i + 1, r.schema);
        }
        out.push(r);
    }
    Ok(out)
}

/// Per `(ensemble, n, metric)` mean and standard error over successful rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub ensemble: Ensemble,
    pub n: usize,
    pub metric: Metric,
    pub count: usize,
    pub failed: usize,
    pub mean: f64,
    pub std_err: f64,
}

#[allow(clippy::type_complexity)]
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(&str, usize, Metric), (Ensemble, Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let g = groups.entry((r.ensemble.name(), r.n, r.metric)).or_insert((r.ensemble, Vec::new(), 0));
        match r.value {
            Some(v) if r.is_ok() => g.1.push(v),
            _ => g.2 += 1,
        }
    }
    groups
        .into_iter()
        .map(|((_, n, metric), (ensemble, values, failed))| {
            let (mean, std_err) = mean_and_std_err(&values);
            SummaryRow { ensemble, n, metric, count: values.len(), failed, mean, std_err }
        })
        .collect()
}

/// Sample mean and standard error of the mean; the error is 0 for fewer than
/// two values and the mean is NaN for none.
pub fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

pub fn write_summary_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut out = String::from("ensemble,n,metric,count,failed,mean,std_err\n");
    for r in summarize(records) {
        out.push_str(&format!(
            "{},{},{},{},{},{:.12e},{:.12e}\n",
            r.ensemble.name(),
            r.n,
            r.metric,
            r.count,
            r.failed,
            r.mean,
            r.std_err
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
pub(crate) fn synthetic(metric: Metric, n: usize, replica: usize, value: f64) -> RunRecord {
    RunRecord {
        schema: SCHEMA_VERSION,
        run_id: "test".into(),
        ensemble: Ensemble::ComplexGinibre,
        n,
        replica,
        seed: 0,
        metric,
        status: Status::Ok,
        value: Some(value),
        error: None,
        wall_ms: 0.0,
        diagnostics: BTreeMap::new(),
    }
    .sanitized()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = ResultsStore::file(dir.path().join("sub/results.jsonl"));
        let mut a = synthetic(Metric::W1Sd, 16, 0, 0.1);
        a.diagnostics.insert("iterations".into(), 7.0);
        let b = synthetic(Metric::KolmogorovBall, 16, 1, 0.2);
        {
            let mut w = store.writer().unwrap();
            w.append(&a).unwrap();
            w.append(&b).unwrap();
        }
        assert_eq!(store.load().unwrap(), vec![a.clone(), b.clone()]);
        assert_eq!(store.completed().unwrap().len(), 2);
        assert!(store.completed().unwrap().contains(&a.key()));
    }

    #[test]
    fn rejects_foreign_schema_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        let mut r = synthetic(Metric::W1Sd, 4, 0, 1.0);
        r.schema = SCHEMA_VERSION + 1;
        fs::write(&p, serde_json::to_string(&r).unwrap() + "\n").unwrap();
        assert!(read_jsonl(&p).is_err());
        fs::write(&p, "{not json}\n").unwrap();
        assert!(read_jsonl(&p).is_err());
        assert!(read_jsonl(&dir.path().join("missing.jsonl")).unwrap().is_empty());
    }

    #[test]
    fn non_finite_values_become_failed_rows() {
        let r = synthetic(Metric::W1Sd, 4, 0, f64::NAN);
        assert_eq!(r.status, Status::Failed);
        assert_eq!(r.value, None);
        assert!(r.error.as_deref().unwrap().contains("NaN"));
        let r = synthetic(Metric::W1Sd, 4, 0, f64::INFINITY);
        assert!(!r.is_ok());
        assert_eq!(r.value, None);
    }

    #[test]
    fn summary_statistics() {
        let mut rows: Vec<RunRecord> = [1.0, 2.0, 3.0, 4.0].iter().enumerate().map(|(i, v)| synthetic(Metric::W1Sd, 8, i, *v)).collect();
        rows.push(synthetic(Metric::W1Sd, 8, 9, f64::NAN));
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].count, s[0].failed), (4, 1));
        assert_eq!(s[0].mean, 2.5);
        // sample variance 5/3, standard error sqrt(5/12)
        assert!((s[0].std_err - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_summary_csv(&rows, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ensemble,n,metric,count,failed,mean,std_err");
        assert!(lines[1].starts_with("complex_ginibre,8,w1_sd,4,1,2.5"));
    }
}
