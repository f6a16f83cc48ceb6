use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::rl::IterationMetrics;

/// Two-sided confidence level of the reported interval.
pub const CONFIDENCE: f64 = 0.90;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub iteration: usize,
    pub env_steps: usize,
    /// Number of seeds with a finite return at this iteration.
    pub n: usize,
    pub mean_return: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub half_width: f64,
    /// Set when fewer than two seeds contribute, so the interval collapses.
    pub degenerate: bool,
}

pub fn read_metrics(path: &Path) -> Result<Vec<IterationMetrics>> {
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader.deserialize().map(|r| r.map_err(csv_err)).collect()
}

/// Half-width of the two-sided t-interval for a sample of size `n` with
/// sample standard deviation `s`.
pub fn t_half_width(s: f64, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + CONFIDENCE / 2.0);
    t * s / (n as f64).sqrt()
}

/// Cross-seed mean return with a t-interval per iteration.
pub fn summarize_runs(runs: &[Vec<IterationMetrics>]) -> Result<Vec<SummaryRow>> {
    let first = runs.first().ok_or_else(|| Error::Alignment("no runs to summarize".into()))?;
    for (k, r) in runs.iter().enumerate() {
        let same = r.len() == first.len()
            && r
                .iter()
                .zip(first)
                .all(|(a, b)| a.iteration == b.iteration && a.env_steps == b.env_steps);
        if !same {
            return Err(Error::Alignment(format!("run {} has a different iteration grid than run 0", k)));
        }
    }
    let mut rows = Vec::with_capacity(first.len());
    for (i, base) in first.iter().enumerate() {
        let xs: Vec<f64> = runs.iter().map(|r| r[i].mean_return).filter(|x| x.is_finite()).collect();
        let n = xs.len();
        let mean = if n == 0 { f64::NAN } else { xs.iter().sum::<f64>() / n as f64 };
        let s = if n < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        let h = t_half_width(s, n);
        rows.push(SummaryRow {
            iteration: base.iteration,
            env_steps: base.env_steps,
            n,
            mean_return: mean,
            ci_low: mean - h,
            ci_high: mean + h,
            half_width: h,
            degenerate: n < 2,
        });
    }
    Ok(rows)
}

pub fn summarize(paths: &[PathBuf]) -> Result<Vec<SummaryRow>> {
    let runs = paths.iter().map(|p| read_metrics(p)).collect::<Result<Vec<_>>>()?;
    summarize_runs(&runs)
}

pub fn write_summary<W: std::io::Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| Error::Csv {
        path: PathBuf::from("<summary>"),
        source: e,
    };
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<summary>", e))
}
