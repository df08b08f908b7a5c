use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{HarnessError, RunReport, SampleResult};
use crate::metrics::MetricReport;

/// Mean and sample standard deviation across runs; `None` when no run had
/// a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// The six comparison columns. T_corr, IoU and DSC are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummaries {
    pub t_corr: Summary,
    pub t_err: Summary,
    pub pcd: Summary,
    pub hdd: Summary,
    pub iou: Summary,
    pub dsc: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub generation: usize,
    /// Percent.
    pub t_corr_mean: f64,
    pub t_corr_std: f64,
    pub t_err_mean: Option<f64>,
    pub t_err_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    /// Best individual of each generation.
    pub elite: Vec<CurveRow>,
    /// Whole population of each generation.
    pub population: Vec<CurveRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subset {
    pub rule: String,
    pub ids: Vec<String>,
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub samples: usize,
    pub subset: Subset,
    pub metrics: MetricSummaries,
    pub curves: Curves,
    pub failures: usize,
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    // Sorting first makes the result independent of run order.
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Sample standard deviation (n − 1); zero for a single value.
fn std_dev(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let mut sq: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    sq.sort_by(f64::total_cmp);
    Some((sq.iter().sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

fn summarize(per_run: &[f64]) -> Summary {
    Summary { mean: mean(per_run), std: std_dev(per_run) }
}

/// Per-run means of `f` over the subset, then summarized across runs.
fn column(runs: &[&[&SampleResult]], f: impl Fn(&MetricReport) -> Option<f64>) -> Summary {
    let per_run: Vec<f64> = runs
        .iter()
        .filter_map(|samples| mean(&samples.iter().filter_map(|s| f(&s.metrics)).collect::<Vec<_>>()))
        .collect();
    summarize(&per_run)
}

fn curve(
    runs: &[&[&SampleResult]],
    corr: impl Fn(&super::CurvePoint) -> f64,
    err: impl Fn(&super::CurvePoint) -> Option<f64>,
) -> Vec<CurveRow> {
    let generations = runs.iter().flat_map(|r| r.iter()).map(|s| s.curve.len()).max().unwrap_or(0);
    (0..generations)
        .map(|g| {
            let mut c = Vec::new();
            let mut e = Vec::new();
            for samples in runs {
                let points: Vec<_> = samples.iter().filter_map(|s| s.curve.get(g)).collect();
                if let Some(m) = mean(&points.iter().map(|p| 100.0 * corr(p)).collect::<Vec<_>>()) {
                    c.push(m);
                }
                if let Some(m) = mean(&points.iter().filter_map(|p| err(p)).collect::<Vec<_>>()) {
                    e.push(m);
                }
            }
            CurveRow {
                generation: g,
                t_corr_mean: mean(&c).unwrap_or(0.0),
                t_corr_std: std_dev(&c).unwrap_or(0.0),
                t_err_mean: mean(&e),
                t_err_std: std_dev(&e),
            }
        })
        .collect()
}

fn joint(s: &SampleResult) -> bool {
    s.metrics.gen_watertight && s.metrics.gt_watertight
}

pub const SUBSET_RULE: &str = "ground truth and the final elite of every run are watertight";

/// Combines repeated runs over the same samples. Only samples that are
/// closed in every run count toward any metric.
pub fn aggregate(runs: &[RunReport]) -> Result<AggregateReport, HarnessError> {
    let first = runs.first().ok_or(HarnessError::NoRuns)?;
    let ids = first.sample_ids();
    for r in &runs[1..] {
        if r.sample_ids() != ids {
            return Err(HarnessError::MismatchedSampleSets);
        }
    }
    let keep: BTreeSet<usize> = (0..ids.len()).filter(|&i| runs.iter().all(|r| joint(&r.samples[i]))).collect();
    let subset: Vec<Vec<&SampleResult>> = runs
        .iter()
        .map(|r| keep.iter().map(|&i| &r.samples[i]).collect())
        .collect();
    let subset: Vec<&[&SampleResult]> = subset.iter().map(Vec::as_slice).collect();
    let pct = |v: Option<f64>| v.map(|x| 100.0 * x);
    Ok(AggregateReport {
        runs: runs.len(),
        seeds: runs.iter().map(|r| r.seed).collect(),
        samples: ids.len(),
        subset: Subset {
            rule: SUBSET_RULE.into(),
            ids: keep.iter().map(|&i| ids[i].to_string()).collect(),
            excluded: (0..ids.len()).filter(|i| !keep.contains(i)).map(|i| ids[i].to_string()).collect(),
        },
        metrics: MetricSummaries {
            t_corr: column(&subset, |m| pct(m.t_corr.map(|c| c as u8 as f64))),
            t_err: column(&subset, |m| m.t_err.map(|e| e as f64)),
            pcd: column(&subset, |m| m.pcd),
            hdd: column(&subset, |m| m.hdd),
            iou: column(&subset, |m| pct(m.iou)),
            dsc: column(&subset, |m| pct(m.dsc)),
        },
        curves: Curves {
            elite: curve(
                &subset,
                |p| (p.elite_t_corr == Some(true)) as u8 as f64,
                |p| p.elite_t_err.map(|e| e as f64),
            ),
            population: curve(&subset, |p| p.population_t_corr, |p| p.population_t_err),
        },
        failures: runs.iter().flat_map(|r| &r.samples).filter(|s| s.failure.is_some()).count(),
    })
}
