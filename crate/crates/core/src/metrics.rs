//! Outage ratios, throughput histograms and their CSV exports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distill::{EvalRun, PfSummary};
use crate::error::{Error, Result};
use crate::io::{csv_bytes, write_atomic};
use crate::mitigation::InterruptCounts;

/// Percentage of samples strictly below `threshold_mbps`.
pub fn compute_outage(rates_mbps: &[f64], threshold_mbps: f64) -> Result<f64> {
    if rates_mbps.is_empty() {
        return Err(Error::InvalidArgument("outage of an empty rate log".into()));
    }
    let below = rates_mbps.iter().filter(|&&r| r < threshold_mbps).count();
    Ok(100.0 * below as f64 / rates_mbps.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutagePoint {
    pub threshold_mbps: f64,
    pub outage_pct: f64,
}

pub fn outage_sweep(rates_mbps: &[f64], thresholds: &[f64]) -> Result<Vec<OutagePoint>> {
    if thresholds.is_empty() {
        return Err(Error::InvalidArgument("empty threshold list".into()));
    }
    thresholds
        .iter()
        .map(|&t| {
            Ok(OutagePoint {
                threshold_mbps: t,
                outage_pct: compute_outage(rates_mbps, t)?,
            })
        })
        .collect()
}

/// `start, start + step, ...` up to and including `stop` (within half a
/// step). Each value is computed from its index, not by accumulation.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidArgument(format!("bad grid {start}..{stop} by {step}")));
    }
    let n = ((stop - start) / step + 0.5).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

/// Sampling unit of the outage ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutageUnit {
    /// Every (user, step) rate is one sample.
    #[default]
    UserStep,
    /// One sample per step: the lowest user rate of that step, i.e. a step
    /// is in outage if any user is.
    Step,
}

/// Rate histogram normalized as a density: `count / (total * width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    /// Samples below the first edge, counted in the first bin.
    pub clamped_below: u64,
    /// Samples above the last edge, counted in the last bin.
    pub clamped_above: u64,
    pub total: u64,
}

impl Histogram {
    /// `sum(density * width)`; 1 up to rounding.
    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }
}

/// Bins are `[e_i, e_{i+1})`, the last one closed. Out-of-range samples are
/// clamped into the end bins and counted in `clamped_below`/`clamped_above`.
pub fn throughput_histogram(rates_mbps: &[f64], edges: &[f64]) -> Result<Histogram> {
    if edges.len() < 2 {
        return Err(Error::InvalidArgument("histogram needs at least two edges".into()));
    }
    if edges.windows(2).any(|w| !(w[1] > w[0])) || edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidArgument("histogram edges must be finite and strictly increasing".into()));
    }
    if rates_mbps.is_empty() {
        return Err(Error::InvalidArgument("histogram of an empty rate log".into()));
    }
    let bins = edges.len() - 1;
    let last = edges[bins];
    let mut counts = vec![0u64; bins];
    let (mut below, mut above) = (0, 0);
    for &r in rates_mbps {
        let bin = if r < edges[0] {
            below += 1;
            0
        } else if r > last {
            above += 1;
            bins - 1
        } else {
            // First edge strictly greater than r, minus one; r == last lands
            // in the final bin.
            edges.partition_point(|&e| e <= r).saturating_sub(1).min(bins - 1)
        };
        counts[bin] += 1;
    }
    let total = rates_mbps.len() as u64;
    let density = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (total as f64 * (e[1] - e[0])))
        .collect();
    Ok(Histogram {
        edges: edges.to_vec(),
        counts,
        density,
        clamped_below: below,
        clamped_above: above,
        total,
    })
}

/// Metric settings shared by every evaluated scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub thresholds_mbps: Vec<f64>,
    pub hist_edges: Vec<f64>,
    pub outage_unit: OutageUnit,
}

/// Everything reported for one (scheme, replicate) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub scheme: String,
    pub replicate: usize,
    pub steps: usize,
    pub outage: Vec<OutagePoint>,
    pub histogram: Histogram,
    pub interrupts: InterruptCounts,
    pub pf: PfSummary,
}

#[derive(Debug, Serialize)]
struct HistRow {
    bin_lo_mbps: f64,
    bin_hi_mbps: f64,
    count: u64,
    density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub replicate: usize,
    pub steps: usize,
    pub samples: u64,
    pub direct_conflicts: usize,
    pub losers_discarded: usize,
    pub rollbacks: usize,
    pub interrupts_total: usize,
    pub pf_mean: f64,
    pub pf_std: f64,
    pub pf_min: f64,
    pub pf_max: f64,
    pub hist_clamped_below: u64,
    pub hist_clamped_above: u64,
}

#[derive(Debug, Serialize)]
struct RateRow {
    step: usize,
    user: usize,
    /// Empty when disconnected.
    serving_bs: Option<usize>,
    rate_mbps: f64,
}

impl EvalMetrics {
    pub fn from_run(scheme: &str, replicate: usize, run: &EvalRun, spec: &MetricSpec) -> Result<Self> {
        let samples = match spec.outage_unit {
            OutageUnit::UserStep => run.rates_mbps.clone(),
            OutageUnit::Step => run.step_min_rates(),
        };
        Ok(Self {
            scheme: scheme.to_owned(),
            replicate,
            steps: run.steps,
            outage: outage_sweep(&samples, &spec.thresholds_mbps)?,
            histogram: throughput_histogram(&run.rates_mbps, &spec.hist_edges)?,
            interrupts: run.interrupts,
            pf: run.pf_summary(),
        })
    }

    pub fn summary_row(&self) -> SummaryRow {
        SummaryRow {
            scheme: self.scheme.clone(),
            replicate: self.replicate,
            steps: self.steps,
            samples: self.histogram.total,
            direct_conflicts: self.interrupts.direct_conflicts,
            losers_discarded: self.interrupts.losers_discarded,
            rollbacks: self.interrupts.rollbacks,
            interrupts_total: self.interrupts.total(),
            pf_mean: self.pf.mean,
            pf_std: self.pf.std,
            pf_min: self.pf.min,
            pf_max: self.pf.max,
            hist_clamped_below: self.histogram.clamped_below,
            hist_clamped_above: self.histogram.clamped_above,
        }
    }

    pub fn outage_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(&self.outage)
    }

    pub fn histogram_csv(&self) -> Result<Vec<u8>> {
        let h = &self.histogram;
        csv_bytes(h.edges.windows(2).zip(&h.counts).zip(&h.density).map(|((e, &count), &density)| {
            HistRow {
                bin_lo_mbps: e[0],
                bin_hi_mbps: e[1],
                count,
                density,
            }
        }))
    }

    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        csv_bytes([self.summary_row()])
    }

    /// Write `<prefix>_outage.csv`, `<prefix>_hist.csv` and
    /// `<prefix>_summary.csv` into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path, prefix: &str) -> Result<Vec<std::path::PathBuf>> {
        let files = [
            (format!("{prefix}_outage.csv"), self.outage_csv()?),
            (format!("{prefix}_hist.csv"), self.histogram_csv()?),
            (format!("{prefix}_summary.csv"), self.summary_csv()?),
        ];
        let mut out = Vec::new();
        for (name, bytes) in files {
            let p = dir.join(name);
            write_atomic(&p, &bytes)?;
            out.push(p);
        }
        Ok(out)
    }
}

/// Per-(step, user) rate log as CSV.
pub fn rate_log_csv(run: &EvalRun) -> Result<Vec<u8>> {
    let k = run.num_users.max(1);
    csv_bytes(run.rates_mbps.iter().zip(&run.serving).enumerate().map(|(i, (&rate_mbps, &serving_bs))| {
        RateRow {
            step: i / k,
            user: i % k,
            serving_bs,
            rate_mbps,
        }
    }))
}
