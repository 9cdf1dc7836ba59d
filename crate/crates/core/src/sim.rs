//! Monte Carlo engine: independent trials on keyed random streams, run in
//! parallel and reduced in trial order.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Architecture;
use crate::error::{Error, Result};

/// Redraws allowed for a single trial before the trial counts as failed.
pub const MAX_ATTEMPTS: u32 = 16;

/// Largest fraction of trials allowed to hit a degenerate draw.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    Frequency,
    Elements,
    RisPosition,
    Weight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub architectures: Vec<Architecture>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("sweep grid is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("sweep grid has non-finite values".into()));
        }
        Ok(())
    }
}

/// Identifies the stream of one attempt of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialContext {
    pub seed: u64,
    pub trial: u64,
    pub attempt: u32,
}

/// One output column of a trial: which curve and grid point it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub x: f64,
    pub series: String,
    pub architecture: Architecture,
    pub metric: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over √n (0 for a single trial).
    pub stderr: f64,
    pub trials: usize,
}

impl Estimate {
    /// Sums in the given order, so the result is bit-stable.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, trials: 0 };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, trials: n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub slot: Slot,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateResult {
    pub rows: Vec<AggregateRow>,
}

impl AggregateResult {
    pub fn find(&self, series: &str, architecture: Architecture, metric: &str, x: f64) -> Option<&Estimate> {
        self.rows
            .iter()
            .find(|r| {
                r.slot.series == series
                    && r.slot.architecture == architecture
                    && r.slot.metric == metric
                    && (r.slot.x - x).abs() <= 1e-9 * x.abs().max(1.0)
            })
            .map(|r| &r.estimate)
    }

    /// `(x, estimate)` pairs of one curve, in row order.
    pub fn curve(&self, series: &str, architecture: Architecture, metric: &str) -> Vec<(f64, Estimate)> {
        self.rows
            .iter()
            .filter(|r| r.slot.series == series && r.slot.architecture == architecture && r.slot.metric == metric)
            .map(|r| (r.slot.x, r.estimate))
            .collect()
    }

    pub fn extend(&mut self, other: AggregateResult) {
        self.rows.extend(other.rows);
    }
}

/// Raw per-trial values, `values[trial][slot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialBatch {
    pub values: Vec<Vec<f64>>,
    /// Trials that needed at least one redraw.
    pub degenerate: usize,
}

/// Runs `trials` trials of `f`. A trial whose draw is degenerate (see
/// [`Error::is_degenerate_channel`]) is retried with the next attempt
/// number. Fails if more than 1% of trials needed a redraw or any trial ran
/// out of attempts.
pub fn run_trials<F>(seed: u64, trials: usize, f: F) -> Result<TrialBatch>
where
    F: Fn(TrialContext) -> Result<Vec<f64>> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let outcomes: Vec<Result<(Vec<f64>, bool)>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut redrawn = false;
            for attempt in 0..MAX_ATTEMPTS {
                match f(TrialContext { seed, trial, attempt }) {
                    Ok(v) => return Ok((v, redrawn)),
                    Err(e) if e.is_degenerate_channel() || matches!(e, Error::Degenerate(_)) => {
                        debug!("trial {trial} attempt {attempt}: {e}; redrawing");
                        redrawn = true;
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Degenerate(format!("trial {trial} stayed degenerate after {MAX_ATTEMPTS} draws")))
        })
        .collect();
    let mut values = Vec::with_capacity(trials);
    let mut degenerate = 0;
    for o in outcomes {
        let (v, redrawn) = o?;
        degenerate += usize::from(redrawn);
        values.push(v);
    }
    if degenerate > 0 {
        warn!("{degenerate} of {trials} trials were redrawn after degenerate channels");
    }
    if degenerate as f64 > MAX_DEGENERATE_FRACTION * trials as f64 {
        return Err(Error::Degenerate(format!(
            "{degenerate} of {trials} trials had degenerate channels (limit {:.0}%)",
            100.0 * MAX_DEGENERATE_FRACTION
        )));
    }
    if let Some(len) = values.first().map(Vec::len) {
        if values.iter().any(|v| v.len() != len) {
            return Err(Error::InvalidArgument("trials returned different numbers of values".into()));
        }
    }
    Ok(TrialBatch { values, degenerate })
}

/// Runs the trials and aggregates each slot over trials.
pub fn run_monte_carlo<F>(slots: &[Slot], seed: u64, trials: usize, f: F) -> Result<AggregateResult>
where
    F: Fn(TrialContext) -> Result<Vec<f64>> + Sync,
{
    let batch = run_trials(seed, trials, f)?;
    aggregate(slots, &batch)
}

pub fn aggregate(slots: &[Slot], batch: &TrialBatch) -> Result<AggregateResult> {
    if batch.values.iter().any(|v| v.len() != slots.len()) {
        return Err(Error::InvalidArgument(format!("trial produced a value count other than {}", slots.len())));
    }
    let rows = slots
        .iter()
        .enumerate()
        .map(|(i, slot)| {
            let column: Vec<f64> = batch.values.iter().map(|v| v[i]).collect();
            AggregateRow { slot: slot.clone(), estimate: Estimate::from_samples(&column) }
        })
        .collect();
    Ok(AggregateResult { rows })
}
