use serde::{Deserialize, Serialize};

use super::{EpisodeTrace, StepStatus};
use crate::dynamics::l2;
use crate::error::{Error, Result};

/// Safety statistics of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyMetrics {
    /// Minimum barrier value over all steps and constraints; `None` without constraints.
    pub min_h: Option<f64>,
    /// Steps where any barrier value is negative.
    pub violation_steps: usize,
    pub intervention_rate: f64,
    pub mean_deviation: f64,
    pub max_deviation: f64,
    pub max_solve_time: f64,
    pub fallback_count: usize,
}

pub fn compute_metrics(trace: &EpisodeTrace) -> Result<SafetyMetrics> {
    let n = trace.records.len();
    if n == 0 {
        return Err(Error::EmptyTrace);
    }
    let mut min_h: Option<f64> = None;
    let mut violation_steps = 0;
    let mut interventions = 0;
    let mut dev_sum = 0.0;
    let mut max_deviation: f64 = 0.0;
    let mut max_solve_time: f64 = 0.0;
    let mut fallback_count = 0;
    for r in &trace.records {
        for &h in &r.h {
            min_h = Some(min_h.map_or(h, |m| m.min(h)));
        }
        if r.h.iter().any(|&h| h < 0.0) {
            violation_steps += 1;
        }
        if r.intervened {
            interventions += 1;
        }
        let diff: Vec<f64> = r.u_out.iter().zip(&r.u_des).map(|(a, b)| a - b).collect();
        let d = l2(&diff);
        dev_sum += d;
        max_deviation = max_deviation.max(d);
        max_solve_time = max_solve_time.max(r.solve_time);
        if r.status == StepStatus::InfeasibleFallback {
            fallback_count += 1;
        }
    }
    Ok(SafetyMetrics {
        min_h,
        violation_steps,
        intervention_rate: interventions as f64 / n as f64,
        mean_deviation: dev_sum / n as f64,
        max_deviation,
        max_solve_time,
        fallback_count,
    })
}

/// Mean filter solve time over the filtered steps of a trace.
pub(crate) fn mean_solve_time(trace: &EpisodeTrace) -> Option<f64> {
    let times: Vec<f64> = trace
        .records
        .iter()
        .filter(|r| r.status != StepStatus::Unfiltered)
        .map(|r| r.solve_time)
        .collect();
    (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    /// `None` when the episode aborted before its first step.
    pub metrics: Option<SafetyMetrics>,
    pub aborted: Option<String>,
    pub mean_solve_time: Option<f64>,
}

/// Aggregate over a batch, followed by the per-episode rows in seed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub episode_count: usize,
    pub aborted_count: usize,
    pub min_h: Option<f64>,
    pub violation_steps: usize,
    pub mean_intervention_rate: f64,
    pub max_deviation: f64,
    pub max_solve_time: f64,
    pub mean_solve_time: Option<f64>,
    pub fallback_count: usize,
    pub episodes: Vec<EpisodeSummary>,
}

pub fn summarize_batch(episodes: Vec<EpisodeSummary>) -> BatchSummary {
    let ms: Vec<&SafetyMetrics> = episodes.iter().filter_map(|e| e.metrics.as_ref()).collect();
    let times: Vec<f64> = episodes.iter().filter_map(|e| e.mean_solve_time).collect();
    BatchSummary {
        episode_count: episodes.len(),
        aborted_count: episodes.iter().filter(|e| e.aborted.is_some()).count(),
        min_h: ms.iter().filter_map(|m| m.min_h).reduce(f64::min),
        violation_steps: ms.iter().map(|m| m.violation_steps).sum(),
        mean_intervention_rate: if ms.is_empty() {
            0.0
        } else {
            ms.iter().map(|m| m.intervention_rate).sum::<f64>() / ms.len() as f64
        },
        max_deviation: ms.iter().map(|m| m.max_deviation).fold(0.0, f64::max),
        max_solve_time: ms.iter().map(|m| m.max_solve_time).fold(0.0, f64::max),
        mean_solve_time: (!times.is_empty())
            .then(|| times.iter().sum::<f64>() / times.len() as f64),
        fallback_count: ms.iter().map(|m| m.fallback_count).sum(),
        episodes,
    }
}
