//! Closed-loop simulation of the full processing architecture.
//!
//! Per step: the command component picks the mode from the schedule, the
//! primary controller proposes `u_des`, the filter (when enabled) produces
//! `u_out`, the plant integrates one step under a sampled disturbance and the
//! recorder logs the step. The recorder only observes; switching it off does
//! not change the trajectory.

mod metrics;
mod trace;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asif::{filter_control, SolveStatus};
use crate::barrier::{eval_h, BarrierConstraint};
use crate::controllers::{desired_control, load_controller, Controller, ControllerKind};
use crate::dynamics::{sample_disturbance, step_rk4, PlantModel, PlantState};
use crate::error::{Error, Result};

pub use metrics::{compute_metrics, summarize_batch, BatchSummary, EpisodeSummary, SafetyMetrics};
pub use trace::{read_trace, trace_header, write_trace, write_trace_to};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub time: f64,
    pub rta_enabled: bool,
}

fn default_schedule() -> Vec<ModeEntry> {
    vec![ModeEntry {
        time: 0.0,
        rta_enabled: true,
    }]
}

/// Controller given inline or as a path to a controller file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControllerSpec {
    File { file: PathBuf },
    Inline(ControllerKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub model: PlantModel,
    pub controller: ControllerSpec,
    #[serde(default)]
    pub constraints: Vec<BarrierConstraint>,
    pub dt: f64,
    pub duration: f64,
    pub initial_state: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_schedule")]
    pub mode_schedule: Vec<ModeEntry>,
}

/// Everything an episode needs, checked once before stepping.
struct Assembled {
    controller: Controller,
    steps: usize,
}

impl ScenarioConfig {
    /// Loads a JSON scenario. Controller files are resolved relative to the
    /// scenario's directory and inlined.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ScenarioConfig =
            serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        if let ControllerSpec::File { file } = &cfg.controller {
            let resolved = if file.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(file)
            } else {
                file.clone()
            };
            cfg.controller = ControllerSpec::Inline(load_controller(&resolved)?);
        }
        Ok(cfg)
    }

    pub fn controller_kind(&self) -> Result<ControllerKind> {
        match &self.controller {
            ControllerSpec::Inline(k) => Ok(k.clone()),
            ControllerSpec::File { file } => load_controller(file),
        }
    }

    /// Number of control steps: `floor(duration / dt)`, robust to the
    /// representation error of decimal step sizes.
    pub fn step_count(&self) -> usize {
        (self.duration / self.dt * (1.0 + 1e-12)).floor() as usize
    }

    /// Whether the filter is enabled at time `t`: the last schedule entry at or before `t`.
    pub fn rta_enabled_at(&self, t: f64) -> bool {
        let slack = 1e-9 * self.dt;
        self.mode_schedule
            .iter()
            .take_while(|m| m.time <= t + slack)
            .last()
            .is_none_or(|m| m.rta_enabled)
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.assemble().map(|_| ())
    }

    fn assemble(&self) -> Result<Assembled> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be > 0, got {}", self.duration));
        }
        if self.dt > self.duration {
            return bad(format!("dt {} exceeds duration {}", self.dt, self.duration));
        }
        match self.mode_schedule.first() {
            Some(first) if first.time == 0.0 => {}
            _ => return bad("mode_schedule must start with an entry at time 0".into()),
        }
        if self.mode_schedule.windows(2).any(|w| {
            w[1].time.partial_cmp(&w[0].time) != Some(std::cmp::Ordering::Greater)
                || !w[1].time.is_finite()
        }) {
            return bad("mode_schedule times must be strictly increasing".into());
        }
        let n = self.model.state_dim();
        if self.initial_state.len() != n {
            return bad(format!(
                "initial_state has {} entries, model needs {n}",
                self.initial_state.len()
            ));
        }
        if self.initial_state.iter().any(|v| !v.is_finite()) {
            return bad("initial_state must be finite".into());
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if self.constraints[..i].iter().any(|o| o.id == c.id) {
                return bad(format!("duplicate constraint id '{}'", c.id));
            }
            c.check_model(&self.model)?;
        }
        let controller =
            Controller::resolve(&self.controller_kind()?, &self.model, &self.constraints)?;
        Ok(Assembled {
            controller,
            steps: self.step_count(),
        })
    }
}

/// Trace marker for a step; `Unfiltered` means the filter was switched off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepStatus {
    Passthrough,
    Modified,
    InfeasibleFallback,
    Unfiltered,
}

impl StepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StepStatus::Passthrough => "passthrough",
            StepStatus::Modified => "modified",
            StepStatus::InfeasibleFallback => "infeasible_fallback",
            StepStatus::Unfiltered => "unfiltered",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "passthrough" => StepStatus::Passthrough,
            "modified" => StepStatus::Modified,
            "infeasible_fallback" => StepStatus::InfeasibleFallback,
            "unfiltered" => StepStatus::Unfiltered,
            _ => return None,
        })
    }
}

impl From<SolveStatus> for StepStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Passthrough => StepStatus::Passthrough,
            SolveStatus::Modified => StepStatus::Modified,
            SolveStatus::InfeasibleFallback => StepStatus::InfeasibleFallback,
        }
    }
}

/// State, commands and barrier values at the start of one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub state: Vec<f64>,
    pub u_des: Vec<f64>,
    pub u_out: Vec<f64>,
    /// One value per constraint, in config order.
    pub h: Vec<f64>,
    pub intervened: bool,
    pub status: StepStatus,
    pub solve_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub constraint_ids: Vec<String>,
    pub records: Vec<StepRecord>,
    /// Present for traces produced by [`run_episode`]; not stored in CSV.
    pub config: Option<ScenarioConfig>,
    pub config_hash: Option<String>,
    /// State after the last completed step.
    pub final_state: Option<PlantState>,
    /// Reason the episode stopped early, if it did.
    pub aborted: Option<String>,
}

impl EpisodeTrace {
    /// Smallest barrier value over the recorded steps and the final state.
    pub fn min_h(&self) -> Option<f64> {
        let recorded = self.records.iter().flat_map(|r| r.h.iter().copied());
        let last = self
            .final_state
            .as_ref()
            .zip(self.config.as_ref())
            .map(|(s, cfg)| {
                cfg.constraints
                    .iter()
                    .filter_map(|c| eval_h(c, s).ok())
                    .collect::<Vec<_>>()
            })
            .unwrap_or_default();
        recorded.chain(last).reduce(f64::min)
    }
}

/// Runs one episode. Config problems fail before any stepping; a filter or
/// integration failure mid-run returns the partial trace with `aborted` set.
pub fn run_episode(config: &ScenarioConfig) -> Result<EpisodeTrace> {
    let mut records = Vec::new();
    let (final_state, aborted) = simulate(config, Some(&mut records))?;
    Ok(EpisodeTrace {
        constraint_ids: config.constraints.iter().map(|c| c.id.clone()).collect(),
        records,
        config: Some(config.clone()),
        config_hash: Some(config.hash()),
        final_state: Some(final_state),
        aborted,
    })
}

/// The same loop with the recorder disconnected.
pub fn run_episode_unrecorded(config: &ScenarioConfig) -> Result<(PlantState, Option<String>)> {
    simulate(config, None)
}

fn simulate(
    config: &ScenarioConfig,
    mut recorder: Option<&mut Vec<StepRecord>>,
) -> Result<(PlantState, Option<String>)> {
    let Assembled { controller, steps } = config.assemble()?;
    let model = &config.model;
    let constraints = &config.constraints;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = PlantState::new(config.initial_state.clone(), 0.0);
    if let Some(r) = recorder.as_deref_mut() {
        r.reserve(steps);
    }

    for k in 0..steps {
        let t = k as f64 * config.dt;
        state.t = t;
        let step = (|| -> Result<(StepRecord, PlantState)> {
            let u_des = desired_control(&controller, model, &state)?;
            let (u_out, intervened, status, solve_time) = if config.rta_enabled_at(t) {
                let f = filter_control(constraints, model, &state, &u_des)?;
                (
                    f.u_out,
                    f.intervened,
                    StepStatus::from(f.status),
                    f.solve_time,
                )
            } else {
                (u_des.clone(), false, StepStatus::Unfiltered, 0.0)
            };
            let h = constraints
                .iter()
                .map(|c| eval_h(c, &state))
                .collect::<Result<Vec<_>>>()?;
            let w = sample_disturbance(model, &mut rng);
            let next = step_rk4(model, &state, &u_out, &w, config.dt)?;
            let record = StepRecord {
                t,
                state: state.x.clone(),
                u_des: u_des.into_values(),
                u_out: u_out.into_values(),
                h,
                intervened,
                status,
                solve_time,
            };
            Ok((record, next))
        })();
        match step {
            Ok((record, next)) => {
                if let Some(r) = recorder.as_deref_mut() {
                    r.push(record);
                }
                state = next;
            }
            Err(e) => return Ok((state, Some(format!("step {k} (t={t}): {e}")))),
        }
    }
    state.t = steps as f64 * config.dt;
    Ok((state, None))
}

/// Runs `episodes` copies of `config` with seeds `seed_base, seed_base + 1, …`
/// in parallel; results come back in seed order.
pub fn run_batch(config: &ScenarioConfig, episodes: usize, seed_base: u64) -> Result<BatchSummary> {
    config.validate()?;
    let summaries = (0..episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut cfg = config.clone();
            cfg.seed = seed_base.wrapping_add(i);
            let trace = run_episode(&cfg)?;
            Ok(EpisodeSummary {
                seed: cfg.seed,
                metrics: compute_metrics(&trace).ok(),
                aborted: trace.aborted.clone(),
                mean_solve_time: metrics::mean_solve_time(&trace),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_batch(summaries))
}
