//! Primary (performance) controllers: the untrusted side of the loop.
//!
//! None of these know about the filter. The neural controller is inference
//! only, fed the raw state vector.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::barrier::{eval_grad_h, BarrierConstraint};
use crate::dynamics::{eval_dynamics, Bound, ControlInput, PlantModel, PlantState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }
}

/// Dense feed-forward network. `weights[k]` is row-major with
/// `layer_sizes[k + 1]` rows of `layer_sizes[k]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidModel(format!(
                "layer_sizes {sizes:?} needs at least two non-zero entries"
            )));
        }
        let layers = sizes.len() - 1;
        for (name, len) in [
            ("weights", self.weights.len()),
            ("biases", self.biases.len()),
            ("activations", self.activations.len()),
        ] {
            if len != layers {
                return Err(Error::InvalidModel(format!(
                    "{name} has {len} layers, layer_sizes implies {layers}"
                )));
            }
        }
        for k in 0..layers {
            let w = &self.weights[k];
            if w.len() != sizes[k + 1] {
                return Err(Error::InvalidModel(format!(
                    "layer {k}: weight matrix has {} rows, expected {}",
                    w.len(),
                    sizes[k + 1]
                )));
            }
            for (r, row) in w.iter().enumerate() {
                if row.len() != sizes[k] {
                    return Err(Error::InvalidModel(format!(
                        "layer {k}: weight row {r} has {} entries, expected {}",
                        row.len(),
                        sizes[k]
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "layer {k}: non-finite weight in row {r}"
                    )));
                }
            }
            let b = &self.biases[k];
            if b.len() != sizes[k + 1] {
                return Err(Error::InvalidModel(format!(
                    "layer {k}: bias has {} entries, expected {}",
                    b.len(),
                    sizes[k + 1]
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("layer {k}: non-finite bias")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

pub fn mlp_forward(spec: &MlpSpec, input: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    if input.len() != spec.input_dim() {
        return Err(Error::InvalidModel(format!(
            "network expects {} inputs, got {}",
            spec.input_dim(),
            input.len()
        )));
    }
    let mut x = input.to_vec();
    for ((w, b), act) in spec.weights.iter().zip(&spec.biases).zip(&spec.activations) {
        x = w
            .iter()
            .zip(b)
            .map(|(row, bias)| {
                act.apply(row.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() + bias)
            })
            .collect();
    }
    Ok(x)
}

/// Controller description as found in scenario and controller files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerKind {
    Nn(MlpSpec),
    /// Per-axis `u = −kp·p − kd·v`.
    Pd {
        kp: Vec<f64>,
        kd: Vec<f64>,
    },
    /// Drives at full authority toward violating the named constraint.
    Adversarial {
        target_constraint_id: String,
    },
}

/// Reads a controller file: a weights document (`layer_sizes`, `weights`,
/// `biases`, `activations`), a PD gains document (`kp`, `kd`), or a tagged
/// controller description.
pub fn load_controller(path: &Path) -> Result<ControllerKind> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_controller(&text)
}

pub fn parse_controller(text: &str) -> Result<ControllerKind> {
    let json_err = |e: serde_json::Error| Error::parse(e.line(), e.to_string());
    let value: Value = serde_json::from_str(text).map_err(json_err)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::parse(1, "controller document must be a JSON object"))?;
    let kind = if obj.contains_key("kind") {
        serde_json::from_str::<ControllerKind>(text).map_err(json_err)?
    } else if obj.contains_key("layer_sizes") {
        ControllerKind::Nn(serde_json::from_str::<MlpSpec>(text).map_err(json_err)?)
    } else if obj.contains_key("kp") {
        #[derive(Deserialize)]
        struct Gains {
            kp: Vec<f64>,
            kd: Vec<f64>,
        }
        let g: Gains = serde_json::from_str(text).map_err(json_err)?;
        ControllerKind::Pd { kp: g.kp, kd: g.kd }
    } else {
        return Err(Error::parse(
            1,
            "unrecognized controller document: expected `kind`, `layer_sizes` or `kp`",
        ));
    };
    if let ControllerKind::Nn(spec) = &kind {
        spec.validate()?;
    }
    Ok(kind)
}

/// A controller checked against the plant and constraint set it will drive.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Nn(MlpSpec),
    Pd { kp: Vec<f64>, kd: Vec<f64> },
    Adversarial { target: BarrierConstraint },
}

impl Controller {
    pub fn resolve(
        kind: &ControllerKind,
        model: &PlantModel,
        constraints: &[BarrierConstraint],
    ) -> Result<Self> {
        match kind {
            ControllerKind::Nn(spec) => {
                spec.validate()?;
                if spec.input_dim() != model.state_dim() || spec.output_dim() != model.control_dim()
                {
                    return Err(Error::InvalidModel(format!(
                        "network maps {} -> {}, plant needs {} -> {}",
                        spec.input_dim(),
                        spec.output_dim(),
                        model.state_dim(),
                        model.control_dim()
                    )));
                }
                Ok(Controller::Nn(spec.clone()))
            }
            ControllerKind::Pd { kp, kd } => {
                let m = model.control_dim();
                if kp.len() != m || kd.len() != m {
                    return Err(Error::InvalidConfig(format!(
                        "pd gains need {m} entries each, got kp={} kd={}",
                        kp.len(),
                        kd.len()
                    )));
                }
                if kp.iter().chain(kd).any(|g| !g.is_finite()) {
                    return Err(Error::InvalidConfig("pd gains must be finite".into()));
                }
                Ok(Controller::Pd {
                    kp: kp.clone(),
                    kd: kd.clone(),
                })
            }
            ControllerKind::Adversarial {
                target_constraint_id,
            } => constraints
                .iter()
                .find(|c| &c.id == target_constraint_id)
                .map(|c| Controller::Adversarial { target: c.clone() })
                .ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "adversarial controller targets unknown constraint '{target_constraint_id}'"
                    ))
                }),
        }
    }
}

/// The primary controller's command, saturated into the plant's bounds.
pub fn desired_control(
    controller: &Controller,
    model: &PlantModel,
    state: &PlantState,
) -> Result<ControlInput> {
    model.check_state(state)?;
    let bounds = model.control_bounds();
    let m = model.control_dim();
    let x = &state.x;
    let raw = match controller {
        Controller::Nn(spec) => mlp_forward(spec, x)?,
        Controller::Pd { kp, kd } => (0..m).map(|j| -kp[j] * x[j] - kd[j] * x[m + j]).collect(),
        Controller::Adversarial { target } => {
            let dir = descent_direction(target, model, state);
            full_authority(&dir, bounds)
        }
    };
    Ok(ControlInput::saturated(&raw, bounds))
}

/// Direction in control space along which `h` decreases fastest.
///
/// First order this is `−∇h·g`. Where that vanishes (for the braking barriers,
/// whenever the vehicle is not closing on the boundary) the control only
/// reaches `h` through the drift, so the second-order term `−∂(∇h·f)/∂x · g`
/// is used instead. Returns zeros where the gradient is singular.
fn descent_direction(c: &BarrierConstraint, model: &PlantModel, state: &PlantState) -> Vec<f64> {
    let m = model.control_dim();
    let Ok(dyn_) = eval_dynamics(model, state) else {
        return vec![0.0; m];
    };
    let Ok(grad) = eval_grad_h(c, state) else {
        return vec![0.0; m];
    };
    let first: Vec<f64> = (0..m)
        .map(|j| {
            -grad
                .iter()
                .zip(&dyn_.actuation)
                .map(|(g, row)| g * row[j])
                .sum::<f64>()
        })
        .collect();
    if first.iter().any(|v| *v != 0.0) {
        return first;
    }

    let lf_h = |x: &[f64]| -> Option<f64> {
        let s = PlantState::new(x.to_vec(), state.t);
        let g = eval_grad_h(c, &s).ok()?;
        let d = eval_dynamics(model, &s).ok()?;
        Some(g.iter().zip(&d.drift).map(|(g, f)| g * f).sum())
    };
    const EPS: f64 = 1e-6;
    (0..m)
        .map(|j| {
            let mut plus = state.x.clone();
            let mut minus = state.x.clone();
            for (i, row) in dyn_.actuation.iter().enumerate() {
                plus[i] += EPS * row[j];
                minus[i] -= EPS * row[j];
            }
            match (lf_h(&plus), lf_h(&minus)) {
                (Some(p), Some(q)) => -(p - q) / (2.0 * EPS),
                _ => 0.0,
            }
        })
        .collect()
}

/// Scales `dir` out to the edge of the actuator box.
fn full_authority(dir: &[f64], bounds: &[Bound]) -> Vec<f64> {
    let t = dir
        .iter()
        .zip(bounds)
        .filter(|(d, _)| **d != 0.0)
        .map(|(d, b)| if *d > 0.0 { b.max / d } else { b.min / d })
        .fold(f64::INFINITY, f64::min);
    if !t.is_finite() || t <= 0.0 {
        return vec![0.0; dir.len()];
    }
    dir.iter().map(|d| d * t).collect()
}
