//! Control-affine plant models `ẋ = f(x) + g(x)·u + w`, fixed-step RK4
//! integration and bounded additive disturbances.
//!
//! Two plants are provided, both double integrators:
//!
//! - `double_integrator_1d`: state `(p, v)`, one control axis.
//! - `double_integrator_2d`: state `(px, py, vx, vy)`, two control axes.
//!
//! Disturbances live in state space (same units as the drift) and are held
//! constant over an integration step, as is the control.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[min, max]` for one actuation axis. Serialized as `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Bound {
    pub min: f64,
    pub max: f64,
}

impl Bound {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min >= max {
            return Err(Error::InvalidConfig(format!(
                "control bound [{min}, {max}] must be finite with min < max"
            )));
        }
        Ok(Self { min, max })
    }

    /// Symmetric bound `[-magnitude, magnitude]`.
    pub fn symmetric(magnitude: f64) -> Result<Self> {
        Self::new(-magnitude, magnitude)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.min <= x && x <= self.max
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }
}

impl TryFrom<[f64; 2]> for Bound {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Bound::new(v[0], v[1])
    }
}

impl From<Bound> for [f64; 2] {
    fn from(b: Bound) -> Self {
        [b.min, b.max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[serde(rename = "double_integrator_1d")]
    DoubleIntegrator1d,
    #[serde(rename = "double_integrator_2d")]
    DoubleIntegrator2d,
}

impl ModelKind {
    pub fn state_dim(self) -> usize {
        match self {
            ModelKind::DoubleIntegrator1d => 2,
            ModelKind::DoubleIntegrator2d => 4,
        }
    }

    pub fn control_dim(self) -> usize {
        match self {
            ModelKind::DoubleIntegrator1d => 1,
            ModelKind::DoubleIntegrator2d => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlantModelSpec {
    kind: ModelKind,
    control_bounds: Vec<Bound>,
    #[serde(default)]
    disturbance_bound: f64,
}

/// A plant with its actuation limits and disturbance envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlantModelSpec", into = "PlantModelSpec")]
pub struct PlantModel {
    kind: ModelKind,
    control_bounds: Vec<Bound>,
    disturbance_bound: f64,
}

impl TryFrom<PlantModelSpec> for PlantModel {
    type Error = Error;

    fn try_from(s: PlantModelSpec) -> Result<Self> {
        PlantModel::new(s.kind, s.control_bounds, s.disturbance_bound)
    }
}

impl From<PlantModel> for PlantModelSpec {
    fn from(m: PlantModel) -> Self {
        PlantModelSpec {
            kind: m.kind,
            control_bounds: m.control_bounds,
            disturbance_bound: m.disturbance_bound,
        }
    }
}

impl PlantModel {
    pub fn new(
        kind: ModelKind,
        control_bounds: Vec<Bound>,
        disturbance_bound: f64,
    ) -> Result<Self> {
        if control_bounds.len() != kind.control_dim() {
            return Err(Error::InvalidConfig(format!(
                "{kind:?} needs {} control bounds, got {}",
                kind.control_dim(),
                control_bounds.len()
            )));
        }
        if !(disturbance_bound.is_finite() && disturbance_bound >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "disturbance_bound must be finite and >= 0, got {disturbance_bound}"
            )));
        }
        Ok(Self {
            kind,
            control_bounds,
            disturbance_bound,
        })
    }

    /// Double integrator with every axis bounded by `[-u_max, u_max]`.
    pub fn double_integrator(kind: ModelKind, u_max: f64, disturbance_bound: f64) -> Result<Self> {
        let bound = Bound::symmetric(u_max)?;
        Self::new(kind, vec![bound; kind.control_dim()], disturbance_bound)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn state_dim(&self) -> usize {
        self.kind.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.kind.control_dim()
    }

    pub fn control_bounds(&self) -> &[Bound] {
        &self.control_bounds
    }

    pub fn disturbance_bound(&self) -> f64 {
        self.disturbance_bound
    }

    /// Number of position coordinates; velocities follow them in the state vector.
    pub fn position_dim(&self) -> usize {
        self.control_dim()
    }

    pub fn check_state(&self, state: &PlantState) -> Result<()> {
        check_vector(self.state_dim(), &state.x)
    }
}

fn check_vector(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(Error::InvalidState(format!(
            "expected {dim} state entries, got {}",
            x.len()
        )));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!(
            "state entry {i} is not finite"
        )));
    }
    Ok(())
}

/// Continuous plant state at time `t` (seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub x: Vec<f64>,
    pub t: f64,
}

impl PlantState {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }
}

/// An actuation command together with the bounds it satisfies.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInput {
    u: Vec<f64>,
    bounds: Vec<Bound>,
}

impl ControlInput {
    pub fn new(u: Vec<f64>, bounds: &[Bound]) -> Result<Self> {
        if u.len() != bounds.len() {
            return Err(Error::InvalidState(format!(
                "control has {} entries but {} bounds",
                u.len(),
                bounds.len()
            )));
        }
        for (i, (v, b)) in u.iter().zip(bounds).enumerate() {
            if !b.contains(*v) {
                return Err(Error::InvalidState(format!(
                    "control axis {i} value {v} outside [{}, {}]",
                    b.min, b.max
                )));
            }
        }
        Ok(Self {
            u,
            bounds: bounds.to_vec(),
        })
    }

    /// Componentwise saturation of a raw command into `bounds`. NaN entries become the
    /// midpoint of their interval.
    pub fn saturated(raw: &[f64], bounds: &[Bound]) -> Self {
        let u = raw
            .iter()
            .zip(bounds)
            .map(|(v, b)| {
                if v.is_nan() {
                    0.5 * (b.min + b.max)
                } else {
                    b.clamp(*v)
                }
            })
            .collect();
        Self {
            u,
            bounds: bounds.to_vec(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    pub fn into_values(self) -> Vec<f64> {
        self.u
    }
}

/// Drift `f(x)` and actuation matrix `g(x)` (row-major, `state_dim × control_dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlAffine {
    pub drift: Vec<f64>,
    pub actuation: Vec<Vec<f64>>,
}

impl ControlAffine {
    /// `f(x) + g(x)·u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.drift
            .iter()
            .zip(&self.actuation)
            .map(|(f, row)| f + row.iter().zip(u).map(|(g, u)| g * u).sum::<f64>())
            .collect()
    }
}

fn dynamics_unchecked(kind: ModelKind, x: &[f64]) -> ControlAffine {
    let n = kind.state_dim();
    let m = kind.control_dim();
    // Double integrators: positions are the first m entries, velocities the last m.
    let mut drift = vec![0.0; n];
    drift[..m].copy_from_slice(&x[m..]);
    let mut actuation = vec![vec![0.0; m]; n];
    for j in 0..m {
        actuation[m + j][j] = 1.0;
    }
    ControlAffine { drift, actuation }
}

pub fn eval_dynamics(model: &PlantModel, state: &PlantState) -> Result<ControlAffine> {
    model.check_state(state)?;
    Ok(dynamics_unchecked(model.kind, &state.x))
}

/// One classical RK4 step with `u` and `w` held constant.
pub fn step_rk4(
    model: &PlantModel,
    state: &PlantState,
    u: &ControlInput,
    w: &[f64],
    dt: f64,
) -> Result<PlantState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be > 0, got {dt}")));
    }
    model.check_state(state)?;
    if u.values().len() != model.control_dim() {
        return Err(Error::InvalidState(format!(
            "control has {} entries, model expects {}",
            u.values().len(),
            model.control_dim()
        )));
    }
    for (i, (v, b)) in u.values().iter().zip(model.control_bounds()).enumerate() {
        if !b.contains(*v) {
            return Err(Error::InvalidState(format!(
                "control axis {i} value {v} outside plant bound [{}, {}]",
                b.min, b.max
            )));
        }
    }
    if w.len() != model.state_dim() {
        return Err(Error::InvalidState(format!(
            "disturbance has {} entries, model expects {}",
            w.len(),
            model.state_dim()
        )));
    }
    let norm = l2(w);
    if norm.is_nan() || norm > model.disturbance_bound {
        return Err(Error::InvalidDisturbance {
            norm,
            bound: model.disturbance_bound,
        });
    }

    let u = u.values();
    let deriv = |x: &[f64]| -> Vec<f64> {
        let mut d = dynamics_unchecked(model.kind, x).apply(u);
        for (d, w) in d.iter_mut().zip(w) {
            *d += w;
        }
        d
    };
    let axpy = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(x, k)| x + h * k).collect()
    };

    let x = &state.x;
    let k1 = deriv(x);
    let k2 = deriv(&axpy(x, &k1, 0.5 * dt));
    let k3 = deriv(&axpy(x, &k2, 0.5 * dt));
    let k4 = deriv(&axpy(x, &k3, dt));
    let next = (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    Ok(PlantState::new(next, state.t + dt))
}

/// Draws a disturbance with uniformly random direction and magnitude uniform in
/// `[0, disturbance_bound]`. A zero bound returns the zero vector without touching `rng`.
pub fn sample_disturbance<R: Rng + ?Sized>(model: &PlantModel, rng: &mut R) -> Vec<f64> {
    let n = model.state_dim();
    let bound = model.disturbance_bound;
    if bound == 0.0 {
        return vec![0.0; n];
    }
    let dir: Vec<f64> = loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if l2(&g) > 1e-12 {
            break g;
        }
    };
    let magnitude = rng.gen_range(0.0..=bound);
    let scale = magnitude / l2(&dir);
    let mut w: Vec<f64> = dir.iter().map(|d| d * scale).collect();
    // Normalization round-off can leave the norm an ulp above the bound.
    while l2(&w) > bound {
        w.iter_mut().for_each(|v| *v *= 1.0 - f64::EPSILON);
    }
    w
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
