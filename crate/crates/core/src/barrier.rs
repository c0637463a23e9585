//! Control barrier functions for the double-integrator plants.
//!
//! Every constraint defines a scalar `h(x)` whose superlevel set `h ≥ 0` is the
//! safe set. The filter enforces the linear-in-`u` condition
//! `∇h·(f + g·u) + γ·h ≥ 0`, which [`cbf_row`] returns as `a·u ≥ b`.
//!
//! Geofence barriers use a braking-distance term so that `h ≥ 0` also accounts
//! for the distance needed to stop at full deceleration `u_max`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{eval_dynamics, l2, PlantModel, PlantState};
use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    /// Stay at or below `p_limit` on a 1D axis.
    Geofence1d { p_limit: f64, u_max: f64 },
    /// Stay inside a circle in the plane.
    Geofence2dCircle {
        center: [f64; 2],
        radius: f64,
        u_max: f64,
    },
    /// Keep speed at or below `v_max`.
    SpeedLimit { v_max: f64 },
}

impl ConstraintKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintKind::Geofence1d { .. } => "geofence_1d",
            ConstraintKind::Geofence2dCircle { .. } => "geofence_2d_circle",
            ConstraintKind::SpeedLimit { .. } => "speed_limit",
        }
    }

    fn params(&self) -> Value {
        match *self {
            ConstraintKind::Geofence1d { p_limit, u_max } => {
                serde_json::json!({ "p_limit": p_limit, "u_max": u_max })
            }
            ConstraintKind::Geofence2dCircle {
                center,
                radius,
                u_max,
            } => serde_json::json!({ "center": center, "radius": radius, "u_max": u_max }),
            ConstraintKind::SpeedLimit { v_max } => serde_json::json!({ "v_max": v_max }),
        }
    }

    fn from_params(kind: &str, params: Value) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct G1 {
            p_limit: f64,
            u_max: f64,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct G2 {
            center: [f64; 2],
            radius: f64,
            u_max: f64,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Speed {
            v_max: f64,
        }
        let bad = |e: serde_json::Error| Error::InvalidConfig(format!("{kind} params: {e}"));
        let k = match kind {
            "geofence_1d" => {
                let p: G1 = serde_json::from_value(params).map_err(bad)?;
                ConstraintKind::Geofence1d {
                    p_limit: p.p_limit,
                    u_max: p.u_max,
                }
            }
            "geofence_2d_circle" => {
                let p: G2 = serde_json::from_value(params).map_err(bad)?;
                ConstraintKind::Geofence2dCircle {
                    center: p.center,
                    radius: p.radius,
                    u_max: p.u_max,
                }
            }
            "speed_limit" => {
                let p: Speed = serde_json::from_value(params).map_err(bad)?;
                ConstraintKind::SpeedLimit { v_max: p.v_max }
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown constraint kind '{other}'"
                )))
            }
        };
        k.validate()?;
        Ok(k)
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{}: {name} must be positive and finite, got {v}",
                    self.name()
                )))
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{}: {name} must be finite",
                    self.name()
                )))
            }
        };
        match *self {
            ConstraintKind::Geofence1d { p_limit, u_max } => {
                finite("p_limit", p_limit)?;
                positive("u_max", u_max)
            }
            ConstraintKind::Geofence2dCircle {
                center,
                radius,
                u_max,
            } => {
                finite("center", center[0])?;
                finite("center", center[1])?;
                positive("radius", radius)?;
                positive("u_max", u_max)
            }
            ConstraintKind::SpeedLimit { v_max } => positive("v_max", v_max),
        }
    }

    /// Braking authority assumed by the barrier, if any.
    pub fn u_max(&self) -> Option<f64> {
        match *self {
            ConstraintKind::Geofence1d { u_max, .. }
            | ConstraintKind::Geofence2dCircle { u_max, .. } => Some(u_max),
            ConstraintKind::SpeedLimit { .. } => None,
        }
    }

    fn accepts_state_dim(&self, n: usize) -> bool {
        match self {
            ConstraintKind::Geofence1d { .. } => n == 2,
            ConstraintKind::Geofence2dCircle { .. } => n == 4,
            ConstraintKind::SpeedLimit { .. } => n == 2 || n == 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConstraintSpec {
    id: String,
    kind: String,
    params: Value,
    #[serde(default = "default_gamma")]
    gamma: f64,
    hazard_id: String,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

/// One safety constraint `h(x) ≥ 0` with its class-κ gain `γ` (`α(h) = γ·h`).
///
/// Serialized as `{"id", "kind", "params", "gamma", "hazard_id"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstraintSpec", into = "ConstraintSpec")]
pub struct BarrierConstraint {
    pub id: String,
    pub kind: ConstraintKind,
    pub gamma: f64,
    pub hazard_id: String,
}

impl TryFrom<ConstraintSpec> for BarrierConstraint {
    type Error = Error;

    fn try_from(s: ConstraintSpec) -> Result<Self> {
        let kind = ConstraintKind::from_params(&s.kind, s.params)?;
        BarrierConstraint::new(s.id, kind, s.gamma, s.hazard_id)
    }
}

impl From<BarrierConstraint> for ConstraintSpec {
    fn from(c: BarrierConstraint) -> Self {
        ConstraintSpec {
            id: c.id,
            kind: c.kind.name().to_string(),
            params: c.kind.params(),
            gamma: c.gamma,
            hazard_id: c.hazard_id,
        }
    }
}

impl BarrierConstraint {
    pub fn new(
        id: impl Into<String>,
        kind: ConstraintKind,
        gamma: f64,
        hazard_id: impl Into<String>,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.contains(',') || id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!(
                "constraint id '{id}' must be non-empty without commas or whitespace"
            )));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "constraint '{id}': gamma must be > 0, got {gamma}"
            )));
        }
        kind.validate()?;
        Ok(Self {
            id,
            kind,
            gamma,
            hazard_id: hazard_id.into(),
        })
    }

    /// Checks that the constraint applies to `model` and that any braking
    /// authority it assumes equals the plant's actual symmetric bound.
    pub fn check_model(&self, model: &PlantModel) -> Result<()> {
        if !self.kind.accepts_state_dim(model.state_dim()) {
            return Err(Error::InvalidConfig(format!(
                "constraint '{}' ({}) does not apply to {:?}",
                self.id,
                self.kind.name(),
                model.kind()
            )));
        }
        if let Some(u_max) = self.kind.u_max() {
            for (axis, b) in model.control_bounds().iter().enumerate() {
                if b.min != -u_max || b.max != u_max {
                    return Err(Error::InvalidConfig(format!(
                        "constraint '{}' assumes u_max={u_max} but axis {axis} is bounded by [{}, {}]",
                        self.id, b.min, b.max
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_state(&self, state: &PlantState) -> Result<()> {
        let n = state.x.len();
        if !self.kind.accepts_state_dim(n) {
            return Err(Error::InvalidState(format!(
                "constraint '{}' ({}) cannot evaluate a {n}-dimensional state",
                self.id,
                self.kind.name()
            )));
        }
        if state.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("state has non-finite entries".into()));
        }
        Ok(())
    }
}

fn velocity(x: &[f64]) -> &[f64] {
    &x[x.len() / 2..]
}

/// Radial geometry of a planar state about `center`: distance, unit normal and
/// outward radial speed. `None` at the center itself.
fn radial(x: &[f64], center: [f64; 2]) -> (f64, Option<[f64; 2]>, f64) {
    let dp = [x[0] - center[0], x[1] - center[1]];
    let d = dp[0].hypot(dp[1]);
    let v = [x[2], x[3]];
    if d == 0.0 {
        // Every direction points outward from the center.
        return (0.0, None, v[0].hypot(v[1]));
    }
    let n = [dp[0] / d, dp[1] / d];
    (d, Some(n), n[0] * v[0] + n[1] * v[1])
}

pub fn eval_h(c: &BarrierConstraint, state: &PlantState) -> Result<f64> {
    c.check_state(state)?;
    let x = &state.x;
    Ok(match c.kind {
        ConstraintKind::Geofence1d { p_limit, u_max } => {
            let (p, v) = (x[0], x[1]);
            p_limit - p - v * v.abs() / (2.0 * u_max)
        }
        ConstraintKind::Geofence2dCircle {
            center,
            radius,
            u_max,
        } => {
            let (d, _, v_r) = radial(x, center);
            let out = v_r.max(0.0);
            radius - d - out * out / (2.0 * u_max)
        }
        ConstraintKind::SpeedLimit { v_max } => {
            v_max * v_max - velocity(x).iter().map(|v| v * v).sum::<f64>()
        }
    })
}

pub fn eval_grad_h(c: &BarrierConstraint, state: &PlantState) -> Result<Vec<f64>> {
    c.check_state(state)?;
    let x = &state.x;
    Ok(match c.kind {
        ConstraintKind::Geofence1d { u_max, .. } => vec![-1.0, -x[1].abs() / u_max],
        ConstraintKind::Geofence2dCircle { center, u_max, .. } => {
            let (d, n, v_r) = radial(x, center);
            let n = n.ok_or_else(|| Error::SingularGradient(c.id.clone()))?;
            let q = v_r.max(0.0) / u_max;
            let v = [x[2], x[3]];
            // ∂v_r/∂p is the tangential velocity over the distance.
            let dvr_dp = [(v[0] - v_r * n[0]) / d, (v[1] - v_r * n[1]) / d];
            vec![
                -n[0] - q * dvr_dp[0],
                -n[1] - q * dvr_dp[1],
                -q * n[0],
                -q * n[1],
            ]
        }
        ConstraintKind::SpeedLimit { .. } => {
            let half = x.len() / 2;
            let mut g = vec![0.0; x.len()];
            for i in half..x.len() {
                g[i] = -2.0 * x[i];
            }
            g
        }
    })
}

/// One linear constraint `a·u ≥ b` of the filter QP.
#[derive(Debug, Clone, PartialEq)]
pub struct CbfRow {
    pub a: Vec<f64>,
    pub b: f64,
}

/// `a = ∇h·g(x)`, `b = −∇h·f(x) − γ·h(x)`.
pub fn cbf_row(c: &BarrierConstraint, model: &PlantModel, state: &PlantState) -> Result<CbfRow> {
    let dyn_ = eval_dynamics(model, state)?;
    let h = eval_h(c, state)?;
    let grad = eval_grad_h(c, state)?;
    let m = model.control_dim();
    let a = (0..m)
        .map(|j| {
            grad.iter()
                .zip(&dyn_.actuation)
                .map(|(g, row)| g * row[j])
                .sum()
        })
        .collect();
    let lf_h: f64 = grad.iter().zip(&dyn_.drift).map(|(g, f)| g * f).sum();
    Ok(CbfRow {
        a,
        b: -lf_h - c.gamma * h,
    })
}

/// Central-difference estimate of `∇h` with step `eps` on every state entry.
pub fn finite_difference_grad(
    c: &BarrierConstraint,
    state: &PlantState,
    eps: f64,
) -> Result<Vec<f64>> {
    let mut g = Vec::with_capacity(state.x.len());
    for i in 0..state.x.len() {
        let mut plus = state.clone();
        let mut minus = state.clone();
        plus.x[i] += eps;
        minus.x[i] -= eps;
        g.push((eval_h(c, &plus)? - eval_h(c, &minus)?) / (2.0 * eps));
    }
    Ok(g)
}

/// `‖analytic − numeric‖ / max(‖analytic‖, 1)`.
pub fn gradient_relative_error(c: &BarrierConstraint, state: &PlantState, eps: f64) -> Result<f64> {
    let analytic = eval_grad_h(c, state)?;
    let numeric = finite_difference_grad(c, state, eps)?;
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    Ok(l2(&diff) / l2(&analytic).max(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub constraint: String,
    pub states: usize,
    pub max_rel_error: f64,
}

/// Gradient check over random states for one instance of every constraint
/// kind. States near kinks of `h` (zero speed for the 1D fence, zero radial
/// speed or the center for the circle) are resampled.
pub fn gradient_check_suite(
    states_per_kind: usize,
    seed: u64,
    eps: f64,
) -> Result<Vec<GradientCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = [
        (
            BarrierConstraint::new(
                "geofence_1d",
                ConstraintKind::Geofence1d {
                    p_limit: 1.0,
                    u_max: 1.5,
                },
                1.0,
                "H1",
            )?,
            2usize,
        ),
        (
            BarrierConstraint::new(
                "geofence_2d_circle",
                ConstraintKind::Geofence2dCircle {
                    center: [0.5, -1.0],
                    radius: 5.0,
                    u_max: 1.2,
                },
                1.0,
                "H2",
            )?,
            4,
        ),
        (
            BarrierConstraint::new(
                "speed_limit_1d",
                ConstraintKind::SpeedLimit { v_max: 2.0 },
                1.0,
                "H3",
            )?,
            2,
        ),
        (
            BarrierConstraint::new(
                "speed_limit_2d",
                ConstraintKind::SpeedLimit { v_max: 2.0 },
                1.0,
                "H3",
            )?,
            4,
        ),
    ];
    let mut out = Vec::new();
    for (c, n) in cases {
        let mut worst: f64 = 0.0;
        let mut done = 0;
        while done < states_per_kind {
            let half = n / 2;
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    if i < half {
                        rng.gen_range(-6.0..6.0)
                    } else {
                        rng.gen_range(-3.0..3.0)
                    }
                })
                .collect();
            let near_kink = match c.kind {
                ConstraintKind::Geofence1d { .. } => x[1].abs() < 1e-3,
                ConstraintKind::Geofence2dCircle { center, .. } => {
                    let (d, _, v_r) = radial(&x, center);
                    d < 1e-2 || v_r.abs() < 1e-3
                }
                ConstraintKind::SpeedLimit { .. } => false,
            };
            if near_kink {
                continue;
            }
            worst = worst.max(gradient_relative_error(&c, &PlantState::new(x, 0.0), eps)?);
            done += 1;
        }
        out.push(GradientCheck {
            constraint: c.id.clone(),
            states: states_per_kind,
            max_rel_error: worst,
        });
    }
    Ok(out)
}
