//! Active-set invariance filter.
//!
//! Each control step builds one barrier row per constraint, adds the actuator
//! box and solves the minimal-deviation QP. Commands that already satisfy
//! every row pass through untouched; others are projected onto the admissible
//! set.

pub mod qp;

use std::time::Instant;

use crate::barrier::{cbf_row, BarrierConstraint};
use crate::dynamics::{l2, ControlInput, PlantModel, PlantState};
use crate::error::{Error, Result};

pub use qp::{solve_qp, QpProblem, QpRow, QpSolution, SolveStatus};

/// A filter QP together with the constraint id behind each row.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledQp {
    pub problem: QpProblem,
    pub row_ids: Vec<String>,
}

/// Builds the QP for `state`. Rows with `a = 0` are dropped when vacuous
/// (`b ≤ 0`) and rejected when they demand something no command can deliver.
pub fn assemble_qp(
    constraints: &[BarrierConstraint],
    model: &PlantModel,
    state: &PlantState,
    u_des: &ControlInput,
) -> Result<AssembledQp> {
    model.check_state(state)?;
    if u_des.values().len() != model.control_dim() {
        return Err(Error::InvalidState(format!(
            "u_des has {} entries, model expects {}",
            u_des.values().len(),
            model.control_dim()
        )));
    }
    let mut rows = Vec::with_capacity(constraints.len());
    let mut row_ids = Vec::with_capacity(constraints.len());
    for c in constraints {
        let r = cbf_row(c, model, state)?;
        if r.a.iter().all(|&a| a == 0.0) {
            if r.b > 0.0 {
                return Err(Error::StructurallyInfeasible(c.id.clone()));
            }
            continue;
        }
        rows.push(QpRow { a: r.a, b: r.b });
        row_ids.push(c.id.clone());
    }
    Ok(AssembledQp {
        problem: QpProblem {
            u_des: u_des.values().to_vec(),
            rows,
            bounds: model.control_bounds().to_vec(),
        },
        row_ids,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub u_out: ControlInput,
    pub intervened: bool,
    /// `‖u_out − u_des‖`.
    pub deviation: f64,
    pub active_row_ids: Vec<String>,
    pub status: SolveStatus,
    /// Worst barrier-row violation of `u_out`; non-zero only for fallbacks.
    pub max_violation: f64,
    /// Wall-clock seconds spent assembling and solving.
    pub solve_time: f64,
}

pub fn filter_control(
    constraints: &[BarrierConstraint],
    model: &PlantModel,
    state: &PlantState,
    u_des: &ControlInput,
) -> Result<FilterResult> {
    let started = Instant::now();
    let qp = assemble_qp(constraints, model, state, u_des)?;
    let sol = solve_qp(&qp.problem)?;
    let solve_time = started.elapsed().as_secs_f64();

    let diff: Vec<f64> = sol
        .u
        .iter()
        .zip(u_des.values())
        .map(|(a, b)| a - b)
        .collect();
    let deviation = l2(&diff);
    // A solver that moved and came back reports passthrough; fallbacks are
    // always surfaced as interventions.
    let status = match sol.status {
        SolveStatus::Modified if deviation == 0.0 => SolveStatus::Passthrough,
        s => s,
    };
    let active_row_ids = sol
        .active_rows
        .iter()
        .map(|&i| qp.row_ids[i].clone())
        .collect();
    Ok(FilterResult {
        u_out: ControlInput::new(sol.u, model.control_bounds())?,
        intervened: status != SolveStatus::Passthrough,
        deviation,
        active_row_ids,
        status,
        max_violation: sol.max_violation,
        solve_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::ConstraintKind;
    use crate::dynamics::ModelKind;

    fn setup(gamma: f64) -> (Vec<BarrierConstraint>, PlantModel) {
        let c = BarrierConstraint::new(
            "geofence",
            ConstraintKind::Geofence1d {
                p_limit: 1.0,
                u_max: 1.0,
            },
            gamma,
            "H1",
        )
        .unwrap();
        let m = PlantModel::double_integrator(ModelKind::DoubleIntegrator1d, 1.0, 0.0).unwrap();
        (vec![c], m)
    }

    fn u(m: &PlantModel, v: f64) -> ControlInput {
        ControlInput::new(vec![v], m.control_bounds()).unwrap()
    }

    #[test]
    fn assemble_hand_example() {
        let (cs, m) = setup(1.0);
        let qp = assemble_qp(&cs, &m, &PlantState::new(vec![0.0, 1.0], 0.0), &u(&m, 1.0)).unwrap();
        assert_eq!(
            qp.problem.rows,
            vec![QpRow {
                a: vec![-1.0],
                b: 0.5
            }]
        );
        assert_eq!(qp.row_ids, vec!["geofence".to_string()]);
        assert_eq!(qp.problem.u_des, vec![1.0]);
        assert_eq!(qp.problem.bounds, m.control_bounds());
    }

    #[test]
    fn assemble_drops_vacuous_rows() {
        let (cs, m) = setup(1.0);
        let qp = assemble_qp(&cs, &m, &PlantState::new(vec![0.0, 0.0], 0.0), &u(&m, 1.0)).unwrap();
        assert!(qp.problem.rows.is_empty());
        let qp = assemble_qp(&[], &m, &PlantState::new(vec![0.0, 0.0], 0.0), &u(&m, 0.3)).unwrap();
        assert!(qp.problem.rows.is_empty());
        assert_eq!(solve_qp(&qp.problem).unwrap().u, vec![0.3]);
    }

    #[test]
    fn assemble_flags_structural_infeasibility() {
        // At v = 0 beyond the fence: a = 0, b = −γh > 0.
        let (cs, m) = setup(1.0);
        let err =
            assemble_qp(&cs, &m, &PlantState::new(vec![2.0, 0.0], 0.0), &u(&m, 0.0)).unwrap_err();
        match err {
            Error::StructurallyInfeasible(id) => assert_eq!(id, "geofence"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn safe_command_passes() {
        let (cs, m) = setup(1.0);
        let r =
            filter_control(&cs, &m, &PlantState::new(vec![0.0, -1.0], 0.0), &u(&m, 0.0)).unwrap();
        assert_eq!(r.u_out.values(), &[0.0]);
        assert!(!r.intervened);
        assert_eq!(r.deviation, 0.0);
        assert_eq!(r.status, SolveStatus::Passthrough);
    }

    #[test]
    fn unsafe_command_is_projected() {
        let (cs, m) = setup(1.0);
        let r =
            filter_control(&cs, &m, &PlantState::new(vec![0.0, 1.0], 0.0), &u(&m, 1.0)).unwrap();
        assert!((r.u_out.values()[0] + 0.5).abs() < 1e-12);
        assert!(r.intervened);
        assert!((r.deviation - 1.5).abs() < 1e-12);
        assert_eq!(r.active_row_ids, vec!["geofence".to_string()]);
        assert_eq!(r.status, SolveStatus::Modified);
    }

    #[test]
    fn empty_constraint_list_always_passes() {
        let (_, m) = setup(1.0);
        for v in [-1.0, -0.3, 0.0, 0.77, 1.0] {
            let r =
                filter_control(&[], &m, &PlantState::new(vec![5.0, 3.0], 0.0), &u(&m, v)).unwrap();
            assert_eq!(r.u_out.values(), &[v]);
            assert_eq!(r.status, SolveStatus::Passthrough);
        }
    }

    #[test]
    fn deterministic_apart_from_timing() {
        let (cs, m) = setup(2.0);
        let s = PlantState::new(vec![0.3, 0.9], 0.0);
        let a = filter_control(&cs, &m, &s, &u(&m, 0.8)).unwrap();
        let b = filter_control(&cs, &m, &s, &u(&m, 0.8)).unwrap();
        assert_eq!(a.u_out, b.u_out);
        assert_eq!(a.deviation.to_bits(), b.deviation.to_bits());
        assert_eq!(a.active_row_ids, b.active_row_ids);
        assert_eq!(a.status, b.status);
    }
}
