//! Minimal-deviation QP: `min ½‖u − u_des‖²` s.t. `a_i·u ≥ b_i`, `lo ≤ u ≤ hi`.
//!
//! The Hessian is the identity, so every equality-constrained subproblem is a
//! projection. The iteration is the dual active-set scheme of Goldfarb and
//! Idnani: it starts from the box-clamped command (dual feasible, with the
//! clamped bounds active), repeatedly adds the lowest-index violated
//! constraint and drops active constraints whose multipliers would turn
//! negative. Each change strictly increases the dual objective, so the
//! working set never repeats and the loop terminates.
//!
//! An empty feasible set is detected when a violated constraint can be
//! neither reached in the primal nor traded against a positive multiplier.
//! The fallback then minimizes the worst row violation over the box with the
//! same iteration on an epigraph problem in `(u, s)`, and finally returns the
//! point closest to `u_des` among those achieving that violation.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::Bound;
use crate::error::{Error, Result};

/// One row `a·u ≥ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpRow {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub u_des: Vec<f64>,
    pub rows: Vec<QpRow>,
    pub bounds: Vec<Bound>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    /// `u_des` satisfied everything and was returned untouched.
    Passthrough,
    Modified,
    /// No command satisfies every row; the least-violation command was returned.
    InfeasibleFallback,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Passthrough => "passthrough",
            SolveStatus::Modified => "modified",
            SolveStatus::InfeasibleFallback => "infeasible_fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: Vec<f64>,
    /// Indices of rows in the final working set, ascending.
    pub active_rows: Vec<usize>,
    pub status: SolveStatus,
    /// KKT multipliers: `u − u_des = Σ row_multipliers[i]·a_i + lower − upper`.
    pub row_multipliers: Vec<f64>,
    pub lower_multipliers: Vec<f64>,
    pub upper_multipliers: Vec<f64>,
    /// Worst row violation `max(0, max_i b_i − a_i·u)`; zero unless infeasible.
    pub max_violation: f64,
    /// Working-set changes performed (all phases).
    pub changes: usize,
}

// Feasibility slack accepted when deciding whether a constraint is violated.
const FEAS_TOL: f64 = 1e-12;
const DEP_TOL: f64 = 1e-14;

/// A constraint `c·x ≥ d` in the solver's own variable space.
#[derive(Debug, Clone)]
struct Lin {
    c: Vec<f64>,
    d: f64,
}

impl Lin {
    fn slack(&self, x: &[f64]) -> f64 {
        dot(&self.c, x) - self.d
    }

    fn violated(&self, x: &[f64]) -> bool {
        let s = self.slack(x);
        s < -FEAS_TOL * (1.0 + self.d.abs())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

struct Working {
    x: Vec<f64>,
    active: Vec<usize>,
    lambda: Vec<f64>,
}

enum Outcome {
    Optimal(Working),
    Infeasible,
}

/// Dual active-set iteration for `min ½‖x − target‖²` over `cons`, from a
/// dual-feasible starting point.
fn dual_active_set(
    cons: &[Lin],
    start: Working,
    cap: usize,
    changes: &mut usize,
) -> Result<Outcome> {
    let mut w = start;
    let n = w.x.len();
    loop {
        let Some(p) = (0..cons.len()).find(|&k| !w.active.contains(&k) && cons[k].violated(&w.x))
        else {
            return Ok(Outcome::Optimal(w));
        };
        let cp = &cons[p].c;
        let mut lambda_p = 0.0;
        loop {
            bump(changes, cap)?;
            let q = w.active.len();
            // r = (NᵀN)⁻¹Nᵀc_p, z = c_p − N r (component of c_p outside the active span).
            let (r, z) = if q == 0 {
                (Vec::new(), cp.clone())
            } else {
                let nmat = DMatrix::from_fn(n, q, |i, j| cons[w.active[j]].c[i]);
                let gram = nmat.transpose() * &nmat;
                let rhs = nmat.transpose() * DVector::from_column_slice(cp);
                let r = gram
                    .lu()
                    .solve(&rhs)
                    .expect("active normals are kept linearly independent");
                let z = DVector::from_column_slice(cp) - &nmat * &r;
                (r.iter().copied().collect(), z.iter().copied().collect())
            };

            // Largest dual step before an active multiplier hits zero.
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (j, &rj) in r.iter().enumerate() {
                if rj > DEP_TOL {
                    let t = w.lambda[j] / rj;
                    if t < t1 {
                        t1 = t;
                        drop = Some(j);
                    }
                }
            }
            // Primal step that makes constraint p tight.
            let zz = dot(&z, &z);
            let t2 = if zz > DEP_TOL * dot(cp, cp) {
                (-cons[p].slack(&w.x) / zz).max(0.0)
            } else {
                f64::INFINITY
            };

            if t1.is_infinite() && t2.is_infinite() {
                return Ok(Outcome::Infeasible);
            }
            let t = t1.min(t2);
            if t2.is_finite() {
                for (x, z) in w.x.iter_mut().zip(&z) {
                    *x += t * z;
                }
            }
            for (l, rj) in w.lambda.iter_mut().zip(&r) {
                *l = (*l - t * rj).max(0.0);
            }
            lambda_p += t;

            if t2 <= t1 {
                w.active.push(p);
                w.lambda.push(lambda_p);
                break;
            }
            let j = drop.expect("finite t1 has a blocking multiplier");
            w.active.remove(j);
            w.lambda.remove(j);
        }
    }
}

fn bump(changes: &mut usize, cap: usize) -> Result<()> {
    *changes += 1;
    if *changes > cap {
        Err(Error::SolverStall(cap))
    } else {
        Ok(())
    }
}

/// Box rows follow the problem rows: lower bounds, then upper bounds.
fn constraint_list(rows: &[QpRow], bounds: &[Bound], extra: usize) -> Vec<Lin> {
    let n = bounds.len() + extra;
    let mut cons: Vec<Lin> = rows
        .iter()
        .map(|r| {
            let mut c = r.a.clone();
            c.resize(n, 0.0);
            Lin { c, d: r.b }
        })
        .collect();
    for (j, b) in bounds.iter().enumerate() {
        let mut c = vec![0.0; n];
        c[j] = 1.0;
        cons.push(Lin { c, d: b.min });
    }
    for (j, b) in bounds.iter().enumerate() {
        let mut c = vec![0.0; n];
        c[j] = -1.0;
        cons.push(Lin { c, d: -b.max });
    }
    cons
}

/// Box-clamped start with the clamped bounds active; their multipliers equal the
/// clamping distance, which makes the start dual feasible.
fn clamped_start(target: &[f64], bounds: &[Bound], m: usize) -> Working {
    let nb = bounds.len();
    let mut x = target.to_vec();
    let mut active = Vec::new();
    let mut lambda = Vec::new();
    for (j, b) in bounds.iter().enumerate() {
        if target[j] < b.min {
            x[j] = b.min;
            active.push(m + j);
            lambda.push(b.min - target[j]);
        } else if target[j] > b.max {
            x[j] = b.max;
            active.push(m + nb + j);
            lambda.push(target[j] - b.max);
        }
    }
    Working { x, active, lambda }
}

impl QpProblem {
    pub fn control_dim(&self) -> usize {
        self.u_des.len()
    }

    /// Maximum number of working-set changes before [`Error::SolverStall`].
    pub fn iteration_cap(&self) -> usize {
        let k = self.control_dim() + self.rows.len() + 8;
        k * k
    }

    fn validate(&self) -> Result<()> {
        let n = self.control_dim();
        if n == 0 || self.bounds.len() != n {
            return Err(Error::InvalidState(format!(
                "QP has {n} variables and {} bounds",
                self.bounds.len()
            )));
        }
        if self.u_des.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("u_des has non-finite entries".into()));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.a.len() != n {
                return Err(Error::InvalidState(format!(
                    "row {i} has {} coefficients, expected {n}",
                    r.a.len()
                )));
            }
            if r.a.iter().any(|v| !v.is_finite()) || !r.b.is_finite() {
                return Err(Error::InvalidState(format!("row {i} is not finite")));
            }
        }
        Ok(())
    }

    /// Worst violation of the rows at `u` (zero when all hold).
    pub fn max_violation(&self, u: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.b - dot(&r.a, u))
            .fold(0.0, f64::max)
    }
}

pub fn solve_qp(qp: &QpProblem) -> Result<QpSolution> {
    qp.validate()?;
    let m = qp.rows.len();
    let cap = qp.iteration_cap();
    let mut changes = 0;

    let cons = constraint_list(&qp.rows, &qp.bounds, 0);
    let start = clamped_start(&qp.u_des, &qp.bounds, m);
    let clamped = !start.active.is_empty();
    match dual_active_set(&cons, start, cap, &mut changes)? {
        Outcome::Optimal(w) => {
            let status = if !clamped && changes == 0 {
                SolveStatus::Passthrough
            } else {
                SolveStatus::Modified
            };
            Ok(finish(qp, w, status, 0.0, changes))
        }
        Outcome::Infeasible => fallback(qp, cap, changes),
    }
}

fn finish(
    qp: &QpProblem,
    w: Working,
    status: SolveStatus,
    max_violation: f64,
    changes: usize,
) -> QpSolution {
    let n = qp.control_dim();
    let m = qp.rows.len();
    let mut u: Vec<f64> = w.x[..n].to_vec();
    for (v, b) in u.iter_mut().zip(&qp.bounds) {
        if !b.contains(*v) {
            *v = b.clamp(*v);
        }
    }
    let mut row_multipliers = vec![0.0; m];
    let mut lower_multipliers = vec![0.0; n];
    let mut upper_multipliers = vec![0.0; n];
    let mut active_rows = Vec::new();
    for (&k, &l) in w.active.iter().zip(&w.lambda) {
        if k < m {
            row_multipliers[k] = l;
            active_rows.push(k);
        } else if k < m + n {
            lower_multipliers[k - m] = l;
        } else if k < m + 2 * n {
            upper_multipliers[k - m - n] = l;
        }
    }
    active_rows.sort_unstable();
    QpSolution {
        u,
        active_rows,
        status,
        row_multipliers,
        lower_multipliers,
        upper_multipliers,
        max_violation,
        changes,
    }
}

/// Least-max-violation command within the box, closest to `u_des` among ties.
fn fallback(qp: &QpProblem, cap: usize, mut changes: usize) -> Result<QpSolution> {
    let n = qp.control_dim();
    let m = qp.rows.len();

    // Phase A: minimize s subject to a_i·u + s ≥ b_i, box, s ≥ 0, as the
    // identity-Hessian problem with target (u_des, −big). For a large enough
    // pull on s the regularized solution is an exact minimizer of s.
    let scale = 1.0
        + qp.u_des.iter().map(|v| v.abs()).fold(0.0, f64::max)
        + qp.bounds
            .iter()
            .map(|b| b.min.abs().max(b.max.abs()))
            .fold(0.0, f64::max)
        + qp.rows.iter().map(|r| r.b.abs()).fold(0.0, f64::max);
    let big = 1e6 * scale;
    let mut cons = constraint_list(&qp.rows, &qp.bounds, 1);
    for c in cons.iter_mut().take(m) {
        c.c[n] = 1.0;
    }
    let mut s_nonneg = vec![0.0; n + 1];
    s_nonneg[n] = 1.0;
    cons.push(Lin {
        c: s_nonneg,
        d: 0.0,
    });

    let mut target = qp.u_des.clone();
    target.push(-big);
    let mut start = clamped_start(&qp.u_des, &qp.bounds, m);
    start.x.push(-big);
    let epi = match dual_active_set(&cons, start, cap, &mut changes)? {
        Outcome::Optimal(w) => w,
        Outcome::Infeasible => unreachable!("epigraph problem is always feasible"),
    };
    let mut u_a: Vec<f64> = epi.x[..n].to_vec();
    for (v, b) in u_a.iter_mut().zip(&qp.bounds) {
        *v = b.clamp(*v);
    }
    let worst = qp.max_violation(&u_a);

    // Phase B: closest point to u_des among those with violation ≤ worst.
    // Exact first; rounding in `worst` can make the relaxed set empty, so
    // widen slightly on failure.
    let mut slack = 0.0;
    for attempt in 0..8 {
        let relaxed = QpProblem {
            u_des: qp.u_des.clone(),
            rows: qp
                .rows
                .iter()
                .map(|r| QpRow {
                    a: r.a.clone(),
                    b: r.b - worst - slack,
                })
                .collect(),
            bounds: qp.bounds.clone(),
        };
        let cons = constraint_list(&relaxed.rows, &relaxed.bounds, 0);
        let start = clamped_start(&qp.u_des, &qp.bounds, m);
        if let Outcome::Optimal(w) = dual_active_set(&cons, start, cap, &mut changes)? {
            let mut sol = finish(qp, w, SolveStatus::InfeasibleFallback, 0.0, changes);
            sol.max_violation = qp.max_violation(&sol.u);
            return Ok(sol);
        }
        slack = if attempt == 0 {
            worst.abs() * 1e-12 + 1e-15
        } else {
            slack * 1e3
        };
    }
    // Phase A's point already achieves the minimal violation.
    Ok(QpSolution {
        max_violation: worst,
        row_multipliers: vec![0.0; m],
        lower_multipliers: vec![0.0; n],
        upper_multipliers: vec![0.0; n],
        active_rows: Vec::new(),
        status: SolveStatus::InfeasibleFallback,
        u: u_a,
        changes,
    })
}
