//! Dense bounded-variable simplex and the per-station battery subproblem:
//! minimize sum_t lambda^t Pb^t over the storage polytope.
//!
//! The simplex is two-phase with Bland's rule throughout, so every solve is
//! deterministic and cycle-free. Problem sizes here are tiny (a few dozen
//! variables), so the basis is refactored densely at each pivot.

use crate::model::BatteryParams;
use thiserror::Error;

const FEAS_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("LP is infeasible (phase-1 objective {0:.3e})")]
    Infeasible(f64),
    #[error("LP is unbounded (entering column {0})")]
    Unbounded(usize),
    #[error("simplex failed to converge within {0} pivots")]
    PivotLimit(usize),
    #[error("singular basis: {0}")]
    SingularBasis(String),
}

/// minimize c'x  s.t.  A x = b,  lower <= x <= upper.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub num_vars: usize,
    pub c: Vec<f64>,
    /// Row-major m x n constraint matrix.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals y (one per equality row).
    pub duals: Vec<f64>,
    /// Reduced costs per variable at the final basis.
    pub reduced_costs: Vec<f64>,
    /// c'x minus the dual bound; nonnegative and ~0 at an optimal vertex.
    pub duality_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

/// Bounded-variable two-phase dense simplex with Bland's rule.
pub fn dense_simplex(prob: &LpProblem) -> Result<LpSolution, LpError> {
    let n = prob.num_vars;
    let m = prob.b.len();
    assert_eq!(prob.a.len(), m * n);
    assert_eq!(prob.c.len(), n);

    // Extended problem with one artificial per row for phase 1.
    let total = n + m;
    let mut lower = prob.lower.clone();
    let mut upper = prob.upper.clone();
    lower.extend(std::iter::repeat(0.0).take(m));
    upper.extend(std::iter::repeat(f64::INFINITY).take(m));

    // Start all structural variables at a finite bound.
    let mut state = vec![VarState::AtLower; total];
    let mut x = vec![0.0; total];
    for j in 0..n {
        if prob.lower[j].is_finite() {
            state[j] = VarState::AtLower;
            x[j] = prob.lower[j];
        } else if prob.upper[j].is_finite() {
            state[j] = VarState::AtUpper;
            x[j] = prob.upper[j];
        } else {
            state[j] = VarState::AtLower;
            x[j] = 0.0;
            lower[j] = f64::NEG_INFINITY;
        }
    }

    // Artificial columns absorb the residual with +-1 coefficients.
    let mut residual = prob.b.clone();
    for (i, r) in residual.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..n {
            acc += prob.a[i * n + j] * x[j];
        }
        *r -= acc;
        let _ = i;
    }
    let mut art_sign = vec![1.0; m];
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    for i in 0..m {
        art_sign[i] = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
        x[n + i] = residual[i].abs();
        state[n + i] = VarState::Basic;
        basis.push(n + i);
    }

    let col = |j: usize, i: usize| -> f64 {
        if j < n {
            prob.a[i * n + j]
        } else if j - n == i {
            art_sign[j - n]
        } else {
            0.0
        }
    };

    // Phase 1: minimize the sum of artificials.
    let mut cost1 = vec![0.0; total];
    for j in n..total {
        cost1[j] = 1.0;
    }
    let limit = 200 * (total + m).max(50);
    simplex_core(
        &cost1, m, total, &lower, &upper, &col, &mut basis, &mut state, &mut x, limit,
    )?;
    let phase1: f64 = (n..total).map(|j| x[j]).sum();
    if phase1 > 1e-7 {
        return Err(LpError::Infeasible(phase1));
    }
    // Pin artificials to zero so they never re-enter.
    for j in n..total {
        upper[j] = 0.0;
        if state[j] != VarState::Basic {
            state[j] = VarState::AtLower;
            x[j] = 0.0;
        }
    }

    // Phase 2: original costs (artificials cost zero and are pinned).
    let mut cost2 = vec![0.0; total];
    cost2[..n].copy_from_slice(&prob.c);
    simplex_core(
        &cost2, m, total, &lower, &upper, &col, &mut basis, &mut state, &mut x, limit,
    )?;

    // Duals and reduced costs from the final basis.
    let lu = basis_lu(&col, &basis, m)?;
    let cb: Vec<f64> = basis.iter().map(|&j| cost2[j]).collect();
    let y = solve_transposed(&lu, &cb, m);
    let mut reduced = vec![0.0; n];
    for j in 0..n {
        let mut d = prob.c[j];
        for i in 0..m {
            d -= y[i] * prob.a[i * n + j];
        }
        reduced[j] = d;
    }
    let objective: f64 = prob.c.iter().zip(x.iter()).map(|(c, v)| c * v).sum();
    // Dual bound: y'b + sum of bound contributions of nonbasic variables.
    let mut dual_obj: f64 = y.iter().zip(prob.b.iter()).map(|(a, b)| a * b).sum();
    for j in 0..n {
        match state[j] {
            VarState::AtLower => dual_obj += reduced[j].max(0.0) * prob.lower[j],
            VarState::AtUpper => dual_obj += reduced[j].min(0.0) * prob.upper[j],
            VarState::Basic => {}
        }
    }
    Ok(LpSolution {
        x: x[..n].to_vec(),
        objective,
        duals: y,
        reduced_costs: reduced,
        duality_gap: objective - dual_obj,
    })
}

/// Runs bounded simplex pivots until optimality. `col(j, i)` yields entry i
/// of column j.
#[allow(clippy::too_many_arguments)]
fn simplex_core(
    cost: &[f64],
    m: usize,
    total: usize,
    lower: &[f64],
    upper: &[f64],
    col: &dyn Fn(usize, usize) -> f64,
    basis: &mut Vec<usize>,
    state: &mut [VarState],
    x: &mut [f64],
    pivot_limit: usize,
) -> Result<(), LpError> {
    for _pivot in 0..pivot_limit {
        let lu = basis_lu(col, basis, m)?;
        let cb: Vec<f64> = basis.iter().map(|&j| cost[j]).collect();
        let y = solve_transposed(&lu, &cb, m);

        // Bland: entering variable is the smallest eligible index.
        let mut entering: Option<(usize, bool)> = None; // (index, increasing)
        for j in 0..total {
            if state[j] == VarState::Basic {
                continue;
            }
            let mut d = cost[j];
            for i in 0..m {
                let aij = col(j, i);
                if aij != 0.0 {
                    d -= y[i] * aij;
                }
            }
            match state[j] {
                VarState::AtLower if d < -COST_TOL => {
                    entering = Some((j, true));
                    break;
                }
                VarState::AtUpper if d > COST_TOL => {
                    entering = Some((j, false));
                    break;
                }
                _ => {}
            }
        }
        let Some((enter, increasing)) = entering else {
            return Ok(());
        };

        // Direction of basic variables as the entering variable moves.
        let a_col: Vec<f64> = (0..m).map(|i| col(enter, i)).collect();
        let w = solve_forward(&lu, &a_col, m); // B^-1 a_enter
        let dir = if increasing { 1.0 } else { -1.0 };

        // Ratio test: smallest step that hits a bound.
        let mut step = upper[enter] - lower[enter]; // bound-flip step
        let mut leaving: Option<usize> = None; // position in basis
        for (pos, &bj) in basis.iter().enumerate() {
            let delta = -dir * w[pos];
            if delta > FEAS_TOL {
                let room = upper[bj] - x[bj];
                let t = room / delta;
                if t < step - 1e-12 || (t < step + 1e-12 && leaving.map_or(true, |l| bj < basis[l]))
                {
                    step = t;
                    leaving = Some(pos);
                }
            } else if delta < -FEAS_TOL {
                let room = lower[bj] - x[bj];
                let t = room / delta;
                if t < step - 1e-12 || (t < step + 1e-12 && leaving.map_or(true, |l| bj < basis[l]))
                {
                    step = t;
                    leaving = Some(pos);
                }
            }
        }
        if step.is_infinite() {
            return Err(LpError::Unbounded(enter));
        }
        let step = step.max(0.0);

        // Apply the move.
        x[enter] += dir * step;
        for (pos, &bj) in basis.iter().enumerate() {
            x[bj] -= dir * step * w[pos];
        }
        match leaving {
            None => {
                // Bound flip: entering variable runs to its other bound.
                state[enter] = if increasing {
                    x[enter] = upper[enter];
                    VarState::AtUpper
                } else {
                    x[enter] = lower[enter];
                    VarState::AtLower
                };
            }
            Some(pos) => {
                let out = basis[pos];
                let hit_upper = (x[out] - upper[out]).abs() <= (x[out] - lower[out]).abs();
                x[out] = if hit_upper { upper[out] } else { lower[out] };
                state[out] = if hit_upper {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                basis[pos] = enter;
                state[enter] = VarState::Basic;
            }
        }
    }
    Err(LpError::PivotLimit(pivot_limit))
}

struct BasisLu {
    lu: Vec<f64>,
    perm: Vec<usize>,
}

fn basis_lu(
    col: &dyn Fn(usize, usize) -> f64,
    basis: &[usize],
    m: usize,
) -> Result<BasisLu, LpError> {
    let mut mat = vec![0.0; m * m];
    for (pos, &j) in basis.iter().enumerate() {
        for i in 0..m {
            mat[i * m + pos] = col(j, i);
        }
    }
    let (lu, perm) = crate::linalg::lu_factor(&mat, m)
        .map_err(|e| LpError::SingularBasis(e.to_string()))?;
    Ok(BasisLu { lu, perm })
}

fn solve_forward(f: &BasisLu, rhs: &[f64], m: usize) -> Vec<f64> {
    crate::linalg::lu_solve(&f.lu, &f.perm, m, rhs)
}

/// Solves B' y = cb given the LU factors of B: y = B^{-T} cb.
fn solve_transposed(f: &BasisLu, cb: &[f64], m: usize) -> Vec<f64> {
    // Solve via the identity y' B = cb': form B from factors is wasteful;
    // instead solve (PB)' z with the stored LU of PB = LU: B = P^{-1}LU, so
    // B' y = U' L' P^{-1 T} ... simpler: reconstruct B once (m is tiny).
    let mut bt = vec![0.0; m * m];
    // Reconstruct PB = L*U, then B[i][j] = (LU)[perm^{-1}(i)][j].
    let mut pb = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            let kmax = i.min(j);
            for k in 0..=kmax {
                let lik = if k == i { 1.0 } else { f.lu[i * m + k] };
                if k <= j {
                    acc += lik * f.lu[k * m + j];
                }
            }
            pb[i * m + j] = acc;
        }
    }
    for (pi, &orig) in f.perm.iter().enumerate() {
        for j in 0..m {
            bt[j * m + orig] = pb[pi * m + j];
        }
    }
    let (lu2, p2) = crate::linalg::lu_factor(&bt, m).expect("basis transpose is nonsingular");
    crate::linalg::lu_solve(&lu2, &p2, m, cb)
}

// ---------------------------------------------------------------------------
// Battery subproblem
// ---------------------------------------------------------------------------

/// Per-station battery subproblem: minimize sum_t lambda^t Pb^t subject to
/// the storage dynamics and limits.
#[derive(Debug, Clone)]
pub struct BatteryLp {
    pub lambda: Vec<f64>,
    pub params: BatteryParams,
}

/// Optimal battery trajectories.
#[derive(Debug, Clone)]
pub struct BatteryTrajectory {
    pub pb: Vec<f64>,
    pub stored: Vec<f64>,
    pub objective: f64,
}

/// Solves the battery LP, then reselects among alternate optima the schedule
/// minimizing sum_t |Pb^t| (with the optimal value pinned), so repeated runs
/// and averaged schedules stay stable.
pub fn solve_battery_lp(prob: &BatteryLp) -> Result<BatteryTrajectory, LpError> {
    let t = prob.lambda.len();
    let p = &prob.params;
    let stage1 = battery_lp_once(prob, None)?;
    let objective = stage1.objective;
    let refined = battery_lp_once(prob, Some(objective))?;
    let pb = refined.pb;
    let mut stored = vec![0.0; t];
    let mut prev = p.initial;
    for i in 0..t {
        prev += pb[i];
        stored[i] = prev;
    }
    Ok(BatteryTrajectory {
        pb,
        stored,
        objective,
    })
}

/// One battery LP solve. With `pin` set, the original objective is fixed to
/// that value and sum |Pb| is minimized instead.
fn battery_lp_once(prob: &BatteryLp, pin: Option<f64>) -> Result<BatteryTrajectory, LpError> {
    let t = prob.lambda.len();
    let p = &prob.params;
    // Variables: Pb[0..t], C[0..t], discharge slacks s[0..t-1] (for slots
    // >= 1), and when pinning, |Pb| majorants z[0..t] with 2t slack rows.
    let n_z = if pin.is_some() { t } else { 0 };
    let n_abs_slack = if pin.is_some() { 2 * t } else { 0 };
    let n = 2 * t + (t - 1).max(0) + n_z + n_abs_slack;
    let idx_pb = |i: usize| i;
    let idx_c = |i: usize| t + i;
    let idx_s = |i: usize| 2 * t + (i - 1); // discharge slack for slot i >= 1
    let idx_z = |i: usize| 2 * t + (t - 1) + i;
    let idx_zs = |r: usize| 2 * t + (t - 1) + t + r;

    let m = t + (t - 1) + if pin.is_some() { 2 * t + 1 } else { 0 };
    let mut a = vec![0.0; m * n];
    let mut b = vec![0.0; m];
    let mut row = 0;
    // Dynamics: C[0] - Pb[0] = C0 ; C[i] - C[i-1] - Pb[i] = 0.
    for i in 0..t {
        a[row * n + idx_c(i)] = 1.0;
        a[row * n + idx_pb(i)] = -1.0;
        if i == 0 {
            b[row] = p.initial;
        } else {
            a[row * n + idx_c(i - 1)] = -1.0;
        }
        row += 1;
    }
    // Discharge limit for slots >= 1: Pb[i] + eff*C[i-1] - s = 0, s >= 0.
    for i in 1..t {
        a[row * n + idx_pb(i)] = 1.0;
        a[row * n + idx_c(i - 1)] = p.efficiency;
        a[row * n + idx_s(i)] = -1.0;
        row += 1;
    }
    if let Some(v) = pin {
        // z_i >= |Pb_i|:  z - Pb - zs1 = 0, z + Pb - zs2 = 0 with zs >= 0.
        for i in 0..t {
            a[row * n + idx_z(i)] = 1.0;
            a[row * n + idx_pb(i)] = -1.0;
            a[row * n + idx_zs(2 * i)] = -1.0;
            row += 1;
            a[row * n + idx_z(i)] = 1.0;
            a[row * n + idx_pb(i)] = 1.0;
            a[row * n + idx_zs(2 * i + 1)] = -1.0;
            row += 1;
        }
        // Pin the stage-1 objective.
        for i in 0..t {
            a[row * n + idx_pb(i)] = prob.lambda[i];
        }
        b[row] = v;
        row += 1;
    }
    debug_assert_eq!(row, m);

    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    for i in 0..t {
        lower[idx_pb(i)] = p.charge_min;
        upper[idx_pb(i)] = p.charge_max;
        lower[idx_c(i)] = 0.0;
        upper[idx_c(i)] = p.capacity;
    }
    // Slot-0 discharge limit folds into the Pb bound.
    lower[idx_pb(0)] = p.charge_min.max(-p.efficiency * p.initial);
    for i in 1..t {
        lower[idx_s(i)] = 0.0;
        upper[idx_s(i)] = f64::INFINITY;
    }
    let mut c = vec![0.0; n];
    if pin.is_some() {
        for i in 0..t {
            lower[idx_z(i)] = 0.0;
            c[idx_z(i)] = 1.0;
        }
        for r in 0..2 * t {
            lower[idx_zs(r)] = 0.0;
        }
    } else {
        for i in 0..t {
            c[idx_pb(i)] = prob.lambda[i];
        }
    }

    let lp = LpProblem {
        num_vars: n,
        c,
        a,
        b,
        lower,
        upper,
    };
    let sol = dense_simplex(&lp)?;
    let pb: Vec<f64> = (0..t).map(|i| sol.x[idx_pb(i)]).collect();
    let objective: f64 = pb.iter().zip(prob.lambda.iter()).map(|(x, l)| x * l).sum();
    let stored: Vec<f64> = (0..t).map(|i| sol.x[idx_c(i)]).collect();
    Ok(BatteryTrajectory {
        pb,
        stored,
        objective,
    })
}
