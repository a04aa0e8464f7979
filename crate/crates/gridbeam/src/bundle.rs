//! Proximal bundle method for the nonsmooth per-station subproblem
//! min_p G(p) - lambda'p, with the stabilizing QP solved through its dual,
//! a quadratic program over the probability simplex.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("objective appears unbounded below (iterate norm {norm:.3e})")]
    Unbounded { norm: f64 },
    #[error("proximal QP failed: {0}")]
    QpFailure(String),
}

/// One cutting plane: G~(point) and a subgradient there.
#[derive(Debug, Clone)]
pub struct Cut {
    pub point: Vec<f64>,
    pub value: f64,
    pub subgrad: Vec<f64>,
}

impl Cut {
    /// Value of this cut's affine minorant at q.
    pub fn eval(&self, q: &[f64]) -> f64 {
        self.value
            + self
                .subgrad
                .iter()
                .zip(q.iter().zip(self.point.iter()))
                .map(|(g, (qq, pp))| g * (qq - pp))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct BundleParams {
    /// Serious-step acceptance fraction, in (0,1).
    pub theta: f64,
    pub rho_init: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub max_iters: usize,
    pub max_cuts: usize,
    /// Terminate when the prox step returns to the center within this.
    pub tol_point: f64,
    /// Terminate when predicted descent falls below tol*(1+|G~(y)|).
    pub tol_descent: f64,
    /// Iterate norm beyond which the objective is declared unbounded.
    pub divergence_radius: f64,
}

impl Default for BundleParams {
    fn default() -> Self {
        Self {
            theta: 0.5,
            rho_init: 1.0,
            rho_min: 1e-3,
            rho_max: 1e3,
            max_iters: 500,
            max_cuts: 50,
            tol_point: 1e-9,
            tol_descent: 1e-8,
            divergence_radius: 1e8,
        }
    }
}

/// Weight adaptation: shrink after a serious step, grow after a null step.
pub fn update_weight(rho: f64, serious: bool, params: &BundleParams) -> f64 {
    if serious {
        (rho / 10.0).max(params.rho_min)
    } else {
        (rho * 10.0).min(params.rho_max)
    }
}

#[derive(Debug, Clone)]
pub struct QpStep {
    pub p_next: Vec<f64>,
    /// Predicted descent eta >= 0.
    pub eta: f64,
    /// Simplex multipliers, one per cut.
    pub xi: Vec<f64>,
}

/// Solves the stabilized master problem
///   min_p  max_n cut_n(p) + rho/2 ||p - y||^2
/// through its dual, a QP over the probability simplex; returns the primal
/// reconstruction p = y - (1/rho) sum xi_n g_n and the predicted descent at
/// the center value `center_value` = G~(y).
pub fn solve_proximal_qp(
    cuts: &[Cut],
    center: &[f64],
    center_value: f64,
    rho: f64,
) -> Result<QpStep, BundleError> {
    let n = cuts.len();
    assert!(n > 0, "need at least one cut");
    let dim = center.len();
    // Q[a][b] = g_a'g_b / rho ; d[a] = cut value at the center.
    let mut q = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let dot: f64 = cuts[a]
                .subgrad
                .iter()
                .zip(cuts[b].subgrad.iter())
                .map(|(x, y)| x * y)
                .sum();
            q[a * n + b] = dot / rho;
            q[b * n + a] = dot / rho;
        }
    }
    let d: Vec<f64> = cuts.iter().map(|c| c.eval(center)).collect();
    let xi = simplex_qp(&q, &d, n).map_err(BundleError::QpFailure)?;
    let mut p_next = center.to_vec();
    for (a, &w) in xi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for j in 0..dim {
            p_next[j] -= w / rho * cuts[a].subgrad[j];
        }
    }
    let model: f64 = cuts
        .iter()
        .map(|c| c.eval(&p_next))
        .fold(f64::NEG_INFINITY, f64::max);
    let dist_sq: f64 = p_next
        .iter()
        .zip(center.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let eta = center_value - (model + 0.5 * rho * dist_sq);
    Ok(QpStep { p_next, eta, xi })
}

/// Solves min 1/2 xi'Q xi - d'xi over the probability simplex with a dense
/// primal-dual interior-point iteration. Deterministic and accurate to a
/// KKT residual around 1e-12 on the scales used here; Q only needs to be
/// positive semidefinite (duplicate or dependent cuts are fine).
fn simplex_qp(q: &[f64], d: &[f64], n: usize) -> Result<Vec<f64>, String> {
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let scale = 1.0
        + q.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
        + d.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut xi = vec![1.0 / n as f64; n];
    let mut mu = vec![scale; n];
    let mut nu = 0.0;

    let qx = |xi: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| q[i * n + j] * xi[j]).sum())
            .collect()
    };

    for _iter in 0..100 {
        let qxi = qx(&xi);
        // Residuals: dual Qxi - d + nu*1 - mu; primal 1'xi - 1; compl xi.mu.
        let rd: Vec<f64> = (0..n).map(|i| qxi[i] - d[i] + nu - mu[i]).collect();
        let rp: f64 = xi.iter().sum::<f64>() - 1.0;
        let gap: f64 = xi.iter().zip(mu.iter()).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        let rd_norm = rd.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if rd_norm <= 1e-12 * scale && rp.abs() <= 1e-12 && gap <= 1e-13 * scale {
            return Ok(xi);
        }

        // Newton solve on (Q + diag(mu/xi)) dx + 1 dnu = -rd + compl_rhs/xi,
        // 1'dx = -rp, with a Mehrotra-style centering term.
        let solve_dir = |compl_rhs: &[f64]| -> Result<(Vec<f64>, f64), String> {
            let mut h = q.to_vec();
            for i in 0..n {
                h[i * n + i] += mu[i] / xi[i];
            }
            let l = crate::linalg::cholesky(&h, n)
                .map_err(|e| format!("QP Newton system not PD: {e}"))?;
            let mut u: Vec<f64> = (0..n).map(|i| -rd[i] + compl_rhs[i] / xi[i]).collect();
            crate::linalg::chol_solve(&l, n, &mut u);
            let mut w = vec![1.0; n];
            crate::linalg::chol_solve(&l, n, &mut w);
            let ones_u: f64 = u.iter().sum();
            let ones_w: f64 = w.iter().sum();
            let dnu = (ones_u + rp) / ones_w;
            let dx: Vec<f64> = (0..n).map(|i| u[i] - dnu * w[i]).collect();
            Ok((dx, dnu))
        };
        let step_len = |xi: &[f64], dx: &[f64]| -> f64 {
            let mut a = 1.0f64;
            for i in 0..n {
                if dx[i] < 0.0 {
                    a = a.min(-xi[i] / dx[i]);
                }
            }
            a
        };

        // Affine direction.
        let compl_aff: Vec<f64> = (0..n).map(|i| -xi[i] * mu[i]).collect();
        let (dx_aff, _dnu_aff) = solve_dir(&compl_aff)?;
        let dmu_aff: Vec<f64> = (0..n)
            .map(|i| (compl_aff[i] - mu[i] * dx_aff[i]) / xi[i])
            .collect();
        let ap = step_len(&xi, &dx_aff);
        let ad = step_len(&mu, &dmu_aff);
        let a_aff = ap.min(ad);
        let gap_aff: f64 = (0..n)
            .map(|i| (xi[i] + a_aff * dx_aff[i]) * (mu[i] + a_aff * dmu_aff[i]))
            .sum::<f64>()
            / n as f64;
        let sigma = if gap > 0.0 {
            (gap_aff / gap).powi(3).clamp(0.0, 1.0)
        } else {
            0.0
        };

        // Combined direction with centering and second-order correction.
        let compl: Vec<f64> = (0..n)
            .map(|i| sigma * gap - xi[i] * mu[i] - dx_aff[i] * dmu_aff[i])
            .collect();
        let (dx, dnu) = solve_dir(&compl)?;
        let dmu: Vec<f64> = (0..n)
            .map(|i| (compl[i] - mu[i] * dx[i]) / xi[i])
            .collect();
        let alpha = 0.995 * step_len(&xi, &dx).min(step_len(&mu, &dmu));
        let alpha = alpha.min(1.0);
        for i in 0..n {
            xi[i] += alpha * dx[i];
            mu[i] += alpha * dmu[i];
        }
        nu += alpha * dnu;
    }
    // Accept the final iterate if it is essentially converged.
    let qxi = qx(&xi);
    let rd_norm = (0..n)
        .map(|i| (qxi[i] - d[i] + nu - mu[i]).abs())
        .fold(0.0f64, f64::max);
    let rp: f64 = xi.iter().sum::<f64>() - 1.0;
    if rd_norm <= 1e-8 * scale && rp.abs() <= 1e-9 {
        Ok(xi)
    } else {
        Err(format!(
            "interior-point QP stalled (rd {rd_norm:.2e}, rp {rp:.2e})"
        ))
    }
}

/// Iteration record for the optional trace (one row per bundle iteration).
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iteration: usize,
    pub center_value: f64,
    pub candidate_value: f64,
    pub eta: f64,
    pub rho: f64,
    pub serious: bool,
}

#[derive(Debug, Clone)]
pub struct BundleResult {
    pub minimizer: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub serious_steps: usize,
    /// False when the iteration cap was hit before the stopping test fired.
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

/// Minimizes a convex function given a value/subgradient oracle, starting
/// from p0. Terminates when the prox step returns the center or the
/// predicted descent vanishes; hitting the iteration cap returns the best
/// center found with `converged = false`.
pub fn bundle_minimize<F>(
    mut oracle: F,
    p0: &[f64],
    params: &BundleParams,
    want_trace: bool,
) -> Result<BundleResult, BundleError>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut center = p0.to_vec();
    let (mut center_value, g0) = oracle(&center);
    let mut cuts = vec![Cut {
        point: center.clone(),
        value: center_value,
        subgrad: g0,
    }];
    let mut insertion: Vec<usize> = vec![0];
    let mut last_active: Vec<usize> = vec![0];
    let mut rho = params.rho_init;
    let mut serious_steps = 0;
    let mut trace = Vec::new();
    let escape_radius =
        params.divergence_radius * (1.0 + p0.iter().map(|v| v * v).sum::<f64>().sqrt());

    for iter in 1..=params.max_iters {
        let step = solve_proximal_qp(&cuts, &center, center_value, rho)?;
        debug_assert!(step.eta >= -1e-7 * (1.0 + center_value.abs()));
        for (ci, &w) in step.xi.iter().enumerate() {
            if w > 1e-12 {
                last_active[ci] = iter;
            }
        }
        let dist: f64 = step
            .p_next
            .iter()
            .zip(center.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let center_norm: f64 = center.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dist <= params.tol_point * (1.0 + center_norm)
            || step.eta <= params.tol_descent * (1.0 + center_value.abs())
        {
            return Ok(BundleResult {
                minimizer: center,
                value: center_value,
                iterations: iter,
                serious_steps,
                converged: true,
                trace,
            });
        }

        let iterate_norm: f64 = step.p_next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if iterate_norm > escape_radius {
            return Err(BundleError::Unbounded { norm: iterate_norm });
        }
        let (value, grad) = oracle(&step.p_next);
        let serious = center_value - value >= params.theta * step.eta;
        if want_trace {
            trace.push(TraceRow {
                iteration: iter,
                center_value,
                candidate_value: value,
                eta: step.eta,
                rho,
                serious,
            });
        }
        if serious {
            center = step.p_next.clone();
            center_value = value;
            serious_steps += 1;
        }
        rho = update_weight(rho, serious, params);

        cuts.push(Cut {
            point: step.p_next,
            value,
            subgrad: grad,
        });
        insertion.push(iter);
        last_active.push(iter);
        if cuts.len() > params.max_cuts {
            // Evict the stalest inactive cut, never the newest.
            let evict = (0..cuts.len() - 1)
                .min_by_key(|&i| (last_active[i], insertion[i]))
                .unwrap();
            cuts.remove(evict);
            insertion.remove(evict);
            last_active.remove(evict);
        }
    }
    Ok(BundleResult {
        minimizer: center,
        value: center_value,
        iterations: params.max_iters,
        serious_steps,
        converged: false,
        trace,
    })
}

/// Long-run projected subgradient reference used to validate bundle values in
/// tests: diminishing steps a/sqrt(j), best-value tracking.
pub fn subgradient_reference<F>(
    mut oracle: F,
    p0: &[f64],
    step_scale: f64,
    iters: usize,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut p = p0.to_vec();
    let (mut best_val, _) = oracle(&p);
    let mut best_p = p.clone();
    for j in 0..iters {
        let (v, g) = oracle(&p);
        if v < best_val {
            best_val = v;
            best_p = p.clone();
        }
        let gn: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gn < 1e-15 {
            break;
        }
        let step = step_scale / ((j + 1) as f64).sqrt();
        for (pi, gi) in p.iter_mut().zip(g.iter()) {
            *pi -= step * gi / gn;
        }
    }
    (best_p, best_val)
}
