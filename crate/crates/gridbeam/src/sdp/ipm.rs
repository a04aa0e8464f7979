//! Primal-dual path-following interior-point solver with Nesterov-Todd
//! scaling over a homogeneous self-dual embedding.
//!
//! Solves the conic pair
//!   (P) min <c,x>  s.t.  A x = b, x in K
//!   (D) max b'y    s.t.  A'y + s = c, s in K
//! where K is a product of dense real symmetric PSD blocks and a nonnegative
//! orthant. The embedding yields either an optimal pair or a certificate of
//! primal or dual infeasibility.
//!
//! The problem is accessed through the `ConeProgram` trait so that the slot
//! beamforming subproblem can supply structure-exploiting operators and a
//! specialized Schur-complement solver.

use super::cones::{
    compute_scalings, congruence, phihat_apply, psd_step_bound, BlockVec, ConeLayout, Scalings,
};
use crate::linalg;

/// Problem operators required by the interior-point driver.
pub trait ConeProgram: Sync {
    fn cone(&self) -> &ConeLayout;
    /// Number of free (dual-form) variables, i.e. rows of A.
    fn num_y(&self) -> usize;
    fn b(&self) -> &[f64];
    fn c(&self) -> &BlockVec;
    /// A x (length num_y).
    fn apply_a(&self, x: &BlockVec) -> Vec<f64>;
    /// A' y as a cone-space element.
    fn apply_at(&self, y: &[f64]) -> BlockVec;
    /// Schur-complement solver for H = A Phihat A'.
    fn make_schur(&self) -> Box<dyn SchurOps + '_>;
}

/// Factorize-and-solve interface for the Schur complement.
pub trait SchurOps {
    fn prepare(&mut self, scal: &Scalings) -> Result<(), String>;
    fn solve(&mut self, rhs: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct IpmSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub tol_infeas: f64,
    pub max_iters: usize,
    pub step_fraction: f64,
    /// Log one line per iteration to stderr.
    pub trace: bool,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            tol_infeas: 1e-9,
            max_iters: 200,
            step_fraction: 0.99,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IpmStatus {
    Optimal,
    /// (D)-side certificate: A'y + s = 0, s in K, b'y > 0; `y`/`s` hold the
    /// normalized ray. The (P) problem is infeasible.
    PrimalInfeasible,
    /// (P)-side certificate: A x = 0, x in K, c'x < 0; `x` holds the
    /// normalized ray. The (D) problem is infeasible / (P) unbounded.
    DualInfeasible,
    IterationLimit,
    NumericalFailure(String),
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub status: IpmStatus,
    /// Normalized primal cone point (divided by tau at exit, when optimal).
    pub x: BlockVec,
    pub y: Vec<f64>,
    pub s: BlockVec,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    /// Residual of the infeasibility certificate when one is returned.
    pub certificate_residual: f64,
}

struct Direction {
    dx: BlockVec,
    dy: Vec<f64>,
    ds: BlockVec,
    dtau: f64,
    dkappa: f64,
}

/// Solves the conic program. Deterministic for fixed inputs.
pub fn ipm_solve(prog: &dyn ConeProgram, settings: &IpmSettings) -> IpmResult {
    let layout = prog.cone().clone();
    let n_y = prog.num_y();
    let b = prog.b().to_vec();
    let c = prog.c().clone();
    let nu = layout.barrier_nu() + 1.0;
    let norm_b = 1.0 + b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm_c = 1.0 + c.norm();

    let mut x = BlockVec::identity(&layout);
    let mut s = BlockVec::identity(&layout);
    let mut y = vec![0.0; n_y];
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;
    let mut schur = prog.make_schur();

    let fail = |msg: String, x: &BlockVec, y: &[f64], s: &BlockVec, it: usize| IpmResult {
        status: IpmStatus::NumericalFailure(msg),
        x: x.clone(),
        y: y.to_vec(),
        s: s.clone(),
        iterations: it,
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        relative_gap: f64::INFINITY,
        certificate_residual: f64::NAN,
    };

    let mut tiny_steps = 0usize;
    // Best normalized iterate seen so far, by worst-of residual metrics.
    let mut best: Option<(f64, IpmResult)> = None;
    let mut best_progress = f64::INFINITY;
    let mut stall = 0usize;
    for iter in 0..settings.max_iters {
        // Residuals of the self-dual system.
        let ax = prog.apply_a(&x);
        let r_p: Vec<f64> = (0..n_y).map(|j| ax[j] - b[j] * tau).collect();
        let aty = prog.apply_at(&y);
        let mut r_d = aty.clone();
        r_d.axpy(1.0, &s);
        r_d.axpy(-tau, &c);
        let cx = c.dot(&x);
        let by: f64 = b.iter().zip(y.iter()).map(|(p, q)| p * q).sum();
        let r_g = by - cx - kappa;
        let mu = (x.dot(&s) + tau * kappa) / nu;

        // Convergence of the normalized iterate.
        let pres = norm2(&r_p) / (tau * norm_b);
        let dres = r_d.norm() / (tau * norm_c);
        let pobj = cx / tau;
        let dobj = by / tau;
        let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if settings.trace {
            eprintln!(
                "ipm iter {iter:3}: mu={mu:9.2e} pres={pres:9.2e} dres={dres:9.2e} gap={relgap:9.2e} tau={tau:8.2e} kappa={kappa:8.2e}"
            );
        }
        // Infeasibility certificate residuals (scale-free).
        let cres_p = if by > 0.0 {
            let mut ray = aty.clone();
            ray.axpy(1.0, &s);
            ray.norm() / (by * norm_c)
        } else {
            f64::INFINITY
        };
        let cres_d = if cx < 0.0 {
            norm2(&ax) / (-cx * norm_b)
        } else {
            f64::INFINITY
        };
        let score = pres.max(dres).max(relgap);
        // Progress includes certificate residuals so a developing
        // infeasibility ray is not mistaken for a stall.
        let progress = score.min(cres_p).min(cres_d);
        if progress > 0.99 * best_progress {
            stall += 1;
        } else {
            stall = 0;
        }
        best_progress = best_progress.min(progress);
        if best.as_ref().map_or(true, |(s0, _)| score < *s0) {
            let mut xn = x.clone();
            xn.scale(1.0 / tau);
            let mut sn = s.clone();
            sn.scale(1.0 / tau);
            best = Some((
                score,
                IpmResult {
                    status: IpmStatus::IterationLimit,
                    x: xn,
                    y: y.iter().map(|v| v / tau).collect(),
                    s: sn,
                    iterations: iter,
                    primal_objective: pobj,
                    dual_objective: dobj,
                    primal_residual: pres,
                    dual_residual: dres,
                    relative_gap: relgap,
                    certificate_residual: f64::NAN,
                },
            ));
        }
        if pres <= settings.tol_feas && dres <= settings.tol_feas && relgap <= settings.tol_gap
        {
            let mut xn = x.clone();
            xn.scale(1.0 / tau);
            let mut sn = s.clone();
            sn.scale(1.0 / tau);
            let yn: Vec<f64> = y.iter().map(|v| v / tau).collect();
            return IpmResult {
                status: IpmStatus::Optimal,
                x: xn,
                y: yn,
                s: sn,
                iterations: iter,
                primal_objective: pobj,
                dual_objective: dobj,
                primal_residual: pres,
                dual_residual: dres,
                relative_gap: relgap,
                certificate_residual: 0.0,
            };
        }
        // Infeasibility certificates.
        if by > 0.0 {
            let res = cres_p;
            if res <= settings.tol_infeas {
                let mut sn = s.clone();
                sn.scale(1.0 / by);
                let yn: Vec<f64> = y.iter().map(|v| v / by).collect();
                return IpmResult {
                    status: IpmStatus::PrimalInfeasible,
                    x: BlockVec::zeros(&layout),
                    y: yn,
                    s: sn,
                    iterations: iter,
                    primal_objective: f64::INFINITY,
                    dual_objective: f64::INFINITY,
                    primal_residual: pres,
                    dual_residual: dres,
                    relative_gap: relgap,
                    certificate_residual: res,
                };
            }
        }
        if cx < 0.0 {
            let res = cres_d;
            if res <= settings.tol_infeas {
                let mut xn = x.clone();
                xn.scale(1.0 / (-cx));
                return IpmResult {
                    status: IpmStatus::DualInfeasible,
                    x: xn,
                    y: vec![0.0; n_y],
                    s: BlockVec::zeros(&layout),
                    iterations: iter,
                    primal_objective: f64::NEG_INFINITY,
                    dual_objective: f64::NEG_INFINITY,
                    primal_residual: pres,
                    dual_residual: dres,
                    relative_gap: relgap,
                    certificate_residual: res,
                };
            }
        }

        // Scaling and Schur factorization. A breakdown with residuals already
        // near tolerance means the iterate reached the boundary of what f64
        // can represent; grade what we have instead of failing outright.
        let graded = |msg: String, best: &Option<(f64, IpmResult)>| -> IpmResult {
            match best {
                Some((_, r))
                    if r.primal_residual <= 10.0 * settings.tol_feas
                        && r.dual_residual <= 10.0 * settings.tol_feas
                        && r.relative_gap <= 10.0 * settings.tol_gap =>
                {
                    let mut out = r.clone();
                    out.status = IpmStatus::Optimal;
                    out.certificate_residual = 0.0;
                    out
                }
                Some((_, r)) => {
                    let mut out = r.clone();
                    out.status = IpmStatus::NumericalFailure(msg);
                    out
                }
                None => IpmResult {
                    status: IpmStatus::NumericalFailure(msg),
                    x: BlockVec::zeros(&layout),
                    y: vec![0.0; n_y],
                    s: BlockVec::zeros(&layout),
                    iterations: 0,
                    primal_objective: f64::NAN,
                    dual_objective: f64::NAN,
                    primal_residual: f64::INFINITY,
                    dual_residual: f64::INFINITY,
                    relative_gap: f64::INFINITY,
                    certificate_residual: f64::NAN,
                },
            }
        };
        if stall >= 10 {
            return graded("no residual progress over 10 iterations".into(), &best);
        }
        let scal = match compute_scalings(&layout, &x, &s) {
            Ok(sc) => sc,
            Err(e) => return graded(format!("scaling: {e}"), &best),
        };
        if let Err(e) = schur.prepare(&scal) {
            return graded(format!("schur: {e}"), &best);
        }
        let phic = phihat_apply(&scal, &c);
        let w_vec = prog.apply_a(&phic);
        let qc = c.dot(&phic);
        let u2_rhs: Vec<f64> = (0..n_y).map(|j| b[j] + w_vec[j]).collect();
        let u2 = schur.solve(&u2_rhs);

        let mut solve_dir = |v_s: &BlockVec, v_lin_tk: f64| -> Direction {
            // t1 = V_s + r_d
            let mut t1 = v_s.clone();
            t1.axpy(1.0, &r_d);
            let phi_t1 = phihat_apply(&scal, &t1);
            let a_phi_t1 = prog.apply_a(&phi_t1);
            let rhs1: Vec<f64> = (0..n_y).map(|j| -r_p[j] - a_phi_t1[j]).collect();
            let u1 = schur.solve(&rhs1);
            let q0 = phic.dot(&t1);
            let wu2: f64 = w_vec.iter().zip(u2.iter()).map(|(a, b)| a * b).sum();
            let bu2: f64 = b.iter().zip(u2.iter()).map(|(a, b)| a * b).sum();
            let wu1: f64 = w_vec.iter().zip(u1.iter()).map(|(a, b)| a * b).sum();
            let bu1: f64 = b.iter().zip(u1.iter()).map(|(a, b)| a * b).sum();
            let den = -wu2 + qc + bu2 + kappa / tau;
            let rhs_t = -r_g + q0 + wu1 - bu1 + v_lin_tk / tau;
            let dtau = rhs_t / den;
            let dy: Vec<f64> = (0..n_y).map(|j| u1[j] + dtau * u2[j]).collect();
            let at_dy = prog.apply_at(&dy);
            // dx = Phihat(t1 + A'dy - c*dtau)
            let mut t3 = t1;
            t3.axpy(1.0, &at_dy);
            t3.axpy(-dtau, &c);
            let dx = phihat_apply(&scal, &t3);
            // ds = -r_d - A'dy + c*dtau
            let mut ds = r_d.clone();
            ds.scale(-1.0);
            ds.axpy(-1.0, &at_dy);
            ds.axpy(dtau, &c);
            let dkappa = (v_lin_tk - kappa * dtau) / tau;
            let mut dx = dx;
            let mut ds = ds;
            for (mat, &o) in dx.mats.iter_mut().zip(layout.psd.iter()) {
                super::cones::symmetrize(mat, o);
            }
            for (mat, &o) in ds.mats.iter_mut().zip(layout.psd.iter()) {
                super::cones::symmetrize(mat, o);
            }
            Direction {
                dx,
                dy,
                ds,
                dtau,
                dkappa,
            }
        };

        // Affine (predictor) direction: complementarity target zero.
        let mut v_s_aff = BlockVec::zeros(&layout);
        for (bi, sc) in scal.psd.iter().enumerate() {
            let m = sc.order;
            // V_c = -diag(lambda^2); V_s = R^-T V_c R^-1.
            let mut v_c = vec![0.0; m * m];
            for i in 0..m {
                v_c[i * m + i] = -sc.lambda[i] * sc.lambda[i];
            }
            v_s_aff.mats[bi] = unscale_vc(&sc.r_inv, &v_c, m);
        }
        for i in 0..layout.lin {
            v_s_aff.lin[i] = -scal.lin_s[i];
        }
        let aff = solve_dir(&v_s_aff, -tau * kappa);

        let alpha_aff = max_step(&layout, &scal, &x, &s, tau, kappa, &aff);
        let gap_aff = {
            let mut xa = x.clone();
            xa.axpy(alpha_aff, &aff.dx);
            let mut sa = s.clone();
            sa.axpy(alpha_aff, &aff.ds);
            (xa.dot(&sa) + (tau + alpha_aff * aff.dtau) * (kappa + alpha_aff * aff.dkappa))
                / nu
        };
        let sigma = if mu > 0.0 {
            (gap_aff / mu).max(0.0).powi(3).clamp(0.0, 1.0)
        } else {
            0.0
        };

        // Combined (corrector) direction.
        let mut v_s = BlockVec::zeros(&layout);
        for (bi, sc) in scal.psd.iter().enumerate() {
            let m = sc.order;
            // Scaled affine steps.
            let dxh = scaled_dx(&sc.r_inv, &aff.dx.mats[bi], m);
            let dsh = scaled_ds(&sc.r, &aff.ds.mats[bi], m);
            let prod = linalg::mat_mul(&dxh, &dsh, m);
            let mut v_c = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    let symp = 0.5 * (prod[i * m + j] + prod[j * m + i]);
                    let target = if i == j {
                        sigma * mu - sc.lambda[i] * sc.lambda[i]
                    } else {
                        0.0
                    };
                    v_c[i * m + j] = 2.0 * (target - symp) / (sc.lambda[i] + sc.lambda[j]);
                }
            }
            v_s.mats[bi] = unscale_vc(&sc.r_inv, &v_c, m);
        }
        for i in 0..layout.lin {
            v_s.lin[i] = (sigma * mu
                - scal.lin_x[i] * scal.lin_s[i]
                - aff.dx.lin[i] * aff.ds.lin[i])
                / scal.lin_x[i];
        }
        let tk_rhs = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
        let dir = solve_dir(&v_s, tk_rhs);

        let mut alpha = (settings.step_fraction
            * max_step(&layout, &scal, &x, &s, tau, kappa, &dir))
        .min(1.0);
        if !alpha.is_finite() || alpha <= 1e-10 {
            tiny_steps += 1;
            if tiny_steps >= 3 {
                return graded(format!("step collapsed (alpha={alpha:.2e})"), &best);
            }
        } else {
            tiny_steps = 0;
        }
        // Commit the step only if the candidate stays strictly inside the
        // cone; eigenvalue roundoff in the boundary computation can overshoot
        // by ~1e-12 on ill-conditioned tails, so back off when it does.
        let mut committed = false;
        for _try in 0..8 {
            let mut xc = x.clone();
            xc.axpy(alpha, &dir.dx);
            let mut sc = s.clone();
            sc.axpy(alpha, &dir.ds);
            let interior = xc
                .mats
                .iter()
                .zip(layout.psd.iter())
                .all(|(m, &o)| linalg::cholesky(m, o).is_ok())
                && sc
                    .mats
                    .iter()
                    .zip(layout.psd.iter())
                    .all(|(m, &o)| linalg::cholesky(m, o).is_ok())
                && xc.lin.iter().all(|&v| v > 0.0)
                && sc.lin.iter().all(|&v| v > 0.0)
                && tau + alpha * dir.dtau > 0.0
                && kappa + alpha * dir.dkappa > 0.0;
            if interior {
                x = xc;
                s = sc;
                committed = true;
                break;
            }
            alpha *= 0.7;
        }
        if !committed {
            return graded("cone boundary reached; cannot advance".into(), &best);
        }
        for (yy, d) in y.iter_mut().zip(dir.dy.iter()) {
            *yy += alpha * d;
        }
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        if !tau.is_finite() || tau <= 0.0 || !kappa.is_finite() {
            return fail(format!("embedding variables degenerated (tau={tau})"), &x, &y, &s, iter);
        }
    }

    // Iteration cap: report the best normalized iterate seen.
    match best {
        Some((_, mut r)) => {
            r.iterations = settings.max_iters;
            r
        }
        None => IpmResult {
            status: IpmStatus::IterationLimit,
            x,
            y,
            s,
            iterations: settings.max_iters,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            relative_gap: f64::INFINITY,
            certificate_residual: f64::NAN,
        },
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// V_s = R^-T V_c R^-1 (dense, order m), symmetrized.
fn unscale_vc(r_inv: &[f64], v_c: &[f64], m: usize) -> Vec<f64> {
    // R^-T V_c R^-1 = (R^-1)' V_c (R^-1)
    let mut rt = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            rt[i * m + j] = r_inv[j * m + i];
        }
    }
    let t = linalg::mat_mul(&rt, v_c, m);
    let mut out = linalg::mat_mul(&t, r_inv, m);
    super::cones::symmetrize(&mut out, m);
    out
}

/// Scaled primal step R^-1 dX R^-T.
fn scaled_dx(r_inv: &[f64], dx: &[f64], m: usize) -> Vec<f64> {
    let t = linalg::mat_mul(r_inv, dx, m);
    let mut rt = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            rt[i * m + j] = r_inv[j * m + i];
        }
    }
    linalg::mat_mul(&t, &rt, m)
}

/// Scaled dual step R' dS R.
fn scaled_ds(r: &[f64], ds: &[f64], m: usize) -> Vec<f64> {
    let mut rt = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            rt[i * m + j] = r[j * m + i];
        }
    }
    let t = linalg::mat_mul(&rt, ds, m);
    linalg::mat_mul(&t, r, m)
}

fn max_step(
    layout: &ConeLayout,
    scal: &Scalings,
    _x: &BlockVec,
    _s: &BlockVec,
    tau: f64,
    kappa: f64,
    dir: &Direction,
) -> f64 {
    let mut alpha = f64::INFINITY;
    for (bi, sc) in scal.psd.iter().enumerate() {
        alpha = alpha.min(psd_step_bound(&sc.lx, &dir.dx.mats[bi], sc.order));
        alpha = alpha.min(psd_step_bound(&sc.ls, &dir.ds.mats[bi], sc.order));
    }
    for i in 0..layout.lin {
        if dir.dx.lin[i] < 0.0 {
            alpha = alpha.min(-scal.lin_x[i] / dir.dx.lin[i]);
        }
        if dir.ds.lin[i] < 0.0 {
            alpha = alpha.min(-scal.lin_s[i] / dir.ds.lin[i]);
        }
    }
    if dir.dtau < 0.0 {
        alpha = alpha.min(-tau / dir.dtau);
    }
    if dir.dkappa < 0.0 {
        alpha = alpha.min(-kappa / dir.dkappa);
    }
    alpha
}

/// Generic dense Schur solver: assembles H = A Phihat A' entrywise from
/// sparse rows and factors it with Cholesky. Suitable for small programs;
/// the slot subproblem installs a structured implementation instead.
pub struct DenseSchur<'a> {
    /// Per PSD block: list of (row index, entries) with full entry lists.
    pub psd_rows: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
    /// Per orthant entry: list of (row index, coefficient).
    pub lin_rows: Vec<Vec<(usize, f64)>>,
    pub orders: &'a [usize],
    pub n_y: usize,
    factor: Vec<f64>,
}

impl<'a> DenseSchur<'a> {
    pub fn new(
        psd_rows: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
        lin_rows: Vec<Vec<(usize, f64)>>,
        orders: &'a [usize],
        n_y: usize,
    ) -> Self {
        Self {
            psd_rows,
            lin_rows,
            orders,
            n_y,
            factor: Vec::new(),
        }
    }
}

impl SchurOps for DenseSchur<'_> {
    fn prepare(&mut self, scal: &Scalings) -> Result<(), String> {
        let n = self.n_y;
        let mut h = vec![0.0; n * n];
        for (bi, rows) in self.psd_rows.iter().enumerate() {
            let m = self.orders[bi];
            let phi = &scal.psd[bi].phi;
            // G_j = phi F_j phi for each active row, then H += <F_l, G_j>.
            for (idx_a, (ja, ea)) in rows.iter().enumerate() {
                let mut g = vec![0.0; m * m];
                for &(r, c, v) in ea {
                    // phi e_r e_c' phi = phi[:,r] phi[c,:]
                    for i in 0..m {
                        let pir = phi[i * m + r] * v;
                        if pir == 0.0 {
                            continue;
                        }
                        for jj in 0..m {
                            g[i * m + jj] += pir * phi[c * m + jj];
                        }
                    }
                }
                for (jb, eb) in rows.iter().take(idx_a + 1) {
                    let mut acc = 0.0;
                    for &(r, c, v) in eb {
                        acc += v * g[r * m + c];
                    }
                    h[ja * n + jb] += acc;
                    if ja != jb {
                        h[jb * n + ja] += acc;
                    }
                }
            }
        }
        for (i, rows) in self.lin_rows.iter().enumerate() {
            let w = scal.lin_w[i];
            for &(ja, va) in rows {
                for &(jb, vb) in rows {
                    h[ja * n + jb] += w * va * vb;
                }
            }
        }
        // Factor (tiny diagonal lift guards roundoff on degenerate problems).
        match linalg::cholesky(&h, n) {
            Ok(l) => {
                self.factor = l;
                Ok(())
            }
            Err(_) => {
                let scale = (0..n).map(|i| h[i * n + i]).fold(0.0f64, f64::max);
                for i in 0..n {
                    h[i * n + i] += 1e-12 * (1.0 + scale);
                }
                self.factor = linalg::cholesky(&h, n)
                    .map_err(|e| format!("Schur matrix not PD: {e}"))?;
                Ok(())
            }
        }
    }

    fn solve(&mut self, rhs: &[f64]) -> Vec<f64> {
        let mut out = rhs.to_vec();
        linalg::chol_solve(&self.factor, self.n_y, &mut out);
        out
    }
}

/// Applies the congruence of a scaling phi to a sparse symmetric entry list,
/// used by tests to validate structured assemblies.
pub fn dense_congruence_entries(
    phi: &[f64],
    entries: &[(usize, usize, f64)],
    m: usize,
) -> Vec<f64> {
    let mut f = vec![0.0; m * m];
    for &(r, c, v) in entries {
        f[r * m + c] += v;
    }
    congruence(phi, &f, m)
}
