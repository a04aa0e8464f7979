//! Robust per-slot beamforming subproblems: S-procedure LMI construction and
//! the conic interior-point solver behind them.
//!
//! The per-slot problem minimizes the multiplier-weighted transmit power
//! sum_i lambda_i sum_k tr(B_i X_k) over lifted beamformers {X_k >= 0}
//! subject to worst-case SINR constraints (as LMIs via the S-procedure, or
//! nominal scalar rows at zero uncertainty radius) and per-station power
//! caps.

pub mod cones;
pub mod herm;
pub mod ipm;
pub mod lmi;
pub mod slot;

pub use ipm::{IpmSettings, IpmStatus};
pub use slot::{build_slot_program, SinrMode, SlotChannel, SlotProgram};

use crate::linalg::HermitianMatrix;
use crate::model::ChannelEstimate;
use ipm::ConeProgram;
use num_complex::Complex64;
use std::io::Write;

/// Robustness matrix of user k: with Y = X_k/gamma_k - sum_{l!=k} X_l,
///
///   Gamma = [ Y + tau I        Y h        ]
///           [ h^H Y      h^H Y h - sigma^2 - tau eps^2 ]
///
/// The S-procedure makes Gamma >= 0 equivalent to the worst-case SINR
/// constraint over the radius-eps channel ball.
pub fn build_gamma(
    xs: &[HermitianMatrix],
    k: usize,
    channel: &ChannelEstimate,
    tau: f64,
) -> HermitianMatrix {
    let n = xs[k].order();
    debug_assert_eq!(channel.h_hat.len(), n);
    let mut y = xs[k].clone();
    y.scale(1.0 / channel.sinr_target);
    for (l, x) in xs.iter().enumerate() {
        if l != k {
            y.add_scaled(x, -1.0);
        }
    }
    let yh = y.mul_vec(&channel.h_hat);
    let hyh = y.quad_form(&channel.h_hat);
    let mut g = HermitianMatrix::zeros(n + 1);
    for r in 0..n {
        for c in r..n {
            let mut v = y.get(r, c);
            if r == c {
                v += Complex64::new(tau, 0.0);
            }
            g.set(r, c, v);
        }
        g.set(r, n, yh[r]);
    }
    g.set(
        n,
        n,
        Complex64::new(
            hyh - channel.noise_var - tau * channel.epsilon * channel.epsilon,
            0.0,
        ),
    );
    g
}

/// Outcome of one slot subproblem solve.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotStatus {
    Optimal,
    /// The QoS targets are unattainable; carries the certificate residual of
    /// the dual improving ray (admission control must drop users/targets).
    Infeasible { certificate_residual: f64 },
    /// The objective is unbounded below (never expected with power caps).
    Unbounded,
    NumericalFailure(String),
}

/// KKT quality report for an Optimal solve.
#[derive(Debug, Clone, Default)]
pub struct KktReport {
    /// Worst primal constraint violation, scale-normalized.
    pub primal_feasibility: f64,
    /// Dual residual from the interior-point run.
    pub dual_residual: f64,
    pub relative_gap: f64,
    /// Normalized complementary slackness <X, S> across the cone.
    pub complementarity: f64,
}

#[derive(Debug, Clone)]
pub struct SlotSolution {
    pub status: SlotStatus,
    /// Lifted beamformers per user (complex order M*I).
    pub x: Vec<HermitianMatrix>,
    /// S-procedure certificates per user (zero for nominal-row users).
    pub tau: Vec<f64>,
    pub objective: f64,
    pub kkt: KktReport,
    pub iterations: usize,
}

/// Residual bound below which a solve is graded `Optimal` (the spec contract
/// for every optimal slot solution).
pub const KKT_ACCEPT: f64 = 1e-7;

/// Solves one slot subproblem and grades the result.
pub fn solve_slot_sdp(prog: &SlotProgram, settings: &IpmSettings) -> SlotSolution {
    let res = ipm::ipm_solve(prog, settings);
    let nd = prog.n * prog.n;
    let empty = SlotSolution {
        status: SlotStatus::NumericalFailure(String::new()),
        x: Vec::new(),
        tau: Vec::new(),
        objective: f64::NAN,
        kkt: KktReport::default(),
        iterations: res.iterations,
    };
    match res.status {
        IpmStatus::Optimal | IpmStatus::IterationLimit => {
            let meets = res.primal_residual <= KKT_ACCEPT
                && res.dual_residual <= KKT_ACCEPT
                && res.relative_gap <= KKT_ACCEPT;
            if !meets {
                return SlotSolution {
                    status: SlotStatus::NumericalFailure(format!(
                        "residuals above bound: pres={:.2e} dres={:.2e} gap={:.2e}",
                        res.primal_residual, res.dual_residual, res.relative_gap
                    )),
                    ..empty
                };
            }
            let x: Vec<HermitianMatrix> = (0..prog.users)
                .map(|k| herm::herm_from_dofs(&res.y[k * nd..(k + 1) * nd], prog.n))
                .collect();
            let mut tau = vec![0.0; prog.users];
            for (gpos, &k) in prog.tau_users().iter().enumerate() {
                tau[k] = res.y[prog.users * nd + gpos];
            }
            let objective = prog.objective_of(&res.y);
            let compl = res.x.dot(&res.s)
                / (1.0 + res.primal_objective.abs() + res.dual_objective.abs());
            SlotSolution {
                status: SlotStatus::Optimal,
                x,
                tau,
                objective,
                kkt: KktReport {
                    primal_feasibility: res.primal_residual,
                    dual_residual: res.dual_residual,
                    relative_gap: res.relative_gap,
                    complementarity: compl.abs(),
                },
                iterations: res.iterations,
            }
        }
        IpmStatus::DualInfeasible => SlotSolution {
            status: SlotStatus::Infeasible {
                certificate_residual: res.certificate_residual,
            },
            ..empty
        },
        IpmStatus::PrimalInfeasible => SlotSolution {
            status: SlotStatus::Unbounded,
            ..empty
        },
        IpmStatus::NumericalFailure(msg) => SlotSolution {
            status: SlotStatus::NumericalFailure(msg),
            ..empty
        },
    }
}

/// Writes a plain-text dump of a conic program (one block per section,
/// entries as `var row col value` with `var = -1` for the constant term).
/// Variables are probed through the program operators, so the dump matches
/// whatever structure the solver actually sees.
pub fn dump_conic<W: Write>(prog: &dyn ConeProgram, mut w: W) -> std::io::Result<()> {
    let layout = prog.cone().clone();
    let n = prog.num_y();
    writeln!(w, "# conic subproblem: minimize obj'z s.t. F(z) >= 0")?;
    writeln!(w, "vars {n}")?;
    write!(w, "objective")?;
    for v in prog.b() {
        write!(w, " {}", -v)?;
    }
    writeln!(w)?;
    let cvec = prog.c();
    // Probe columns of A' to recover the coefficient matrices.
    let mut per_var: Vec<cones::BlockVec> = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        per_var.push(prog.apply_at(&e));
    }
    for (bi, &m) in layout.psd.iter().enumerate() {
        writeln!(w, "psd_block {bi} order {m}")?;
        for r in 0..m {
            for c in 0..=r {
                let v = cvec.mats[bi][r * m + c];
                if v != 0.0 {
                    writeln!(w, "-1 {r} {c} {v}")?;
                }
            }
        }
        for (j, at) in per_var.iter().enumerate() {
            for r in 0..m {
                for c in 0..=r {
                    let v = -at.mats[bi][r * m + c];
                    if v != 0.0 {
                        writeln!(w, "{j} {r} {c} {v}")?;
                    }
                }
            }
        }
    }
    for row in 0..layout.lin {
        writeln!(w, "lin_row {row}")?;
        if cvec.lin[row] != 0.0 {
            writeln!(w, "-1 {}", cvec.lin[row])?;
        }
        for (j, at) in per_var.iter().enumerate() {
            let v = -at.lin[row];
            if v != 0.0 {
                writeln!(w, "{j} {v}")?;
            }
        }
    }
    Ok(())
}
