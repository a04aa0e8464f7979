//! Generic linear-matrix-inequality program over sparse coefficient triples:
//!
//!   minimize  obj'z   s.t.   F_0^b + sum_j z_j F_j^b  >= 0  per PSD block,
//!                            g_0^r + sum_j z_j g_j^r  >= 0  per scalar row.
//!
//! This is the dual-form conic program handed to the interior-point driver.
//! It backs the small auxiliary problems (projections, tests, cross-checks);
//! the per-slot beamforming subproblem uses the structured implementation in
//! `slot` instead.

use super::cones::{BlockVec, ConeLayout};
use super::ipm::{self, ConeProgram, DenseSchur, IpmResult, IpmSettings, IpmStatus, SchurOps};

#[derive(Debug, Clone, Default)]
pub struct LmiProblem {
    num_vars: usize,
    obj: Vec<f64>,
    orders: Vec<usize>,
    /// Per block: full symmetric entry lists of the constant term.
    psd_const: Vec<Vec<(usize, usize, f64)>>,
    /// Per block, per variable: full symmetric entry lists.
    psd_var: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
    lin_const: Vec<f64>,
    lin_coeff: Vec<Vec<(usize, f64)>>,
}

impl LmiProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            obj: vec![0.0; num_vars],
            ..Default::default()
        }
    }

    pub fn set_objective(&mut self, obj: Vec<f64>) {
        assert_eq!(obj.len(), self.num_vars);
        self.obj = obj;
    }

    pub fn add_psd_block(&mut self, order: usize) -> usize {
        self.orders.push(order);
        self.psd_const.push(Vec::new());
        self.psd_var.push(Vec::new());
        self.orders.len() - 1
    }

    /// Adds `val` at (r, c) (and symmetrically at (c, r)) to the coefficient
    /// matrix of `var` in `block`; `var = None` targets the constant term.
    pub fn add_entry(&mut self, block: usize, var: Option<usize>, r: usize, c: usize, val: f64) {
        let mut entries = vec![(r, c, val)];
        if r != c {
            entries.push((c, r, val));
        }
        match var {
            None => self.psd_const[block].extend(entries),
            Some(j) => {
                assert!(j < self.num_vars);
                if let Some((_, list)) = self.psd_var[block].iter_mut().find(|(v, _)| *v == j) {
                    list.extend(entries);
                } else {
                    self.psd_var[block].push((j, entries));
                }
            }
        }
    }

    /// Adds a scalar constraint constant + sum_j coeff_j z_j >= 0.
    pub fn add_lin_row(&mut self, coeffs: &[(usize, f64)], constant: f64) -> usize {
        self.lin_const.push(constant);
        self.lin_coeff.push(coeffs.to_vec());
        self.lin_const.len() - 1
    }

    pub fn finalize(self) -> FinalizedLmi {
        let layout = ConeLayout {
            psd: self.orders.clone(),
            lin: self.lin_const.len(),
        };
        let mut c = BlockVec::zeros(&layout);
        for (bi, entries) in self.psd_const.iter().enumerate() {
            let m = self.orders[bi];
            for &(r, cc, v) in entries {
                c.mats[bi][r * m + cc] += v;
            }
        }
        c.lin.copy_from_slice(&self.lin_const);
        let b: Vec<f64> = self.obj.iter().map(|v| -v).collect();
        // Rows touching each orthant entry, for the Schur assembly.
        let lin_rows: Vec<Vec<(usize, f64)>> = self.lin_coeff.clone();
        FinalizedLmi {
            prob: self,
            layout,
            c,
            b,
            lin_rows,
        }
    }
}

/// Immutable solver-ready form.
pub struct FinalizedLmi {
    prob: LmiProblem,
    layout: ConeLayout,
    c: BlockVec,
    b: Vec<f64>,
    lin_rows: Vec<Vec<(usize, f64)>>,
}

impl ConeProgram for FinalizedLmi {
    fn cone(&self) -> &ConeLayout {
        &self.layout
    }

    fn num_y(&self) -> usize {
        self.prob.num_vars
    }

    fn b(&self) -> &[f64] {
        &self.b
    }

    fn c(&self) -> &BlockVec {
        &self.c
    }

    fn apply_a(&self, x: &BlockVec) -> Vec<f64> {
        // Row j of A is -F_j (so that A'z + s = c reproduces s = F(z)).
        let mut out = vec![0.0; self.prob.num_vars];
        for (bi, vars) in self.prob.psd_var.iter().enumerate() {
            let m = self.layout.psd[bi];
            let mat = &x.mats[bi];
            for (j, entries) in vars {
                let mut acc = 0.0;
                for &(r, c, v) in entries {
                    acc += v * mat[r * m + c];
                }
                out[*j] -= acc;
            }
        }
        for (row, coeffs) in self.prob.lin_coeff.iter().enumerate() {
            let xv = x.lin[row];
            for &(j, v) in coeffs {
                out[j] -= v * xv;
            }
        }
        out
    }

    fn apply_at(&self, y: &[f64]) -> BlockVec {
        let mut out = BlockVec::zeros(&self.layout);
        for (bi, vars) in self.prob.psd_var.iter().enumerate() {
            let m = self.layout.psd[bi];
            for (j, entries) in vars {
                let yj = y[*j];
                if yj == 0.0 {
                    continue;
                }
                for &(r, c, v) in entries {
                    out.mats[bi][r * m + c] -= yj * v;
                }
            }
        }
        for (row, coeffs) in self.prob.lin_coeff.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, v) in coeffs {
                acc += y[j] * v;
            }
            out.lin[row] = -acc;
        }
        out
    }

    fn make_schur(&self) -> Box<dyn SchurOps + '_> {
        let psd_rows: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>> = self
            .prob
            .psd_var
            .iter()
            .map(|vars| vars.iter().map(|(j, e)| (*j, e.clone())).collect())
            .collect();
        // Orthant entries are indexed per row; DenseSchur wants, per orthant
        // entry, the list of (variable, coefficient).
        Box::new(DenseSchur::new(
            psd_rows,
            self.lin_rows.clone(),
            &self.layout.psd,
            self.prob.num_vars,
        ))
    }
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub status: IpmStatus,
    /// Decision variables z (the IPM's free variables).
    pub z: Vec<f64>,
    pub objective: f64,
    /// Slack values F(z) per block plus scalar rows.
    pub slack: BlockVec,
    /// Cone multiplier certifying the objective bound (or the infeasibility
    /// ray when status is DualInfeasible).
    pub multiplier: BlockVec,
    pub ipm: IpmResult,
}

pub fn solve_lmi(fin: &FinalizedLmi, settings: &IpmSettings) -> LmiSolution {
    let res = ipm::ipm_solve(fin, settings);
    let objective = fin
        .prob
        .obj
        .iter()
        .zip(res.y.iter())
        .map(|(c, z)| c * z)
        .sum();
    LmiSolution {
        status: res.status.clone(),
        z: res.y.clone(),
        objective,
        slack: res.s.clone(),
        multiplier: res.x.clone(),
        ipm: res,
    }
}
