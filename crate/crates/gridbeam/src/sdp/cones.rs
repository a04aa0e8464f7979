//! Cone-space primitives for the conic solver: block vectors over a product
//! of real symmetric PSD blocks plus a nonnegative orthant, Nesterov-Todd
//! scalings, and boundary step lengths.

use crate::linalg;

/// Product cone: dense real symmetric PSD blocks of the given orders,
/// followed by `lin` nonnegative scalars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeLayout {
    pub psd: Vec<usize>,
    pub lin: usize,
}

impl ConeLayout {
    /// Barrier parameter: sum of block orders plus the orthant dimension.
    pub fn barrier_nu(&self) -> f64 {
        (self.psd.iter().sum::<usize>() + self.lin) as f64
    }
}

/// Element of the cone space: one dense symmetric matrix per PSD block and a
/// tail of scalars.
#[derive(Debug, Clone)]
pub struct BlockVec {
    pub mats: Vec<Vec<f64>>,
    pub lin: Vec<f64>,
}

impl BlockVec {
    pub fn zeros(layout: &ConeLayout) -> Self {
        Self {
            mats: layout.psd.iter().map(|&m| vec![0.0; m * m]).collect(),
            lin: vec![0.0; layout.lin],
        }
    }

    pub fn identity(layout: &ConeLayout) -> Self {
        let mut v = Self::zeros(layout);
        for (mat, &m) in v.mats.iter_mut().zip(layout.psd.iter()) {
            for i in 0..m {
                mat[i * m + i] = 1.0;
            }
        }
        for e in v.lin.iter_mut() {
            *e = 1.0;
        }
        v
    }

    /// Trace inner product: sum of elementwise products (blocks are
    /// symmetric, so this equals sum_b tr(A_b B_b)) plus the orthant dot.
    pub fn dot(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.mats.iter().zip(other.mats.iter()) {
            acc += a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>();
        }
        acc += self
            .lin
            .iter()
            .zip(other.lin.iter())
            .map(|(x, y)| x * y)
            .sum::<f64>();
        acc
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (m, o) in self.mats.iter_mut().zip(other.mats.iter()) {
            for (x, y) in m.iter_mut().zip(o.iter()) {
                *x += a * y;
            }
        }
        for (x, y) in self.lin.iter_mut().zip(other.lin.iter()) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for m in self.mats.iter_mut() {
            for x in m.iter_mut() {
                *x *= a;
            }
        }
        for x in self.lin.iter_mut() {
            *x *= a;
        }
    }
}

/// Nesterov-Todd scaling of one PSD block: R satisfies
/// R^-1 X R^-T = R' S R = diag(lambda).
#[derive(Debug, Clone)]
pub struct PsdScaling {
    pub order: usize,
    /// Cholesky factor of X (lower).
    pub lx: Vec<f64>,
    /// Cholesky factor of S (lower).
    pub ls: Vec<f64>,
    pub r: Vec<f64>,
    pub r_inv: Vec<f64>,
    /// phi = R R'; the Schur congruence applies phi * M * phi.
    pub phi: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Scalings for the whole cone.
#[derive(Debug, Clone)]
pub struct Scalings {
    pub psd: Vec<PsdScaling>,
    /// Orthant: w_i = x_i / s_i (the 1x1 congruence weight).
    pub lin_w: Vec<f64>,
    pub lin_x: Vec<f64>,
    pub lin_s: Vec<f64>,
}

pub fn compute_scalings(
    layout: &ConeLayout,
    x: &BlockVec,
    s: &BlockVec,
) -> Result<Scalings, String> {
    let mut psd = Vec::with_capacity(layout.psd.len());
    for (bi, &m) in layout.psd.iter().enumerate() {
        let lx = linalg::cholesky(&x.mats[bi], m)
            .map_err(|e| format!("x block {bi} not interior: {e}"))?;
        let ls = linalg::cholesky(&s.mats[bi], m)
            .map_err(|e| format!("s block {bi} not interior: {e}"))?;
        // B = Ls' Lx, SVD via one-sided Jacobi.
        let mut b = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                // (Ls')[i,k] = Ls[k,i] nonzero for k >= i; Lx[k,j] nonzero k >= j.
                for k in i.max(j)..m {
                    acc += ls[k * m + i] * lx[k * m + j];
                }
                b[i * m + j] = acc;
            }
        }
        let (sigma, v) = linalg::jacobi_svd(&b, m);
        for (j, &sg) in sigma.iter().enumerate() {
            if !(sg > 1e-154) {
                return Err(format!("NT scaling breakdown in block {bi} (sigma[{j}]={sg:.3e})"));
            }
        }
        // R = Lx V Sigma^{-1/2}
        let mut r = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..=i {
                    acc += lx[i * m + k] * v[k * m + j];
                }
                r[i * m + j] = acc / sigma[j].sqrt();
            }
        }
        // R^-1 = Sigma^{1/2} V' Lx^-1; build Lx^-1 by forward solves.
        let mut lx_inv = vec![0.0; m * m];
        for col in 0..m {
            let mut e = vec![0.0; m];
            e[col] = 1.0;
            linalg::solve_lower(&lx, m, &mut e);
            for i in 0..m {
                lx_inv[i * m + col] = e[i];
            }
        }
        let mut r_inv = vec![0.0; m * m];
        for i in 0..m {
            let si = sigma[i].sqrt();
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += v[k * m + i] * lx_inv[k * m + j];
                }
                r_inv[i * m + j] = si * acc;
            }
        }
        let mut phi = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += r[i * m + k] * r[j * m + k];
                }
                phi[i * m + j] = acc;
                phi[j * m + i] = acc;
            }
        }
        psd.push(PsdScaling {
            order: m,
            lx,
            ls,
            r,
            r_inv,
            phi,
            lambda: sigma,
        });
    }
    let mut lin_w = Vec::with_capacity(layout.lin);
    for i in 0..layout.lin {
        if x.lin[i] <= 0.0 || s.lin[i] <= 0.0 {
            return Err(format!("orthant entry {i} left the interior"));
        }
        lin_w.push(x.lin[i] / s.lin[i]);
    }
    Ok(Scalings {
        psd,
        lin_w,
        lin_x: x.lin.clone(),
        lin_s: s.lin.clone(),
    })
}

/// Applies the scaling congruence: out_b = phi_b v_b phi_b per PSD block and
/// out_i = w_i v_i on the orthant.
pub fn phihat_apply(scal: &Scalings, v: &BlockVec) -> BlockVec {
    let mats = scal
        .psd
        .iter()
        .zip(v.mats.iter())
        .map(|(sc, m)| congruence(&sc.phi, m, sc.order))
        .collect();
    let lin = scal
        .lin_w
        .iter()
        .zip(v.lin.iter())
        .map(|(w, x)| w * x)
        .collect();
    BlockVec { mats, lin }
}

/// Dense congruence P M P for symmetric P, M (row-major order m). The
/// result is symmetrized; matrix products through ill-conditioned scalings
/// otherwise accumulate asymmetry that poisons downstream Cholesky calls.
pub fn congruence(p: &[f64], m_mat: &[f64], m: usize) -> Vec<f64> {
    let t = linalg::mat_mul(p, m_mat, m);
    let mut out = linalg::mat_mul(&t, p, m);
    symmetrize(&mut out, m);
    out
}

/// Averages A and A' in place.
pub fn symmetrize(a: &mut [f64], m: usize) {
    for i in 0..m {
        for j in 0..i {
            let avg = 0.5 * (a[i * m + j] + a[j * m + i]);
            a[i * m + j] = avg;
            a[j * m + i] = avg;
        }
    }
}

/// Largest step alpha with X + alpha D staying PSD, given chol(X) = L:
/// alpha = -1/lambda_min(L^-1 D L^-T) when that eigenvalue is negative.
pub fn psd_step_bound(l: &[f64], d: &[f64], m: usize) -> f64 {
    // Y = L^-1 D
    let mut y = vec![0.0; m * m];
    for col in 0..m {
        let mut rhs: Vec<f64> = (0..m).map(|r| d[r * m + col]).collect();
        linalg::solve_lower(l, m, &mut rhs);
        for r in 0..m {
            y[r * m + col] = rhs[r];
        }
    }
    // M = Y L^-T = (L^-1 Y')'; forward-solve columns of Y'.
    let mut mm = vec![0.0; m * m];
    for col in 0..m {
        let mut rhs: Vec<f64> = (0..m).map(|r| y[col * m + r]).collect();
        linalg::solve_lower(l, m, &mut rhs);
        for r in 0..m {
            mm[col * m + r] = rhs[r];
        }
    }
    // Symmetrize roundoff.
    for i in 0..m {
        for j in 0..i {
            let avg = 0.5 * (mm[i * m + j] + mm[j * m + i]);
            mm[i * m + j] = avg;
            mm[j * m + i] = avg;
        }
    }
    let lmin = linalg::sym_min_eig_fast(&mm, m);
    if lmin >= -1e-14 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_spd(m: usize, rng: &mut StdRng) -> Vec<f64> {
        let b: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let mut acc = if i == j { 0.3 } else { 0.0 };
                for k in 0..m {
                    acc += b[k * m + i] * b[k * m + j];
                }
                a[i * m + j] = acc;
            }
        }
        a
    }

    #[test]
    fn nt_scaling_identities() {
        let mut rng = StdRng::seed_from_u64(31);
        for m in [1usize, 2, 4, 7] {
            let layout = ConeLayout { psd: vec![m], lin: 2 };
            let mut x = BlockVec::zeros(&layout);
            let mut s = BlockVec::zeros(&layout);
            x.mats[0] = random_spd(m, &mut rng);
            s.mats[0] = random_spd(m, &mut rng);
            x.lin = vec![0.7, 2.0];
            s.lin = vec![1.3, 0.2];
            let sc = compute_scalings(&layout, &x, &s).unwrap();
            let p = &sc.psd[0];
            // R^-1 X R^-T = diag(lambda)
            let xr = congruence_rt(&p.r_inv, &x.mats[0], m);
            for i in 0..m {
                for j in 0..m {
                    let expect = if i == j { p.lambda[i] } else { 0.0 };
                    assert!(
                        (xr[i * m + j] - expect).abs() < 1e-8 * (1.0 + p.lambda[i]),
                        "m={m} scaled X mismatch at ({i},{j})"
                    );
                }
            }
            // R' S R = diag(lambda)
            let sr = congruence_t(&p.r, &s.mats[0], m);
            for i in 0..m {
                for j in 0..m {
                    let expect = if i == j { p.lambda[i] } else { 0.0 };
                    assert!(
                        (sr[i * m + j] - expect).abs() < 1e-8 * (1.0 + p.lambda[i]),
                        "m={m} scaled S mismatch at ({i},{j})"
                    );
                }
            }
            // phi = R R' and R R^-1 = I
            let mut rr = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    let mut acc = 0.0;
                    for k in 0..m {
                        acc += p.r[i * m + k] * p.r_inv[k * m + j];
                    }
                    rr[i * m + j] = acc;
                }
            }
            for i in 0..m {
                for j in 0..m {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((rr[i * m + j] - expect).abs() < 1e-8);
                }
            }
        }
    }

    // helper: A' M A
    fn congruence_t(a: &[f64], m_mat: &[f64], m: usize) -> Vec<f64> {
        let mut at = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                at[i * m + j] = a[j * m + i];
            }
        }
        let t = crate::linalg::mat_mul(&at, m_mat, m);
        crate::linalg::mat_mul(&t, a, m)
    }

    // helper: A M A'
    fn congruence_rt(a: &[f64], m_mat: &[f64], m: usize) -> Vec<f64> {
        let t = crate::linalg::mat_mul(a, m_mat, m);
        let mut at = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                at[i * m + j] = a[j * m + i];
            }
        }
        crate::linalg::mat_mul(&t, &at, m)
    }

    #[test]
    fn step_bound_matches_line_search() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..30 {
            let m = rng.gen_range(1..6);
            let x = random_spd(m, &mut rng);
            let mut d: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for i in 0..m {
                for j in 0..i {
                    let avg = 0.5 * (d[i * m + j] + d[j * m + i]);
                    d[i * m + j] = avg;
                    d[j * m + i] = avg;
                }
            }
            let l = crate::linalg::cholesky(&x, m).unwrap();
            let bound = psd_step_bound(&l, &d, m);
            if bound.is_finite() {
                // Just inside the bound must be PSD, just past must not be.
                let probe = |alpha: f64| -> bool {
                    let mut y = x.clone();
                    for (yy, dd) in y.iter_mut().zip(d.iter()) {
                        *yy += alpha * dd;
                    }
                    crate::linalg::sym_min_eig(&y, m).map_or(false, |e| e >= -1e-9)
                };
                assert!(probe(bound * 0.999));
                assert!(!probe(bound * 1.05) || bound < 1e-12);
            }
        }
    }
}
