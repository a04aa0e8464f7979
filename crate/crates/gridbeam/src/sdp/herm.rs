//! Real parametrization of complex Hermitian matrices and the entry lists of
//! the corresponding basis matrices under the [[Re,-Im],[Im,Re]] embedding.
//!
//! A Hermitian matrix of complex order n has n^2 real degrees of freedom,
//! enumerated here as the n diagonal entries followed by (re, im) pairs for
//! p < q. Each basis matrix embeds to a real symmetric matrix with at most
//! four nonzero entries, which keeps trace products against dense matrices
//! O(1) per pair.

use crate::linalg::HermitianMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dof {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

/// Canonical dof order for complex order n: diagonals first, then (re, im)
/// pairs row-major over p < q. Length n^2.
pub fn herm_dofs(n: usize) -> Vec<Dof> {
    let mut out = Vec::with_capacity(n * n);
    for p in 0..n {
        out.push(Dof::Diag(p));
    }
    for p in 0..n {
        for q in (p + 1)..n {
            out.push(Dof::Re(p, q));
            out.push(Dof::Im(p, q));
        }
    }
    out
}

/// Full entry list (row, col, value) of the embedded basis matrix for one
/// dof, complex order n (embedded order 2n). All entries are listed, not
/// just a triangle.
pub fn embedded_entries(dof: Dof, n: usize) -> Vec<(usize, usize, f64)> {
    match dof {
        Dof::Diag(p) => vec![(p, p, 1.0), (n + p, n + p, 1.0)],
        Dof::Re(p, q) => vec![
            (p, q, 1.0),
            (q, p, 1.0),
            (n + p, n + q, 1.0),
            (n + q, n + p, 1.0),
        ],
        Dof::Im(p, q) => vec![
            // embed of i(e_pq - e_qp): Im block = e_pq - e_qp
            (p, n + q, -1.0),
            (q, n + p, 1.0),
            (n + p, q, 1.0),
            (n + q, p, -1.0),
        ],
    }
}

/// Builds the complex Hermitian matrix from a dof coefficient slice.
pub fn herm_from_dofs(coeffs: &[f64], n: usize) -> HermitianMatrix {
    debug_assert_eq!(coeffs.len(), n * n);
    let mut m = HermitianMatrix::zeros(n);
    let mut idx = n;
    for p in 0..n {
        m.set(p, p, Complex64::new(coeffs[p], 0.0));
    }
    for p in 0..n {
        for q in (p + 1)..n {
            m.set(p, q, Complex64::new(coeffs[idx], coeffs[idx + 1]));
            idx += 2;
        }
    }
    m
}

/// Reads dof coefficients out of a complex Hermitian matrix (inverse of
/// `herm_from_dofs`).
pub fn dofs_from_herm(m: &HermitianMatrix) -> Vec<f64> {
    let n = m.order();
    let mut out = Vec::with_capacity(n * n);
    for p in 0..n {
        out.push(m.get(p, p).re);
    }
    for p in 0..n {
        for q in (p + 1)..n {
            let z = m.get(p, q);
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

/// h^H E_d h for the basis matrix of one dof (real by Hermitian symmetry).
pub fn basis_quad_form(dof: Dof, h: &[Complex64]) -> f64 {
    match dof {
        Dof::Diag(p) => h[p].norm_sqr(),
        Dof::Re(p, q) => 2.0 * (h[p].conj() * h[q]).re,
        Dof::Im(p, q) => -2.0 * (h[p].conj() * h[q]).im,
    }
}

/// tr(E_a W E_b W) for embedded basis matrices against a dense symmetric
/// matrix W of order 2n.
pub fn pair_trace(
    ea: &[(usize, usize, f64)],
    eb: &[(usize, usize, f64)],
    w: &[f64],
    dim: usize,
) -> f64 {
    let mut acc = 0.0;
    for &(i1, j1, s1) in ea {
        for &(i2, j2, s2) in eb {
            acc += s1 * s2 * w[j1 * dim + i2] * w[j2 * dim + i1];
        }
    }
    acc
}

/// <E_a, W> = tr(E_a W) against a dense symmetric matrix of order 2n.
pub fn basis_dot(ea: &[(usize, usize, f64)], w: &[f64], dim: usize) -> f64 {
    ea.iter().map(|&(i, j, s)| s * w[j * dim + i]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn dof_roundtrip() {
        let mut rng = StdRng::seed_from_u64(2);
        for n in [1usize, 2, 4] {
            let coeffs: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = herm_from_dofs(&coeffs, n);
            let back = dofs_from_herm(&m);
            for (a, b) in coeffs.iter().zip(back.iter()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn embedded_entries_match_real_embed() {
        for n in [1usize, 2, 3] {
            for (d, dof) in herm_dofs(n).into_iter().enumerate() {
                let mut coeffs = vec![0.0; n * n];
                coeffs[d] = 1.0;
                let m = herm_from_dofs(&coeffs, n);
                let emb = m.real_embed();
                let dim = 2 * n;
                let mut dense = vec![0.0; dim * dim];
                for (i, j, s) in embedded_entries(dof, n) {
                    dense[i * dim + j] += s;
                }
                for (a, b) in dense.iter().zip(emb.iter()) {
                    assert!((a - b).abs() < 1e-15, "dof {dof:?} n={n}");
                }
            }
        }
    }

    #[test]
    fn pair_trace_matches_dense() {
        let mut rng = StdRng::seed_from_u64(9);
        let n = 3;
        let dim = 2 * n;
        // random symmetric W
        let mut w = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let v = rng.gen_range(-1.0..1.0);
                w[i * dim + j] = v;
                w[j * dim + i] = v;
            }
        }
        let dofs = herm_dofs(n);
        for &da in &dofs {
            for &db in &dofs {
                let ea = embedded_entries(da, n);
                let eb = embedded_entries(db, n);
                let fast = pair_trace(&ea, &eb, &w, dim);
                // dense comparison
                let mut ma = vec![0.0; dim * dim];
                for (i, j, s) in &ea {
                    ma[i * dim + j] += s;
                }
                let mut mb = vec![0.0; dim * dim];
                for (i, j, s) in &eb {
                    mb[i * dim + j] += s;
                }
                let t1 = crate::linalg::mat_mul(&ma, &w, dim);
                let t2 = crate::linalg::mat_mul(&t1, &mb, dim);
                let t3 = crate::linalg::mat_mul(&t2, &w, dim);
                let tr: f64 = (0..dim).map(|i| t3[i * dim + i]).sum();
                assert!(
                    (fast - tr).abs() < 1e-12 * (1.0 + tr.abs()),
                    "{da:?} vs {db:?}: {fast} != {tr}"
                );
            }
        }
    }

    #[test]
    fn quad_form_matches_direct() {
        let mut rng = StdRng::seed_from_u64(4);
        let n = 4;
        let h: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        for (d, dof) in herm_dofs(n).into_iter().enumerate() {
            let mut coeffs = vec![0.0; n * n];
            coeffs[d] = 1.0;
            let m = herm_from_dofs(&coeffs, n);
            let direct = m.quad_form(&h);
            let fast = basis_quad_form(dof, &h);
            assert!((direct - fast).abs() < 1e-12);
        }
    }
}
