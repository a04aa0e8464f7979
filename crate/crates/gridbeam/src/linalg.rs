//! Complex Hermitian linear algebra: eigendecomposition, PSD tests, and the
//! complex-to-real symmetric embedding used by the conic solver.
//!
//! Everything here is dense and sized for beamforming problems (orders up to
//! a few dozen), so the kernels favor determinism and accuracy over blocking.

use num_complex::Complex64;
use thiserror::Error;

/// Default tolerance for positive-semidefinite queries.
pub const PSD_TOL: f64 = 1e-9;

/// Hermitian-symmetry tolerance enforced on construction.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not Hermitian: |A[{row},{col}] - conj(A[{col},{row}])| = {deviation:.3e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
    },
    #[error("eigenvalue iteration failed to converge at index {0}")]
    NoConvergence(usize),
    #[error("matrix is not positive definite (pivot {pivot:.3e} at column {col})")]
    NotPositiveDefinite { col: usize, pivot: f64 },
    #[error("singular matrix in LU solve (pivot {0:.3e})")]
    Singular(f64),
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

// ---------------------------------------------------------------------------
// Dense complex Hermitian matrix
// ---------------------------------------------------------------------------

/// Dense complex Hermitian matrix, row-major storage of all n*n entries.
///
/// The constructor enforces `A = A^H` to `HERMITIAN_TOL` and symmetrizes,
/// so downstream code can rely on exact Hermitian storage.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn new(n: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        assert_eq!(data.len(), n * n, "entry count must be n*n");
        let scale = data.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for r in 0..n {
            for c in r..n {
                let dev = (data[r * n + c] - data[c * n + r].conj()).norm();
                if dev > HERMITIAN_TOL * scale {
                    return Err(LinalgError::NotHermitian {
                        row: r,
                        col: c,
                        deviation: dev,
                    });
                }
            }
        }
        let mut m = Self { n, data };
        m.symmetrize();
        Ok(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds w w^H from a vector.
    pub fn outer(w: &[Complex64]) -> Self {
        let n = w.len();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                data[r * n + c] = w[r] * w[c].conj();
            }
        }
        Self { n, data }
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(d[i], 0.0);
        }
        m
    }

    /// Averages A and A^H; cleans up roundoff drift after arithmetic.
    fn symmetrize(&mut self) {
        let n = self.n;
        for r in 0..n {
            self.data[r * n + r] = Complex64::new(self.data[r * n + r].re, 0.0);
            for c in (r + 1)..n {
                let avg = 0.5 * (self.data[r * n + c] + self.data[c * n + r].conj());
                self.data[r * n + c] = avg;
                self.data[c * n + r] = avg.conj();
            }
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.n + c] = v;
        if r != c {
            self.data[c * self.n + r] = v.conj();
        } else {
            self.data[r * self.n + r] = Complex64::new(v.re, 0.0);
        }
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn add_scaled(&mut self, other: &HermitianMatrix, s: f64) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.data.iter_mut() {
            *a *= s;
        }
    }

    /// tr(A B), real because both are Hermitian.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                // tr(AB) = sum_{r,c} A[r,c] * B[c,r]
                let p = self.data[r * n + c] * other.data[c * n + r];
                acc += p.re;
            }
        }
        acc
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i].re).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// A * v for a complex vector v.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for r in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..n {
                acc += self.data[r * n + c] * v[c];
            }
            out[r] = acc;
        }
        out
    }

    /// v^H A v, real for Hermitian A.
    pub fn quad_form(&self, v: &[Complex64]) -> f64 {
        let av = self.mul_vec(v);
        v.iter()
            .zip(av.iter())
            .map(|(x, y)| (x.conj() * y).re)
            .sum()
    }

    /// Eigendecomposition; eigenvalues ascending, columns of the returned
    /// matrix are orthonormal eigenvectors.
    pub fn eigh(&self) -> Result<EigDecomposition, LinalgError> {
        eigh(self)
    }

    /// Real symmetric embedding [[Re, -Im], [Im, Re]] of order 2n.
    pub fn real_embed(&self) -> Vec<f64> {
        let n = self.n;
        let m = 2 * n;
        let mut out = vec![0.0; m * m];
        for r in 0..n {
            for c in 0..n {
                let z = self.data[r * n + c];
                out[r * m + c] = z.re;
                out[(n + r) * m + (n + c)] = z.re;
                out[r * m + (n + c)] = -z.im;
                out[(n + r) * m + c] = z.im;
            }
        }
        out
    }

    /// PSD test: true iff the smallest eigenvalue is >= -tol.
    pub fn is_psd(&self, tol: f64) -> bool {
        match self.eigh() {
            Ok(d) => d.values[0] >= -tol,
            Err(_) => false,
        }
    }

    pub fn min_eigenvalue(&self) -> Result<f64, LinalgError> {
        Ok(self.eigh()?.values[0])
    }
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column j of this n x n complex matrix is the eigenvector for values[j].
    pub vectors: Vec<Complex64>,
    pub n: usize,
}

impl EigDecomposition {
    pub fn vector(&self, j: usize) -> Vec<Complex64> {
        (0..self.n).map(|i| self.vectors[i * self.n + j]).collect()
    }
}

/// Complex Hermitian eigendecomposition: unitary reduction to real
/// tridiagonal form by Householder reflections, then implicit-shift QL.
pub fn eigh(a: &HermitianMatrix) -> Result<EigDecomposition, LinalgError> {
    let n = a.order();
    if n == 0 {
        return Ok(EigDecomposition {
            values: vec![],
            vectors: vec![],
            n,
        });
    }
    let mut work = a.data.clone();
    // q accumulates the unitary transformation, column-major application.
    let mut q = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        q[i * n + i] = Complex64::new(1.0, 0.0);
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n]; // subdiagonal in e[1..]

    // Householder reduction, processing columns left to right. After step k
    // the trailing principal part is untouched and column k has a single
    // (complex) subdiagonal entry which gets its phase absorbed below.
    let mut sub = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(2) {
        // x = work[k+1.., k]
        let mut norm_sq = 0.0;
        for r in (k + 1)..n {
            norm_sq += work[r * n + k].norm_sqr();
        }
        let norm = norm_sq.sqrt();
        let x0 = work[(k + 1) * n + k];
        if norm <= 1e-300 {
            sub[k + 1] = Complex64::new(0.0, 0.0);
            continue;
        }
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        // v = x + phase*norm*e1 ; H = I - beta v v^H maps x to -phase*norm*e1.
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for r in (k + 1)..n {
            v[r] = work[r * n + k];
        }
        v[k + 1] += phase * norm;
        let vnorm_sq: f64 = v[(k + 1)..n].iter().map(|z| z.norm_sqr()).sum();
        if vnorm_sq <= 1e-300 {
            sub[k + 1] = Complex64::new(0.0, 0.0);
            continue;
        }
        let beta = 2.0 / vnorm_sq;

        // A <- H A H with H = I - beta v v^H, restricted to rows/cols k+1..
        // p = beta * A v ; K = beta/2 * v^H p ; A -= v p^H + p v^H - 2K v v^H
        let mut p = vec![Complex64::new(0.0, 0.0); n];
        for r in (k + 1)..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in (k + 1)..n {
                acc += work[r * n + c] * v[c];
            }
            p[r] = beta * acc;
        }
        let vhp: Complex64 = v[(k + 1)..n]
            .iter()
            .zip(p[(k + 1)..n].iter())
            .map(|(vi, pi)| vi.conj() * pi)
            .sum();
        let kk = 0.5 * beta * vhp;
        // A[r,c] -= v[r]*w[c]^* + w[r]*v[c]^* with w = p - kk*v
        for r in (k + 1)..n {
            let wr = p[r] - kk * v[r];
            for c in (k + 1)..n {
                let wc = p[c] - kk * v[c];
                work[r * n + c] -= v[r] * wc.conj() + wr * v[c].conj();
            }
        }
        // Column k gets the reflected value; store and zero the rest.
        let new_sub = -phase * norm;
        work[(k + 1) * n + k] = new_sub;
        work[k * n + (k + 1)] = new_sub.conj();
        for r in (k + 2)..n {
            work[r * n + k] = Complex64::new(0.0, 0.0);
            work[k * n + r] = Complex64::new(0.0, 0.0);
        }
        sub[k + 1] = new_sub;

        // Q <- Q H (apply reflector to columns of q from the right).
        for r in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in (k + 1)..n {
                acc += q[r * n + c] * v[c];
            }
            let acc = beta * acc;
            for c in (k + 1)..n {
                q[r * n + c] -= acc * v[c].conj();
            }
        }
    }
    if n >= 2 {
        sub[n - 1] = work[(n - 1) * n + (n - 2)];
    }

    // Absorb subdiagonal phases into a diagonal unitary so the tridiagonal
    // matrix becomes real: D[0]=1, D[j] = D[j-1] * conj(t_j)/|t_j|.
    let mut dphase = vec![Complex64::new(1.0, 0.0); n];
    for j in 1..n {
        let t = sub[j];
        let mag = t.norm();
        e[j] = mag;
        if mag > 0.0 {
            // want conj(D[j]) * t * D[j-1] real positive
            dphase[j] = (t / mag) * dphase[j - 1];
        } else {
            dphase[j] = dphase[j - 1];
        }
    }
    for i in 0..n {
        d[i] = work[i * n + i].re;
    }
    for r in 0..n {
        for c in 0..n {
            q[r * n + c] *= dphase[c];
        }
    }

    // Implicit-shift QL on the real tridiagonal (d, e), rotations applied to
    // the complex eigenvector columns.
    tql2_complex(&mut d, &mut e, &mut q, n)?;

    // Sort ascending, permuting eigenvector columns.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let values: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let mut vectors = vec![Complex64::new(0.0, 0.0); n * n];
    for (new_c, &old_c) in idx.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + new_c] = q[r * n + old_c];
        }
    }
    Ok(EigDecomposition {
        values,
        vectors,
        n,
    })
}

/// QL with implicit shifts on a real symmetric tridiagonal; the plane
/// rotations are accumulated into complex eigenvector columns.
fn tql2_complex(
    d: &mut [f64],
    e: &mut [f64],
    q: &mut [Complex64],
    n: usize,
) -> Result<(), LinalgError> {
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            // Find small subdiagonal element.
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(LinalgError::NoConvergence(l));
            }
            // Implicit shift from 2x2 trailing block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            if g < 0.0 {
                r = -r;
            }
            g = d[m] - d[l] + e[l] / (g + r);
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // Apply rotation to eigenvector columns i and i+1.
                for row in 0..n {
                    f = q[row * n + (i + 1)].re;
                    let fi = q[row * n + (i + 1)].im;
                    let vr = q[row * n + i];
                    q[row * n + (i + 1)] = Complex64::new(s * vr.re + c * f, s * vr.im + c * fi);
                    q[row * n + i] = Complex64::new(c * vr.re - s * f, c * vr.im - s * fi);
                }
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Real symmetric dense kernels (used by the conic solver)
// ---------------------------------------------------------------------------

/// Real symmetric eigendecomposition via Householder tridiagonalization and
/// implicit-shift QL. `a` is n x n row-major; returns ascending eigenvalues
/// and an orthogonal matrix with eigenvectors as columns.
pub fn sym_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    assert_eq!(a.len(), n * n);
    // Reuse the complex path; roundoff asymmetry is averaged away first and
    // the imaginary parts stay exactly zero.
    let data: Vec<Complex64> = (0..n * n)
        .map(|idx| {
            let (r, c) = (idx / n, idx % n);
            Complex64::new(0.5 * (a[r * n + c] + a[c * n + r]), 0.0)
        })
        .collect();
    let h = HermitianMatrix::new(n, data)
        .map_err(|_| LinalgError::Shape("sym_eigen input not symmetric".into()))?;
    let dec = eigh(&h)?;
    let vecs = dec.vectors.iter().map(|z| z.re).collect();
    Ok((dec.values, vecs))
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn sym_min_eig(a: &[f64], n: usize) -> Result<f64, LinalgError> {
    Ok(sym_eigen(a, n)?.0[0])
}

/// Smallest eigenvalue of a real symmetric matrix without eigenvectors:
/// Householder tridiagonalization followed by Sturm bisection. Much cheaper
/// than the full decomposition; used for cone step-length bounds.
pub fn sym_min_eig_fast(a: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return a[0];
    }
    // Householder tridiagonalization (no vector accumulation), symmetric
    // input assumed up to roundoff (the symmetric part is used).
    let mut m = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            m[r * n + c] = 0.5 * (a[r * n + c] + a[c * n + r]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n]; // subdiagonal in e[1..]
    for k in 0..n.saturating_sub(2) {
        let mut norm_sq = 0.0;
        for r in (k + 1)..n {
            norm_sq += m[r * n + k] * m[r * n + k];
        }
        let norm = norm_sq.sqrt();
        if norm <= 1e-300 {
            e[k + 1] = 0.0;
            continue;
        }
        let x0 = m[(k + 1) * n + k];
        let sign = if x0 >= 0.0 { 1.0 } else { -1.0 };
        let mut v = vec![0.0; n];
        for r in (k + 1)..n {
            v[r] = m[r * n + k];
        }
        v[k + 1] += sign * norm;
        let vv: f64 = v[(k + 1)..n].iter().map(|x| x * x).sum();
        if vv <= 1e-300 {
            e[k + 1] = 0.0;
            continue;
        }
        let beta = 2.0 / vv;
        // p = beta * A v; w = p - (beta/2 v'p) v; A -= v w' + w v'
        let mut p = vec![0.0; n];
        for r in (k + 1)..n {
            let mut acc = 0.0;
            for c in (k + 1)..n {
                acc += m[r * n + c] * v[c];
            }
            p[r] = beta * acc;
        }
        let vp: f64 = v[(k + 1)..n]
            .iter()
            .zip(p[(k + 1)..n].iter())
            .map(|(x, y)| x * y)
            .sum();
        let half = 0.5 * beta * vp;
        for r in (k + 1)..n {
            let wr = p[r] - half * v[r];
            for c in (k + 1)..n {
                let wc = p[c] - half * v[c];
                m[r * n + c] -= v[r] * wc + wr * v[c];
            }
        }
        e[k + 1] = -sign * norm;
        m[(k + 1) * n + k] = e[k + 1];
        for r in (k + 2)..n {
            m[r * n + k] = 0.0;
        }
    }
    if n >= 2 {
        e[n - 1] = m[(n - 1) * n + (n - 2)];
    }
    for i in 0..n {
        d[i] = m[i * n + i];
    }
    // Gershgorin bounds, then bisection on the Sturm count.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i].abs() } else { 0.0 }
            + if i + 1 < n { e[i + 1].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(1e-300);
    let count_below = |x: f64| -> usize {
        // Number of eigenvalues < x via the LDL pivot signs.
        let mut cnt = 0usize;
        let mut q = d[0] - x;
        if q < 0.0 {
            cnt += 1;
        }
        for i in 1..n {
            let denom = if q.abs() < 1e-300 {
                1e-300 * if q >= 0.0 { 1.0 } else { -1.0 }
            } else {
                q
            };
            q = d[i] - x - e[i] * e[i] / denom;
            if q < 0.0 {
                cnt += 1;
            }
        }
        cnt
    };
    let mut a_lo = lo - 1e-12 * scale;
    let mut a_hi = hi + 1e-12 * scale;
    for _ in 0..80 {
        let mid = 0.5 * (a_lo + a_hi);
        if count_below(mid) >= 1 {
            a_hi = mid;
        } else {
            a_lo = mid;
        }
        if a_hi - a_lo <= 1e-13 * scale {
            break;
        }
    }
    // a_hi has at least one eigenvalue below it; a_lo has none: the minimum
    // eigenvalue lies in [a_lo, a_hi]. Return the lower end (safe side for
    // step bounds).
    a_lo
}

/// In-place lower Cholesky of a symmetric positive definite matrix.
/// Returns the lower factor L (full storage with upper part zeroed).
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>, LinalgError> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { col: j, pivot: diag });
        }
        let dj = diag.sqrt();
        l[j * n + j] = dj;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / dj;
        }
    }
    Ok(l)
}

/// Solves L x = b with lower-triangular L (forward substitution), in place.
pub fn solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * n + k] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}

/// Solves L' x = b with lower-triangular L (backward substitution), in place.
pub fn solve_lower_t(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v -= l[k * n + i] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}

/// Solves (L L') x = b given the Cholesky factor.
pub fn chol_solve(l: &[f64], n: usize, b: &mut [f64]) {
    solve_lower(l, n, b);
    solve_lower_t(l, n, b);
}

/// LU factorization with partial pivoting; returns (lu, perm).
pub fn lu_factor(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<usize>), LinalgError> {
    let mut lu = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut pmax = lu[k * n + k].abs();
        let mut prow = k;
        for i in (k + 1)..n {
            let v = lu[i * n + k].abs();
            if v > pmax {
                pmax = v;
                prow = i;
            }
        }
        if pmax < 1e-300 {
            return Err(LinalgError::Singular(pmax));
        }
        if prow != k {
            for c in 0..n {
                lu.swap(k * n + c, prow * n + c);
            }
            perm.swap(k, prow);
        }
        let pivot = lu[k * n + k];
        for i in (k + 1)..n {
            let m = lu[i * n + k] / pivot;
            lu[i * n + k] = m;
            for c in (k + 1)..n {
                lu[i * n + c] -= m * lu[k * n + c];
            }
        }
    }
    Ok((lu, perm))
}

/// Solves A x = b using a factorization from `lu_factor`.
pub fn lu_solve(lu: &[f64], perm: &[usize], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|i| b[perm[i]]).collect();
    for i in 0..n {
        for k in 0..i {
            x[i] -= lu[i * n + k] * x[k];
        }
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            x[i] -= lu[i * n + k] * x[k];
        }
        x[i] /= lu[i * n + i];
    }
    x
}

/// One-sided Jacobi SVD of a square matrix: B = U Sigma V'. Returns
/// (singular values, V). U is not formed; callers only need V and Sigma.
pub fn jacobi_svd(b: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = b.to_vec(); // columns get orthogonalized in place
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let eps = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for r in 0..n {
                    let cp = u[r * n + p];
                    let cq = u[r * n + q];
                    app += cp * cp;
                    aqq += cq * cq;
                    apq += cp * cq;
                }
                if apq.abs() <= eps * (app * aqq).sqrt() + 1e-300 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..n {
                    let cp = u[r * n + p];
                    let cq = u[r * n + q];
                    u[r * n + p] = c * cp - s * cq;
                    u[r * n + q] = s * cp + c * cq;
                    let vp = v[r * n + p];
                    let vq = v[r * n + q];
                    v[r * n + p] = c * vp - s * vq;
                    v[r * n + q] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = vec![0.0; n];
    for j in 0..n {
        let mut s = 0.0;
        for r in 0..n {
            s += u[r * n + j] * u[r * n + j];
        }
        sigma[j] = s.sqrt();
    }
    (sigma, v)
}

/// Dense symmetric matrix product helper: out = m1 * m2 (row-major, n x n).
pub fn mat_mul(m1: &[f64], m2: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let a = m1[i * n + k];
            if a == 0.0 {
                continue;
            }
            let row = &m2[k * n..(k + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &b) in orow.iter_mut().zip(row.iter()) {
                *o += a * b;
            }
        }
    }
    out
}
