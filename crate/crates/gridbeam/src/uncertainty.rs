//! Renewable-energy uncertainty sets and the worst-case-energy oracle.
//!
//! Two set shapes are supported: a polyhedral set (per-slot box plus
//! sub-horizon sum bounds) and an ellipsoid (center plus positive-definite
//! shape matrix), plus a degenerate singleton used by the heuristic baseline.
//!
//! The worst-case transaction cost over a set is a maximization of a convex
//! piecewise-linear function, so its optimum sits at an extreme point. The
//! oracle enumerates the 2^T sign patterns of |p - e|; each pattern reduces
//! to a linear maximization solved exactly (greedy for the box-plus-sums
//! polyhedron, closed form for the ellipsoid).

use crate::linalg::{self, LinalgError};
use crate::model::PriceCurve;
use rand::Rng;
use thiserror::Error;

/// Largest horizon the sign-pattern enumeration accepts (2^T subproblems).
pub const DEFAULT_PATTERN_CAP: usize = 16;

#[derive(Debug, Error)]
pub enum UncertaintyError {
    #[error("uncertainty set is empty: {0}")]
    Empty(String),
    #[error("sign-pattern enumeration cap exceeded: T={t} > {cap}")]
    CapExceeded { t: usize, cap: usize },
    #[error("bounds are infeasible: {0}")]
    Infeasible(String),
    #[error("sub-horizons do not partition the horizon: {0}")]
    BadPartition(String),
    #[error("shape matrix is not positive definite")]
    ShapeNotPd(#[from] LinalgError),
    #[error("operation requires a polyhedral set")]
    NotPolyhedral,
}

/// One sub-horizon of a polyhedral set: a group of slots whose total energy
/// is bounded. Either bound may be absent.
#[derive(Debug, Clone)]
pub struct SubHorizon {
    pub slots: Vec<usize>,
    pub sum_min: Option<f64>,
    pub sum_max: Option<f64>,
}

/// Per-slot box bounds plus sub-horizon sum bounds (the sub-horizons must
/// partition the whole horizon).
#[derive(Debug, Clone)]
pub struct PolyhedralSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub sub_horizons: Vec<SubHorizon>,
}

impl PolyhedralSet {
    /// Pure box set: one sub-horizon covering everything, no sum bounds.
    pub fn from_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, UncertaintyError> {
        let t = lower.len();
        Self::new(
            lower,
            upper,
            vec![SubHorizon {
                slots: (0..t).collect(),
                sum_min: None,
                sum_max: None,
            }],
        )
    }

    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        sub_horizons: Vec<SubHorizon>,
    ) -> Result<Self, UncertaintyError> {
        let t = lower.len();
        if upper.len() != t {
            return Err(UncertaintyError::Infeasible(
                "lower/upper length mismatch".into(),
            ));
        }
        for i in 0..t {
            if lower[i] > upper[i] {
                return Err(UncertaintyError::Infeasible(format!(
                    "lower[{i}]={} > upper[{i}]={}",
                    lower[i], upper[i]
                )));
            }
        }
        let mut seen = vec![false; t];
        for (s, sh) in sub_horizons.iter().enumerate() {
            for &slot in &sh.slots {
                if slot >= t || seen[slot] {
                    return Err(UncertaintyError::BadPartition(format!(
                        "slot {slot} repeated or out of range in sub-horizon {s}"
                    )));
                }
                seen[slot] = true;
            }
            let lo_sum: f64 = sh.slots.iter().map(|&i| lower[i]).sum();
            let hi_sum: f64 = sh.slots.iter().map(|&i| upper[i]).sum();
            if let Some(mx) = sh.sum_max {
                if lo_sum > mx + 1e-12 {
                    return Err(UncertaintyError::Empty(format!(
                        "sub-horizon {s}: sum of lower bounds {lo_sum} exceeds sum_max {mx}"
                    )));
                }
            }
            if let Some(mn) = sh.sum_min {
                if hi_sum < mn - 1e-12 {
                    return Err(UncertaintyError::Empty(format!(
                        "sub-horizon {s}: sum of upper bounds {hi_sum} below sum_min {mn}"
                    )));
                }
            }
            if let (Some(mn), Some(mx)) = (sh.sum_min, sh.sum_max) {
                if mn > mx {
                    return Err(UncertaintyError::Infeasible(format!(
                        "sub-horizon {s}: sum_min {mn} > sum_max {mx}"
                    )));
                }
            }
        }
        if !seen.iter().all(|&b| b) {
            return Err(UncertaintyError::BadPartition(
                "some slots belong to no sub-horizon".into(),
            ));
        }
        Ok(Self {
            lower,
            upper,
            sub_horizons,
        })
    }

    pub fn horizon(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, e: &[f64], tol: f64) -> bool {
        for i in 0..self.horizon() {
            if e[i] < self.lower[i] - tol || e[i] > self.upper[i] + tol {
                return false;
            }
        }
        for sh in &self.sub_horizons {
            let sum: f64 = sh.slots.iter().map(|&i| e[i]).sum();
            if let Some(mn) = sh.sum_min {
                if sum < mn - tol {
                    return false;
                }
            }
            if let Some(mx) = sh.sum_max {
                if sum > mx + tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Ellipsoid { center + v : v' Sigma^{-1} v <= 1 }; the Cholesky factor of
/// Sigma is computed on construction, which also validates positive
/// definiteness.
#[derive(Debug, Clone)]
pub struct EllipsoidalSet {
    pub center: Vec<f64>,
    pub shape: Vec<f64>,
    chol: Vec<f64>,
}

impl EllipsoidalSet {
    pub fn new(center: Vec<f64>, shape: Vec<f64>) -> Result<Self, UncertaintyError> {
        let t = center.len();
        if shape.len() != t * t {
            return Err(UncertaintyError::Infeasible(
                "shape matrix size mismatch".into(),
            ));
        }
        for r in 0..t {
            for c in 0..t {
                if (shape[r * t + c] - shape[c * t + r]).abs() > 1e-9 {
                    return Err(UncertaintyError::Infeasible(
                        "shape matrix not symmetric".into(),
                    ));
                }
            }
        }
        let chol = linalg::cholesky(&shape, t)?;
        Ok(Self {
            center,
            shape,
            chol,
        })
    }

    pub fn horizon(&self) -> usize {
        self.center.len()
    }

    /// (e - center)' Sigma^{-1} (e - center)
    pub fn mahalanobis_sq(&self, e: &[f64]) -> f64 {
        let t = self.horizon();
        let mut v: Vec<f64> = (0..t).map(|i| e[i] - self.center[i]).collect();
        linalg::solve_lower(&self.chol, t, &mut v);
        v.iter().map(|x| x * x).sum()
    }

    pub fn contains(&self, e: &[f64], tol: f64) -> bool {
        self.mahalanobis_sq(e) <= 1.0 + tol
    }

    /// max over the set of c'e, attained at center + Sigma c / sqrt(c'Sigma c).
    pub fn maximize_linear(&self, c: &[f64]) -> (Vec<f64>, f64) {
        let t = self.horizon();
        let mut sc = vec![0.0; t];
        for r in 0..t {
            for j in 0..t {
                sc[r] += self.shape[r * t + j] * c[j];
            }
        }
        let quad: f64 = c.iter().zip(sc.iter()).map(|(a, b)| a * b).sum();
        let denom = quad.max(0.0).sqrt();
        let mut e = self.center.clone();
        if denom > 1e-300 {
            for i in 0..t {
                e[i] += sc[i] / denom;
            }
        }
        let val: f64 = c.iter().zip(e.iter()).map(|(a, b)| a * b).sum();
        (e, val)
    }
}

/// Tagged union over the supported set shapes.
#[derive(Debug, Clone)]
pub enum UncertaintySet {
    Polyhedral(PolyhedralSet),
    Ellipsoidal(EllipsoidalSet),
    /// Degenerate one-point set (heuristic baseline).
    Singleton(Vec<f64>),
}

impl UncertaintySet {
    pub fn horizon(&self) -> usize {
        match self {
            UncertaintySet::Polyhedral(p) => p.horizon(),
            UncertaintySet::Ellipsoidal(e) => e.horizon(),
            UncertaintySet::Singleton(v) => v.len(),
        }
    }

    pub fn contains(&self, e: &[f64], tol: f64) -> bool {
        match self {
            UncertaintySet::Polyhedral(p) => p.contains(e, tol),
            UncertaintySet::Ellipsoidal(el) => el.contains(e, tol),
            UncertaintySet::Singleton(v) => v
                .iter()
                .zip(e.iter())
                .all(|(a, b)| (a - b).abs() <= tol),
        }
    }
}

/// Result of the worst-case-energy maximization.
#[derive(Debug, Clone)]
pub struct WorstCase {
    /// Maximizing energy vector (an extreme point of the set).
    pub e_star: Vec<f64>,
    /// max over the set of sum_t psi|p-e| + phi(p-e).
    pub value: f64,
}

/// Worst-case energy over the set for a given power profile p:
/// maximize sum_t (psi^t |p^t - e^t| + phi^t (p^t - e^t)).
pub fn worst_case_energy(
    set: &UncertaintySet,
    p: &[f64],
    prices: &PriceCurve,
) -> Result<WorstCase, UncertaintyError> {
    match set {
        UncertaintySet::Singleton(e) => {
            let value = cost_at(p, e, prices);
            Ok(WorstCase {
                e_star: e.clone(),
                value,
            })
        }
        _ => sign_pattern_maximize(set, p, prices, DEFAULT_PATTERN_CAP),
    }
}

/// Direct evaluation of the inner objective at a fixed energy vector.
fn cost_at(p: &[f64], e: &[f64], prices: &PriceCurve) -> f64 {
    p.iter()
        .zip(e.iter())
        .enumerate()
        .map(|(t, (&pt, &et))| {
            let d = pt - et;
            prices.psi[t] * d.abs() + prices.phi[t] * d
        })
        .sum()
}

/// Exact maximization by sign-pattern enumeration. For each pattern s in
/// {-1,+1}^T the objective is linear with per-slot price phi + s*psi (which
/// equals alpha on buy slots and beta on sell slots); each linear problem is
/// solved exactly and the best pattern wins. Ties prefer the
/// lexicographically smallest maximizer.
pub fn sign_pattern_maximize(
    set: &UncertaintySet,
    p: &[f64],
    prices: &PriceCurve,
    cap: usize,
) -> Result<WorstCase, UncertaintyError> {
    let t = set.horizon();
    assert_eq!(p.len(), t, "power profile length mismatch");
    if t > cap {
        return Err(UncertaintyError::CapExceeded { t, cap });
    }
    let mut best: Option<WorstCase> = None;
    let mut coeff = vec![0.0; t];
    for mask in 0u64..(1u64 << t) {
        // price_t = phi + s*psi; maximize sum price*(p - e) = const + max c'e
        // with c = -price.
        let mut const_part = 0.0;
        for i in 0..t {
            let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            let price = prices.phi[i] + s * prices.psi[i];
            const_part += price * p[i];
            coeff[i] = -price;
        }
        let (e, lin_val) = match set {
            UncertaintySet::Polyhedral(poly) => greedy_box_sum_lp(&coeff, poly, Sense::Max)?,
            UncertaintySet::Ellipsoidal(el) => el.maximize_linear(&coeff),
            UncertaintySet::Singleton(v) => {
                let val = coeff.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                (v.clone(), val)
            }
        };
        let value = const_part + lin_val;
        let better = match &best {
            None => true,
            Some(b) => {
                value > b.value || (value == b.value && lex_less(&e, &b.e_star))
            }
        };
        if better {
            best = Some(WorstCase { e_star: e, value });
        }
    }
    Ok(best.expect("at least one pattern"))
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

/// Exact LP over the box-plus-sub-horizon-sum polyhedron. Within each
/// sub-horizon: start at the unconstrained corner, then walk coordinates in
/// cost order toward the binding sum bound; at most one coordinate ends up
/// fractional. Returns the optimal vertex and objective value.
pub fn greedy_box_sum_lp(
    c: &[f64],
    set: &PolyhedralSet,
    sense: Sense,
) -> Result<(Vec<f64>, f64), UncertaintyError> {
    let t = set.horizon();
    let mut e = vec![0.0; t];
    // Minimization is maximization of -c; keep one code path.
    let cc: Vec<f64> = match sense {
        Sense::Max => c.to_vec(),
        Sense::Min => c.iter().map(|x| -x).collect(),
    };
    for sh in &set.sub_horizons {
        // Unconstrained corner: e_i = upper if c_i > 0 else lower
        // (c_i == 0 defaults to lower for determinism).
        for &i in &sh.slots {
            e[i] = if cc[i] > 0.0 {
                set.upper[i]
            } else {
                set.lower[i]
            };
        }
        let mut sum: f64 = sh.slots.iter().map(|&i| e[i]).sum();
        if let Some(mx) = sh.sum_max {
            if sum > mx {
                // Reduce total by sum-mx, cheapest objective loss first:
                // shrink coordinates currently at upper, smallest c first.
                let mut order: Vec<usize> = sh
                    .slots
                    .iter()
                    .copied()
                    .filter(|&i| e[i] > set.lower[i])
                    .collect();
                order.sort_by(|&a, &b| cc[a].partial_cmp(&cc[b]).unwrap().then(a.cmp(&b)));
                let mut excess = sum - mx;
                for i in order {
                    if excess <= 0.0 {
                        break;
                    }
                    let room = e[i] - set.lower[i];
                    let cut = room.min(excess);
                    e[i] -= cut;
                    excess -= cut;
                }
                if excess > 1e-9 {
                    return Err(UncertaintyError::Infeasible(
                        "sum_max unattainable from box".into(),
                    ));
                }
                sum = mx;
            }
        }
        if let Some(mn) = sh.sum_min {
            if sum < mn {
                // Raise total, cheapest objective loss first: grow
                // coordinates currently at lower, largest c first.
                let mut order: Vec<usize> = sh
                    .slots
                    .iter()
                    .copied()
                    .filter(|&i| e[i] < set.upper[i])
                    .collect();
                order.sort_by(|&a, &b| cc[b].partial_cmp(&cc[a]).unwrap().then(a.cmp(&b)));
                let mut deficit = mn - sum;
                for i in order {
                    if deficit <= 0.0 {
                        break;
                    }
                    let room = set.upper[i] - e[i];
                    let add = room.min(deficit);
                    e[i] += add;
                    deficit -= add;
                }
                if deficit > 1e-9 {
                    return Err(UncertaintyError::Infeasible(
                        "sum_min unattainable from box".into(),
                    ));
                }
            }
        }
    }
    let val: f64 = c.iter().zip(e.iter()).map(|(a, b)| a * b).sum();
    Ok((e, val))
}

/// Draws one renewable realization from the per-slot box of a polyhedral set:
/// E~ = lower + kappa * U * (upper - lower) with U uniform on [0,1) per slot.
/// Sub-horizon sum bounds are intentionally not enforced by the generator.
pub fn sample_realization<R: Rng>(set: &PolyhedralSet, kappa: f64, rng: &mut R) -> Vec<f64> {
    assert!((0.0..=1.0).contains(&kappa), "kappa must be in [0,1]");
    (0..set.horizon())
        .map(|i| {
            let u: f64 = rng.gen();
            set.lower[i] + kappa * u * (set.upper[i] - set.lower[i])
        })
        .collect()
}

/// Reference implementations used to verify the oracle: exhaustive vertex
/// enumeration, practical for T <= 4. Independent of the greedy/sign-pattern
/// code paths above.
pub mod reference {
    use super::*;

    /// Enumerates all vertices of a box-plus-sum polyhedron. Candidates are
    /// corner patterns plus, for each coordinate and each sum bound, the
    /// point with that coordinate adjusted to meet the bound; infeasible
    /// candidates are dropped and duplicates removed.
    pub fn enumerate_vertices(set: &PolyhedralSet) -> Vec<Vec<f64>> {
        let t = set.horizon();
        let mut per_sh: Vec<Vec<Vec<f64>>> = Vec::new();
        for sh in &set.sub_horizons {
            let k = sh.slots.len();
            let mut pts: Vec<Vec<f64>> = Vec::new();
            for mask in 0u64..(1u64 << k) {
                let corner: Vec<f64> = (0..k)
                    .map(|j| {
                        if mask >> j & 1 == 1 {
                            set.upper[sh.slots[j]]
                        } else {
                            set.lower[sh.slots[j]]
                        }
                    })
                    .collect();
                let sum: f64 = corner.iter().sum();
                let ok_min = sh.sum_min.map_or(true, |mn| sum >= mn - 1e-12);
                let ok_max = sh.sum_max.map_or(true, |mx| sum <= mx + 1e-12);
                if ok_min && ok_max {
                    pts.push(corner.clone());
                }
                // One fractional coordinate pinned by a binding sum bound.
                for frac in 0..k {
                    for bound in [sh.sum_min, sh.sum_max].into_iter().flatten() {
                        let others: f64 = (0..k)
                            .filter(|&j| j != frac)
                            .map(|j| corner[j])
                            .sum();
                        let v = bound - others;
                        let (lo, hi) =
                            (set.lower[sh.slots[frac]], set.upper[sh.slots[frac]]);
                        if v >= lo - 1e-12 && v <= hi + 1e-12 {
                            let mut pt = corner.clone();
                            pt[frac] = v.clamp(lo, hi);
                            let s: f64 = pt.iter().sum();
                            let okmn = sh.sum_min.map_or(true, |mn| s >= mn - 1e-9);
                            let okmx = sh.sum_max.map_or(true, |mx| s <= mx + 1e-9);
                            if okmn && okmx {
                                pts.push(pt);
                            }
                        }
                    }
                }
            }
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pts.dedup_by(|a, b| {
                a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-10)
            });
            per_sh.push(pts);
        }
        // Cartesian product across sub-horizons.
        let mut out: Vec<Vec<f64>> = vec![vec![0.0; t]];
        for (s, pts) in per_sh.iter().enumerate() {
            let slots = &set.sub_horizons[s].slots;
            let mut next = Vec::with_capacity(out.len() * pts.len());
            for base in &out {
                for pt in pts {
                    let mut v = base.clone();
                    for (j, &slot) in slots.iter().enumerate() {
                        v[slot] = pt[j];
                    }
                    next.push(v);
                }
            }
            out = next;
        }
        out
    }

    /// Worst case by brute force over all vertices.
    pub fn exhaustive_worst_case(
        set: &PolyhedralSet,
        p: &[f64],
        prices: &PriceCurve,
    ) -> WorstCase {
        let mut best: Option<WorstCase> = None;
        for v in enumerate_vertices(set) {
            let value = super::cost_at(p, &v, prices);
            let better = match &best {
                None => true,
                Some(b) => value > b.value + 0.0 || (value == b.value && lex_less(&v, &b.e_star)),
            };
            if better {
                best = Some(WorstCase { e_star: v, value });
            }
        }
        best.expect("polyhedron has at least one vertex")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PriceCurve;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn prices(alpha: &[f64], beta: &[f64]) -> PriceCurve {
        PriceCurve::new(alpha.to_vec(), beta.to_vec()).unwrap()
    }

    #[test]
    fn singleton_matches_direct_cost() {
        let pr = prices(&[1.0, 0.8], &[0.5, 0.4]);
        let set = UncertaintySet::Singleton(vec![1.5, 2.0]);
        let p = [2.0, 1.0];
        let wc = worst_case_energy(&set, &p, &pr).unwrap();
        // alpha*[p-e]^+ - beta*[p-e]^-  = 1.0*0.5 + (-0.4*1.0)
        assert!((wc.value - (1.0 * 0.5 - 0.4 * 1.0)).abs() < 1e-12);
        assert_eq!(wc.e_star, vec![1.5, 2.0]);
    }

    #[test]
    fn box_t1_example() {
        // T=1 box [1,3], p=2, alpha=1, beta=0.5 -> e*=1, value=1.0
        let pr = prices(&[1.0], &[0.5]);
        let set =
            UncertaintySet::Polyhedral(PolyhedralSet::from_box(vec![1.0], vec![3.0]).unwrap());
        let wc = worst_case_energy(&set, &[2.0], &pr).unwrap();
        assert!((wc.value - 1.0).abs() < 1e-12);
        assert!((wc.e_star[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinned_by_sum_constraint() {
        // Sum bounds equal to the sum of lower bounds pin the set to one point.
        let pr = prices(&[1.0, 1.0], &[0.5, 0.5]);
        let poly = PolyhedralSet::new(
            vec![1.0, 2.0],
            vec![4.0, 5.0],
            vec![SubHorizon {
                slots: vec![0, 1],
                sum_min: Some(3.0),
                sum_max: Some(3.0),
            }],
        )
        .unwrap();
        let set = UncertaintySet::Polyhedral(poly);
        let wc = worst_case_energy(&set, &[10.0, 10.0], &pr).unwrap();
        assert!((wc.e_star[0] - 1.0).abs() < 1e-9);
        assert!((wc.e_star[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn ellipsoid_centered_at_p() {
        // T=1, Sigma=I, center=p: worst case buys at the far-left boundary,
        // value = alpha (price of one unit bought).
        let pr = prices(&[1.0], &[0.5]);
        let set =
            UncertaintySet::Ellipsoidal(EllipsoidalSet::new(vec![2.0], vec![1.0]).unwrap());
        let wc = worst_case_energy(&set, &[2.0], &pr).unwrap();
        assert!((wc.value - 1.0).abs() < 1e-12, "value {}", wc.value);
        assert!((wc.e_star[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scarce_renewables_buy_side() {
        // p above the box everywhere: worst case is the lower corner,
        // possibly lifted by a sum lower bound.
        let pr = prices(&[1.0, 1.0, 1.0], &[0.2, 0.2, 0.2]);
        let poly = PolyhedralSet::new(
            vec![1.0, 1.0, 1.0],
            vec![2.0, 2.0, 2.0],
            vec![SubHorizon {
                slots: vec![0, 1, 2],
                sum_min: Some(4.0),
                sum_max: None,
            }],
        )
        .unwrap();
        let set = UncertaintySet::Polyhedral(poly.clone());
        let wc = worst_case_energy(&set, &[5.0, 5.0, 5.0], &pr).unwrap();
        let sum: f64 = wc.e_star.iter().sum();
        assert!((sum - 4.0).abs() < 1e-9, "sum bound should bind");
        assert!(poly.contains(&wc.e_star, 1e-9));
        let brute = reference::exhaustive_worst_case(&poly, &[5.0, 5.0, 5.0], &pr);
        assert!((wc.value - brute.value).abs() < 1e-9);
    }

    #[test]
    fn greedy_separable_cases() {
        let poly = PolyhedralSet::from_box(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        // No sum constraint: coordinatewise choice by sign of c.
        let (e, _) = greedy_box_sum_lp(&[1.0, -1.0], &poly, Sense::Max).unwrap();
        assert_eq!(e, vec![1.0, 0.0]);
        // c = 0: deterministic lower corner.
        let (e, v) = greedy_box_sum_lp(&[0.0, 0.0], &poly, Sense::Max).unwrap();
        assert_eq!(e, vec![0.0, 0.0]);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn greedy_matches_vertex_enumeration() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..300 {
            let t = rng.gen_range(1..=4usize);
            let lower: Vec<f64> = (0..t).map(|_| rng.gen_range(0.0..2.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.0..3.0)).collect();
            let lo_sum: f64 = lower.iter().sum();
            let hi_sum: f64 = upper.iter().sum();
            let sum_max = if rng.gen_bool(0.7) {
                Some(rng.gen_range(lo_sum..=hi_sum))
            } else {
                None
            };
            let sum_min = if rng.gen_bool(0.5) {
                Some(rng.gen_range(lo_sum..=sum_max.unwrap_or(hi_sum)))
            } else {
                None
            };
            let poly = PolyhedralSet::new(
                lower,
                upper,
                vec![SubHorizon {
                    slots: (0..t).collect(),
                    sum_min,
                    sum_max,
                }],
            )
            .unwrap();
            let c: Vec<f64> = (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (e, val) = greedy_box_sum_lp(&c, &poly, Sense::Max).unwrap();
            assert!(poly.contains(&e, 1e-9));
            let mut best = f64::NEG_INFINITY;
            for v in reference::enumerate_vertices(&poly) {
                let obj: f64 = c.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                best = best.max(obj);
            }
            assert!(
                (val - best).abs() < 1e-9,
                "greedy {val} vs brute {best} (t={t})"
            );
        }
    }

    #[test]
    fn oracle_matches_brute_force_small_horizons() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..300 {
            let t = rng.gen_range(1..=4usize);
            let lower: Vec<f64> = (0..t).map(|_| rng.gen_range(0.0..2.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.0..3.0)).collect();
            let hi_sum: f64 = upper.iter().sum();
            let lo_sum: f64 = lower.iter().sum();
            let sum_max = rng.gen_bool(0.6).then(|| rng.gen_range(lo_sum..=hi_sum));
            let poly = PolyhedralSet::new(
                lower,
                upper,
                vec![SubHorizon {
                    slots: (0..t).collect(),
                    sum_min: None,
                    sum_max,
                }],
            )
            .unwrap();
            let alpha: Vec<f64> = (0..t).map(|_| rng.gen_range(0.3..1.5)).collect();
            let beta: Vec<f64> = alpha.iter().map(|a| a * rng.gen_range(0.0..0.95)).collect();
            let pr = prices(&alpha, &beta);
            let p: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..6.0)).collect();
            let set = UncertaintySet::Polyhedral(poly.clone());
            let wc = worst_case_energy(&set, &p, &pr).unwrap();
            let brute = reference::exhaustive_worst_case(&poly, &p, &pr);
            assert!(
                (wc.value - brute.value).abs() < 1e-9,
                "oracle {} vs brute {}",
                wc.value,
                brute.value
            );
            assert!(poly.contains(&wc.e_star, 1e-9));
        }
    }

    #[test]
    fn ellipsoid_membership_of_maximizer() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..100 {
            let t = rng.gen_range(1..=4usize);
            let center: Vec<f64> = (0..t).map(|_| rng.gen_range(1.0..4.0)).collect();
            // Random SPD shape: B'B + I
            let b: Vec<f64> = (0..t * t).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let mut shape = vec![0.0; t * t];
            for r in 0..t {
                for c in 0..t {
                    let mut acc = if r == c { 0.5 } else { 0.0 };
                    for k in 0..t {
                        acc += b[k * t + r] * b[k * t + c];
                    }
                    shape[r * t + c] = acc;
                }
            }
            let el = EllipsoidalSet::new(center, shape).unwrap();
            let alpha: Vec<f64> = (0..t).map(|_| rng.gen_range(0.3..1.5)).collect();
            let beta: Vec<f64> = alpha.iter().map(|a| a * 0.5).collect();
            let pr = prices(&alpha, &beta);
            let p: Vec<f64> = (0..t).map(|_| rng.gen_range(0.0..5.0)).collect();
            let set = UncertaintySet::Ellipsoidal(el.clone());
            let wc = worst_case_energy(&set, &p, &pr).unwrap();
            assert!(
                el.contains(&wc.e_star, 1e-9),
                "maximizer must stay in the ellipsoid"
            );
            // Maximizer value dominates random feasible points.
            for _ in 0..50 {
                let dir: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let nrm = (dir.iter().map(|x| x * x).sum::<f64>()).sqrt().max(1e-9);
                let radius: f64 = rng.gen_range(0.0..1.0);
                // Map unit ball direction through the shape Cholesky.
                let mut v = vec![0.0; t];
                for r in 0..t {
                    for k in 0..=r {
                        v[r] += el.chol[r * t + k] * dir[k] / nrm * radius;
                    }
                }
                let e: Vec<f64> = (0..t).map(|i| el.center[i] + v[i]).collect();
                if el.contains(&e, 0.0) {
                    let val = super::cost_at(&p, &e, &pr);
                    assert!(val <= wc.value + 1e-9);
                }
            }
        }
    }

    #[test]
    fn monotone_in_upper_bounds_when_selling() {
        // With p <= lower everywhere, raising an upper bound cannot worsen
        // (increase) the worst-case value.
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..100 {
            let t = rng.gen_range(1..=4usize);
            let lower: Vec<f64> = (0..t).map(|_| rng.gen_range(2.0..3.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.1..2.0)).collect();
            let p: Vec<f64> = lower.iter().map(|l| l - rng.gen_range(0.0..2.0)).collect();
            let alpha: Vec<f64> = (0..t).map(|_| rng.gen_range(0.5..1.5)).collect();
            let beta: Vec<f64> = alpha.iter().map(|a| a * 0.6).collect();
            let pr = prices(&alpha, &beta);
            let set1 = UncertaintySet::Polyhedral(
                PolyhedralSet::from_box(lower.clone(), upper.clone()).unwrap(),
            );
            let v1 = worst_case_energy(&set1, &p, &pr).unwrap().value;
            let j = rng.gen_range(0..t);
            let mut upper2 = upper.clone();
            upper2[j] += rng.gen_range(0.1..1.0);
            let set2 =
                UncertaintySet::Polyhedral(PolyhedralSet::from_box(lower, upper2).unwrap());
            let v2 = worst_case_energy(&set2, &p, &pr).unwrap().value;
            assert!(v2 <= v1 + 1e-9, "more sellable energy worsened the bound");
        }
    }

    #[test]
    fn sampling_respects_box_and_kappa() {
        let poly = PolyhedralSet::from_box(vec![1.0, 2.0], vec![3.0, 6.0]).unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        let s0 = sample_realization(&poly, 0.0, &mut rng);
        assert_eq!(s0, vec![1.0, 2.0]);
        for _ in 0..10_000 {
            let s = sample_realization(&poly, 0.5, &mut rng);
            for i in 0..2 {
                assert!(s[i] >= poly.lower[i]);
                assert!(s[i] <= poly.lower[i] + 0.5 * (poly.upper[i] - poly.lower[i]));
            }
        }
    }

    #[test]
    fn empty_configurations_rejected() {
        // Box infeasible
        assert!(PolyhedralSet::from_box(vec![2.0], vec![1.0]).is_err());
        // sum_max below the sum of lower bounds
        let r = PolyhedralSet::new(
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![SubHorizon {
                slots: vec![0, 1],
                sum_min: None,
                sum_max: Some(1.5),
            }],
        );
        assert!(matches!(r, Err(UncertaintyError::Empty(_))));
        // partition failure
        let r = PolyhedralSet::new(
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![SubHorizon {
                slots: vec![0],
                sum_min: None,
                sum_max: None,
            }],
        );
        assert!(matches!(r, Err(UncertaintyError::BadPartition(_))));
    }
}
