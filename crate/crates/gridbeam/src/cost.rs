//! Worst-case transaction cost, its half-price rewrite, and the partial
//! subgradient used by the bundle method.

use crate::model::PriceCurve;
use crate::uncertainty::{self, UncertaintyError, UncertaintySet};

/// Worst-case cost evaluation: value, maximizing energy vector, and (when
/// requested) the subgradient of G~ = G - lambda'p.
#[derive(Debug, Clone)]
pub struct CostEval {
    pub value: f64,
    pub e_star: Vec<f64>,
    pub subgrad: Vec<f64>,
}

/// Deterministic transaction cost at a fixed energy vector:
/// sum_t alpha[p-e]^+ - beta[p-e]^-.
pub fn transaction_cost(p: &[f64], e: &[f64], prices: &PriceCurve) -> f64 {
    debug_assert_eq!(p.len(), e.len());
    p.iter()
        .zip(e.iter())
        .enumerate()
        .map(|(t, (&pt, &et))| {
            let d = pt - et;
            if d >= 0.0 {
                prices.alpha[t] * d
            } else {
                prices.beta[t] * d
            }
        })
        .sum()
}

/// Equivalent half-price form sum_t psi|p-e| + phi(p-e); used as an
/// algebraic cross-check of `transaction_cost`.
pub fn transaction_cost_half_price(p: &[f64], e: &[f64], prices: &PriceCurve) -> f64 {
    p.iter()
        .zip(e.iter())
        .enumerate()
        .map(|(t, (&pt, &et))| {
            let d = pt - et;
            prices.psi[t] * d.abs() + prices.phi[t] * d
        })
        .sum()
}

/// Worst-case cost G(p) = max over the set of the transaction cost.
pub fn worst_cost(
    p: &[f64],
    set: &UncertaintySet,
    prices: &PriceCurve,
) -> Result<CostEval, UncertaintyError> {
    let wc = uncertainty::worst_case_energy(set, p, prices)?;
    Ok(CostEval {
        value: wc.value,
        e_star: wc.e_star,
        subgrad: Vec::new(),
    })
}

/// Value and partial subgradient of G~(p) = G(p) - lambda'p. Entry t of the
/// subgradient is alpha^t - lambda^t on the buy side (p >= e*, including the
/// kink) and beta^t - lambda^t otherwise.
pub fn tilde_g_subgradient(
    p: &[f64],
    lambda: &[f64],
    set: &UncertaintySet,
    prices: &PriceCurve,
) -> Result<CostEval, UncertaintyError> {
    debug_assert_eq!(p.len(), lambda.len());
    let wc = uncertainty::worst_case_energy(set, p, prices)?;
    let lin: f64 = lambda.iter().zip(p.iter()).map(|(l, x)| l * x).sum();
    let subgrad = (0..p.len())
        .map(|t| {
            if p[t] >= wc.e_star[t] {
                prices.alpha[t] - lambda[t]
            } else {
                prices.beta[t] - lambda[t]
            }
        })
        .collect();
    Ok(CostEval {
        value: wc.value - lin,
        e_star: wc.e_star,
        subgrad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::PolyhedralSet;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn prices(alpha: &[f64], beta: &[f64]) -> PriceCurve {
        PriceCurve::new(alpha.to_vec(), beta.to_vec()).unwrap()
    }

    #[test]
    fn balanced_is_free() {
        let pr = prices(&[0.5, 1.0], &[0.2, 0.4]);
        let p = [1.0, 2.0];
        assert_eq!(transaction_cost(&p, &p, &pr), 0.0);
    }

    #[test]
    fn buy_and_sell_branches() {
        // Slot-1 purchase price from the reference price table.
        let pr = prices(&[0.402], &[0.201]);
        assert!((transaction_cost(&[3.0], &[1.0], &pr) - 0.804).abs() < 1e-12);
        assert!((transaction_cost(&[0.0], &[1.0], &pr) + 0.201).abs() < 1e-12);
    }

    #[test]
    fn two_forms_agree() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..500 {
            let t = rng.gen_range(1..6);
            let alpha: Vec<f64> = (0..t).map(|_| rng.gen_range(0.2..2.0)).collect();
            let beta: Vec<f64> = alpha.iter().map(|a| a * rng.gen_range(0.0..0.99)).collect();
            let pr = prices(&alpha, &beta);
            let p: Vec<f64> = (0..t).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let e: Vec<f64> = (0..t).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let a = transaction_cost(&p, &e, &pr);
            let b = transaction_cost_half_price(&p, &e, &pr);
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn worst_cost_dominates_samples_and_is_homogeneous() {
        let mut rng = StdRng::seed_from_u64(11);
        let poly = PolyhedralSet::from_box(vec![1.0, 0.5, 2.0], vec![4.0, 3.0, 5.0]).unwrap();
        let set = UncertaintySet::Polyhedral(poly.clone());
        let pr = prices(&[1.0, 0.8, 1.2], &[0.5, 0.3, 0.6]);
        let p = [2.0, 4.0, 1.0];
        let wc = worst_cost(&p, &set, &pr).unwrap();
        for _ in 0..1000 {
            let e: Vec<f64> = (0..3)
                .map(|i| rng.gen_range(poly.lower[i]..=poly.upper[i]))
                .collect();
            assert!(transaction_cost(&p, &e, &pr) <= wc.value + 1e-9);
        }
        // Scaling both prices by c > 0 scales the value by c.
        let c = 3.7;
        let pr2 = prices(
            &pr.alpha.iter().map(|a| a * c).collect::<Vec<_>>(),
            &pr.beta.iter().map(|b| b * c).collect::<Vec<_>>(),
        );
        let wc2 = worst_cost(&p, &set, &pr2).unwrap();
        assert!((wc2.value - c * wc.value).abs() < 1e-9 * (1.0 + wc.value.abs()));
        // Singleton set reduces to the deterministic cost.
        let sing = UncertaintySet::Singleton(vec![2.0, 2.0, 2.0]);
        let wcs = worst_cost(&p, &sing, &pr).unwrap();
        assert!(
            (wcs.value - transaction_cost(&p, &[2.0, 2.0, 2.0], &pr)).abs() < 1e-12
        );
        // Shared oracle example: T=1 box [1,3], p=2, alpha=1, beta=0.5.
        let b1 = UncertaintySet::Polyhedral(
            PolyhedralSet::from_box(vec![1.0], vec![3.0]).unwrap(),
        );
        let pr1 = prices(&[1.0], &[0.5]);
        assert!((worst_cost(&[2.0], &b1, &pr1).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subgradient_cases() {
        let pr = prices(&[0.402, 0.402], &[0.201, 0.201]);
        let set = UncertaintySet::Singleton(vec![1.0, 1.0]);
        // p above e*: buy side, zero multiplier -> subgrad = alpha.
        let g = tilde_g_subgradient(&[2.0, 3.0], &[0.0, 0.0], &set, &pr).unwrap();
        assert_eq!(g.subgrad, pr.alpha);
        // lambda = 0.1 on the buy side -> 0.302.
        let g = tilde_g_subgradient(&[2.0, 3.0], &[0.1, 0.1], &set, &pr).unwrap();
        for v in &g.subgrad {
            assert!((v - 0.302).abs() < 1e-12);
        }
    }

    #[test]
    fn subgradient_matches_central_differences() {
        let mut rng = StdRng::seed_from_u64(17);
        let poly = PolyhedralSet::from_box(vec![0.5, 1.0], vec![2.0, 4.0]).unwrap();
        let set = UncertaintySet::Polyhedral(poly);
        let pr = prices(&[1.0, 0.9], &[0.4, 0.5]);
        let lambda = [0.2, -0.1];
        let mut checked = 0;
        while checked < 40 {
            let p: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..5.0)).collect();
            let g = tilde_g_subgradient(&p, &lambda, &set, &pr).unwrap();
            // Only check away from kinks p_t = e*_t.
            if p.iter().zip(g.e_star.iter()).any(|(a, b)| (a - b).abs() < 1e-3) {
                continue;
            }
            checked += 1;
            let delta = 1e-6;
            for t in 0..2 {
                let mut pp = p.clone();
                pp[t] += delta;
                let up = tilde_g_subgradient(&pp, &lambda, &set, &pr).unwrap().value;
                pp[t] -= 2.0 * delta;
                let dn = tilde_g_subgradient(&pp, &lambda, &set, &pr).unwrap().value;
                let fd = (up - dn) / (2.0 * delta);
                assert!(
                    (fd - g.subgrad[t]).abs() < 1e-6,
                    "fd {fd} vs subgrad {}",
                    g.subgrad[t]
                );
            }
        }
    }

    #[test]
    fn subgradient_inequality_holds() {
        // G~(q) >= G~(p) + g'(q - p) for random pairs.
        let mut rng = StdRng::seed_from_u64(29);
        let poly = PolyhedralSet::from_box(vec![0.0, 0.0, 1.0], vec![2.0, 3.0, 4.0]).unwrap();
        let set = UncertaintySet::Polyhedral(poly);
        let pr = prices(&[1.1, 0.9, 1.3], &[0.5, 0.2, 0.9]);
        let lambda = [0.3, 0.0, -0.2];
        for _ in 0..300 {
            let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..6.0)).collect();
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..6.0)).collect();
            let gp = tilde_g_subgradient(&p, &lambda, &set, &pr).unwrap();
            let gq = tilde_g_subgradient(&q, &lambda, &set, &pr).unwrap();
            let lin: f64 = gp
                .subgrad
                .iter()
                .zip(q.iter().zip(p.iter()))
                .map(|(g, (qq, pp))| g * (qq - pp))
                .sum();
            assert!(
                gq.value >= gp.value + lin - 1e-9,
                "subgradient inequality violated: {} < {} + {}",
                gq.value,
                gp.value,
                lin
            );
        }
    }

    #[test]
    fn midpoint_convexity_of_worst_cost() {
        let mut rng = StdRng::seed_from_u64(31);
        let poly = PolyhedralSet::from_box(vec![0.0, 0.5], vec![3.0, 2.5]).unwrap();
        let set = UncertaintySet::Polyhedral(poly);
        let pr = prices(&[1.0, 1.2], &[0.3, 0.4]);
        for _ in 0..200 {
            let p: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..5.0)).collect();
            let q: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..5.0)).collect();
            let mid: Vec<f64> = p.iter().zip(q.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
            let vp = worst_cost(&p, &set, &pr).unwrap().value;
            let vq = worst_cost(&q, &set, &pr).unwrap().value;
            let vm = worst_cost(&mid, &set, &pr).unwrap().value;
            assert!(vm <= 0.5 * (vp + vq) + 1e-9);
        }
    }
}
