//! Power allocation minimizing the weighted-sum BER of the retained
//! features under a total power budget.
//!
//! Each BER term is convex and strictly decreasing in power, so the optimum
//! spends the whole budget and equalizes the marginal distortion
//!
//! ```text
//! t_j(p) = w_j sqrt(d_j g_j / (pi p)) [a_j exp(-d_j g_j p) + b_j c exp(-c^2 d_j g_j p)] = lambda
//! ```
//!
//! across features. Since `t_j` decreases from infinity to zero, every
//! feature receives positive power. For a given `lambda` each `t_j` is
//! inverted with a bracketed Newton iteration on `ln t_j(exp(u))`, and
//! `lambda` is found by bisection on `ln lambda` against the budget.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ber::{BerCoefficients, ModOrder};
use crate::error::{domain, Error, Result};
use crate::modulation::ModVector;

/// Newton stops once `|ln t(p) - ln lambda|` falls below this.
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 64;
/// Relative budget residual at which the dual bisection stops.
pub const BUDGET_RTOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;

/// Per-feature transmit powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerVector(pub Vec<f64>);

impl PowerVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Non-negativity and `sum <= n * p_max + 1e-9`.
    pub fn within_budget(&self, n: usize, p_max: f64) -> bool {
        self.0.iter().all(|&p| p >= 0.0) && self.total() <= n as f64 * p_max + 1e-9
    }
}

/// One retained feature in the power problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureTerm {
    pub weight: f64,
    pub coeffs: BerCoefficients,
    pub gamma: f64,
}

/// Result of inverting one marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub power: f64,
    pub iterations: usize,
}

impl FeatureTerm {
    pub fn new(weight: f64, order: ModOrder, gamma: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(domain(format!("feature weight must be > 0, got {weight}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(domain(format!("normalized SNR must be > 0, got {gamma}")));
        }
        Ok(Self {
            weight,
            coeffs: order.coefficients(),
            gamma,
        })
    }

    /// Weighted BER of this feature at power `p`.
    pub fn distortion(&self, p: f64) -> f64 {
        self.weight * self.coeffs.ber_at_snr(p * self.gamma)
    }

    /// Marginal distortion reduction `t(p) = -w dmu/dp`.
    pub fn marginal(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(domain(format!("marginal is undefined at p = {p}; need p > 0")));
        }
        Ok(-self.weight * self.coeffs.dber_dp(p, self.gamma))
    }

    /// `ln t(e^u)` and its derivative in `u`.
    fn ln_marginal(&self, u: f64) -> (f64, f64) {
        let BerCoefficients { a, b, c, d } = self.coeffs;
        let dg = d * self.gamma;
        let s = dg * u.exp();
        let (ln_bracket, slope) = if b == 0.0 {
            (a.ln() - s, -0.5 - s)
        } else {
            let e = (-(c * c - 1.0) * s).exp();
            let lo = a + b * c * e;
            let hi = a + b * c * c * c * e;
            (lo.ln() - s, -0.5 - s * hi / lo)
        };
        let value = self.weight.ln() + 0.5 * (dg / PI).ln() - 0.5 * u + ln_bracket;
        (value, slope)
    }

    /// Power at which `t(p) = lambda`.
    pub fn invert(&self, lambda: f64) -> Result<Inversion> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(domain(format!("multiplier must be finite and > 0, got {lambda}")));
        }
        let (u, iterations) = self.solve_ln(lambda.ln(), 0.0)?;
        Ok(Inversion {
            power: u.exp(),
            iterations,
        })
    }

    /// Solves `ln t(e^u) = ln_lambda` starting from `u0`; returns `(u, iterations)`.
    ///
    /// The slope in `u` is at most -1/2, so from any `u0` the root lies
    /// within `2 |g(u0)|` in the direction of descent; that interval seeds
    /// the bisection safeguard.
    fn solve_ln(&self, ln_lambda: f64, u0: f64) -> Result<(f64, usize)> {
        let g = |u: f64| {
            let (v, s) = self.ln_marginal(u);
            (v - ln_lambda, s)
        };
        // ln t carries rounding noise proportional to its magnitude
        let tol = NEWTON_TOL.max(16.0 * f64::EPSILON * ln_lambda.abs());
        let mut u = u0;
        let (mut gu, mut slope) = g(u);
        if gu.abs() <= tol {
            return Ok((u, 0));
        }
        let (mut lo, mut hi) = if gu > 0.0 {
            // g(u0 + x) <= g(u0) - x/2 - s0 (e^x - 1) for x > 0
            let s0 = self.coeffs.d * self.gamma * u.exp();
            (u, u + (2.0 * gu).min((gu / s0).ln_1p()))
        } else {
            (u + 2.0 * gu, u)
        };
        let mut step_old = hi - lo;
        for it in 1..=NEWTON_MAX_ITER {
            let newton = u - gu / slope;
            let slow = (2.0 * gu).abs() > (step_old * slope).abs();
            let next = if newton > lo && newton < hi && !slow {
                newton
            } else {
                0.5 * (lo + hi)
            };
            step_old = (next - u).abs();
            u = next;
            (gu, slope) = g(u);
            if gu.abs() <= tol || step_old <= 4.0 * f64::EPSILON * u.abs().max(1.0) {
                return Ok((u, it));
            }
            if gu > 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            if hi - lo <= 4.0 * f64::EPSILON * u.abs().max(1.0) {
                return Ok((u, it));
            }
        }
        Err(Error::Numerical {
            method: "newton",
            iterations: NEWTON_MAX_ITER,
            detail: format!(
                "t(p) = lambda not solved: ln lambda = {ln_lambda:e}, last ln p = {u:e}, \
                 residual = {gu:e}, bracket = [{lo:e}, {hi:e}], weight = {}, gamma = {}",
                self.weight, self.gamma
            ),
        })
    }
}

/// Converged power allocation together with its dual certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSolution {
    pub powers: PowerVector,
    /// Lagrange multiplier of the budget constraint.
    pub lambda: f64,
    pub ln_lambda: f64,
    /// `|sum p - budget| / budget`.
    pub budget_residual: f64,
    /// `max_j |t_j(p_j) - lambda| / lambda`.
    pub marginal_residual: f64,
    pub newton_iterations: usize,
    pub bisection_iterations: usize,
}

/// Builds the power problem for the first `orders.len()` ranked features.
pub fn feature_terms(weights: &[f64], orders: &ModVector, gammas: &[f64]) -> Result<Vec<FeatureTerm>> {
    let k = orders.len();
    if weights.len() < k || gammas.len() < k {
        return Err(Error::DimensionMismatch {
            what: "retained features for power allocation",
            expected: k,
            got: weights.len().min(gammas.len()),
        });
    }
    orders
        .orders()
        .iter()
        .zip(weights)
        .zip(gammas)
        .map(|((&m, &w), &g)| FeatureTerm::new(w, m, g))
        .collect()
}

/// Optimal powers of `k` ranked features under the total budget `n * p_max`.
pub fn allocate(
    weights: &[f64],
    orders: &ModVector,
    gammas: &[f64],
    p_max: f64,
    n: usize,
) -> Result<PowerSolution> {
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(domain(format!("power budget must be > 0, got {p_max}")));
    }
    if orders.is_empty() {
        return Err(domain("power allocation needs at least one feature"));
    }
    let terms = feature_terms(weights, orders, gammas)?;
    allocate_terms(&terms, n as f64 * p_max)
}

/// Optimal powers for arbitrary terms under `sum p = budget`.
pub fn allocate_terms(terms: &[FeatureTerm], budget: f64) -> Result<PowerSolution> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(domain(format!("total power must be > 0, got {budget}")));
    }
    if terms.is_empty() {
        return Err(domain("power allocation needs at least one feature"));
    }
    let k = terms.len();
    let ln_budget = budget.ln();
    let mut newton_iterations = 0;

    if k == 1 {
        let (ln_t, _) = terms[0].ln_marginal(ln_budget);
        return Ok(PowerSolution {
            powers: PowerVector(vec![budget]),
            lambda: ln_t.exp(),
            ln_lambda: ln_t,
            budget_residual: 0.0,
            marginal_residual: 0.0,
            newton_iterations,
            bisection_iterations: 0,
        });
    }

    let mut ln_p = vec![ln_budget - (k as f64).ln(); k];
    let total_at = |ln_lambda: f64, ln_p: &mut [f64], newton: &mut usize| -> Result<f64> {
        let mut total = 0.0;
        for (term, u) in terms.iter().zip(ln_p.iter_mut()) {
            let (root, it) = term.solve_ln(ln_lambda, *u)?;
            *u = root;
            *newton += it;
            total += root.exp();
        }
        Ok(total)
    };

    // single-feature marginals at the full budget and at a tiny share bound lambda*
    let ln_t_at = |p_ln: f64| terms.iter().map(move |t| t.ln_marginal(p_ln).0);
    let mut lo = ln_t_at(ln_budget).fold(f64::INFINITY, f64::min);
    let mut hi = ln_t_at(ln_budget - (1e6 * k as f64).ln()).fold(f64::NEG_INFINITY, f64::max);

    let mut widen = 0;
    while total_at(lo, &mut ln_p, &mut newton_iterations)? < budget {
        lo -= std::f64::consts::LN_10 * (1 << widen) as f64;
        widen += 1;
        if widen > 10 {
            return Err(bracket_error(lo, hi, budget));
        }
    }
    widen = 0;
    while total_at(hi, &mut ln_p, &mut newton_iterations)? > budget {
        hi += std::f64::consts::LN_10 * (1 << widen) as f64;
        widen += 1;
        if widen > 10 {
            return Err(bracket_error(lo, hi, budget));
        }
    }

    let mut mid = 0.5 * (lo + hi);
    let mut total = f64::NAN;
    let mut bisection_iterations = 0;
    let mut converged = false;
    while bisection_iterations < BISECTION_MAX_ITER {
        bisection_iterations += 1;
        mid = 0.5 * (lo + hi);
        total = total_at(mid, &mut ln_p, &mut newton_iterations)?;
        if (total - budget).abs() <= BUDGET_RTOL * budget {
            converged = true;
            break;
        }
        if total > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
            converged = (total - budget).abs() <= 1e-7 * budget;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical {
            method: "dual bisection",
            iterations: bisection_iterations,
            detail: format!(
                "budget residual {:e} at ln lambda = {mid:e} (bracket [{lo:e}, {hi:e}])",
                (total - budget) / budget
            ),
        });
    }

    // project onto the budget face; the marginals move by O(BUDGET_RTOL)
    let scale = budget / total;
    let powers: Vec<f64> = ln_p.iter().map(|u| u.exp() * scale).collect();
    let marginal_residual = terms
        .iter()
        .zip(&powers)
        .map(|(t, &p)| (t.ln_marginal(p.ln()).0 - mid).exp_m1().abs())
        .fold(0.0, f64::max);
    let sum: f64 = powers.iter().sum();
    Ok(PowerSolution {
        powers: PowerVector(powers),
        lambda: mid.exp(),
        ln_lambda: mid,
        budget_residual: (sum - budget).abs() / budget,
        marginal_residual,
        newton_iterations,
        bisection_iterations,
    })
}

fn bracket_error(lo: f64, hi: f64, budget: f64) -> Error {
    Error::Numerical {
        method: "dual bisection",
        iterations: 0,
        detail: format!("could not bracket budget {budget} with ln lambda in [{lo:e}, {hi:e}]"),
    }
}

/// Classical waterfilling: `p_j = max(0, 1/nu - 1/gamma_j)` with
/// `sum p = budget`.
pub fn waterfill(gammas: &[f64], budget: f64) -> Result<PowerVector> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(domain(format!("total power must be > 0, got {budget}")));
    }
    if gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) || gammas.is_empty() {
        return Err(domain("waterfilling needs finite, positive SNRs"));
    }
    let mut idx: Vec<usize> = (0..gammas.len()).collect();
    idx.sort_by(|&i, &j| gammas[j].total_cmp(&gammas[i]).then(i.cmp(&j)));
    let mut inv_sum = 0.0;
    let mut level = 0.0;
    for (active, &j) in idx.iter().enumerate() {
        let inv = 1.0 / gammas[j];
        let candidate = (budget + inv_sum + inv) / (active + 1) as f64;
        if candidate <= inv {
            break;
        }
        inv_sum += inv;
        level = candidate;
    }
    Ok(PowerVector(
        gammas.iter().map(|g| (level - 1.0 / g).max(0.0)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ber::ber_power_derivative;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn term(w: f64, bits: u32, g: f64) -> FeatureTerm {
        FeatureTerm::new(w, ModOrder::from_bits(bits).unwrap(), g).unwrap()
    }

    #[test]
    fn marginal_is_negative_weighted_derivative() {
        for bits in [2, 4, 6] {
            for &(w, g, p) in &[(0.3, 2.0, 0.1), (0.01, 50.0, 3.0), (0.9, 0.05, 20.0)] {
                let t = term(w, bits, g).marginal(p).unwrap();
                let d = ber_power_derivative(ModOrder::from_bits(bits).unwrap(), p, g).unwrap();
                assert!(((t + w * d) / t).abs() <= 1e-10);
                let (ln_t, _) = term(w, bits, g).ln_marginal(p.ln());
                assert!((ln_t.exp() / t - 1.0).abs() <= 1e-12);
            }
        }
        assert!(term(0.5, 2, 1.0).marginal(0.0).is_err());
        assert!(term(0.5, 2, 1.0).marginal(-1.0).is_err());
    }

    #[test]
    fn marginal_decreases() {
        for bits in [2, 4, 6] {
            let t = term(0.4, bits, 3.0);
            let mut p: f64 = 1e-4;
            while p < 1e3 {
                assert!(t.ln_marginal(p.ln()).0 > t.ln_marginal((2.0 * p).ln()).0);
                if p < 10.0 {
                    assert!(t.marginal(p).unwrap() > t.marginal(2.0 * p).unwrap());
                }
                p *= 1.7;
            }
        }
    }

    #[test]
    fn marginal_slope_matches_finite_difference() {
        for bits in [2, 4, 6] {
            let t = term(0.25, bits, 4.0);
            for u in [-6.0, -1.0, 0.0, 1.5, 3.0] {
                let h = 1e-6;
                let fd = (t.ln_marginal(u + h).0 - t.ln_marginal(u - h).0) / (2.0 * h);
                let (_, s) = t.ln_marginal(u);
                assert!((fd - s).abs() <= 1e-6 * s.abs(), "bits={bits} u={u}: {fd} vs {s}");
            }
        }
    }

    #[test]
    fn invert_round_trip_and_monotone() {
        for bits in [2, 4, 6] {
            let t = term(0.2, bits, 1.5);
            let mut prev = f64::INFINITY;
            for e in -12..=6 {
                let lambda = 10f64.powi(e);
                let inv = t.invert(lambda).unwrap();
                let back = t.marginal(inv.power).unwrap();
                assert!((back / lambda - 1.0).abs() <= 1e-5, "bits={bits} lambda={lambda}");
                assert!(inv.power < prev);
                prev = inv.power;
            }
        }
        assert!(term(0.2, 2, 1.0).invert(0.0).is_err());
        let a = term(0.3, 4, 2.0).invert(0.05).unwrap();
        let b = term(0.3, 4, 2.0).invert(0.05).unwrap();
        assert_eq!(a.power, b.power);
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let terms = [term(0.5, 4, 3.0), term(0.5, 4, 3.0)];
        let sol = allocate_terms(&terms, 8.0).unwrap();
        assert!((sol.powers.0[0] - 4.0).abs() < 1e-9);
        assert!((sol.powers.0[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn single_feature_takes_budget() {
        let sol = allocate(&[1.0], &ModVector::uniform(ModOrder::Qam16, 1), &[0.7], 2.0, 8).unwrap();
        assert_eq!(sol.powers.0, vec![16.0]);
    }

    #[test]
    fn allocate_rejects_bad_budget() {
        let v = ModVector::uniform(ModOrder::Qam4, 2);
        assert!(allocate(&[0.5, 0.5], &v, &[1.0, 1.0], 0.0, 2).is_err());
        assert!(allocate(&[0.5, 0.5], &v, &[1.0, 1.0], -1.0, 2).is_err());
        assert!(allocate(&[0.5], &v, &[1.0, 1.0], 1.0, 2).is_err());
    }

    fn random_terms(rng: &mut ChaCha8Rng, k: usize) -> Vec<FeatureTerm> {
        let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        let mut g: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-1.5..1.5))).collect();
        g.sort_by(|a, b| b.total_cmp(a));
        let mut bits: Vec<u32> = (0..k).map(|_| [2, 4, 6][rng.random_range(0..3)]).collect();
        bits.sort();
        (0..k).map(|j| term(w[j], bits[j], g[j])).collect()
    }

    #[test]
    fn kkt_certificate_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let k = rng.random_range(1..=12);
            let terms = random_terms(&mut rng, k);
            let budget = rng.random_range(0.4..4.0) * k as f64;
            let sol = allocate_terms(&terms, budget).unwrap();
            assert!(sol.budget_residual <= 1e-5);
            assert!(sol.marginal_residual <= 1e-4, "{}", sol.marginal_residual);
            assert!(sol.powers.0.iter().all(|&p| p > 0.0));
            assert!(sol.powers.total() <= budget + 1e-9);
        }
    }

    #[test]
    fn extreme_snr_instances_converge() {
        for g in [1e-4, 1e-2, 1e3, 1e6, 1e8] {
            let terms = [term(0.6, 2, g), term(0.3, 4, g * 0.5), term(0.1, 6, g * 0.2)];
            let sol = allocate_terms(&terms, 3.0).unwrap();
            assert!(sol.budget_residual <= 1e-5, "g={g}");
        }
    }

    #[test]
    fn projected_gradient_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let k = rng.random_range(2..=6);
            let terms = random_terms(&mut rng, k);
            let budget = rng.random_range(1.0..10.0);
            let sol = allocate_terms(&terms, budget).unwrap();
            // finite-difference gradient of the objective
            let grad: Vec<f64> = terms
                .iter()
                .zip(&sol.powers.0)
                .map(|(t, &p)| {
                    let h = 1e-6 * p;
                    (t.distortion(p + h) - t.distortion(p - h)) / (2.0 * h)
                })
                .collect();
            let mean = grad.iter().sum::<f64>() / k as f64;
            let proj: f64 = grad.iter().map(|g| (g - mean).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            assert!(proj <= 1e-4 * norm, "{proj} vs {norm}");
        }
    }

    #[test]
    fn more_weight_never_means_less_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let k = rng.random_range(2..=6);
            let mut terms = random_terms(&mut rng, k);
            let j = rng.random_range(0..k);
            let before = allocate_terms(&terms, 5.0).unwrap().powers.0[j];
            terms[j].weight *= 1.5;
            let total: f64 = terms.iter().map(|t| t.weight).sum();
            for t in &mut terms {
                t.weight /= total;
            }
            let after = allocate_terms(&terms, 5.0).unwrap().powers.0[j];
            assert!(after >= before * (1.0 - 1e-9), "{after} < {before}");
        }
    }

    #[test]
    fn waterfill_two_channels() {
        let p = waterfill(&[4.0, 1.0], 2.0).unwrap();
        assert!((p.0[0] - 1.375).abs() < 1e-12);
        assert!((p.0[1] - 0.625).abs() < 1e-12);
        // a weak channel is switched off
        let p = waterfill(&[10.0, 0.01], 1.0).unwrap();
        assert_eq!(p.0[1], 0.0);
        assert!((p.0[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn waterfill_uses_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let k = rng.random_range(1..10);
            let g: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
            let budget = rng.random_range(0.1..20.0);
            let p = waterfill(&g, budget).unwrap();
            assert!((p.total() - budget).abs() <= 1e-9 * budget);
            assert!(p.0.iter().all(|&v| v >= 0.0));
        }
    }
}
