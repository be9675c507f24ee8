//! Candidate modulation vectors for a fixed truncation index.
//!
//! With features in descending importance, the search keeps only
//! non-decreasing order vectors whose bit sum is the smallest achievable
//! value meeting the average-rate requirement. A non-decreasing vector over
//! {2, 4, 6} is determined by its counts `(n2, n4, n6)`, and fixing both
//! `k` and the sum leaves one free count, so at most `k + 1` candidates
//! remain.

use serde::{Deserialize, Serialize};

use crate::ber::ModOrder;
use crate::error::{Error, Result};

/// Slack applied when comparing a bit sum against the rate requirement.
const RATE_EPS: f64 = 1e-9;

/// Modulation orders of the retained features, in rank order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModVector {
    orders: Vec<ModOrder>,
}

impl ModVector {
    pub fn new(orders: Vec<ModOrder>) -> Self {
        Self { orders }
    }

    /// Expands counts to `[2; n2] ++ [4; n4] ++ [6; n6]`.
    pub fn from_counts(n2: usize, n4: usize, n6: usize) -> Self {
        let mut orders = Vec::with_capacity(n2 + n4 + n6);
        orders.extend(std::iter::repeat_n(ModOrder::Qam4, n2));
        orders.extend(std::iter::repeat_n(ModOrder::Qam16, n4));
        orders.extend(std::iter::repeat_n(ModOrder::Qam64, n6));
        Self { orders }
    }

    pub fn uniform(order: ModOrder, k: usize) -> Self {
        Self {
            orders: vec![order; k],
        }
    }

    pub fn orders(&self) -> &[ModOrder] {
        &self.orders
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn bit_sum(&self) -> u32 {
        self.orders.iter().map(|m| m.bits_per_symbol()).sum()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let count = |o| self.orders.iter().filter(|&&m| m == o).count();
        (
            count(ModOrder::Qam4),
            count(ModOrder::Qam16),
            count(ModOrder::Qam64),
        )
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.orders.windows(2).all(|p| p[0] <= p[1])
    }

    /// Average-rate constraint: `mean(orders) >= m_min * k / n`.
    pub fn meets_rate(&self, n: usize, m_min: f64) -> bool {
        f64::from(self.bit_sum()) >= rate_requirement(self.len(), n, m_min) - RATE_EPS
    }
}

/// Minimum total bits per symbol slot for `k` of `n` features,
/// `k * (m_min * k / n)`.
pub fn rate_requirement(k: usize, n: usize, m_min: f64) -> f64 {
    let k = k as f64;
    m_min * k * k / n as f64
}

/// Smallest achievable bit sum (even, in `[2k, 6k]`) meeting the rate
/// requirement.
pub fn minimal_bit_sum(k: usize, n: usize, m_min: f64) -> Result<u32> {
    check_k(k, n)?;
    let required = rate_requirement(k, n, m_min);
    let half = ((required - RATE_EPS) / 2.0).ceil().max(k as f64);
    let sum = 2.0 * half;
    if sum > 6.0 * k as f64 {
        return Err(Error::Infeasible {
            constraint: "C3 (average rate)",
            detail: format!(
                "k = {k} features need {required:.3} bits per slot but 6k = {} is the maximum",
                6 * k
            ),
        });
    }
    Ok(sum as u32)
}

/// Pruned candidate set, ordered lexicographically by orders vector.
pub fn candidate_set(k: usize, n: usize, m_min: f64) -> Result<Vec<ModVector>> {
    let sum = minimal_bit_sum(k, n, m_min)? as usize;
    // n4 + 2 n6 = sum/2 - k = excess; n6 = t; n2 = k - excess + t >= 0
    let excess = sum / 2 - k;
    let t_max = excess / 2;
    let t_min = excess.saturating_sub(k);
    // more 2s first <=> larger t first
    Ok((t_min..=t_max)
        .rev()
        .map(|t| ModVector::from_counts(k + t - excess, excess - 2 * t, t))
        .collect())
}

/// Upper bound on the candidate set size for three modulation orders.
pub fn candidate_count_bound(k: usize) -> usize {
    k + 1
}

/// Every non-decreasing vector of length `k` meeting the rate requirement,
/// without the minimal-sum restriction. Lexicographic order.
pub fn monotone_feasible(k: usize, n: usize, m_min: f64) -> Result<Vec<ModVector>> {
    check_k(k, n)?;
    let mut out = Vec::new();
    for n2 in (0..=k).rev() {
        for n4 in (0..=k - n2).rev() {
            let v = ModVector::from_counts(n2, n4, k - n2 - n4);
            if v.meets_rate(n, m_min) {
                out.push(v);
            }
        }
    }
    if out.is_empty() {
        minimal_bit_sum(k, n, m_min)?;
    }
    Ok(out)
}

/// All `3^k` vectors meeting the rate requirement, ordering unrestricted.
/// Lexicographic order.
pub fn unrestricted_feasible(k: usize, n: usize, m_min: f64) -> Result<Vec<ModVector>> {
    check_k(k, n)?;
    minimal_bit_sum(k, n, m_min)?;
    let total = 3usize.pow(k as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut orders = vec![ModOrder::Qam4; k];
        for slot in orders.iter_mut().rev() {
            *slot = ModOrder::ALL[c % 3];
            c /= 3;
        }
        let v = ModVector::new(orders);
        if v.meets_rate(n, m_min) {
            out.push(v);
        }
    }
    Ok(out)
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Infeasible {
            constraint: "C8 (truncation index)",
            detail: format!("k must be in 1..={n}, got {k}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force: all 3^k vectors, keep non-decreasing and rate-feasible,
    /// then the ones with the smallest sum.
    fn brute_force(k: usize, n: usize, m_min: f64) -> (u32, Vec<(usize, usize, usize)>) {
        let required = m_min * (k * k) as f64 / n as f64;
        let mut feasible = Vec::new();
        for code in 0..3usize.pow(k as u32) {
            let mut c = code;
            let mut bits = Vec::new();
            for _ in 0..k {
                bits.push([2u32, 4, 6][c % 3]);
                c /= 3;
            }
            if bits.windows(2).all(|p| p[0] <= p[1])
                && f64::from(bits.iter().sum::<u32>()) >= required - 1e-9
            {
                feasible.push(bits);
            }
        }
        let best = feasible.iter().map(|b| b.iter().sum::<u32>()).min().unwrap();
        let mut counts: Vec<_> = feasible
            .iter()
            .filter(|b| b.iter().sum::<u32>() == best)
            .map(|b| {
                let c = |v| b.iter().filter(|&&x| x == v).count();
                (c(2), c(4), c(6))
            })
            .collect();
        counts.sort();
        (best, counts)
    }

    fn counts_of(set: &[ModVector]) -> Vec<(usize, usize, usize)> {
        let mut c: Vec<_> = set.iter().map(ModVector::counts).collect();
        c.sort();
        c
    }

    #[test]
    fn frozen_examples() {
        let s = candidate_set(8, 8, 4.0).unwrap();
        assert_eq!(
            counts_of(&s),
            vec![(0, 8, 0), (1, 6, 1), (2, 4, 2), (3, 2, 3), (4, 0, 4)]
        );
        assert!(s.iter().all(|v| v.bit_sum() == 32));

        let s = candidate_set(4, 8, 4.0).unwrap();
        assert_eq!(s, vec![ModVector::uniform(ModOrder::Qam4, 4)]);

        let s = candidate_set(1, 8, 6.0).unwrap();
        assert_eq!(s, vec![ModVector::uniform(ModOrder::Qam4, 1)]);

        assert_eq!(counts_of(&candidate_set(6, 6, 3.0).unwrap()), vec![(3, 3, 0), (4, 1, 1)]);
        assert_eq!(
            counts_of(&candidate_set(5, 6, 5.0).unwrap()),
            vec![(0, 4, 1), (1, 2, 2), (2, 0, 3)]
        );
    }

    #[test]
    fn lexicographic_order() {
        let s = candidate_set(8, 8, 4.0).unwrap();
        let mut sorted = s.clone();
        sorted.sort();
        assert_eq!(s, sorted);
        assert_eq!(s[0].counts(), (4, 0, 4));
    }

    #[test]
    fn infeasible_rate_names_constraint() {
        let err = candidate_set(8, 8, 6.5).unwrap_err();
        assert!(matches!(err, Error::Infeasible { constraint, .. } if constraint.starts_with("C3")));
        assert!(candidate_set(0, 8, 4.0).is_err());
        assert!(candidate_set(9, 8, 4.0).is_err());
        // the full budget at m_min = 6 forces every order to 6
        assert_eq!(candidate_set(8, 8, 6.0).unwrap(), vec![ModVector::uniform(ModOrder::Qam64, 8)]);
    }

    #[test]
    fn count_bound_examples() {
        assert!(candidate_set(8, 8, 4.0).unwrap().len() <= candidate_count_bound(8));
        assert!(candidate_set(1, 8, 4.0).unwrap().len() <= candidate_count_bound(1));
    }

    #[test]
    fn unrestricted_contains_monotone() {
        let all = unrestricted_feasible(4, 6, 4.0).unwrap();
        let mono = monotone_feasible(4, 6, 4.0).unwrap();
        assert!(mono.iter().all(|v| all.contains(v)));
        assert_eq!(all.iter().filter(|v| v.is_non_decreasing()).count(), mono.len());
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..=8, k_frac in 0.0f64..1.0, m_min in 2.0f64..=6.0) {
            let k = 1 + ((n as f64 - 1.0) * k_frac).round() as usize;
            let set = candidate_set(k, n, m_min).unwrap();
            let (sum, counts) = brute_force(k, n, m_min);
            prop_assert_eq!(counts_of(&set), counts);
            for v in &set {
                prop_assert_eq!(v.bit_sum(), sum);
                prop_assert!(v.is_non_decreasing());
                prop_assert!(v.meets_rate(n, m_min));
                prop_assert_eq!(v.len(), k);
            }
        }

        #[test]
        fn size_is_linear_in_k(n in 1usize..=64, k_frac in 0.0f64..1.0, m_min in 2.0f64..=6.0) {
            let k = 1 + ((n as f64 - 1.0) * k_frac).round() as usize;
            let set = candidate_set(k, n, m_min).unwrap();
            prop_assert!(!set.is_empty());
            prop_assert!(set.len() <= candidate_count_bound(k));
            // no feasible monotone vector has a smaller sum
            let min_sum = set[0].bit_sum();
            for v in monotone_feasible(k, n, m_min).unwrap() {
                prop_assert!(v.bit_sum() >= min_sum);
            }
        }
    }
}
