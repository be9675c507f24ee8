//! Joint feature selection, modulation and power allocation.
//!
//! The ordered search matches channels once, then walks the truncation
//! index down from `N`. Every `k` evaluates the pruned modulation
//! candidates with optimal power and keeps the best; the walk stops at the
//! first `k` whose best distortion is strictly worse than the previous one.
//! An exhaustive oracle and the baseline strategies share the same
//! evaluation path.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ber::ModOrder;
use crate::error::{config, domain, Error, Result};
use crate::importance::ImportanceProfile;
use crate::matching::{greedy_match, ChannelState, Matching};
use crate::modulation::{candidate_set, monotone_feasible, unrestricted_feasible, ModVector};
use crate::power::{allocate, waterfill, PowerSolution, PowerVector};

/// Distortion charged per unit weight of a discarded feature.
pub const DEFAULT_TRUNCATION_PENALTY: f64 = 0.22;

/// Largest `N` accepted by the exhaustive oracle.
pub const ORACLE_MAX_FEATURES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceBudget {
    /// Average power per subchannel (W); the total budget is `N * p_max`.
    pub p_max: f64,
    /// Average rate budget in bits/symbol.
    pub m_min: f64,
    /// Truncation penalty per discarded feature.
    pub d_t: f64,
}

impl ResourceBudget {
    pub fn new(p_max: f64, m_min: f64, d_t: f64) -> Result<Self> {
        let b = Self { p_max, m_min, d_t };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(config("p_max", format!("must be > 0 (C1), got {}", self.p_max)));
        }
        if !(2.0..=6.0).contains(&self.m_min) {
            return Err(config(
                "m_min",
                format!("must lie in [2, 6] bits/symbol (C3), got {}", self.m_min),
            ));
        }
        if !(self.d_t >= 0.0 && self.d_t.is_finite()) {
            return Err(config("d_t", format!("must be >= 0, got {}", self.d_t)));
        }
        Ok(())
    }
}

/// Outcome of a solve.
///
/// `order` lists feature indices in transmission priority; the first `k`
/// are transmitted and `orders[r]`, `powers[r]` belong to feature
/// `order[r]`. For prefix solutions `order` is the importance ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub k: usize,
    pub order: Vec<usize>,
    pub matching: Matching,
    pub orders: ModVector,
    pub powers: PowerVector,
}

impl AllocationPlan {
    pub fn n_features(&self) -> usize {
        self.order.len()
    }

    pub fn retained(&self) -> &[usize] {
        &self.order[..self.k]
    }

    pub fn truncated(&self) -> &[usize] {
        &self.order[self.k..]
    }

    /// Modulation order of `feature`, `None` if it is discarded.
    pub fn feature_order(&self, feature: usize) -> Option<ModOrder> {
        self.rank_of(feature).map(|r| self.orders.orders()[r])
    }

    pub fn feature_power(&self, feature: usize) -> Option<f64> {
        self.rank_of(feature).map(|r| self.powers.as_slice()[r])
    }

    fn rank_of(&self, feature: usize) -> Option<usize> {
        self.retained().iter().position(|&f| f == feature)
    }

    /// Checks every constraint of the allocation problem.
    pub fn audit(&self, n: usize, budget: &ResourceBudget) -> Result<()> {
        let violation = |constraint: &'static str, detail: String| {
            Err(Error::Infeasible { constraint, detail })
        };
        if self.order.len() != n || self.matching.permutation.len() != n {
            return Err(Error::DimensionMismatch {
                what: "plan features",
                expected: n,
                got: self.order.len(),
            });
        }
        let mut seen = vec![false; n];
        if !self
            .order
            .iter()
            .all(|&f| f < n && !std::mem::replace(&mut seen[f], true))
        {
            return Err(domain(format!("plan order {:?} is not a permutation", self.order)));
        }
        if self.k == 0 || self.k > n {
            return violation("C8 (truncation index)", format!("k = {} not in 1..={n}", self.k));
        }
        if self.orders.len() != self.k || self.powers.len() != self.k {
            return Err(Error::DimensionMismatch {
                what: "per-feature orders/powers",
                expected: self.k,
                got: self.orders.len().min(self.powers.len()),
            });
        }
        if !self.powers.within_budget(n, budget.p_max) {
            return violation(
                "C1/C2 (power)",
                format!("sum p = {} > N P_max = {}", self.powers.total(), n as f64 * budget.p_max),
            );
        }
        if !self.orders.meets_rate(n, budget.m_min) {
            return violation(
                "C3 (average rate)",
                format!("orders {:?} below m_min = {}", self.orders, budget.m_min),
            );
        }
        if !self.matching.is_bijection() {
            return violation("C5-C7 (matching)", format!("{:?}", self.matching.permutation));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub k_visited: Vec<usize>,
    /// Modulation vectors evaluated, one power allocation each.
    pub candidates_evaluated: usize,
    pub newton_iterations: usize,
    pub bisection_iterations: usize,
    pub max_marginal_residual: f64,
    pub max_budget_residual: f64,
}

impl SolveStats {
    fn record(&mut self, sol: &PowerSolution) {
        self.newton_iterations += sol.newton_iterations;
        self.bisection_iterations += sol.bisection_iterations;
        self.max_marginal_residual = self.max_marginal_residual.max(sol.marginal_residual);
        self.max_budget_residual = self.max_budget_residual.max(sol.budget_residual);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// Analytic BER of each retained feature, in plan order.
    pub per_feature_ber: Vec<f64>,
    pub transmission_term: f64,
    pub truncation_term: f64,
    pub total_j: f64,
    pub strategy: String,
    pub stats: SolveStats,
}

/// Weighted distortion of `plan`.
pub fn objective(
    w: &ImportanceProfile,
    plan: &AllocationPlan,
    budget: &ResourceBudget,
) -> Result<DistortionReport> {
    let n = w.n_features();
    if plan.n_features() != n
        || plan.matching.sorted_gammas.len() != n
        || plan.orders.len() != plan.k
        || plan.powers.len() != plan.k
    {
        return Err(Error::DimensionMismatch {
            what: "plan against importance profile",
            expected: n,
            got: plan.n_features(),
        });
    }
    let weights = w.weights();
    let gammas = &plan.matching.sorted_gammas;
    let per_feature_ber: Vec<f64> = plan
        .retained()
        .iter()
        .zip(plan.orders.orders())
        .zip(plan.powers.as_slice())
        .map(|((&f, &m), &p)| m.coefficients().ber_at_snr(p * gammas[f]))
        .collect();
    let transmission_term = plan
        .retained()
        .iter()
        .zip(&per_feature_ber)
        .fold(0.0, |acc, (&f, mu)| acc + weights[f] * mu);
    let truncation_term = truncation_term(plan.truncated().iter().map(|&f| weights[f]), budget.d_t);
    Ok(DistortionReport {
        per_feature_ber,
        transmission_term,
        truncation_term,
        total_j: transmission_term + truncation_term,
        strategy: String::new(),
        stats: SolveStats::default(),
    })
}

fn truncation_term(weights: impl Iterator<Item = f64>, d_t: f64) -> f64 {
    // fold from +0.0: an empty f64 sum is -0.0
    weights.fold(0.0, |acc, w| acc + w * d_t)
}

/// Allocation strategies. `Jcfmp` is the ordered search; the others
/// restrict or replace some of its decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "&'static str")]
pub enum Strategy {
    /// Matching, truncation, modulation and power (ordered search).
    Jcfmp,
    /// Same decisions as `Jcfmp` by exhaustive search.
    JcfmpEs,
    /// Matching, modulation and power; all features kept.
    Jcmp,
    /// Matching, truncation and power; uniform modulation.
    Jcfp,
    /// Matching and power; all features, uniform modulation.
    Jcp,
    /// Matching only; equal power, uniform modulation.
    Ca,
    /// Identity matching, equal power, uniform modulation.
    Eep,
    /// Matching, truncation and waterfilling power; uniform modulation.
    JcfpW,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Jcfmp,
        Strategy::JcfmpEs,
        Strategy::Jcmp,
        Strategy::Jcfp,
        Strategy::Jcp,
        Strategy::Ca,
        Strategy::Eep,
        Strategy::JcfpW,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Jcfmp => "JCFMP",
            Strategy::JcfmpEs => "JCFMP-ES",
            Strategy::Jcmp => "JCMP",
            Strategy::Jcfp => "JCFP",
            Strategy::Jcp => "JCP",
            Strategy::Ca => "CA",
            Strategy::Eep => "EEP",
            Strategy::JcfpW => "JCFP-W",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_uppercase().replace('_', "-");
        match key.as_str() {
            "JCFMP" | "OPHD" => Ok(Strategy::Jcfmp),
            "JCFMP-ES" | "ES" | "EXHAUSTIVE" => Ok(Strategy::JcfmpEs),
            "JCMP" => Ok(Strategy::Jcmp),
            "JCFP" => Ok(Strategy::Jcfp),
            "JCP" => Ok(Strategy::Jcp),
            "CA" => Ok(Strategy::Ca),
            "EEP" => Ok(Strategy::Eep),
            "JCFP-W" | "JCFPW" => Ok(Strategy::JcfpW),
            _ => Err(config(
                "strategy",
                format!(
                    "unknown strategy `{s}` (expected one of {})",
                    Strategy::ALL.map(Strategy::name).join(", ")
                ),
            )),
        }
    }
}

impl From<Strategy> for &'static str {
    fn from(s: Strategy) -> Self {
        s.name()
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub early_stop: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { early_stop: true }
    }
}

/// Which modulation vectors to consider at a fixed `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationSearch {
    /// Non-decreasing vectors with the minimal feasible bit sum.
    Pruned,
    /// Every non-decreasing rate-feasible vector.
    Monotone,
    /// All `3^k` rate-feasible vectors.
    Unrestricted,
    /// The single uniform order with the lowest feasible rate.
    Uniform,
}

impl ModulationSearch {
    fn vectors(self, k: usize, n: usize, m_min: f64) -> Result<Vec<ModVector>> {
        match self {
            ModulationSearch::Pruned => candidate_set(k, n, m_min),
            ModulationSearch::Monotone => monotone_feasible(k, n, m_min),
            ModulationSearch::Unrestricted => unrestricted_feasible(k, n, m_min),
            ModulationSearch::Uniform => uniform_order(k, n, m_min).map(|m| vec![ModVector::uniform(m, k)]),
        }
    }
}

/// Lowest single order meeting the rate requirement for `k` of `n` features.
pub fn uniform_order(k: usize, n: usize, m_min: f64) -> Result<ModOrder> {
    ModOrder::ALL
        .into_iter()
        .find(|&m| ModVector::uniform(m, k).meets_rate(n, m_min))
        .ok_or_else(|| Error::Infeasible {
            constraint: "C3 (average rate)",
            detail: format!("no uniform order reaches m_min = {m_min} with k = {k} of {n}"),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PowerRule {
    Optimal,
    Equal,
    Waterfill,
}

/// Features in transmission-priority order with their matched SNRs.
struct Instance<'a> {
    w: &'a ImportanceProfile,
    budget: ResourceBudget,
    matching: Matching,
    ranking: Vec<usize>,
    weights: Vec<f64>,
    gammas: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Candidate {
    k: usize,
    orders: ModVector,
    powers: PowerVector,
    j: f64,
}

impl<'a> Instance<'a> {
    fn new(
        w: &'a ImportanceProfile,
        ch: &ChannelState,
        budget: &ResourceBudget,
        matching: Option<Matching>,
    ) -> Result<Self> {
        budget.validate()?;
        let matching = match matching {
            Some(m) => m,
            None => greedy_match(w, ch)?,
        };
        if matching.permutation.len() != w.n_features() {
            return Err(Error::DimensionMismatch {
                what: "subchannels per feature",
                expected: w.n_features(),
                got: matching.permutation.len(),
            });
        }
        let ranking = w.ranking();
        let weights = ranking.iter().map(|&f| w.weights()[f]).collect();
        let gammas = ranking.iter().map(|&f| matching.sorted_gammas[f]).collect();
        Ok(Self {
            w,
            budget: *budget,
            matching,
            ranking,
            weights,
            gammas,
        })
    }

    fn n(&self) -> usize {
        self.weights.len()
    }

    /// Distortion of transmitting the ranked features in `selected` with
    /// `orders`, discarding the rest.
    fn evaluate(
        &self,
        selected: &[usize],
        orders: &ModVector,
        rule: PowerRule,
        stats: &mut SolveStats,
    ) -> Result<(f64, PowerVector)> {
        let n = self.n();
        let w: Vec<f64> = selected.iter().map(|&r| self.weights[r]).collect();
        let g: Vec<f64> = selected.iter().map(|&r| self.gammas[r]).collect();
        let k = selected.len();
        let powers = match rule {
            PowerRule::Optimal => {
                let sol = allocate(&w, orders, &g, self.budget.p_max, n)?;
                stats.record(&sol);
                sol.powers
            }
            PowerRule::Equal => PowerVector(vec![n as f64 * self.budget.p_max / k as f64; k]),
            PowerRule::Waterfill => waterfill(&g, n as f64 * self.budget.p_max)?,
        };
        stats.candidates_evaluated += 1;
        let transmission: f64 = orders
            .orders()
            .iter()
            .zip(&w)
            .zip(&g)
            .zip(powers.as_slice())
            .map(|(((m, wj), gj), p)| wj * m.coefficients().ber_at_snr(p * gj))
            .sum();
        let mut keep = vec![false; n];
        for &r in selected {
            keep[r] = true;
        }
        let truncation = truncation_term(
            (0..n).filter(|&r| !keep[r]).map(|r| self.weights[r]),
            self.budget.d_t,
        );
        Ok((transmission + truncation, powers))
    }

    /// Best vector at a fixed prefix length; `None` if no vector is feasible.
    fn best_prefix(
        &self,
        k: usize,
        search: ModulationSearch,
        rule: PowerRule,
        stats: &mut SolveStats,
    ) -> Result<Option<Candidate>> {
        let vectors = match search.vectors(k, self.n(), self.budget.m_min) {
            Ok(v) => v,
            Err(Error::Infeasible { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let prefix: Vec<usize> = (0..k).collect();
        let mut best: Option<Candidate> = None;
        for orders in vectors {
            let (j, powers) = self.evaluate(&prefix, &orders, rule, stats)?;
            if best.as_ref().is_none_or(|b| j < b.j) {
                best = Some(Candidate { k, orders, powers, j });
            }
        }
        Ok(best)
    }

    fn truncation_search(
        &self,
        ks: impl Iterator<Item = usize>,
        early_stop: bool,
        search: ModulationSearch,
        rule: PowerRule,
        stats: &mut SolveStats,
    ) -> Result<Candidate> {
        let mut best: Option<Candidate> = None;
        let mut previous: Option<f64> = None;
        for k in ks {
            stats.k_visited.push(k);
            let Some(local) = self.best_prefix(k, search, rule, stats)? else {
                continue;
            };
            let rising = previous.is_some_and(|p| local.j > p);
            previous = Some(local.j);
            if best.as_ref().is_none_or(|b| local.j < b.j) {
                best = Some(local);
            }
            if early_stop && rising {
                break;
            }
        }
        best.ok_or_else(|| Error::Infeasible {
            constraint: "C3 (average rate)",
            detail: format!("no truncation index admits m_min = {}", self.budget.m_min),
        })
    }

    fn finish(&self, c: Candidate, order: Vec<usize>, strategy: Strategy, stats: SolveStats) -> Result<(AllocationPlan, DistortionReport)> {
        let plan = AllocationPlan {
            k: c.k,
            order,
            matching: self.matching.clone(),
            orders: c.orders,
            powers: c.powers,
        };
        let mut report = objective(self.w, &plan, &self.budget)?;
        report.strategy = strategy.name().to_string();
        report.stats = stats;
        Ok((plan, report))
    }

    fn finish_prefix(&self, c: Candidate, strategy: Strategy, stats: SolveStats) -> Result<(AllocationPlan, DistortionReport)> {
        let order = self.ranking.clone();
        self.finish(c, order, strategy, stats)
    }
}

/// Ordered truncation search with pruned modulation candidates and optimal
/// power.
pub fn solve_ophd(
    w: &ImportanceProfile,
    ch: &ChannelState,
    budget: &ResourceBudget,
    options: SolveOptions,
) -> Result<(AllocationPlan, DistortionReport)> {
    let inst = Instance::new(w, ch, budget, None)?;
    let mut stats = SolveStats::default();
    let best = inst.truncation_search(
        (1..=inst.n()).rev(),
        options.early_stop,
        ModulationSearch::Pruned,
        PowerRule::Optimal,
        &mut stats,
    )?;
    inst.finish_prefix(best, Strategy::Jcfmp, stats)
}

/// Feature-selection space of the exhaustive oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// Importance prefixes, every non-decreasing rate-feasible vector.
    Prefix,
    /// All `2^N - 1` feature subsets, non-decreasing vectors.
    Subsets,
    /// All subsets and all `3^k` rate-feasible vectors: no ordering prior.
    Unrestricted,
}

/// Exhaustive search on top of greedy matching.
pub fn exhaustive_oracle(
    w: &ImportanceProfile,
    ch: &ChannelState,
    budget: &ResourceBudget,
    mode: OracleMode,
) -> Result<(AllocationPlan, DistortionReport)> {
    exhaustive_with_matching(w, ch, budget, mode, None)
}

/// Exhaustive search with a caller-supplied matching.
pub fn exhaustive_with_matching(
    w: &ImportanceProfile,
    ch: &ChannelState,
    budget: &ResourceBudget,
    mode: OracleMode,
    matching: Option<Matching>,
) -> Result<(AllocationPlan, DistortionReport)> {
    let n = w.n_features();
    if n > ORACLE_MAX_FEATURES {
        return Err(Error::SizeGuard {
            n,
            limit: ORACLE_MAX_FEATURES,
        });
    }
    let inst = Instance::new(w, ch, budget, matching)?;
    let mut stats = SolveStats::default();
    if mode == OracleMode::Prefix {
        let best = inst.truncation_search(
            (1..=n).rev(),
            false,
            ModulationSearch::Monotone,
            PowerRule::Optimal,
            &mut stats,
        )?;
        return inst.finish_prefix(best, Strategy::JcfmpEs, stats);
    }

    let search = match mode {
        OracleMode::Unrestricted => ModulationSearch::Unrestricted,
        _ => ModulationSearch::Monotone,
    };
    let mut best: Option<(Candidate, Vec<usize>)> = None;
    for k in (1..=n).rev() {
        stats.k_visited.push(k);
        let vectors = match search.vectors(k, n, budget.m_min) {
            Ok(v) => v,
            Err(Error::Infeasible { .. }) => continue,
            Err(e) => return Err(e),
        };
        for mask in subsets_of_size(n, k) {
            let selected: Vec<usize> = (0..n).filter(|r| mask & (1 << r) != 0).collect();
            for orders in &vectors {
                let (j, powers) = inst.evaluate(&selected, orders, PowerRule::Optimal, &mut stats)?;
                if best.as_ref().is_none_or(|(b, _)| j < b.j) {
                    let c = Candidate {
                        k,
                        orders: orders.clone(),
                        powers,
                        j,
                    };
                    best = Some((c, selected.clone()));
                }
            }
        }
    }
    let (c, selected) = best.ok_or_else(|| Error::Infeasible {
        constraint: "C3 (average rate)",
        detail: format!("no subset admits m_min = {}", budget.m_min),
    })?;
    let mut order: Vec<usize> = selected.iter().map(|&r| inst.ranking[r]).collect();
    order.extend((0..n).filter(|r| !selected.contains(r)).map(|r| inst.ranking[r]));
    inst.finish(c, order, Strategy::JcfmpEs, stats)
}

/// Bitmasks over `n` ranked features with exactly `k` bits set, ascending.
fn subsets_of_size(n: usize, k: usize) -> impl Iterator<Item = u32> {
    (1u32..(1 << n)).filter(move |m| m.count_ones() as usize == k)
}

/// Best weighted distortion over the first `k` ranked features with the
/// given modulation search and optimal power. Returns the distortion and
/// the winning vector.
pub fn best_at_truncation(
    w: &ImportanceProfile,
    ch: &ChannelState,
    budget: &ResourceBudget,
    k: usize,
    search: ModulationSearch,
) -> Result<(f64, ModVector)> {
    let inst = Instance::new(w, ch, budget, None)?;
    let mut stats = SolveStats::default();
    inst.best_prefix(k, search, PowerRule::Optimal, &mut stats)?
        .map(|c| (c.j, c.orders))
        .ok_or_else(|| Error::Infeasible {
            constraint: "C3 (average rate)",
            detail: format!("k = {k} infeasible for m_min = {}", budget.m_min),
        })
}

/// Runs `strategy`. `options.early_stop` applies to the strategies that
/// search over the truncation index.
pub fn solve(
    strategy: Strategy,
    w: &ImportanceProfile,
    ch: &ChannelState,
    budget: &ResourceBudget,
    options: SolveOptions,
) -> Result<(AllocationPlan, DistortionReport)> {
    let n = w.n_features();
    let fixed = |inst: &Instance, search, rule, stats: &mut SolveStats| {
        inst.truncation_search(std::iter::once(n), false, search, rule, stats)
    };
    let mut stats = SolveStats::default();
    match strategy {
        Strategy::Jcfmp => solve_ophd(w, ch, budget, options),
        Strategy::JcfmpEs => exhaustive_oracle(w, ch, budget, OracleMode::Prefix),
        Strategy::Jcmp => {
            let inst = Instance::new(w, ch, budget, None)?;
            let c = fixed(&inst, ModulationSearch::Pruned, PowerRule::Optimal, &mut stats)?;
            inst.finish_prefix(c, strategy, stats)
        }
        Strategy::Jcp | Strategy::Ca => {
            let rule = if strategy == Strategy::Jcp {
                PowerRule::Optimal
            } else {
                PowerRule::Equal
            };
            let inst = Instance::new(w, ch, budget, None)?;
            let c = fixed(&inst, ModulationSearch::Uniform, rule, &mut stats)?;
            inst.finish_prefix(c, strategy, stats)
        }
        Strategy::Eep => {
            let inst = Instance::new(w, ch, budget, Some(Matching::identity(ch)))?;
            let c = fixed(&inst, ModulationSearch::Uniform, PowerRule::Equal, &mut stats)?;
            inst.finish_prefix(c, strategy, stats)
        }
        Strategy::Jcfp | Strategy::JcfpW => {
            let rule = if strategy == Strategy::Jcfp {
                PowerRule::Optimal
            } else {
                PowerRule::Waterfill
            };
            let inst = Instance::new(w, ch, budget, None)?;
            let c = inst.truncation_search(
                (1..=n).rev(),
                options.early_stop,
                ModulationSearch::Uniform,
                rule,
                &mut stats,
            )?;
            inst.finish_prefix(c, strategy, stats)
        }
    }
}
