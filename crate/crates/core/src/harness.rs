//! Config-driven sweeps and the oracle validation suite.
//!
//! Channel draws depend only on `(seed, trial)`: per-feature dB offsets are
//! drawn once per trial and shifted to each grid point's average SNR, so
//! every strategy at every grid point sees the same realizations. Results
//! are gathered in grid order regardless of how rayon schedules the work.

use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::importance::{synthetic_profile, ImportanceProfile, ProfileKind};
use crate::link::{channels_from_state, end_to_end_run, synthetic_features, BitMapping, LinkOptions, Quantizer};
use crate::matching::{db_to_linear, ChannelState};
use crate::solver::{
    best_at_truncation, exhaustive_oracle, solve, solve_ophd, DistortionReport, ModulationSearch,
    OracleMode, ResourceBudget, SolveOptions, Strategy, DEFAULT_TRUNCATION_PENALTY,
};

/// Relative gap below which the ordered search counts as matching the oracle.
pub const MATCH_RTOL: f64 = 1e-4;

/// Largest `N` accepted by [`validate`].
pub const VALIDATE_MAX_FEATURES: usize = 6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadDomain {
    /// SNR uniform in dB over `avg +- spread`.
    #[default]
    Db,
    /// SNR uniform in linear scale between the same two bounds.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSource {
    File {
        file: PathBuf,
    },
    Synthetic {
        kind: ProfileKind,
        #[serde(default)]
        parameter: Option<f64>,
    },
}

impl WeightSource {
    pub fn load(&self, n: usize, seed: u64) -> Result<ImportanceProfile> {
        match self {
            WeightSource::File { file } => {
                let w = ImportanceProfile::load(file)?;
                if w.n_features() != n {
                    return Err(config(
                        "weights.file",
                        format!("{} holds {} weights but n_features = {n}", file.display(), w.n_features()),
                    ));
                }
                Ok(w)
            }
            WeightSource::Synthetic { kind, parameter } => {
                synthetic_profile(*kind, n, parameter.unwrap_or(kind.default_parameter()), seed)
            }
        }
    }
}

fn default_n() -> usize {
    8
}
fn default_spread() -> f64 {
    5.0
}
fn default_dt() -> f64 {
    DEFAULT_TRUNCATION_PENALTY
}
fn default_true() -> bool {
    true
}
fn default_weights() -> WeightSource {
    WeightSource::Synthetic {
        kind: ProfileKind::IsfrPaperLike,
        parameter: None,
    }
}
fn default_n_bits() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_n")]
    pub n_features: usize,
    #[serde(default = "default_weights")]
    pub weights: WeightSource,
    pub gamma_avg_db: Vec<f64>,
    #[serde(default = "default_spread")]
    pub spread_db: f64,
    #[serde(default)]
    pub spread_domain: SpreadDomain,
    pub p_max: Vec<f64>,
    pub m_min: Vec<f64>,
    #[serde(default = "default_dt")]
    pub d_t: f64,
    pub strategies: Vec<Strategy>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub early_stop: bool,
    /// Elements per feature for the optional bit-level run; 0 disables it.
    #[serde(default)]
    pub link_elements: usize,
    #[serde(default = "default_n_bits")]
    pub link_n_bits: u32,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub json_output: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| config(path.display().to_string(), e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 {
            return Err(config("n_features", "must be >= 1"));
        }
        for (field, empty) in [
            ("gamma_avg_db", self.gamma_avg_db.is_empty()),
            ("p_max", self.p_max.is_empty()),
            ("m_min", self.m_min.is_empty()),
            ("strategies", self.strategies.is_empty()),
        ] {
            if empty {
                return Err(config(field, "sweep list must not be empty"));
            }
        }
        if self.trials == 0 {
            return Err(config("trials", "must be >= 1"));
        }
        if !(self.spread_db >= 0.0 && self.spread_db.is_finite()) {
            return Err(config("spread_db", format!("must be >= 0, got {}", self.spread_db)));
        }
        if let Some(g) = self.gamma_avg_db.iter().find(|g| !g.is_finite()) {
            return Err(config("gamma_avg_db", format!("must be finite, got {g}")));
        }
        if self.threads == Some(0) {
            return Err(config("threads", "must be >= 1"));
        }
        for &p in &self.p_max {
            ResourceBudget::new(p, 4.0, self.d_t)?;
        }
        for &m in &self.m_min {
            ResourceBudget::new(1.0, m, self.d_t)?;
        }
        if self.link_elements > 0 {
            Quantizer::uniform(self.link_n_bits, 1.0).map_err(|e| config("link_n_bits", e.to_string()))?;
        }
        self.weights.load(self.n_features, self.seed)?;
        Ok(())
    }

    /// Grid points in row order: gamma_avg, then p_max, then m_min.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &gamma_avg_db in &self.gamma_avg_db {
            for &p_max in &self.p_max {
                for &m_min in &self.m_min {
                    out.push(GridPoint {
                        gamma_avg_db,
                        p_max,
                        m_min,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub gamma_avg_db: f64,
    pub p_max: f64,
    pub m_min: f64,
}

/// Seed derived from the master seed and a trial index.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64 + 1);
    rng.next_u64()
}

/// `n` draws in `[0, 1)`, the raw material of a channel realization.
pub fn unit_draws(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Maps unit draws onto per-subchannel SNRs around `gamma_avg_db`.
pub fn channel_from_draws(gamma_avg_db: f64, spread_db: f64, u: &[f64], domain: SpreadDomain) -> Result<ChannelState> {
    if !(spread_db >= 0.0 && spread_db.is_finite()) {
        return Err(config("spread_db", format!("must be >= 0, got {spread_db}")));
    }
    let (lo, hi) = (gamma_avg_db - spread_db, gamma_avg_db + spread_db);
    let gammas = u
        .iter()
        .map(|&x| match domain {
            SpreadDomain::Db => db_to_linear(lo + (hi - lo) * x),
            SpreadDomain::Linear => {
                let (a, b) = (db_to_linear(lo), db_to_linear(hi));
                a + (b - a) * x
            }
        })
        .collect();
    ChannelState::new(gammas)
}

/// Per-subchannel SNR uniform over `gamma_avg_db +- spread_db` (in dB by
/// default), returned in linear scale.
pub fn sample_channel(gamma_avg_db: f64, spread_db: f64, n: usize, seed: u64, domain: SpreadDomain) -> Result<ChannelState> {
    channel_from_draws(gamma_avg_db, spread_db, &unit_draws(n, seed), domain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub gamma_avg_db: f64,
    pub p_max: f64,
    pub m_min: f64,
    pub strategy: Strategy,
    pub trials: usize,
    pub mean_j: f64,
    pub std_j: f64,
    pub stderr_j: f64,
    pub mean_k: f64,
    pub mean_ber: f64,
    pub mean_candidates: f64,
    pub mean_newton_iterations: f64,
    pub mean_bisection_iterations: f64,
    pub mean_empirical_j: Option<f64>,
}

#[derive(Debug, Clone)]
struct TrialOutcome {
    j: f64,
    k: usize,
    mean_ber: f64,
    candidates: usize,
    newton: usize,
    bisection: usize,
    empirical_j: Option<f64>,
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| config("threads", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn run_trial(cfg: &ExperimentConfig, w: &ImportanceProfile, point: &GridPoint, trial: usize) -> Result<Vec<TrialOutcome>> {
    let seed = trial_seed(cfg.seed, trial);
    let ch = sample_channel(point.gamma_avg_db, cfg.spread_db, cfg.n_features, seed, cfg.spread_domain)?;
    let budget = ResourceBudget::new(point.p_max, point.m_min, cfg.d_t)?;
    let options = SolveOptions {
        early_stop: cfg.early_stop,
    };
    cfg.strategies
        .iter()
        .map(|&s| {
            let (plan, report) = solve(s, w, &ch, &budget, options)?;
            let empirical_j = if cfg.link_elements > 0 {
                let q = Quantizer::uniform(cfg.link_n_bits, 1.0)?;
                let feats = synthetic_features(cfg.n_features, cfg.link_elements, seed);
                let chans = channels_from_state(&ch, seed)?;
                let opts = LinkOptions {
                    d_t: cfg.d_t,
                    mapping: BitMapping::Natural,
                    seed,
                };
                Some(end_to_end_run(&feats, &plan, w, &q, &chans, &opts)?.empirical_j)
            } else {
                None
            };
            Ok(outcome(&report, plan.k, empirical_j))
        })
        .collect()
}

fn outcome(report: &DistortionReport, k: usize, empirical_j: Option<f64>) -> TrialOutcome {
    TrialOutcome {
        j: report.total_j,
        k,
        mean_ber: report.per_feature_ber.iter().sum::<f64>() / report.per_feature_ber.len() as f64,
        candidates: report.stats.candidates_evaluated,
        newton: report.stats.newton_iterations,
        bisection: report.stats.bisection_iterations,
        empirical_j,
    }
}

/// Runs every grid point, trial and strategy. Rows come out in grid order,
/// strategies in config order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let w = cfg.weights.load(cfg.n_features, cfg.seed)?;
    let grid = cfg.grid();
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let outcomes: Vec<Vec<TrialOutcome>> = with_threads(cfg.threads, || {
        jobs.par_iter()
            .map(|&(p, t)| run_trial(cfg, &w, &grid[p], t))
            .collect::<Result<Vec<_>>>()
    })??;

    let mut rows = Vec::with_capacity(grid.len() * cfg.strategies.len());
    for (p, point) in grid.iter().enumerate() {
        let block = &outcomes[p * cfg.trials..(p + 1) * cfg.trials];
        for (s, &strategy) in cfg.strategies.iter().enumerate() {
            let trial_outcomes: Vec<&TrialOutcome> = block.iter().map(|t| &t[s]).collect();
            rows.push(aggregate(point, strategy, &trial_outcomes));
        }
    }
    Ok(rows)
}

fn aggregate(point: &GridPoint, strategy: Strategy, t: &[&TrialOutcome]) -> ResultRow {
    let n = t.len() as f64;
    let mean = |f: &dyn Fn(&TrialOutcome) -> f64| t.iter().map(|o| f(o)).sum::<f64>() / n;
    let mean_j = mean(&|o| o.j);
    let var = if t.len() > 1 {
        t.iter().map(|o| (o.j - mean_j).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std_j = var.sqrt();
    let mean_empirical_j = t
        .iter()
        .map(|o| o.empirical_j)
        .sum::<Option<f64>>()
        .map(|s| s / n);
    ResultRow {
        gamma_avg_db: point.gamma_avg_db,
        p_max: point.p_max,
        m_min: point.m_min,
        strategy,
        trials: t.len(),
        mean_j,
        std_j,
        stderr_j: std_j / n.sqrt(),
        mean_k: mean(&|o| o.k as f64),
        mean_ber: mean(&|o| o.mean_ber),
        mean_candidates: mean(&|o| o.candidates as f64),
        mean_newton_iterations: mean(&|o| o.newton as f64),
        mean_bisection_iterations: mean(&|o| o.bisection as f64),
        mean_empirical_j,
    }
}

pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Runs the sweep and writes the CSV (and JSON mirror) named in the config.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let rows = run_experiment(cfg)?;
    if let Some(path) = &cfg.output {
        write_csv(&rows, std::fs::File::create(path)?)?;
    }
    if let Some(path) = &cfg.json_output {
        std::fs::write(path, serde_json::to_string_pretty(&rows)?)?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub instances: usize,
    pub n_features: usize,
    pub seed: u64,
    pub early_stop: bool,
    pub threads: Option<usize>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            instances: 1000,
            n_features: 6,
            seed: 0,
            early_stop: true,
            threads: None,
        }
    }
}

/// A random oracle-suite instance: gamma_avg in {-10, ..., 10} dB with a
/// 5 dB spread, P_max in {0.4, 2, 4}, M_min in {2, 4, 6}, weights
/// alternating between paper-like decay and jittered uniform.
pub fn suite_instance(n: usize, index: usize, seed: u64) -> Result<(ImportanceProfile, ChannelState, ResourceBudget)> {
    let s = trial_seed(seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    let w = if index.is_multiple_of(2) {
        synthetic_profile(ProfileKind::IsfrPaperLike, n, rng.random_range(2.0..4.0), s)?
    } else {
        synthetic_profile(ProfileKind::UniformNoisy, n, 0.1, s)?
    };
    let gamma_avg = f64::from(rng.random_range(-10i32..=10));
    let p_max = [0.4, 2.0, 4.0][rng.random_range(0..3)];
    let m_min = [2.0, 4.0, 6.0][rng.random_range(0..3)];
    let ch = sample_channel(gamma_avg, 5.0, n, rng.next_u64(), SpreadDomain::Db)?;
    Ok((w, ch, ResourceBudget::new(p_max, m_min, DEFAULT_TRUNCATION_PENALTY)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub instances: usize,
    pub n_features: usize,
    /// Share of instances within `MATCH_RTOL` of the prefix oracle.
    pub match_rate: f64,
    pub mean_gap: f64,
    pub max_gap: f64,
    /// Largest gap with early stopping disabled.
    pub full_walk_max_gap: f64,
    /// Largest relative amount by which any subset beat the best prefix;
    /// `None` when N > 5.
    pub subset_max_gain: Option<f64>,
    /// Same, over instances whose best prefix keeps every retained BER at
    /// or below `d_t`.
    pub subset_max_gain_below_dt: Option<f64>,
    /// Instances where the rate-tight candidate set lost to some
    /// non-decreasing vector at a random k.
    pub sum_pruning_violations: usize,
    /// Instances where the candidate set lost to some of the `3^k` vectors.
    pub pruning_violations: usize,
    pub pruning_max_gap: f64,
    pub kkt_residual_p99: f64,
    pub kkt_residual_max: f64,
    pub budget_residual_max: f64,
    pub ophd_candidates: usize,
    pub oracle_candidates: usize,
}

#[derive(Debug, Clone)]
struct InstanceCheck {
    gap: f64,
    full_gap: f64,
    subset_gain: Option<f64>,
    below_dt: bool,
    sum_gap: f64,
    pruning_gap: f64,
    kkt: f64,
    budget: f64,
    ophd_candidates: usize,
    oracle_candidates: usize,
}

fn rel_gap(j: f64, reference: f64) -> f64 {
    (j - reference) / reference.abs().max(f64::MIN_POSITIVE)
}

fn check_instance(cfg: &ValidationConfig, index: usize) -> Result<InstanceCheck> {
    let n = cfg.n_features;
    let (w, ch, b) = suite_instance(n, index, cfg.seed)?;
    let (_, ophd) = solve_ophd(&w, &ch, &b, SolveOptions { early_stop: cfg.early_stop })?;
    let (_, full) = solve_ophd(&w, &ch, &b, SolveOptions { early_stop: false })?;
    let (_, oracle) = exhaustive_oracle(&w, &ch, &b, OracleMode::Prefix)?;
    let subset_gain = if n <= 5 {
        let (_, subsets) = exhaustive_oracle(&w, &ch, &b, OracleMode::Subsets)?;
        Some(rel_gap(oracle.total_j, subsets.total_j))
    } else {
        None
    };
    let k = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed ^ 0x9e37_79b9, index)).random_range(1..=n.min(6));
    let (pruned, _) = best_at_truncation(&w, &ch, &b, k, ModulationSearch::Pruned)?;
    let (monotone, _) = best_at_truncation(&w, &ch, &b, k, ModulationSearch::Monotone)?;
    let (all, _) = best_at_truncation(&w, &ch, &b, k, ModulationSearch::Unrestricted)?;
    Ok(InstanceCheck {
        gap: rel_gap(ophd.total_j, oracle.total_j),
        full_gap: rel_gap(full.total_j, oracle.total_j),
        subset_gain,
        below_dt: oracle.per_feature_ber.iter().all(|&mu| mu <= b.d_t),
        sum_gap: rel_gap(pruned, monotone),
        pruning_gap: rel_gap(pruned, all),
        kkt: ophd.stats.max_marginal_residual,
        budget: ophd.stats.max_budget_residual,
        ophd_candidates: ophd.stats.candidates_evaluated,
        oracle_candidates: oracle.stats.candidates_evaluated,
    })
}

/// Ordered search against the exhaustive oracle over a seeded suite.
pub fn validate(cfg: &ValidationConfig) -> Result<ValidationReport> {
    let n = cfg.n_features;
    if n > VALIDATE_MAX_FEATURES {
        return Err(Error::SizeGuard {
            n,
            limit: VALIDATE_MAX_FEATURES,
        });
    }
    if n == 0 || cfg.instances == 0 {
        return Err(config("instances", "need N >= 1 and at least one instance"));
    }
    let checks: Vec<InstanceCheck> = with_threads(cfg.threads, || {
        (0..cfg.instances)
            .into_par_iter()
            .map(|i| check_instance(cfg, i))
            .collect::<Result<Vec<_>>>()
    })??;

    let count = checks.len() as f64;
    let mut kkt: Vec<f64> = checks.iter().map(|c| c.kkt).collect();
    kkt.sort_by(f64::total_cmp);
    let p99 = kkt[((0.99 * count).ceil() as usize).clamp(1, kkt.len()) - 1];
    let max = |f: &dyn Fn(&InstanceCheck) -> f64| checks.iter().map(f).fold(0.0, f64::max);
    Ok(ValidationReport {
        instances: checks.len(),
        n_features: n,
        match_rate: checks.iter().filter(|c| c.gap <= MATCH_RTOL).count() as f64 / count,
        mean_gap: checks.iter().map(|c| c.gap.max(0.0)).sum::<f64>() / count,
        max_gap: max(&|c| c.gap),
        full_walk_max_gap: max(&|c| c.full_gap),
        subset_max_gain: checks
            .iter()
            .map(|c| c.subset_gain)
            .try_fold(0.0f64, |acc, g| g.map(|g| acc.max(g))),
        subset_max_gain_below_dt: checks
            .iter()
            .filter(|c| c.below_dt)
            .map(|c| c.subset_gain)
            .try_fold(0.0f64, |acc, g| g.map(|g| acc.max(g))),
        sum_pruning_violations: checks.iter().filter(|c| c.sum_gap > 1e-9).count(),
        pruning_violations: checks.iter().filter(|c| c.pruning_gap > 1e-9).count(),
        pruning_max_gap: max(&|c| c.pruning_gap),
        kkt_residual_p99: p99,
        kkt_residual_max: *kkt.last().unwrap_or(&0.0),
        budget_residual_max: max(&|c| c.budget),
        ophd_candidates: checks.iter().map(|c| c.ophd_candidates).sum(),
        oracle_candidates: checks.iter().map(|c| c.oracle_candidates).sum(),
    })
}
