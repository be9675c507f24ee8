//! `uepopt` command line.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::harness::{
    run_experiment, sample_channel, validate, write_csv, ExperimentConfig, SpreadDomain, ValidationConfig,
};
use crate::importance::{synthetic_profile, ImportanceProfile, ProfileKind};
use crate::link::{
    channels_from_state, end_to_end_run, load_features, synthetic_features, BitMapping, LinkOptions, LinkReport,
    Quantizer,
};
use crate::matching::ChannelState;
use crate::solver::{solve, AllocationPlan, DistortionReport, ResourceBudget, SolveOptions, Strategy};

#[derive(Debug, Parser)]
#[command(name = "uepopt", version, about = "Importance-aware UEP resource allocation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one allocation instance and print the plan.
    Solve(SolveArgs),
    /// Run a config-driven sweep and write CSV.
    Sweep(SweepArgs),
    /// Compare the ordered search with the exhaustive oracle.
    Validate(ValidateArgs),
    /// Bit-level Monte Carlo of a plan: empirical vs analytic BER.
    Simulate(SimulateArgs),
    /// Write a synthetic importance weight file.
    ProfileGen(ProfileGenArgs),
}

/// Parses SNR values such as `0dB`, `-3.5 dB`. The unit is mandatory.
pub fn parse_db(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let lower = t.to_ascii_lowercase();
    let Some(num) = lower.strip_suffix("db") else {
        return Err(format!("`{s}`: SNR values need a dB suffix, e.g. `0dB`"));
    };
    let v: f64 = num.trim().parse().map_err(|e| format!("`{s}`: {e}"))?;
    if !v.is_finite() {
        return Err(format!("`{s}`: not finite"));
    }
    Ok(v)
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

fn parse_kind(s: &str) -> std::result::Result<ProfileKind, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    /// Weight file, one weight per line.
    #[arg(long, conflicts_with = "profile")]
    pub weights: Option<PathBuf>,
    /// Synthetic profile: isfr_geometric, isfr_paper_like or uniform_noisy.
    #[arg(long, value_parser = parse_kind)]
    pub profile: Option<ProfileKind>,
    /// Profile parameter (decay ratio, decade span or jitter).
    #[arg(long)]
    pub parameter: Option<f64>,
    /// Number of features for synthetic profiles.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Per-subchannel SNRs, comma separated, e.g. `3dB,0dB,-2dB`.
    #[arg(long, value_delimiter = ',', value_parser = parse_db, allow_hyphen_values = true, conflicts_with = "gamma_avg")]
    pub gammas: Option<Vec<f64>>,
    /// Average SNR for random subchannels, e.g. `0dB`.
    #[arg(long, value_parser = parse_db, allow_hyphen_values = true, default_value = "0dB")]
    pub gamma_avg: f64,
    /// Half-width of the SNR window around the average.
    #[arg(long, value_parser = parse_db, default_value = "5dB")]
    pub spread: f64,
    /// Power budget per subchannel (W).
    #[arg(long, default_value_t = 1.0)]
    pub pmax: f64,
    /// Average rate budget (bits/symbol).
    #[arg(long, default_value_t = 4.0)]
    pub mmin: f64,
    /// Distortion per unit weight of a discarded feature.
    #[arg(long, default_value_t = crate::solver::DEFAULT_TRUNCATION_PENALTY)]
    pub dt: f64,
    /// JCFMP, JCFMP-ES, JCMP, JCFP, JCP, CA, EEP or JCFP-W.
    #[arg(long, value_parser = parse_strategy, default_value = "JCFMP")]
    pub strategy: Strategy,
    #[arg(long, env = "UEPOPT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Evaluate every truncation index.
    #[arg(long)]
    pub no_early_stop: bool,
}

impl InstanceArgs {
    pub fn build(&self) -> Result<(ImportanceProfile, ChannelState, ResourceBudget)> {
        let w = match (&self.weights, self.profile) {
            (Some(path), _) => ImportanceProfile::load(path)?,
            (None, kind) => {
                let kind = kind.unwrap_or(ProfileKind::IsfrPaperLike);
                synthetic_profile(kind, self.n, self.parameter.unwrap_or(kind.default_parameter()), self.seed)?
            }
        };
        let ch = match &self.gammas {
            Some(db) => {
                if db.len() != w.n_features() {
                    return Err(config(
                        "gammas",
                        format!("{} SNRs given for {} features", db.len(), w.n_features()),
                    ));
                }
                ChannelState::from_db(db)?
            }
            None => sample_channel(self.gamma_avg, self.spread, w.n_features(), self.seed, SpreadDomain::Db)?,
        };
        Ok((w, ch, ResourceBudget::new(self.pmax, self.mmin, self.dt)?))
    }

    fn options(&self) -> SolveOptions {
        SolveOptions {
            early_stop: !self.no_early_stop,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Print machine-readable JSON instead of the table.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON output to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// TOML or JSON experiment config.
    pub config: PathBuf,
    /// CSV destination (overrides the config); stdout if neither is set.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON mirror of the result rows.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the config's master seed.
    #[arg(long, env = "UEPOPT_SEED")]
    pub seed: Option<u64>,
    /// Overrides the config's trials per grid point.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub no_early_stop: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, env = "UEPOPT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub no_early_stop: bool,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON written by `solve --json`; otherwise the instance flags are solved.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Bits per feature to push through the link.
    #[arg(long, default_value_t = 1_000_000)]
    pub bits: usize,
    /// CSV feature matrix (N rows); Gaussian features otherwise.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Quantizer level file; uniform levels otherwise.
    #[arg(long)]
    pub levels: Option<PathBuf>,
    /// Bits per element for the uniform quantizer.
    #[arg(long, default_value_t = 2)]
    pub nb: u32,
    /// Gray-code quantization indices before modulation.
    #[arg(long)]
    pub gray: bool,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileGenArgs {
    #[arg(long, value_parser = parse_kind, default_value = "isfr_paper_like")]
    pub profile: ProfileKind,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long)]
    pub parameter: Option<f64>,
    #[arg(long, env = "UEPOPT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Destination file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What `solve --json` prints, and what `simulate --plan` reads back.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutput {
    pub strategy: Strategy,
    pub weights: Vec<f64>,
    pub gammas: Vec<f64>,
    pub budget: ResourceBudget,
    pub plan: AllocationPlan,
    pub report: DistortionReport,
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text)?;
    }
    Ok(())
}

pub fn cmd_solve(args: &SolveArgs) -> Result<String> {
    let (w, ch, budget) = args.instance.build()?;
    let (plan, report) = solve(args.instance.strategy, &w, &ch, &budget, args.instance.options())?;
    let output = SolveOutput {
        strategy: args.instance.strategy,
        weights: w.weights().to_vec(),
        gammas: ch.gammas().to_vec(),
        budget,
        plan,
        report,
    };
    if args.json {
        Ok(serde_json::to_string_pretty(&output)? + "\n")
    } else {
        Ok(solve_table(&output))
    }
}

fn solve_table(o: &SolveOutput) -> String {
    let mut s = String::new();
    let (p, r) = (&o.plan, &o.report);
    let _ = writeln!(
        s,
        "strategy {}  N = {}  k = {}  P_max = {} W  M_min = {}  d_t = {}",
        o.strategy,
        o.weights.len(),
        p.k,
        o.budget.p_max,
        o.budget.m_min,
        o.budget.d_t
    );
    let _ = writeln!(s, "{:>4} {:>7} {:>10} {:>7} {:>9} {:>4} {:>10} {:>12}", "rank", "feature", "weight", "channel", "gamma_dB", "m", "power", "ber");
    for (rank, &f) in p.order.iter().enumerate() {
        let g = p.matching.sorted_gammas[f];
        let _ = write!(
            s,
            "{:>4} {:>7} {:>10.6} {:>7} {:>9.3}",
            rank,
            f,
            o.weights[f],
            p.matching.permutation[f],
            crate::matching::linear_to_db(g)
        );
        if rank < p.k {
            let _ = writeln!(
                s,
                " {:>4} {:>10.6} {:>12.6e}",
                p.orders.orders()[rank].bits_per_symbol(),
                p.powers.as_slice()[rank],
                r.per_feature_ber[rank]
            );
        } else {
            let _ = writeln!(s, " {:>4} {:>10} {:>12}", "-", "-", "dropped");
        }
    }
    let _ = writeln!(
        s,
        "J = {:.9e}  (transmission {:.9e}, truncation {:.9e})",
        r.total_j, r.transmission_term, r.truncation_term
    );
    let _ = writeln!(
        s,
        "k visited {:?}, {} candidates, {} newton / {} bisection iterations",
        r.stats.k_visited, r.stats.candidates_evaluated, r.stats.newton_iterations, r.stats.bisection_iterations
    );
    s
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<String> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if args.no_early_stop {
        cfg.early_stop = false;
    }
    let rows = run_experiment(&cfg)?;
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv)?;
    let csv = String::from_utf8(csv).expect("csv writer emits utf-8");
    if let Some(path) = args.json.as_ref().or(cfg.json_output.as_ref()) {
        std::fs::write(path, serde_json::to_string_pretty(&rows)?)?;
    }
    match args.out.as_ref().or(cfg.output.as_ref()) {
        Some(path) => {
            std::fs::write(path, &csv)?;
            Ok(format!("wrote {} rows to {}\n", rows.len(), path.display()))
        }
        None => Ok(csv),
    }
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<String> {
    let report = validate(&ValidationConfig {
        instances: args.instances,
        n_features: args.n,
        seed: args.seed,
        early_stop: !args.no_early_stop,
        threads: args.threads,
    })?;
    if args.json {
        return Ok(serde_json::to_string_pretty(&report)? + "\n");
    }
    let mut s = String::new();
    let _ = writeln!(s, "instances          {}", report.instances);
    let _ = writeln!(s, "N                  {}", report.n_features);
    let _ = writeln!(s, "match_rate         {:.4}", report.match_rate);
    let _ = writeln!(s, "mean_gap           {:.3e}", report.mean_gap);
    let _ = writeln!(s, "max_gap            {:.3e}", report.max_gap);
    let _ = writeln!(s, "full_walk_max_gap  {:.3e}", report.full_walk_max_gap);
    if let Some(g) = report.subset_max_gain {
        let _ = writeln!(s, "subset_max_gain    {g:.3e}");
    }
    let _ = writeln!(s, "pruning            {} sum / {} order violations, max gap {:.3e}", report.sum_pruning_violations, report.pruning_violations, report.pruning_max_gap);
    let _ = writeln!(s, "kkt_residual_p99   {:.3e}", report.kkt_residual_p99);
    let _ = writeln!(s, "budget_residual    {:.3e}", report.budget_residual_max);
    let _ = writeln!(s, "candidates         {} ordered / {} exhaustive", report.ophd_candidates, report.oracle_candidates);
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateRow {
    pub feature: usize,
    pub channel: usize,
    pub bits_per_symbol: u32,
    pub power: f64,
    pub analytic_ber: f64,
    pub empirical_ber: f64,
    pub bit_errors: u64,
    pub bits: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutput {
    pub rows: Vec<SimulateRow>,
    pub analytic_j: f64,
    pub empirical_j: f64,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<String> {
    let (w, ch, plan, report, budget) = match &args.plan {
        Some(path) => {
            let o: SolveOutput = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            let w = ImportanceProfile::normalize(&o.weights)?;
            (w, ChannelState::new(o.gammas)?, o.plan, o.report, o.budget)
        }
        None => {
            let (w, ch, b) = args.instance.build()?;
            let (plan, report) = solve(args.instance.strategy, &w, &ch, &b, args.instance.options())?;
            (w, ch, plan, report, b)
        }
    };
    budget.validate()?;
    plan.audit(w.n_features(), &budget)?;
    let d_t = budget.d_t;
    let q = match &args.levels {
        Some(path) => Quantizer::load(path)?,
        None => Quantizer::uniform(args.nb, 1.0)?,
    };
    let features = match &args.features {
        Some(path) => load_features(path)?,
        None => synthetic_features(w.n_features(), args.bits.div_ceil(q.n_bits() as usize), args.instance.seed),
    };
    let channels = channels_from_state(&ch, args.instance.seed)?;
    let opts = LinkOptions {
        d_t,
        mapping: if args.gray { BitMapping::Gray } else { BitMapping::Natural },
        seed: args.instance.seed,
    };
    let link: LinkReport = end_to_end_run(&features, &plan, &w, &q, &channels, &opts)?;
    let rows: Vec<SimulateRow> = plan
        .retained()
        .iter()
        .enumerate()
        .map(|(r, &f)| SimulateRow {
            feature: f,
            channel: plan.matching.permutation[f],
            bits_per_symbol: plan.orders.orders()[r].bits_per_symbol(),
            power: plan.powers.as_slice()[r],
            analytic_ber: report.per_feature_ber[r],
            empirical_ber: link.per_feature_ber[r],
            bit_errors: link.bit_errors[r],
            bits: link.bits_per_feature,
        })
        .collect();
    let out = SimulateOutput {
        rows,
        analytic_j: report.total_j,
        empirical_j: link.empirical_j,
    };
    if args.json {
        return Ok(serde_json::to_string_pretty(&out)? + "\n");
    }
    let mut s = String::new();
    let _ = writeln!(s, "{:>7} {:>7} {:>4} {:>10} {:>12} {:>12} {:>9}", "feature", "channel", "m", "power", "analytic", "empirical", "bits");
    for r in &out.rows {
        let _ = writeln!(
            s,
            "{:>7} {:>7} {:>4} {:>10.6} {:>12.6e} {:>12.6e} {:>9}",
            r.feature, r.channel, r.bits_per_symbol, r.power, r.analytic_ber, r.empirical_ber, r.bits
        );
    }
    let _ = writeln!(s, "J analytic {:.6e}  empirical {:.6e}", out.analytic_j, out.empirical_j);
    Ok(s)
}

pub fn cmd_profile_gen(args: &ProfileGenArgs) -> Result<String> {
    let w = synthetic_profile(
        args.profile,
        args.n,
        args.parameter.unwrap_or(args.profile.default_parameter()),
        args.seed,
    )?;
    match &args.out {
        Some(path) => {
            w.save(path)?;
            Ok(format!("wrote {} weights to {}\n", w.n_features(), path.display()))
        }
        None => Ok(w.to_text()),
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Solve(a) => emit(&cmd_solve(a)?, a.out.as_ref()),
        Command::Sweep(a) => emit(&cmd_sweep(a)?, None),
        Command::Validate(a) => emit(&cmd_validate(a)?, a.out.as_ref()),
        Command::Simulate(a) => emit(&cmd_simulate(a)?, a.out.as_ref()),
        Command::ProfileGen(a) => emit(&cmd_profile_gen(a)?, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("uepopt").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn db_suffix_is_required() {
        assert_eq!(parse_db("0dB").unwrap(), 0.0);
        assert_eq!(parse_db("-3.5 dB").unwrap(), -3.5);
        assert_eq!(parse_db("10db").unwrap(), 10.0);
        assert!(parse_db("3").is_err());
        assert!(parse_db("dB").is_err());
        assert!(Cli::try_parse_from(["uepopt", "solve", "--gamma-avg", "3"]).is_err());
    }

    #[test]
    fn unknown_flags_fail() {
        assert!(Cli::try_parse_from(["uepopt", "solve", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["uepopt"]).is_err());
    }

    #[test]
    fn eep_on_symmetric_instance_is_uniform() {
        let cli = parse(&[
            "solve", "--profile", "uniform_noisy", "--parameter", "0", "--n", "8", "--gammas",
            "2dB,2dB,2dB,2dB,2dB,2dB,2dB,2dB", "--strategy", "eep", "--json",
        ]);
        let Command::Solve(a) = &cli.command else { unreachable!() };
        let o: serde_json::Value = serde_json::from_str(&cmd_solve(a).unwrap()).unwrap();
        assert_eq!(o["plan"]["k"], 8);
        assert_eq!(o["plan"]["orders"].as_array().unwrap().iter().filter(|m| **m == 4).count(), 8);
        let p = o["plan"]["powers"].as_array().unwrap();
        assert!(p.iter().all(|v| v.as_f64() == Some(1.0)));
    }

    #[test]
    fn solve_is_deterministic_and_round_trips() {
        let args = ["solve", "--profile", "isfr_geometric", "--n", "6", "--gamma-avg", "-3dB", "--seed", "9", "--json"];
        let Command::Solve(a) = &parse(&args).command else { unreachable!() };
        let first = cmd_solve(a).unwrap();
        assert_eq!(first, cmd_solve(a).unwrap());
        let o: SolveOutput = serde_json::from_str(&first).unwrap();
        assert_eq!(o.strategy, Strategy::Jcfmp);
        assert_eq!(o.plan.order.len(), 6);

        let Command::Solve(t) = &parse(&args[..args.len() - 1]).command else { unreachable!() };
        let table = cmd_solve(t).unwrap();
        assert!(table.contains("J = "));
    }

    #[test]
    fn gammas_must_match_feature_count() {
        let cli = parse(&["solve", "--n", "3", "--gammas", "1dB,2dB"]);
        let Command::Solve(a) = &cli.command else { unreachable!() };
        assert!(cmd_solve(a).is_err());
    }

    #[test]
    fn infeasible_budget_names_constraint() {
        let cli = parse(&["solve", "--mmin", "7"]);
        let Command::Solve(a) = &cli.command else { unreachable!() };
        let err = cmd_solve(a).unwrap_err().to_string();
        assert!(err.contains("m_min"), "{err}");
    }

    #[test]
    fn simulate_from_plan_file() {
        let dir = tempfile::tempdir().unwrap();
        let plan = dir.path().join("plan.json");
        let Command::Solve(a) = &parse(&["solve", "--n", "4", "--gamma-avg", "5dB", "--json"]).command else {
            unreachable!()
        };
        std::fs::write(&plan, cmd_solve(a).unwrap()).unwrap();
        let args = ["simulate", "--plan", plan.to_str().unwrap(), "--bits", "20000", "--json"];
        let Command::Simulate(s) = &parse(&args).command else { unreachable!() };
        let out: serde_json::Value = serde_json::from_str(&cmd_simulate(s).unwrap()).unwrap();
        assert!(!out["rows"].as_array().unwrap().is_empty());
        assert!(out["empirical_j"].as_f64().unwrap() >= 0.0);
    }

    #[test]
    fn profile_gen_text() {
        let Command::ProfileGen(a) = &parse(&["profile-gen", "--profile", "geometric", "--n", "3", "--parameter", "0.5"]).command else {
            unreachable!()
        };
        let text = cmd_profile_gen(a).unwrap();
        assert!(text.starts_with('#'));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
    }
}
