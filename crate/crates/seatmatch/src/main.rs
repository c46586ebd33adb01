//! Command-line front end. All real work lives in the library; this file
//! parses arguments, wires subcommands to library calls, and maps failures
//! to exit codes: 0 success, 1 input error, 2 internal invariant violation
//! (engine bugs, golden mismatches, violated dominance guarantees).

use clap::{Args, Parser, Subcommand};
use seatmatch::engine::Mechanism;
use seatmatch::io::{
    audit_matching, compare_matchings, load_market, parse_matching, run_experiment, run_selftest,
    write_market, IoError, QuotaPolicy, QuotaPolicySource, RunConfig,
};
use seatmatch::market::{
    balls_in_bins_stats, check_rank_condition, check_separation, cover_time_median_estimate,
    gen_homogeneous, gen_normal_potentials_with_scores, hc_rate_monte_carlo, normal_quantile_approx,
    presets, rank_condition_proxies, HomogeneousConfig, MarketError, MarketShape, RankingPolicy,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "seatmatch",
    version,
    about = "School-choice mechanisms with reserved seats: run, audit, and compare matchings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run mechanisms on a market, write matchings and an audit report.
    Run(RunArgs),
    /// Audit an existing matching file against a market.
    Audit(AuditArgs),
    /// Compare two matching files group by group.
    Compare(CompareArgs),
    /// Generate a synthetic market as CSV files.
    Generate(GenerateArgs),
    /// Check the high-competitiveness predictions and Monte Carlo rates.
    Theorems(TheoremsArgs),
    /// Re-run the bundled example markets against their golden matchings.
    Selftest(SelftestArgs),
}

fn parse_policy(text: &str) -> Result<QuotaPolicySource, String> {
    QuotaPolicy::parse_flag(text)
}

fn parse_mechanism(text: &str) -> Result<Mechanism, String> {
    Mechanism::from_key(text).ok_or_else(|| format!("`{text}` is not one of base, disc, mr, jsa"))
}

#[derive(Args)]
struct MarketArgs {
    /// Students file (id,score,disadvantaged,lottery,prefs).
    students: PathBuf,
    /// Schools file (code,name,quota).
    schools: PathBuf,
    /// Reserve policy: percent:F, proportional, or file:PATH.
    #[arg(long, value_parser = parse_policy, default_value = "proportional")]
    quota: QuotaPolicySource,
    /// Seed for lottery draws records do not provide.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl MarketArgs {
    fn load(&self) -> Result<seatmatch::io::LoadedMarket, IoError> {
        load_market(&self.students, &self.schools, &self.quota, self.seed)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    market: MarketArgs,
    /// Mechanism to run (repeatable); defaults to all four.
    #[arg(long = "mechanism", value_parser = parse_mechanism)]
    mechanisms: Vec<Mechanism>,
    /// Directory for matching files, report, and histograms.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include per-stage round counts in the report.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    market: MarketArgs,
    /// Matching file (id,school,seat_type) to audit.
    matching: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    market: MarketArgs,
    /// First matching file.
    first: PathBuf,
    /// Second matching file.
    second: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Directory to write students.csv, schools.csv, reserves.csv into.
    #[arg(long)]
    out: PathBuf,
    /// Number of schools.
    #[arg(long, default_value_t = 4)]
    schools: usize,
    /// Number of advantaged students.
    #[arg(long, default_value_t = 24)]
    advantaged: usize,
    /// Number of disadvantaged students.
    #[arg(long, default_value_t = 12)]
    disadvantaged: usize,
    /// Uniform school quota.
    #[arg(long, default_value_t = 6)]
    quota: usize,
    /// Uniform reserved-seat count.
    #[arg(long, default_value_t = 2)]
    reserved: usize,
    /// Chance each priority rank goes to an advantaged student.
    #[arg(long, default_value_t = 0.5)]
    bias: f64,
    /// Use the test-score market preset at 1/SCALE size instead of --bias.
    #[arg(long, value_name = "SCALE")]
    nyc_scale: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TheoremsArgs {
    /// Evaluate the preset market at 1/SCALE size.
    #[arg(long, value_name = "SCALE", default_value_t = 10)]
    nyc_scale: usize,
    /// Monte Carlo trials for the high-competitiveness rate.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Slack parameter for the pivotal disadvantaged rank, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Occupancy simulation size (bins).
    #[arg(long, default_value_t = 1000)]
    bins: usize,
    /// Occupancy threshold per bin.
    #[arg(long, default_value_t = 3)]
    threshold: usize,
}

#[derive(Args)]
struct SelftestArgs {
    /// Fixture directory; defaults to the bundled examples.
    dir: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Internal(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        if e.is_internal() {
            Failure::Internal(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<MarketError> for Failure {
    fn from(e: MarketError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<seatmatch::engine::EngineError> for Failure {
    fn from(e: seatmatch::engine::EngineError) -> Self {
        Failure::Internal(e.to_string())
    }
}

fn cmd_run(args: RunArgs) -> Result<u8, Failure> {
    let mechanisms = if args.mechanisms.is_empty() {
        Mechanism::ALL.to_vec()
    } else {
        args.mechanisms.clone()
    };
    let outcome = run_experiment(&RunConfig {
        students_path: args.market.students.clone(),
        schools_path: args.market.schools.clone(),
        mechanisms,
        policy: args.market.quota.clone(),
        seed: args.market.seed,
        out_dir: args.out.clone(),
        trace: args.trace,
    })?;
    print!("{}", outcome.text);
    for path in &outcome.written {
        println!("wrote {}", path.display());
    }
    if outcome.theorem_violated() {
        eprintln!("error: reserve-order dominance violated on a highly competitive market");
        return Ok(2);
    }
    Ok(0)
}

fn cmd_audit(args: AuditArgs) -> Result<u8, Failure> {
    let market = args.market.load()?;
    let (matching, _) =
        parse_matching(&args.matching, &market.table, &market.records, market.table.len())?;
    print!("{}", audit_matching(&market, &matching)?);
    Ok(0)
}

fn cmd_compare(args: CompareArgs) -> Result<u8, Failure> {
    let market = args.market.load()?;
    let (first, _) =
        parse_matching(&args.first, &market.table, &market.records, market.table.len())?;
    let (second, _) =
        parse_matching(&args.second, &market.table, &market.records, market.table.len())?;
    let labels = (
        args.first.file_stem().unwrap_or_default().to_string_lossy().to_string(),
        args.second.file_stem().unwrap_or_default().to_string_lossy().to_string(),
    );
    print!(
        "{}",
        compare_matchings(&market, &first, &second, (&labels.0, &labels.1))?
    );
    Ok(0)
}

fn cmd_generate(args: GenerateArgs) -> Result<u8, Failure> {
    let written = match args.nyc_scale {
        Some(scale) => {
            if scale == 0 {
                return Err(Failure::Input("--nyc-scale must be at least 1".into()));
            }
            let config = presets::nyc_like(scale);
            let (instance, quotas, scores) =
                gen_normal_potentials_with_scores(&config, args.seed);
            write_market(&args.out, &instance, &quotas, Some(&scores))?
        }
        None => {
            if !(0.0..=1.0).contains(&args.bias) {
                return Err(Failure::Input(format!(
                    "--bias {} is not a probability",
                    args.bias
                )));
            }
            if args.reserved > args.quota {
                return Err(Failure::Input(format!(
                    "--reserved {} exceeds --quota {}",
                    args.reserved, args.quota
                )));
            }
            let config = HomogeneousConfig {
                schools: args.schools,
                advantaged: args.advantaged,
                disadvantaged: args.disadvantaged,
                quota: args.quota,
                reserved: args.reserved,
                ranking: RankingPolicy::Biased { advantaged_bias: args.bias },
            };
            let (instance, quotas) = gen_homogeneous(&config, args.seed);
            write_market(&args.out, &instance, &quotas, None)?
        }
    };
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_theorems(args: TheoremsArgs) -> Result<u8, Failure> {
    if args.nyc_scale == 0 {
        return Err(Failure::Input("--nyc-scale must be at least 1".into()));
    }
    let config = presets::nyc_like(args.nyc_scale);
    println!(
        "market shape: {} schools, quota {} (reserved {}), advantaged {}, disadvantaged {} (preset scale 1/{})",
        config.schools,
        config.quota,
        config.reserved,
        config.advantaged,
        config.disadvantaged,
        args.nyc_scale
    );

    let (instance, _, _) = gen_normal_potentials_with_scores(&config, args.seed);
    let rank = check_rank_condition(&instance, config.quota, config.reserved, args.epsilon)?;
    println!(
        "rank condition (epsilon {}, seed {}): {}",
        args.epsilon,
        args.seed,
        if rank.holds { "holds" } else { "fails" }
    );
    println!(
        "  pivotal ranks: advantaged {} (strict variant {}), disadvantaged {}; reserve exceeds n ln n: {}",
        rank.advantaged_rank,
        rank.advantaged_rank_strict,
        rank.disadvantaged_rank,
        if rank.reserve_exceeds_nlogn { "yes" } else { "no" }
    );
    let proxies = rank_condition_proxies(config.schools, config.quota, config.reserved);
    println!("  log-free proxies: advantaged {}, disadvantaged {}", proxies.0, proxies.1);

    let (p_adv, p_dis) = presets::NYC_TAILS;
    let separation = check_separation(&presets::NYC_POTENTIALS, p_adv, p_dis)?;
    println!(
        "separation check (aggregate potentials, tails {p_adv}/{p_dis}): {}",
        if separation.holds { "holds" } else { "fails" }
    );
    println!(
        "  mean gap {:.2} vs threshold {:.2} (nominal {:.2})",
        separation.lhs, separation.rhs, separation.rhs_nominal
    );
    println!(
        "  logistic quantile at {p_adv}: {:.4} standard units",
        normal_quantile_approx(p_adv, 0.0, 1.0)?
    );

    let rate = hc_rate_monte_carlo(
        &MarketShape::NormalPotentials(config.clone()),
        args.trials,
        args.seed,
    )?;
    println!(
        "high competitiveness rate: {}/{} = {:.3} (95% interval {:.3}..{:.3})",
        rate.successes, rate.trials, rate.rate, rate.low, rate.high
    );

    let occupancy = balls_in_bins_stats(args.bins, args.threshold, args.trials, args.seed);
    let median = occupancy.cover_time_percentile(50.0);
    let predicted = cover_time_median_estimate(args.bins, args.threshold);
    println!(
        "occupancy ({} bins, threshold {}, {} trials): median cover {} vs predicted {:.0} (ratio {:.3}); 5th percentile first overflow {}",
        args.bins,
        args.threshold,
        args.trials,
        median,
        predicted,
        median as f64 / predicted,
        occupancy.first_overflow_percentile(5.0)
    );
    Ok(0)
}

fn default_fixture_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))
}

fn cmd_selftest(args: SelftestArgs) -> Result<u8, Failure> {
    let dir = args.dir.unwrap_or_else(default_fixture_dir);
    let report = run_selftest(&dir)?;
    print!("{}", report.text);
    if report.ok() {
        Ok(0)
    } else if report.checks.is_empty() {
        Err(Failure::Input(format!(
            "no fixtures with golden matchings found under {}",
            dir.display()
        )))
    } else {
        Err(Failure::Internal("golden matchings not reproduced".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not failures.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Theorems(args) => cmd_theorems(args),
        Command::Selftest(args) => cmd_selftest(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(message)) => {
            eprintln!("error (internal): {message}");
            ExitCode::from(2)
        }
    }
}
