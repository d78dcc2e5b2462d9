//! The `pcrnd` command line.
//!
//! Every command reads CSV and writes CSV plus JSON sidecars into `--out`.
//! Chains are processed in parallel and written in (trade date, expiry)
//! order. A chain that fails is logged and skipped; the run only fails when
//! nothing could be produced.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{Duration, NaiveDate};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::convergence::convergence_table;
use crate::density::{write_density_csv, KnotGrid, PiecewiseDensity};
use crate::design::DesignSystem;
use crate::error::Error;
use crate::market_data::{
    bucket_maturity, cumulative_rate, load_chains, read_option_quotes_path, read_rate_curve_path,
    read_spot_series_path, weekday_offsets, OptionChain, QuoteFilter, RateCurve, SpotSeries,
};
use crate::mispricing::{scan, MispricingConfig};
use crate::pricing::{PriceReport, TestSet};
use crate::solver::{fit, FitConfig, FitResult, Objective, OptionScope};
use crate::synth::{
    log_spaced_strikes, random_density, synth_quotes, write_synthetic, write_truth_density,
    write_variance_future_file, ChainSpec, GbmWorld, LogNormal,
};
use crate::varswap::{
    build_curve_from_densities, read_variance_futures, realized_price, replicate_from_future, varswap_price,
    VarSwapSpec, VarianceFutureQuote,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Exit code for a library error: solver faults are 3, anything about the
/// inputs is 2.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SolverStalled { .. } | Error::InfeasibleHeights(_) | Error::InvalidDensity(_) => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ls,
    Wls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    All,
    Otm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestSetArg {
    All,
    Otm,
    Itm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    /// Closed-form lognormal prices.
    Lognormal,
    /// Exact prices from a random piecewise-constant density.
    Piecewise,
    /// Lognormal chains along a simulated GBM path, plus a variance future.
    Gbm,
}

#[derive(Debug, Parser)]
#[command(name = "pcrnd", version, about = "Piecewise-constant risk-neutral densities from option quotes")]
pub struct Cli {
    /// Grid ratio c_K: K_0 = K_1 / c_K and K_{q+1} = c_K K_q.
    #[arg(long = "c-k", global = true, default_value_t = 1.5)]
    pub c_k: f64,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Ls)]
    pub mode: ModeArg,
    #[arg(long, global = true, value_enum, default_value_t = ScopeArg::All)]
    pub scope: ScopeArg,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct MarketArgs {
    #[arg(long)]
    pub options: PathBuf,
    #[arg(long)]
    pub rates: PathBuf,
    #[arg(long)]
    pub spot: PathBuf,
    /// Keep only chains in this maturity bucket, e.g. `17~31`.
    #[arg(long)]
    pub bucket: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a density to every chain.
    Fit {
        #[command(flatten)]
        market: MarketArgs,
    },
    /// Fit, reprice every quote, and report L_a / L_r per chain.
    Price {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long = "test-set", value_enum, default_value_t = TestSetArg::All)]
        test_set: TestSetArg,
    },
    /// Leave-one-out fair prices with bootstrap bands and mispricing flags.
    Loocv {
        #[command(flatten)]
        market: MarketArgs,
        /// Bootstrap resamples per quote.
        #[arg(long, default_value_t = 50)]
        resamples: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Variance-swap values from option-implied moments and from variance futures.
    Varswap {
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long)]
        futures: PathBuf,
        #[arg(long = "n-var", default_value_t = 50.0)]
        n_var: f64,
        #[arg(long = "strike-var", default_value_t = 0.0)]
        strike_var: f64,
        /// Trading days per year.
        #[arg(long = "days-per-year", default_value_t = 252.0)]
        days_per_year: f64,
    },
    /// Write a synthetic market with a known answer.
    Synth {
        #[arg(long, value_enum, default_value_t = ModelArg::Lognormal)]
        model: ModelArg,
        #[arg(long, default_value = "2014-04-14")]
        trade_date: NaiveDate,
        #[arg(long = "spot-price", default_value_t = 100.0)]
        spot_price: f64,
        /// Annualized volatility on a 365-day calendar.
        #[arg(long, default_value_t = 0.2)]
        vol: f64,
        /// Annualized continuously compounded rate.
        #[arg(long, default_value_t = 0.0)]
        rate: f64,
        /// Calendar days to each expiry.
        #[arg(long, value_delimiter = ',', default_value = "30,91")]
        days: Vec<i64>,
        /// Strikes per chain.
        #[arg(long, default_value_t = 40)]
        strikes: usize,
        /// Strike span in standard deviations either side of the mean.
        #[arg(long = "span-sd", default_value_t = 4.0)]
        span_sd: f64,
        /// Chance that an interval of a random density is empty.
        #[arg(long = "zero-prob", default_value_t = 0.2)]
        zero_prob: f64,
        /// Trading days in the variance contract of the GBM model.
        #[arg(long = "contract-days", default_value_t = 21)]
        contract_days: usize,
    },
    /// Projection pricing error across a ladder of grids.
    Converge {
        #[arg(long, default_value_t = 0.2)]
        vol: f64,
        #[arg(long, default_value_t = 182)]
        days: i64,
        #[arg(long, default_value_t = 0.0)]
        rate: f64,
        /// Rungs `q:span_sd`.
        #[arg(long, value_delimiter = ',', default_value = "20:3,40:4,80:5,160:6")]
        ladder: Vec<String>,
    },
}

impl Cli {
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            mode: match self.mode {
                ModeArg::Ls => Objective::Ls,
                ModeArg::Wls => Objective::Wls,
            },
            scope: match self.scope {
                ScopeArg::All => OptionScope::All,
                ScopeArg::Otm => OptionScope::Otm,
            },
            c_k: self.c_k,
            ..FitConfig::default()
        }
    }
}

/// Failure of a whole command.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self { code: exit_code(&err), message: err.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            error!("{}", e.message);
            e.code
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let config = cli.fit_config();
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
    std::fs::create_dir_all(&cli.out).map_err(Error::from)?;
    pool.install(|| match &cli.command {
        Command::Fit { market } => cmd_fit(cli, market, &config),
        Command::Price { market, test_set } => cmd_price(cli, market, &config, *test_set),
        Command::Loocv { market, resamples, level } => {
            let mc = MispricingConfig { fit: config, resamples: *resamples, level: *level, seed: cli.seed };
            cmd_loocv(cli, market, &mc)
        }
        Command::Varswap { market, futures, n_var, strike_var, days_per_year } => {
            cmd_varswap(cli, market, &config, futures, *n_var, *strike_var, *days_per_year)
        }
        Command::Synth { .. } => cmd_synth(cli),
        Command::Converge { vol, days, rate, ladder } => cmd_converge(cli, *vol, *days, *rate, ladder),
    })
}

struct Market {
    chains: Vec<((NaiveDate, NaiveDate), crate::error::Result<OptionChain>)>,
    rates: RateCurve,
    spot: SpotSeries,
}

fn load_market(market: &MarketArgs) -> CliResult<Market> {
    let quotes = read_option_quotes_path(&market.options)?;
    let rates = read_rate_curve_path(&market.rates)?;
    let spot = read_spot_series_path(&market.spot)?;
    let mut chains = load_chains(&quotes, &rates, &spot, &QuoteFilter::default());
    if let Some(label) = &market.bucket {
        chains.retain(|((t, e), _)| bucket_maturity((*e - *t).num_days()).is_some_and(|b| &b.label() == label));
    }
    if chains.is_empty() {
        return Err(CliError::input("no chains"));
    }
    Ok(Market { chains, rates, spot })
}

fn stem(t: NaiveDate, e: NaiveDate) -> String {
    format!("{t}_{e}")
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(Error::from)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(create(path)?, value).map_err(Error::from)?;
    Ok(())
}

/// Runs `work` on every loaded chain in parallel; returns successes in chain
/// order and fails only if every chain failed.
fn per_chain<T: Send>(
    chains: &[((NaiveDate, NaiveDate), crate::error::Result<OptionChain>)],
    work: impl Fn(&OptionChain) -> crate::error::Result<T> + Sync,
) -> CliResult<Vec<(&OptionChain, T)>> {
    let results: Vec<_> = chains
        .par_iter()
        .map(|((t, e), chain)| {
            let start = Instant::now();
            let out = match chain {
                Ok(c) => work(c).map(|v| (c, v)),
                Err(err) => Err(clone_error(err)),
            };
            ((*t, *e), out, start.elapsed())
        })
        .collect();

    let mut ok = Vec::new();
    let mut first_err = None;
    for ((t, e), out, elapsed) in results {
        match out {
            Ok(v) => ok.push(v),
            Err(err) => {
                warn!("chain t={t} T={e} failed: {err} ({:.3}s)", elapsed.as_secs_f64());
                first_err.get_or_insert(err);
            }
        }
    }
    match (ok.is_empty(), first_err) {
        (true, Some(err)) => Err(err.into()),
        _ => Ok(ok),
    }
}

/// Chain-loading errors are re-reported per chain; their exit class is all
/// that matters.
fn clone_error(err: &Error) -> Error {
    match err {
        Error::InsufficientStrikes { found, required } => {
            Error::InsufficientStrikes { found: *found, required: *required }
        }
        Error::RateGap(d) => Error::RateGap(*d),
        Error::MaturityTooShort { days, min } => Error::MaturityTooShort { days: *days, min: *min },
        Error::MissingSpot(d) => Error::MissingSpot(*d),
        other => Error::InvalidInput(other.to_string()),
    }
}

fn fit_logged(chain: &OptionChain, config: &FitConfig) -> crate::error::Result<FitResult> {
    let start = Instant::now();
    let design = DesignSystem::new(KnotGrid::new(chain.strikes(), config.c_k)?);
    let result = fit(chain, &design, config)?;
    info!(
        "t={} T={} q={} m={} n={} objective={:e} kkt_residual={:e} wall={:.3}s",
        chain.trade_date(),
        chain.expiry_date(),
        chain.q(),
        chain.call_count(),
        chain.put_count(),
        result.objective,
        result.kkt_residual,
        start.elapsed().as_secs_f64()
    );
    Ok(result)
}

#[derive(Debug, Serialize)]
struct FitSidecar {
    trade_date: NaiveDate,
    expiry_date: NaiveDate,
    days_to_expiry: i64,
    bucket: Option<String>,
    spot: f64,
    cum_rate: f64,
    q: usize,
    calls: usize,
    puts: usize,
    config: FitConfig,
    total_mass: f64,
    fit: crate::solver::FitSummary,
}

fn sidecar(chain: &OptionChain, config: &FitConfig, result: &FitResult) -> FitSidecar {
    FitSidecar {
        trade_date: chain.trade_date(),
        expiry_date: chain.expiry_date(),
        days_to_expiry: chain.days_to_expiry(),
        bucket: bucket_maturity(chain.days_to_expiry()).map(|b| b.label()),
        spot: chain.spot(),
        cum_rate: chain.cum_rate(),
        q: chain.q(),
        calls: chain.call_count(),
        puts: chain.put_count(),
        config: *config,
        total_mass: result.density.total_mass(),
        fit: result.summary(),
    }
}

fn cmd_fit(cli: &Cli, market: &MarketArgs, config: &FitConfig) -> CliResult<()> {
    let m = load_market(market)?;
    let fits = per_chain(&m.chains, |c| fit_logged(c, config))?;
    for (chain, result) in fits {
        let s = stem(chain.trade_date(), chain.expiry_date());
        write_density_csv(create(&cli.out.join(format!("density_{s}.csv")))?, &result.density)?;
        write_json(&cli.out.join(format!("fit_{s}.json")), &sidecar(chain, config, &result))?;
    }
    Ok(())
}

fn cmd_price(cli: &Cli, market: &MarketArgs, config: &FitConfig, test_set: TestSetArg) -> CliResult<()> {
    let test_set = match test_set {
        TestSetArg::All => TestSet::All,
        TestSetArg::Otm => TestSet::Otm,
        TestSetArg::Itm => TestSet::Itm,
    };
    let m = load_market(market)?;
    let reports = per_chain(&m.chains, |c| {
        let result = fit_logged(c, config)?;
        PriceReport::build(&result.density, c, test_set)
    })?;
    let mut wtr = csv::Writer::from_writer(create(&cli.out.join("metrics.csv"))?);
    wtr.write_record(["trade_date", "expiry_date", "days", "bucket", "q", "la", "lr"]).map_err(Error::from)?;
    for (chain, report) in reports {
        let s = stem(chain.trade_date(), chain.expiry_date());
        report.write_csv(create(&cli.out.join(format!("price_{s}.csv")))?)?;
        let (la, lr) = report.metrics.map_or((String::new(), String::new()), |m| (m.la.to_string(), m.lr.to_string()));
        wtr.write_record([
            chain.trade_date().to_string(),
            chain.expiry_date().to_string(),
            chain.days_to_expiry().to_string(),
            bucket_maturity(chain.days_to_expiry()).map(|b| b.label()).unwrap_or_default(),
            chain.q().to_string(),
            la,
            lr,
        ])
        .map_err(Error::from)?;
    }
    wtr.flush().map_err(Error::from)?;
    Ok(())
}

fn cmd_loocv(cli: &Cli, market: &MarketArgs, config: &MispricingConfig) -> CliResult<()> {
    config.validate()?;
    let m = load_market(market)?;
    let reports = per_chain(&m.chains, |c| {
        let start = Instant::now();
        let report = scan(c, config)?;
        let flagged = report.rows.iter().filter(|r| r.flag.is_some_and(|f| f != crate::mispricing::Flag::Fair)).count();
        info!(
            "t={} T={} q={} quotes={} flagged={} wall={:.3}s",
            c.trade_date(),
            c.expiry_date(),
            c.q(),
            report.rows.len(),
            flagged,
            start.elapsed().as_secs_f64()
        );
        Ok(report)
    })?;
    for (chain, report) in reports {
        let s = stem(chain.trade_date(), chain.expiry_date());
        report.write_csv(create(&cli.out.join(format!("loocv_{s}.csv")))?)?;
        write_json(
            &cli.out.join(format!("loocv_{s}.json")),
            &serde_json::json!({
                "trade_date": chain.trade_date(),
                "expiry_date": chain.expiry_date(),
                "seed": report.seed,
                "resamples": report.resamples,
                "level": report.level,
                "config": config.fit,
            }),
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct VarswapRow {
    trade_date: NaiveDate,
    start_date: NaiveDate,
    expiry_date: NaiveDate,
    #[serde(rename = "OP")]
    op: Option<f64>,
    #[serde(rename = "VF")]
    vf: Option<f64>,
    #[serde(rename = "True")]
    truth: Option<f64>,
    #[serde(rename = "OP_True")]
    op_true: Option<f64>,
    #[serde(rename = "VF_True")]
    vf_true: Option<f64>,
    #[serde(rename = "OP_VF")]
    op_vf: Option<f64>,
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some(a / b),
        _ => None,
    }
}

struct Contract<'a> {
    quote: &'a VarianceFutureQuote,
    spec: VarSwapSpec,
}

fn contract_spec(
    quote: &VarianceFutureQuote,
    m: &Market,
    n_var: f64,
    strike_var: f64,
    days_per_year: f64,
) -> crate::error::Result<VarSwapSpec> {
    let realized = m.spot.log_returns(quote.start_date, quote.trade_date)?;
    if realized.len() != quote.realized_days {
        return Err(Error::InvalidInput(format!(
            "spot series has {} returns between {} and {}, contract reports {}",
            realized.len(),
            quote.start_date,
            quote.trade_date,
            quote.realized_days
        )));
    }
    let remaining = quote.expected_days - quote.realized_days;
    let mut spec = VarSwapSpec::new(n_var, strike_var, quote.expected_days);
    spec.a = days_per_year;
    spec.realized_returns = realized;
    spec.cum_rate = if quote.expiry_date > quote.trade_date {
        cumulative_rate(&m.rates, quote.trade_date, quote.expiry_date)?
    } else {
        0.0
    };
    spec.calendar = Some(weekday_offsets(quote.trade_date, remaining));
    spec.validate()?;
    Ok(spec)
}

fn cmd_varswap(
    cli: &Cli,
    market: &MarketArgs,
    config: &FitConfig,
    futures: &Path,
    n_var: f64,
    strike_var: f64,
    days_per_year: f64,
) -> CliResult<()> {
    let m = load_market(market)?;
    let quotes = read_variance_futures(File::open(futures).map_err(Error::from)?)?;
    if quotes.is_empty() {
        return Err(CliError::input("no variance-future rows"));
    }

    // densities per trade date, fitted once
    let needed: std::collections::BTreeSet<NaiveDate> = quotes.iter().map(|q| q.trade_date).collect();
    let todo: Vec<_> = m.chains.iter().filter(|((t, _), c)| needed.contains(t) && c.is_ok()).collect();
    let fitted: Vec<_> = todo
        .par_iter()
        .map(|((t, e), c)| {
            let chain = c.as_ref().expect("filtered to loaded chains");
            ((*t, *e), fit_logged(chain, config))
        })
        .collect();
    let mut by_date: BTreeMap<NaiveDate, Vec<(f64, PiecewiseDensity)>> = BTreeMap::new();
    for ((t, e), res) in fitted {
        match res {
            Ok(r) => by_date.entry(t).or_default().push(((e - t).num_days() as f64, r.density)),
            Err(err) => warn!("chain t={t} T={e} failed: {err}"),
        }
    }

    let mut contracts = Vec::new();
    for quote in &quotes {
        match contract_spec(quote, &m, n_var, strike_var, days_per_year) {
            Ok(spec) => contracts.push(Contract { quote, spec }),
            Err(err) => warn!("contract t={} T={} skipped: {err}", quote.trade_date, quote.expiry_date),
        }
    }
    if contracts.is_empty() {
        return Err(CliError::input("no usable variance contracts"));
    }

    let mut wtr = csv::Writer::from_writer(create(&cli.out.join("varswap.csv"))?);
    for Contract { quote, spec } in contracts {
        let (t, e) = (quote.trade_date, quote.expiry_date);
        let op = if spec.remaining_days() == 0 {
            varswap_price(&spec, &crate::varswap::MomentCurve::new(1.0, vec![])?).ok()
        } else {
            let curve = m.spot.spot_on(t).and_then(|s| {
                let dens = by_date.get(&t).map(Vec::as_slice).unwrap_or(&[]);
                let refs: Vec<(f64, &PiecewiseDensity)> = dens.iter().map(|(d, p)| (*d, p)).collect();
                build_curve_from_densities(&refs, s).map(|(c, _)| c)
            });
            match curve.and_then(|c| varswap_price(&spec, &c)) {
                Ok(v) => Some(v),
                Err(err) => {
                    warn!("contract t={t} T={e}: no option-implied value: {err}");
                    None
                }
            }
        };
        let vf = if spec.remaining_days() == 0 {
            replicate_from_future(&spec.realized_returns, 0.0, quote.m(), quote.expected_days, &spec).ok()
        } else {
            quote.iug.and_then(|iug| {
                replicate_from_future(&spec.realized_returns, iug, quote.m(), quote.expected_days, &spec).ok()
            })
        };
        let truth = m
            .spot
            .log_returns(quote.start_date, e)
            .ok()
            .filter(|r| r.len() == quote.expected_days && m.spot.last_date().is_some_and(|d| d >= e))
            .and_then(|r| realized_price(&spec, &r).ok());
        info!(
            "contract t={t} T={e} realized={}/{} OP={op:?} VF={vf:?} True={truth:?}",
            quote.realized_days, quote.expected_days
        );
        wtr.serialize(VarswapRow {
            trade_date: t,
            start_date: quote.start_date,
            expiry_date: e,
            op,
            vf,
            truth,
            op_true: ratio(op, truth),
            vf_true: ratio(vf, truth),
            op_vf: ratio(op, vf),
        })
        .map_err(Error::from)?;
    }
    wtr.flush().map_err(Error::from)?;
    Ok(())
}

fn cmd_synth(cli: &Cli) -> CliResult<()> {
    let Command::Synth {
        model,
        trade_date,
        spot_price,
        vol,
        rate,
        days,
        strikes,
        span_sd,
        zero_prob,
        contract_days,
    } = &cli.command
    else {
        unreachable!("dispatched on the synth command");
    };
    if days.is_empty() || days.iter().any(|d| *d <= 0) {
        return Err(CliError::input("--days needs positive calendar-day counts"));
    }
    if *strikes == 0 {
        return Err(CliError::input("--strikes must be positive"));
    }
    let daily_rate = rate / 365.0;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let max_days = *days.iter().max().expect("checked non-empty");

    let world = GbmWorld {
        trade_date: *trade_date,
        spot: *spot_price,
        vol: *vol,
        daily_rate,
        contract_days: *contract_days,
    };
    let mut quotes = Vec::new();
    let mut truths = Vec::new();
    let (spot, last_date) = match model {
        ModelArg::Lognormal | ModelArg::Piecewise => {
            for &d in days {
                let law = world.law(*spot_price, d as f64)?;
                let spec = ChainSpec {
                    trade_date: *trade_date,
                    expiry_date: *trade_date + Duration::days(d),
                    spot: *spot_price,
                    daily_rate,
                    strikes: log_spaced_strikes(&law, *span_sd, *strikes),
                };
                if *model == ModelArg::Lognormal {
                    quotes.extend(synth_quotes(&law, &spec));
                    truths.push(serde_json::json!({"expiry_date": spec.expiry_date, "mu": law.mu, "sigma": law.sigma}));
                } else {
                    let density = random_density(&mut rng, KnotGrid::new(&spec.strikes, cli.c_k)?, *zero_prob)?;
                    quotes.extend(synth_quotes(&density, &spec));
                    let path = cli.out.join(format!("truth_{}.csv", stem(spec.trade_date, spec.expiry_date)));
                    write_truth_density(&path, &density)?;
                    truths.push(serde_json::json!({"expiry_date": spec.expiry_date, "density": path.file_name().and_then(|n| n.to_str())}));
                }
            }
            (SpotSeries::new([(*trade_date, *spot_price)])?, *trade_date + Duration::days(max_days))
        }
        ModelArg::Gbm => {
            if *contract_days == 0 {
                return Err(CliError::input("--contract-days must be positive"));
            }
            let path = world.simulate_path(&mut rng)?;
            let mut futures = Vec::new();
            for (j, (date, close)) in path.iter().enumerate() {
                quotes.extend(world.option_quotes(date, close, days, *strikes, *span_sd)?);
                futures.push(world.variance_future(j));
            }
            write_variance_future_file(&cli.out, &futures)?;
            truths.push(serde_json::json!({"vol": vol, "daily_rate": daily_rate, "contract_expiry": world.contract_expiry()}));
            (path, world.contract_expiry() + Duration::days(max_days))
        }
    };
    let rates = RateCurve::flat(*trade_date, last_date, daily_rate)?;
    write_synthetic(&cli.out, &quotes, &rates, &spot)?;
    write_json(
        &cli.out.join("truth.json"),
        &serde_json::json!({"model": format!("{model:?}").to_lowercase(), "seed": cli.seed, "c_k": cli.c_k, "chains": truths}),
    )?;
    info!("wrote {} quotes to {}", quotes.len(), cli.out.display());
    Ok(())
}

fn parse_rung(s: &str) -> CliResult<(usize, f64)> {
    let (q, span) = s.split_once(':').ok_or_else(|| CliError::input(format!("ladder rung {s:?} is not q:span")))?;
    let q = q.trim().parse().map_err(|_| CliError::input(format!("bad q in {s:?}")))?;
    let span = span.trim().parse().map_err(|_| CliError::input(format!("bad span in {s:?}")))?;
    Ok((q, span))
}

fn cmd_converge(cli: &Cli, vol: f64, days: i64, rate: f64, ladder: &[String]) -> CliResult<()> {
    let ladder: Vec<(usize, f64)> = ladder.iter().map(|s| parse_rung(s)).collect::<CliResult<_>>()?;
    let cum_rate = rate / 365.0 * days as f64;
    let law = LogNormal::risk_neutral(100.0, cum_rate, vol * (days as f64 / 365.0).sqrt())?;
    let rows = convergence_table(&law, &ladder, cli.c_k, cum_rate)?;
    let mut wtr = csv::Writer::from_writer(create(&cli.out.join("converge.csv"))?);
    for row in &rows {
        info!("q={} span_sd={} mse={:e}", row.q, row.span_sd, row.mse);
        wtr.serialize(row).map_err(Error::from)?;
    }
    wtr.flush().map_err(Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_faults_map_to_three() {
        let stalled = Error::SolverStalled { iterations: 10, kkt_residual: 1.0, objective: 1.0 };
        assert_eq!(exit_code(&stalled), EXIT_SOLVER);
        assert_eq!(exit_code(&Error::InfeasibleHeights(-1.0)), EXIT_SOLVER);
        assert_eq!(exit_code(&Error::InsufficientStrikes { found: 1, required: 2 }), EXIT_INPUT);
        assert_eq!(exit_code(&Error::NoTestOptions), EXIT_INPUT);
    }

    #[test]
    fn ladder_rungs_parse() {
        assert_eq!(parse_rung("40:4.5").unwrap(), (40, 4.5));
        assert!(parse_rung("40").is_err());
        assert!(parse_rung("x:1").is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(main_with_args(["pcrnd", "nonsense"]), EXIT_INPUT);
        assert_eq!(main_with_args(["pcrnd", "--mode", "nope", "converge"]), EXIT_INPUT);
    }
}
