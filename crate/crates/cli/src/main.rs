use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use citescale_core::binfit::FitModel;
use citescale_core::correlation::{self, YearPairs};
use citescale_core::dataset::{parse_paper_citations, Panel};
use citescale_core::distributions;
use citescale_core::indices::{index_table, Index, YearRange};
use citescale_core::report::{self, FitSettings, ReportConfig};
use citescale_core::synth::{self, SynthSpec};
use citescale_core::Error;

#[derive(Parser)]
#[command(name = "citescale", version, about = "Journal citation indices and their scaling statistics")]
struct Cli {
    /// Panel CSV (journal_id,year,citations,articles[,impact_factor]).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Output file, or directory for `report`. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// JSON report config; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Restrict the panel to a year or range (Y, Y1:Y2).
    #[arg(long, global = true)]
    years: Option<YearRange>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the panel and summarise coverage without fitting anything.
    Validate,
    /// Per journal-year table of n, I, r and r'.
    Indices(IndicesArgs),
    /// Pearson correlation between two indices in one year.
    Correlate(CorrelateArgs),
    /// Correlation of one index with itself across years.
    Autocorr(AutocorrArgs),
    /// Fit a model to the log-binned scatter of two indices.
    Fit(FitArgs),
    /// Empirical densities, mean-rescaled collapse and tail fits.
    Dist(DistArgs),
    /// Generate a synthetic panel with known parameters.
    Synth(SynthArgs),
    /// Run every analysis and write the result bundle.
    Report(ReportArgs),
}

#[derive(Args)]
struct IndicesArgs {
    /// Window for the mean publication count behind r'.
    #[arg(long)]
    window: Option<YearRange>,
    /// Per-paper citation records for recomputing I.
    #[arg(long)]
    papers: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long)]
    x: Index,
    #[arg(long)]
    y: Index,
    #[arg(long)]
    year: i32,
    #[arg(long)]
    window: Option<YearRange>,
}

#[derive(Args)]
struct AutocorrArgs {
    #[arg(long)]
    index: Index,
    /// consecutive, extremes or Y1:Y2.
    #[arg(long, default_value = "consecutive")]
    pairs: YearPairs,
    #[arg(long)]
    window: Option<YearRange>,
    /// Emit JSON instead of TSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BinningArgs {
    /// Log bins per decade; 0 fits every point.
    #[arg(long)]
    bins_per_decade: Option<u32>,
    #[arg(long)]
    min_occupancy: Option<usize>,
    /// Inverse-variance weights on the binned means.
    #[arg(long)]
    weighted: bool,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    model: FitModel,
    #[arg(long)]
    x: Index,
    #[arg(long)]
    y: Index,
    #[arg(long)]
    year: i32,
    #[command(flatten)]
    binning: BinningArgs,
    /// Piecewise breakpoint, or `auto` to search for it.
    #[arg(long, value_parser = parse_breakpoint)]
    breakpoint: Option<Breakpoint>,
    /// Bootstrap resamples for cross-check standard errors.
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    window: Option<YearRange>,
    /// Emit binned data with the fitted curve as TSV instead of the JSON report.
    #[arg(long)]
    curve: bool,
}

#[derive(Clone, Copy)]
struct Breakpoint(Option<f64>);

fn parse_breakpoint(s: &str) -> Result<Breakpoint, String> {
    if s == "auto" {
        return Ok(Breakpoint(None));
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 => Ok(Breakpoint(Some(v))),
        _ => Err(format!("expected a positive number or `auto`, got `{s}`")),
    }
}

#[derive(Args)]
struct DistArgs {
    #[arg(long)]
    index: Index,
    #[arg(long)]
    bins_per_decade: Option<u32>,
    #[arg(long)]
    window: Option<YearRange>,
    /// Pool the mean-rescaled samples of all years into one curve.
    #[arg(long)]
    pooled: bool,
    /// Fit the pooled scaled curve: `lognormal` or `power`.
    #[arg(long)]
    tail: Option<TailKind>,
    /// Lower end of the power-tail fit, in units of the mean.
    #[arg(long)]
    x_min: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TailKind {
    Lognormal,
    Power,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON generator spec; defaults are used for omitted runs.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    journals: Option<usize>,
    #[arg(long = "n-years")]
    n_years: Option<usize>,
    /// Ground-truth manifest path; defaults to `<out>.truth.json` when --out is given.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    window: Option<YearRange>,
    #[command(flatten)]
    binning: BinningArgs,
    #[arg(long, value_parser = parse_breakpoint)]
    breakpoint: Option<Breakpoint>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Core(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str::<ReportConfig>(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => ReportConfig::default(),
    };
    if let Some(input) = &cli.input {
        config.input = input.clone();
    }
    if cli.years.is_some() {
        config.years = cli.years;
    }

    match cli.command {
        Command::Validate => {
            let panel = load(&config)?;
            let diagnostics = report::diagnose(&panel, config.window.or(config.years));
            emit(cli.out.as_deref(), &(serde_json::to_string_pretty(&diagnostics)? + "\n"))
        }
        Command::Indices(args) => {
            let panel = load(&config)?;
            let papers = match &args.papers {
                Some(p) => Some(parse_paper_citations(fs::File::open(p)?)?),
                None => None,
            };
            let window = args.window.or(config.window).or(config.years);
            let table = index_table(&panel, window, papers.as_deref());
            emit(cli.out.as_deref(), &table.to_tsv())
        }
        Command::Correlate(args) => {
            let table = table(&config, args.window)?;
            let result = correlation::cross_index_correlation(&table, args.x, args.y, args.year)?;
            emit(cli.out.as_deref(), &(serde_json::to_string_pretty(&result)? + "\n"))
        }
        Command::Autocorr(args) => {
            let table = table(&config, args.window)?;
            let rows = report::auto_correlation_rows(&table, args.index, args.pairs);
            let text = if args.json {
                serde_json::to_string_pretty(&rows)? + "\n"
            } else {
                report::correlation_tsv(&rows)
            };
            emit(cli.out.as_deref(), &text)
        }
        Command::Fit(args) => {
            let table = table(&config, args.window)?;
            let settings = FitSettings {
                x: args.x,
                y: args.y,
                year: args.year,
                bins_per_decade: args.binning.bins_per_decade.unwrap_or(config.binning.bins_per_decade),
                min_occupancy: args.binning.min_occupancy.unwrap_or(config.binning.min_occupancy),
                breakpoint: args.breakpoint.map_or(config.breakpoint, |b| b.0),
                weighted: args.binning.weighted || config.weighted,
                bootstrap_resamples: args.bootstrap.unwrap_or(config.bootstrap_resamples),
                seed: args.seed.unwrap_or(config.seed),
            };
            let (fit, binned) = report::run_fit(&table, args.model, &settings)?;
            let text = if args.curve {
                report::fit_curve_tsv(&binned, &fit.fit)
            } else {
                serde_json::to_string_pretty(&fit)? + "\n"
            };
            emit(cli.out.as_deref(), &text)
        }
        Command::Dist(args) => {
            let table = table(&config, args.window)?;
            let years = table.years();
            let bpd = args.bins_per_decade.unwrap_or(config.pdf_bins_per_decade);
            if let Some(kind) = args.tail {
                let pooled = report::pooled_distribution(&table, args.index, &years, bpd)?;
                let fit = match kind {
                    TailKind::Lognormal => distributions::fit_lognormal(&pooled, None)?,
                    TailKind::Power => {
                        let default = match args.index {
                            Index::ImpactFactor => config.x_min.impact,
                            Index::CitationRate => config.x_min.rate,
                            Index::WindowedRate => config.x_min.rate_windowed,
                            Index::AnnualCitations => distributions::DEFAULT_TAIL_XMIN,
                        };
                        distributions::fit_power_tail(&pooled, args.x_min.unwrap_or(default))?
                    }
                };
                return emit(cli.out.as_deref(), &(serde_json::to_string_pretty(&fit)? + "\n"));
            }
            let text = if args.pooled {
                report::pooled_tsv(&report::pooled_distribution(&table, args.index, &years, bpd)?)
            } else {
                report::distribution_tsv(&report::year_distributions(&table, args.index, &years, bpd)?, true)
            };
            emit(cli.out.as_deref(), &text)
        }
        Command::Synth(args) => {
            let mut spec = match &args.spec {
                Some(path) => serde_json::from_str::<SynthSpec>(&fs::read_to_string(path)?)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
                None => SynthSpec::default(),
            };
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            if let Some(n) = args.journals {
                spec.n_journals = n;
            }
            if let Some(n) = args.n_years {
                spec.n_years = n;
            }
            let generated = synth::generate(&spec)?;
            emit(cli.out.as_deref(), &generated.panel.to_csv())?;
            let manifest = args.manifest.or_else(|| {
                cli.out.as_ref().map(|o| {
                    let mut name = o.as_os_str().to_owned();
                    name.push(".truth.json");
                    PathBuf::from(name)
                })
            });
            if let Some(path) = manifest {
                fs::write(path, serde_json::to_string_pretty(&generated.truth)? + "\n")?;
            }
            Ok(())
        }
        Command::Report(args) => {
            if let Some(out) = cli.out {
                config.out_dir = out;
            }
            if args.window.is_some() {
                config.window = args.window;
            }
            if let Some(b) = args.binning.bins_per_decade {
                config.binning.bins_per_decade = b;
            }
            if let Some(m) = args.binning.min_occupancy {
                config.binning.min_occupancy = m;
            }
            config.weighted |= args.binning.weighted;
            if let Some(b) = args.breakpoint {
                config.breakpoint = b.0;
            }
            if let Some(n) = args.bootstrap {
                config.bootstrap_resamples = n;
            }
            if let Some(s) = args.seed {
                config.seed = s;
            }
            require_input(&config)?;
            let summary = report::run_report(&config)?;
            eprintln!("wrote {} files to {}", summary.files.len(), config.out_dir.display());
            Ok(())
        }
    }
}

fn require_input(config: &ReportConfig) -> Outcome {
    if config.input.as_os_str().is_empty() {
        return Err(Failure::Usage("--input is required (or `input` in --config)".into()));
    }
    Ok(())
}

fn load(config: &ReportConfig) -> Result<Panel, Failure> {
    require_input(config)?;
    Ok(report::load_panel(&config.input, config.years)?)
}

fn table(config: &ReportConfig, window: Option<YearRange>) -> Result<citescale_core::indices::IndexTable, Failure> {
    let panel = load(config)?;
    Ok(report::build_index_table(&panel, window.or(config.window).or(config.years)))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
