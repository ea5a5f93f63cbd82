//! The `anchorlab` command-line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use anchorlab::analyze::{compare_fits, compare_probe, fit_records, CompareRow, FitOptions};
use anchorlab::config::{BackendKind, ExperimentConfig, Overrides};
use anchorlab::probe::run_density_probe;
use anchorlab::record::RunRecord;
use anchorlab::report as files;
use anchorlab::runner::run_fewshot;
use anchorlab::sweep::{run_threshold_sweep, SweepSettings};
use anchorlab::wire::WireBackend;
use anchorlab::{HarnessError, EXIT_BACKEND};
use anchorlab_core::backend::Backend;
use anchorlab_core::fit::{interference_matrix, AsymptoteMode};

#[derive(Parser)]
#[command(
    name = "anchorlab",
    version,
    about = "Few-shot anchoring experiments over synthetic base arithmetic"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Args)]
struct Common {
    /// Config file of key=value lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Backend: mock or wire.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Comma-separated bases, e.g. 10,8,9.
    #[arg(long, global = true)]
    bases: Option<String>,
    /// Comma-separated shot counts, ascending.
    #[arg(long = "k-grid", global = true)]
    k_grid: Option<String>,
    /// Items per (base, k) cell.
    #[arg(long, global = true)]
    items: Option<u32>,
    /// Evaluation split: id2d, ood3, or ood4.
    #[arg(long, global = true)]
    split: Option<String>,
    /// Anchor-set draws per base in the probe.
    #[arg(long, global = true)]
    samples: Option<u32>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for per-item requests.
    #[arg(long, global = true)]
    parallel: Option<usize>,
    /// Requests per minute admitted to the backend; 0 = unlimited.
    #[arg(long = "rate-limit", global = true)]
    rate_limit: Option<u32>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            backend: self.backend.clone(),
            bases: self.bases.clone(),
            k_grid: self.k_grid.clone(),
            items: self.items,
            split: self.split.clone(),
            samples: self.samples,
            seed: self.seed,
            out: self.out.clone(),
            parallel: self.parallel,
            rate_limit: self.rate_limit,
        }
    }

    fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        ExperimentConfig::resolve(self.config.as_deref(), &self.overrides())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the few-shot grid and record every item.
    Fewshot,
    /// Sample anchor sets and summarize density and distance per base.
    Probe,
    /// Sweep the posterior simulator across evidence counts.
    Sim(SimArgs),
    /// Fit shot curves from a run record.
    Fit(FitArgs),
    /// Print local results next to the bundled reference values.
    Compare(CompareArgs),
    /// Rebuild report files from a run record.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimArgs {
    /// Comma-separated evidence counts, ascending.
    #[arg(long = "n-grid", default_value = "25,100,400,1600")]
    n_grid: String,
    /// Trials per grid point.
    #[arg(long, default_value_t = 2000)]
    trials: u32,
    /// Candidate patterns.
    #[arg(long, default_value_t = 8)]
    m: usize,
    /// Posterior temperature.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Resolution tolerance.
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Baseline noise scale.
    #[arg(long, default_value_t = 1.0)]
    sigma0: f64,
    /// Success probability of a resolved trial.
    #[arg(long = "p-optimal", default_value_t = 0.95)]
    p_optimal: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AsymptoteFlag {
    /// Pin the asymptote at 1.
    Fixed,
    /// Estimate the asymptote.
    Free,
}

#[derive(Args)]
struct FitArgs {
    /// Run record to fit; defaults to <out>/runrecord.jsonl.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Guess-rate floor of the logistic.
    #[arg(long, default_value_t = 0.0)]
    floor: f64,
    /// Asymptote handling.
    #[arg(long, value_enum, default_value_t = AsymptoteFlag::Fixed)]
    asymptote: AsymptoteFlag,
    /// Bootstrap resamples per base.
    #[arg(long, default_value_t = 400)]
    resamples: u32,
    /// Central interval mass.
    #[arg(long, default_value_t = 0.68)]
    level: f64,
}

#[derive(Args)]
struct CompareArgs {
    /// Fits file to compare; defaults to <out>/fits.csv.
    #[arg(long)]
    fits: Option<PathBuf>,
    /// Probe file to compare as well.
    #[arg(long)]
    probe: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run record to rebuild from; defaults to <out>/runrecord.jsonl.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Before/after accuracy pairs to expand into an interference matrix.
    #[arg(long)]
    interference: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, HarnessError> {
    let config = cli.common.resolve()?;
    match &cli.command {
        Command::Fewshot => fewshot(&config),
        Command::Probe => probe(&config),
        Command::Sim(args) => sim(&config, args),
        Command::Fit(args) => fit(&config, args),
        Command::Compare(args) => compare(&config, args),
        Command::Report(args) => report(&config, args),
    }
}

fn build_backend(config: &ExperimentConfig) -> Result<Box<dyn Backend + Sync>, HarnessError> {
    match config.backend {
        BackendKind::Mock => Ok(Box::new(config.build_mock()?)),
        BackendKind::Wire => Ok(Box::new(WireBackend::new(
            config.wire.clone(),
            config.rate_limit_rpm,
        )?)),
    }
}

fn ensure_out_dir(config: &ExperimentConfig) -> Result<(), HarnessError> {
    fs::create_dir_all(&config.out_dir).map_err(|e| HarnessError::io(&config.out_dir, e))
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

fn fewshot(config: &ExperimentConfig) -> Result<ExitCode, HarnessError> {
    let backend = build_backend(config)?;
    let (record, stats) = run_fewshot(config, backend.as_ref())?;
    ensure_out_dir(config)?;
    let record_path = config.out_dir.join("runrecord.jsonl");
    record.write_jsonl(&record_path)?;
    let aggregates_path = config.out_dir.join("aggregates.csv");
    files::write_aggregates(&aggregates_path, &record.aggregates())?;
    println!(
        "run {}: {} items recorded, {} generate calls, {} cells aborted",
        record.header.run_id, stats.items_recorded, stats.generate_calls, stats.cells_aborted
    );
    wrote(&record_path);
    wrote(&aggregates_path);
    if record.aborted.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for cell in &record.aborted {
            eprintln!(
                "warning: cell (base {}, k {}) aborted: {}",
                cell.base, cell.k, cell.detail
            );
        }
        Ok(ExitCode::from(EXIT_BACKEND))
    }
}

fn probe(config: &ExperimentConfig) -> Result<ExitCode, HarnessError> {
    let backend = build_backend(config)?;
    let report = run_density_probe(config, backend.as_ref())?;
    ensure_out_dir(config)?;
    let probe_path = config.out_dir.join("probe.csv");
    files::write_probe(&probe_path, &report)?;
    let effects_path = config.out_dir.join("effects.csv");
    files::write_effects(&effects_path, &report)?;
    for row in &report.rows {
        println!(
            "base {}: rho {:.2} +- {:.2}, d {:.3} +- {:.3} ({} samples)",
            row.base, row.rho_mean, row.rho_sd, row.d_mean, row.d_sd, row.samples
        );
    }
    for effect in &report.effects {
        println!(
            "density separation {} vs {}: Cohen's d {:.2}",
            effect.base_a, effect.base_b, effect.cohens_d
        );
    }
    wrote(&probe_path);
    wrote(&effects_path);
    Ok(ExitCode::SUCCESS)
}

fn parse_u32_list(raw: &str, what: &str) -> Result<Vec<u32>, HarnessError> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| HarnessError::config(format!("bad {what} entry '{part}'")))
        })
        .collect()
}

fn sim(config: &ExperimentConfig, args: &SimArgs) -> Result<ExitCode, HarnessError> {
    let settings = SweepSettings {
        n_grid: parse_u32_list(&args.n_grid, "n-grid")?,
        trials: args.trials,
        m: args.m,
        tau: args.tau,
        delta: args.delta,
        sigma0: args.sigma0,
        p_optimal: args.p_optimal,
        seed: config.seed,
    };
    let report = run_threshold_sweep(&settings)?;
    ensure_out_dir(config)?;
    let widths_path = config.out_dir.join("widths.csv");
    files::write_sweep(&widths_path, &report)?;
    for &(n, width) in &report.widths {
        println!("n {n}: transition width {width:.4}");
    }
    match &report.scaling {
        Some(fit) => println!(
            "width scaling: slope {:.3}, r^2 {:.4}",
            fit.slope, fit.r_squared
        ),
        None => println!("width scaling: skipped, needs at least three grid points"),
    }
    wrote(&widths_path);
    Ok(ExitCode::SUCCESS)
}

fn fit(config: &ExperimentConfig, args: &FitArgs) -> Result<ExitCode, HarnessError> {
    let records = args
        .records
        .clone()
        .unwrap_or_else(|| config.out_dir.join("runrecord.jsonl"));
    let record = RunRecord::read_jsonl(&records)?;
    let options = FitOptions {
        floor: args.floor,
        mode: match args.asymptote {
            AsymptoteFlag::Fixed => AsymptoteMode::FixedOne,
            AsymptoteFlag::Free => AsymptoteMode::Free,
        },
        resamples: args.resamples,
        level: args.level,
        seed: config.seed,
    };
    let report = fit_records(&record, &options)?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    ensure_out_dir(config)?;
    let fits_path = config.out_dir.join("fits.csv");
    files::write_fits(&fits_path, &report.fits)?;
    let plot_path = config.out_dir.join("plotdata.csv");
    files::write_plot(&plot_path, &report.plot)?;
    for fit in &report.fits {
        let p = &fit.boot.point;
        println!(
            "base {}: k50 {:.3} [{:.3}, {:.3}], k90 {:.3}, width {:.3}{}",
            fit.base,
            p.k50,
            fit.boot.k50.lo,
            fit.boot.k50.hi,
            p.k90,
            p.phase_width,
            if p.extrapolated { " (extrapolated)" } else { "" }
        );
    }
    wrote(&fits_path);
    wrote(&plot_path);
    Ok(ExitCode::SUCCESS)
}

fn print_comparison(rows: &[CompareRow]) {
    for row in rows {
        println!(
            "base {} {:<11} local {:>8.3}  reference {:>8.3} +- {:<6.3} deviation {:>+7.1}%",
            row.base,
            row.metric,
            row.local,
            row.reference,
            row.tolerance,
            row.deviation * 100.0
        );
    }
}

fn compare(config: &ExperimentConfig, args: &CompareArgs) -> Result<ExitCode, HarnessError> {
    let fits_path = args
        .fits
        .clone()
        .unwrap_or_else(|| config.out_dir.join("fits.csv"));
    let local = files::read_fits_csv(&fits_path)?;
    print_comparison(&compare_fits(&local)?);
    if let Some(probe_path) = &args.probe {
        let local = files::read_probe_csv(probe_path)?;
        print_comparison(&compare_probe(&local)?);
        println!(
            "note: reference d_r values use their own reporting scale; \
             the deviation column is informative only"
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn report(config: &ExperimentConfig, args: &ReportArgs) -> Result<ExitCode, HarnessError> {
    ensure_out_dir(config)?;
    let records = args
        .records
        .clone()
        .unwrap_or_else(|| config.out_dir.join("runrecord.jsonl"));
    let record = RunRecord::read_jsonl(&records)?;
    let aggregates_path = config.out_dir.join("aggregates.csv");
    files::write_aggregates(&aggregates_path, &record.aggregates())?;
    println!(
        "run {}: {} items, {} aborted cells",
        record.header.run_id,
        record.items.len(),
        record.aborted.len()
    );
    wrote(&aggregates_path);
    if let Some(pairs_path) = &args.interference {
        let runs = files::read_interference_pairs(pairs_path)?;
        let matrix = interference_matrix(&runs)?;
        let interference_path = config.out_dir.join("interference.csv");
        files::write_interference(&interference_path, &matrix)?;
        wrote(&interference_path);
    }
    Ok(ExitCode::SUCCESS)
}
