use clap::{Args, Parser, Subcommand, ValueEnum};
use pairsim::gpumodel::DeviceProfile;
use pairsim::kernels::KernelKind;
use pairsim::report::{
    all_applicable_pass, emit_report, read_report_json, run_experiment, ExperimentConfig,
    ReportFormat, ReportRow, REL_TOLERANCE,
};
use pairsim::scenario::{uniform_scene, SceneFile};
use pairsim::strategies::Strategy;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pairsim",
    about = "Cutoff particle-interaction strategies on a simulated SIMT device, reported through traffic counters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene and write it as JSON.
    Gen {
        #[arg(long, default_value = "4")]
        divisions: usize,
        #[arg(long = "avg-per-cell", default_value = "10")]
        avg_per_cell: usize,
        #[arg(long, default_value = "42")]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment matrix and write a report.
    Run(RunArgs),
    /// Run strategies against the reference and print one verdict per row.
    Compare(RunArgs),
    /// Re-emit a JSON report in another format.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated division counts (cells per axis).
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    divisions: Vec<usize>,
    /// Comma-separated average particles per cell.
    #[arg(long = "avg-per-cell", value_delimiter = ',', default_value = "1,10,100")]
    avg_per_cell: Vec<usize>,
    #[arg(long, default_value = "42")]
    seed: u64,
    /// Comma-separated strategy names, or "all".
    #[arg(long, value_delimiter = ',', default_value = "all")]
    strategies: Vec<String>,
    #[arg(long, value_enum, default_value = "lj")]
    kernel: KernelArg,
    /// Device preset name (t600, a100, mi210) or a JSON profile path.
    #[arg(long, default_value = "t600")]
    profile: String,
    #[arg(long, default_value = "1")]
    repeats: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Lj,
    Low,
    High,
}

impl From<KernelArg> for KernelKind {
    fn from(value: KernelArg) -> Self {
        match value {
            KernelArg::Lj => KernelKind::LennardJones,
            KernelArg::Low => KernelKind::LowFlop,
            KernelArg::High => KernelKind::HighFlop,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

fn parse_strategies(names: &[String]) -> Result<Vec<Strategy>, String> {
    if names.len() == 1 && names[0] == "all" {
        return Ok(Strategy::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| {
            Strategy::parse(n).ok_or_else(|| {
                let known: Vec<&str> = Strategy::ALL.iter().map(|s| s.name()).collect();
                format!("unknown strategy '{n}' (known: {})", known.join(", "))
            })
        })
        .collect()
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig, String> {
    let strategies = parse_strategies(&args.strategies)?;
    let profile = DeviceProfile::resolve(&args.profile).map_err(|e| e.to_string())?;
    Ok(ExperimentConfig {
        divisions: args.divisions.clone(),
        avg_per_cell: args.avg_per_cell.clone(),
        seed: args.seed,
        strategies,
        kernel: args.kernel.into(),
        profile,
        repeats: args.repeats,
    })
}

fn write_rows(rows: &[ReportRow], format: ReportFormat, out: Option<&PathBuf>) -> pairsim::Result<()> {
    match out {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            emit_report(rows, format, std::io::BufWriter::new(file))
        }
        None => emit_report(rows, format, std::io::stdout().lock()),
    }
}

fn print_verdicts(rows: &[ReportRow]) {
    for row in rows {
        if !row.applicable {
            println!("{:<18} {:<16} not applicable", row.scenario, row.strategy);
            continue;
        }
        let err = row.max_rel_error.unwrap_or(f64::INFINITY);
        let verdict = if err <= REL_TOLERANCE { "ok" } else { "FAIL" };
        println!(
            "{:<18} {:<16} {}  max_rel_error={:.3e}  vs {}",
            row.scenario, row.strategy, verdict, err, row.comparison_basis
        );
    }
}

fn run() -> Result<ExitCode, String> {
    match Cli::parse().command {
        Command::Gen {
            divisions,
            avg_per_cell,
            seed,
            out,
        } => {
            let (parts, grid) = uniform_scene(divisions, avg_per_cell, seed);
            SceneFile::from_scene(&parts, &grid)
                .write(&out)
                .map_err(|e| e.to_string())?;
            eprintln!(
                "wrote {} particles on a {divisions}^3 grid to {}",
                parts.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            let config = build_config(&args)?;
            let rows = run_experiment(&config).map_err(|e| e.to_string())?;
            write_rows(&rows, args.format.into(), args.out.as_ref())
                .map_err(|e| e.to_string())?;
            if all_applicable_pass(&rows) {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("correctness failure: some applicable strategy exceeded the tolerance");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Compare(args) => {
            let config = build_config(&args)?;
            let rows = run_experiment(&config).map_err(|e| e.to_string())?;
            print_verdicts(&rows);
            if all_applicable_pass(&rows) {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Report { input, format, out } => {
            let rows = read_report_json(&input).map_err(|e| e.to_string())?;
            write_rows(&rows, format.into(), out.as_ref()).map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
