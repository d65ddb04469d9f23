use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tandem_cli::{
    cmd_analyze, cmd_ingest, cmd_optimize, cmd_report, cmd_simulate, AnalyzeOptions, CliError, Clock, IngestInputs,
    RunContext, SimulateSource,
};
use tandem_core::study_data::StudyPaths;

/// Human–AI fusion and reader-study analytics.
#[derive(Parser)]
#[command(name = "tandem", version)]
struct Cli {
    /// Base RNG seed (simulation and bootstrap resampling).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a reader study from a JSON spec or a named preset.
    Simulate {
        /// Study spec JSON.
        spec: Option<PathBuf>,
        /// paper_like, skilled_humans or noise_humans.
        #[arg(long, conflicts_with = "spec")]
        preset: Option<String>,
    },
    /// Validate a study and rewrite it in canonical form.
    Ingest {
        /// Study directory holding the four CSVs.
        dir: Option<PathBuf>,
        #[arg(long, requires_all = ["assessments", "model_outputs", "readers"], conflicts_with = "dir")]
        cases: Option<PathBuf>,
        #[arg(long)]
        assessments: Option<PathBuf>,
        #[arg(long)]
        model_outputs: Option<PathBuf>,
        #[arg(long)]
        readers: Option<PathBuf>,
    },
    /// Tune the fusion rule by nested cross-validation.
    Optimize {
        study: PathBuf,
        /// Fusion grid and CV settings (defaults when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compute the full report set for a study.
    Analyze {
        study: PathBuf,
        /// Fused outcomes from `optimize`.
        #[arg(long)]
        fused: Option<PathBuf>,
        /// Pay schedule JSON for monetary valuation.
        #[arg(long)]
        pay_schedule: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        resamples: usize,
    },
    /// Summarise an analysis directory as Markdown.
    Report {
        analysis: PathBuf,
        /// `nested_cv.json` from `optimize`.
        #[arg(long)]
        nested_cv: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = RunContext { seed: cli.seed, clock: Clock::from_env() };
    let out = cli.out.as_path();
    match cli.command {
        Command::Simulate { spec, preset } => {
            let source = match (spec, preset) {
                (Some(p), _) => SimulateSource::SpecFile(p),
                (None, Some(name)) => SimulateSource::Preset(name),
                (None, None) => SimulateSource::Preset("paper_like".into()),
            };
            let log = cmd_simulate(&source, out, &ctx)?;
            eprintln!("wrote {} assessments to {}", log.assessments.len(), out.display());
        }
        Command::Ingest { dir, cases, assessments, model_outputs, readers } => {
            let inputs = match (dir, cases, assessments, model_outputs, readers) {
                (Some(d), ..) => IngestInputs::Dir(d),
                (None, Some(cases), Some(assessments), Some(model_outputs), Some(readers)) => {
                    IngestInputs::Files(StudyPaths { cases, assessments, model_outputs, readers })
                }
                _ => return Err(CliError::Config("give a study directory or all four --cases/--assessments/--model-outputs/--readers files".into())),
            };
            let log = cmd_ingest(&inputs, out, &ctx)?;
            eprintln!("validated {} cases and {} assessments", log.cases.len(), log.assessments.len());
        }
        Command::Optimize { study, config } => {
            let report = cmd_optimize(&study, config.as_deref(), out, &ctx)?;
            eprintln!("fused beats model in {} of {} seeds", report.seeds_fused_better, report.seeds.len());
        }
        Command::Analyze { study, fused, pay_schedule, resamples } => {
            let opts = AnalyzeOptions { fused, pay_schedule, resamples, ..AnalyzeOptions::default() };
            let result = cmd_analyze(&study, &opts, out, &ctx)?;
            for (name, e) in &result.metrics.errors {
                eprintln!("metrics/{name}: {} ({})", e.code, e.message);
            }
        }
        Command::Report { analysis, nested_cv } => {
            print!("{}", cmd_report(&analysis, nested_cv.as_deref(), out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("tandem: {e}");
            return ExitCode::from(tandem_cli::EXIT_CONFIG as u8);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tandem: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
