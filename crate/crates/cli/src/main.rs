use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use transmigrate_core::pipeline::{Pipeline, RunConfig, RunOptions, Stage, StageReport, STATE_FILE};
use transmigrate_core::validation::swift::{stub_lint_check, stub_syntax_check};
use transmigrate_core::Error;

#[derive(Parser)]
#[command(name = "transmigrate", version, about = "Dependency-ordered Java (Android) to Swift (iOS) translation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage, resuming completed work.
    Run(StageArgs),
    /// Parse sources and build the dependency graphs.
    Analyze(StageArgs),
    /// Build or reuse the knowledge base.
    Index(StageArgs),
    /// Compute the translation order.
    Plan(StageArgs),
    /// Translate and refine units in plan order.
    Translate(StageArgs),
    /// Run the checks on the initial and refined translations.
    Validate(StageArgs),
    /// Write report.json and report.md.
    Report(StageArgs),
    /// Run a built-in stand-in checker on one Swift file.
    StubCheck {
        #[arg(value_enum)]
        kind: StubKind,
        file: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StubKind {
    Syntax,
    Lint,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendChoice {
    Mock,
    Live,
}

impl BackendChoice {
    fn name(self) -> &'static str {
        match self {
            BackendChoice::Mock => "mock",
            BackendChoice::Live => "live",
        }
    }
}

#[derive(Args)]
struct StageArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Override the configured backend.
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    /// Render method prompts without calling the backend.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Write every rendered prompt under <output>/prompts.
    #[arg(long)]
    dump_prompts: bool,
    /// Discard recorded progress before starting.
    #[arg(long)]
    fresh: bool,
    /// Stop after this many translated units (interrupt simulation).
    #[arg(long, hide = true)]
    halt_after: Option<usize>,
}

fn load_config(args: &StageArgs) -> anyhow::Result<RunConfig> {
    let mut config = RunConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(choice) = args.backend {
        match config.backend.as_mut() {
            Some(section) => section.name = choice.name().to_string(),
            None => bail!("--backend needs a `backend` section in {}", args.config.display()),
        }
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(rounds) = args.max_rounds {
        config.max_rounds = rounds;
    }
    Ok(config)
}

fn print_report(r: &StageReport) {
    let mut line = format!("{:<9} {}", r.stage.as_str(), r.summary);
    if r.backend_calls > 0 {
        line.push_str(&format!(" [{} backend calls]", r.backend_calls));
    }
    if r.embed_calls > 0 {
        line.push_str(&format!(" [{} embeddings]", r.embed_calls));
    }
    println!("{line}");
}

fn run_stages(args: &StageArgs, stage: Option<Stage>) -> anyhow::Result<()> {
    let config = load_config(args)?;
    if args.fresh {
        let state = config.output_root.join(STATE_FILE);
        if state.exists() {
            std::fs::remove_file(&state).with_context(|| format!("removing {}", state.display()))?;
        }
    }
    let options = RunOptions {
        dry_run: args.dry_run,
        dump_prompts: args.dump_prompts,
        halt_after_units: args.halt_after,
    };
    let out = config.output_root.clone();
    let mut pipeline = Pipeline::new(config, options)?;
    match stage {
        Some(stage) => print_report(&pipeline.run_stage(stage)?),
        None => pipeline.run()?.iter().for_each(print_report),
    }
    println!("artifacts in {}", out.display());
    Ok(())
}

fn stub_check(kind: StubKind, file: &Path) -> anyhow::Result<bool> {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let name = file.display().to_string();
    let issues = match kind {
        StubKind::Syntax => stub_syntax_check(&name, &text),
        StubKind::Lint => stub_lint_check(&name, &text),
    };
    for i in &issues {
        println!("{i}");
    }
    Ok(issues.iter().all(|i| !i.is_error()))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("TRANSMIGRATE_LOG").unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run_stages(a, None),
        Command::Analyze(a) => run_stages(a, Some(Stage::Analyze)),
        Command::Index(a) => run_stages(a, Some(Stage::Index)),
        Command::Plan(a) => run_stages(a, Some(Stage::Plan)),
        Command::Translate(a) => run_stages(a, Some(Stage::Translate)),
        Command::Validate(a) => run_stages(a, Some(Stage::Validate)),
        Command::Report(a) => run_stages(a, Some(Stage::Report)),
        Command::StubCheck { kind, file } => match stub_check(*kind, file) {
            Ok(true) => return ExitCode::SUCCESS,
            Ok(false) => return ExitCode::FAILURE,
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if matches!(e.downcast_ref::<Error>(), Some(Error::Halted { .. })) {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
