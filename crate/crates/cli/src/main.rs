use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boardsight::chessio::Perspective;
use boardsight::pipeline::{
    evaluate_labels, finetune_classifiers, label_samples, load_image, recognize, synth_dataset, train_classifiers,
    NetClassifier, PipelineConfig, PipelineError,
};
use clap::{Parser, Subcommand};

/// Exit status when `--strict` is given and the recognised position fails
/// the legality check.
const EXIT_ILLEGAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "boardsight", version, about = "Recognise chess positions in board photographs")]
struct Cli {
    /// TOML file overriding any pipeline constant.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Recognise the position in one photo.
    Recognize {
        image: PathBuf,
        #[arg(long)]
        perspective: Option<Perspective>,
        #[arg(long)]
        models: Option<PathBuf>,
        /// Print the full recognition as JSON.
        #[arg(long)]
        json: bool,
        /// Fail when the position is not legal.
        #[arg(long)]
        strict: bool,
    },
    /// Train both classifiers from a labels file.
    Train {
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Adapt trained classifiers to a new board from two starting-position photos.
    Finetune {
        white: PathBuf,
        black: PathBuf,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the classifiers on a labels file.
    Evaluate {
        labels: PathBuf,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Render random labelled boards.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).format_timestamp(None).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if cli.sequential {
        cfg.parallel = false;
    }
    let models = |m: &Option<PathBuf>, cfg: &PipelineConfig| m.clone().unwrap_or_else(|| cfg.models.clone());

    match cli.command {
        Command::Recognize { image, perspective, models: m, json, strict } => {
            let classifier = NetClassifier::load(models(&m, &cfg), cfg.execution())?;
            let img = load_image(&image)?;
            let rec = recognize(&img, &classifier, perspective.unwrap_or(cfg.perspective), &cfg)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rec).expect("recognition serialises"));
            } else {
                println!("{}", rec.fen);
            }
            if !rec.legality.legal {
                for v in &rec.legality.violations {
                    eprintln!("warning: {v}");
                }
                if strict {
                    return Ok(ExitCode::from(EXIT_ILLEGAL));
                }
            }
        }
        Command::Train { labels, out } => {
            let samples = label_samples(&labels, &cfg)?;
            let (classifier, report) = train_classifiers(&samples, &cfg)?;
            classifier.save(&out)?;
            println!(
                "trained on {} occupancy and {} piece crops; models written to {}",
                report.occupancy_samples,
                report.piece_samples,
                out.display()
            );
        }
        Command::Finetune { white, black, models: m, out } => {
            let base = NetClassifier::load(models(&m, &cfg), cfg.execution())?;
            let tuned = finetune_classifiers(&base, load_image(&white)?, load_image(&black)?, &cfg)?;
            tuned.save(&out)?;
            println!("fine-tuned models written to {}", out.display());
        }
        Command::Evaluate { labels, models: m, json } => {
            let classifier = NetClassifier::load(models(&m, &cfg), cfg.execution())?;
            let (report, outcomes) = evaluate_labels(&labels, &classifier, &cfg)?;
            for o in outcomes.iter().filter(|o| o.error.is_some()) {
                eprintln!("warning: {}: {}", o.image, o.error.as_deref().unwrap_or_default());
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
            } else {
                print!("{}", report.table());
            }
        }
        Command::Synth { count, seed, out } => {
            let labels = synth_dataset(count, seed, &out, &cfg)?;
            println!("{} boards written to {}", labels.len(), Path::new(&out).join("labels.jsonl").display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
