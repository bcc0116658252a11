use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use expertloop::commands::{
    cmd_annotate, cmd_chat, cmd_eval_acute, cmd_eval_reasoning, cmd_export_train, cmd_ingest,
    cmd_selfchat, CliError, SplitName,
};
use expertloop::config::Config;

/// Expert-in-the-loop dialogue augmentation pipeline.
#[derive(Parser)]
#[command(name = "expertloop", version, about)]
struct Cli {
    /// Path to the TOML configuration file.
    #[arg(short, long, default_value = "expertloop.toml", global = true)]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a raw corpus and write split manifests.
    Ingest {
        /// Corpus file, overriding the configured path.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Annotate a split's turn pairs with expert reasoning.
    Annotate {
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Export annotations as training examples.
    ExportTrain {
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Run the configured self-chat campaign.
    Selfchat,
    /// Score generated reasoning against references aligned by id.
    EvalReasoning {
        generated: PathBuf,
        reference: PathBuf,
    },
    /// Aggregate pairwise human judgments into win rates.
    EvalAcute {
        judgments: PathBuf,
    },
    /// Chat with the supporter agent from the terminal.
    Chat,
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let config = Config::load(&cli.config)?;
    match cli.command {
        Command::Ingest { input } => cmd_ingest(&config, input.as_deref(), out),
        Command::Annotate { split } => cmd_annotate(&config, split.parse::<SplitName>()?, out),
        Command::ExportTrain { split } => {
            cmd_export_train(&config, split.parse::<SplitName>()?, out)
        }
        Command::Selfchat => cmd_selfchat(&config, out),
        Command::EvalReasoning { generated, reference } => {
            cmd_eval_reasoning(&config, &generated, &reference, out)
        }
        Command::EvalAcute { judgments } => cmd_eval_acute(&config, &judgments, out),
        Command::Chat => {
            let stdin = io::stdin();
            let mut input = stdin.lock();
            cmd_chat(&config, &mut input as &mut dyn BufRead, out)
        }
    }
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) => {
            // --help and --version are successes; anything else is usage.
            let code = if error.use_stderr() { 1 } else { 0 };
            let _ = error.print();
            return code;
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli, &mut out) {
        Ok(()) => 0,
        Err(error) => {
            eprintln!("error: {error}");
            error.exit_code()
        }
    }
}

fn main() {
    std::process::exit(run());
}
