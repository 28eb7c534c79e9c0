//! Command-line front end: run configuration, the subcommands and their
//! exit codes.

mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_evaluate, cmd_inspect, cmd_predict, cmd_preview_augment, cmd_train, image_features,
};
pub use config::{RunArgs, RunConfig, CONFIG_KEYS};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "histograde",
    version,
    about = "Grade histopathology images with a frozen VGG16 backbone and a trained dense head"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the head on --data and write --head and --metrics.
    Train(RunArgs),
    /// Print loss and accuracy of --head over every image in --holdout.
    Evaluate(RunArgs),
    /// Print `path,grade,p1,p2,p3` for each image.
    Predict {
        #[command(flatten)]
        run: RunArgs,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// List the tensors of a weight file with dims and checksums.
    Inspect { path: PathBuf },
    /// Write zoom-augmented PNG copies of dataset images.
    PreviewAugment {
        #[command(flatten)]
        run: RunArgs,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        count: usize,
    },
}

/// Runs one command against the given streams and returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Train(args) => args
            .resolve()
            .and_then(|cfg| cmd_train(&cfg, err).map(drop)),
        Command::Evaluate(args) => args
            .resolve()
            .and_then(|cfg| cmd_evaluate(&cfg, out).map(drop)),
        Command::Predict { run, images } => run
            .resolve()
            .and_then(|cfg| cmd_predict(&cfg, &images, out, err)),
        Command::Inspect { path } => cmd_inspect(&path, out),
        Command::PreviewAugment {
            run,
            out: dir,
            count,
        } => run
            .resolve()
            .and_then(|cfg| cmd_preview_augment(&cfg, &dir, count, out).map(drop)),
    };
    let _ = out.flush();
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (program name first) and runs against stdout and stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    run(cli, &mut io::stdout().lock(), &mut io::stderr().lock())
}
