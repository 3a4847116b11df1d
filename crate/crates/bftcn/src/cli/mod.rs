//! Command-line surface. Every command is deterministic given its flags and
//! seeds, prints machine-readable JSON, and exits nonzero on any error.

mod args;
mod eval;
mod grid;
mod predict;
mod report;
mod stream;
mod synth;
mod train;
mod window;

pub use args::{ConfigArgs, VariantArg};

use clap::Parser;

#[derive(Parser, Debug)]
#[command(
    name = "bftcn",
    version,
    about = "Bounded-future temporal convolutional sequence labeling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Subcommand, Debug)]
pub enum Command {
    /// Exact future-window calculus over a network configuration.
    Window(window::WindowArgs),
    /// Train a model on a dataset manifest.
    Train(train::TrainArgs),
    /// Evaluate a checkpoint against a labeled manifest.
    Eval(eval::EvalArgs),
    /// Write predicted label files for every video in a manifest.
    Predict(predict::PredictArgs),
    /// Frame-by-frame inference with the bounded output delay.
    Stream(stream::StreamArgs),
    /// Train and evaluate a grid of configurations.
    Grid(grid::GridArgs),
    /// Delay-interval report with competitive ratios over grid results.
    Report(report::ReportArgs),
    /// Generate a synthetic labeled dataset.
    Synth(synth::SynthArgs),
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let output = match cli.command {
        Command::Window(args) => window::run(args)?,
        Command::Train(args) => train::run(args)?,
        Command::Eval(args) => eval::run(args)?,
        Command::Predict(args) => predict::run(args)?,
        Command::Stream(args) => stream::run(args)?,
        Command::Grid(args) => grid::run(args)?,
        Command::Report(args) => report::run(args)?,
        Command::Synth(args) => synth::run(args)?,
    };
    if !output.is_null() {
        println!("{}", serde_json::to_string_pretty(&output)?);
    }
    Ok(())
}
