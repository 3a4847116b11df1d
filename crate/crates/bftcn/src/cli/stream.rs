use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use bftcn_core::streaming::{FinalizedFrame, open_stream};
use serde_json::{Value, json};

use crate::formats::{read_checkpoint, read_features};

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum EmitFormat {
    /// One JSON object per finalized frame on stdout.
    Jsonl,
}

#[derive(clap::Args, Debug)]
pub struct StreamArgs {
    /// Checkpoint to stream with.
    #[arg(long)]
    pub model: PathBuf,
    /// Feature file to replay frame by frame.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_enum, default_value_t = EmitFormat::Jsonl)]
    pub emit: EmitFormat,
}

pub fn run(args: StreamArgs) -> anyhow::Result<Value> {
    let (model, header) = read_checkpoint(&args.model)?;
    let features = read_features(&args.features)?;
    let mut stream = open_stream(&model);
    let delay = stream.delay_frames();

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut emit = |frame: &FinalizedFrame, emitted_at: Option<usize>| -> anyhow::Result<()> {
        let line = json!({
            "t": frame.frame_index,
            "label": header.classes[frame.label],
            "probs": frame.probs,
            "emitted_at_frame": emitted_at,
            "delay_frames": delay,
        });
        writeln!(out, "{line}").context("writing stream output")?;
        Ok(())
    };

    for t in 0..features.n_frames() {
        for frame in stream.push_frame(features.frame(t))? {
            emit(&frame, Some(t))?;
        }
    }
    for frame in stream.close()? {
        emit(&frame, None)?;
    }
    // The JSONL stream is the output; nothing else to print.
    Ok(Value::Null)
}
