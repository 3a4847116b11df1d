use bftcn_core::window::{NetworkConfig, Variant, bucket_delay, future_window, future_window_seconds};
use serde_json::{Value, json};

use super::args::{ConfigArgs, bucket_json, config_json};

#[derive(clap::Args, Debug)]
pub struct WindowArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Class count (only affects the echoed configuration).
    #[arg(long, default_value_t = 6)]
    pub classes: u32,
    /// List every grid configuration whose future window fits the budget
    /// instead of evaluating one configuration.
    #[arg(long)]
    pub enumerate: bool,
    /// Delay budget in seconds for --enumerate (inclusive).
    #[arg(long)]
    pub budget: Option<f64>,
    /// Layer counts scanned by --enumerate.
    #[arg(long = "l-list", value_delimiter = ',', default_values_t = vec![2u32, 3, 4, 5, 6, 8, 10])]
    pub l_list: Vec<u32>,
    /// Refinement-stage counts scanned by --enumerate.
    #[arg(long = "nr-list", value_delimiter = ',', default_values_t = vec![0u32, 1, 2, 3])]
    pub nr_list: Vec<u32>,
    /// w_max values scanned by --enumerate (bf only).
    #[arg(
        long = "wmax-list",
        value_delimiter = ',',
        default_values_t = vec![0u64, 1, 2, 3, 6, 7, 8, 10, 12, 13, 14, 15, 16, 17, 20]
    )]
    pub wmax_list: Vec<u64>,
}

fn describe(config: &NetworkConfig) -> anyhow::Result<Value> {
    let frames = future_window(config);
    let seconds = future_window_seconds(config);
    let bucket = bucket_delay(seconds)?;
    Ok(json!({
        "config": config_json(config),
        "fw_frames": frames,
        "fw_seconds": seconds,
        "bucket": bucket_json(bucket),
    }))
}

pub fn run(args: WindowArgs) -> anyhow::Result<Value> {
    if !args.enumerate {
        let config = args.config.to_config(args.classes)?;
        return describe(&config);
    }

    let budget = args.budget.unwrap_or(f64::INFINITY);
    let variant: Variant = args.config.variant.into();
    let mut rows = Vec::new();
    for &l in &args.l_list {
        for &n_r in &args.nr_list {
            let wmax_values: &[u64] = match variant {
                Variant::Rr => &[0],
                Variant::Bf => &args.wmax_list,
            };
            for &w_max in wmax_values {
                let config = NetworkConfig {
                    variant,
                    l_pg: l,
                    l_r: l,
                    n_r,
                    w_max,
                    n_feature_maps: args.config.feature_maps,
                    n_classes: args.classes,
                    frame_rate_hz: args.config.fps,
                };
                config.validate()?;
                let seconds = future_window_seconds(&config);
                if seconds <= budget {
                    rows.push(describe(&config)?);
                }
            }
        }
    }
    Ok(Value::Array(rows))
}
