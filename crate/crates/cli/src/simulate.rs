//! `simulate`: run one experiment and write its tables.

use std::path::PathBuf;

use singlet_core::config::{angle_label, DelaySpec, ExperimentConfig, LabeledPair, SettingsMode};
use singlet_core::protocol::{run_experiment, ExperimentOutput};
use singlet_core::report::{counts_csv, curve_csv};
use singlet_core::ModelKind;

use crate::inputs::{load_experiment_config, load_settings, OutputDir};
use crate::{CmdResult, Failure};

const DEFAULT_TRIALS: u64 = 100_000;

#[derive(clap::Args, Debug)]
#[command(
    about = "Run an experiment and write its count tables",
    long_about = "Run an experiment and write counts.csv, curve.csv, manifest.json and, with --log-events, events.ndjson.\n\n\
counts.csv has one row per outcome cell with the columns\n  \
model, pair_label, n_l_x, n_l_y, n_l_z, n_r_x, n_r_y, n_r_z, sigma, tau, count, frequency, analytic\n\
with cells in the order (+,+), (+,-), (-,+), (-,-) and floats written with 17 significant digits.\n\
curve.csv has one row per table: model, pair_label, angle_deg, trials, correlator, analytic_correlator, freq_pp, freq_pm, freq_mp, freq_mm.\n\n\
Passing the manifest of an earlier run to --config-file repeats it exactly; flags override file values."
)]
pub struct Args {
    #[arg(long)]
    model: Option<ModelKind>,
    /// Relative bat angles in degrees, in [0, 180].
    #[arg(long, value_delimiter = ',', conflicts_with = "settings_file")]
    theta_deg: Vec<f64>,
    /// JSON array of {"label", "n_l", "n_r"} settings pairs.
    #[arg(long)]
    settings_file: Option<PathBuf>,
    /// Trials per settings pair, or in total with --watch-driven.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Let the watches run freely and tabulate by relative angle.
    #[arg(long, conflicts_with_all = ["theta_deg", "settings_file"])]
    watch_driven: bool,
    /// Angle bins for --watch-driven.
    #[arg(long, requires = "watch_driven")]
    bins: Option<usize>,
    /// Constant time of flight in seconds.
    #[arg(long)]
    delta_t: Option<f64>,
    /// Write the message log to events.ndjson.
    #[arg(long)]
    log_events: bool,
    /// Experiment configuration (or run manifest) in JSON.
    #[arg(long)]
    config_file: Option<PathBuf>,
}

fn assemble(args: &Args) -> Result<ExperimentConfig, Failure> {
    let settings = if args.watch_driven {
        Some(SettingsMode::WatchDriven { bins: args.bins.unwrap_or(18) })
    } else if let Some(path) = &args.settings_file {
        Some(SettingsMode::Fixed { pairs: load_settings(path)? })
    } else if !args.theta_deg.is_empty() {
        let mut pairs = Vec::new();
        for &theta in &args.theta_deg {
            if !(0.0..=180.0).contains(&theta) {
                return Err(Failure::Usage(format!("angle {theta}° outside [0, 180]")));
            }
            pairs.push(LabeledPair { label: angle_label(theta), ..LabeledPair::at_angle_deg(theta) });
        }
        Some(SettingsMode::Fixed { pairs })
    } else {
        None
    };

    let mut config = match &args.config_file {
        Some(path) => load_experiment_config(path)?,
        None => {
            let model = args.model.ok_or_else(|| Failure::usage("--model is required without --config-file"))?;
            let settings = settings.clone().ok_or_else(|| {
                Failure::usage("one of --theta-deg, --settings-file or --watch-driven is required without --config-file")
            })?;
            ExperimentConfig { settings, ..ExperimentConfig::fixed(model, Vec::new(), DEFAULT_TRIALS, 0) }
        }
    };
    if let Some(m) = args.model {
        config.model = m;
    }
    if let Some(s) = settings {
        config.settings = s;
    }
    if let Some(n) = args.trials {
        config.trials = n;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(d) = args.delta_t {
        config.delta_t = DelaySpec::Constant { seconds: d };
    }
    config.log_events |= args.log_events;
    config.validate()?;
    Ok(config)
}

fn summarize(out: &ExperimentOutput) {
    println!("{:<16} {:>10} {:>10} {:>10} {:>10} {:>12}", "pair", "(+,+)", "(+,-)", "(-,+)", "(-,-)", "correlator");
    for t in &out.tables {
        let c = singlet_core::metrics::correlator(t).map(|c| format!("{c:+.6}")).unwrap_or_else(|_| "-".into());
        println!("{:<16} {:>10} {:>10} {:>10} {:>10} {:>12}", t.label, t.counts[0], t.counts[1], t.counts[2], t.counts[3], c);
    }
}

pub fn run(args: Args) -> CmdResult {
    let config = assemble(&args)?;
    let out = run_experiment(config.clone())?;
    let mut dir = OutputDir::create(&args.out)?;
    dir.write("counts", "counts.csv", &counts_csv(&out.tables).map_err(Failure::runtime)?)?;
    dir.write("curve", "curve.csv", &curve_csv(&out.tables).map_err(Failure::runtime)?)?;
    if let Some(log) = &out.log {
        dir.write("events", "events.ndjson", &log.to_ndjson().map_err(Failure::runtime)?)?;
    }
    dir.write_manifest("simulate", &config)?;
    println!("model {} seed {} trials {} per table", config.model, config.seed, config.trials);
    summarize(&out);
    println!("wrote {}", args.out.display());
    Ok(())
}
