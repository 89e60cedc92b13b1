//! `verify`: check simulated statistics against the analytic laws.

use std::path::PathBuf;

use singlet_core::config::{ExperimentConfig, LabeledPair};
use singlet_core::metrics::{chi_square_gof, normalization_check, two_sample_chi_square, NormalizationMethod};
use singlet_core::protocol::{cell_of, run_experiment, CountTable};
use singlet_core::quadrature::QuadratureSpec;
use singlet_core::report::{MetricRow, MetricsReport};
use singlet_core::rng::{trial_seed, RandomStream};
use singlet_core::watches::{round_trip_suite, WatchBank};
use singlet_core::{ModelKind, Outcome, SettingsPair};

use crate::inputs::OutputDir;
use crate::{CmdResult, Failure};

/// Smallest acceptable goodness-of-fit p-value.
pub const P_THRESHOLD: f64 = 1e-3;
pub const NORMALIZATION_ANGLES: [f64; 4] = [1.0, 60.0, 90.0, 179.0];
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;
pub const MONTE_CARLO_TOLERANCE: f64 = 1e-3;
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-9;
pub const CONSERVATION_TOLERANCE: f64 = 1e-12;

#[derive(clap::Args, Debug)]
#[command(about = "Verify simulated statistics against the analytic laws (exit 2 on failure)")]
pub struct Args {
    #[arg(long, value_delimiter = ',', required = true)]
    model: Vec<ModelKind>,
    /// Number of equally spaced angles from 0° to 180°.
    #[arg(long, default_value_t = 13)]
    grid: usize,
    /// Trials per angle (and per side of the B1/B2 comparison).
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo samples per normalization check.
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: usize,
    /// Random watch round trips.
    #[arg(long, default_value_t = 100_000)]
    round_trips: usize,
    /// Write report.json and report.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Shift 2% of the trials into the (+,+) cell before testing.
    #[arg(long, hide = true)]
    debug_inject_bias: bool,
}

/// Angles 0..180° in `k` equal steps.
pub fn grid_angles(k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..k).map(|i| 180.0 * i as f64 / (k - 1) as f64).collect(),
    }
}

/// Angles allowed to miss the p-value threshold: one per thirteen, at least one.
pub fn allowed_failures(k: usize) -> usize {
    k.div_ceil(13).max(1)
}

fn inject_bias(table: &mut CountTable) {
    let shift = table.total().div_ceil(50);
    let (from, to) = (cell_of(Outcome::Plus, Outcome::Minus), cell_of(Outcome::Plus, Outcome::Plus));
    let moved = shift.min(table.counts[from]);
    table.counts[from] -= moved;
    table.counts[to] += moved;
}

fn line(row: &MetricRow) {
    println!(
        "{} {:<14} {:<3} {:<28} value={:<12.6e} tol={:.1e}",
        match (row.pass, row.decisive) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "MISS",
        },
        row.metric,
        row.model,
        row.parameters,
        row.value,
        row.tolerance
    );
}

fn push(report: &mut MetricsReport, row: MetricRow) {
    line(&row);
    report.push(row);
}

pub fn run(args: Args) -> CmdResult {
    if args.grid == 0 || args.trials < 100 {
        return Err(Failure::usage("--grid must be positive and --trials at least 100"));
    }
    let angles = grid_angles(args.grid);
    let mut report = MetricsReport::new();

    for (mi, &kind) in args.model.iter().enumerate() {
        let mut misses = 0usize;
        let mut forbidden = false;
        for (i, &theta) in angles.iter().enumerate() {
            let seed = trial_seed(args.seed, (mi * angles.len() + i) as u64);
            let config = ExperimentConfig::fixed(kind, vec![LabeledPair::at_angle_deg(theta)], args.trials, seed);
            let mut table = run_experiment(config)?.tables.remove(0);
            if args.debug_inject_bias {
                inject_bias(&mut table);
            }
            let g = chi_square_gof(&table, kind)?;
            // a forbidden cell is never excused
            let pass = g.p_value > P_THRESHOLD;
            forbidden |= g.forbidden;
            misses += usize::from(!pass);
            let params = format!("theta={theta} N={} dof={}", args.trials, g.dof);
            // individual angles may miss; the per-model count below decides
            push(&mut report, MetricRow::new("chi2_p", Some(kind), params, g.p_value, P_THRESHOLD, pass).detail());
        }
        let allowed = allowed_failures(angles.len());
        let verdict = MetricRow::new(
            "chi2_angles",
            Some(kind),
            format!("misses allowed={allowed} of {}", angles.len()),
            misses as f64,
            allowed as f64,
            misses <= allowed && !forbidden,
        );
        push(&mut report, verdict);

        if kind.uses_hall_density() {
            let spec = QuadratureSpec { tolerance: 1e-9, max_panels: 4000 };
            let mut rng = RandomStream::from_seed_u64(trial_seed(args.seed, u64::MAX - mi as u64));
            for theta in NORMALIZATION_ANGLES {
                let s = SettingsPair::at_angle_deg(theta);
                let q = normalization_check(&s, NormalizationMethod::Quadrature, &spec, &mut rng)?;
                let dev = (q.value - 1.0).abs();
                push(
                    &mut report,
                    MetricRow::new("norm_quad", Some(kind), format!("theta={theta}"), dev, QUADRATURE_TOLERANCE, dev < QUADRATURE_TOLERANCE),
                );
                let mc = normalization_check(&s, NormalizationMethod::MonteCarlo { samples: args.mc_samples }, &spec, &mut rng)?;
                let dev = (mc.value - 1.0).abs();
                push(
                    &mut report,
                    MetricRow::new(
                        "norm_mc",
                        Some(kind),
                        format!("theta={theta} samples={} se={:.1e}", args.mc_samples, mc.error),
                        dev,
                        MONTE_CARLO_TOLERANCE,
                        dev < MONTE_CARLO_TOLERANCE,
                    ),
                );
            }
        }
    }

    let rt = round_trip_suite(&WatchBank::default(), args.round_trips, args.seed)?;
    let params = format!("samples={}", rt.samples);
    push(
        &mut report,
        MetricRow::new("watch_roundtrip", None, params.clone(), rt.worst_vector_error, ROUND_TRIP_TOLERANCE, rt.worst_vector_error < ROUND_TRIP_TOLERANCE),
    );
    push(
        &mut report,
        MetricRow::new(
            "phase_conservation",
            None,
            params,
            rt.worst_conservation_error,
            CONSERVATION_TOLERANCE,
            rt.worst_conservation_error < CONSERVATION_TOLERANCE,
        ),
    );

    if args.model.contains(&ModelKind::B1) && args.model.contains(&ModelKind::B2) {
        let hist = |kind: ModelKind, salt: u64| -> Result<[u64; 32], Failure> {
            let out = run_experiment(ExperimentConfig::watch_driven(kind, args.trials, trial_seed(args.seed, salt)))?;
            out.hidden_histogram.ok_or_else(|| Failure::runtime("missing hidden-variable histogram"))
        };
        let (b1, b2) = (hist(ModelKind::B1, u64::MAX - 100)?, hist(ModelKind::B2, u64::MAX - 101)?);
        let g = two_sample_chi_square(&b1, &b2)?;
        push(
            &mut report,
            MetricRow::new(
                "b1_b2_equivalence",
                None,
                format!("octant x outcome bins, N={} per side, dof={}", args.trials, g.dof),
                g.p_value,
                P_THRESHOLD,
                g.p_value > P_THRESHOLD,
            ),
        );
    }

    if let Some(dir) = &args.out {
        let mut out = OutputDir::create(dir)?;
        out.write("report_json", "report.json", &report.to_json().map_err(Failure::runtime)?)?;
        out.write("report_csv", "report.csv", &report.to_csv().map_err(Failure::runtime)?)?;
    }
    println!("verification {}: {} checks, {} failed", if report.passed { "PASS" } else { "FAIL" }, report.rows.len(), report.failures());
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verification(format!("{} checks failed", report.failures())))
    }
}
