//! `chsh`: Clauser–Horne parameter of a configuration, or its maximum.

use std::path::PathBuf;

use serde::Serialize;
use singlet_core::metrics::{chsh_analytic, ChshConfig, MetricsResult, ALGEBRAIC_MAX, BELL_LIMIT, CIRELSON_BOUND};
use singlet_core::optimizer::{empirical_chsh, maximize_chsh, SearchMode, SearchOptions, SearchResult};
use singlet_core::ModelKind;

use crate::inputs::{load_chsh_config, OutputDir};
use crate::{CmdResult, Failure};

#[derive(clap::Args, Debug)]
#[command(about = "Evaluate or maximize E = |C(a,b) + C(a',b) + C(a,b') - C(a',b')|")]
pub struct Args {
    #[arg(long)]
    model: ModelKind,
    /// JSON with vectors "a", "a_prime", "b", "b_prime" or "angles_deg": [a, a', b, b'].
    #[arg(long, required_unless_present = "optimize", conflicts_with = "optimize")]
    config: Option<PathBuf>,
    /// Search coplanar configurations for the largest E.
    #[arg(long)]
    optimize: bool,
    #[arg(long, value_enum, default_value_t = Mode::Analytic)]
    mode: Mode,
    /// Coarse grid spacing in degrees (must divide 360); defaults to 5 analytic, 45 empirical.
    #[arg(long)]
    resolution: Option<f64>,
    /// Pattern-search polls after the grid (analytic mode).
    #[arg(long, default_value_t = 400)]
    iterations: usize,
    /// Trials per settings pair for empirical evaluations.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Trials per settings pair while screening the grid (empirical optimization).
    #[arg(long, default_value_t = 2_000)]
    screening_trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also spot-check random three-dimensional configurations.
    #[arg(long)]
    full_sphere: bool,
    /// Write chsh.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Analytic,
    Empirical,
}

#[derive(Serialize)]
struct ChshOutput<'a> {
    model: ModelKind,
    config: &'a ChshConfig,
    result: &'a MetricsResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    search: Option<&'a SearchResult>,
}

fn print_vector(name: &str, v: &singlet_core::UnitVector) {
    let [x, y, z] = v.components();
    println!("  {name:<3} = ({x:+.9}, {y:+.9}, {z:+.9})");
}

fn verdict(e: f64, bound: f64) -> &'static str {
    if e > bound + 1e-9 {
        "exceeded"
    } else if (e - bound).abs() <= 1e-9 {
        "reached"
    } else {
        "not reached"
    }
}

pub fn run(args: Args) -> CmdResult {
    let mode = match args.mode {
        Mode::Analytic => SearchMode::Analytic,
        Mode::Empirical => SearchMode::Empirical,
    };
    let (config, result, search) = if args.optimize {
        let resolution = args.resolution.unwrap_or(if mode == SearchMode::Analytic { 5.0 } else { 45.0 });
        let opts = SearchOptions {
            mode,
            resolution_deg: resolution,
            refinement_iterations: args.iterations,
            trials_per_eval: args.trials,
            screening_trials: args.screening_trials,
            plane_restricted: !args.full_sphere,
            ..SearchOptions::analytic(resolution)
        };
        let found = maximize_chsh(args.model, &opts, args.seed)?;
        let result = MetricsResult {
            correlators: found.correlators,
            e: found.e,
            e_std_error: found.e_std_error,
            m: None,
            chi2: None,
            p_value: None,
            dof: None,
        };
        (found.config, result, Some(found))
    } else {
        let path = args.config.as_ref().expect("clap requires --config without --optimize");
        let config = load_chsh_config(path)?;
        let result = match mode {
            SearchMode::Analytic => chsh_analytic(args.model, &config),
            SearchMode::Empirical => empirical_chsh(args.model, &config, args.trials, args.seed)?,
        };
        (config, result, None)
    };

    println!("model {} ({} mode)", args.model, if mode == SearchMode::Analytic { "analytic" } else { "empirical" });
    print_vector("a", &config.a);
    print_vector("a'", &config.a_prime);
    print_vector("b", &config.b);
    print_vector("b'", &config.b_prime);
    if let Some(s) = &search {
        let a = s.angles;
        println!("  angles (deg): a={} a'={} b={} b'={}", a.a, a.a_prime, a.b, a.b_prime);
        println!("  evaluations: {}  margin: {:.6}", s.evaluations, s.margin);
        if let Some(spot) = &s.spot_check {
            println!(
                "  3-D spot checks: {}  max |E - coplanar E| = {:.3e}  max E = {:.12}",
                spot.checked, spot.max_discrepancy, spot.max_e
            );
        }
    }
    for (name, c) in ["C(a,b)", "C(a',b)", "C(a,b')", "C(a',b')"].iter().zip(result.correlators) {
        println!("  {name:<9} = {c:+.12}");
    }
    match result.e_std_error {
        Some(se) => println!("E = {:.12} +/- {:.2e}", result.e, se),
        None => println!("E = {:.12}", result.e),
    }
    println!("Bell limit 2: {}", verdict(result.e, BELL_LIMIT));
    println!("Cirel'son bound 2*sqrt(2) = {CIRELSON_BOUND:.12}: {}", verdict(result.e, CIRELSON_BOUND));
    println!("algebraic maximum 4: {}", verdict(result.e, ALGEBRAIC_MAX));

    if let Some(dir) = &args.out {
        let mut out = OutputDir::create(dir)?;
        let doc = ChshOutput { model: args.model, config: &config, result: &result, search: search.as_ref() };
        out.write("chsh", "chsh.json", &(serde_json::to_string_pretty(&doc).map_err(Failure::runtime)? + "\n"))?;
    }
    Ok(())
}
