//! `freewill`: the measurement-dependence measure M of a model.

use std::path::PathBuf;

use serde::Serialize;
use singlet_core::metrics::free_will_m;
use singlet_core::optimizer::free_will_grid;
use singlet_core::quadrature::QuadratureSpec;
use singlet_core::{ModelKind, SettingsPair};

use crate::inputs::{load_candidates, OutputDir};
use crate::{CmdResult, Failure};

#[derive(clap::Args, Debug)]
#[command(about = "Compute M = max over candidates of the integral of |rho(u|s) - rho(u|s')|")]
pub struct Args {
    #[arg(long)]
    model: ModelKind,
    /// JSON array of [pair, pair] candidates, each pair {"n_l": [x,y,z], "n_r": [x,y,z]}.
    #[arg(long, required_unless_present = "grid", conflicts_with = "grid")]
    pairs: Option<PathBuf>,
    /// Coplanar candidates with angles j*360/K degrees.
    #[arg(long)]
    grid: Option<usize>,
    /// Quadrature tolerance for continuous densities.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    /// Compass refinement polls after the grid (continuous densities).
    #[arg(long, default_value_t = 40)]
    refine: usize,
    /// Write freewill.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct FreeWillOutput {
    model: ModelKind,
    #[serde(rename = "M")]
    m: f64,
    error: f64,
    pair: SettingsPair,
    pair_prime: SettingsPair,
    candidates: u64,
}

fn print_pair(name: &str, p: &SettingsPair) {
    let [a, b, c] = p.n_l.components();
    let [x, y, z] = p.n_r.components();
    println!("  {name}: n_L = ({a:+.9}, {b:+.9}, {c:+.9})  n_R = ({x:+.9}, {y:+.9}, {z:+.9})");
}

pub fn run(args: Args) -> CmdResult {
    if args.model == ModelKind::QM {
        return Err(Failure::usage("the QM reference has no hidden-variable density"));
    }
    if args.tolerance.is_nan() || args.tolerance <= 0.0 {
        return Err(Failure::usage("--tolerance must be positive"));
    }
    let spec = QuadratureSpec { tolerance: args.tolerance, ..QuadratureSpec::default() };
    let output = match (&args.pairs, args.grid) {
        (Some(path), _) => {
            let candidates = load_candidates(path)?;
            let fw = free_will_m(args.model, &candidates, &spec)?;
            let (s, t) = candidates[fw.best];
            FreeWillOutput { model: args.model, m: fw.m, error: fw.error, pair: s, pair_prime: t, candidates: candidates.len() as u64 }
        }
        (None, Some(k)) => {
            if k == 0 {
                return Err(Failure::usage("--grid must be positive"));
            }
            let found = free_will_grid(args.model, k, &spec, args.refine)?;
            FreeWillOutput {
                model: args.model,
                m: found.m,
                error: found.error,
                pair: found.pair,
                pair_prime: found.pair_prime,
                candidates: found.evaluations,
            }
        }
        (None, None) => return Err(Failure::usage("one of --pairs or --grid is required")),
    };

    println!("model {}: M = {} +/- {:.1e} over {} candidates", args.model, output.m, output.error, output.candidates);
    print_pair("s ", &output.pair);
    print_pair("s'", &output.pair_prime);
    if let Some(dir) = &args.out {
        let mut out = OutputDir::create(dir)?;
        out.write("freewill", "freewill.json", &(serde_json::to_string_pretty(&output).map_err(Failure::runtime)? + "\n"))?;
    }
    Ok(())
}
