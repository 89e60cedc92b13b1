//! Search for measurement configurations that maximize E.

use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, LabeledPair};
use crate::error::{Result, SimError};
use crate::geometry::{dot, sample_uniform_sphere, UnitVector};
use crate::metrics::{chsh, chsh_analytic, clauser_horne, correlator_analytic, density_distance, ChshConfig, CHSH_LABELS};
use crate::models::{ModelKind, SettingsPair};
use crate::protocol::run_experiment;
use crate::quadrature::QuadratureSpec;
use crate::rng::RandomStream;

/// Smallest pattern-search step, in degrees.
const MIN_STEP_DEG: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Correlators from the analytic law.
    Analytic,
    /// Correlators from simulated experiments.
    Empirical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub mode: SearchMode,
    /// Spacing of the coarse angle grid; must divide 360.
    pub resolution_deg: f64,
    /// Pattern-search polls after the grid stage (analytic mode).
    pub refinement_iterations: usize,
    /// Trials per settings pair for final empirical evaluations.
    pub trials_per_eval: u64,
    /// Trials per settings pair while screening the grid (empirical mode).
    pub screening_trials: u64,
    /// Candidates re-evaluated with `trials_per_eval` after screening.
    pub finalists: usize,
    /// Skip the random 3-D spot checks.
    pub plane_restricted: bool,
    /// Number of random 3-D configurations checked when not plane restricted.
    pub spot_checks: usize,
}

impl SearchOptions {
    pub fn analytic(resolution_deg: f64) -> Self {
        SearchOptions {
            mode: SearchMode::Analytic,
            resolution_deg,
            refinement_iterations: 400,
            trials_per_eval: 100_000,
            screening_trials: 2_000,
            finalists: 8,
            plane_restricted: true,
            spot_checks: 1000,
        }
    }

    pub fn empirical(resolution_deg: f64, trials_per_eval: u64) -> Self {
        SearchOptions { mode: SearchMode::Empirical, trials_per_eval, refinement_iterations: 0, ..Self::analytic(resolution_deg) }
    }

    /// Number of grid points per angle.
    pub fn grid_size(&self) -> Result<usize> {
        let r = self.resolution_deg;
        let k = 360.0 / r;
        if !(r.is_finite() && r > 0.0) || (k - k.round()).abs() > 1e-9 || k.round() < 1.0 {
            return Err(SimError::Config(format!("resolution {r}° does not divide 360°")));
        }
        Ok(k.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_size()?;
        if self.mode == SearchMode::Empirical && (self.trials_per_eval == 0 || self.screening_trials == 0 || self.finalists == 0) {
            return Err(SimError::Config("empirical search needs positive trial counts and at least one finalist".into()));
        }
        Ok(())
    }
}

/// Coplanar configuration by angle in degrees; the first angle is fixed at 0
/// during the search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl Angles {
    pub fn config(&self) -> ChshConfig {
        ChshConfig::coplanar_deg(self.a, self.a_prime, self.b, self.b_prime)
    }

    fn as_array(&self) -> [f64; 4] {
        [self.a, self.a_prime, self.b, self.b_prime]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpotCheck {
    pub checked: usize,
    /// Largest |E(3-D) − E(coplanar pairs at the same angles)|.
    pub max_discrepancy: f64,
    /// Largest E seen among the random 3-D configurations.
    pub max_e: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub model: ModelKind,
    pub mode: SearchMode,
    pub angles: Angles,
    pub config: ChshConfig,
    #[serde(rename = "E")]
    pub e: f64,
    pub correlators: [f64; 4],
    /// Standard error of E in empirical mode.
    pub e_std_error: Option<f64>,
    /// Smallest |dot| over the four pairs.
    pub margin: f64,
    /// Objective evaluations spent.
    pub evaluations: u64,
    pub spot_check: Option<SpotCheck>,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    angles: Angles,
    e: f64,
    margin: f64,
}

/// Larger E first, then larger margin, then lexicographically smaller angles.
fn better(x: &Candidate, y: &Candidate) -> Ordering {
    x.e.total_cmp(&y.e)
        .then(x.margin.total_cmp(&y.margin))
        .then_with(|| {
            let (p, q) = (x.angles.as_array(), y.angles.as_array());
            q.iter().zip(&p).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
        })
}

fn pick(x: Candidate, y: Candidate) -> Candidate {
    if better(&x, &y).is_ge() {
        x
    } else {
        y
    }
}

fn analytic_candidate(kind: ModelKind, angles: Angles) -> Candidate {
    let config = angles.config();
    Candidate { angles, e: chsh_analytic(kind, &config).e, margin: config.margin() }
}

/// Every grid configuration with a = 0, reduced to the best one.
fn grid_search(kind: ModelKind, k: usize, resolution: f64) -> Candidate {
    let vectors: Vec<UnitVector> = (0..k).map(|i| UnitVector::in_plane_deg(i as f64 * resolution)).collect();
    let a = vectors[0];
    (0..k)
        .into_par_iter()
        .map(|ib| {
            let b = vectors[ib];
            let mut best: Option<Candidate> = None;
            for (ia, &a_prime) in vectors.iter().enumerate() {
                for (ibp, &b_prime) in vectors.iter().enumerate() {
                    let config = ChshConfig { a, a_prime, b, b_prime };
                    let c = Candidate {
                        angles: Angles { a: 0.0, a_prime: ia as f64 * resolution, b: ib as f64 * resolution, b_prime: ibp as f64 * resolution },
                        e: chsh_analytic(kind, &config).e,
                        margin: config.margin(),
                    };
                    best = Some(match best {
                        Some(prev) => pick(prev, c),
                        None => c,
                    });
                }
            }
            best.expect("grid is non-empty")
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(pick)
        .expect("grid is non-empty")
}

/// Largest analytic E over the full coplanar grid at `resolution_deg`.
pub fn grid_maximum(kind: ModelKind, resolution_deg: f64) -> Result<(Angles, f64)> {
    let k = SearchOptions::analytic(resolution_deg).grid_size()?;
    let best = grid_search(kind, k, resolution_deg);
    Ok((best.angles, best.e))
}

/// Compass search over (a', b, b') starting from `start`.
fn pattern_search(kind: ModelKind, start: Candidate, step: f64, iterations: usize, evaluations: &mut u64) -> Candidate {
    let mut current = start;
    let mut step = step;
    for _ in 0..iterations {
        if step < MIN_STEP_DEG {
            break;
        }
        let mut improved = false;
        for axis in 1..4 {
            for dir in [1.0, -1.0] {
                let mut p = current.angles.as_array();
                p[axis] += dir * step;
                let trial = analytic_candidate(kind, Angles { a: p[0], a_prime: p[1], b: p[2], b_prime: p[3] });
                *evaluations += 1;
                if trial.e > current.e || (trial.e == current.e && trial.margin > current.margin) {
                    current = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    current
}

/// E from coplanar pairs at the same four relative angles as `config`.
pub fn coplanar_equivalent_e(kind: ModelKind, config: &ChshConfig) -> f64 {
    let correlators = config.pairs().map(|p| {
        let theta = p.cos_angle().clamp(-1.0, 1.0).acos().to_degrees();
        correlator_analytic(kind, &SettingsPair::at_angle_deg(theta))
    });
    clauser_horne(&correlators)
}

/// Random 3-D configurations: E against its coplanar-angle equivalent.
pub fn spot_check_3d(kind: ModelKind, count: usize, seed: u64) -> SpotCheck {
    let mut rng = RandomStream::from_seed_u64(seed);
    let mut check = SpotCheck { checked: 0, max_discrepancy: 0.0, max_e: 0.0 };
    for _ in 0..count {
        let mut v = || sample_uniform_sphere(&mut rng);
        let config = ChshConfig { a: v(), a_prime: v(), b: v(), b_prime: v() };
        let e = chsh_analytic(kind, &config).e;
        check.max_discrepancy = check.max_discrepancy.max((e - coplanar_equivalent_e(kind, &config)).abs());
        check.max_e = check.max_e.max(e);
        check.checked += 1;
    }
    check
}

fn empirical_pairs(config: &ChshConfig) -> Vec<LabeledPair> {
    config.pairs().iter().zip(CHSH_LABELS).map(|(p, l)| LabeledPair { label: l.to_string(), pair: *p }).collect()
}

/// E of `config` estimated from four simulated runs of `trials` each.
pub fn empirical_chsh(kind: ModelKind, config: &ChshConfig, trials: u64, seed: u64) -> Result<crate::metrics::MetricsResult> {
    let out = run_experiment(ExperimentConfig::fixed(kind, empirical_pairs(config), trials, seed))?;
    chsh(&out.tables, config)
}

/// Best configuration found for `kind` and its E.
pub fn maximize_chsh(kind: ModelKind, opts: &SearchOptions, seed: u64) -> Result<SearchResult> {
    opts.validate()?;
    let k = opts.grid_size()?;
    let res = opts.resolution_deg;
    let mut evaluations = (k * k * k) as u64;
    let (best, e_std_error, correlators) = match opts.mode {
        SearchMode::Analytic => {
            let grid_best = grid_search(kind, k, res);
            let best = pattern_search(kind, grid_best, res / 2.0, opts.refinement_iterations, &mut evaluations);
            (best, None, chsh_analytic(kind, &best.angles.config()).correlators)
        }
        SearchMode::Empirical => {
            // screen the grid with common random numbers, then re-run the finalists
            let grid: Vec<Angles> = (0..k * k * k)
                .map(|i| Angles {
                    a: 0.0,
                    a_prime: (i / (k * k)) as f64 * res,
                    b: ((i / k) % k) as f64 * res,
                    b_prime: (i % k) as f64 * res,
                })
                .collect();
            let mut screened = grid
                .iter()
                .map(|angles| {
                    let config = angles.config();
                    let r = empirical_chsh(kind, &config, opts.screening_trials, seed)?;
                    Ok(Candidate { angles: *angles, e: r.e, margin: config.margin() })
                })
                .collect::<Result<Vec<_>>>()?;
            screened.sort_by(|x, y| better(y, x));
            let mut finals = Vec::new();
            for c in screened.iter().take(opts.finalists) {
                let r = empirical_chsh(kind, &c.angles.config(), opts.trials_per_eval, seed)?;
                finals.push((Candidate { e: r.e, ..*c }, r));
            }
            evaluations += finals.len() as u64;
            let (best, r) = finals
                .into_iter()
                .reduce(|x, y| if better(&x.0, &y.0).is_ge() { x } else { y })
                .expect("at least one finalist");
            (best, r.e_std_error, r.correlators)
        }
    };
    let config = best.angles.config();
    let spot_check = (!opts.plane_restricted).then(|| spot_check_3d(kind, opts.spot_checks, seed));
    Ok(SearchResult {
        model: kind,
        mode: opts.mode,
        angles: best.angles,
        config,
        e: best.e,
        correlators,
        e_std_error,
        margin: best.margin,
        evaluations,
        spot_check,
    })
}

/// Best free-will candidate found on a coplanar grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreeWillSearch {
    #[serde(rename = "M")]
    pub m: f64,
    /// Quadrature error bound of `m` (zero for atom models).
    pub error: f64,
    pub pair: SettingsPair,
    pub pair_prime: SettingsPair,
    /// Angles in degrees of n_R, n'_L and n'_R; n_L sits at 0°.
    pub angles: [f64; 3],
    pub evaluations: u64,
}

fn free_will_at(kind: ModelKind, angles: [f64; 3], spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let s = SettingsPair::coplanar_deg(0.0, angles[0]);
    let t = SettingsPair::coplanar_deg(angles[1], angles[2]);
    let est = density_distance(kind, &s, &t, spec)?;
    Ok((est.value, est.error))
}

/// Grid search for M over coplanar candidates with angles j·360°/k, using
/// rotation invariance to pin n_L at 0°, then compass refinement for the
/// continuous densities.
pub fn free_will_grid(kind: ModelKind, k: usize, spec: &QuadratureSpec, refine_iterations: usize) -> Result<FreeWillSearch> {
    if k == 0 {
        return Err(SimError::Config("free-will grid needs at least one angle".into()));
    }
    let res = 360.0 / k as f64;
    let mut best: Option<([f64; 3], (f64, f64))> = None;
    let mut evaluations = 0u64;
    for i in 0..k * k * k {
        let angles = [(i / (k * k)) as f64 * res, ((i / k) % k) as f64 * res, (i % k) as f64 * res];
        let v = free_will_at(kind, angles, spec)?;
        evaluations += 1;
        if best.is_none_or(|(_, b)| v.0 > b.0) {
            best = Some((angles, v));
        }
    }
    let (mut angles, mut value) = best.expect("grid is non-empty");
    if kind.uses_hall_density() {
        let mut step = res / 2.0;
        for _ in 0..refine_iterations {
            if step < 1e-6 {
                break;
            }
            let mut improved = false;
            for axis in 0..3 {
                for dir in [1.0, -1.0] {
                    let mut trial = angles;
                    trial[axis] += dir * step;
                    let v = free_will_at(kind, trial, spec)?;
                    evaluations += 1;
                    if v.0 > value.0 {
                        (angles, value) = (trial, v);
                        improved = true;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
    }
    Ok(FreeWillSearch {
        m: value.0.clamp(0.0, 2.0),
        error: value.1,
        pair: SettingsPair::coplanar_deg(0.0, angles[0]),
        pair_prime: SettingsPair::coplanar_deg(angles[1], angles[2]),
        angles,
        evaluations,
    })
}

/// Signs of the four CHSH dot products.
pub fn dot_signs(config: &ChshConfig) -> [f64; 4] {
    config.pairs().map(|p| dot(&p.n_l, &p.n_r).signum())
}

/// Uniformly random coplanar angles, used by property tests and sweeps.
pub fn random_angles<R: Rng + ?Sized>(rng: &mut R) -> Angles {
    let mut deg = || rng.random::<f64>() * 360.0;
    Angles { a: deg(), a_prime: deg(), b: deg(), b_prime: deg() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::CIRELSON_BOUND;

    #[test]
    fn resolution_must_divide_360() {
        assert_eq!(SearchOptions::analytic(15.0).grid_size().unwrap(), 24);
        assert_eq!(SearchOptions::analytic(0.5).grid_size().unwrap(), 720);
        assert!(SearchOptions::analytic(7.0).grid_size().is_err());
        assert!(SearchOptions::analytic(0.0).grid_size().is_err());
        assert!(SearchOptions::analytic(-15.0).grid_size().is_err());
    }

    #[test]
    fn model_c_reaches_four_with_the_sign_pattern() {
        let r = maximize_chsh(ModelKind::C, &SearchOptions::analytic(15.0), 1).unwrap();
        assert_eq!(r.e, 4.0);
        assert_eq!(dot_signs(&r.config), [-1.0, -1.0, -1.0, 1.0]);
        assert!(r.margin > 0.5, "margin {}", r.margin);
        assert_eq!(chsh_analytic(ModelKind::C, &r.config).e, r.e);
    }

    #[test]
    fn quantum_law_reaches_cirelson() {
        for kind in [ModelKind::QM, ModelKind::A, ModelKind::B1] {
            let r = maximize_chsh(kind, &SearchOptions::analytic(5.0), 1).unwrap();
            assert!(r.e >= 2.828 - 1e-3 && r.e <= CIRELSON_BOUND + 1e-9, "{kind}: {}", r.e);
            assert!((chsh_analytic(kind, &r.config).e - r.e).abs() < 1e-12);
        }
        // the 40° grid misses the optimum until refinement
        let r = maximize_chsh(ModelKind::QM, &SearchOptions::analytic(40.0), 1).unwrap();
        assert!((r.e - CIRELSON_BOUND).abs() < 1e-9, "{}", r.e);
    }

    #[test]
    fn spot_checks_match_coplanar_equivalents() {
        let mut opts = SearchOptions::analytic(30.0);
        opts.plane_restricted = false;
        for kind in [ModelKind::QM, ModelKind::C] {
            let r = maximize_chsh(kind, &opts, 3).unwrap();
            let s = r.spot_check.unwrap();
            assert_eq!(s.checked, 1000);
            assert!(s.max_discrepancy < 1e-12, "{kind}: {}", s.max_discrepancy);
            assert!(s.max_e <= r.e + 1e-9);
        }
    }

    #[test]
    fn free_will_grid_examples() {
        let spec = QuadratureSpec { tolerance: 1e-8, max_panels: 4000 };
        let a = free_will_grid(ModelKind::A, 8, &spec, 0).unwrap();
        assert_eq!(a.m, 2.0);
        let b = free_will_grid(ModelKind::B1, 8, &spec, 20).unwrap();
        assert!(b.m > 0.0 && b.m < 2.0, "{}", b.m);
        let grid_only = free_will_grid(ModelKind::B1, 8, &spec, 0).unwrap();
        assert!(b.m >= grid_only.m);
        let direct = density_distance(ModelKind::B2, &b.pair, &b.pair_prime, &spec).unwrap();
        assert!((direct.value - b.m).abs() < 1e-7);
    }

    #[test]
    fn empirical_model_c() {
        let opts = SearchOptions { screening_trials: 200, finalists: 2, ..SearchOptions::empirical(90.0, 20_000) };
        let r = maximize_chsh(ModelKind::C, &opts, 5).unwrap();
        assert!((r.e - 4.0).abs() < 0.02, "{}", r.e);
        let again = maximize_chsh(ModelKind::C, &opts, 5).unwrap();
        assert_eq!(r, again);
    }
}
