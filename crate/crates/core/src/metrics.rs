//! Statistics over count tables and hidden-variable densities.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{Result, SimError};
use crate::geometry::{dot, sample_uniform_sphere, sign_of, UnitVector};
use crate::models::{atoms, hall_density, joint_table, ModelKind, SettingsPair, CELLS};
use crate::protocol::CountTable;
use crate::quadrature::{integrate_sphere_split, Estimate, Frame, QuadratureSpec};

/// Bell limit for local models with measurement independence.
pub const BELL_LIMIT: f64 = 2.0;
/// Largest value quantum mechanics allows, 2√2.
pub const CIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;
/// Algebraic maximum of the Clauser–Horne combination.
pub const ALGEBRAIC_MAX: f64 = 4.0;
/// Minimum expected count per cell before cells are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

/// Expectation of στ: Σ στ·count/N.
pub fn correlator(table: &CountTable) -> Result<f64> {
    let n = table.total();
    if n == 0 {
        return Err(SimError::EmptyTable);
    }
    let weighted: i64 = CELLS
        .iter()
        .zip(table.counts)
        .map(|((s, t), c)| i64::from(s.value() * t.value()) * c as i64)
        .sum();
    Ok(weighted as f64 / n as f64)
}

/// Correlator of the analytic law: −n_L·n_R, or −sgn(n_L·n_R) for model C.
pub fn correlator_analytic(kind: ModelKind, s: &SettingsPair) -> f64 {
    CELLS
        .iter()
        .zip(joint_table(kind, s))
        .map(|((a, b), p)| a.as_f64() * b.as_f64() * p)
        .sum()
}

/// The four bat orientations of a Clauser–Horne measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshConfig {
    pub a: UnitVector,
    pub a_prime: UnitVector,
    pub b: UnitVector,
    pub b_prime: UnitVector,
}

/// Labels of the four settings pairs, in correlator order.
pub const CHSH_LABELS: [&str; 4] = ["a_b", "a'_b", "a_b'", "a'_b'"];

impl ChshConfig {
    /// Coplanar configuration from four angles in degrees.
    pub fn coplanar_deg(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Self {
        ChshConfig {
            a: UnitVector::in_plane_deg(a),
            a_prime: UnitVector::in_plane_deg(a_prime),
            b: UnitVector::in_plane_deg(b),
            b_prime: UnitVector::in_plane_deg(b_prime),
        }
    }

    /// (a,b), (a',b), (a,b'), (a',b').
    pub fn pairs(&self) -> [SettingsPair; 4] {
        [
            SettingsPair::new(self.a, self.b),
            SettingsPair::new(self.a_prime, self.b),
            SettingsPair::new(self.a, self.b_prime),
            SettingsPair::new(self.a_prime, self.b_prime),
        ]
    }

    /// Smallest |dot| over the four measured pairs.
    pub fn margin(&self) -> f64 {
        self.pairs().iter().map(|p| dot(&p.n_l, &p.n_r).abs()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsResult {
    /// C(a,b), C(a',b), C(a,b'), C(a',b').
    pub correlators: [f64; 4],
    #[serde(rename = "E")]
    pub e: f64,
    /// Standard error of E when the correlators are estimates.
    pub e_std_error: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub chi2: Option<f64>,
    pub p_value: Option<f64>,
    pub dof: Option<usize>,
}

impl MetricsResult {
    fn from_correlators(correlators: [f64; 4], e_std_error: Option<f64>) -> Self {
        MetricsResult {
            correlators,
            e: clauser_horne(&correlators),
            e_std_error,
            m: None,
            chi2: None,
            p_value: None,
            dof: None,
        }
    }
}

/// |C₁ + C₂ + C₃ − C₄|.
pub fn clauser_horne(c: &[f64; 4]) -> f64 {
    (c[0] + c[1] + c[2] - c[3]).abs()
}

/// E from four measured tables labelled as in [`CHSH_LABELS`] and matching `config`.
pub fn chsh(tables: &[CountTable], config: &ChshConfig) -> Result<MetricsResult> {
    if tables.len() != 4 {
        return Err(SimError::MismatchedTables(format!("expected 4 tables, got {}", tables.len())));
    }
    let mut correlators = [0.0; 4];
    let mut variance = 0.0;
    for (i, (table, pair)) in tables.iter().zip(config.pairs()).enumerate() {
        if table.label != CHSH_LABELS[i] {
            return Err(SimError::MismatchedTables(format!(
                "table {i} is labelled '{}', expected '{}'",
                table.label, CHSH_LABELS[i]
            )));
        }
        if let Some(p) = &table.pair {
            if p.n_l.max_abs_diff(&pair.n_l) > 1e-12 || p.n_r.max_abs_diff(&pair.n_r) > 1e-12 {
                return Err(SimError::MismatchedTables(format!("table '{}' settings differ from the configuration", table.label)));
            }
        }
        let c = correlator(table)?;
        correlators[i] = c;
        variance += (1.0 - c * c) / table.total() as f64;
    }
    Ok(MetricsResult::from_correlators(correlators, Some(variance.sqrt())))
}

/// E from the analytic law of `kind`.
pub fn chsh_analytic(kind: ModelKind, config: &ChshConfig) -> MetricsResult {
    MetricsResult::from_correlators(config.pairs().map(|p| correlator_analytic(kind, &p)), None)
}

/// Measurement-dependence of a model over candidate pairs of settings pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreeWill {
    #[serde(rename = "M")]
    pub m: f64,
    /// Index of the maximizing candidate.
    pub best: usize,
    /// Quadrature error bound of the maximizing value (zero for atom models).
    pub error: f64,
}

/// ∫|ρ(u|s) − ρ(u|s')| du for one candidate. The partner spin is −u in every
/// model, so the density over (u, v) collapses to a density over u.
pub fn density_distance(kind: ModelKind, s: &SettingsPair, s_prime: &SettingsPair, spec: &QuadratureSpec) -> Result<Estimate> {
    match kind {
        ModelKind::A | ModelKind::C => Ok(Estimate { value: atom_distance(s, s_prime), error: 0.0, converged: true }),
        ModelKind::B1 | ModelKind::B2 => {
            let vectors = [s.n_l, s.n_r, s_prime.n_l, s_prime.n_r];
            hall_integral(|u| (hall_density(u, s).value - hall_density(u, s_prime).value).abs(), &vectors, spec)
        }
        ModelKind::QM => Err(SimError::Unsupported("the QM reference has no hidden-variable density".into())),
    }
}

/// Total variation between the atom sets of two settings pairs, merging
/// coincident directions.
fn atom_distance(s: &SettingsPair, s_prime: &SettingsPair) -> f64 {
    let mut merged: Vec<(UnitVector, f64)> = Vec::with_capacity(8);
    let mut add = |u: UnitVector, w: f64| {
        if let Some(slot) = merged.iter_mut().find(|(v, _)| v.max_abs_diff(&u) <= 1e-12) {
            slot.1 += w;
        } else {
            merged.push((u, w));
        }
    };
    for (h, w) in atoms(s) {
        add(h.u, w);
    }
    for (h, w) in atoms(s_prime) {
        add(h.u, -w);
    }
    merged.iter().map(|(_, w)| w.abs()).sum()
}

/// Normal of a plane holding every vector, if there is one.
pub fn common_normal(vectors: &[UnitVector]) -> Option<UnitVector> {
    let first = vectors.first()?;
    let other = vectors.iter().find(|v| dot(first, v).abs() < 1.0 - 1e-9)?;
    let normal = first.normal_with(other);
    vectors.iter().all(|v| dot(&normal, v).abs() < 1e-12).then_some(normal)
}

/// Sphere integral of a Hall-type integrand whose jumps lie on the great
/// circles orthogonal to `vectors`. The polar axis is chosen so that as many
/// of those circles as possible become meridians, and the azimuth is split
/// along them.
fn hall_integral<F: Fn(&UnitVector) -> f64>(f: F, vectors: &[UnitVector], spec: &QuadratureSpec) -> Result<Estimate> {
    let axis = common_normal(vectors).unwrap_or_else(|| vectors[0].normal_with(&vectors[1]));
    let frame = Frame::new(axis);
    let breaks: Vec<f64> = vectors
        .iter()
        .filter(|v| dot(&axis, v).abs() < 1e-12)
        .flat_map(|v| {
            let phi = frame.azimuth(v);
            [phi + FRAC_PI_2, phi - FRAC_PI_2]
        })
        .collect();
    let est = integrate_sphere_split(f, axis, &breaks, spec);
    if est.converged {
        Ok(est)
    } else {
        Err(SimError::Quadrature { error: est.error, tolerance: spec.tolerance })
    }
}

/// M = max over candidates of ∫|ρ(u|s) − ρ(u|s')| du, clamped to [0, 2].
pub fn free_will_m(kind: ModelKind, candidates: &[(SettingsPair, SettingsPair)], spec: &QuadratureSpec) -> Result<FreeWill> {
    if candidates.is_empty() {
        return Err(SimError::Config("no candidate settings pairs".into()));
    }
    let mut best = FreeWill { m: f64::NEG_INFINITY, best: 0, error: 0.0 };
    for (i, (s, t)) in candidates.iter().enumerate() {
        let est = density_distance(kind, s, t, spec)?;
        if est.value > best.m {
            best = FreeWill { m: est.value, best: i, error: est.error };
        }
    }
    best.m = best.m.clamp(0.0, 2.0);
    Ok(best)
}

/// Pearson goodness of fit of a count table against its analytic law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    /// A cell the law forbids was observed.
    pub forbidden: bool,
    /// Low-expectation cells were pooled.
    pub pooled: bool,
}

/// Upper tail of the chi-square distribution, Q(dof/2, x/2).
pub fn chi_square_sf(x: f64, dof: usize) -> f64 {
    if dof == 0 || x <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, x / 2.0)
}

fn pearson(observed: &[f64], expected: &[f64]) -> f64 {
    observed.iter().zip(expected).map(|(o, e)| (o - e) * (o - e) / e).sum()
}

/// Chi-square test of `table` against the law of `kind` at its settings.
///
/// Cells with zero analytic mass are excluded and must be empty; any count
/// there is a hard mismatch reported as p = 0. Cells expecting fewer than five
/// counts are pooled with the next smallest.
pub fn chi_square_gof(table: &CountTable, kind: ModelKind) -> Result<GofResult> {
    let n = table.total();
    if n < 100 {
        return Err(SimError::Unsupported(format!("goodness of fit needs at least 100 trials, got {n}")));
    }
    let law = match &table.pair {
        Some(p) => joint_table(kind, p),
        None => table.analytic,
    };
    let mut forbidden = false;
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for (p, c) in law.iter().zip(table.counts) {
        if *p <= 0.0 {
            forbidden |= c > 0;
        } else {
            groups.push((c as f64, p * n as f64));
        }
    }
    if forbidden {
        return Ok(GofResult { statistic: f64::INFINITY, p_value: 0.0, dof: 0, forbidden, pooled: false });
    }
    let mut pooled = false;
    groups.sort_by(|a, b| a.1.total_cmp(&b.1));
    while groups.len() > 1 && groups[0].1 < MIN_EXPECTED {
        let (o, e) = groups.remove(0);
        groups[0].0 += o;
        groups[0].1 += e;
        groups.sort_by(|a, b| a.1.total_cmp(&b.1));
        pooled = true;
    }
    let (obs, exp): (Vec<f64>, Vec<f64>) = groups.into_iter().unzip();
    let dof = obs.len().saturating_sub(1);
    let statistic = if dof == 0 { 0.0 } else { pearson(&obs, &exp) };
    Ok(GofResult { statistic, p_value: chi_square_sf(statistic, dof), dof, forbidden, pooled })
}

/// Two-sample chi-square homogeneity test on binned counts.
pub fn two_sample_chi_square(a: &[u64], b: &[u64]) -> Result<GofResult> {
    if a.len() != b.len() {
        return Err(SimError::MismatchedTables("histograms differ in length".into()));
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(SimError::EmptyTable);
    }
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut statistic = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        let d = ka * x as f64 - kb * y as f64;
        statistic += d * d / (x + y) as f64;
        bins += 1;
    }
    let dof = bins.saturating_sub(1);
    Ok(GofResult { statistic, p_value: chi_square_sf(statistic, dof), dof, forbidden: false, pooled: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMethod {
    Quadrature,
    MonteCarlo { samples: usize },
}

/// ∫ Π(u | s) du over the sphere with an error estimate (quadrature error
/// bound, or one standard error for Monte Carlo).
pub fn normalization_check<R: Rng + ?Sized>(
    s: &SettingsPair,
    method: NormalizationMethod,
    spec: &QuadratureSpec,
    rng: &mut R,
) -> Result<Estimate> {
    match method {
        NormalizationMethod::Quadrature => {
            hall_integral(|u| hall_density(u, s).value, &[s.n_l, s.n_r], spec)
        }
        NormalizationMethod::MonteCarlo { samples } => {
            if samples < 2 {
                return Err(SimError::Config("Monte Carlo needs at least two samples".into()));
            }
            let (mut sum, mut sum2) = (0.0, 0.0);
            for _ in 0..samples {
                let w = 4.0 * PI * hall_density(&sample_uniform_sphere(rng), s).value;
                sum += w;
                sum2 += w * w;
            }
            let n = samples as f64;
            let mean = sum / n;
            let error = ((sum2 / n - mean * mean).max(0.0) / (n - 1.0)).sqrt();
            Ok(Estimate { value: mean, error, converged: true })
        }
    }
}

/// Sign pattern of the four CHSH dot products.
pub fn sign_pattern(config: &ChshConfig) -> [i8; 4] {
    config.pairs().map(|p| sign_of(p.cos_angle()).value())
}
