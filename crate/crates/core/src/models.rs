//! Hidden-variable laws for the spin singlet.
//!
//! * `A`: the pitched spin is one of the four atoms ±n_L, ±n_R (one watch
//!   chosen by a coin, direction by a second coin) and each batter answers
//!   with the linear response (1 + σ n·u)/2.
//! * `B1`/`B2`: Hall's measurement-dependent density with deterministic
//!   responses, sampled either on the pitcher side (u given the settings) or on
//!   the batter side (settings given a uniform u).
//! * `C`: the atoms of `A` with the deterministic responses of `B`, which gives
//!   correlator −sgn(n_L·n_R).
//! * `QM`: the singlet law itself, sampled directly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::{dot, sample_uniform_sphere, sign_of, Outcome, UnitVector};
use crate::watches::Coin;

/// Proposal budget for every rejection sampler.
pub const MAX_PROPOSALS: usize = 1_000_000;

/// Inflation applied to the numerically located maximum of the Hall density.
pub const BOUND_INFLATION: f64 = 1.01;

/// Bat orientations of the left and right batter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingsPair {
    pub n_l: UnitVector,
    pub n_r: UnitVector,
}

impl SettingsPair {
    pub fn new(n_l: UnitVector, n_r: UnitVector) -> Self {
        SettingsPair { n_l, n_r }
    }

    /// Coplanar pair at `angle_l_deg` and `angle_r_deg` in the x–y plane.
    pub fn coplanar_deg(angle_l_deg: f64, angle_r_deg: f64) -> Self {
        SettingsPair {
            n_l: UnitVector::in_plane_deg(angle_l_deg),
            n_r: UnitVector::in_plane_deg(angle_r_deg),
        }
    }

    /// Left bat along +x, right bat rotated by `theta_deg` in the x–y plane.
    pub fn at_angle_deg(theta_deg: f64) -> Self {
        Self::coplanar_deg(0.0, theta_deg)
    }

    pub fn cos_angle(&self) -> f64 {
        dot(&self.n_l, &self.n_r)
    }

    /// The watch-selected direction n_w, with H ≡ right and T ≡ left.
    pub fn for_coin(&self, coin: Coin) -> UnitVector {
        match coin {
            Coin::H => self.n_r,
            Coin::T => self.n_l,
        }
    }
}

/// The pitched pair: left ball spins along `u`, the right one along −u.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    pub u: UnitVector,
}

impl HiddenState {
    pub fn left(&self) -> UnitVector {
        self.u
    }

    pub fn right(&self) -> UnitVector {
        -self.u
    }
}

/// Pitcher coins: `w` picks the watch, `d` the direction (H ≡ +1, T ≡ −1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoinPair {
    pub w: Coin,
    pub d: Coin,
}

impl CoinPair {
    pub const ALL: [CoinPair; 4] = [
        CoinPair { w: Coin::H, d: Coin::H },
        CoinPair { w: Coin::H, d: Coin::T },
        CoinPair { w: Coin::T, d: Coin::H },
        CoinPair { w: Coin::T, d: Coin::T },
    ];

    pub fn flip<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let coin = |b: bool| if b { Coin::H } else { Coin::T };
        CoinPair { w: coin(rng.random()), d: coin(rng.random()) }
    }

    pub fn direction_sign(&self) -> f64 {
        match self.d {
            Coin::H => 1.0,
            Coin::T => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    A,
    B1,
    B2,
    C,
    QM,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::A, ModelKind::B1, ModelKind::B2, ModelKind::C, ModelKind::QM];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::A => "A",
            ModelKind::B1 => "B1",
            ModelKind::B2 => "B2",
            ModelKind::C => "C",
            ModelKind::QM => "QM",
        }
    }

    /// Whether the pitcher draws one of the four coin-selected atoms.
    pub fn uses_atoms(self) -> bool {
        matches!(self, ModelKind::A | ModelKind::C)
    }

    pub fn uses_hall_density(self) -> bool {
        matches!(self, ModelKind::B1 | ModelKind::B2)
    }

    /// Whether the analytic correlator is −n_L·n_R.
    pub fn is_quantum_law(self) -> bool {
        !matches!(self, ModelKind::C)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ModelKind::A),
            "B1" => Ok(ModelKind::B1),
            "B2" => Ok(ModelKind::B2),
            "C" => Ok(ModelKind::C),
            "QM" => Ok(ModelKind::QM),
            other => Err(SimError::Config(format!("unknown model '{other}'"))),
        }
    }
}

/// Value of the Hall density together with the argument it was evaluated at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityEval {
    pub f: f64,
    pub value: f64,
}

/// Probability that a ball spinning along `u` hit by a bat along `n` gives `sigma`.
pub fn response_linear(sigma: Outcome, n: &UnitVector, u: &UnitVector) -> f64 {
    0.5 * (1.0 + sigma.as_f64() * dot(n, u))
}

pub fn response_deterministic(n: &UnitVector, u: &UnitVector) -> Outcome {
    sign_of(dot(u, n))
}

/// The atom selected by the pitcher's coins: u = d·n_w.
pub fn sample_hidden_a(s: &SettingsPair, coins: CoinPair) -> HiddenState {
    let n_w = s.for_coin(coins.w);
    HiddenState { u: if coins.d == Coin::H { n_w } else { -n_w } }
}

/// The four atoms of model A, each carrying weight 1/4.
pub fn atoms(s: &SettingsPair) -> [(HiddenState, f64); 4] {
    CoinPair::ALL.map(|c| (sample_hidden_a(s, c), 0.25))
}

/// Exact joint law of the atom models by enumeration, indexed `[σ][τ]` with 0 ≡ +1.
pub fn enumerate_atom_joint(kind: ModelKind, s: &SettingsPair) -> Result<[[f64; 2]; 2]> {
    let mut table = [[0.0; 2]; 2];
    for (hidden, weight) in atoms(s) {
        for sigma in Outcome::BOTH {
            for tau in Outcome::BOTH {
                let p = match kind {
                    ModelKind::A => {
                        response_linear(sigma, &s.n_l, &hidden.left()) * response_linear(tau, &s.n_r, &hidden.right())
                    }
                    ModelKind::C => {
                        let hit = response_deterministic(&s.n_l, &hidden.left()) == sigma
                            && response_deterministic(&s.n_r, &hidden.right()) == tau;
                        if hit {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    other => return Err(SimError::Unsupported(format!("model {other} has no atoms"))),
                };
                table[cell_index(sigma)][cell_index(tau)] += weight * p;
            }
        }
    }
    Ok(table)
}

pub(crate) fn cell_index(o: Outcome) -> usize {
    match o {
        Outcome::Plus => 0,
        Outcome::Minus => 1,
    }
}

/// sgn(u·n_L)·sgn(v·n_R)·(n_L·n_R) with v = −u.
pub fn hall_f(u: &UnitVector, s: &SettingsPair) -> f64 {
    let a = sign_of(dot(u, &s.n_l)).as_f64();
    let b = sign_of(dot(&-*u, &s.n_r)).as_f64();
    a * b * s.cos_angle()
}

/// (1 − f)/(8 arccos f) with its limits at f = ±1.
pub fn hall_g(f: f64) -> f64 {
    if f >= 1.0 {
        0.0
    } else if f <= -1.0 {
        1.0 / (4.0 * PI)
    } else {
        (1.0 - f) / (8.0 * f.acos())
    }
}

/// Density of u per steradian given the settings.
pub fn hall_density(u: &UnitVector, s: &SettingsPair) -> DensityEval {
    let f = hall_f(u, s);
    DensityEval { f, value: hall_g(f) }
}

/// Maximizes a unimodal `g` on [lo, hi] by golden-section search.
pub fn golden_section_max<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    while hi - lo > tol {
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + ratio * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - ratio * (hi - lo);
            g1 = g(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, g(x))
}

/// Location and value of the maximum of [`hall_g`] on [−1, 1].
pub fn hall_g_maximum() -> (f64, f64) {
    static MAX: OnceLock<(f64, f64)> = OnceLock::new();
    *MAX.get_or_init(|| {
        let (x, v) = golden_section_max(hall_g, -1.0, 1.0, 1e-10);
        // endpoints are not interior maxima but the bound has to cover them
        if v >= hall_g(-1.0) {
            (x, v)
        } else {
            (-1.0, hall_g(-1.0))
        }
    })
}

/// Envelope used by the rejection samplers: the maximum of `hall_g` inflated by 1%.
pub fn rejection_bound() -> f64 {
    hall_g_maximum().1 * BOUND_INFLATION
}

/// Result of a rejection sampler with the number of proposals it consumed.
#[derive(Clone, Copy, Debug)]
pub struct Sampled<T> {
    pub value: T,
    pub proposals: usize,
}

/// Draws u from the Hall density given the settings.
pub fn sample_hidden_b1<R: Rng + ?Sized>(s: &SettingsPair, rng: &mut R) -> Result<HiddenState> {
    sample_hidden_b1_counted(s, rng).map(|r| r.value)
}

pub fn sample_hidden_b1_counted<R: Rng + ?Sized>(s: &SettingsPair, rng: &mut R) -> Result<Sampled<HiddenState>> {
    let bound = rejection_bound();
    for proposals in 1..=MAX_PROPOSALS {
        let u = sample_uniform_sphere(rng);
        let value = hall_density(&u, s).value;
        if rng.random::<f64>() * bound < value {
            return Ok(Sampled { value: HiddenState { u }, proposals });
        }
    }
    Err(SimError::SamplerFailure(MAX_PROPOSALS))
}

/// Density of the settings pair given u: Π(u | n_L, n_R)/(4π) on S² × S².
pub fn settings_density_b2(u: &UnitVector, s: &SettingsPair) -> f64 {
    hall_density(u, s).value / (4.0 * PI)
}

/// Draws both settings given the spin, proposing uniformly on S² × S².
pub fn sample_settings_b2<R: Rng + ?Sized>(u: &UnitVector, rng: &mut R) -> Result<SettingsPair> {
    let bound = rejection_bound();
    for _ in 0..MAX_PROPOSALS {
        let s = SettingsPair::new(sample_uniform_sphere(rng), sample_uniform_sphere(rng));
        if rng.random::<f64>() * bound < hall_density(u, &s).value {
            return Ok(s);
        }
    }
    Err(SimError::SamplerFailure(MAX_PROPOSALS))
}

/// Draws both settings given the spin, conditioned on n_L·n_R = `cos_angle`.
///
/// Proposals are uniform over pairs at that relative angle (n_L uniform, n_R
/// uniform on the cone around it); acceptance is proportional to the same
/// density as [`sample_settings_b2`].
pub fn sample_settings_b2_at_angle<R: Rng + ?Sized>(u: &UnitVector, cos_angle: f64, rng: &mut R) -> Result<SettingsPair> {
    let bound = rejection_bound();
    let cos_angle = cos_angle.clamp(-1.0, 1.0);
    let sin_angle = (1.0 - cos_angle * cos_angle).max(0.0).sqrt();
    for _ in 0..MAX_PROPOSALS {
        let n_l = sample_uniform_sphere(rng);
        let e1 = n_l.any_perpendicular();
        let e2 = n_l.normal_with(&e1);
        let psi = std::f64::consts::TAU * rng.random::<f64>();
        let (sp, cp) = psi.sin_cos();
        let c = |i: usize| {
            cos_angle * n_l.components()[i] + sin_angle * (cp * e1.components()[i] + sp * e2.components()[i])
        };
        let n_r = UnitVector::normalized(c(0), c(1), c(2))?;
        let s = SettingsPair::new(n_l, n_r);
        if rng.random::<f64>() * bound < hall_density(u, &s).value {
            return Ok(s);
        }
    }
    Err(SimError::SamplerFailure(MAX_PROPOSALS))
}

/// Closed-form joint probability of (σ, τ).
pub fn joint_analytic(kind: ModelKind, sigma: Outcome, tau: Outcome, s: &SettingsPair) -> f64 {
    let c = s.cos_angle();
    let corr = if kind == ModelKind::C { sign_of(c).as_f64() } else { c };
    0.25 * (1.0 - sigma.as_f64() * tau.as_f64() * corr)
}

/// The four analytic cell probabilities in the order (+,+), (+,−), (−,+), (−,−).
pub fn joint_table(kind: ModelKind, s: &SettingsPair) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (i, (sigma, tau)) in CELLS.iter().enumerate() {
        out[i] = joint_analytic(kind, *sigma, *tau, s);
    }
    out
}

/// Cell order used by count tables and CSV output.
pub const CELLS: [(Outcome, Outcome); 4] = [
    (Outcome::Plus, Outcome::Plus),
    (Outcome::Plus, Outcome::Minus),
    (Outcome::Minus, Outcome::Plus),
    (Outcome::Minus, Outcome::Minus),
];

/// Direct categorical draw of (σ, τ) from the singlet law.
pub fn sample_qm_outcomes<R: Rng + ?Sized>(s: &SettingsPair, rng: &mut R) -> (Outcome, Outcome) {
    let probs = joint_table(ModelKind::QM, s);
    let x = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if x < acc {
            return CELLS[i];
        }
    }
    // x landed in the rounding gap above the cumulative sum
    let last = probs.iter().rposition(|p| *p > 0.0).unwrap_or(3);
    CELLS[last]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    const THETAS: [f64; 13] = [0., 15., 30., 45., 60., 75., 90., 105., 120., 135., 150., 165., 180.];

    #[test]
    fn linear_response_examples() {
        let u = UnitVector::normalized(1.0, 2.0, 2.0).unwrap();
        assert!((response_linear(Outcome::Plus, &u, &u) - 1.0).abs() < 1e-15);
        assert!(response_linear(Outcome::Minus, &u, &u).abs() < 1e-15);
        assert_eq!(response_linear(Outcome::Plus, &UnitVector::X, &UnitVector::Z), 0.5);
    }

    #[test]
    fn deterministic_response_examples() {
        let n = UnitVector::normalized(-1.0, 0.5, 2.0).unwrap();
        assert_eq!(response_deterministic(&n, &n), Outcome::Plus);
        assert_eq!(response_deterministic(&n, &-n), Outcome::Minus);
        assert_eq!(response_deterministic(&UnitVector::X, &UnitVector::Y), Outcome::Plus);
    }

    #[test]
    fn atom_selection() {
        let s = SettingsPair::coplanar_deg(10.0, 70.0);
        assert_eq!(sample_hidden_a(&s, CoinPair { w: Coin::H, d: Coin::H }).u, s.n_r);
        assert_eq!(sample_hidden_a(&s, CoinPair { w: Coin::T, d: Coin::T }).u, -s.n_l);
        assert_eq!(sample_hidden_a(&s, CoinPair { w: Coin::H, d: Coin::T }).right(), s.n_r);
    }

    #[test]
    fn fair_coins_hit_each_atom_a_quarter_of_the_time() {
        let mut rng = RandomStream::from_seed_u64(42);
        let n = 1_000_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            *counts.entry(CoinPair::flip(&mut rng)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 4);
        for c in counts.values() {
            assert!((*c as f64 / n as f64 - 0.25).abs() < 0.002);
        }
    }

    #[test]
    fn hall_f_examples() {
        // n_L·n_R = −1/2
        let s = SettingsPair::coplanar_deg(0.0, 120.0);
        assert!((hall_f(&s.n_l, &s) + 0.5).abs() < 1e-15);
        let s = SettingsPair::coplanar_deg(0.0, 90.0);
        let mut rng = RandomStream::from_seed_u64(1);
        for _ in 0..100 {
            assert!(hall_f(&sample_uniform_sphere(&mut rng), &s).abs() < 1e-15);
        }
        let s = SettingsPair::new(UnitVector::Z, UnitVector::Z);
        assert_eq!(hall_f(&UnitVector::Z, &s), -1.0);
    }

    #[test]
    fn hall_density_limits() {
        assert!((hall_g(0.0) - 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert!((hall_g(0.0) - 0.0795775).abs() < 1e-7);
        assert_eq!(hall_g(-1.0), 1.0 / (4.0 * PI));
        // approaching −1 from inside is continuous with the branch value
        assert!((hall_g(-1.0 + 1e-12) - 1.0 / (4.0 * PI)).abs() < 1e-6);
        assert_eq!(hall_g(1.0), 0.0);
        for eps in [1e-4, 1e-6, 1e-8, 1e-10] {
            let oracle = (eps / 2.0f64).sqrt() / 8.0;
            assert!((hall_g(1.0 - eps) - oracle).abs() < oracle * 1e-3 + 1e-15, "eps {eps}");
        }
    }

    #[test]
    fn bound_covers_dense_grid() {
        let bound = rejection_bound();
        let (x, vmax) = hall_g_maximum();
        assert!(x > -0.9 && x < -0.5, "argmax {x}");
        let grid_max = (0..=200_000)
            .map(|i| hall_g(-1.0 + 2.0 * i as f64 / 200_000.0))
            .fold(0.0f64, f64::max);
        assert!(grid_max <= vmax + 1e-12);
        assert!(grid_max > vmax - 1e-9);
        assert!((bound / vmax - BOUND_INFLATION).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_settings_accept_at_constant_rate() {
        let s = SettingsPair::coplanar_deg(0.0, 90.0);
        let mut rng = RandomStream::from_seed_u64(8);
        let n = 200_000;
        let proposals: usize = (0..n).map(|_| sample_hidden_b1_counted(&s, &mut rng).unwrap().proposals).sum();
        let rate = n as f64 / proposals as f64;
        let expect = 1.0 / (4.0 * PI * rejection_bound());
        // geometric counts: relative sd of the rate is about sqrt((1-p)/n)
        assert!((rate - expect).abs() < 4.0 * expect * ((1.0 - expect) / n as f64).sqrt(), "{rate} vs {expect}");
    }

    #[test]
    fn b1_region_masses_follow_singlet_law() {
        let mut rng = RandomStream::from_seed_u64(77);
        for theta in [30.0, 100.0, 160.0] {
            let s = SettingsPair::coplanar_deg(20.0, 20.0 + theta);
            let c = s.cos_angle();
            let n = 1_000_000;
            let mut counts = [[0usize; 2]; 2];
            for _ in 0..n {
                let h = sample_hidden_b1(&s, &mut rng).unwrap();
                let sigma = response_deterministic(&s.n_l, &h.left());
                let tau = response_deterministic(&s.n_r, &h.right());
                counts[cell_index(sigma)][cell_index(tau)] += 1;
            }
            for (sigma, tau) in CELLS {
                let p = 0.25 * (1.0 - sigma.as_f64() * tau.as_f64() * c);
                let f = counts[cell_index(sigma)][cell_index(tau)] as f64 / n as f64;
                let sd = (p * (1.0 - p) / n as f64).sqrt();
                assert!((f - p).abs() < 4.0 * sd, "theta {theta}: {f} vs {p}");
            }
        }
    }

    #[test]
    fn b2_density_integrates_to_one() {
        let mut rng = RandomStream::from_seed_u64(31);
        let u = UnitVector::normalized(0.2, -0.7, 0.4).unwrap();
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let s = SettingsPair::new(sample_uniform_sphere(&mut rng), sample_uniform_sphere(&mut rng));
            let w = 16.0 * PI * PI * settings_density_b2(&u, &s);
            sum += w;
            sum2 += w * w;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * se && (mean - 1.0).abs() < 1e-3, "{mean} ± {se}");
    }

    #[test]
    fn b2_pinned_angle_keeps_relative_angle() {
        let mut rng = RandomStream::from_seed_u64(4);
        let u = sample_uniform_sphere(&mut rng);
        for cos in [1.0, 0.5, 0.0, -0.8, -1.0] {
            let s = sample_settings_b2_at_angle(&u, cos, &mut rng).unwrap();
            assert!((s.cos_angle() - cos).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_analytic_examples() {
        let same = SettingsPair::at_angle_deg(0.0);
        assert_eq!(joint_analytic(ModelKind::A, Outcome::Plus, Outcome::Plus, &same), 0.0);
        let perp = SettingsPair::new(UnitVector::X, UnitVector::Y);
        for (sigma, tau) in CELLS {
            assert_eq!(joint_analytic(ModelKind::A, sigma, tau, &perp), 0.25);
        }
        let c03 = SettingsPair::new(UnitVector::X, UnitVector::new(0.3, (1.0f64 - 0.09).sqrt(), 0.0).unwrap());
        assert_eq!(joint_analytic(ModelKind::C, Outcome::Plus, Outcome::Plus, &c03), 0.0);
        assert_eq!(joint_analytic(ModelKind::C, Outcome::Plus, Outcome::Minus, &c03), 0.5);
    }

    #[test]
    fn atom_model_a_reproduces_singlet_exactly() {
        for theta in THETAS {
            let s = SettingsPair::coplanar_deg(33.0, 33.0 + theta);
            let exact = enumerate_atom_joint(ModelKind::A, &s).unwrap();
            for (sigma, tau) in CELLS {
                let law = joint_analytic(ModelKind::QM, sigma, tau, &s);
                assert!((exact[cell_index(sigma)][cell_index(tau)] - law).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn atom_model_c_matches_sign_law() {
        // 90° excluded: there the computed dot sits at the sign boundary
        for theta in THETAS.iter().filter(|t| **t != 90.0) {
            let s = SettingsPair::coplanar_deg(-12.0, -12.0 + theta);
            let exact = enumerate_atom_joint(ModelKind::C, &s).unwrap();
            for (sigma, tau) in CELLS {
                let law = joint_analytic(ModelKind::C, sigma, tau, &s);
                assert_eq!(exact[cell_index(sigma)][cell_index(tau)], law, "theta {theta}");
            }
        }
        assert!(enumerate_atom_joint(ModelKind::B1, &SettingsPair::at_angle_deg(0.0)).is_err());
    }

    #[test]
    fn marginals_are_uniform_in_every_law() {
        for kind in ModelKind::ALL {
            for theta in THETAS {
                let s = SettingsPair::at_angle_deg(theta);
                let t = joint_table(kind, &s);
                assert!((t[0] + t[1] - 0.5).abs() < 1e-15);
                assert!((t[0] + t[2] - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn qm_sampler_follows_law() {
        let s = SettingsPair::at_angle_deg(60.0);
        let mut rng = RandomStream::from_seed_u64(12);
        let n = 400_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let cell = sample_qm_outcomes(&s, &mut rng);
            counts[CELLS.iter().position(|c| *c == cell).unwrap()] += 1;
        }
        for (i, p) in joint_table(ModelKind::QM, &s).iter().enumerate() {
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((counts[i] as f64 / n as f64 - p).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn model_names_round_trip() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.name().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("D".parse::<ModelKind>().is_err());
    }
}
