//! Synchronized watches: the only state the three parties share.
//!
//! A watch has a small and a large hand with incommensurable periods. The
//! pitcher owns clockwise watches; each batter owns a counterclockwise twin
//! whose hands pass through zero together with the original, so the two
//! readings of a hand always sum to zero modulo one turn. A batter that knows
//! the time of flight can therefore recover the pitcher's reading at the moment
//! of the pitch from its own watch at the moment of arrival.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::UnitVector;
use crate::rng::RandomStream;

/// Largest numerator/denominator considered a resonance between two periods.
pub const RESONANCE_MAX_TERM: u64 = 64;
/// Distance below which a period ratio counts as equal to a small rational.
pub const RESONANCE_TOLERANCE: f64 = 1e-9;

/// Resolution of the simulation clock, 2⁻²⁰ s. Times on this grid below 2³²
/// s add and subtract exactly, so a batter subtracting the time of flight
/// recovers the pitch instant bit for bit.
pub const CLOCK_QUANTUM: f64 = 1.0 / 1_048_576.0;

/// Largest time representable exactly on the clock grid.
pub const CLOCK_HORIZON: f64 = 4_294_967_296.0;

/// Rounds `t` to the simulation clock grid.
pub fn quantize_time(t: f64) -> f64 {
    (t / CLOCK_QUANTUM).round() * CLOCK_QUANTUM
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Clockwise,
    Counterclockwise,
}

impl Direction {
    pub fn reversed(self) -> Direction {
        match self {
            Direction::Clockwise => Direction::Counterclockwise,
            Direction::Counterclockwise => Direction::Clockwise,
        }
    }
}

/// Which of the pitcher's two setting watches a coin selected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coin {
    H,
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WatchSpec {
    pub period_small: f64,
    pub period_large: f64,
    pub direction: Direction,
    /// Simulation time at which both hands sit at zero.
    pub epoch: f64,
}

impl WatchSpec {
    pub fn new(period_small: f64, period_large: f64, direction: Direction, epoch: f64) -> Result<Self> {
        let w = WatchSpec { period_small, period_large, direction, epoch };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.period_small, self.period_large] {
            if !(p.is_finite() && p > 0.0) {
                return Err(SimError::InvalidWatch(format!("period {p} must be positive")));
            }
        }
        if self.period_small == self.period_large {
            return Err(SimError::InvalidWatch("hand periods must differ".into()));
        }
        if !self.epoch.is_finite() {
            return Err(SimError::InvalidWatch("epoch must be finite".into()));
        }
        Ok(())
    }

    /// The synchronized twin turning the other way.
    pub fn mirrored(&self) -> WatchSpec {
        WatchSpec { direction: self.direction.reversed(), ..*self }
    }

    pub fn periods(&self) -> [f64; 2] {
        [self.period_small, self.period_large]
    }
}

/// Hand positions as fractions of a turn, each in [0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandPhases {
    pub phase_small: f64,
    pub phase_large: f64,
}

impl HandPhases {
    pub fn new(phase_small: f64, phase_large: f64) -> Result<Self> {
        for p in [phase_small, phase_large] {
            if !(0.0..1.0).contains(&p) {
                return Err(SimError::InvalidWatch(format!("phase {p} outside [0, 1)")));
            }
        }
        Ok(HandPhases { phase_small, phase_large })
    }
}

/// Fractional part mapped into [0, 1). `%` on floats is exact, so the only
/// rounding is the final division.
fn turn_fraction(elapsed: f64, period: f64) -> f64 {
    let mut r = elapsed % period;
    if r < 0.0 {
        r += period;
    }
    let p = r / period;
    if p >= 1.0 {
        0.0
    } else {
        p
    }
}

fn unit_frac(x: f64) -> f64 {
    let mut r = x % 1.0;
    if r < 0.0 {
        r += 1.0;
    }
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

fn hand_phase(w: &WatchSpec, period: f64, t: f64) -> f64 {
    let elapsed = t - w.epoch;
    match w.direction {
        Direction::Clockwise => turn_fraction(elapsed, period),
        Direction::Counterclockwise => turn_fraction(-elapsed, period),
    }
}

/// Reads both hands of `w` at simulation time `t`.
pub fn read_phases(w: &WatchSpec, t: f64) -> Result<HandPhases> {
    if !t.is_finite() {
        return Err(SimError::NonFinite(t));
    }
    Ok(HandPhases {
        phase_small: hand_phase(w, w.period_small, t),
        phase_large: hand_phase(w, w.period_large, t),
    })
}

/// Small hand gives the azimuth, large hand the height cos θ = 2p − 1, so a
/// uniform reading on the torus lands uniformly on the sphere.
pub fn phases_to_vector(p: &HandPhases) -> UnitVector {
    UnitVector::from_cos_azimuth(2.0 * p.phase_large - 1.0, TAU * p.phase_small)
}

/// Watches shared before the run: the pitcher's W_H and W_T (clockwise) and the
/// optional free-running W_0 used by the Hall-model realizations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WatchBank {
    pub watch_h: WatchSpec,
    pub watch_t: WatchSpec,
    pub watch_0: Option<WatchSpec>,
}

impl Default for WatchBank {
    /// Periods are square roots of distinct primes, in seconds.
    fn default() -> Self {
        let w = |a: f64, b: f64| WatchSpec {
            period_small: a.sqrt(),
            period_large: b.sqrt(),
            direction: Direction::Clockwise,
            epoch: 0.0,
        };
        WatchBank {
            watch_h: w(2.0, 3.0),
            watch_t: w(5.0, 7.0),
            watch_0: Some(w(11.0, 13.0)),
        }
    }
}

impl WatchBank {
    pub fn validate(&self) -> Result<()> {
        let mut all = vec![self.watch_h, self.watch_t];
        all.extend(self.watch_0);
        for w in &all {
            w.validate()?;
            if w.direction != Direction::Clockwise {
                return Err(SimError::InvalidWatch("pitcher watches turn clockwise".into()));
            }
            if w.epoch != self.watch_h.epoch {
                return Err(SimError::InvalidWatch("watches must share one epoch".into()));
            }
        }
        let report = check_incommensurable(&self.setting_periods());
        if !report.passed {
            return Err(SimError::InvalidWatch(format!(
                "commensurable periods: {:?}",
                report.resonances
            )));
        }
        Ok(())
    }

    /// The four hand periods of W_H and W_T.
    pub fn setting_periods(&self) -> [f64; 4] {
        [
            self.watch_h.period_small,
            self.watch_h.period_large,
            self.watch_t.period_small,
            self.watch_t.period_large,
        ]
    }

    pub fn watch(&self, coin: Coin) -> &WatchSpec {
        match coin {
            Coin::H => &self.watch_h,
            Coin::T => &self.watch_t,
        }
    }

    /// The counterclockwise twin held by a batter: W'_H on the right, W'_T on the left.
    pub fn mirror(&self, coin: Coin) -> WatchSpec {
        self.watch(coin).mirrored()
    }
}

/// Direction read by the pitcher from watch `coin` at the moment of the pitch.
pub fn pitcher_vector(bank: &WatchBank, coin: Coin, t_pitch: f64) -> Result<UnitVector> {
    Ok(phases_to_vector(&read_phases(bank.watch(coin), t_pitch)?))
}

/// Direction reconstructed by a batter from its counterclockwise twin read at
/// `t_arrival`, undoing the time of flight `delta_t`.
pub fn batter_vector(mirror: &WatchSpec, t_arrival: f64, delta_t: f64) -> Result<UnitVector> {
    if delta_t < 0.0 || !delta_t.is_finite() {
        return Err(SimError::NegativeDelay(delta_t));
    }
    if mirror.direction != Direction::Counterclockwise {
        return Err(SimError::InvalidWatch("batter watch must turn counterclockwise".into()));
    }
    let reading = read_phases(mirror, t_arrival)?;
    let correct = |r: f64, period: f64| unit_frac(-(r + turn_fraction(delta_t, period)));
    let phases = HandPhases {
        phase_small: correct(reading.phase_small, mirror.period_small),
        phase_large: correct(reading.phase_large, mirror.period_large),
    };
    Ok(phases_to_vector(&phases))
}

/// A pair of periods whose ratio sits within tolerance of a small rational.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resonance {
    pub i: usize,
    pub j: usize,
    pub p: u64,
    pub q: u64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncommensurabilityReport {
    pub passed: bool,
    pub resonances: Vec<Resonance>,
}

/// Scans the continued-fraction convergents of every pairwise ratio. Any p/q
/// within [`RESONANCE_TOLERANCE`] with q ≤ 64 is a convergent (it is far inside
/// 1/(2q²)), so the scan is exhaustive.
pub fn check_incommensurable(periods: &[f64]) -> IncommensurabilityReport {
    let mut resonances = Vec::new();
    for i in 0..periods.len() {
        for j in (i + 1)..periods.len() {
            let (a, b) = (periods[i], periods[j]);
            let ratio = a.max(b) / a.min(b);
            if let Some((p, q, error)) = small_rational_near(ratio) {
                resonances.push(Resonance { i, j, p, q, error });
            }
        }
    }
    IncommensurabilityReport { passed: resonances.is_empty() && periods.len() >= 2, resonances }
}

fn small_rational_near(ratio: f64) -> Option<(u64, u64, f64)> {
    if !ratio.is_finite() {
        return None;
    }
    // convergents h/k of the continued fraction of ratio
    let (mut h_prev, mut h) = (1u64, ratio.floor() as u64);
    let (mut k_prev, mut k) = (0u64, 1u64);
    let mut rest = ratio - ratio.floor();
    loop {
        if h > RESONANCE_MAX_TERM || k > RESONANCE_MAX_TERM {
            return None;
        }
        let error = (ratio - h as f64 / k as f64).abs();
        if error <= RESONANCE_TOLERANCE {
            return Some((h, k, error));
        }
        if rest < 1e-15 {
            return None;
        }
        let x = 1.0 / rest;
        let a = x.floor();
        rest = x - a;
        if a > RESONANCE_MAX_TERM as f64 {
            return None;
        }
        let a = a as u64;
        (h_prev, h) = (h, a * h + h_prev);
        (k_prev, k) = (k, a * k + k_prev);
    }
}

/// Outcome of [`round_trip_suite`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub samples: usize,
    /// Largest per-component gap between pitcher and batter vectors.
    pub worst_vector_error: f64,
    /// Largest distance of a watch + mirror phase sum from a whole turn.
    pub worst_conservation_error: f64,
}

/// Random (t, Δt) round trips through both setting watches and their mirrors,
/// with t below 10⁹ s and Δt below 20 s on the simulation clock grid.
pub fn round_trip_suite(bank: &WatchBank, samples: usize, seed: u64) -> Result<RoundTripReport> {
    let mut rng = RandomStream::from_seed_u64(seed);
    let mut report = RoundTripReport { samples, worst_vector_error: 0.0, worst_conservation_error: 0.0 };
    for _ in 0..samples {
        let t = quantize_time(rng.random_range(0.0..1e9));
        let dt = quantize_time(rng.random_range(0.0..20.0));
        for coin in [Coin::H, Coin::T] {
            let p = pitcher_vector(bank, coin, t)?;
            let mirror = bank.mirror(coin);
            let b = batter_vector(&mirror, t + dt, dt)?;
            report.worst_vector_error = report.worst_vector_error.max(p.max_abs_diff(&b));
            let (x, y) = (read_phases(bank.watch(coin), t)?, read_phases(&mirror, t)?);
            for sum in [x.phase_small + y.phase_small, x.phase_large + y.phase_large] {
                report.worst_conservation_error = report.worst_conservation_error.max(sum.abs().min((sum - 1.0).abs()));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cw(ps: f64, pl: f64) -> WatchSpec {
        WatchSpec::new(ps, pl, Direction::Clockwise, 0.0).unwrap()
    }

    #[test]
    fn epoch_reads_zero() {
        let w = WatchSpec::new(60.0, 3600.0, Direction::Clockwise, 12.5).unwrap();
        let p = read_phases(&w, 12.5).unwrap();
        assert_eq!((p.phase_small, p.phase_large), (0.0, 0.0));
        let p = read_phases(&w, 12.5 + 15.0).unwrap();
        assert_eq!(p.phase_small, 0.25);
        assert!(read_phases(&w, f64::NAN).is_err());
    }

    #[test]
    fn counterclockwise_runs_backwards() {
        let w = cw(60.0, 3600.0).mirrored();
        let p = read_phases(&w, 15.0).unwrap();
        assert_eq!(p.phase_small, 0.75);
    }

    #[test]
    fn phase_vector_examples() {
        let v = phases_to_vector(&HandPhases::new(0.0, 0.5).unwrap());
        assert!(v.max_abs_diff(&UnitVector::X) < 1e-15);
        let v = phases_to_vector(&HandPhases::new(0.25, 0.5).unwrap());
        assert!(v.max_abs_diff(&UnitVector::Y) < 1e-15);
        let v = phases_to_vector(&HandPhases::new(0.7, 1.0 - 1e-12).unwrap());
        assert!(v.z() > 1.0 - 1e-11);
        assert!(HandPhases::new(1.0, 0.0).is_err());
    }

    #[test]
    fn pitch_at_epoch_points_down() {
        let bank = WatchBank::default();
        for coin in [Coin::H, Coin::T] {
            let v = pitcher_vector(&bank, coin, 0.0).unwrap();
            assert_eq!(v.components(), [0.0, 0.0, -1.0]);
        }
        let mirror = bank.mirror(Coin::H);
        let v = batter_vector(&mirror, 0.0, 0.0).unwrap();
        assert_eq!(v.components(), [0.0, 0.0, -1.0]);
    }

    #[test]
    fn coins_select_different_watches() {
        let bank = WatchBank::default();
        let h = pitcher_vector(&bank, Coin::H, 123.456).unwrap();
        let t = pitcher_vector(&bank, Coin::T, 123.456).unwrap();
        // direct evaluation of the H watch
        let ps = (123.456f64 / 2f64.sqrt()).fract();
        let pl = (123.456f64 / 3f64.sqrt()).fract();
        let expect = UnitVector::from_cos_azimuth(2.0 * pl - 1.0, TAU * ps);
        assert!(h.max_abs_diff(&expect) < 1e-12);
        assert!(h.max_abs_diff(&t) > 1e-3);
        assert_eq!(h, pitcher_vector(&bank, Coin::H, 123.456).unwrap());
    }

    #[test]
    fn full_period_delay_leaves_phase_unchanged() {
        let w = cw(7.0, 11.0);
        let m = w.mirrored();
        let t = 1234.5;
        let r = read_phases(&m, t).unwrap();
        let out = batter_vector(&m, t, 7.0).unwrap();
        let small_only = phases_to_vector(&HandPhases {
            phase_small: unit_frac(-r.phase_small),
            phase_large: unit_frac(-(r.phase_large + 7.0 / 11.0)),
        });
        assert!(out.max_abs_diff(&small_only) < 1e-12);
        assert!(batter_vector(&m, t, -1.0).is_err());
        assert!(batter_vector(&w, t, 1.0).is_err());
    }

    #[test]
    fn round_trip_recovers_pitch_vector() {
        let r = round_trip_suite(&WatchBank::default(), 100_000, 99).unwrap();
        assert!(r.worst_vector_error < 1e-9, "worst {:e}", r.worst_vector_error);
        assert!(r.worst_conservation_error < 1e-12, "worst {:e}", r.worst_conservation_error);
    }

    #[test]
    fn clock_grid_is_exact() {
        let t = quantize_time(3_000_000_000.123_456);
        let dt = quantize_time(0.731);
        assert_eq!((t + dt) - dt, t);
        assert_eq!(quantize_time(t), t);
        assert!((quantize_time(1.0 / 3.0) - 1.0 / 3.0).abs() <= CLOCK_QUANTUM / 2.0);
    }

    #[test]
    fn mirrored_phases_sum_to_whole_turns() {
        let w = WatchBank::default().watch_t;
        let m = w.mirrored();
        let mut rng = RandomStream::from_seed_u64(5);
        for _ in 0..10_000 {
            let t = rng.random_range(-1e7..1e7);
            let a = read_phases(&w, t).unwrap();
            let b = read_phases(&m, t).unwrap();
            for s in [a.phase_small + b.phase_small, a.phase_large + b.phase_large] {
                assert!(s.abs() < 1e-12 || (s - 1.0).abs() < 1e-12, "sum {s}");
            }
        }
    }

    #[test]
    fn resonance_detection() {
        assert!(!check_incommensurable(&[60.0, 30.0]).passed);
        let r = check_incommensurable(&[1.0, 1.0 + 1e-12]);
        assert!(!r.passed);
        assert_eq!((r.resonances[0].p, r.resonances[0].q), (1, 1));
        assert!(!check_incommensurable(&[3.0, 64.0 * 3.0 / 63.0]).passed);
        assert!(check_incommensurable(&[3.0, 65.0 * 3.0 / 64.0]).passed);
        assert!(!check_incommensurable(&[1.0]).passed);
    }

    /// Brute force over every p/q with p, q ≤ 64.
    fn brute_force_resonant(a: f64, b: f64) -> bool {
        let ratio = a.max(b) / a.min(b);
        (1..=64u64).any(|q| (1..=64u64).any(|p| (ratio - p as f64 / q as f64).abs() <= 1e-9))
    }

    #[test]
    fn prime_roots_pass_and_agree_with_brute_force() {
        let scale = 3.7;
        let periods: Vec<f64> = [2.0f64, 3.0, 5.0, 7.0].iter().map(|p| scale * p.sqrt()).collect();
        assert!(check_incommensurable(&periods).passed);
        let mut rng = RandomStream::from_seed_u64(11);
        for _ in 0..2000 {
            let q = rng.random_range(1..=70u64) as f64;
            let p = rng.random_range(1..=70u64) as f64;
            let jitter = if rng.random::<bool>() { 0.0 } else { rng.random_range(-1e-6..1e-6) };
            let a = rng.random_range(0.5..5.0);
            let b = a * (p / q + jitter);
            assert_eq!(
                !check_incommensurable(&[a, b]).passed,
                brute_force_resonant(a, b),
                "{a} {b}"
            );
        }
        WatchBank::default().validate().unwrap();
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn poisson_times_equidistribute() {
        let bank = WatchBank::default();
        let mut rng = RandomStream::from_seed_u64(3);
        let n = 1_000_000;
        let mut t = 0.0;
        let mut first = [0.0; 3];
        let mut second = [[0.0; 3]; 3];
        for _ in 0..n {
            t += -1000.0 * (1.0 - rng.random::<f64>()).ln();
            let c = pitcher_vector(&bank, Coin::H, t).unwrap().components();
            for i in 0..3 {
                first[i] += c[i];
                for j in 0..3 {
                    second[i][j] += c[i] * c[j];
                }
            }
        }
        for i in 0..3 {
            assert!((first[i] / n as f64).abs() < 0.01);
            for j in 0..3 {
                let e = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!((second[i][j] / n as f64 - e).abs() < 0.01);
            }
        }
    }
}
