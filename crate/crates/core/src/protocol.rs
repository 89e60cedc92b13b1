//! Three communication-free agents composed into trials.
//!
//! The pitcher and the two batters share only what was fixed before the run:
//! watch parameters, the epoch, the pitch schedule and the experiment seed.
//! During a trial the only runtime traffic is the two balls (spin, pitch time
//! and time of flight) and the batters' reports to the coordinator. Every
//! message is recorded so the flow discipline can be audited afterwards.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, LabeledPair, SettingsMode};
use crate::error::{Result, SimError};
use crate::geometry::{Outcome, UnitVector};
use crate::models::{
    cell_index, joint_table, response_deterministic, response_linear, sample_hidden_a, sample_hidden_b1,
    sample_qm_outcomes, sample_settings_b2, sample_settings_b2_at_angle, CoinPair, HiddenState, ModelKind,
    SettingsPair, CELLS,
};
use crate::rng::{trial_seed, RandomStream, Role};
use crate::watches::{batter_vector, phases_to_vector, pitcher_vector, quantize_time, read_phases, Coin};

/// Largest pitcher/batter disagreement on a setting vector tolerated per component.
pub const SETTING_AGREEMENT: f64 = 1e-9;

/// Trials handled per work unit; partial sums are combined in unit order.
const CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Pitcher,
    BatterL,
    BatterR,
    Coordinator,
}

impl Party {
    pub fn is_batter(self) -> bool {
        matches!(self, Party::BatterL | Party::BatterR)
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Pitcher => "pitcher",
            Party::BatterL => "batter_l",
            Party::BatterR => "batter_r",
            Party::Coordinator => "coordinator",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Ball,
    ResultReport,
}

/// Payload keys a ball may carry.
pub const BALL_FIELDS: [&str; 3] = ["spin", "t_pitch", "delta_t"];
/// Payload keys a result report may carry.
pub const REPORT_FIELDS: [&str; 1] = ["outcome"];

/// One logged message. The payload is kept as an open JSON object so that
/// logs read back from disk can be audited for fields they should not carry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    pub seq: u64,
    pub trial_id: u64,
    pub t_send: f64,
    pub sender: Party,
    pub receiver: Party,
    pub kind: MessageKind,
    pub payload: Map<String, Value>,
}

impl Message {
    pub fn ball(trial_id: u64, receiver: Party, spin: UnitVector, t_pitch: f64, delta_t: f64) -> Self {
        let payload = json!({ "spin": spin.components(), "t_pitch": t_pitch, "delta_t": delta_t });
        Message {
            seq: 0,
            trial_id,
            t_send: t_pitch,
            sender: Party::Pitcher,
            receiver,
            kind: MessageKind::Ball,
            payload: payload.as_object().cloned().unwrap_or_default(),
        }
    }

    pub fn report(trial_id: u64, sender: Party, outcome: Outcome, t_send: f64) -> Self {
        let payload = json!({ "outcome": outcome.value() });
        Message {
            seq: 0,
            trial_id,
            t_send,
            sender,
            receiver: Party::Coordinator,
            kind: MessageKind::ResultReport,
            payload: payload.as_object().cloned().unwrap_or_default(),
        }
    }
}

/// Ordered record of every runtime message of an experiment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    pub messages: Vec<Message>,
}

impl EventLog {
    /// Appends trial messages, numbering them consecutively.
    fn extend_numbered(&mut self, messages: impl IntoIterator<Item = Message>) {
        for mut m in messages {
            m.seq = self.messages.len() as u64;
            self.messages.push(m);
        }
    }

    /// One JSON object per line.
    pub fn to_ndjson(&self) -> Result<String> {
        let mut out = String::new();
        for m in &self.messages {
            out.push_str(&serde_json::to_string(m)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses newline-delimited records; blank lines are ignored, anything else
    /// malformed is an error.
    pub fn from_ndjson(text: &str) -> Result<Self> {
        let mut messages = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            messages.push(serde_json::from_str(line)?);
        }
        Ok(EventLog { messages })
    }
}

/// Outcome counts for one settings pair (or one relative-angle bin).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub model: ModelKind,
    pub label: String,
    /// The nominal pair; absent for angle bins of watch-driven runs.
    pub pair: Option<SettingsPair>,
    /// Counts in the order (+,+), (+,−), (−,+), (−,−).
    pub counts: [u64; 4],
    /// Analytic cell probabilities in the same order.
    pub analytic: [f64; 4],
    /// Relative-angle bin in degrees, for watch-driven runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_bin: Option<[f64; 2]>,
}

impl CountTable {
    pub fn new(model: ModelKind, label: impl Into<String>, pair: SettingsPair, counts: [u64; 4]) -> Self {
        CountTable { model, label: label.into(), pair: Some(pair), counts, analytic: joint_table(model, &pair), angle_bin: None }
    }

    /// Relative angle in degrees: that of the pair, or the bin centre.
    pub fn angle_deg(&self) -> f64 {
        match (&self.pair, self.angle_bin) {
            (Some(p), _) => p.cos_angle().clamp(-1.0, 1.0).acos().to_degrees(),
            (None, Some([lo, hi])) => 0.5 * (lo + hi),
            (None, None) => f64::NAN,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, sigma: Outcome, tau: Outcome) -> u64 {
        self.counts[2 * cell_index(sigma) + cell_index(tau)]
    }

    pub fn frequencies(&self) -> [f64; 4] {
        let n = self.total().max(1) as f64;
        self.counts.map(|c| c as f64 / n)
    }
}

/// One pitch–bat–report cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub model: ModelKind,
    pub t_pitch: f64,
    pub delta_t: f64,
    /// Orientations the bats actually used.
    pub settings: SettingsPair,
    pub hidden: Option<HiddenState>,
    pub coins: Option<CoinPair>,
    pub outcome_l: Outcome,
    pub outcome_r: Outcome,
    pub seed: u64,
}

/// A trial together with the messages it produced.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutput {
    pub record: TrialRecord,
    pub messages: Vec<Message>,
    /// Largest componentwise gap between pitcher-side and batter-side settings.
    pub setting_gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Timing {
    t_pitch: f64,
    delta_t: f64,
}

/// Where a trial's settings come from.
enum Source<'a> {
    Pinned(&'a LabeledPair),
    Watches,
}

/// A configured experiment with its pitch schedule laid out.
pub struct Experiment {
    config: ExperimentConfig,
    schedule: Vec<Timing>,
}

/// Aggregated result of [`Experiment::run`].
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub tables: Vec<CountTable>,
    pub log: Option<EventLog>,
    pub records: Option<Vec<TrialRecord>>,
    /// Counts indexed by `4·octant(u) + cell`; absent for the QM reference.
    pub hidden_histogram: Option<[u64; 32]>,
    pub max_setting_gap: f64,
}

/// Octant of `u` from the signs of its components, bit 2 = x.
pub fn octant(u: &UnitVector) -> usize {
    let bit = |v: f64| usize::from(v >= 0.0);
    (bit(u.x()) << 2) | (bit(u.y()) << 1) | bit(u.z())
}

#[derive(Clone)]
struct Partial {
    counts: Vec<[u64; 4]>,
    analytic_sums: Vec<[f64; 4]>,
    histogram: [u64; 32],
    max_gap: f64,
    records: Vec<TrialRecord>,
    messages: Vec<Message>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let schedule = build_schedule(&config)?;
        Ok(Experiment { config, schedule })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn total_trials(&self) -> u64 {
        self.schedule.len() as u64
    }

    /// Pitch time and time of flight of a trial.
    pub fn timing(&self, trial_id: u64) -> Option<(f64, f64)> {
        self.schedule.get(trial_id as usize).map(|t| (t.t_pitch, t.delta_t))
    }

    fn source(&self, trial_id: u64) -> Source<'_> {
        match &self.config.settings {
            SettingsMode::Fixed { pairs } => Source::Pinned(&pairs[(trial_id / self.config.trials) as usize]),
            SettingsMode::WatchDriven { .. } => Source::Watches,
        }
    }

    /// Runs a single trial.
    pub fn run_trial(&self, trial_id: u64) -> Result<TrialOutput> {
        self.play(trial_id, None, true)
    }

    /// Runs a trial of an atom model with the pitcher's coins fixed in advance.
    pub fn run_trial_with_coins(&self, trial_id: u64, coins: CoinPair) -> Result<TrialOutput> {
        if !self.config.model.uses_atoms() {
            return Err(SimError::Unsupported(format!("model {} does not flip coins", self.config.model)));
        }
        self.play(trial_id, Some(coins), true)
    }

    /// Messages are only materialized when `with_messages` is set; the trial
    /// itself is identical either way.
    fn play(&self, trial_id: u64, forced: Option<CoinPair>, with_messages: bool) -> Result<TrialOutput> {
        let timing = *self
            .schedule
            .get(trial_id as usize)
            .ok_or_else(|| SimError::Config(format!("trial {trial_id} outside the schedule")))?;
        let kind = self.config.model;
        let seed = self.config.seed;
        let bank = &self.config.watches;
        let source = self.source(trial_id);
        let t_pitch = timing.t_pitch;
        let delta_t = timing.delta_t;
        let t_arrival = t_pitch + delta_t;

        let mut pitcher_rng = RandomStream::for_agent(seed, trial_id, Role::Pitcher);
        let mut left_rng = RandomStream::for_agent(seed, trial_id, Role::BatterL);
        let mut coordinator_rng = RandomStream::for_agent(seed, trial_id, Role::Coordinator);

        // Pitcher-side view of a setting watch at the pitch instant.
        let pitcher_reads = |coin: Coin| -> Result<UnitVector> {
            match source {
                Source::Pinned(p) => Ok(p.pair.for_coin(coin)),
                Source::Watches => pitcher_vector(bank, coin, t_pitch),
            }
        };
        // Batter-side view: each batter owns the counterclockwise twin of one
        // pitcher watch (right: W'_H, left: W'_T).
        let batter_reads = |coin: Coin| -> Result<UnitVector> {
            match source {
                Source::Pinned(p) => Ok(p.pair.for_coin(coin)),
                Source::Watches => batter_vector(&bank.mirror(coin), t_arrival, delta_t),
            }
        };

        let mut messages = Vec::with_capacity(if with_messages { 4 } else { 0 });
        macro_rules! send {
            ($m:expr) => {
                if with_messages {
                    messages.push($m)
                }
            };
        }
        let mut setting_gap = 0.0f64;
        let mut hidden = None;
        let mut coins = None;

        let (settings, outcome_l, outcome_r) = match kind {
            ModelKind::A | ModelKind::C => {
                let c = forced.unwrap_or_else(|| CoinPair::flip(&mut pitcher_rng));
                let n_w = pitcher_reads(c.w)?;
                let h = HiddenState { u: if c.d == Coin::H { n_w } else { -n_w } };
                send!(Message::ball(trial_id, Party::BatterL, h.left(), t_pitch, delta_t));
                send!(Message::ball(trial_id, Party::BatterR, h.right(), t_pitch, delta_t));

                let s = SettingsPair::new(batter_reads(Coin::T)?, batter_reads(Coin::H)?);
                setting_gap = setting_gap.max(n_w.max_abs_diff(&s.for_coin(c.w)));
                debug_assert_eq!(h.u, {
                    let reference = SettingsPair::new(pitcher_reads(Coin::T)?, pitcher_reads(Coin::H)?);
                    sample_hidden_a(&reference, c).u
                });

                let (sigma, tau) = if kind == ModelKind::A {
                    let mut right_rng = RandomStream::for_agent(seed, trial_id, Role::BatterR);
                    let draw = |rng: &mut RandomStream, n: &UnitVector, spin: &UnitVector| {
                        if rng.random::<f64>() < response_linear(Outcome::Plus, n, spin) {
                            Outcome::Plus
                        } else {
                            Outcome::Minus
                        }
                    };
                    (draw(&mut left_rng, &s.n_l, &h.left()), draw(&mut right_rng, &s.n_r, &h.right()))
                } else {
                    (response_deterministic(&s.n_l, &h.left()), response_deterministic(&s.n_r, &h.right()))
                };
                hidden = Some(h);
                coins = Some(c);
                (s, sigma, tau)
            }
            ModelKind::B1 => {
                let seen = SettingsPair::new(pitcher_reads(Coin::T)?, pitcher_reads(Coin::H)?);
                let h = sample_hidden_b1(&seen, &mut pitcher_rng)?;
                send!(Message::ball(trial_id, Party::BatterL, h.left(), t_pitch, delta_t));
                send!(Message::ball(trial_id, Party::BatterR, h.right(), t_pitch, delta_t));
                let s = SettingsPair::new(batter_reads(Coin::T)?, batter_reads(Coin::H)?);
                setting_gap = seen.n_l.max_abs_diff(&s.n_l).max(seen.n_r.max_abs_diff(&s.n_r));
                hidden = Some(h);
                (s, response_deterministic(&s.n_l, &h.left()), response_deterministic(&s.n_r, &h.right()))
            }
            ModelKind::B2 => {
                let watch_0 = bank
                    .watch_0
                    .as_ref()
                    .ok_or_else(|| SimError::Config("model B2 needs watch_0".into()))?;
                let h = HiddenState { u: phases_to_vector(&read_phases(watch_0, t_pitch)?) };
                // Coupling of the batters' watches to W_0, installed before the balls arrive.
                let s = match source {
                    Source::Pinned(p) => sample_settings_b2_at_angle(&h.u, p.pair.cos_angle(), &mut coordinator_rng)?,
                    Source::Watches => sample_settings_b2(&h.u, &mut coordinator_rng)?,
                };
                send!(Message::ball(trial_id, Party::BatterL, h.left(), t_pitch, delta_t));
                send!(Message::ball(trial_id, Party::BatterR, h.right(), t_pitch, delta_t));
                hidden = Some(h);
                (s, response_deterministic(&s.n_l, &h.left()), response_deterministic(&s.n_r, &h.right()))
            }
            ModelKind::QM => {
                let s = SettingsPair::new(batter_reads(Coin::T)?, batter_reads(Coin::H)?);
                let (sigma, tau) = sample_qm_outcomes(&s, &mut coordinator_rng);
                (s, sigma, tau)
            }
        };

        if setting_gap > SETTING_AGREEMENT {
            return Err(SimError::ProtocolIntegrity(format!(
                "trial {trial_id}: pitcher and batter settings differ by {setting_gap:e}"
            )));
        }
        if kind != ModelKind::QM {
            send!(Message::report(trial_id, Party::BatterL, outcome_l, t_arrival));
            send!(Message::report(trial_id, Party::BatterR, outcome_r, t_arrival));
        }

        Ok(TrialOutput {
            record: TrialRecord {
                trial_id,
                model: kind,
                t_pitch,
                delta_t,
                settings,
                hidden,
                coins,
                outcome_l,
                outcome_r,
                seed: trial_seed(seed, trial_id),
            },
            messages,
            setting_gap,
        })
    }

    fn table_slots(&self) -> usize {
        match &self.config.settings {
            SettingsMode::Fixed { pairs } => pairs.len(),
            SettingsMode::WatchDriven { bins } => *bins,
        }
    }

    fn slot_of(&self, record: &TrialRecord) -> usize {
        match &self.config.settings {
            SettingsMode::Fixed { .. } => (record.trial_id / self.config.trials) as usize,
            SettingsMode::WatchDriven { bins } => {
                let angle = record.settings.cos_angle().acos().to_degrees();
                ((angle / 180.0 * *bins as f64) as usize).min(bins - 1)
            }
        }
    }

    fn run_chunk(&self, start: u64, end: u64) -> Result<Partial> {
        let slots = self.table_slots();
        let mut part = Partial {
            counts: vec![[0; 4]; slots],
            analytic_sums: vec![[0.0; 4]; slots],
            histogram: [0; 32],
            max_gap: 0.0,
            records: Vec::new(),
            messages: Vec::new(),
        };
        let watch_driven = matches!(self.config.settings, SettingsMode::WatchDriven { .. });
        for trial_id in start..end {
            let out = self.play(trial_id, None, self.config.log_events)?;
            let r = &out.record;
            let slot = self.slot_of(r);
            let cell = 2 * cell_index(r.outcome_l) + cell_index(r.outcome_r);
            part.counts[slot][cell] += 1;
            if watch_driven {
                let law = joint_table(self.config.model, &r.settings);
                for (acc, p) in part.analytic_sums[slot].iter_mut().zip(law) {
                    *acc += p;
                }
            }
            if let Some(h) = &r.hidden {
                part.histogram[4 * octant(&h.u) + cell] += 1;
            }
            part.max_gap = part.max_gap.max(out.setting_gap);
            if self.config.log_events {
                part.messages.extend(out.messages);
            }
            if self.config.keep_records {
                part.records.push(out.record);
            }
        }
        Ok(part)
    }

    /// Runs every trial, in parallel on the current rayon pool. The result is
    /// independent of the number of workers.
    pub fn run(&self) -> Result<ExperimentOutput> {
        let total = self.total_trials();
        let chunks: Vec<(u64, u64)> = (0..total.div_ceil(CHUNK))
            .map(|i| (i * CHUNK, ((i + 1) * CHUNK).min(total)))
            .collect();
        let partials: Vec<Result<Partial>> = chunks.par_iter().map(|&(a, b)| self.run_chunk(a, b)).collect();

        let slots = self.table_slots();
        let mut counts = vec![[0u64; 4]; slots];
        let mut analytic_sums = vec![[0.0f64; 4]; slots];
        let mut histogram = [0u64; 32];
        let mut max_gap = 0.0f64;
        let mut log = EventLog::default();
        let mut records = Vec::new();
        for part in partials {
            let part = part?;
            for s in 0..slots {
                for c in 0..4 {
                    counts[s][c] += part.counts[s][c];
                    analytic_sums[s][c] += part.analytic_sums[s][c];
                }
            }
            for (h, p) in histogram.iter_mut().zip(part.histogram) {
                *h += p;
            }
            max_gap = max_gap.max(part.max_gap);
            log.extend_numbered(part.messages);
            records.extend(part.records);
        }

        let model = self.config.model;
        let tables = match &self.config.settings {
            SettingsMode::Fixed { pairs } => pairs
                .iter()
                .zip(&counts)
                .map(|(p, c)| CountTable::new(model, p.label.clone(), p.pair, *c))
                .collect(),
            SettingsMode::WatchDriven { bins } => (0..*bins)
                .map(|b| {
                    let n: u64 = counts[b].iter().sum();
                    let width = 180.0 / *bins as f64;
                    CountTable {
                        model,
                        label: format!("angle_{:.1}_{:.1}", b as f64 * width, (b + 1) as f64 * width),
                        pair: None,
                        counts: counts[b],
                        analytic: analytic_sums[b].map(|s| if n > 0 { s / n as f64 } else { 0.0 }),
                        angle_bin: Some([b as f64 * width, (b + 1) as f64 * width]),
                    }
                })
                .collect(),
        };
        Ok(ExperimentOutput {
            tables,
            log: self.config.log_events.then_some(log),
            records: self.config.keep_records.then_some(records),
            hidden_histogram: (model != ModelKind::QM).then_some(histogram),
            max_setting_gap: max_gap,
        })
    }
}

/// Pitch times of a Poisson process on the simulation clock grid. The next
/// pitch never precedes the previous arrival.
fn build_schedule(config: &ExperimentConfig) -> Result<Vec<Timing>> {
    use crate::config::DelaySpec;
    let mut rng = RandomStream::for_agent(config.seed, 0, Role::Schedule);
    let total = config.total_trials() as usize;
    let mut schedule = Vec::with_capacity(total);
    let mut clock = 0.0f64;
    for _ in 0..total {
        let gap = -config.mean_gap * (1.0 - rng.random::<f64>()).ln();
        let t_pitch = quantize_time(clock + gap);
        let delta_t = quantize_time(match config.delta_t {
            DelaySpec::Constant { seconds } => seconds,
            DelaySpec::Uniform { min, max } => min + (max - min) * rng.random::<f64>(),
        });
        schedule.push(Timing { t_pitch, delta_t });
        clock = t_pitch + delta_t;
    }
    if clock >= crate::watches::CLOCK_HORIZON {
        return Err(SimError::Config("pitch schedule ran past the clock horizon".into()));
    }
    Ok(schedule)
}

/// Convenience wrapper: build and run in one call.
pub fn run_experiment(config: ExperimentConfig) -> Result<ExperimentOutput> {
    Experiment::new(config)?.run()
}

/// Audit rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// (1) batters never message each other.
    NoBatterToBatter,
    /// (2) batters never message the pitcher.
    NoBatterToPitcher,
    /// (3) balls carry only spin, pitch time and time of flight.
    BallPayload,
    /// (4) each batter receives exactly one ball per trial.
    OneBallPerBatter,
    /// (5) result reports go only to the coordinator.
    ReportsToCoordinator,
    /// (6) sequence numbers increase and timestamps never go back.
    Ordering,
    /// (7) any other flow: balls not from the pitcher, malformed reports.
    Flow,
}

impl Rule {
    pub fn number(self) -> u8 {
        match self {
            Rule::NoBatterToBatter => 1,
            Rule::NoBatterToPitcher => 2,
            Rule::BallPayload => 3,
            Rule::OneBallPerBatter => 4,
            Rule::ReportsToCoordinator => 5,
            Rule::Ordering => 6,
            Rule::Flow => 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Sequence number of the offending message, if one is to blame.
    pub seq: Option<u64>,
    pub rule: Rule,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub passed: bool,
    pub messages: usize,
    pub trials: usize,
    pub violations: Vec<Violation>,
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "audit: {} ({} messages, {} trials, {} violations)",
            if self.passed { "PASS" } else { "FAIL" },
            self.messages,
            self.trials,
            self.violations.len()
        )?;
        for v in &self.violations {
            let seq = v.seq.map_or_else(|| "-".to_string(), |s| s.to_string());
            writeln!(f, "  rule ({}) {:?} at seq {}: {}", v.rule.number(), v.rule, seq, v.description)?;
        }
        Ok(())
    }
}

fn payload_schema_ok(payload: &Map<String, Value>, fields: &[&str]) -> bool {
    payload.len() == fields.len() && fields.iter().all(|k| payload.contains_key(*k))
}

/// Checks the message-flow discipline of a log.
pub fn audit_locality(log: &EventLog, kind: ModelKind) -> AuditReport {
    let mut violations = Vec::new();
    let mut push = |seq: Option<u64>, rule: Rule, description: String| {
        violations.push(Violation { seq, rule, description });
    };

    let mut balls: BTreeMap<u64, [usize; 2]> = BTreeMap::new();
    let mut prev: Option<&Message> = None;
    for m in &log.messages {
        balls.entry(m.trial_id).or_insert([0, 0]);
        if let Some(p) = prev {
            if m.seq <= p.seq {
                push(Some(m.seq), Rule::Ordering, format!("seq {} follows {}", m.seq, p.seq));
            }
            if m.t_send < p.t_send || !m.t_send.is_finite() {
                push(Some(m.seq), Rule::Ordering, format!("timestamp {} precedes {}", m.t_send, p.t_send));
            }
        }
        prev = Some(m);

        let route = format!("{} -> {}", m.sender, m.receiver);
        if m.sender.is_batter() && m.receiver.is_batter() {
            push(Some(m.seq), Rule::NoBatterToBatter, format!("{:?} message {route}", m.kind));
            continue;
        }
        if m.sender.is_batter() && m.receiver == Party::Pitcher {
            push(Some(m.seq), Rule::NoBatterToPitcher, format!("{:?} message {route}", m.kind));
            continue;
        }
        match m.kind {
            MessageKind::Ball => {
                if m.sender != Party::Pitcher || !m.receiver.is_batter() {
                    push(Some(m.seq), Rule::Flow, format!("ball routed {route}"));
                    continue;
                }
                if !payload_schema_ok(&m.payload, &BALL_FIELDS) {
                    let keys: Vec<&String> = m.payload.keys().collect();
                    push(Some(m.seq), Rule::BallPayload, format!("ball payload fields {keys:?}"));
                }
                let slot = usize::from(m.receiver == Party::BatterR);
                balls.entry(m.trial_id).or_insert([0, 0])[slot] += 1;
            }
            MessageKind::ResultReport => {
                if m.receiver != Party::Coordinator {
                    push(Some(m.seq), Rule::ReportsToCoordinator, format!("report routed {route}"));
                } else if !m.sender.is_batter() {
                    push(Some(m.seq), Rule::Flow, format!("report routed {route}"));
                } else if !payload_schema_ok(&m.payload, &REPORT_FIELDS)
                    || !matches!(m.payload.get("outcome").and_then(Value::as_i64), Some(1) | Some(-1))
                {
                    push(Some(m.seq), Rule::Flow, "malformed result report".into());
                }
            }
        }
    }

    // the QM reference is sampled by the coordinator and pitches nothing
    let expected = if kind == ModelKind::QM { 0 } else { 1 };
    for (trial, [left, right]) in &balls {
        for (party, n) in [(Party::BatterL, left), (Party::BatterR, right)] {
            if *n != expected {
                push(None, Rule::OneBallPerBatter, format!("trial {trial}: {party} received {n} balls, expected {expected}"));
            }
        }
    }

    AuditReport { passed: violations.is_empty(), messages: log.messages.len(), trials: balls.len(), violations }
}

/// Binary index of a cell in [`CELLS`] order.
pub fn cell_of(sigma: Outcome, tau: Outcome) -> usize {
    CELLS.iter().position(|c| *c == (sigma, tau)).unwrap_or(0)
}
