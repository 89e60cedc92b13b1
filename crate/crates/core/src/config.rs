//! Experiment configuration shared by the library and the command line.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::models::{ModelKind, SettingsPair};
use crate::watches::{WatchBank, CLOCK_HORIZON};

/// A settings pair with the label used in count tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub label: String,
    #[serde(flatten)]
    pub pair: SettingsPair,
}

impl LabeledPair {
    /// Coplanar pair with the right bat at `theta_deg` from the left one.
    pub fn at_angle_deg(theta_deg: f64) -> Self {
        LabeledPair { label: angle_label(theta_deg), pair: SettingsPair::at_angle_deg(theta_deg) }
    }
}

pub fn angle_label(theta_deg: f64) -> String {
    if theta_deg.fract() == 0.0 {
        format!("theta_{:03}", theta_deg as i64)
    } else {
        format!("theta_{theta_deg}")
    }
}

/// How the batters' orientations are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SettingsMode {
    /// Batter watches pinned to each listed pair in turn, `trials` times each.
    Fixed { pairs: Vec<LabeledPair> },
    /// Watches run freely; outcomes are tabulated by relative angle in `bins`
    /// equal bins over [0°, 180°].
    WatchDriven { bins: usize },
}

/// Time of flight of the balls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelaySpec {
    Constant { seconds: f64 },
    Uniform { min: f64, max: f64 },
}

impl DelaySpec {
    pub fn max(&self) -> f64 {
        match *self {
            DelaySpec::Constant { seconds } => seconds,
            DelaySpec::Uniform { max, .. } => max,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DelaySpec::Constant { seconds } => seconds.is_finite() && seconds >= 0.0,
            DelaySpec::Uniform { min, max } => min.is_finite() && max.is_finite() && min >= 0.0 && max >= min,
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::Config(format!("invalid time of flight {self:?}")))
        }
    }
}

impl Default for DelaySpec {
    fn default() -> Self {
        DelaySpec::Constant { seconds: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub settings: SettingsMode,
    /// Trials per settings pair (fixed mode) or in total (watch-driven mode).
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub delta_t: DelaySpec,
    #[serde(default)]
    pub watches: WatchBank,
    /// Mean idle time between the arrival of one pair of balls and the next pitch.
    #[serde(default = "default_mean_gap")]
    pub mean_gap: f64,
    #[serde(default)]
    pub log_events: bool,
    #[serde(default)]
    pub keep_records: bool,
}

pub fn default_mean_gap() -> f64 {
    1000.0
}

impl ExperimentConfig {
    pub fn fixed(model: ModelKind, pairs: Vec<LabeledPair>, trials: u64, seed: u64) -> Self {
        ExperimentConfig {
            model,
            settings: SettingsMode::Fixed { pairs },
            trials,
            seed,
            delta_t: DelaySpec::default(),
            watches: WatchBank::default(),
            mean_gap: default_mean_gap(),
            log_events: false,
            keep_records: false,
        }
    }

    pub fn watch_driven(model: ModelKind, trials: u64, seed: u64) -> Self {
        ExperimentConfig { settings: SettingsMode::WatchDriven { bins: 18 }, ..Self::fixed(model, Vec::new(), trials, seed) }
    }

    /// Total number of trials across all settings pairs.
    pub fn total_trials(&self) -> u64 {
        match &self.settings {
            SettingsMode::Fixed { pairs } => self.trials * pairs.len() as u64,
            SettingsMode::WatchDriven { .. } => self.trials,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(SimError::Config("at least one trial is required".into()));
        }
        match &self.settings {
            SettingsMode::Fixed { pairs } => {
                if pairs.is_empty() {
                    return Err(SimError::Config("no settings pairs given".into()));
                }
                let mut labels: Vec<&str> = pairs.iter().map(|p| p.label.as_str()).collect();
                labels.sort_unstable();
                labels.dedup();
                if labels.len() != pairs.len() {
                    return Err(SimError::Config("settings labels must be unique".into()));
                }
            }
            SettingsMode::WatchDriven { bins } => {
                if *bins == 0 {
                    return Err(SimError::Config("angle bins must be positive".into()));
                }
            }
        }
        self.delta_t.validate()?;
        if !(self.mean_gap.is_finite() && self.mean_gap > 0.0) {
            return Err(SimError::Config("mean gap must be positive".into()));
        }
        self.watches.validate()?;
        // generous margin over the expected schedule length
        let expected = self.total_trials() as f64 * (self.mean_gap + self.delta_t.max());
        if 1.5 * expected + 50.0 * self.mean_gap >= CLOCK_HORIZON {
            return Err(SimError::Config(format!(
                "schedule of about {expected:.3e} s exceeds the clock horizon; lower mean_gap"
            )));
        }
        Ok(())
    }
}
