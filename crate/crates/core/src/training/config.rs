use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    #[default]
    Alternating,
    Joint,
}

impl FromStr for Schedule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "alternating" => Ok(Schedule::Alternating),
            "joint" => Ok(Schedule::Joint),
            _ => Err(format!("unknown schedule {s:?} (expected alternating or joint)")),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Alternating => "alternating",
            Schedule::Joint => "joint",
        })
    }
}

/// Input representation crossed with training scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    OriScae,
    OriSsdl,
    BiradsScae,
    #[default]
    BiradsSsdl,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::OriScae,
        Variant::OriSsdl,
        Variant::BiradsScae,
        Variant::BiradsSsdl,
    ];

    /// Uses boundary-weighted inputs rather than raw images.
    pub fn is_birads(self) -> bool {
        matches!(self, Variant::BiradsScae | Variant::BiradsSsdl)
    }

    /// Two-stage reconstruction-then-classification training.
    pub fn is_scae(self) -> bool {
        matches!(self, Variant::OriScae | Variant::BiradsScae)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::OriScae => "ori-scae",
            Variant::OriSsdl => "ori-ssdl",
            Variant::BiradsScae => "birads-scae",
            Variant::BiradsSsdl => "birads-ssdl",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                format!("unknown variant {s:?} (expected ori-scae, ori-ssdl, birads-scae or birads-ssdl)")
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Hard cap per training stage.
    pub max_epochs: usize,
    pub stop_window: usize,
    pub stop_rel_tol: f64,
    pub seed: u64,
    pub schedule: Schedule,
    pub variant: Variant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.5,
            gamma: 1e-4,
            lr: 3e-4,
            batch_size: 16,
            max_epochs: 100,
            stop_window: 10,
            stop_rel_tol: 1e-3,
            seed: 0,
            schedule: Schedule::Alternating,
            variant: Variant::BiradsSsdl,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::param(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must be in [0,1], got {}", self.lambda));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.stop_window < 2 {
            return bad(format!("stop window must be at least 2, got {}", self.stop_window));
        }
        if !(self.stop_rel_tol > 0.0) {
            return bad(format!("stop tolerance must be positive, got {}", self.stop_rel_tol));
        }
        Ok(())
    }
}
