use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.05;

/// Reading of a probe trajectory from its first and last epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pattern {
    PreEncoded,
    EncodedByFineTuning,
    NotPreEncoded,
    LostByFineTuning,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [
        Pattern::PreEncoded,
        Pattern::EncodedByFineTuning,
        Pattern::NotPreEncoded,
        Pattern::LostByFineTuning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::PreEncoded => "pre-encoded",
            Pattern::EncodedByFineTuning => "encoded by fine-tuning",
            Pattern::NotPreEncoded => "not pre-encoded",
            Pattern::LostByFineTuning => "lost by fine-tuning",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pattern::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::invalid("Pattern", format!("unknown pattern `{s}`")))
    }
}

/// An epoch counts as encoding the feature when its accuracy exceeds the
/// baseline by more than `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternRule {
    pub delta: f64,
}

impl Default for PatternRule {
    fn default() -> Self {
        PatternRule { delta: DEFAULT_DELTA }
    }
}

impl PatternRule {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("delta must be finite and ≥ 0, got {delta}")));
        }
        Ok(PatternRule { delta })
    }
}

pub fn classify_pattern(trajectory: &[f64], baseline: f64, rule: PatternRule) -> Result<Pattern> {
    if trajectory.len() < 2 {
        return Err(Error::invalid(
            "classify_pattern",
            format!("trajectory needs at least 2 epochs, got {}", trajectory.len()),
        ));
    }
    let encoded = |a: f64| a > baseline + rule.delta;
    let pre = encoded(trajectory[0]);
    let post = encoded(trajectory[trajectory.len() - 1]);
    Ok(match (pre, post) {
        (true, true) => Pattern::PreEncoded,
        (false, true) => Pattern::EncodedByFineTuning,
        (false, false) => Pattern::NotPreEncoded,
        (true, false) => Pattern::LostByFineTuning,
    })
}
