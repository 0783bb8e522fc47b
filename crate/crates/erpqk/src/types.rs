//! Shared domain vocabulary.

use serde::{Deserialize, Serialize};

/// Trial class in the oddball paradigm.
///
/// The class order is fixed everywhere: `Target` first, `NonTarget` second.
/// The sign mapping used by the SVM is `Target` = +1, `NonTarget` = -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Target,
    NonTarget,
}

impl Label {
    /// Fixed class order: `[Target, NonTarget]`.
    pub const CLASS_ORDER: [Label; 2] = [Label::Target, Label::NonTarget];

    /// SVM sign convention.
    pub fn sign(self) -> f64 {
        match self {
            Label::Target => 1.0,
            Label::NonTarget => -1.0,
        }
    }

    /// Inverse of [`Label::sign`]; a decision value of exactly 0 maps to `Target`.
    pub fn from_decision(value: f64) -> Label {
        if value >= 0.0 {
            Label::Target
        } else {
            Label::NonTarget
        }
    }

    /// Index into [`Label::CLASS_ORDER`].
    pub fn class_index(self) -> usize {
        match self {
            Label::Target => 0,
            Label::NonTarget => 1,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Target => write!(f, "TARGET"),
            Label::NonTarget => write!(f, "NONTARGET"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_mapping_is_fixed() {
        assert_eq!(Label::Target.sign(), 1.0);
        assert_eq!(Label::NonTarget.sign(), -1.0);
    }

    #[test]
    fn zero_decision_maps_to_target() {
        assert_eq!(Label::from_decision(0.0), Label::Target);
        assert_eq!(Label::from_decision(-0.0), Label::Target);
        assert_eq!(Label::from_decision(1e-300), Label::Target);
        assert_eq!(Label::from_decision(-1e-300), Label::NonTarget);
    }
}
