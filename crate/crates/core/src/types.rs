use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Monetary-policy stance. The declaration order is the fixed total order
/// used for every tie-break in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StanceLabel {
    Hawkish,
    Dovish,
    Neutral,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 3] = [StanceLabel::Hawkish, StanceLabel::Dovish, StanceLabel::Neutral];

    pub fn index(self) -> usize {
        match self {
            StanceLabel::Hawkish => 0,
            StanceLabel::Dovish => 1,
            StanceLabel::Neutral => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::Hawkish => "HAWKISH",
            StanceLabel::Dovish => "DOVISH",
            StanceLabel::Neutral => "NEUTRAL",
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel(pub String);

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown stance label `{}` (expected HAWKISH, DOVISH or NEUTRAL)", self.0)
    }
}

impl std::error::Error for UnknownLabel {}

impl FromStr for StanceLabel {
    type Err = UnknownLabel;

    /// Exact spelling only.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "HAWKISH" => Ok(StanceLabel::Hawkish),
            "DOVISH" => Ok(StanceLabel::Dovish),
            "NEUTRAL" => Ok(StanceLabel::Neutral),
            other => Err(UnknownLabel(other.to_string())),
        }
    }
}

/// Kind of central-bank communication a record was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Minutes,
    PressConference,
    Speech,
    Other,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Minutes,
        Category::PressConference,
        Category::Speech,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Minutes => "minutes",
            Category::PressConference => "press_conference",
            Category::Speech => "speech",
            Category::Other => "other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_order_is_fixed() {
        assert!(StanceLabel::Hawkish < StanceLabel::Dovish);
        assert!(StanceLabel::Dovish < StanceLabel::Neutral);
        for (i, l) in StanceLabel::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(StanceLabel::from_index(i), Some(*l));
        }
    }

    #[test]
    fn label_parsing_is_exact() {
        assert_eq!("DOVISH".parse::<StanceLabel>(), Ok(StanceLabel::Dovish));
        assert!("dovish".parse::<StanceLabel>().is_err());
        assert!("BULLISH".parse::<StanceLabel>().is_err());
        assert_eq!(
            serde_json::to_string(&StanceLabel::Hawkish).unwrap(),
            "\"HAWKISH\""
        );
    }
}
