use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathFormat {
    /// Economic indicators move first, then expectations are revised.
    A,
    /// Expectations are revised first, then indicators follow.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatSource {
    Tagged,
    Inferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpace {
    Tightening,
    Easing,
    Hold,
    Unspecified,
}

impl PolicySpace {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicySpace::Tightening => "tightening",
            PolicySpace::Easing => "easing",
            PolicySpace::Hold => "hold",
            PolicySpace::Unspecified => "unspecified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionPath {
    pub shock: String,
    pub channel: Option<String>,
    pub states: Vec<String>,
    pub format: PathFormat,
    pub format_source: FormatSource,
    pub advice: String,
    pub policy_space: PolicySpace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathError {
    MissingSegment(char),
    UnexpectedSegment { label: String, position: usize },
    MalformedSegment { position: usize, text: String },
    EmptySegment(char),
    EmptyState(usize),
    UnknownChannel(String),
    FormatMismatch { tagged: PathFormat, inferred: PathFormat },
}

impl fmt::Display for PathError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathError::MissingSegment(c) => write!(f, "missing {c} segment"),
            PathError::UnexpectedSegment { label, position } => {
                write!(f, "unexpected {label} segment at position {position}")
            }
            PathError::MalformedSegment { position, text } => {
                write!(f, "segment {position} is not of the form L(...): `{text}`")
            }
            PathError::EmptySegment(c) => write!(f, "{c} segment is empty"),
            PathError::EmptyState(i) => write!(f, "state {i} in Z is empty"),
            PathError::UnknownChannel(c) => write!(f, "unknown transmission channel `{c}`"),
            PathError::FormatMismatch { tagged, inferred } => {
                write!(f, "tagged as format {tagged:?} but the states read as format {inferred:?}")
            }
        }
    }
}

impl std::error::Error for PathError {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathOptions {
    pub channels: Vec<String>,
    /// Lowercase substrings marking a state as an expectation revision.
    pub expectation_cues: Vec<String>,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            channels: ["credit", "asset_price", "aggregate_demand"].map(String::from).to_vec(),
            expectation_cues: ["expect", "anticipat", "priced in", "pricing in", "price in", "outlook"]
                .map(String::from)
                .to_vec(),
        }
    }
}

const TIGHTENING: &[&str] = &[
    "tighten",
    "hike",
    "raise rate",
    "raising rate",
    "increase rate",
    "restrictive",
    "hawkish",
];
const EASING: &[&str] = &["ease", "easing", "cut", "lower rate", "lowering rate", "accommodat", "stimul", "dovish"];
const HOLD: &[&str] = &["hold", "maintain", "pause", "unchanged", "steady", "wait"];

fn classify_policy_space(advice: &str) -> PolicySpace {
    let lower = advice.to_lowercase();
    let hit = |cues: &[&str]| cues.iter().any(|c| lower.contains(c));
    if hit(TIGHTENING) {
        PolicySpace::Tightening
    } else if hit(EASING) {
        PolicySpace::Easing
    } else if hit(HOLD) {
        PolicySpace::Hold
    } else {
        PolicySpace::Unspecified
    }
}

/// Splits on `->` outside parentheses.
fn split_arrows(s: &str) -> Vec<&str> {
    let bytes = s.as_bytes();
    let mut depth = 0i32;
    let mut parts = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'-' if depth == 0 && bytes.get(i + 1) == Some(&b'>') => {
                parts.push(&s[start..i]);
                start = i + 2;
                i += 1;
            }
            _ => {}
        }
        i += 1;
    }
    parts.push(&s[start..]);
    parts
}

/// `L(content)` with the outer parentheses matching each other.
fn segment(s: &str) -> Option<(char, &str)> {
    let s = s.trim();
    let mut chars = s.chars();
    let label = chars.next()?;
    let rest = chars.as_str().trim_start();
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    let mut depth = 0i32;
    for c in inner.chars() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
            }
            _ => {}
        }
    }
    (depth == 0).then_some((label, inner.trim()))
}

fn normalize_channel(s: &str) -> String {
    let n: String = s
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect();
    n.strip_suffix("_channel").map(str::to_string).unwrap_or(n)
}

pub fn parse_transmission_path(text: &str) -> Result<TransmissionPath, PathError> {
    parse_transmission_path_with(text, &PathOptions::default())
}

/// Parses `X(shock) -> [Y(channel) ->] Z(s1 -> s2 ...) -> M(advice)`,
/// optionally prefixed with `Format A:` or `Format B:`.
pub fn parse_transmission_path_with(text: &str, options: &PathOptions) -> Result<TransmissionPath, PathError> {
    let mut body = text.trim();
    let mut tagged = None;
    if let Some(rest) = body.strip_prefix("Format ").or_else(|| body.strip_prefix("format ")) {
        let (tag, after) = rest.split_once(':').unwrap_or((rest, ""));
        tagged = match tag.trim() {
            "A" => Some(PathFormat::A),
            "B" => Some(PathFormat::B),
            _ => None,
        };
        if tagged.is_some() {
            body = after.trim();
        }
    }

    let mut segments = Vec::new();
    for (position, part) in split_arrows(body).into_iter().enumerate() {
        let seg = segment(part).ok_or_else(|| PathError::MalformedSegment {
            position,
            text: part.trim().to_string(),
        })?;
        segments.push((position, seg));
    }

    let mut iter = segments.into_iter().peekable();
    let mut take = |label: char, optional: bool| -> Result<Option<String>, PathError> {
        match iter.peek() {
            Some(&(_, (l, content))) if l == label => {
                iter.next();
                if content.is_empty() {
                    return Err(PathError::EmptySegment(label));
                }
                Ok(Some(content.to_string()))
            }
            _ if optional => Ok(None),
            _ => Err(PathError::MissingSegment(label)),
        }
    };
    let shock = take('X', false)?.expect("required");
    let channel = take('Y', true)?;
    let z = take('Z', false)?.expect("required");
    let advice = take('M', false)?.expect("required");
    if let Some((position, (label, _))) = iter.next() {
        return Err(PathError::UnexpectedSegment {
            label: label.to_string(),
            position,
        });
    }

    let channel = match channel {
        Some(c) => {
            let n = normalize_channel(&c);
            if !options.channels.iter().any(|k| normalize_channel(k) == n) {
                return Err(PathError::UnknownChannel(c));
            }
            Some(n)
        }
        None => None,
    };

    let mut states = Vec::new();
    for (i, s) in split_arrows(&z).into_iter().enumerate() {
        let s = s.trim();
        if s.is_empty() {
            return Err(PathError::EmptyState(i));
        }
        states.push(s.to_string());
    }

    let is_expectation = |s: &str| {
        let lower = s.to_lowercase();
        options.expectation_cues.iter().any(|c| lower.contains(c.as_str()))
    };
    let flags: Vec<bool> = states.iter().map(|s| is_expectation(s)).collect();
    let inferred = if flags[0] { PathFormat::B } else { PathFormat::A };
    let informative = flags.iter().any(|&f| f) && flags.iter().any(|&f| !f);
    let (format, format_source) = match tagged {
        Some(t) if informative && t != inferred => {
            return Err(PathError::FormatMismatch { tagged: t, inferred })
        }
        Some(t) => (t, FormatSource::Tagged),
        None => (inferred, FormatSource::Inferred),
    };

    Ok(TransmissionPath {
        shock,
        channel,
        states,
        format,
        format_source,
        policy_space: classify_policy_space(&advice),
        advice,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_a_with_channel() {
        let p = parse_transmission_path(
            "X(oil supply shock) -> Y(credit) -> Z(headline CPI rises -> inflation expectations drift up) -> M(hike rates)",
        )
        .unwrap();
        assert_eq!(p.shock, "oil supply shock");
        assert_eq!(p.channel.as_deref(), Some("credit"));
        assert_eq!(p.states.len(), 2);
        assert_eq!(p.format, PathFormat::A);
        assert_eq!(p.format_source, FormatSource::Inferred);
        assert_eq!(p.policy_space, PolicySpace::Tightening);
    }

    #[test]
    fn format_b_without_channel() {
        let p = parse_transmission_path(
            "X(dovish guidance (surprise)) -> Z(markets expect cuts -> term premium falls) -> M(hold rates steady)",
        )
        .unwrap();
        assert_eq!(p.shock, "dovish guidance (surprise)");
        assert_eq!(p.channel, None);
        assert_eq!(p.format, PathFormat::B);
        assert_eq!(p.policy_space, PolicySpace::Hold);
    }

    #[test]
    fn explicit_tag() {
        let p = parse_transmission_path("Format B: X(s) -> Z(expected path repriced) -> M(easing bias)").unwrap();
        assert_eq!((p.format, p.format_source), (PathFormat::B, FormatSource::Tagged));
        assert_eq!(p.policy_space, PolicySpace::Easing);
        let err = parse_transmission_path("Format B: X(s) -> Z(wages rise -> expectations rise) -> M(hold)").unwrap_err();
        assert_eq!(
            err,
            PathError::FormatMismatch {
                tagged: PathFormat::B,
                inferred: PathFormat::A
            }
        );
    }

    #[test]
    fn channel_spellings_normalize() {
        let p = parse_transmission_path("X(s) -> Y(Asset Price channel) -> Z(a) -> M(b)").unwrap();
        assert_eq!(p.channel.as_deref(), Some("asset_price"));
        assert_eq!(
            parse_transmission_path("X(s) -> Y(exchange rate) -> Z(a) -> M(b)").unwrap_err(),
            PathError::UnknownChannel("exchange rate".into())
        );
        let opts = PathOptions {
            channels: vec!["exchange_rate".into()],
            ..PathOptions::default()
        };
        assert!(parse_transmission_path_with("X(s) -> Y(exchange rate) -> Z(a) -> M(b)", &opts).is_ok());
    }

    #[test]
    fn structure_errors() {
        let err = |s: &str| parse_transmission_path(s).unwrap_err();
        assert_eq!(err("X(s) -> M(b)"), PathError::MissingSegment('Z'));
        assert_eq!(err("Z(a) -> M(b)"), PathError::MissingSegment('X'));
        assert_eq!(err("X(s) -> Z(a)"), PathError::MissingSegment('M'));
        assert_eq!(err("X(s) -> Z() -> M(b)"), PathError::EmptySegment('Z'));
        assert_eq!(err("X(s) -> Z(a -> ) -> M(b)"), PathError::EmptyState(1));
        assert!(matches!(err("X(s) -> Z(a) -> M(b) -> Z(c)"), PathError::UnexpectedSegment { position: 3, .. }));
        assert!(matches!(err("X(s -> Z(a) -> M(b)"), PathError::MalformedSegment { .. }));
        assert!(matches!(err("X(s) -> Z(a) -> M(b) extra"), PathError::MalformedSegment { position: 2, .. }));
    }
}
