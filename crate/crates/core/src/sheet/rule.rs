//! The `recStart` match-rule grammar.
//!
//! ```text
//! else            -> Else
//! copy            -> Copy
//! NA::a|b|c       -> ExplicitNa
//! [x,y] (x,y] [x,y) (x,y)  -> Interval with the stated closedness
//! v1,v2,"v,3"     -> ValueSet (items trimmed; double quotes protect commas)
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{format_number, parse_decimal};
use crate::value::NaCode;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot parse rule {text:?}: {reason}")]
pub struct RuleError {
    pub text: String,
    pub reason: String,
}

impl RuleError {
    fn new(text: &str, reason: impl Into<String>) -> Self {
        RuleError {
            text: text.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
    pub low_closed: bool,
    pub high_closed: bool,
}

impl Interval {
    pub fn closed(low: f64, high: f64) -> Self {
        Interval {
            low,
            high,
            low_closed: true,
            high_closed: true,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.low_closed { v >= self.low } else { v > self.low };
        let below = if self.high_closed {
            v <= self.high
        } else {
            v < self.high
        };
        above && below
    }

    /// True when some number lies in both intervals.
    pub fn overlaps(&self, other: &Interval) -> bool {
        let (lo, lo_closed) = if self.low > other.low {
            (self.low, self.low_closed)
        } else if other.low > self.low {
            (other.low, other.low_closed)
        } else {
            (self.low, self.low_closed && other.low_closed)
        };
        let (hi, hi_closed) = if self.high < other.high {
            (self.high, self.high_closed)
        } else if other.high < self.high {
            (other.high, other.high_closed)
        } else {
            (self.high, self.high_closed && other.high_closed)
        };
        lo < hi || (lo == hi && lo_closed && hi_closed)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{},{}{}",
            if self.low_closed { '[' } else { '(' },
            format_number(self.low),
            format_number(self.high),
            if self.high_closed { ']' } else { ')' },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum MatchRule {
    ValueSet { values: Vec<String> },
    Interval(Interval),
    Else,
    Copy,
    ExplicitNa { code: NaCode },
}

impl MatchRule {
    pub fn kind_name(&self) -> &'static str {
        match self {
            MatchRule::ValueSet { .. } => "ValueSet",
            MatchRule::Interval(_) => "Interval",
            MatchRule::Else => "Else",
            MatchRule::Copy => "Copy",
            MatchRule::ExplicitNa { .. } => "ExplicitNA",
        }
    }

    pub fn is_else(&self) -> bool {
        matches!(self, MatchRule::Else)
    }
}

pub fn parse_match_rule(text: &str) -> Result<MatchRule, RuleError> {
    let t = text.trim();
    match t {
        "" => return Err(RuleError::new(text, "empty rule")),
        "else" => return Ok(MatchRule::Else),
        "copy" => return Ok(MatchRule::Copy),
        _ => {}
    }
    if t.starts_with("NA::") {
        return NaCode::parse_token(t)
            .map(|code| MatchRule::ExplicitNa { code })
            .ok_or_else(|| RuleError::new(text, "NA code must be one of a, b, c"));
    }
    if t.starts_with('[') || t.starts_with('(') {
        return parse_interval(text, t).map(MatchRule::Interval);
    }
    parse_value_set(text, t)
}

fn parse_interval(text: &str, t: &str) -> Result<Interval, RuleError> {
    let low_closed = t.starts_with('[');
    let high_closed = match t.chars().last() {
        Some(']') => true,
        Some(')') => false,
        _ => return Err(RuleError::new(text, "interval must end with ']' or ')'")),
    };
    if t.len() < 2 {
        return Err(RuleError::new(text, "truncated interval"));
    }
    let inner = &t[1..t.len() - 1];
    let mut parts = inner.split(',');
    let (lo, hi) = match (parts.next(), parts.next(), parts.next()) {
        (Some(lo), Some(hi), None) => (lo, hi),
        _ => return Err(RuleError::new(text, "interval needs exactly two bounds")),
    };
    let low = parse_decimal(lo).ok_or_else(|| RuleError::new(text, format!("bad lower bound {:?}", lo.trim())))?;
    let high = parse_decimal(hi).ok_or_else(|| RuleError::new(text, format!("bad upper bound {:?}", hi.trim())))?;
    if low > high {
        return Err(RuleError::new(text, "lower bound exceeds upper bound"));
    }
    let iv = Interval {
        low,
        high,
        low_closed,
        high_closed,
    };
    if low == high && !(low_closed && high_closed) {
        return Err(RuleError::new(text, "interval is empty"));
    }
    Ok(iv)
}

fn parse_value_set(text: &str, t: &str) -> Result<MatchRule, RuleError> {
    let mut values: Vec<String> = Vec::new();
    let mut chars = t.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        let item = if chars.peek() == Some(&'"') {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') if chars.peek() == Some(&'"') => {
                        chars.next();
                        s.push('"');
                    }
                    Some('"') => break,
                    Some(c) => s.push(c),
                    None => return Err(RuleError::new(text, "unterminated quoted value")),
                }
            }
            while chars.peek().is_some_and(|c| c.is_whitespace()) {
                chars.next();
            }
            if !matches!(chars.peek(), None | Some(',')) {
                return Err(RuleError::new(text, "text after quoted value"));
            }
            s.trim().to_string()
        } else {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c == ',' {
                    break;
                }
                if c == '"' {
                    return Err(RuleError::new(text, "stray quote inside value"));
                }
                s.push(c);
                chars.next();
            }
            s.trim().to_string()
        };
        if item.is_empty() {
            return Err(RuleError::new(text, "empty value in list"));
        }
        if values.contains(&item) {
            return Err(RuleError::new(text, format!("duplicate value {item:?}")));
        }
        values.push(item);
        match chars.next() {
            Some(',') => continue,
            None => break,
            Some(_) => unreachable!("value scan stops only at ',' or end"),
        }
    }
    Ok(MatchRule::ValueSet { values })
}

fn needs_quotes(v: &str, single: bool) -> bool {
    v.contains(',')
        || v.contains('"')
        || v.starts_with('[')
        || v.starts_with('(')
        || v.starts_with("NA::")
        || (single && (v == "else" || v == "copy"))
}

impl fmt::Display for MatchRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchRule::Else => f.write_str("else"),
            MatchRule::Copy => f.write_str("copy"),
            MatchRule::ExplicitNa { code } => f.write_str(&code.sheet_token()),
            MatchRule::Interval(iv) => iv.fmt(f),
            MatchRule::ValueSet { values } => {
                let single = values.len() == 1;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    if needs_quotes(v, single) {
                        write!(f, "\"{}\"", v.replace('"', "\"\""))?;
                    } else {
                        f.write_str(v)?;
                    }
                }
                Ok(())
            }
        }
    }
}
