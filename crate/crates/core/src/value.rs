//! Value-level types shared by the sheets, the engine and the expression
//! language: the three-code missing-data taxonomy, variable types and the
//! recoded output value.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numeric::format_number;

/// Missing-data code. The taxonomy is closed: exactly three codes exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NaCode {
    A,
    B,
    C,
}

impl NaCode {
    pub const ALL: [NaCode; 3] = [NaCode::A, NaCode::B, NaCode::C];

    pub fn meaning(self) -> &'static str {
        match self {
            NaCode::A => "not applicable",
            NaCode::B => "missing",
            NaCode::C => "not asked",
        }
    }

    pub fn letter(self) -> char {
        match self {
            NaCode::A => 'a',
            NaCode::B => 'b',
            NaCode::C => 'c',
        }
    }

    pub fn from_letter(c: char) -> Option<NaCode> {
        match c {
            'a' => Some(NaCode::A),
            'b' => Some(NaCode::B),
            'c' => Some(NaCode::C),
            _ => None,
        }
    }

    /// Sheet token form, `NA::b`.
    pub fn sheet_token(self) -> String {
        format!("NA::{}", self.letter())
    }

    /// Output-file token form, `NA(b)`.
    pub fn output_token(self) -> String {
        format!("NA({})", self.letter())
    }

    /// Accepts either `NA::x` or `NA(x)`.
    pub fn parse_token(s: &str) -> Option<NaCode> {
        let s = s.trim();
        let letter = if let Some(rest) = s.strip_prefix("NA::") {
            rest
        } else {
            s.strip_prefix("NA(")?.strip_suffix(')')?
        };
        let mut chars = letter.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => NaCode::from_letter(c),
            _ => None,
        }
    }
}

impl fmt::Display for NaCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NA({})", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableType {
    Categorical,
    Continuous,
}

impl VariableType {
    pub fn as_str(self) -> &'static str {
        match self {
            VariableType::Categorical => "categorical",
            VariableType::Continuous => "continuous",
        }
    }
}

impl fmt::Display for VariableType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariableType {
    type Err = String;

    /// Accepts the canonical lowercase names and the `cat`/`cont` shorthands
    /// used by older sheets.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "categorical" | "cat" => Ok(VariableType::Categorical),
            "continuous" | "cont" => Ok(VariableType::Continuous),
            other => Err(other.to_string()),
        }
    }
}

/// One recoded cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum OutputValue {
    Category(String),
    Number(f64),
    Copied(String),
    Na(NaCode),
}

impl OutputValue {
    pub const MISSING: OutputValue = OutputValue::Na(NaCode::B);

    pub fn is_na(&self) -> bool {
        matches!(self, OutputValue::Na(_))
    }

    pub fn na_code(&self) -> Option<NaCode> {
        match self {
            OutputValue::Na(code) => Some(*code),
            _ => None,
        }
    }

    /// Text written to an output file. NA values become `NA(a)`/`NA(b)`/`NA(c)`,
    /// which keeps them distinct from a category literally named "NA".
    pub fn to_cell(&self) -> Cow<'_, str> {
        match self {
            OutputValue::Category(s) | OutputValue::Copied(s) => Cow::Borrowed(s),
            OutputValue::Number(v) => Cow::Owned(format_number(*v)),
            OutputValue::Na(code) => Cow::Owned(code.output_token()),
        }
    }
}

impl fmt::Display for OutputValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_cell())
    }
}
