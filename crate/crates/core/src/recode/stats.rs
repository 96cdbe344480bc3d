use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::value::NaCode;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaBreakdown {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub total: u64,
}

impl NaBreakdown {
    pub fn add(&mut self, code: NaCode) {
        match code {
            NaCode::A => self.a += 1,
            NaCode::B => self.b += 1,
            NaCode::C => self.c += 1,
        }
        self.total += 1;
    }
}

/// Counters for one recode run. Only columns that produced at least one NA
/// (or one unmatched value) appear in the maps.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunStats {
    pub rows_in: u64,
    pub rows_out: u64,
    pub na_counts: BTreeMap<String, NaBreakdown>,
    /// Present values that matched no rule and became NA(b).
    pub unmatched: BTreeMap<String, u64>,
}

impl RunStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}
