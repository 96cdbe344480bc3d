//! Locale-independent number handling and the null-detection rule.

/// Source cells that count as missing: empty (after trimming) and the
/// exact tokens `NA` and `NaN`.
pub fn is_missing(raw: &str) -> bool {
    matches!(raw.trim(), "" | "NA" | "NaN")
}

/// Parses a plain decimal number: optional sign, digits with an optional
/// fractional part, optional exponent. Period is the only decimal separator;
/// thousands separators, `inf`, `nan` and hex forms are rejected.
pub fn parse_decimal(raw: &str) -> Option<f64> {
    let s = raw.trim();
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let int_digits = i - int_start;
    let mut frac_digits = 0;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        frac_digits = i - frac_start;
    }
    if int_digits + frac_digits == 0 {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Shortest round-trip rendering; integral values print without a fraction.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        // folds -0 into 0
        return "0".to_string();
    }
    format!("{v}")
}
