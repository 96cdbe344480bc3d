//! Random valid variable and details sheets.

use harmonize_core::sheet::{
    DetailsRow, DetailsSheet, Interval, MatchRule, RecEnd, SourceBinding, VariableEntry, VariableSheet, VariableStart,
};
use harmonize_core::{NaCode, VariableType};
use rand::seq::SliceRandom;
use rand::Rng;

const IDENT: &[u8] = b"abcdefxyzABQ0123456789_.-";
const TEXT: &[char] = &[
    'a', 'b', 'Z', '0', '7', ' ', ',', '"', '\'', ';', ':', '[', '(', ')', ']', 'é', 'ß', '中', '\n', '-', '_', '|',
];
const BOUNDS: [f64; 9] = [-3.0, -0.5, 0.0, 0.1, 1.0, 2.5, 9.0, 17.25, 1e6];

fn ident<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..8);
    (0..n).map(|_| *IDENT.choose(rng).unwrap() as char).collect()
}

fn text<R: Rng>(rng: &mut R, newlines: bool) -> String {
    let n = rng.gen_range(0..12);
    let s: String = (0..n)
        .map(|_| *TEXT.choose(rng).unwrap())
        .filter(|c| newlines || *c != '\n')
        .collect();
    s.trim().to_string()
}

fn opt_text<R: Rng>(rng: &mut R) -> Option<String> {
    Some(text(rng, true)).filter(|s| !s.is_empty())
}

fn ty<R: Rng>(rng: &mut R) -> VariableType {
    if rng.gen() {
        VariableType::Categorical
    } else {
        VariableType::Continuous
    }
}

fn distinct<R: Rng>(rng: &mut R, max: usize, f: impl Fn(&mut R) -> String) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for _ in 0..rng.gen_range(1..=max) {
        let v = f(rng);
        if !v.is_empty() && !out.contains(&v) {
            out.push(v);
        }
    }
    if out.is_empty() {
        out.push("db".into());
    }
    out
}

fn source<R: Rng>(rng: &mut R, dbs: &[String]) -> VariableStart {
    let mut bindings = Vec::new();
    for db in dbs {
        if rng.gen_bool(0.7) {
            bindings.push(SourceBinding {
                database: Some(db.clone()),
                name: ident(rng),
            });
        }
    }
    if bindings.is_empty() || rng.gen_bool(0.3) {
        bindings.push(SourceBinding {
            database: None,
            name: ident(rng),
        });
    }
    VariableStart::Source(bindings)
}

fn extras<R: Rng>(rng: &mut R) -> Vec<String> {
    let n = rng.gen_range(0..3);
    let mut cols: Vec<String> = Vec::new();
    while cols.len() < n {
        // the prefix keeps clear of the canonical column names
        let c = format!("x_{}", ident(rng));
        if !cols.contains(&c) {
            cols.push(c);
        }
    }
    cols
}

pub fn variable_sheet<R: Rng>(rng: &mut R) -> VariableSheet {
    let extra_columns = extras(rng);
    let mut names: Vec<String> = Vec::new();
    let mut entries = Vec::new();
    for _ in 0..rng.gen_range(0..12) {
        let variable = format!("{}{}", ident(rng), text(rng, false));
        if names.contains(&variable) {
            continue;
        }
        names.push(variable.clone());
        let dbs = distinct(rng, 3, ident);
        let variable_start = if rng.gen_bool(0.2) {
            VariableStart::Derived(distinct(rng, 3, ident))
        } else {
            source(rng, &dbs)
        };
        entries.push(VariableEntry {
            variable,
            label: opt_text(rng),
            label_long: opt_text(rng),
            section: opt_text(rng),
            variable_type: ty(rng),
            units: opt_text(rng),
            database_start: dbs,
            variable_start,
            extras: extra_columns.iter().map(|_| text(rng, true)).collect(),
        });
    }
    VariableSheet { extra_columns, entries }
}

fn code<R: Rng>(rng: &mut R) -> String {
    loop {
        let c = text(rng, false);
        if !c.is_empty() && c != "copy" && !c.starts_with("NA::") && !c.starts_with("Func::") {
            return c;
        }
    }
}

fn interval<R: Rng>(rng: &mut R) -> Interval {
    let mut a = *BOUNDS.choose(rng).unwrap();
    let mut b = *BOUNDS.choose(rng).unwrap();
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let closed = a == b;
    Interval {
        low: a,
        high: b,
        low_closed: closed || rng.gen(),
        high_closed: closed || rng.gen(),
    }
}

fn na<R: Rng>(rng: &mut R) -> NaCode {
    *NaCode::ALL.choose(rng).unwrap()
}

fn details_row<R: Rng>(rng: &mut R, extra: usize) -> DetailsRow {
    let dbs = distinct(rng, 2, ident);
    let derived = rng.gen_bool(0.1);
    let (rec_start, mut type_start) = match rng.gen_range(0..5) {
        _ if derived => (MatchRule::Else, ty(rng)),
        0 => (
            MatchRule::ValueSet {
                values: distinct(rng, 4, |r| text(r, false)),
            },
            ty(rng),
        ),
        1 => (MatchRule::Interval(interval(rng)), VariableType::Continuous),
        2 => (MatchRule::Else, ty(rng)),
        3 => (MatchRule::Copy, ty(rng)),
        _ => (MatchRule::ExplicitNa { code: na(rng) }, ty(rng)),
    };
    let mut type_end = ty(rng);
    let rec_end = if derived {
        RecEnd::Func(ident(rng))
    } else {
        match rng.gen_range(0..3) {
            0 => {
                type_end = type_start;
                RecEnd::Copy
            }
            1 => RecEnd::Na(na(rng)),
            _ if type_end == VariableType::Continuous => RecEnd::Value(BOUNDS.choose(rng).unwrap().to_string()),
            _ => RecEnd::Value(code(rng)),
        }
    };
    if rec_start == MatchRule::Copy && type_end == VariableType::Continuous && !matches!(rec_end, RecEnd::Copy) {
        type_start = VariableType::Continuous;
    }
    if rec_end == RecEnd::Copy {
        type_end = type_start;
    }
    DetailsRow {
        variable: ident(rng),
        type_end,
        type_start,
        variable_start: if derived {
            VariableStart::Derived(distinct(rng, 3, ident))
        } else {
            source(rng, &dbs)
        },
        database_start: dbs,
        rec_end,
        cat_label: opt_text(rng),
        cat_label_long: opt_text(rng),
        units: opt_text(rng),
        rec_start,
        notes: opt_text(rng),
        extras: (0..extra).map(|_| text(rng, true)).collect(),
    }
}

pub fn details_sheet<R: Rng>(rng: &mut R) -> DetailsSheet {
    let extra_columns = extras(rng);
    let rows = (0..rng.gen_range(0..15))
        .map(|_| details_row(rng, extra_columns.len()))
        .collect();
    DetailsSheet { extra_columns, rows }
}
