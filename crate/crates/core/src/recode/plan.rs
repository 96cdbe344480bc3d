use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PlanError;
use crate::dvl::{CompiledDerived, DerivedVariableLibrary, DerivedVariableSpec};
use crate::numeric::{is_missing, parse_decimal};
use crate::sheet::{validate_sheets, DetailsSheet, MatchRule, RecEnd, VariableSheet};
use crate::value::{NaCode, OutputValue, VariableType};

/// What a matching rule produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum RuleOutput {
    Fixed(OutputValue),
    /// The trimmed source value; numeric when the output is continuous.
    Copy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompiledRule {
    pub rule: MatchRule,
    pub output: RuleOutput,
    pub cat_label: Option<String>,
    /// 1-based details-sheet row the rule came from (0 when built in code).
    pub sheet_row: usize,
}

impl CompiledRule {
    pub fn new(rule: MatchRule, output: RuleOutput) -> Self {
        CompiledRule {
            rule,
            output,
            cat_label: None,
            sheet_row: 0,
        }
    }
}

/// Rule table of one recoded variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VariablePlan {
    pub name: String,
    pub source_column: String,
    pub type_start: VariableType,
    pub type_end: VariableType,
    pub rules: Vec<CompiledRule>,
}

impl VariablePlan {
    /// Keeps sheet order except that `else` rules move to the end.
    pub fn new(
        name: impl Into<String>,
        source_column: impl Into<String>,
        type_start: VariableType,
        type_end: VariableType,
        rules: Vec<CompiledRule>,
    ) -> Self {
        let (mut ordered, elses): (Vec<_>, Vec<_>) = rules.into_iter().partition(|r| !r.rule.is_else());
        ordered.extend(elses);
        VariablePlan {
            name: name.into(),
            source_column: source_column.into(),
            type_start,
            type_end,
            rules: ordered,
        }
    }

    /// Recodes one raw cell. The flag is false when a present value matched
    /// no rule (and so became NA(b)).
    pub fn apply(&self, raw: Option<&str>) -> (OutputValue, bool) {
        let raw = match raw {
            Some(r) if !is_missing(r) => r.trim(),
            _ => return (OutputValue::MISSING, true),
        };
        let mut number: Option<Option<f64>> = None;
        let mut numeric = || *number.get_or_insert_with(|| parse_decimal(raw));
        for r in &self.rules {
            let hit = match &r.rule {
                MatchRule::ValueSet { values } => values.iter().any(|v| v == raw),
                MatchRule::Interval(iv) => numeric().is_some_and(|x| iv.contains(x)),
                MatchRule::Else => true,
                MatchRule::Copy => self.type_start == VariableType::Categorical || numeric().is_some(),
                MatchRule::ExplicitNa { code } => NaCode::parse_token(raw) == Some(*code),
            };
            if !hit {
                continue;
            }
            match &r.output {
                RuleOutput::Fixed(v) => return (v.clone(), true),
                RuleOutput::Copy => match self.type_end {
                    VariableType::Categorical => return (OutputValue::Copied(raw.to_string()), true),
                    VariableType::Continuous => {
                        if let Some(x) = numeric() {
                            return (OutputValue::Number(x), true);
                        }
                    }
                },
            }
        }
        (OutputValue::MISSING, false)
    }
}

/// A derived variable to pull from a library, optionally pinned to a version.
/// Parses from `name` or `name@version`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedRequest {
    pub name: String,
    pub version: Option<usize>,
}

impl DerivedRequest {
    pub fn latest(name: impl Into<String>) -> Self {
        DerivedRequest {
            name: name.into(),
            version: None,
        }
    }
}

impl FromStr for DerivedRequest {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        match s.rsplit_once('@') {
            Some((name, v)) if !name.is_empty() => {
                let version = v.parse().map_err(|_| format!("bad version in {s:?}"))?;
                Ok(DerivedRequest {
                    name: name.to_string(),
                    version: Some(version),
                })
            }
            _ if !s.is_empty() => Ok(DerivedRequest::latest(s)),
            _ => Err("empty derived variable name".into()),
        }
    }
}

impl fmt::Display for DerivedRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.version {
            Some(v) => write!(f, "{}@{v}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

/// Executable form of the sheets for one source database.
#[derive(Debug, Clone, PartialEq)]
pub struct RecodePlan {
    pub database: String,
    pub variables: Vec<VariablePlan>,
    /// Topologically ordered: every component precedes its dependents.
    pub derived: Vec<CompiledDerived>,
    pub passthrough: Vec<String>,
}

impl RecodePlan {
    /// Copies `passthrough` columns and nothing else.
    pub fn identity(database: impl Into<String>, passthrough: Vec<String>) -> Result<Self, PlanError> {
        let plan = RecodePlan {
            database: database.into(),
            variables: Vec::new(),
            derived: Vec::new(),
            passthrough,
        };
        plan.check_columns()?;
        Ok(plan)
    }

    /// Recoded, then derived, then passthrough.
    pub fn output_columns(&self) -> Vec<String> {
        self.variables
            .iter()
            .map(|v| v.name.clone())
            .chain(self.derived.iter().map(|d| d.spec.name.clone()))
            .chain(self.passthrough.iter().cloned())
            .collect()
    }

    pub fn variable(&self, name: &str) -> Option<&VariablePlan> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn derived_order(&self) -> Vec<&str> {
        self.derived.iter().map(|d| d.spec.name.as_str()).collect()
    }

    /// `None` if `variable` is not a recoded variable of this plan.
    pub fn recode_value(&self, variable: &str, raw: Option<&str>) -> Option<OutputValue> {
        self.variable(variable).map(|v| v.apply(raw).0)
    }

    fn check_columns(&self) -> Result<(), PlanError> {
        let mut seen = HashSet::new();
        for c in self.output_columns() {
            if !seen.insert(c.clone()) {
                return Err(PlanError::DuplicateColumn(c));
            }
        }
        Ok(())
    }
}

fn compile_rules(
    ds: &DetailsSheet,
    name: &str,
    database: &str,
    type_end: VariableType,
) -> Result<(VariableType, Vec<CompiledRule>), PlanError> {
    let mut type_start = None;
    let mut rules = Vec::new();
    for (idx, row) in ds.rows_for(name, database) {
        if row.is_derived() {
            continue;
        }
        if *type_start.get_or_insert(row.type_start) != row.type_start {
            return Err(PlanError::InvalidSheets {
                errors: 1,
                first: format!(
                    "details row {}: typeStart differs from earlier rows of `{name}`",
                    idx + 1
                ),
            });
        }
        let output = match &row.rec_end {
            RecEnd::Copy => RuleOutput::Copy,
            RecEnd::Na(code) => RuleOutput::Fixed(OutputValue::Na(*code)),
            RecEnd::Value(v) => RuleOutput::Fixed(match type_end {
                VariableType::Categorical => OutputValue::Category(v.clone()),
                // validation guarantees this parses
                VariableType::Continuous => OutputValue::Number(parse_decimal(v).unwrap_or(f64::NAN)),
            }),
            RecEnd::Func(_) => unreachable!("Func rows are derived"),
        };
        rules.push(CompiledRule {
            rule: row.rec_start.clone(),
            output,
            cat_label: row.cat_label.clone(),
            sheet_row: idx + 1,
        });
    }
    Ok((type_start.unwrap_or(VariableType::Categorical), rules))
}

/// Orders derived names so components come first. Ties keep input order.
fn topo_order(names: &[String], deps: &BTreeMap<&str, Vec<&str>>) -> Result<Vec<usize>, PlanError> {
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut done = vec![false; names.len()];
    let mut order = Vec::with_capacity(names.len());
    while order.len() < names.len() {
        let next = (0..names.len()).find(|&i| {
            !done[i]
                && deps[names[i].as_str()]
                    .iter()
                    .all(|d| index.get(d).is_none_or(|&j| done[j]))
        });
        match next {
            Some(i) => {
                done[i] = true;
                order.push(i);
            }
            None => {
                let stuck = (0..names.len())
                    .filter(|&i| !done[i])
                    .map(|i| names[i].clone())
                    .collect();
                return Err(PlanError::CyclicDerivation(stuck));
            }
        }
    }
    Ok(order)
}

/// Checks components, type-checks every expression and sorts the derived set.
fn finish_derived(
    variables: &[VariablePlan],
    items: Vec<(DerivedVariableSpec, Option<(String, String)>)>,
) -> Result<Vec<CompiledDerived>, PlanError> {
    let names: Vec<String> = items.iter().map(|(s, _)| s.name.clone()).collect();
    let derived_names: BTreeSet<&str> = names.iter().map(String::as_str).collect();
    let mut deps = BTreeMap::new();
    for (spec, _) in &items {
        for c in &spec.components {
            if variables.iter().all(|v| &v.name != c) && !derived_names.contains(c.as_str()) {
                return Err(PlanError::MissingComponent {
                    name: spec.name.clone(),
                    component: c.clone(),
                });
            }
        }
        deps.insert(spec.name.as_str(), spec.components.iter().map(String::as_str).collect());
    }
    let order = topo_order(&names, &deps)?;

    let types: BTreeMap<String, VariableType> = variables
        .iter()
        .map(|v| (v.name.clone(), v.type_end))
        .chain(items.iter().map(|(s, _)| (s.name.clone(), s.output_type)))
        .collect();
    let mut out = Vec::with_capacity(items.len());
    for i in order {
        let (spec, provenance) = &items[i];
        let mut compiled = spec.compiled(Some(&types))?;
        compiled.provenance = provenance.clone();
        out.push(compiled);
    }
    Ok(out)
}

/// Builds the plan for `database`.
///
/// `selected` may name recoded and derived variables of the variable sheet.
/// Expressions for the derived ones come from `derived`, matched by name.
pub fn compile_plan(
    vs: &VariableSheet,
    ds: &DetailsSheet,
    database: &str,
    selected: &[String],
    passthrough: &[String],
    derived: &[DerivedVariableSpec],
) -> Result<RecodePlan, PlanError> {
    let known_db = vs
        .entries
        .iter()
        .any(|e| e.database_start.iter().any(|d| d == database))
        || ds.databases().any(|d| d == database);
    if !known_db {
        return Err(PlanError::UnknownDatabase(database.to_string()));
    }

    let mut entries = Vec::with_capacity(selected.len());
    for name in selected {
        let entry = vs
            .get(name)
            .filter(|e| e.database_start.iter().any(|d| d == database))
            .ok_or_else(|| PlanError::UnknownVariable {
                name: name.clone(),
                database: database.to_string(),
            })?;
        entries.push(entry);
    }

    // cycles first: a self-referencing sheet also fails validation, and the
    // cycle is the more useful report
    let derived_sel: Vec<String> = entries
        .iter()
        .filter(|e| e.is_derived())
        .map(|e| e.variable.clone())
        .collect();
    let deps: BTreeMap<&str, Vec<&str>> = entries
        .iter()
        .filter(|e| e.is_derived())
        .map(|e| {
            let comps = e.variable_start.components().unwrap_or_default();
            (e.variable.as_str(), comps.iter().map(String::as_str).collect())
        })
        .collect();
    topo_order(&derived_sel, &deps)?;

    let report = validate_sheets(vs, ds);
    if !report.ok {
        let first = report
            .errors
            .iter()
            .find(|f| f.severity == crate::sheet::Severity::Error)
            .map(|f| f.to_string())
            .unwrap_or_default();
        return Err(PlanError::InvalidSheets {
            errors: report.error_count(),
            first,
        });
    }

    let mut variables = Vec::new();
    let mut items = Vec::new();
    for entry in entries {
        if !entry.is_derived() {
            let source = entry
                .variable_start
                .resolve(database)
                .expect("validated sheets resolve every database");
            let (type_start, rules) = compile_rules(ds, &entry.variable, database, entry.variable_type)?;
            variables.push(VariablePlan::new(
                entry.variable.clone(),
                source,
                type_start,
                entry.variable_type,
                rules,
            ));
            continue;
        }
        let spec = derived
            .iter()
            .find(|s| s.name == entry.variable)
            .ok_or_else(|| PlanError::MissingDerivedSpec(entry.variable.clone()))?;
        let mismatch = |message: String| PlanError::DerivedMismatch {
            name: entry.variable.clone(),
            message,
        };
        if spec.output_type != entry.variable_type {
            return Err(mismatch(format!(
                "outputType {} but variableType {}",
                spec.output_type, entry.variable_type
            )));
        }
        let sheet_comps: BTreeSet<&String> = entry.variable_start.components().unwrap_or_default().iter().collect();
        if spec.components.iter().collect::<BTreeSet<_>>() != sheet_comps {
            return Err(mismatch("components differ from the DerivedVar:: list".into()));
        }
        for (_, row) in ds.rows_for(&entry.variable, database) {
            if let RecEnd::Func(f) = &row.rec_end {
                if f != &spec.function_name {
                    return Err(mismatch(format!(
                        "sheet names function `{f}`, spec has `{}`",
                        spec.function_name
                    )));
                }
            }
        }
        items.push((spec.clone(), None));
    }

    let plan = RecodePlan {
        database: database.to_string(),
        derived: finish_derived(&variables, items)?,
        variables,
        passthrough: passthrough.to_vec(),
    };
    plan.check_columns()?;
    Ok(plan)
}

/// Adds library entries to `plan` as derived columns.
pub fn apply_from_dvl(
    plan: &RecodePlan,
    lib: &DerivedVariableLibrary,
    requests: &[DerivedRequest],
) -> Result<RecodePlan, PlanError> {
    if requests.is_empty() {
        return Ok(plan.clone());
    }
    let mut items: Vec<_> = plan
        .derived
        .iter()
        .map(|d| (d.spec.clone(), d.provenance.clone()))
        .collect();
    for req in requests {
        let v = lib.get(&req.name, req.version)?;
        if items.iter().any(|(s, _)| s.name == v.spec.name) {
            return Err(PlanError::DuplicateColumn(v.spec.name.clone()));
        }
        items.push((v.spec.clone(), Some((v.author.clone(), v.created_at.clone()))));
    }
    let next = RecodePlan {
        database: plan.database.clone(),
        derived: finish_derived(&plan.variables, items)?,
        variables: plan.variables.clone(),
        passthrough: plan.passthrough.clone(),
    };
    next.check_columns()?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{mmse_cep, DETAILS, VARS};
    use crate::sheet::{parse_details_sheet, parse_match_rule, parse_variable_sheet};

    fn sheets() -> (VariableSheet, DetailsSheet) {
        (
            parse_variable_sheet(VARS.as_bytes()).unwrap(),
            parse_details_sheet(DETAILS.as_bytes()).unwrap(),
        )
    }

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    const PAQUID_COLS: [&str; 12] = [
        "ID", "CEP", "male", "age", "wave", "MMSE", "BVRT", "IST", "HIER", "CESD", "agedem", "dem",
    ];

    #[test]
    fn paquid_plan_shape() {
        let (vs, ds) = sheets();
        let sel = strings(&["sex", "MMSE_category", "CEP_bin", "MMSE-CEP"]);
        let plan = compile_plan(&vs, &ds, "paquid", &sel, &strings(&PAQUID_COLS), &[mmse_cep()]).unwrap();
        assert_eq!(plan.variables.len(), 3);
        assert_eq!(plan.derived_order(), ["MMSE-CEP"]);
        assert_eq!(plan.passthrough.len(), 12);
        assert_eq!(plan.output_columns().len(), 16);
        let mmse = plan.variable("MMSE_category").unwrap();
        assert!(mmse.rules.last().unwrap().rule.is_else());
        assert_eq!(mmse.rules[0].sheet_row, 4);
    }

    #[test]
    fn recode_value_examples() {
        let (vs, ds) = sheets();
        let plan = compile_plan(&vs, &ds, "paquid", &strings(&["sex", "MMSE_category"]), &[], &[]).unwrap();
        let cat = |s: &str| Some(OutputValue::Category(s.into()));
        assert_eq!(plan.recode_value("sex", Some("0")), cat("Female"));
        assert_eq!(plan.recode_value("sex", Some(" 1 ")), cat("Male"));
        assert_eq!(plan.recode_value("MMSE_category", Some("25")), cat("normal"));
        assert_eq!(plan.recode_value("MMSE_category", Some("")), Some(OutputValue::MISSING));
        assert_eq!(plan.recode_value("MMSE_category", None), Some(OutputValue::MISSING));
        assert_eq!(
            plan.recode_value("MMSE_category", Some("31")),
            Some(OutputValue::MISSING)
        );
        assert_eq!(
            plan.recode_value("MMSE_category", Some("9.5")),
            Some(OutputValue::MISSING)
        );
        assert_eq!(plan.recode_value("nope", Some("1")), None);
    }

    #[test]
    fn mmse_binning_against_brute_force() {
        let (vs, ds) = sheets();
        let plan = compile_plan(&vs, &ds, "paquid", &strings(&["MMSE_category"]), &[], &[]).unwrap();
        for x in 0..=40 {
            let expected = match x {
                0..=9 => "severe cognitive impairment",
                10..=17 => "moderate cognitive impairment",
                18..=23 => "mild cognitive impairment",
                24..=30 => "normal",
                _ => "NA(b)",
            };
            let got = plan.recode_value("MMSE_category", Some(&x.to_string())).unwrap();
            assert_eq!(got.to_cell(), expected, "x={x}");
        }
    }

    #[test]
    fn unmatched_flag_without_else() {
        let (vs, ds) = sheets();
        let plan = compile_plan(&vs, &ds, "paquid", &strings(&["sex"]), &[], &[]).unwrap();
        let sex = plan.variable("sex").unwrap();
        assert_eq!(sex.apply(Some("2")), (OutputValue::MISSING, false));
        assert_eq!(sex.apply(Some("NA")), (OutputValue::MISSING, true));
    }

    #[test]
    fn identity_plan() {
        let (vs, ds) = sheets();
        let plan = compile_plan(&vs, &ds, "paquid", &[], &strings(&PAQUID_COLS), &[]).unwrap();
        assert_eq!(plan.output_columns(), strings(&PAQUID_COLS));
    }

    #[test]
    fn unknown_database_and_variable() {
        let (vs, ds) = sheets();
        assert_eq!(
            compile_plan(&vs, &ds, "cchs", &[], &[], &[]),
            Err(PlanError::UnknownDatabase("cchs".into()))
        );
        assert!(matches!(
            compile_plan(&vs, &ds, "paquid", &strings(&["age"]), &[], &[]),
            Err(PlanError::UnknownVariable { .. })
        ));
    }

    #[test]
    fn self_cycle() {
        let vars = format!("{VARS}loop,,categorical,paquid,\"DerivedVar::[loop, sex]\"\n");
        let details =
            format!("{DETAILS}loop,categorical,categorical,paquid,\"DerivedVar::[loop, sex]\",Func::f,,else\n");
        let vs = parse_variable_sheet(vars.as_bytes()).unwrap();
        let ds = parse_details_sheet(details.as_bytes()).unwrap();
        let err = compile_plan(&vs, &ds, "paquid", &strings(&["sex", "loop"]), &[], &[]).unwrap_err();
        assert_eq!(err, PlanError::CyclicDerivation(vec!["loop".into()]));
    }

    #[test]
    fn two_cycle_in_specs() {
        let a = DerivedVariableSpec {
            name: "a".into(),
            components: vec!["b".into(), "sex".into()],
            function_name: "fa".into(),
            function_body: "b ++ sex".into(),
            output_type: VariableType::Categorical,
            notes: None,
        };
        let b = DerivedVariableSpec {
            name: "b".into(),
            components: vec!["a".into()],
            function_name: "fb".into(),
            function_body: "a".into(),
            ..a.clone()
        };
        let vars = vec![VariablePlan::new(
            "sex",
            "male",
            VariableType::Categorical,
            VariableType::Categorical,
            vec![],
        )];
        let err = finish_derived(&vars, vec![(a, None), (b, None)]).unwrap_err();
        assert!(matches!(err, PlanError::CyclicDerivation(names) if names.len() == 2));
    }

    #[test]
    fn derived_needs_spec() {
        let (vs, ds) = sheets();
        let sel = strings(&["MMSE_category", "CEP_bin", "MMSE-CEP"]);
        assert_eq!(
            compile_plan(&vs, &ds, "paquid", &sel, &[], &[]),
            Err(PlanError::MissingDerivedSpec("MMSE-CEP".into()))
        );
        let sel = strings(&["CEP_bin", "MMSE-CEP"]);
        assert!(matches!(
            compile_plan(&vs, &ds, "paquid", &sel, &[], &[mmse_cep()]),
            Err(PlanError::MissingComponent { component, .. }) if component == "MMSE_category"
        ));
    }

    #[test]
    fn derived_spec_must_agree_with_sheet() {
        let (vs, ds) = sheets();
        let sel = strings(&["MMSE_category", "CEP_bin", "MMSE-CEP"]);
        let mut spec = mmse_cep();
        spec.function_name = "other".into();
        assert!(matches!(
            compile_plan(&vs, &ds, "paquid", &sel, &[], &[spec]),
            Err(PlanError::DerivedMismatch { .. })
        ));
    }

    #[test]
    fn passthrough_collision() {
        let (vs, ds) = sheets();
        let err = compile_plan(&vs, &ds, "paquid", &strings(&["sex"]), &strings(&["sex"]), &[]).unwrap_err();
        assert_eq!(err, PlanError::DuplicateColumn("sex".into()));
    }

    #[test]
    fn apply_from_library() {
        let (vs, ds) = sheets();
        let plan = compile_plan(&vs, &ds, "paquid", &strings(&["MMSE_category", "CEP_bin"]), &[], &[]).unwrap();
        let mut lib = DerivedVariableLibrary::new();
        lib.add_at(mmse_cep(), "tester", "2024-01-01T00:00:00Z").unwrap();

        assert_eq!(apply_from_dvl(&plan, &lib, &[]).unwrap(), plan);
        let next = apply_from_dvl(&plan, &lib, &["MMSE-CEP".parse().unwrap()]).unwrap();
        assert_eq!(next.derived.len(), 1);
        assert_eq!(next.derived[0].provenance.as_ref().unwrap().0, "tester");

        let only_cep = compile_plan(&vs, &ds, "paquid", &strings(&["CEP_bin"]), &[], &[]).unwrap();
        assert!(matches!(
            apply_from_dvl(&only_cep, &lib, &[DerivedRequest::latest("MMSE-CEP")]),
            Err(PlanError::MissingComponent { .. })
        ));
        assert!(matches!(
            apply_from_dvl(&plan, &lib, &[DerivedRequest::latest("nope")]),
            Err(PlanError::Dvl(_))
        ));
    }

    #[test]
    fn derived_request_syntax() {
        assert_eq!("x".parse::<DerivedRequest>().unwrap(), DerivedRequest::latest("x"));
        let r: DerivedRequest = "MMSE-CEP@2".parse().unwrap();
        assert_eq!((r.name.as_str(), r.version), ("MMSE-CEP", Some(2)));
        assert!("x@two".parse::<DerivedRequest>().is_err());
        assert_eq!(r.to_string(), "MMSE-CEP@2");
    }

    #[test]
    fn copy_rules() {
        let cont = VariablePlan::new(
            "age",
            "age",
            VariableType::Continuous,
            VariableType::Continuous,
            vec![CompiledRule::new(MatchRule::Copy, RuleOutput::Copy)],
        );
        assert_eq!(cont.apply(Some("71.5")), (OutputValue::Number(71.5), true));
        assert_eq!(cont.apply(Some("old")), (OutputValue::MISSING, false));
        let cat = VariablePlan::new(
            "site",
            "site",
            VariableType::Categorical,
            VariableType::Categorical,
            vec![CompiledRule::new(MatchRule::Copy, RuleOutput::Copy)],
        );
        assert_eq!(cat.apply(Some(" A1 ")), (OutputValue::Copied("A1".into()), true));
    }

    #[test]
    fn explicit_na_source_rule() {
        let v = VariablePlan::new(
            "x",
            "x",
            VariableType::Categorical,
            VariableType::Categorical,
            vec![CompiledRule::new(
                parse_match_rule("NA::a").unwrap(),
                RuleOutput::Fixed(OutputValue::Na(NaCode::A)),
            )],
        );
        assert_eq!(v.apply(Some("NA(a)")), (OutputValue::Na(NaCode::A), true));
        assert_eq!(v.apply(Some("NA(c)")), (OutputValue::MISSING, false));
    }
}
