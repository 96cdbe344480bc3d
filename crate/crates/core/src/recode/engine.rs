use super::{RecodeError, RecodePlan};
use crate::expr::{evaluate, Bindings};
use crate::value::OutputValue;

/// A plan resolved against one source's column layout.
#[derive(Debug, Clone)]
pub struct BoundPlan<'p> {
    plan: &'p RecodePlan,
    variable_src: Vec<usize>,
    passthrough_src: Vec<usize>,
    /// Per derived variable: component name and its slot in the output row.
    derived_env: Vec<Vec<(&'p str, usize)>>,
}

/// Recoded row plus the indices of variables whose value matched no rule.
#[derive(Debug, Clone, PartialEq)]
pub struct RowOutcome {
    pub values: Vec<OutputValue>,
    pub unmatched: Vec<usize>,
}

struct SlotBindings<'a> {
    names: &'a [(&'a str, usize)],
    values: &'a [OutputValue],
}

impl Bindings for SlotBindings<'_> {
    fn lookup(&self, name: &str) -> Option<&OutputValue> {
        self.names
            .iter()
            .find(|(n, _)| *n == name)
            .map(|&(_, slot)| &self.values[slot])
    }
}

impl RecodePlan {
    pub fn bind(&self, columns: &[String]) -> Result<BoundPlan<'_>, RecodeError> {
        let find = |column: &str, variable: &str| {
            columns
                .iter()
                .position(|c| c == column)
                .ok_or_else(|| RecodeError::MissingSourceColumn {
                    column: column.to_string(),
                    variable: variable.to_string(),
                })
        };
        let variable_src = self
            .variables
            .iter()
            .map(|v| find(&v.source_column, &v.name))
            .collect::<Result<_, _>>()?;
        let passthrough_src = self.passthrough.iter().map(|c| find(c, c)).collect::<Result<_, _>>()?;

        // only recoded and earlier derived slots are visible to an expression
        let mut slots: Vec<(&str, usize)> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        let mut derived_env = Vec::with_capacity(self.derived.len());
        for (k, d) in self.derived.iter().enumerate() {
            let env = d
                .spec
                .components
                .iter()
                .filter_map(|c| slots.iter().find(|(n, _)| n == c).copied())
                .collect();
            derived_env.push(env);
            slots.push((d.spec.name.as_str(), self.variables.len() + k));
        }
        Ok(BoundPlan {
            plan: self,
            variable_src,
            passthrough_src,
            derived_env,
        })
    }
}

impl<'p> BoundPlan<'p> {
    pub fn plan(&self) -> &'p RecodePlan {
        self.plan
    }

    /// Depends only on `row` and the plan.
    pub fn recode_row(&self, row: &[String]) -> RowOutcome {
        let plan = self.plan;
        let mut values = Vec::with_capacity(plan.variables.len() + plan.derived.len() + plan.passthrough.len());
        let mut unmatched = Vec::new();
        for (i, (v, &src)) in plan.variables.iter().zip(&self.variable_src).enumerate() {
            let (value, matched) = v.apply(row.get(src).map(String::as_str));
            if !matched {
                unmatched.push(i);
            }
            values.push(value);
        }
        for (d, env) in plan.derived.iter().zip(&self.derived_env) {
            let value = evaluate(
                &d.expr,
                &SlotBindings {
                    names: env,
                    values: &values,
                },
            );
            values.push(value);
        }
        for &src in &self.passthrough_src {
            values.push(OutputValue::Copied(row.get(src).cloned().unwrap_or_default()));
        }
        RowOutcome { values, unmatched }
    }
}
