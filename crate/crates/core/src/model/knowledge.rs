//! Seed knowledge base: rule templates with parameter slots.
//!
//! A template is a hypothesis document in which any value may be replaced by
//! `{"$param": "<name>"}`; instantiation substitutes the rule's parameters
//! (or caller overrides) and parses the result as a [`Hypothesis`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ModelError;
use crate::chronicle::known_metric_unit;
use crate::mining::Hypothesis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorDirection {
    Increase,
    Decrease,
}

impl PriorDirection {
    pub fn sign(self) -> f64 {
        match self {
            PriorDirection::Increase => 1.0,
            PriorDirection::Decrease => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorStrength {
    Weak,
    Moderate,
    Strong,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeRule {
    pub rule_id: String,
    pub description: String,
    pub template: Value,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    pub prior_direction: PriorDirection,
    pub prior_strength: PriorStrength,
    pub citation: String,
}

#[derive(Debug, Deserialize)]
struct RuleFile {
    rules: Vec<KnowledgeRule>,
}

fn substitute(v: &Value, params: &BTreeMap<String, Value>) -> Result<Value, String> {
    match v {
        Value::Object(map) => {
            if map.len() == 1 {
                if let Some(name) = map.get("$param") {
                    let name = name.as_str().ok_or("`$param` must name a parameter")?;
                    return params.get(name).cloned().ok_or_else(|| format!("no value for parameter `{name}`"));
                }
            }
            map.iter()
                .map(|(k, v)| substitute(v, params).map(|v| (k.clone(), v)))
                .collect::<Result<serde_json::Map<_, _>, _>>()
                .map(Value::Object)
        }
        Value::Array(items) => items.iter().map(|i| substitute(i, params)).collect::<Result<Vec<_>, _>>().map(Value::Array),
        other => Ok(other.clone()),
    }
}

impl KnowledgeRule {
    pub fn instantiate(&self) -> Result<Hypothesis, ModelError> {
        self.instantiate_with(&BTreeMap::new())
    }

    /// Instantiates with `overrides` taking precedence over the rule's own
    /// parameter defaults.
    pub fn instantiate_with(&self, overrides: &BTreeMap<String, Value>) -> Result<Hypothesis, ModelError> {
        let schema = |reason: String| ModelError::Schema {
            rule_id: self.rule_id.clone(),
            reason,
        };
        let mut params = self.params.clone();
        params.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
        let doc = substitute(&self.template, &params).map_err(schema)?;
        let mut h: Hypothesis = serde_json::from_value(doc).map_err(|e| schema(e.to_string()))?;
        if known_metric_unit(&h.outcome.metric).is_none() {
            return Err(schema(format!("unknown outcome metric `{}`", h.outcome.metric)));
        }
        let violations = h.violations();
        if !violations.is_empty() {
            return Err(schema(violations.join("; ")));
        }
        if h.name.is_empty() {
            h.name = self.rule_id.clone();
        }
        Ok(h)
    }
}

/// Parses a rule file and checks that every template instantiates.
pub fn parse_rulebase(text: &str) -> Result<Vec<KnowledgeRule>, ModelError> {
    let file: RuleFile = serde_json::from_str(text).map_err(|e| ModelError::Schema {
        rule_id: String::new(),
        reason: e.to_string(),
    })?;
    let mut seen = std::collections::BTreeSet::new();
    for rule in &file.rules {
        if !seen.insert(rule.rule_id.clone()) {
            return Err(ModelError::Schema {
                rule_id: rule.rule_id.clone(),
                reason: "duplicate rule_id".into(),
            });
        }
        rule.instantiate()?;
    }
    Ok(file.rules)
}

pub fn seed_rulebase(path: &Path) -> Result<Vec<KnowledgeRule>, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
    parse_rulebase(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RULE: &str = r#"{"rules":[{
        "rule_id":"late-sugar",
        "description":"sweet snacks late in the evening",
        "template":{
            "input":{"steps":[{"stream":"food","attrs":[{"attr":"sugar_g","op":">","value":{"$param":"sugar_g"}}]}]},
            "outcome":{"stream":"sleep","metric":{"$param":"metric"}},
            "confounders":[],
            "temporal":{"within_minutes":720}
        },
        "params":{"sugar_g":30,"metric":"sleep_quality"},
        "prior_direction":"decrease","prior_strength":"weak","citation":"lit:sugar"}]}"#;

    #[test]
    fn instantiates_with_params() {
        let rules = parse_rulebase(RULE).unwrap();
        let h = rules[0].instantiate().unwrap();
        assert_eq!(h.name, "late-sugar");
        assert_eq!(h.input.steps[0].attrs[0].value, 30.0);
        let mut o = BTreeMap::new();
        o.insert("sugar_g".to_string(), Value::from(50));
        assert_eq!(rules[0].instantiate_with(&o).unwrap().input.steps[0].attrs[0].value, 50.0);
    }

    #[test]
    fn empty_rule_list() {
        assert!(parse_rulebase(r#"{"rules":[]}"#).unwrap().is_empty());
    }

    #[test]
    fn unknown_metric_names_rule() {
        let text = RULE.replace(r#""metric":"sleep_quality""#, r#""metric":"dream_vividness""#);
        match parse_rulebase(&text) {
            Err(ModelError::Schema { rule_id, reason }) => {
                assert_eq!(rule_id, "late-sugar");
                assert!(reason.contains("dream_vividness"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_param() {
        let text = RULE.replace(r#""sugar_g":30,"#, "");
        assert!(matches!(parse_rulebase(&text), Err(ModelError::Schema { .. })));
    }
}
