use serde::{Deserialize, Serialize};

use super::knowledge::{KnowledgeRule, PriorDirection};
use super::ModelError;
use crate::chronicle::Chronicle;
use crate::mining::{verify, VerifiedRule, VerifyParams};

/// A seed rule that was verified against the person's own data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersonalRule {
    pub rule_id: String,
    pub prior_direction: PriorDirection,
    pub verified: VerifiedRule,
}

/// A seed rule kept with its literature prior only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorOnlyRule {
    pub rule: KnowledgeRule,
    /// Machine-readable reason, e.g. `no_occurrences`.
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Biological {
    pub verified: Vec<PersonalRule>,
    pub prior_only: Vec<PriorOnlyRule>,
}

impl Biological {
    pub fn rule_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self
            .verified
            .iter()
            .map(|r| r.rule_id.as_str())
            .chain(self.prior_only.iter().map(|r| r.rule.rule_id.as_str()))
            .collect();
        ids.sort_unstable();
        ids
    }
}

/// Verifies every seed rule on the chronicle. Rules that cannot be tested
/// are kept as prior-only; none are dropped.
pub fn personalize(
    rulebase: &[KnowledgeRule],
    chronicle: &Chronicle,
    min_days: i64,
    params: &VerifyParams,
) -> Result<Biological, ModelError> {
    let span = chronicle.span_days();
    if span < min_days {
        return Err(ModelError::InsufficientData { min_days, span_days: span });
    }
    let mut bio = Biological::default();
    for rule in rulebase {
        let hypothesis = rule.instantiate()?;
        match verify(&hypothesis, chronicle, params) {
            Ok(verified) => bio.verified.push(PersonalRule {
                rule_id: rule.rule_id.clone(),
                prior_direction: rule.prior_direction,
                verified,
            }),
            Err(e) => bio.prior_only.push(PriorOnlyRule {
                rule: rule.clone(),
                reason: e.code().to_string(),
            }),
        }
    }
    Ok(bio)
}
