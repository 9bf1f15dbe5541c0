//! Input data model: user groups, safeguards with their application levels,
//! utility weights and the investment budget.
//!
//! Level 0 ("safeguard not applied") is never stored. It always has zero
//! efficacy, zero indirect cost and zero direct cost.

mod builtin;
mod validate;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::builtin_use_case;
pub use validate::{validate_scenario, Severity, Violation, ViolationCode};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("scenario references undeclared group(s): {}", format_violations(.0))]
    MissingGroupReference(Vec<Violation>),
    #[error("invalid scenario: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

impl ScenarioError {
    /// All violations carried by a validation failure.
    pub fn violations(&self) -> &[Violation] {
        match self {
            ScenarioError::MissingGroupReference(v) | ScenarioError::Invalid(v) => v,
            _ => &[],
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserGroup {
    pub id: String,
    pub name: String,
    /// Value of the assets reachable through this group.
    pub asset_value: f64,
    /// Probability that a threat targets this group.
    pub attack_probability: f64,
    /// Head-count, used when indirect costs are given per user.
    pub size: u64,
}

impl UserGroup {
    /// Unmitigated expected loss `R_i * A_i`.
    pub fn baseline_loss(&self) -> f64 {
        self.attack_probability * self.asset_value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    #[serde(rename = "level")]
    pub level_index: usize,
    pub label: String,
    #[serde(rename = "efficacy")]
    pub efficacy_per_group: BTreeMap<String, f64>,
    /// Group totals. Mutually exclusive with `per_user_cost`.
    #[serde(rename = "indirect_cost", default, skip_serializing_if = "Option::is_none")]
    pub indirect_cost_per_group: Option<BTreeMap<String, f64>>,
    /// Indirect cost per head; the group total is this times the group size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_user_cost: Option<f64>,
    pub direct_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafeguardSpec {
    pub id: String,
    pub name: String,
    pub levels: Vec<LevelSpec>,
}

impl SafeguardSpec {
    /// Number of stored (non-zero) application levels.
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Level `j >= 1`, or `None` for level 0 and out-of-range indices.
    pub fn level(&self, j: usize) -> Option<&LevelSpec> {
        if j == 0 {
            None
        } else {
            self.levels.get(j - 1)
        }
    }

    /// Direct monetary cost of level `j`; zero for level 0.
    pub fn direct_cost(&self, j: usize) -> f64 {
        self.level(j).map_or(0.0, |l| l.direct_cost)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub loss_weight: f64,
    pub indirect_cost_weight: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            loss_weight: 1.0,
            indirect_cost_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub groups: Vec<UserGroup>,
    pub safeguards: Vec<SafeguardSpec>,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

impl Scenario {
    pub fn group_index(&self, id: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.id == id)
    }

    pub fn safeguard_index(&self, id: &str) -> Option<usize> {
        self.safeguards.iter().position(|s| s.id == id)
    }

    pub fn safeguard(&self, id: &str) -> Option<&SafeguardSpec> {
        self.safeguards.iter().find(|s| s.id == id)
    }

    pub fn group_ids(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.id.clone()).collect()
    }

    /// Efficacy `E(j, i)` by positional indices. Level 0 yields 0.
    ///
    /// Panics if the indices are out of range or the scenario has not been
    /// validated (missing map entries).
    pub fn efficacy(&self, safeguard: usize, j: usize, group: usize) -> f64 {
        match self.safeguards[safeguard].level(j) {
            None if j == 0 => 0.0,
            None => panic!("level {j} out of range"),
            Some(level) => level.efficacy_per_group[&self.groups[group].id],
        }
    }

    /// Indirect cost `C(j, i)` by positional indices. Level 0 yields 0.
    pub fn indirect_cost(&self, safeguard: usize, j: usize, group: usize) -> f64 {
        match self.safeguards[safeguard].level(j) {
            None if j == 0 => 0.0,
            None => panic!("level {j} out of range"),
            Some(level) => level
                .indirect_cost_for(&self.groups[group])
                .expect("validated scenario carries indirect costs"),
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("scenario serializes");
        out.push('\n');
        out
    }

    /// Parses and validates a scenario held in memory.
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        let errors: Vec<Violation> = validate_scenario(&scenario)
            .into_iter()
            .filter(|v| v.severity == Severity::Error)
            .collect();
        if errors.is_empty() {
            Ok(scenario)
        } else if errors.iter().all(|v| v.code.is_group_reference()) {
            Err(ScenarioError::MissingGroupReference(errors))
        } else {
            Err(ScenarioError::Invalid(errors))
        }
    }
}

impl LevelSpec {
    /// Group-total indirect cost, whichever form the level was given in.
    pub fn indirect_cost_for(&self, group: &UserGroup) -> Option<f64> {
        match (&self.indirect_cost_per_group, self.per_user_cost) {
            (Some(map), None) => map.get(&group.id).copied(),
            (None, Some(per_user)) => Some(per_user * group.size as f64),
            _ => None,
        }
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}
