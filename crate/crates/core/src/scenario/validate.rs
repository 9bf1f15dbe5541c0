use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationCode {
    NoGroups,
    NoSafeguards,
    DuplicateGroupId,
    DuplicateSafeguardId,
    NegativeAssetValue,
    ProbabilityOutOfRange,
    InvalidGroupSize,
    NoLevels,
    LevelIndexGap,
    EfficacyOutOfRange,
    NegativeIndirectCost,
    NegativeDirectCost,
    IndirectCostNotMonotone,
    DirectCostNotMonotone,
    MissingGroupReference,
    UnknownGroupReference,
    ConflictingIndirectCost,
    MissingIndirectCost,
    WeightOutOfRange,
    NegativeBudget,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        use ViolationCode::*;
        match self {
            NoGroups => "no-groups",
            NoSafeguards => "no-safeguards",
            DuplicateGroupId => "duplicate-group-id",
            DuplicateSafeguardId => "duplicate-safeguard-id",
            NegativeAssetValue => "negative-asset-value",
            ProbabilityOutOfRange => "probability-out-of-range",
            InvalidGroupSize => "invalid-group-size",
            NoLevels => "no-levels",
            LevelIndexGap => "level-index-gap",
            EfficacyOutOfRange => "efficacy-out-of-range",
            NegativeIndirectCost => "negative-indirect-cost",
            NegativeDirectCost => "negative-direct-cost",
            IndirectCostNotMonotone => "indirect-cost-not-monotone",
            DirectCostNotMonotone => "direct-cost-not-monotone",
            MissingGroupReference => "missing-group-reference",
            UnknownGroupReference => "unknown-group-reference",
            ConflictingIndirectCost => "conflicting-indirect-cost",
            MissingIndirectCost => "missing-indirect-cost",
            WeightOutOfRange => "weight-out-of-range",
            NegativeBudget => "negative-budget",
        }
    }

    pub(crate) fn is_group_reference(self) -> bool {
        matches!(
            self,
            ViolationCode::MissingGroupReference | ViolationCode::UnknownGroupReference
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub severity: Severity,
    /// Field path, e.g. `safeguards[0].levels[2].efficacy.ict`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}[{}] {}: {}", self.code.as_str(), self.path, self.message)
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn error(&mut self, code: ViolationCode, path: impl Into<String>, message: impl Into<String>) {
        self.push(code, Severity::Error, path.into(), message.into());
    }

    fn warn(&mut self, code: ViolationCode, path: impl Into<String>, message: impl Into<String>) {
        self.push(code, Severity::Warning, path.into(), message.into());
    }

    fn push(&mut self, code: ViolationCode, severity: Severity, path: String, message: String) {
        self.0.push(Violation {
            code,
            severity,
            path,
            message,
        });
    }
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

fn non_negative(x: f64) -> bool {
    x >= 0.0 && x.is_finite()
}

/// Lists every violated invariant. Direct-cost monotonicity is reported as
/// a warning; everything else is an error.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    use ViolationCode::*;
    let mut out = Collector(Vec::new());

    if s.groups.is_empty() {
        out.error(NoGroups, "groups", "at least one user group is required");
    }
    if s.safeguards.is_empty() {
        out.error(NoSafeguards, "safeguards", "at least one safeguard is required");
    }

    let mut seen = HashSet::new();
    for (gi, g) in s.groups.iter().enumerate() {
        let path = format!("groups[{gi}]");
        if !seen.insert(g.id.as_str()) {
            out.error(
                DuplicateGroupId,
                format!("{path}.id"),
                format!("group id {:?} declared twice", g.id),
            );
        }
        if !non_negative(g.asset_value) {
            out.error(
                NegativeAssetValue,
                format!("{path}.asset_value"),
                format!("asset value {} must be >= 0", g.asset_value),
            );
        }
        if !in_unit(g.attack_probability) {
            out.error(
                ProbabilityOutOfRange,
                format!("{path}.attack_probability"),
                format!("attack probability {} must lie in [0, 1]", g.attack_probability),
            );
        }
        if g.size < 1 {
            out.error(InvalidGroupSize, format!("{path}.size"), "group size must be >= 1");
        }
    }
    let group_ids: HashSet<&str> = s.groups.iter().map(|g| g.id.as_str()).collect();

    let mut seen = HashSet::new();
    for (si, sg) in s.safeguards.iter().enumerate() {
        let path = format!("safeguards[{si}]");
        if !seen.insert(sg.id.as_str()) {
            out.error(
                DuplicateSafeguardId,
                format!("{path}.id"),
                format!("safeguard id {:?} declared twice", sg.id),
            );
        }
        if sg.levels.is_empty() {
            out.error(
                NoLevels,
                format!("{path}.levels"),
                "a safeguard needs at least one level",
            );
        }

        for (li, level) in sg.levels.iter().enumerate() {
            let lpath = format!("{path}.levels[{li}]");
            if level.level_index != li + 1 {
                out.error(
                    LevelIndexGap,
                    format!("{lpath}.level"),
                    format!("expected level {}, found {}", li + 1, level.level_index),
                );
            }

            for (gid, &e) in &level.efficacy_per_group {
                if !group_ids.contains(gid.as_str()) {
                    out.error(
                        UnknownGroupReference,
                        format!("{lpath}.efficacy.{gid}"),
                        format!("group {gid:?} is not declared"),
                    );
                } else if !(0.0..1.0).contains(&e) {
                    out.error(
                        EfficacyOutOfRange,
                        format!("{lpath}.efficacy.{gid}"),
                        format!("efficacy {e} must lie in [0, 1)"),
                    );
                }
            }
            for g in &s.groups {
                if !level.efficacy_per_group.contains_key(&g.id) {
                    out.error(
                        MissingGroupReference,
                        format!("{lpath}.efficacy.{}", g.id),
                        format!("no efficacy given for group {:?}", g.id),
                    );
                }
            }

            match (&level.indirect_cost_per_group, level.per_user_cost) {
                (Some(_), Some(_)) => out.error(
                    ConflictingIndirectCost,
                    format!("{lpath}.per_user_cost"),
                    "give either indirect_cost or per_user_cost, not both",
                ),
                (None, None) => out.error(
                    MissingIndirectCost,
                    format!("{lpath}.indirect_cost"),
                    "indirect_cost or per_user_cost is required",
                ),
                (Some(map), None) => {
                    for (gid, &c) in map {
                        if !group_ids.contains(gid.as_str()) {
                            out.error(
                                UnknownGroupReference,
                                format!("{lpath}.indirect_cost.{gid}"),
                                format!("group {gid:?} is not declared"),
                            );
                        } else if !non_negative(c) {
                            out.error(
                                NegativeIndirectCost,
                                format!("{lpath}.indirect_cost.{gid}"),
                                format!("indirect cost {c} must be >= 0"),
                            );
                        }
                    }
                    for g in &s.groups {
                        if !map.contains_key(&g.id) {
                            out.error(
                                MissingGroupReference,
                                format!("{lpath}.indirect_cost.{}", g.id),
                                format!("no indirect cost given for group {:?}", g.id),
                            );
                        }
                    }
                }
                (None, Some(c)) => {
                    if !non_negative(c) {
                        out.error(
                            NegativeIndirectCost,
                            format!("{lpath}.per_user_cost"),
                            format!("per-user cost {c} must be >= 0"),
                        );
                    }
                }
            }

            if !non_negative(level.direct_cost) {
                out.error(
                    NegativeDirectCost,
                    format!("{lpath}.direct_cost"),
                    format!("direct cost {} must be >= 0", level.direct_cost),
                );
            }
        }

        for (li, pair) in sg.levels.windows(2).enumerate() {
            let (lower, higher) = (&pair[0], &pair[1]);
            let hpath = format!("{path}.levels[{}]", li + 1);
            for g in &s.groups {
                if let (Some(lo), Some(hi)) = (lower.indirect_cost_for(g), higher.indirect_cost_for(g)) {
                    if hi < lo {
                        out.error(
                            IndirectCostNotMonotone,
                            format!("{hpath}.indirect_cost.{}", g.id),
                            format!(
                                "indirect cost must be non-decreasing in level: C({},{}) = {hi} < C({},{}) = {lo}",
                                higher.level_index, g.id, lower.level_index, g.id
                            ),
                        );
                    }
                }
            }
            if higher.direct_cost < lower.direct_cost {
                out.warn(
                    DirectCostNotMonotone,
                    format!("{hpath}.direct_cost"),
                    format!(
                        "direct cost decreases from {} to {}",
                        lower.direct_cost, higher.direct_cost
                    ),
                );
            }
        }
    }

    let w = &s.weights;
    for (name, value) in [
        ("loss_weight", w.loss_weight),
        ("indirect_cost_weight", w.indirect_cost_weight),
    ] {
        if !in_unit(value) {
            out.error(
                WeightOutOfRange,
                format!("weights.{name}"),
                format!("weight {value} must lie in [0, 1]"),
            );
        }
    }

    if let Some(b) = s.budget {
        if b.is_nan() || b < 0.0 {
            out.error(NegativeBudget, "budget", format!("budget {b} must be >= 0"));
        }
    }

    out.0
}
