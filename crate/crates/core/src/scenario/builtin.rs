use std::collections::BTreeMap;

use super::{LevelSpec, SafeguardSpec, Scenario, UserGroup, Weights};

const GROUP_IDS: [&str; 3] = ["ict", "clinical", "administration"];

fn per_group(values: [f64; 3]) -> BTreeMap<String, f64> {
    GROUP_IDS
        .iter()
        .zip(values)
        .map(|(id, v)| (id.to_string(), v))
        .collect()
}

fn level(index: usize, label: &str, efficacy: [f64; 3], cost: [f64; 3], direct: f64) -> LevelSpec {
    LevelSpec {
        level_index: index,
        label: label.to_string(),
        efficacy_per_group: per_group(efficacy),
        indirect_cost_per_group: Some(per_group(cost)),
        per_user_cost: None,
        direct_cost: direct,
    }
}

/// The CIS-17 healthcare use case: three user groups and two awareness
/// training safeguards with three application levels each.
///
/// Direct costs are not part of the published data; the values here
/// (10/20/120 and 10/20/40) follow the indirect-cost ratios and are meant
/// to be edited.
pub fn builtin_use_case() -> Scenario {
    let groups = vec![
        UserGroup {
            id: "ict".into(),
            name: "ICT".into(),
            asset_value: 100.0,
            attack_probability: 0.2,
            size: 1,
        },
        UserGroup {
            id: "clinical".into(),
            name: "Clinical".into(),
            asset_value: 50.0,
            attack_probability: 0.5,
            size: 30,
        },
        UserGroup {
            id: "administration".into(),
            name: "Administration".into(),
            asset_value: 25.0,
            attack_probability: 0.8,
            size: 10,
        },
    ];

    let awareness = SafeguardSpec {
        id: "17.4".into(),
        name: "CIS-17.4 Update Awareness Content Frequently".into(),
        levels: vec![
            level(1, "Low (once per year)", [0.35, 0.3, 0.3], [1.0, 30.0, 10.0], 10.0),
            level(2, "Medium (twice per year)", [0.6, 0.5, 0.5], [2.0, 60.0, 20.0], 20.0),
            level(3, "High (once per month)", [0.8, 0.7, 0.7], [12.0, 360.0, 120.0], 120.0),
        ],
    };

    let social_engineering = SafeguardSpec {
        id: "17.6".into(),
        name: "CIS-17.6 Train Workforce on Identifying Social Engineering Attacks".into(),
        levels: vec![
            level(1, "Low (Tests)", [0.25, 0.2, 0.2], [1.0, 30.0, 10.0], 10.0),
            level(2, "Medium (Videos)", [0.7, 0.6, 0.6], [2.0, 60.0, 20.0], 20.0),
            level(3, "High (Games)", [0.6, 0.5, 0.5], [4.0, 120.0, 40.0], 40.0),
        ],
    };

    Scenario {
        groups,
        safeguards: vec![awareness, social_engineering],
        weights: Weights::default(),
        budget: Some(100.0),
    }
}
