//! Bundled programs and scenarios.

use crate::domain::DemonstrationTrace;
use crate::sim::{record_demo, DemoScript, Scenario};

pub const LURE: &str = include_str!("../fixtures/programs/lure.tact");
pub const OVERLAP: &str = include_str!("../fixtures/programs/overlap.tact");
pub const DISTRIBUTE: &str = include_str!("../fixtures/programs/distribute.tact");
pub const MANUFACTURING: &str = include_str!("../fixtures/programs/manufacturing.tact");
pub const DEADLOCK: &str = include_str!("../fixtures/programs/deadlock.tact");
pub const INTERRUPT: &str = include_str!("../fixtures/programs/interrupt.tact");
/// The lure program with an extra run at the goal before shooting.
pub const LURE_DETOUR: &str = include_str!("../fixtures/programs/lure_detour.tact");

pub const SCENARIOS: [(&str, &str); 5] = [
    ("lure_chase", include_str!("../fixtures/scenarios/lure_chase.json")),
    ("lure_hold", include_str!("../fixtures/scenarios/lure_hold.json")),
    ("static", include_str!("../fixtures/scenarios/static.json")),
    ("overlap", include_str!("../fixtures/scenarios/overlap.json")),
    ("distribute", include_str!("../fixtures/scenarios/distribute.json")),
];

/// Looks up a bundled scenario by id.
pub fn scenario(id: &str) -> Option<Scenario> {
    SCENARIOS
        .iter()
        .find(|(k, _)| *k == id)
        .map(|(_, text)| Scenario::from_json(text).expect("bundled scenario is valid"))
}

/// Scripted stand-ins for the two lure demonstrations: one against the
/// chasing defender (ends in a pass), one against the holding defender
/// (ends in a shot).
pub const LURE_DEMO_SCRIPTS: [(&str, &str); 2] = [
    ("lure_chase", include_str!("../fixtures/demos/lure_pass.script.json")),
    ("lure_hold", include_str!("../fixtures/demos/lure_shoot.script.json")),
];

/// Hand-written decision flow the lure demonstrations should produce.
pub const LURE_GROUND_TRUTH: &str = include_str!("../fixtures/flows/lure_gt.flow.json");

/// Records both lure demonstrations in the arena.
pub fn lure_demos() -> Vec<DemonstrationTrace> {
    LURE_DEMO_SCRIPTS
        .iter()
        .map(|(sc, text)| {
            let script = DemoScript::from_json(text).expect("bundled script is valid");
            record_demo(&scenario(sc).expect("bundled scenario"), &script).expect("bundled demo records")
        })
        .collect()
}
