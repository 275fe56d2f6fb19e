use tacticforge_core::domain::Termination;
use tacticforge_core::dsl::{parse, ApiRegistry};
use tacticforge_core::fixtures;
use tacticforge_core::fsm::{compile, run, RunConfig};
use tacticforge_core::manufacturing::{Cell, CellConfig};

const SPEAKS: [&str; 5] = [
    "the worker's bucket is running low",
    "pick up another bucket",
    "Return to the worker's station.",
    "Wait until the worker permits",
    "The worker gave permission.",
];

fn cell_run(max_ticks: u64) -> (tacticforge_core::fsm::RunLog, Cell) {
    let p = parse(fixtures::MANUFACTURING, &ApiRegistry::manufacturing()).unwrap();
    let mut cell = Cell::new(CellConfig::default());
    let cfg = RunConfig { max_ticks, ..RunConfig::default() };
    let log = run(&compile(&p), &mut cell, &cfg);
    (log, cell)
}

#[test]
fn soccer_names_are_not_in_the_cell_registry() {
    let err = parse("behavior B():\n    do Shoot(goal)\n", &ApiRegistry::manufacturing()).unwrap_err();
    assert!(err.to_string().contains("Shoot"), "{err}");
    assert!(parse(fixtures::MANUFACTURING, &ApiRegistry::soccer()).is_err());
}

#[test]
fn cell_program_restocks_the_worker() {
    let (log, cell) = cell_run(400);
    assert!(matches!(log.termination, Termination::MaxTicks { .. }), "{:?}", log.termination);
    let end = cell.state();
    assert!(end.swaps >= 1, "{end:?}");
    let names: Vec<&str> = log.actions.iter().map(|a| a.action.as_str()).collect();
    assert_eq!(&names[..4], ["goTo", "pick", "goTo", "swapBuckets"]);
    // narration comes in program order, once per restock
    for (i, s) in log.speaks.iter().take(5).enumerate() {
        assert!(s.text.starts_with(SPEAKS[i]), "speak {i}: {}", s.text);
    }
    assert!(log.speaks.len() >= 5);
    // the swap refills the bucket
    let h = cell.history();
    let swap = h.windows(2).find(|w| w[1].swaps > w[0].swaps).unwrap();
    assert!(swap[1].parts > swap[0].parts);
}

#[test]
fn restock_waits_for_the_threshold() {
    let (log, cell) = cell_run(400);
    let first = &log.actions[0];
    let at = cell.history().iter().find(|s| s.tick == first.tick).unwrap();
    assert!(at.parts < 10, "{at:?}");
    assert!(cell.history().iter().filter(|s| s.tick < first.tick).all(|s| s.parts >= 10));
}

#[test]
fn cell_runs_are_repeatable() {
    let (a, ca) = cell_run(300);
    let (b, cb) = cell_run(300);
    assert_eq!(a, b);
    assert_eq!(ca.history(), cb.history());
}
