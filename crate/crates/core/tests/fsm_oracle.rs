mod support;

use proptest::prelude::*;
use tacticforge_core::fsm::{compile, run, RunConfig};

use support::{log_events, random_program, walk, ToyPlant};

fn cfg() -> RunConfig {
    RunConfig { max_ticks: 100, window: 12, actor: "user".into() }
}

fn compare(program_seed: u64, world_seed: u64) -> Result<(), TestCaseError> {
    let p = random_program(program_seed);
    let (mut a, mut b) = (ToyPlant::new(world_seed), ToyPlant::new(world_seed));
    let log = run(&compile(&p), &mut a, &cfg());
    let walked = walk(&p, &mut b, &cfg());
    prop_assert_eq!(log_events(&log), walked, "program seed {} world seed {}", program_seed, world_seed);
    // the plants saw the same calls with the same canonical arguments
    prop_assert_eq!(a.calls, b.calls);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn compiled_machine_matches_tree_walker(program_seed in any::<u64>(), world_seed in any::<u64>()) {
        compare(program_seed, world_seed)?;
    }
}

#[test]
fn oracle_sees_every_termination_kind() {
    let mut kinds = std::collections::BTreeSet::new();
    for seed in 0..200u64 {
        let p = random_program(seed);
        let log = run(&compile(&p), &mut ToyPlant::new(seed), &cfg());
        if let Some(support::Ev::End(k, _)) = log_events(&log).last() {
            kinds.insert(k.clone());
        }
    }
    for k in ["completed", "max_ticks", "deadlock"] {
        assert!(kinds.contains(k), "random corpus never ends in {k}: {kinds:?}");
    }
}
