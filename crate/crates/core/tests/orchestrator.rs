use kets::attacks::AttackKind;
use kets::orchestrator::DatasetSpec;
use kets::{run_experiment, Defense, ExperimentConfig};

fn small() -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::Synthetic {
            samples: 600,
            dim: 8,
            classes: 3,
            spread: 0.3,
        },
        n_clients: 10,
        clients_per_round: 8,
        global_epochs: 6,
        local_epochs: 1,
        ..ExperimentConfig::default()
    }
}

fn with_attack(kind: AttackKind) -> ExperimentConfig {
    let mut cfg = small();
    cfg.attack.kind = kind;
    cfg
}

#[test]
fn attacker_count_rounds_up() {
    let run = run_experiment(&small()).unwrap();
    assert_eq!(run.attackers.len(), 2);
    let cfg = ExperimentConfig {
        attacker_fraction: 0.15,
        ..small()
    };
    assert_eq!(run_experiment(&cfg).unwrap().attackers.len(), 2);
}

#[test]
fn identical_configs_give_identical_runs() {
    let cfg = with_attack(AttackKind::MinMax);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.reports, b.reports);
    assert_eq!(a.attackers, b.attackers);
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = with_attack(AttackKind::Trim);
    let serial = run_experiment(&cfg).unwrap();
    let parallel = run_experiment(&ExperimentConfig { workers: 4, ..cfg }).unwrap();
    assert_eq!(serial.reports, parallel.reports);
}

#[test]
fn seeds_change_results() {
    let a = run_experiment(&small()).unwrap();
    let b = run_experiment(&ExperimentConfig { seed: 2, ..small() }).unwrap();
    assert_ne!(a.reports, b.reports);
}

#[test]
fn poisoning_follows_schedule() {
    let mut cfg = with_attack(AttackKind::MinMax);
    cfg.defense = Defense::FedAvg;
    cfg.clients_per_round = cfg.n_clients;
    cfg.attack.start_round = 2;
    cfg.attack.stop_round = Some(4);
    let run = run_experiment(&cfg).unwrap();
    let poisoned: Vec<usize> = run.reports.iter().filter(|r| r.poisoned).map(|r| r.round).collect();
    assert_eq!(poisoned, vec![2, 3]);
    let clean = run_experiment(&small()).unwrap();
    assert!(clean.reports.iter().all(|r| !r.poisoned));
}

#[test]
fn trust_never_rises_and_exclusion_is_permanent() {
    for kind in [AttackKind::MinMax, AttackKind::SignFlip, AttackKind::Krum] {
        let run = run_experiment(&with_attack(kind)).unwrap();
        for pair in run.reports.windows(2) {
            for (id, t) in &pair[1].trust {
                assert!(*t <= pair[0].trust[id], "{kind:?}: trust of {id} rose");
            }
            for id in &pair[0].excluded {
                assert!(pair[1].excluded.contains(id), "{kind:?}: {id} came back");
                assert!(!pair[1].selected.contains(id), "{kind:?}: excluded {id} was sampled");
            }
        }
    }
}

#[test]
fn trust_defenses_take_everyone_in_the_first_round() {
    let run = run_experiment(&small()).unwrap();
    assert_eq!(run.reports[0].selected.len(), 10);
    assert!(run.reports[1..].iter().all(|r| r.selected.len() == 8));
    let fedavg = run_experiment(&ExperimentConfig {
        defense: Defense::FedAvg,
        ..small()
    })
    .unwrap();
    assert!(fedavg.reports.iter().all(|r| r.selected.len() == 8));
}

#[test]
fn honest_sets_are_drawn_from_the_sample() {
    for defense in Defense::ALL {
        let run = run_experiment(&ExperimentConfig {
            defense,
            ..with_attack(AttackKind::MinSum)
        })
        .unwrap();
        assert!(run.aborted.is_none(), "{defense:?}: {:?}", run.aborted);
        for r in &run.reports {
            assert!(!r.honest.is_empty(), "{defense:?} round {}", r.round);
            assert!(r.honest.iter().all(|id| r.selected.contains(id)));
            assert!((0.0..=1.0).contains(&r.accuracy));
        }
    }
}

#[test]
fn krum_reports_a_single_choice() {
    let run = run_experiment(&ExperimentConfig {
        defense: Defense::Krum,
        ..small()
    })
    .unwrap();
    assert!(run.reports.iter().all(|r| r.honest.len() == 1));
}

#[test]
fn every_attack_runs_against_every_defense() {
    for kind in AttackKind::ALL {
        for defense in Defense::ALL {
            let cfg = ExperimentConfig {
                defense,
                global_epochs: 3,
                ..with_attack(kind)
            };
            let run = run_experiment(&cfg).unwrap();
            assert!(run.aborted.is_none(), "{kind:?} vs {defense:?}: {:?}", run.aborted);
            assert_eq!(run.reports.len(), 3);
        }
    }
}

#[test]
fn learns_without_attack() {
    let run = run_experiment(&ExperimentConfig {
        defense: Defense::FedAvg,
        ..small()
    })
    .unwrap();
    assert!(run.reports.last().unwrap().accuracy > 0.8);
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let cfg = ExperimentConfig {
        attacker_fraction: 0.5,
        ..small()
    };
    assert!(run_experiment(&cfg).is_err());
}
