use fedsec::data::{self, SYNTH_SIGMA};
use fedsec::dataset::default_feature_names;
use fedsec::experiment::{run_experiment, DataSource, ExperimentConfig};
use fedsec::fl::{evaluate, init_model, probe_client, train_local, MlpSpec, TrainingPlan};
use fedsec::policy::{run_stream, Candidate, PolicyKind, Reason};
use fedsec::stopping::BudgetSpec;
use rand::{Rng, SeedableRng};

#[test]
fn centralized_model_learns_synthetic_data() {
    let plan = TrainingPlan::default();
    let table = data::synth_dataset_with_sigma(5000, 10, 28, SYNTH_SIGMA, 1).unwrap();
    let (train, test) = data::shuffle_split(&table, 0.2, 1).unwrap();
    let init = init_model(&MlpSpec::new(10, 28), 1).unwrap();
    let central = TrainingPlan { epochs: plan.rounds * plan.epochs, ..plan };
    let acc = evaluate(&train_local(&init, &train, &central, 1).unwrap(), &test).unwrap();
    assert!(acc >= 0.7, "centralized accuracy {acc}");
}

#[test]
fn fat_clients_probe_better_than_thin() {
    let plan = TrainingPlan::default();
    let mut wins = 0;
    for seed in 1..=10u64 {
        let table = data::synth_dataset_with_sigma(5000, 10, 28, SYNTH_SIGMA, seed).unwrap();
        let prepared = data::prepare(&table, default_feature_names(10), 0.2, 20, seed).unwrap();
        let fat = prepared.clients.iter().find(|c| c.fat).unwrap();
        let thin = prepared.clients.iter().find(|c| !c.fat).unwrap();
        let init = init_model(&MlpSpec::new(10, 28), seed).unwrap();
        let a = probe_client(&init, &fat.data, &prepared.test, &plan, seed).unwrap();
        let b = probe_client(&init, &thin.data, &prepared.test, &plan, seed).unwrap();
        if a > b {
            wins += 1;
        }
    }
    assert!(wins >= 8, "fat probe won {wins}/10");
}

#[test]
fn wider_rank_range_accepts_more_on_merit() {
    // a wider rank window shortens observation, so more candidates clear
    // the threshold before the tail is forced
    let (n, r) = (100, 10);
    let mut means = Vec::new();
    for r2 in 1..=5u32 {
        let spec = BudgetSpec::builder(n, r, 1, r2).build().unwrap();
        let mut total = 0usize;
        for seed in 0..20u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let stream: Vec<Candidate> =
                (1..=n).map(|i| Candidate::new(i, format!("c{i}"), rng.gen::<f64>())).collect();
            let audit = run_stream(PolicyKind::Secretary, &spec, &stream, seed).unwrap();
            total += audit.entries.iter().filter(|e| e.reason == Reason::AboveThreshold).count();
        }
        means.push(total as f64 / 20.0);
    }
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
    assert!(means[4] > means[0], "{means:?}");
}

#[test]
fn prepared_directory_drives_an_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let table = data::synth_dataset_with_sigma(600, 4, 3, SYNTH_SIGMA, 3).unwrap();
    let prepared = data::prepare(&table, default_feature_names(4), 0.2, 20, 3).unwrap();
    data::write_prepared(dir.path(), &prepared, 3, 0.2).unwrap();

    let mut cfg = ExperimentConfig::new(20, 3, 2);
    cfg.data = DataSource::Prepared { dir: dir.path().to_path_buf() };
    cfg.plan = TrainingPlan { rounds: 2, epochs: 1, ..TrainingPlan::default() };
    let results = run_experiment(&cfg, 5).unwrap();
    assert_eq!(results.len(), 3);
    for r in &results {
        assert_eq!(r.selected.len(), 3);
        assert!((0.0..=1.0).contains(&r.final_test_accuracy));
    }
    assert_eq!(results, run_experiment(&cfg, 5).unwrap());
}
