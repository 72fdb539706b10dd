//! Noise-level calibration for the synthetic generator.
//!
//! For each σ: centralized accuracy of the default network trained for
//! rounds × epochs on the full training split, and the three policies'
//! final accuracy on a few small sweep cells.
//!
//! cargo run --release --example calibrate_sigma -- 0.08 0.2 0.3

use fedsec::data;
use fedsec::dataset::default_feature_names;
use fedsec::experiment::{run_experiment, DataSource, ExperimentConfig};
use fedsec::fl::{evaluate, init_model, train_local, MlpSpec, TrainingPlan};
use fedsec::policy::PolicyKind;

fn main() -> fedsec::Result<()> {
    let sigmas: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().expect("sigma")).collect();
    let seeds: Vec<u64> = (1..=3).collect();
    for sigma in sigmas {
        let plan = TrainingPlan::default();
        let table = data::synth_dataset_with_sigma(5000, 10, 28, sigma, 1)?;
        let prepared = data::prepare(&table, default_feature_names(10), 0.2, 10, 1)?;
        let (train, _) = data::shuffle_split(&table, 0.2, 1)?;
        let init = init_model(&MlpSpec::new(10, 28), 1)?;
        let central = TrainingPlan { epochs: plan.rounds * plan.epochs, ..plan };
        let trained = train_local(&init, &train, &central, 1)?;
        let acc = evaluate(&trained, &prepared.test)?;
        println!("sigma {sigma}: centralized accuracy {acc:.4}");
        for (n, r) in [(100, 10), (100, 30), (400, 10)] {
            let mut cfg = ExperimentConfig::new(n, r, 4);
            cfg.data = DataSource::Synthetic { samples: 5000, features: 10, classes: 28, sigma };
            let mut sums = [0.0; 3];
            let mut probes = [0.0; 3];
            for &s in &seeds {
                for res in run_experiment(&cfg, s)? {
                    let k = PolicyKind::ALL.iter().position(|p| *p == res.policy).unwrap();
                    sums[k] += res.final_test_accuracy / seeds.len() as f64;
                    probes[k] += res.mean_selected_probe_accuracy / seeds.len() as f64;
                }
            }
            println!(
                "  n={n} r={r}: final secretary {:.4} random {:.4} best {:.4} | probe {:.3} {:.3} {:.3}",
                sums[0], sums[1], sums[2], probes[0], probes[1], probes[2]
            );
        }
    }
    Ok(())
}
