use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{check_dataset, ModelParams, Scratch};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Rounds `K`, local epochs `E`, minibatch size and cycle period `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingPlan {
    pub rounds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub cycle_period: f64,
    pub adam: AdamConfig,
    /// Weight client updates by dataset size when aggregating.
    pub weighted_average: bool,
}

impl Default for TrainingPlan {
    fn default() -> Self {
        Self {
            rounds: 20,
            epochs: 8,
            batch_size: 3,
            cycle_period: 1.0,
            adam: AdamConfig::default(),
            weighted_average: false,
        }
    }
}

impl TrainingPlan {
    /// Same plan restricted to a single round.
    pub fn single_round(&self) -> Self {
        Self { rounds: 1, ..*self }
    }
}

struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(cfg: AdamConfig, n: usize) -> Self {
        Self { cfg, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let step = learning_rate / c1;
        let inv_c2 = 1.0 / c2;
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= step * *m / ((*v * inv_c2).sqrt() + epsilon);
        }
    }
}

/// Minibatch Adam on mean cross-entropy for `plan.epochs` epochs, starting
/// from a copy of `params` with fresh optimizer state. The visiting order is
/// reshuffled each epoch from `(seed, epoch)`.
pub fn train_local(params: &ModelParams, data: &Dataset, plan: &TrainingPlan, seed: u64) -> Result<ModelParams> {
    check_dataset(params, data)?;
    if plan.batch_size == 0 {
        return Err(Error::domain("batch size must be positive"));
    }
    let mut out = params.clone();
    if plan.epochs == 0 {
        return Ok(out);
    }
    let n = out.len();
    let mut adam = Adam::new(plan.adam, n);
    let mut scratch = Scratch::new(out.layout());
    let mut grad = vec![0.0; n];
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..plan.epochs {
        order.sort_unstable();
        let mut rng = rng::rng_from(seed, &[rng::TAG_SHUFFLE, epoch as u64]);
        order.shuffle(&mut rng);
        for batch in order.chunks(plan.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let values = out.values();
            for &i in batch {
                scratch.forward(values, data.features.row(i));
                scratch.backward(values, data.labels[i], &mut grad);
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            adam.step(out.values_mut(), &grad);
        }
    }
    Ok(out)
}

/// Fraction of correctly classified samples; argmax ties go to the lowest
/// class index.
pub fn evaluate(params: &ModelParams, test: &Dataset) -> Result<f64> {
    check_dataset(params, test)?;
    let mut scratch = Scratch::new(params.layout());
    let mut correct = 0usize;
    for i in 0..test.len() {
        let p = scratch.forward(params.values(), test.features.row(i));
        let mut best = 0;
        for (k, &v) in p.iter().enumerate().skip(1) {
            if v > p[best] {
                best = k;
            }
        }
        if best == test.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Component-wise unweighted mean.
pub fn fedavg(param_sets: &[ModelParams]) -> Result<ModelParams> {
    fedavg_weighted(param_sets, None)
}

/// Component-wise mean, optionally weighted (weights need not sum to 1).
pub fn fedavg_weighted(param_sets: &[ModelParams], weights: Option<&[f64]>) -> Result<ModelParams> {
    let (first, rest) = param_sets.split_first().ok_or(Error::EmptyList)?;
    if rest.iter().any(|p| p.layout() != first.layout()) {
        return Err(Error::LayoutMismatch);
    }
    if let Some(w) = weights {
        if w.len() != param_sets.len() {
            return Err(Error::Shape(format!("{} weights for {} parameter sets", w.len(), param_sets.len())));
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || w.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(Error::domain("aggregation weights must be nonnegative with a positive sum"));
        }
        let mut out = ModelParams::zeros(first.layout().clone());
        for (p, &wi) in param_sets.iter().zip(w) {
            let c = wi / total;
            for (o, &v) in out.values_mut().iter_mut().zip(p.values()) {
                *o += c * v;
            }
        }
        return Ok(out);
    }
    let mut out = first.clone();
    if rest.is_empty() {
        return Ok(out);
    }
    for p in rest {
        for (o, &v) in out.values_mut().iter_mut().zip(p.values()) {
            *o += v;
        }
    }
    let inv = 1.0 / param_sets.len() as f64;
    out.values_mut().iter_mut().for_each(|v| *v *= inv);
    Ok(out)
}

/// One-round test of a single candidate: train from the shared initial
/// parameters on the client's data, then score on the server's test set.
pub fn probe_client(
    global_init: &ModelParams,
    client_data: &Dataset,
    test: &Dataset,
    plan: &TrainingPlan,
    seed: u64,
) -> Result<f64> {
    let trained = train_local(global_init, client_data, &plan.single_round(), seed)?;
    evaluate(&trained, test)
}

/// Seed used by client `client` in round `round` of [`federated_train`].
pub fn round_seed(seed: u64, round: usize, client: usize) -> u64 {
    rng::derive_seed(seed, &[rng::TAG_TRAIN, round as u64, client as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingOutcome {
    pub params: ModelParams,
    /// Test accuracy after each round.
    pub history: Vec<f64>,
}

/// `plan.rounds` rounds of broadcast, local training on every client, and
/// averaging. The global model is carried across rounds.
pub fn federated_train(
    global_init: &ModelParams,
    clients: &[&Dataset],
    test: &Dataset,
    plan: &TrainingPlan,
    seed: u64,
) -> Result<TrainingOutcome> {
    if clients.is_empty() {
        return Err(Error::EmptyList);
    }
    check_dataset(global_init, test)?;
    let mut global = global_init.clone();
    let mut history = Vec::with_capacity(plan.rounds);
    let weights: Option<Vec<f64>> =
        plan.weighted_average.then(|| clients.iter().map(|c| c.len() as f64).collect());
    for round in 0..plan.rounds {
        let updates = clients
            .iter()
            .enumerate()
            .map(|(c, data)| train_local(&global, data, plan, round_seed(seed, round, c)))
            .collect::<Result<Vec<_>>>()?;
        global = fedavg_weighted(&updates, weights.as_deref())?;
        history.push(evaluate(&global, test)?);
    }
    Ok(TrainingOutcome { params: global, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Matrix;
    use crate::fl::mlp::{init_model, loss, MlpSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_data(n: usize, d: usize, classes: usize, seed: u64) -> Dataset {
        let mut rng = rng::SimRng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * d).map(|_| rng.gen()).collect();
        let labels = (0..n).map(|i| i % classes).collect();
        Dataset::new(Matrix::new(n, d, data).unwrap(), labels).unwrap()
    }

    fn small() -> (ModelParams, Dataset, Dataset) {
        let params = init_model(&MlpSpec::with_hidden(4, vec![8, 8], 3), 1).unwrap();
        (params, random_data(30, 4, 3, 2), random_data(20, 4, 3, 3))
    }

    #[test]
    fn plan_defaults() {
        let p = TrainingPlan::default();
        assert_eq!((p.rounds, p.epochs, p.batch_size), (20, 8, 3));
        assert_eq!(p.cycle_period, 1.0);
        assert_eq!(p.adam, AdamConfig { learning_rate: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 });
    }

    #[test]
    fn zero_epochs_is_identity() {
        let (params, data, _) = small();
        let plan = TrainingPlan { epochs: 0, ..Default::default() };
        assert_eq!(train_local(&params, &data, &plan, 0).unwrap(), params);
    }

    #[test]
    fn overfits_single_sample() {
        // With one sample the shuffle is a no-op, so the first k epochs of a
        // 50-epoch run are exactly a fresh k-epoch run.
        let params = init_model(&MlpSpec::new(10, 28), 3).unwrap();
        let data = random_data(1, 10, 28, 4);
        let loss_after = |plan: &TrainingPlan| loss(&train_local(&params, &data, plan, 0).unwrap(), &data).unwrap();
        let mut prev = loss(&params, &data).unwrap();
        for epochs in 1..=50 {
            let l = loss_after(&TrainingPlan { epochs, ..Default::default() });
            assert!(l < prev, "epoch {epochs}: {l} !< {prev}");
            prev = l;
        }
        // 50 single-sample steps at the default rate move each weight by at
        // most ~0.05, which is not enough to memorize; a 10x rate is.
        let fast = TrainingPlan {
            epochs: 50,
            adam: AdamConfig { learning_rate: 1e-2, ..Default::default() },
            ..Default::default()
        };
        let l = loss_after(&fast);
        assert!(l < 0.1, "{l}");
    }

    #[test]
    fn training_is_deterministic_and_pure() {
        let (params, data, _) = small();
        let before = params.clone();
        let plan = TrainingPlan { epochs: 3, ..Default::default() };
        let a = train_local(&params, &data, &plan, 9).unwrap();
        let b = train_local(&params, &data, &plan, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(params, before);
        assert_ne!(a, params);
        let c = train_local(&params, &data, &plan, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_dataset_errors() {
        let (params, _, test) = small();
        let empty = Dataset::new(Matrix::zeros(0, 4), vec![]).unwrap();
        let plan = TrainingPlan::default();
        assert!(matches!(train_local(&params, &empty, &plan, 0), Err(Error::EmptyDataset)));
        assert!(matches!(evaluate(&params, &empty), Err(Error::EmptyDataset)));
        assert!(matches!(federated_train(&params, &[], &test, &plan, 0), Err(Error::EmptyList)));
    }

    #[test]
    fn evaluate_examples() {
        let layout = MlpSpec::with_hidden(2, vec![3], 4).layout().unwrap();
        // zero model predicts class 0 everywhere
        let zero = ModelParams::zeros(layout.clone());
        let feats = Matrix::new(8, 2, vec![0.5; 16]).unwrap();
        let test = Dataset::new(feats, vec![0, 1, 2, 3, 0, 1, 2, 3]).unwrap();
        assert_eq!(evaluate(&zero, &test).unwrap(), 0.25);

        // output bias makes class 2 certain
        let mut sure = zero.clone();
        let n = sure.len();
        sure.values_mut()[n - 4 + 2] = 50.0;
        let test2 = Dataset::new(Matrix::new(3, 2, vec![0.1; 6]).unwrap(), vec![2, 2, 2]).unwrap();
        assert_eq!(evaluate(&sure, &test2).unwrap(), 1.0);
    }

    #[test]
    fn fedavg_examples() {
        let layout = MlpSpec::with_hidden(1, vec![1], 1).layout().unwrap();
        let p = ModelParams::new(layout.clone(), vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(fedavg(&[p.clone(), p.clone(), p.clone()]).unwrap(), p);
        let neg = ModelParams::new(layout.clone(), p.values().iter().map(|v| -v).collect()).unwrap();
        assert!(fedavg(&[p.clone(), neg]).unwrap().values().iter().all(|&v| v == 0.0));
        let a = ModelParams::new(layout.clone(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = ModelParams::new(layout.clone(), vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        let c = ModelParams::new(layout.clone(), vec![3.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(fedavg(&[a.clone(), b.clone(), c.clone()]).unwrap().values(), &[2.0, 2.0, 3.0, 4.0]);
        let w = fedavg_weighted(&[a.clone(), b], Some(&[3.0, 1.0])).unwrap();
        assert_eq!(w.values(), &[1.25, 2.5, 3.75, 5.0]);
        let other = ModelParams::zeros(MlpSpec::with_hidden(2, vec![1], 1).layout().unwrap());
        assert!(matches!(fedavg(&[a, other]), Err(Error::LayoutMismatch)));
        assert!(matches!(fedavg(&[]), Err(Error::EmptyList)));
    }

    #[test]
    fn probe_is_deterministic_and_leaves_init() {
        let (params, data, test) = small();
        let before = params.clone();
        let plan = TrainingPlan { epochs: 2, ..Default::default() };
        let a = probe_client(&params, &data, &test, &plan, 5).unwrap();
        let b = probe_client(&params, &data, &test, &plan, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(params, before);
    }

    #[test]
    fn degenerate_client_probe() {
        // all client labels are class 1; a balanced 3-class test set then
        // scores one third once the model predicts class 1 everywhere
        let params = init_model(&MlpSpec::with_hidden(4, vec![8, 8], 3), 1).unwrap();
        let mut client = random_data(60, 4, 3, 7);
        client.labels.iter_mut().for_each(|l| *l = 1);
        let test = random_data(30, 4, 3, 8);
        let plan = TrainingPlan { epochs: 30, ..Default::default() };
        let acc = probe_client(&params, &client, &test, &plan, 0).unwrap();
        assert!((acc - 1.0 / 3.0).abs() < 1e-12, "{acc}");
    }

    #[test]
    fn federated_train_zero_rounds() {
        let (params, data, test) = small();
        let plan = TrainingPlan { rounds: 0, ..Default::default() };
        let out = federated_train(&params, &[&data], &test, &plan, 0).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(out.params, params);
    }

    #[test]
    fn single_client_matches_sequential_training() {
        let (params, data, test) = small();
        let plan = TrainingPlan { rounds: 4, epochs: 2, ..Default::default() };
        let fed = federated_train(&params, &[&data], &test, &plan, 77).unwrap();
        let mut seq = params.clone();
        for k in 0..plan.rounds {
            seq = train_local(&seq, &data, &plan, round_seed(77, k, 0)).unwrap();
        }
        assert_eq!(fed.params.values(), seq.values());
        assert_eq!(fed.history.len(), 4);
    }

    #[test]
    fn identical_clients_average_to_one_update() {
        let (params, data, test) = small();
        let plan = TrainingPlan { rounds: 1, epochs: 1, ..Default::default() };
        let one = train_local(&params, &data, &plan, 3).unwrap();
        let avg = fedavg(&[one.clone(), one.clone(), one.clone()]).unwrap();
        for (a, b) in avg.values().iter().zip(one.values()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
        let _ = test;
    }

    proptest! {
        #[test]
        fn fedavg_is_permutation_invariant(vals in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 4), 1..6), rot in 0usize..6) {
            let layout = MlpSpec::with_hidden(1, vec![1], 1).layout().unwrap();
            let sets: Vec<ModelParams> = vals.iter().map(|v| ModelParams::new(layout.clone(), v.clone()).unwrap()).collect();
            let mut shuffled = sets.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = fedavg(&sets).unwrap();
            let b = fedavg(&shuffled).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
